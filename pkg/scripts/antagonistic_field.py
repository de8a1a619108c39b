#!/usr/bin/env python3
"""Two opposing drags on one region, printed as an ASCII quiver.

The motivating failure mode for averaging-based fusion: dragging the top of
a region up while dragging its bottom down should stretch it apart, not
cancel to zero.  Winner-takes-all assigns each cell wholly to its nearest
handle, so both half-planes keep their full displacement.
"""

import argparse

import numpy as np

from dragfield import (
    DisplacementField,
    DragInstruction,
    EditableMask,
    GridSpec,
    Point,
    reference_circle,
    wta_fuse,
)

ARROWS = {(0, -1): "^", (0, 1): "v", (-1, 0): "<", (1, 0): ">", (0, 0): "o"}


def quiver(field: DisplacementField) -> str:
    grid = field.grid
    canvas = [["." for _ in range(grid.width)] for _ in range(grid.height)]
    for (x, y), (vx, vy) in zip(field.cells, field.vectors):
        step = (int(np.sign(round(vx, 6))), int(np.sign(round(vy, 6))))
        canvas[y][x] = ARROWS.get(step, "*")
    return "\n".join(" ".join(row) for row in canvas)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=16)
    ap.add_argument("--pull", type=float, default=2.0, help="drag distance per handle")
    args = ap.parse_args()

    n = args.size
    grid = GridSpec(n, n)
    arr = np.zeros((n, n), dtype=bool)
    arr[n // 8 : n - n // 8, 3 * n // 8 : 5 * n // 8] = True
    mask = EditableMask(grid, arr)
    circle = reference_circle(mask)

    cx = n / 2.0
    top = DragInstruction(Point(cx, n * 0.3), Point(cx, n * 0.3 - args.pull))
    bottom = DragInstruction(Point(cx, n * 0.7), Point(cx, n * 0.7 + args.pull))
    field = wta_fuse(mask, [top, bottom], circle, mode="drag")

    print(quiver(field))
    up = field.vectors[:, 1] < -1e-9
    down = field.vectors[:, 1] > 1e-9
    print(f"\n{int(up.sum())} cells move up, {int(down.sum())} move down, "
          f"{int((~up & ~down).sum())} pinned at the elastic boundary")
    mags = np.linalg.norm(field.vectors, axis=1)
    print(f"max |v| = {mags.max():.3f}, mean |v| = {mags.mean():.3f}")


if __name__ == "__main__":
    main()
