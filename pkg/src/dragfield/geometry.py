"""Grid geometry: drag instructions, stretch factors, and winner-takes-all fusion.

Conventions used throughout the package:

* A lattice cell is an integer pair ``(x, y)`` with ``x`` the column in
  ``0..width-1`` and ``y`` the row in ``0..height-1``.  Row-major index is
  ``y * width + x``.
* Continuous points live in the closed rectangle ``[0, width-1] x [0, height-1]``.
* Euclidean distance is always computed as ``sqrt(dx*dx + dy*dy)`` (no hypot),
  so independently written scans reproduce the exact same floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import (
    EmptyEditableRegion,
    HandleOutsideCircle,
    NoInstructions,
    PointOutsideCircle,
)

# Absolute slack absorbing float noise in strict inequalities on circle tests.
GEOM_EPS = 1e-9

MAX_CELLS = 1 << 20

Mode = Literal["drag", "move"]


def round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero (2.5 -> 3, -0.5 -> -1)."""
    if x >= 0.0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


def _dist(ax: float, ay: float, bx: float, by: float) -> float:
    dx = ax - bx
    dy = ay - by
    return math.sqrt(dx * dx + dy * dy)


@dataclass(frozen=True)
class GridSpec:
    """Latent grid dimensions, in cells."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        if self.width * self.height > MAX_CELLS:
            raise ValueError(f"grid exceeds {MAX_CELLS} cells")

    @property
    def cells(self) -> int:
        return self.width * self.height

    def contains_cell(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def contains_point(self, p: "Point") -> bool:
        return 0.0 <= p.x <= self.width - 1 and 0.0 <= p.y <= self.height - 1

    def cell_index(self, x: int, y: int) -> int:
        return y * self.width + x


@dataclass(frozen=True)
class Point:
    """Continuous grid-space coordinate."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got {self}")

    def lattice_cell(self) -> tuple[int, int]:
        """Nearest lattice cell, halves rounded away from zero."""
        return round_half_away(self.x), round_half_away(self.y)


@dataclass(frozen=True)
class DragInstruction:
    """A handle -> target pair. Zero-length drags pin their neighborhood."""

    handle: Point
    target: Point

    @property
    def vector(self) -> tuple[float, float]:
        return self.target.x - self.handle.x, self.target.y - self.handle.y


@dataclass(frozen=True)
class ScaleVector:
    """Per-axis scale factors for the unified move/scale model."""

    rx: float = 1.0
    ry: float = 1.0

    def __post_init__(self):
        if not (self.rx > 0 and self.ry > 0):
            raise ValueError(f"scale components must be positive, got ({self.rx}, {self.ry})")

    def is_identity(self) -> bool:
        return self.rx == 1.0 and self.ry == 1.0


class EditableMask:
    """Boolean lattice mask of cells eligible to move."""

    def __init__(self, grid: GridSpec, cells: np.ndarray):
        cells = np.asarray(cells, dtype=bool)
        if cells.shape != (grid.height, grid.width):
            raise ValueError(
                f"mask shape {cells.shape} does not match grid "
                f"{grid.height}x{grid.width} (rows x cols)"
            )
        self.grid = grid
        self.cells = cells

    @classmethod
    def from_cells(cls, grid: GridSpec, cell_list: Sequence[tuple[int, int]]) -> "EditableMask":
        arr = np.zeros((grid.height, grid.width), dtype=bool)
        for x, y in cell_list:
            arr[y, x] = True
        return cls(grid, arr)

    @classmethod
    def full(cls, grid: GridSpec) -> "EditableMask":
        return cls(grid, np.ones((grid.height, grid.width), dtype=bool))

    @classmethod
    def empty(cls, grid: GridSpec) -> "EditableMask":
        return cls(grid, np.zeros((grid.height, grid.width), dtype=bool))

    def is_empty(self) -> bool:
        return not bool(self.cells.any())

    def count(self) -> int:
        return int(self.cells.sum())

    def cell_array(self) -> np.ndarray:
        """Editable cells as an (m, 2) int array of (x, y), row-major order."""
        ys, xs = np.nonzero(self.cells)
        return np.stack([xs, ys], axis=1).astype(np.int64)

    def is_editable(self, x: int, y: int) -> bool:
        if not self.grid.contains_cell(x, y):
            return False
        return bool(self.cells[y, x])


@dataclass(frozen=True)
class ReferenceCircle:
    """Circle circumscribing the bounding rectangle of the editable set."""

    center: Point
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive and finite, got {self.radius}")

    def contains(self, p: Point, slack: float = GEOM_EPS) -> bool:
        return _dist(p.x, p.y, self.center.x, self.center.y) <= self.radius + slack

    def strictly_inside(self, p: Point, slack: float = GEOM_EPS) -> bool:
        return _dist(p.x, p.y, self.center.x, self.center.y) < self.radius - slack


@dataclass
class DisplacementField:
    """Fused displacement over the editable cells.

    Arrays are aligned with ``cells`` (row-major order over the mask):
    ``vectors[j]`` is the fused displacement of cell ``cells[j]``,
    ``winners[j]`` the 0-based index of the winning instruction,
    ``alpha[j]`` the inverse-distance weight of that win (``inf`` where
    ``alpha_inf[j]`` is set, i.e. the cell is its winner's handle cell).
    """

    grid: GridSpec
    cells: np.ndarray      # (m, 2) int64, row-major over the mask
    vectors: np.ndarray    # (m, 2) float64
    winners: np.ndarray    # (m,) int64
    alpha: np.ndarray      # (m,) float64, +inf allowed
    alpha_inf: np.ndarray  # (m,) bool

    def __len__(self) -> int:
        return self.cells.shape[0]


def reference_circle(mask: EditableMask) -> ReferenceCircle:
    """Circle through the corners of the editable set's bounding rectangle.

    A single-cell region degenerates to radius 0.5 so the stretch factor
    stays well defined at the handle.
    """
    if mask.is_empty():
        raise EmptyEditableRegion("editable mask has no cells")
    cells = mask.cell_array()
    x0, y0 = cells.min(axis=0)
    x1, y1 = cells.max(axis=0)
    cx = (float(x0) + float(x1)) / 2.0
    cy = (float(y0) + float(y1)) / 2.0
    half_w = (float(x1) - float(x0)) / 2.0
    half_h = (float(y1) - float(y0)) / 2.0
    radius = math.sqrt(half_w * half_w + half_h * half_h)
    if radius == 0.0:
        radius = 0.5
    return ReferenceCircle(Point(cx, cy), radius)


def _forward_intersection_t(
    sx: float, sy: float, ux: float, uy: float, circle: ReferenceCircle
) -> float:
    """Distance from s to the circle along unit direction (ux, uy).

    Requires s strictly inside, so exactly one forward intersection exists.
    """
    ox = sx - circle.center.x
    oy = sy - circle.center.y
    b = ux * ox + uy * oy
    c0 = ox * ox + oy * oy - circle.radius * circle.radius
    return -b + math.sqrt(b * b - c0)


def stretch_factor(p: Point, s: Point, circle: ReferenceCircle) -> float:
    """Elasticity stretch factor in [0, 1]: 1 at the handle, 0 on the circle.

    Extends the ray s -> p to its circle intersection q and returns
    ``|p - q| / |s - q|``.
    """
    s_dist = _dist(s.x, s.y, circle.center.x, circle.center.y)
    if s_dist >= circle.radius - GEOM_EPS:
        raise HandleOutsideCircle(
            f"handle {s} at distance {s_dist} not strictly inside circle r={circle.radius}"
        )
    p_dist = _dist(p.x, p.y, circle.center.x, circle.center.y)
    if p_dist > circle.radius + GEOM_EPS:
        raise PointOutsideCircle(
            f"point {p} at distance {p_dist} outside circle r={circle.radius}"
        )
    t_p = _dist(p.x, p.y, s.x, s.y)
    if t_p <= GEOM_EPS:
        return 1.0
    ux = (p.x - s.x) / t_p
    uy = (p.y - s.y) / t_p
    t_q = _forward_intersection_t(s.x, s.y, ux, uy, circle)
    lam = (t_q - t_p) / t_q
    return min(1.0, max(0.0, lam))


def per_instruction_displacement(
    p: Point, instr: DragInstruction, circle: ReferenceCircle
) -> tuple[float, float]:
    """Displacement of p under one drag: the stretch factor times the drag vector."""
    lam = stretch_factor(p, instr.handle, circle)
    dx, dy = instr.vector
    return lam * dx, lam * dy


def wta_fuse(
    mask: EditableMask,
    instructions: Sequence[DragInstruction],
    circle: ReferenceCircle | None,
    mode: Mode = "drag",
    scale: ScaleVector = ScaleVector(),
) -> DisplacementField:
    """Fuse per-instruction displacements by winner-takes-all.

    Each editable cell is assigned entirely to its nearest handle (inverse
    Euclidean distance weight; the handle's own lattice cell carries an
    infinite weight).  Ties break toward the lowest instruction index.  In
    drag mode the winner contributes its stretch-scaled vector; in move mode
    the raw vector with unit weight.  Both modes add the axis-aligned scale
    term ``(r - 1) * (p - s)``.
    """
    if len(instructions) == 0:
        raise NoInstructions("winner-takes-all fusion needs at least one instruction")
    if mask.is_empty():
        raise EmptyEditableRegion("editable mask has no cells")
    if mode == "drag" and circle is None:
        raise ValueError("drag mode requires a reference circle")
    for instr in instructions:
        for pt in (instr.handle, instr.target):
            if not mask.grid.contains_point(pt):
                raise ValueError(f"instruction point {pt} outside the grid rectangle")

    cells = mask.cell_array()
    pts = cells.astype(np.float64)
    m = pts.shape[0]
    k = len(instructions)

    # Inverse-distance weights per (cell, instruction); exact handle cells get inf.
    alpha_mat = np.empty((m, k), dtype=np.float64)
    inf_mat = np.zeros((m, k), dtype=bool)
    for i, instr in enumerate(instructions):
        dx = pts[:, 0] - instr.handle.x
        dy = pts[:, 1] - instr.handle.y
        dist = np.sqrt(dx * dx + dy * dy)
        hx, hy = instr.handle.lattice_cell()
        is_handle_cell = (cells[:, 0] == hx) & (cells[:, 1] == hy)
        with np.errstate(divide="ignore"):
            alpha_mat[:, i] = 1.0 / dist
        alpha_mat[is_handle_cell, i] = np.inf
        inf_mat[:, i] = is_handle_cell

    # argmax returns the first maximum: ties already break toward lowest index.
    winners = np.argmax(alpha_mat, axis=1).astype(np.int64)
    row = np.arange(m)
    alpha = alpha_mat[row, winners]
    alpha_inf = inf_mat[row, winners]

    vectors = np.zeros((m, 2), dtype=np.float64)
    for i, instr in enumerate(instructions):
        sel = winners == i
        if not sel.any():
            # Stretch preconditions are still checked for losing handles so
            # malformed masks fail loudly rather than silently.
            if mode == "drag":
                _check_handle_inside(instr.handle, circle)
            continue
        dx, dy = instr.vector
        px = pts[sel, 0]
        py = pts[sel, 1]
        if mode == "drag":
            lam = _stretch_factor_vec(px, py, instr.handle, circle)
        else:
            lam = np.ones(px.shape[0], dtype=np.float64)
        vectors[sel, 0] = lam * dx + (scale.rx - 1.0) * (px - instr.handle.x)
        vectors[sel, 1] = lam * dy + (scale.ry - 1.0) * (py - instr.handle.y)

    if mode == "move":
        alpha = np.ones(m, dtype=np.float64)
        alpha_inf = np.zeros(m, dtype=bool)

    return DisplacementField(
        grid=mask.grid,
        cells=cells,
        vectors=vectors,
        winners=winners,
        alpha=alpha,
        alpha_inf=alpha_inf,
    )


def _check_handle_inside(s: Point, circle: ReferenceCircle) -> None:
    if not circle.strictly_inside(s):
        d = _dist(s.x, s.y, circle.center.x, circle.center.y)
        raise HandleOutsideCircle(
            f"handle {s} at distance {d} not strictly inside circle r={circle.radius}"
        )


def _stretch_factor_vec(
    px: np.ndarray, py: np.ndarray, s: Point, circle: ReferenceCircle
) -> np.ndarray:
    """Vectorized stretch factor over points (px, py) for one handle."""
    _check_handle_inside(s, circle)
    cx, cy, r = circle.center.x, circle.center.y, circle.radius
    p_dist = np.sqrt((px - cx) ** 2 + (py - cy) ** 2)
    if np.any(p_dist > r + GEOM_EPS):
        worst = float(p_dist.max())
        raise PointOutsideCircle(f"point at distance {worst} outside circle r={r}")
    dx = px - s.x
    dy = py - s.y
    t_p = np.sqrt(dx * dx + dy * dy)
    near = t_p <= GEOM_EPS
    safe_t = np.where(near, 1.0, t_p)
    ux = dx / safe_t
    uy = dy / safe_t
    ox = s.x - cx
    oy = s.y - cy
    b = ux * ox + uy * oy
    c0 = ox * ox + oy * oy - r * r
    t_q = -b + np.sqrt(b * b - c0)
    lam = (t_q - t_p) / t_q
    lam = np.clip(lam, 0.0, 1.0)
    lam[near] = 1.0
    return lam
