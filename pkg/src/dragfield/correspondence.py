"""Lattice projection, collision resolution, region partitioning, latent warping.

The displacement field produced by :mod:`dragfield.geometry` lives in
continuous coordinates.  This module lands it back on the integer lattice:

* ``project`` rounds displaced positions to cells (half-away-from-zero) and
  flags anything that left the canvas — out-of-bounds content is dropped, not
  clamped, so mass never piles up on the border.
* ``resolve_collisions`` keeps, for every contested destination cell, the
  source with the largest weight (ties go to the lowest row-major source
  index) and yields the matching point map M and weight map A.
* ``partition_regions`` splits the grid into four disjoint sets: ``dst``
  (resolved destinations), ``inp`` (vacated editable cells to inpaint),
  ``trans`` (a Chebyshev ring around dst ∪ inp that blends boundaries) and
  ``bg`` (everything else).
* ``build_warped_latent`` assembles the warped initial latent: destination
  cells copy their matched source vector bit-exactly, inpaint cells draw
  fresh unit Gaussians from a stream keyed by (seed, cell index) so the
  result is independent of iteration order, and everything else passes
  through untouched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import binary_dilation

from .errors import EmptyDestinationWarning, ShapeMismatch
from .geometry import (
    DisplacementField,
    DragInstruction,
    EditableMask,
    GridSpec,
    Mode,
    Point,
    ScaleVector,
    reference_circle,
    wta_fuse,
)

DEFAULT_TRANS_WIDTH = 2

# Region labels used by serialization and visualization, in this order.
LABEL_BG, LABEL_DST, LABEL_INP, LABEL_TRANS = 0, 1, 2, 3


@dataclass(frozen=True)
class LatentGrid:
    """A channels-last real tensor laid out over the lattice."""

    grid: GridSpec
    values: np.ndarray  # (height, width, channels) float64

    def __post_init__(self):
        v = self.values
        if v.ndim != 3 or v.shape[0] != self.grid.height or v.shape[1] != self.grid.width:
            raise ShapeMismatch(
                f"latent shape {v.shape} does not match grid "
                f"{self.grid.height}x{self.grid.width}"
            )
        if not np.isfinite(v).all():
            raise ShapeMismatch("latent contains non-finite values")

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class RegionPartition:
    """Four pairwise-disjoint boolean masks covering the whole lattice."""

    grid: GridSpec
    bg: np.ndarray
    dst: np.ndarray
    inp: np.ndarray
    trans: np.ndarray

    def labels(self) -> np.ndarray:
        """Row-major label image (0=bg, 1=dst, 2=inp, 3=trans)."""
        lab = np.zeros((self.grid.height, self.grid.width), dtype=np.uint8)
        lab[self.dst] = LABEL_DST
        lab[self.inp] = LABEL_INP
        lab[self.trans] = LABEL_TRANS
        return lab

    def counts(self) -> dict:
        return {
            "bg": int(self.bg.sum()),
            "dst": int(self.dst.sum()),
            "inp": int(self.inp.sum()),
            "trans": int(self.trans.sum()),
        }


@dataclass(frozen=True)
class MatchingMaps:
    """Point map M and weight map A, defined exactly on the dst cells.

    Rows are sorted by destination row-major index, which makes the whole
    plan bitwise-reproducible.  ``weights`` is min(1, α) of the winning
    source, so an infinite handle-cell weight lands at exactly 1.
    """

    dst_cells: np.ndarray  # (n, 2) int64, [x, y]
    sources: np.ndarray  # (n, 2) int64, [x, y]
    weights: np.ndarray  # (n,) float64 in (0, 1]

    def __len__(self) -> int:
        return len(self.dst_cells)

    @classmethod
    def empty(cls) -> "MatchingMaps":
        return cls(
            dst_cells=np.zeros((0, 2), dtype=np.int64),
            sources=np.zeros((0, 2), dtype=np.int64),
            weights=np.zeros((0,), dtype=np.float64),
        )


@dataclass(frozen=True)
class CorrespondencePlan:
    partition: RegionPartition
    maps: MatchingMaps
    noise_seed: int
    warped: Optional[LatentGrid] = None


def project(points: np.ndarray, grid: GridSpec):
    """Round continuous positions to lattice cells, half-away-from-zero.

    Returns (cells, in_bounds).  Cells outside the grid keep their rounded
    coordinates but are flagged; callers decide what dropping means.
    """
    pts = np.asarray(points, dtype=np.float64)
    # np.round is round-half-to-even; floor(|x| + 0.5) with the sign restored
    # is the documented half-away-from-zero rule.
    cells = (np.copysign(np.floor(np.abs(pts) + 0.5), pts)).astype(np.int64)
    in_bounds = (
        (cells[..., 0] >= 0)
        & (cells[..., 0] < grid.width)
        & (cells[..., 1] >= 0)
        & (cells[..., 1] < grid.height)
    )
    return cells, in_bounds


def resolve_collisions(field: DisplacementField) -> MatchingMaps:
    """Per-destination argmax over colliding sources.

    Ties on exactly equal weight break toward the lowest row-major source
    index; since the field enumerates mask cells in row-major order, that is
    simply the lowest field row.
    """
    dest, ok = project(field.cells + field.vectors, field.grid)
    if not ok.any():
        warnings.warn(
            "every displaced cell left the grid; destination set is empty",
            EmptyDestinationWarning,
        )
        return MatchingMaps.empty()

    src_rows = np.flatnonzero(ok)
    dest = dest[ok]
    dest_idx = dest[:, 1] * field.grid.width + dest[:, 0]
    alpha = field.alpha[ok]

    # Sort by (destination, descending α, source order); -α with α = +inf is
    # -inf, which sorts first within its destination exactly as wanted.
    order = np.lexsort((src_rows, -alpha, dest_idx))
    dest_sorted = dest_idx[order]
    _, first = np.unique(dest_sorted, return_index=True)
    win = order[first]

    dst_cells = dest[win]
    sources = field.cells[src_rows[win]]
    weights = np.minimum(1.0, alpha[win])
    return MatchingMaps(dst_cells=dst_cells, sources=sources, weights=weights)


def partition_regions(
    mask: EditableMask, maps: MatchingMaps, trans_width: int = DEFAULT_TRANS_WIDTH
) -> RegionPartition:
    """Split the lattice into bg / dst / inp / trans.

    inp is the vacated part of the editable region (mask cells not re-covered
    by any destination).  trans is a Chebyshev ring of width ``trans_width``
    around dst ∪ inp and may extend past the mask.
    """
    if trans_width < 0:
        raise ValueError(f"trans_width must be >= 0, got {trans_width}")
    grid = mask.grid
    dst = np.zeros((grid.height, grid.width), dtype=bool)
    if len(maps):
        dst[maps.dst_cells[:, 1], maps.dst_cells[:, 0]] = True
    inp = mask.cells & ~dst

    core = dst | inp
    if trans_width > 0 and core.any():
        # 3x3 structuring element = one Chebyshev step per iteration.  Note
        # binary_dilation(iterations=0) means "until convergence" in scipy,
        # hence the explicit guard above.
        grown = binary_dilation(core, structure=np.ones((3, 3), bool), iterations=trans_width)
        trans = grown & ~core
    else:
        trans = np.zeros_like(core)
    bg = ~(core | trans)
    return RegionPartition(grid=grid, bg=bg, dst=dst, inp=inp, trans=trans)


def _inpaint_noise(noise_seed: int, cell_index: int, channels: int) -> np.ndarray:
    # Counter-based stream: one child generator per cell, keyed by (seed, cell
    # row-major index).  Masking keeps negative seeds inside SeedSequence's
    # accepted range without changing non-negative ones.
    rng = np.random.default_rng((noise_seed & 0xFFFFFFFFFFFFFFFF, cell_index))
    return rng.standard_normal(channels)


def build_warped_latent(
    z: LatentGrid,
    partition: RegionPartition,
    maps: MatchingMaps,
    noise_seed: int,
) -> LatentGrid:
    """Warped initial latent: copy into dst, fresh noise in inp, rest verbatim."""
    if z.grid != partition.grid:
        raise ShapeMismatch(
            f"latent grid {z.grid} does not match partition grid {partition.grid}"
        )
    out = z.values.copy()
    if len(maps):
        out[maps.dst_cells[:, 1], maps.dst_cells[:, 0], :] = z.values[
            maps.sources[:, 1], maps.sources[:, 0], :
        ]
    ys, xs = np.nonzero(partition.inp)
    for y, x in zip(ys.tolist(), xs.tolist()):
        out[y, x, :] = _inpaint_noise(noise_seed, y * z.grid.width + x, z.channels)
    return LatentGrid(grid=z.grid, values=out)


def compute_correspondence(
    mask: EditableMask,
    instructions: Sequence[DragInstruction],
    mode: Mode = "drag",
    scale: ScaleVector = ScaleVector(),
    trans_width: int = DEFAULT_TRANS_WIDTH,
):
    """Field → maps → partition in one call.  Returns (field, maps, partition)."""
    circle = reference_circle(mask) if mode == "drag" else None
    field = wta_fuse(mask, instructions, circle, mode=mode, scale=scale)
    maps = resolve_collisions(field)
    partition = partition_regions(mask, maps, trans_width)
    return field, maps, partition


def identity_partition(grid: GridSpec) -> RegionPartition:
    """The no-edit partition: everything is background."""
    shape = (grid.height, grid.width)
    return RegionPartition(
        grid=grid,
        bg=np.ones(shape, dtype=bool),
        dst=np.zeros(shape, dtype=bool),
        inp=np.zeros(shape, dtype=bool),
        trans=np.zeros(shape, dtype=bool),
    )
