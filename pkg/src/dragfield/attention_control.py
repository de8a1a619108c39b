"""Attention-side control rules driven by a correspondence plan.

Three rules act inside every single-stream attention layer during sampling:

1. **Background replacement** — at every step and layer, image tokens in the
   bg region have their Q/K/V hard-replaced by the cached inversion tokens,
   re-encoded with the rotary embedding at their own position (values carry
   no positional encoding and are copied verbatim).
2. **Key/value concatenation** — queries in dst ∪ trans attend over one extra
   key/value pair taken from the cache at the unified source position: the
   matched source for dst cells, the cell itself for trans cells.  The key is
   re-encoded at the *query's* position; the value is unrotated.
3. **Gated output merge** — attention outputs at dst cells are blended toward
   the cached output of their matched source, gated by γ = h_t · A(x).

Rules 2 and 3 run only while the sampling step index is inside the activation
window; rule 1 always runs.  Tokens cached during inversion are stored
pre-rotation so they can be re-encoded at arbitrary positions later.

Rotary encoding here is the 2D axial construction: the first half of each
head vector rotates with row-derived angles, the second half with
column-derived angles, geometric frequency base 10000, pairs interleaved.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .correspondence import MatchingMaps, RegionPartition
from .errors import BadConfig, BadHeadDim, CacheMiss, NotEditRegion
from .geometry import GridSpec

ROPE_BASE = 10000.0


# ---------------------------------------------------------------------------
# 2D axial rotary encoding


def _check_head_dim(head_dim: int) -> None:
    if head_dim % 4 != 0 or head_dim <= 0:
        raise BadHeadDim(f"2D axial split needs head_dim divisible by 4, got {head_dim}")


def rope_angles(positions: np.ndarray, head_dim: int, base: float = ROPE_BASE) -> np.ndarray:
    """Per-position rotation angles, shape (n, head_dim // 2).

    positions is (n, 2) as (x, y).  The first half of the angle vector comes
    from the row coordinate y, the second half from the column coordinate x.
    """
    _check_head_dim(head_dim)
    pos = np.asarray(positions, dtype=np.float64)
    half = head_dim // 2
    inv_freq = base ** (-np.arange(0, half, 2, dtype=np.float64) / half)
    row = pos[:, 1:2] * inv_freq  # (n, half//2)
    col = pos[:, 0:1] * inv_freq
    return np.concatenate([row, col], axis=1)


def rope_tables(grid: GridSpec, head_dim: int, base: float = ROPE_BASE):
    """cos/sin tables for every cell of the grid, each (n_cells, head_dim)."""
    xs, ys = np.meshgrid(np.arange(grid.width), np.arange(grid.height))
    positions = np.stack([xs.ravel(), ys.ravel()], axis=1)
    ang = rope_angles(positions, head_dim, base)
    return np.repeat(np.cos(ang), 2, axis=1), np.repeat(np.sin(ang), 2, axis=1)


def rope_rotate(tokens: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    """Interleaved-pair rotation; cos/sin broadcast over leading axes."""
    even = tokens[..., 0::2]
    odd = tokens[..., 1::2]
    out = np.empty_like(tokens)
    out[..., 0::2] = even * cos[..., 0::2] - odd * sin[..., 0::2]
    out[..., 1::2] = odd * cos[..., 1::2] + even * sin[..., 1::2]
    return out


def rope_encode(vec: np.ndarray, position, base: float = ROPE_BASE) -> np.ndarray:
    """Rotate a per-head vector (or stack of them) to lattice position (x, y)."""
    vec = np.asarray(vec, dtype=np.float64)
    head_dim = vec.shape[-1]
    ang = rope_angles(np.asarray([position], dtype=np.float64), head_dim, base)[0]
    return rope_rotate(vec, np.repeat(np.cos(ang), 2), np.repeat(np.sin(ang), 2))


# ---------------------------------------------------------------------------
# token cache


@dataclass
class CacheEntry:
    """Pre-rotation attention tokens and outputs for the image positions."""

    q: np.ndarray  # (heads, n_img, head_dim)
    k: np.ndarray  # (heads, n_img, head_dim)
    v: np.ndarray  # (heads, n_img, head_dim)
    y: np.ndarray  # (n_img, model_dim) merged-head attention output


class TokenCache:
    """Write-once record of inversion tokens, keyed by (step, layer).

    ``meta`` pins the run the cache belongs to (model checksum, step count,
    text digest, grid) so sampling can refuse a mismatched cache.
    """

    def __init__(self, steps: int, layers: int, grid: GridSpec, meta: Dict[str, str]):
        self.steps = steps
        self.layers = layers
        self.grid = grid
        self.meta = dict(meta)
        self._entries: Dict[Tuple[int, int], CacheEntry] = {}
        self._frozen = False

    def record(self, step: int, layer: int, entry: CacheEntry) -> None:
        if self._frozen:
            raise RuntimeError("cache is frozen; recording after inversion is a bug")
        self._entries[(step, layer)] = entry

    def freeze(self) -> None:
        self._frozen = True

    def entry(self, step: int, layer: int) -> CacheEntry:
        try:
            return self._entries[(step, layer)]
        except KeyError:
            raise CacheMiss(f"no cache entry for step {step}, layer {layer}") from None

    def __len__(self) -> int:
        return len(self._entries)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for key in sorted(self._entries):
            entry = self._entries[key]
            h.update(repr(key).encode())
            for arr in (entry.q, entry.k, entry.v, entry.y):
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# unified source map and control configuration


@dataclass(frozen=True)
class UnifiedSourceMap:
    """M̃ over dst ∪ trans, flattened to row-major token indices.

    dst rows point at their matched source cell; trans rows point at
    themselves.  ``dst_rows``/``dst_src``/``dst_weight`` single out the dst
    subset for the gated output merge.
    """

    rows: np.ndarray  # (n_aug,) int64 token indices, sorted
    src: np.ndarray  # (n_aug,) int64 source token indices
    dst_rows: np.ndarray  # (n_dst,) int64
    dst_src: np.ndarray  # (n_dst,) int64
    dst_weight: np.ndarray  # (n_dst,) float64 in (0, 1]

    @classmethod
    def build(cls, partition: RegionPartition, maps: MatchingMaps) -> "UnifiedSourceMap":
        width = partition.grid.width
        if len(maps):
            dst_rows = maps.dst_cells[:, 1] * width + maps.dst_cells[:, 0]
            dst_src = maps.sources[:, 1] * width + maps.sources[:, 0]
            dst_weight = maps.weights.astype(np.float64)
            order = np.argsort(dst_rows)
            dst_rows, dst_src, dst_weight = dst_rows[order], dst_src[order], dst_weight[order]
        else:
            dst_rows = np.zeros(0, dtype=np.int64)
            dst_src = np.zeros(0, dtype=np.int64)
            dst_weight = np.zeros(0, dtype=np.float64)
        ys, xs = np.nonzero(partition.trans)
        trans_rows = (ys * width + xs).astype(np.int64)
        rows = np.concatenate([dst_rows, trans_rows])
        src = np.concatenate([dst_src, trans_rows])  # trans cells source themselves
        order = np.argsort(rows)
        return cls(
            rows=rows[order],
            src=src[order],
            dst_rows=dst_rows,
            dst_src=dst_src,
            dst_weight=dst_weight,
        )

    def __len__(self) -> int:
        return len(self.rows)

    def source_of(self, row: int) -> int:
        i = np.searchsorted(self.rows, row)
        if i >= len(self.rows) or self.rows[i] != row:
            raise NotEditRegion(f"token {row} is not in dst ∪ trans")
        return int(self.src[i])


@dataclass(frozen=True)
class ControlConfig:
    """Everything sampling needs to run the three rules."""

    partition: RegionPartition
    maps: MatchingMaps
    activation: int
    source_map: UnifiedSourceMap = field(init=False)

    def __post_init__(self):
        if self.activation < 0:
            raise BadConfig(f"activation must be >= 0, got {self.activation}")
        object.__setattr__(
            self, "source_map", UnifiedSourceMap.build(self.partition, self.maps)
        )


def h_schedule(t_idx: int, activation: int, steps: int) -> float:
    """Linear 1 → 0 gate over the activation window; identically 0 for a = 0."""
    if not 0 <= t_idx < steps:
        raise ValueError(f"step index {t_idx} outside [0, {steps})")
    if activation <= 0 or t_idx >= activation:
        return 0.0
    return max(0.0, 1.0 - t_idx / activation)


# ---------------------------------------------------------------------------
# the three rules


def apply_background_replacement(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    cache: TokenCache,
    step: int,
    layer: int,
    partition: RegionPartition,
    rope_cos: Optional[np.ndarray] = None,
    rope_sin: Optional[np.ndarray] = None,
):
    """Hard-replace bg rows of (q, k, v) with re-encoded cached tokens.

    q/k/v are (heads, n_img, head_dim) in *rotated* space; replacements are
    the cached pre-rotation rows re-encoded at their own positions.  Non-bg
    rows and the inputs themselves are left untouched.
    """
    entry = cache.entry(step, layer)
    bg = partition.bg.ravel()
    if not bg.any():
        return q, k, v
    if rope_cos is None or rope_sin is None:
        rope_cos, rope_sin = rope_tables(partition.grid, q.shape[-1])
    rows = np.flatnonzero(bg)
    q2, k2, v2 = q.copy(), k.copy(), v.copy()
    q2[:, rows, :] = rope_rotate(entry.q[:, rows, :], rope_cos[rows], rope_sin[rows])
    k2[:, rows, :] = rope_rotate(entry.k[:, rows, :], rope_cos[rows], rope_sin[rows])
    v2[:, rows, :] = entry.v[:, rows, :]
    return q2, k2, v2


def augment_kv(
    k_seq: np.ndarray,
    v_seq: np.ndarray,
    cell_row: int,
    cache: TokenCache,
    step: int,
    layer: int,
    source_map: UnifiedSourceMap,
    rope_cos: Optional[np.ndarray] = None,
    rope_sin: Optional[np.ndarray] = None,
):
    """Key/value sequences for one query at token index ``cell_row``.

    Appends exactly one entry: the cached source key re-encoded at the
    query's own position, and the cached source value verbatim.  Existing
    entries are shared, not copied — removing the appended slot recovers the
    inputs bitwise.
    """
    src = source_map.source_of(cell_row)  # NotEditRegion if outside dst ∪ trans
    entry = cache.entry(step, layer)
    head_dim = k_seq.shape[-1]
    if rope_cos is None or rope_sin is None:
        rope_cos, rope_sin = rope_tables(cache.grid, head_dim)
    extra_k = rope_rotate(entry.k[:, src, :], rope_cos[cell_row], rope_sin[cell_row])
    extra_v = entry.v[:, src, :]
    k_ext = np.concatenate([k_seq, extra_k[:, None, :]], axis=1)
    v_ext = np.concatenate([v_seq, extra_v[:, None, :]], axis=1)
    return k_ext, v_ext


def gated_merge(
    y: np.ndarray,
    y_cached: np.ndarray,
    source_map: UnifiedSourceMap,
    h_t: float,
) -> np.ndarray:
    """Blend dst-row outputs toward their cached source outputs.

    y is (n_img, dim) current attention output, y_cached the cache's ȳ.
    Returns a copy; γ = h_t · A(x) row by row, so a unit-weight handle cell
    under h_t = 1 is replaced outright.
    """
    if len(source_map.dst_rows) == 0 or h_t == 0.0:
        return y
    gamma = (h_t * source_map.dst_weight)[:, None]
    out = y.copy()
    rows = source_map.dst_rows
    out[rows] = (1.0 - gamma) * y[rows] + gamma * y_cached[source_map.dst_src]
    return out
