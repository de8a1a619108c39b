"""A tiny seeded single-stream diffusion transformer with exact flow round-trips.

The model is a stand-in backbone: pre-norm residual blocks over a token
sequence [text | image], 2D axial rotary encoding on the image tokens, and a
small-gain linear head read as a flow velocity.  Weights are plain seeded
Gaussians scaled like 1/sqrt(fan_in); nothing is trained.

Integration pairing is what makes the end-to-end tests sharp:

* ``invert`` runs explicit forward Euler, z_{k+1} = z_k + Δt·v(z_k, t_k),
  caching pre-rotation attention tokens at every (step, layer) as it goes.
* ``sample`` runs the matching *implicit* reverse step, solving
  u = z_{k+1} − Δt·v(u, t_k) by fixed-point iteration.  The inversion's
  departure state z_k satisfies this equation up to float rounding, so a
  no-control round trip reconstructs the input to ~1e-12 instead of the
  O(Δt) error a mismatched explicit reverse step would give.

Controls hook into every attention layer during sampling: background rows are
hard-replaced from the cache at every step, and key/value concatenation plus
the gated output merge run while the sampling step index is inside the
activation window.  Augmented queries are evaluated by extending the softmax
with the one extra cached entry, which is algebraically identical to
concatenating that entry to the key/value sequences.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import erf

from .attention_control import (
    CacheEntry,
    ControlConfig,
    TokenCache,
    gated_merge,
    h_schedule,
    rope_rotate,
    rope_tables,
)
from .correspondence import LatentGrid
from .errors import BadConfig, CacheMismatch, ShapeMismatch
from .geometry import GridSpec

_RMS_EPS = 1e-8
_HEAD_GAIN = 0.1
_FP_TOL = 1e-13
_FP_MAX_ITERS = 64


@dataclass(frozen=True)
class ToyModelConfig:
    layers: int = 4
    dim: int = 64
    heads: int = 4
    grid: GridSpec = GridSpec(16, 16)
    text_tokens: int = 8
    channels: int = 4
    weight_seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.dim < 4 or self.heads < 1:
            raise BadConfig(f"degenerate model shape: {self}")
        if self.dim % self.heads != 0:
            raise BadConfig(f"dim {self.dim} not divisible by heads {self.heads}")
        if (self.dim // self.heads) % 4 != 0:
            raise BadConfig(
                f"head dim {self.dim // self.heads} must be divisible by 4 "
                "for the 2D axial rotary split"
            )
        if self.text_tokens < 0 or self.channels < 1:
            raise BadConfig(f"bad token/channel counts: {self}")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 50
    activation: int = 40

    def __post_init__(self):
        if self.steps < 1:
            raise BadConfig(f"steps must be >= 1, got {self.steps}")
        if not 0 <= self.activation <= self.steps:
            raise BadConfig(
                f"activation {self.activation} outside [0, {self.steps}]"
            )

    def times(self) -> np.ndarray:
        """Departure times of the forward steps: t_k = k / T."""
        return np.arange(self.steps, dtype=np.float64) / self.steps


def _rmsnorm(x: np.ndarray) -> np.ndarray:
    return x / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + _RMS_EPS)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def _time_features(t: float, dim: int) -> np.ndarray:
    half = dim // 2
    freq = 10000.0 ** (-np.arange(half, dtype=np.float64) / half)
    return np.concatenate([np.sin(t * freq), np.cos(t * freq)])


@dataclass
class _ControlState:
    """Per-step bundle threaded into the forward pass during sampling."""

    cache: TokenCache
    inv_step: int
    config: ControlConfig
    h_t: float
    active: bool  # sampling step index < activation


class ToyModel:
    def __init__(self, config: ToyModelConfig):
        self.config = config
        rng = np.random.default_rng(config.weight_seed & 0xFFFFFFFFFFFFFFFF)
        d, c, hidden = config.dim, config.channels, 4 * config.dim
        self.w_in = rng.standard_normal((c, d)) / math.sqrt(c)
        self.blocks = []
        for _ in range(config.layers):
            self.blocks.append(
                {
                    "wq": rng.standard_normal((d, d)) / math.sqrt(d),
                    "wk": rng.standard_normal((d, d)) / math.sqrt(d),
                    "wv": rng.standard_normal((d, d)) / math.sqrt(d),
                    "wo": rng.standard_normal((d, d)) / math.sqrt(d),
                    "w1": rng.standard_normal((d, hidden)) / math.sqrt(d),
                    "w2": rng.standard_normal((hidden, d)) / math.sqrt(hidden),
                }
            )
        self.w_head = rng.standard_normal((d, c))
        self.head_gain = _HEAD_GAIN / math.sqrt(d)
        self.rope_cos, self.rope_sin = rope_tables(config.grid, config.head_dim)

    # -- identity -----------------------------------------------------------

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.w_in.tobytes())
        for blk in self.blocks:
            for key in ("wq", "wk", "wv", "wo", "w1", "w2"):
                h.update(blk[key].tobytes())
        h.update(self.w_head.tobytes())
        return h.hexdigest()

    def embed_text(self, prompt: str) -> np.ndarray:
        """Deterministic per-prompt pseudo-embedding, (text_tokens, dim)."""
        digest = hashlib.sha256(prompt.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal((self.config.text_tokens, self.config.dim)) / math.sqrt(
            self.config.dim
        )

    # -- forward ------------------------------------------------------------

    def _split_heads(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        return x.reshape(n, self.config.heads, self.config.head_dim).transpose(1, 0, 2)

    def _merge_heads(self, x: np.ndarray) -> np.ndarray:
        return x.transpose(1, 0, 2).reshape(x.shape[1], self.config.dim)

    def velocity(
        self,
        values: np.ndarray,
        t: float,
        text_emb: np.ndarray,
        record: Optional[Tuple[TokenCache, int]] = None,
        control: Optional[_ControlState] = None,
        collect: Optional[dict] = None,
    ) -> np.ndarray:
        """One forward pass read as a flow velocity, (H, W, C).

        ``record=(cache, step)`` stores pre-rotation Q/K/V and attention
        outputs for every layer (inversion).  ``control`` applies the three
        rules (sampling).  ``collect``, when given, receives per-layer
        attention outputs and residuals against the cache.
        """
        cfg = self.config
        n_text = cfg.text_tokens
        grid = cfg.grid
        n_img = grid.width * grid.height
        if values.shape != (grid.height, grid.width, cfg.channels):
            raise ShapeMismatch(
                f"latent {values.shape}, expected {(grid.height, grid.width, cfg.channels)}"
            )

        x_img = values.reshape(n_img, cfg.channels) @ self.w_in
        x = np.concatenate([text_emb, x_img], axis=0) + _time_features(t, cfg.dim)

        scale = 1.0 / math.sqrt(cfg.head_dim)
        sm = control.config.source_map if control is not None else None
        if collect is not None:
            collect.setdefault("attn_residual", [])
            collect.setdefault("y_img", [])

        for layer, blk in enumerate(self.blocks):
            xn = _rmsnorm(x)
            q = self._split_heads(xn @ blk["wq"])
            k = self._split_heads(xn @ blk["wk"])
            v = self._split_heads(xn @ blk["wv"])

            q_img_pre = q[:, n_text:, :]
            k_img_pre = k[:, n_text:, :]
            v_img = v[:, n_text:, :]

            q_img = rope_rotate(q_img_pre, self.rope_cos, self.rope_sin)
            k_img = rope_rotate(k_img_pre, self.rope_cos, self.rope_sin)

            entry = None
            if control is not None:
                entry = control.cache.entry(control.inv_step, layer)
                # rule 1: bg hard replacement, every step and layer
                bg_rows = np.flatnonzero(control.config.partition.bg.ravel())
                if bg_rows.size:
                    cached_q = rope_rotate(
                        entry.q[:, bg_rows, :],
                        self.rope_cos[bg_rows],
                        self.rope_sin[bg_rows],
                    )
                    cached_k = rope_rotate(
                        entry.k[:, bg_rows, :],
                        self.rope_cos[bg_rows],
                        self.rope_sin[bg_rows],
                    )
                    q_img = q_img.copy()
                    k_img = k_img.copy()
                    v_img = v_img.copy()
                    q_img[:, bg_rows, :] = cached_q
                    k_img[:, bg_rows, :] = cached_k
                    v_img[:, bg_rows, :] = entry.v[:, bg_rows, :]
                    if collect is not None:
                        # measured, not assumed: the replaced rows against a
                        # fresh re-encoding of the cache
                        res = max(
                            float(np.abs(q_img[:, bg_rows, :] - cached_q).max()),
                            float(np.abs(k_img[:, bg_rows, :] - cached_k).max()),
                            float(np.abs(v_img[:, bg_rows, :] - entry.v[:, bg_rows, :]).max()),
                        )
                        collect["bg_residual"] = max(collect.get("bg_residual", 0.0), res)

            q_all = np.concatenate([q[:, :n_text, :], q_img], axis=1)
            k_all = np.concatenate([k[:, :n_text, :], k_img], axis=1)
            v_all = np.concatenate([v[:, :n_text, :], v_img], axis=1)

            scores = np.matmul(q_all, k_all.transpose(0, 2, 1)) * scale
            m = scores.max(axis=2, keepdims=True)
            e = np.exp(scores - m)
            denom = e.sum(axis=2, keepdims=True)
            y_heads = np.matmul(e / denom, v_all)

            if control is not None and control.active and sm is not None and len(sm):
                # rule 2: one extra cached key/value per dst ∪ trans query.
                # Extending the softmax by one term is exactly concatenation.
                rows = sm.rows
                src = sm.src
                extra_k = rope_rotate(
                    entry.k[:, src, :], self.rope_cos[rows], self.rope_sin[rows]
                )
                extra_v = entry.v[:, src, :]
                q_aug = q_all[:, n_text + rows, :]
                s_extra = np.sum(q_aug * extra_k, axis=2) * scale
                s_base = scores[:, n_text + rows, :]
                m_aug = np.maximum(s_base.max(axis=2), s_extra)
                e_base = np.exp(s_base - m_aug[..., None])
                e_extra = np.exp(s_extra - m_aug)
                denom_aug = e_base.sum(axis=2) + e_extra
                y_aug = (
                    np.matmul(e_base, v_all) + e_extra[..., None] * extra_v
                ) / denom_aug[..., None]
                y_heads[:, n_text + rows, :] = y_aug

            y = self._merge_heads(y_heads)
            y_img = y[n_text:]

            if record is not None:
                cache, step = record
                cache.record(
                    step,
                    layer,
                    CacheEntry(
                        q=q_img_pre.copy(),
                        k=k_img_pre.copy(),
                        v=v_img.copy(),
                        y=y_img.copy(),
                    ),
                )

            if collect is not None:
                if entry is not None:
                    collect["attn_residual"].append(
                        float(np.abs(y_img - entry.y).max())
                    )
                collect["y_img"].append(y_img.copy())

            if control is not None and control.active and sm is not None:
                # rule 3: gated merge toward cached source outputs, dst only
                y_img = gated_merge(y_img, entry.y, sm, control.h_t)
                y = np.concatenate([y[:n_text], y_img], axis=0)

            x = x + y @ blk["wo"]
            x = x + _gelu(_rmsnorm(x) @ blk["w1"]) @ blk["w2"]

        v_out = _rmsnorm(x[n_text:]) @ self.w_head * self.head_gain
        return v_out.reshape(grid.height, grid.width, cfg.channels)


def build_model(config: ToyModelConfig) -> ToyModel:
    return ToyModel(config)


# ---------------------------------------------------------------------------
# flow integration


def _cache_meta(model: ToyModel, sampler: SamplerConfig, prompt: str) -> Dict[str, str]:
    return {
        "model": model.checksum(),
        "steps": str(sampler.steps),
        "text": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
        "grid": f"{model.config.grid.width}x{model.config.grid.height}",
    }


def invert(
    z0: LatentGrid,
    prompt: str,
    sampler: SamplerConfig,
    model: ToyModel,
) -> Tuple[LatentGrid, TokenCache]:
    """Forward-Euler integration 0 → 1, caching tokens at every step/layer."""
    cfg = model.config
    if z0.grid != cfg.grid or z0.channels != cfg.channels:
        raise ShapeMismatch(
            f"latent {z0.grid}x{z0.channels} does not match model "
            f"{cfg.grid}x{cfg.channels}"
        )
    text_emb = model.embed_text(prompt)
    cache = TokenCache(
        steps=sampler.steps,
        layers=cfg.layers,
        grid=cfg.grid,
        meta=_cache_meta(model, sampler, prompt),
    )
    dt = 1.0 / sampler.steps
    z = z0.values.astype(np.float64)
    for step, t in enumerate(sampler.times()):
        z = z + dt * model.velocity(z, float(t), text_emb, record=(cache, step))
    cache.freeze()
    return LatentGrid(grid=cfg.grid, values=z), cache


@dataclass
class SampleDiagnostics:
    """Everything the metrics document wants to know about a sampling run."""

    gamma_trace: List[float] = field(default_factory=list)  # length T
    gamma_active: List[float] = field(default_factory=list)  # length = activation
    attn_residual: Optional[np.ndarray] = None  # (T, layers) max |y - ȳ|
    bg_token_residual: float = 0.0
    fixed_point_iters: List[int] = field(default_factory=list)
    merges_fired: int = 0
    augmented_queries: int = 0


def sample(
    zT: LatentGrid,
    prompt: str,
    sampler: SamplerConfig,
    model: ToyModel,
    cache: TokenCache,
    control: Optional[ControlConfig] = None,
    probe=None,
) -> Tuple[LatentGrid, SampleDiagnostics]:
    """Implicit reverse-Euler sampling with the control rules applied.

    Sampling step j pairs with inversion step k = T−1−j and solves
    u = z_{k+1} − Δt·v(u, t_k) by fixed-point iteration.  ``probe``, if
    given, is called as probe(step_j, inv_step_k, layer, y_img) with the
    attention output of the accepted state at every layer.
    """
    cfg = model.config
    if zT.grid != cfg.grid or zT.channels != cfg.channels:
        raise ShapeMismatch(
            f"latent {zT.grid}x{zT.channels} does not match model "
            f"{cfg.grid}x{cfg.channels}"
        )
    expected = _cache_meta(model, sampler, prompt)
    if cache.meta != expected:
        diffs = [key for key in expected if cache.meta.get(key) != expected[key]]
        raise CacheMismatch(f"cache does not match this run; differing: {diffs}")
    if control is not None and control.activation > sampler.steps:
        raise BadConfig(
            f"activation {control.activation} exceeds steps {sampler.steps}"
        )

    text_emb = model.embed_text(prompt)
    dt = 1.0 / sampler.steps
    T = sampler.steps
    diag = SampleDiagnostics()
    if control is not None:
        max_a = float(control.source_map.dst_weight.max()) if len(
            control.source_map.dst_rows
        ) else 0.0
        residual = np.zeros((T, cfg.layers))
    else:
        max_a = 0.0
        residual = None

    z = zT.values.astype(np.float64)
    for j in range(T):
        k = T - 1 - j
        t_k = k / T
        if control is not None:
            h_t = h_schedule(j, control.activation, T)
            state = _ControlState(
                cache=cache,
                inv_step=k,
                config=control,
                h_t=h_t,
                active=j < control.activation,
            )
        else:
            h_t = 0.0
            state = None
        diag.gamma_trace.append(h_t * max_a)
        if control is not None and j < control.activation:
            diag.gamma_active.append(h_t * max_a)
            if len(control.source_map.dst_rows) and h_t > 0.0:
                diag.merges_fired += cfg.layers
            diag.augmented_queries += len(control.source_map) * cfg.layers

        u = z.copy()
        iters = 0
        for _ in range(_FP_MAX_ITERS):
            iters += 1
            u_next = z - dt * model.velocity(u, t_k, text_emb, control=state)
            delta = float(np.abs(u_next - u).max())
            u = u_next
            if delta <= _FP_TOL * max(1.0, float(np.abs(u).max())):
                break
        diag.fixed_point_iters.append(iters)

        if control is not None or probe is not None:
            collect: dict = {}
            model.velocity(u, t_k, text_emb, control=state, collect=collect)
            if control is not None:
                for layer, res in enumerate(collect["attn_residual"]):
                    residual[j, layer] = res
                diag.bg_token_residual = max(
                    diag.bg_token_residual, collect.get("bg_residual", 0.0)
                )
            if probe is not None:
                for layer, y_img in enumerate(collect["y_img"]):
                    probe(j, k, layer, y_img)
        z = u

    diag.attn_residual = residual
    return LatentGrid(grid=cfg.grid, values=z), diag
