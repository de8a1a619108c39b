"""Orchestration shared by the CLI and the HTTP service.

Keeps the two entry points byte-compatible: both serialize the same plan
document with the same canonical JSON, and both run the same simulation
recipe (seeded model, synthesized or supplied z_0, invert → warp → controlled
sample → metrics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .attention_control import ControlConfig
from .correspondence import (
    CorrespondencePlan,
    LatentGrid,
    MatchingMaps,
    RegionPartition,
    build_warped_latent,
    compute_correspondence,
    identity_partition,
)
from .geometry import DisplacementField
from .io_formats import DragPlan, build_plan_document
from .toy_mmdit import SamplerConfig, ToyModelConfig, build_model, invert, sample


def plan_correspondence(
    plan: DragPlan,
) -> Tuple[Optional[DisplacementField], MatchingMaps, RegionPartition]:
    """Field/maps/partition for a parsed plan; empty plans mean 'no edit'."""
    if not plan.instructions:
        return None, MatchingMaps.empty(), identity_partition(plan.grid)
    return compute_correspondence(
        plan.mask,
        list(plan.instructions),
        mode=plan.mode,
        scale=plan.scale,
        trans_width=plan.trans_width,
    )


def run_plan(plan: DragPlan) -> dict:
    """The plan document served by /api/plan and written by the plan command."""
    field, maps, partition = plan_correspondence(plan)
    return build_plan_document(partition, maps, field)


def dense_field_tensor(
    field: Optional[DisplacementField], partition: RegionPartition
) -> np.ndarray:
    """(H, W, 2) float32 displacement image; zeros outside the editable set."""
    grid = partition.grid
    out = np.zeros((grid.height, grid.width, 2), dtype=np.float32)
    if field is not None:
        out[field.cells[:, 1], field.cells[:, 0], :] = field.vectors.astype(np.float32)
    return out


def dense_weight_tensor(maps: MatchingMaps, partition: RegionPartition) -> np.ndarray:
    """(H, W) float32 matching weights A on dst cells; zeros elsewhere."""
    grid = partition.grid
    out = np.zeros((grid.height, grid.width), dtype=np.float32)
    if len(maps):
        out[maps.dst_cells[:, 1], maps.dst_cells[:, 0]] = maps.weights.astype(np.float32)
    return out


@dataclass
class SimulationResult:
    metrics: dict
    z0: LatentGrid
    zT: LatentGrid
    warped: LatentGrid
    output: LatentGrid
    baseline: LatentGrid
    plan: CorrespondencePlan


def synthesize_latent(grid, channels: int, seed: int) -> LatentGrid:
    rng = np.random.default_rng((seed & 0xFFFFFFFFFFFFFFFF, 0x7A0))
    return LatentGrid(grid, rng.standard_normal((grid.height, grid.width, channels)))


def run_simulation(
    plan: DragPlan,
    seed: int = 0,
    steps: int = 50,
    activation: int = 40,
    z0: Optional[LatentGrid] = None,
    prompt: str = "",
) -> SimulationResult:
    """invert → correspondence → warp → controlled sample, with metrics.

    The no-control reverse run doubles as the round-trip check and the
    baseline for the difference heatmap.
    """
    sampler = SamplerConfig(steps=steps, activation=activation)
    model = build_model(ToyModelConfig(grid=plan.grid, weight_seed=seed))
    if z0 is None:
        z0 = synthesize_latent(plan.grid, model.config.channels, seed)

    zT, cache = invert(z0, prompt, sampler, model)
    field, maps, partition = plan_correspondence(plan)
    warped = build_warped_latent(zT, partition, maps, plan.noise_seed)
    control = ControlConfig(partition=partition, maps=maps, activation=activation)

    baseline, _ = sample(zT, prompt, sampler, model, cache, control=None)
    output, diag = sample(warped, prompt, sampler, model, cache, control=control)

    rt = float(
        np.linalg.norm(baseline.values - z0.values) / np.linalg.norm(z0.values)
    )
    metrics = {
        "steps": steps,
        "activation": activation,
        "seed": seed,
        "noise_seed": plan.noise_seed,
        "round_trip_rel_err": rt,
        "bg_token_residual": diag.bg_token_residual,
        "attn_residual_max": float(diag.attn_residual.max()),
        "gamma_trace": [float(g) for g in diag.gamma_trace],
        "gamma_active": [float(g) for g in diag.gamma_active],
        "merges_fired": diag.merges_fired,
        "augmented_queries": diag.augmented_queries,
        "fixed_point_iters_max": max(diag.fixed_point_iters),
        "regions": partition.counts(),
    }
    for key in ("round_trip_rel_err", "bg_token_residual", "attn_residual_max"):
        if not math.isfinite(metrics[key]):
            metrics[key] = None  # strict JSON; should never happen
    cplan = CorrespondencePlan(
        partition=partition, maps=maps, noise_seed=plan.noise_seed, warped=warped
    )
    return SimulationResult(
        metrics=metrics,
        z0=z0,
        zT=zT,
        warped=warped,
        output=output,
        baseline=baseline,
        plan=cplan,
    )


def difference_heatmap(output: LatentGrid, baseline: LatentGrid) -> np.ndarray:
    """Per-cell L2 difference as a gray (H, W, 3) uint8 image.

    Normalized by the peak difference, but never by less than 1e-3 — a
    run that reproduces its baseline to rounding error must render dark
    instead of amplifying noise to full brightness.
    """
    d = np.sqrt(((output.values - baseline.values) ** 2).sum(axis=2))
    d = d / max(float(d.max()), 1e-3)
    gray = np.clip(np.rint(d * 255.0), 0, 255).astype(np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)
