"""Command-line entry points: plan, simulate, viz, serve.

Exit codes: 0 success, 2 parse/schema error, 3 geometry error, 4 bind
failure.  All randomness flows from explicit --seed flags.  Set
DRAGFIELD_LOG to error/info/debug to control verbosity.
"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click

from .errors import GeometryError, ParseError
from .io_formats import (
    canonical_json,
    parse_drag_plan,
    read_tensor,
    write_region_viz,
    write_tensor,
)
from .pipeline import (
    dense_field_tensor,
    dense_weight_tensor,
    difference_heatmap,
    plan_correspondence,
    run_plan,
    run_simulation,
)

EXIT_PARSE = 2
EXIT_GEOMETRY = 3
EXIT_BIND = 4

log = logging.getLogger("dragfield")


def _setup_logging() -> None:
    level = os.environ.get("DRAGFIELD_LOG", "error").lower()
    chosen = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        level, logging.ERROR
    )
    logging.basicConfig(level=chosen, format="%(levelname)s %(name)s: %(message)s")


def _load_plan(plan_path: str):
    path = Path(plan_path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        click.echo(f"cannot read plan file: {exc}", err=True)
        sys.exit(EXIT_PARSE)
    try:
        return parse_drag_plan(data, base_dir=path.parent)
    except ParseError as exc:
        click.echo(f"ParseError at {exc.path or '/'}: {exc.message}", err=True)
        sys.exit(EXIT_PARSE)


@click.group()
def main() -> None:
    """Correspondence planning and attention-control simulation."""
    _setup_logging()


@main.command("plan")
@click.option("--plan", "plan_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--viz", is_flag=True, help="also write regions.ppm")
def cmd_plan(plan_path: str, out_dir: str, viz: bool) -> None:
    """Compute the correspondence plan and write its artifacts."""
    plan = _load_plan(plan_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        field, maps, partition = plan_correspondence(plan)
    except GeometryError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_GEOMETRY)
    from .io_formats import build_plan_document

    doc = build_plan_document(partition, maps, field)
    (out / "plan.json").write_text(canonical_json(doc), encoding="ascii")
    write_tensor(out / "field.tensor", dense_field_tensor(field, partition))
    write_tensor(out / "weights.tensor", dense_weight_tensor(maps, partition))
    if viz:
        write_region_viz(partition, out / "regions.ppm")
    log.info("plan: %s -> %s", plan_path, out_dir)


@main.command("simulate")
@click.option("--plan", "plan_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--steps", default=50, show_default=True, type=int)
@click.option("--activation", default=40, show_default=True, type=int)
@click.option("--latent", "latent_path", default=None, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_simulate(
    plan_path: str,
    seed: int,
    steps: int,
    activation: int,
    latent_path,
    out_dir: str,
) -> None:
    """Run invert → warp → controlled sample on the toy model."""
    if steps < 1 or not 0 <= activation <= steps:
        click.echo(
            f"need steps >= 1 and 0 <= activation <= steps, "
            f"got steps={steps} activation={activation}",
            err=True,
        )
        sys.exit(EXIT_PARSE)
    plan = _load_plan(plan_path)
    z0 = None
    if latent_path is not None:
        from .correspondence import LatentGrid
        from .errors import CorruptTensor, IoError, ShapeMismatch

        try:
            values = read_tensor(latent_path).astype(float)
            z0 = LatentGrid(plan.grid, values)
        except (IoError, CorruptTensor, ShapeMismatch, ValueError) as exc:
            click.echo(f"bad latent file: {exc}", err=True)
            sys.exit(EXIT_PARSE)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = run_simulation(
            plan, seed=seed, steps=steps, activation=activation, z0=z0
        )
    except GeometryError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_GEOMETRY)
    write_tensor(out / "z0.tensor", result.z0.values)
    write_tensor(out / "zT.tensor", result.zT.values)
    write_tensor(out / "output.tensor", result.output.values)
    (out / "metrics.json").write_text(canonical_json(result.metrics), encoding="ascii")
    log.info(
        "simulate: round_trip_rel_err=%s", result.metrics["round_trip_rel_err"]
    )


@main.command("viz")
@click.option("--plan", "plan_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_viz(plan_path: str, out_path: str) -> None:
    """Render the four-region partition as a PPM image."""
    plan = _load_plan(plan_path)
    try:
        _, _, partition = plan_correspondence(plan)
    except GeometryError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_GEOMETRY)
    write_region_viz(partition, out_path)


@main.command("serve")
@click.option("--port", default=8787, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
def cmd_serve(port: int, host: str) -> None:
    """Start the HTTP planning/simulation service."""
    if not 0 < port < 65536:
        click.echo(f"invalid port {port}", err=True)
        sys.exit(EXIT_BIND)
    import uvicorn

    from .server import create_app

    try:
        uvicorn.run(create_app(), host=host, port=port, log_level="info")
    except OSError as exc:
        click.echo(f"cannot bind {host}:{port}: {exc}", err=True)
        sys.exit(EXIT_BIND)


if __name__ == "__main__":
    main()
