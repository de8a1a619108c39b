"""Bit-exact file formats: drag plans, PGM masks, raw tensors, region images.

Everything here is deterministic byte-for-byte: JSON is emitted with sorted
keys and no whitespace, floats use Python's shortest-repr, tensors are raw
little-endian f32 with a JSON sidecar, and images are binary PGM/PPM with a
fixed three-line header.  Infinite weights (the handle-cell marker) cannot be
represented in strict JSON and are emitted as ``null``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .correspondence import MatchingMaps, RegionPartition
from .errors import CorruptTensor, IoError, ParseError
from .geometry import (
    DisplacementField,
    DragInstruction,
    EditableMask,
    GridSpec,
    Mode,
    Point,
    ScaleVector,
)

FORMAT_VERSION = 1

# §3.2 legend: bg gray, dst red, inp yellow, trans green; one pixel per cell.
REGION_COLORS = np.array(
    [
        [128, 128, 128],  # 0 bg
        [220, 50, 50],  # 1 dst
        [235, 200, 40],  # 2 inp
        [60, 180, 90],  # 3 trans
    ],
    dtype=np.uint8,
)

_SEED_MIN = -(2**63)
_SEED_MAX = 2**64 - 1


# ---------------------------------------------------------------------------
# canonical JSON and run-length encoding


def canonical_json(doc) -> str:
    """Stable serialization: sorted keys, no whitespace, NaN/Inf rejected."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def rle_encode(flat) -> list:
    """Row-major run-length encoding as [value, count] pairs."""
    arr = np.asarray(flat).ravel()
    if arr.size == 0:
        return []
    change = np.flatnonzero(arr[1:] != arr[:-1])
    starts = np.concatenate([[0], change + 1])
    ends = np.concatenate([change + 1, [arr.size]])
    return [[int(arr[s]), int(e - s)] for s, e in zip(starts, ends)]


def rle_decode(pairs, length: int, n_labels: int) -> np.ndarray:
    """Inverse of rle_encode; validates totals, counts and label range."""
    out = np.empty(length, dtype=np.int64)
    pos = 0
    for entry in pairs:
        if (
            not isinstance(entry, (list, tuple))
            or len(entry) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in entry)
        ):
            raise ValueError(f"RLE entries must be [value, count] integer pairs, got {entry!r}")
        value, count = entry
        if not 0 <= value < n_labels:
            raise ValueError(f"RLE value {value} outside [0, {n_labels})")
        if count < 1:
            raise ValueError(f"RLE count must be >= 1, got {count}")
        if pos + count > length:
            raise ValueError(f"RLE overruns expected length {length}")
        out[pos : pos + count] = value
        pos += count
    if pos != length:
        raise ValueError(f"RLE covers {pos} cells, expected {length}")
    return out


# ---------------------------------------------------------------------------
# drag plan documents


@dataclass(frozen=True)
class DragPlan:
    """Validated in-memory form of a plan document."""

    grid: GridSpec
    mode: Mode
    mask: EditableMask
    instructions: tuple
    scale: ScaleVector = ScaleVector()
    trans_width: int = 2
    noise_seed: int = 0


def _err(path: str, message: str) -> ParseError:
    return ParseError(path, message)


def _expect_keys(obj: dict, path: str, required: Sequence[str], optional: Sequence[str] = ()):
    for key in obj:
        if key not in required and key not in optional:
            raise _err(f"{path}/{key}", "unknown field")
    for key in required:
        if key not in obj:
            raise _err(path, f"missing required field '{key}'")


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _err(path, f"expected integer, got {type(value).__name__}")
    return value


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _err(path, f"expected number, got {type(value).__name__}")
    v = float(value)
    if not math.isfinite(v):
        raise _err(path, "expected finite number")
    return v


def _parse_point(value, path: str, grid: GridSpec) -> Point:
    if not isinstance(value, list) or len(value) != 2:
        raise _err(path, "expected [x, y]")
    x = _as_number(value[0], path)
    y = _as_number(value[1], path)
    if not grid.contains_point(Point(x, y)):
        raise _err(path, f"point ({x}, {y}) outside grid {grid.width}x{grid.height}")
    return Point(x, y)


def _parse_mask(value, path: str, grid: GridSpec, base_dir: Optional[Path]) -> EditableMask:
    if isinstance(value, str):
        if base_dir is None:
            raise _err(path, "mask file paths are not allowed here; inline the RLE")
        mask_path = Path(base_dir) / value
        try:
            mask = read_mask_pgm(mask_path)
        except (IoError, OSError) as exc:
            raise _err(path, f"cannot read mask file: {exc}") from exc
        if mask.grid != grid:
            raise _err(
                path,
                f"mask file is {mask.grid.width}x{mask.grid.height}, "
                f"plan grid is {grid.width}x{grid.height}",
            )
        return mask
    if isinstance(value, list):
        try:
            flat = rle_decode(value, grid.width * grid.height, 2)
        except ValueError as exc:
            raise _err(path, str(exc)) from exc
        return EditableMask(grid, flat.reshape(grid.height, grid.width).astype(bool))
    raise _err(path, "mask must be a PGM path or inline [value, count] RLE pairs")


def parse_drag_plan(data: Union[bytes, str], base_dir: Optional[Path] = None) -> DragPlan:
    """Parse and schema-validate a plan document.

    ``base_dir`` enables resolution of PGM mask paths (CLI use); the HTTP
    service passes None so requests stay self-contained.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise _err("", f"not UTF-8: {exc}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise _err("", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise _err("", "top level must be an object")

    _expect_keys(
        doc,
        "",
        required=["mode", "grid", "mask", "instructions"],
        optional=["scale", "trans_width", "noise_seed", "format_version"],
    )

    version = doc.get("format_version", FORMAT_VERSION)
    if _as_int(version, "/format_version") != FORMAT_VERSION:
        raise _err("/format_version", f"unsupported version {version}, expected {FORMAT_VERSION}")

    mode = doc["mode"]
    if mode not in ("drag", "move"):
        raise _err("/mode", f"mode must be 'drag' or 'move', got {mode!r}")

    grid_doc = doc["grid"]
    if not isinstance(grid_doc, dict):
        raise _err("/grid", "expected object {width, height}")
    _expect_keys(grid_doc, "/grid", required=["width", "height"])
    width = _as_int(grid_doc["width"], "/grid/width")
    height = _as_int(grid_doc["height"], "/grid/height")
    try:
        grid = GridSpec(width, height)
    except ValueError as exc:
        raise _err("/grid", str(exc)) from exc

    scale_doc = doc.get("scale", [1.0, 1.0])
    if not isinstance(scale_doc, list) or len(scale_doc) != 2:
        raise _err("/scale", "expected [rx, ry]")
    rx = _as_number(scale_doc[0], "/scale")
    ry = _as_number(scale_doc[1], "/scale")
    try:
        scale = ScaleVector(rx, ry)
    except ValueError as exc:
        raise _err("/scale", str(exc)) from exc

    trans_width = _as_int(doc.get("trans_width", 2), "/trans_width")
    if trans_width < 0:
        raise _err("/trans_width", f"trans_width must be >= 0, got {trans_width}")

    noise_seed = _as_int(doc.get("noise_seed", 0), "/noise_seed")
    if not _SEED_MIN <= noise_seed <= _SEED_MAX:
        raise _err("/noise_seed", "noise_seed must fit in 64 bits")

    mask = _parse_mask(doc["mask"], "/mask", grid, base_dir)

    instr_doc = doc["instructions"]
    if not isinstance(instr_doc, list):
        raise _err("/instructions", "expected a list")
    instructions = []
    for i, item in enumerate(instr_doc):
        ipath = f"/instructions/{i}"
        if not isinstance(item, dict):
            raise _err(ipath, "expected object {handle, target}")
        _expect_keys(item, ipath, required=["handle", "target"])
        handle = _parse_point(item["handle"], f"{ipath}/handle", grid)
        target = _parse_point(item["target"], f"{ipath}/target", grid)
        instructions.append(DragInstruction(handle, target))

    return DragPlan(
        grid=grid,
        mode=mode,
        mask=mask,
        instructions=tuple(instructions),
        scale=scale,
        trans_width=trans_width,
        noise_seed=noise_seed,
    )


def plan_to_json(plan: DragPlan) -> str:
    """Serialize with an inline RLE mask; parse(plan_to_json(p)) == p."""
    doc = {
        "format_version": FORMAT_VERSION,
        "mode": plan.mode,
        "grid": {"width": plan.grid.width, "height": plan.grid.height},
        "mask": rle_encode(plan.mask.cells.astype(np.uint8)),
        "instructions": [
            {"handle": [i.handle.x, i.handle.y], "target": [i.target.x, i.target.y]}
            for i in plan.instructions
        ],
        "scale": [plan.scale.rx, plan.scale.ry],
        "trans_width": plan.trans_width,
        "noise_seed": plan.noise_seed,
    }
    return canonical_json(doc)


# ---------------------------------------------------------------------------
# computed-plan documents (shared by the CLI artifact and the HTTP response)


def build_plan_document(
    partition: RegionPartition,
    maps: MatchingMaps,
    field: Optional[DisplacementField] = None,
) -> dict:
    """The serialized correspondence plan: regions RLE, raw field, M/A, stats."""
    rows = []
    if field is not None:
        for j in range(len(field)):
            a = float(field.alpha[j])
            rows.append(
                [
                    int(field.cells[j, 0]),
                    int(field.cells[j, 1]),
                    float(field.vectors[j, 0]),
                    float(field.vectors[j, 1]),
                    int(field.winners[j]),
                    None if math.isinf(a) else a,  # JSON has no Infinity
                ]
            )
    return {
        "format_version": FORMAT_VERSION,
        "grid": {"width": partition.grid.width, "height": partition.grid.height},
        "regions": rle_encode(partition.labels()),
        "field": rows,
        "maps": {
            "M": [
                [int(d[0]), int(d[1]), int(s[0]), int(s[1])]
                for d, s in zip(maps.dst_cells, maps.sources)
            ],
            "A": [float(w) for w in maps.weights],
        },
        "stats": partition.counts(),
    }


# ---------------------------------------------------------------------------
# PGM / PPM


def _read_pnm_header(buf: bytes, magic: bytes):
    if not buf.startswith(magic):
        raise IoError(f"expected {magic.decode()} header")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise IoError("truncated header")
        fields.append(int(buf[start:pos]))
    return fields[0], fields[1], fields[2], pos + 1  # single whitespace after maxval


def read_mask_pgm(path) -> EditableMask:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    width, height, maxval, offset = _read_pnm_header(buf, b"P5")
    if not 0 < maxval < 256:
        raise IoError(f"unsupported PGM maxval {maxval}")
    payload = buf[offset:]
    if len(payload) < width * height:
        raise IoError(f"PGM payload holds {len(payload)} bytes, expected {width * height}")
    arr = np.frombuffer(payload[: width * height], dtype=np.uint8).reshape(height, width)
    return EditableMask(GridSpec(width, height), arr > 0)


def write_mask_pgm(mask: EditableMask, path) -> None:
    header = f"P5\n{mask.grid.width} {mask.grid.height}\n255\n".encode("ascii")
    payload = np.where(mask.cells, 255, 0).astype(np.uint8).tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def render_region_pixels(partition: RegionPartition) -> np.ndarray:
    """(H, W, 3) uint8 image of the partition, one pixel per cell."""
    return REGION_COLORS[partition.labels()]


def encode_ppm(pixels: np.ndarray) -> bytes:
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise IoError(f"PPM wants (H, W, 3) uint8, got {pixels.shape} {pixels.dtype}")
    height, width = pixels.shape[:2]
    return f"P6\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def read_ppm(path) -> np.ndarray:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    width, height, maxval, offset = _read_pnm_header(buf, b"P6")
    if not 0 < maxval < 256:
        raise IoError(f"unsupported PPM maxval {maxval}")
    need = width * height * 3
    payload = buf[offset:]
    if len(payload) < need:
        raise IoError(f"PPM payload holds {len(payload)} bytes, expected {need}")
    return np.frombuffer(payload[:need], dtype=np.uint8).reshape(height, width, 3).copy()


def write_region_viz(partition: RegionPartition, path) -> None:
    try:
        Path(path).write_bytes(encode_ppm(render_region_pixels(partition)))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# raw tensors: little-endian f32 payload + JSON sidecar


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_tensor(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    sidecar = canonical_json(
        {"dtype": "f32", "order": "row-major", "shape": list(arr.shape)}
    )
    try:
        Path(path).write_bytes(arr.tobytes())
        _sidecar_path(path).write_text(sidecar, encoding="ascii")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_tensor(path) -> np.ndarray:
    try:
        meta_text = _sidecar_path(path).read_text(encoding="ascii")
        payload = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        meta = json.loads(meta_text)
    except json.JSONDecodeError as exc:
        raise CorruptTensor(f"bad sidecar: {exc}") from exc
    if not isinstance(meta, dict) or meta.get("dtype") != "f32" or meta.get("order") != "row-major":
        raise CorruptTensor(f"unsupported tensor metadata: {meta!r}")
    shape = meta.get("shape")
    if not isinstance(shape, list) or not all(
        isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in shape
    ):
        raise CorruptTensor(f"bad shape: {shape!r}")
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    if len(payload) != count * 4:
        raise CorruptTensor(
            f"payload holds {len(payload)} bytes, shape {shape} needs {count * 4}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
