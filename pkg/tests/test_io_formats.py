"""Serialization tests: plans, RLE, PGM/PPM, raw tensors."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dragfield.correspondence import MatchingMaps, compute_correspondence, partition_regions
from dragfield.errors import CorruptTensor, IoError, ParseError
from dragfield.geometry import DragInstruction, EditableMask, GridSpec, Point, ScaleVector
from dragfield.io_formats import (
    DragPlan,
    build_plan_document,
    canonical_json,
    parse_drag_plan,
    plan_to_json,
    read_mask_pgm,
    read_ppm,
    read_tensor,
    render_region_pixels,
    rle_decode,
    rle_encode,
    write_mask_pgm,
    write_region_viz,
    write_tensor,
)

MINIMAL = {
    "mode": "drag",
    "grid": {"width": 8, "height": 8},
    "mask": [[0, 9], [1, 3], [0, 5], [1, 3], [0, 5], [1, 3], [0, 36]],
    "instructions": [{"handle": [2.0, 2.0], "target": [3.0, 2.0]}],
}


def plan_bytes(**overrides):
    doc = {**MINIMAL, **overrides}
    return json.dumps(doc).encode()


class TestRle:
    def test_round_trip_small(self):
        arr = np.array([0, 0, 1, 1, 1, 2, 0], dtype=np.int64)
        pairs = rle_encode(arr)
        assert pairs == [[0, 2], [1, 3], [2, 1], [0, 1]]
        assert np.array_equal(rle_decode(pairs, 7, 4), arr)

    def test_empty(self):
        assert rle_encode(np.array([], dtype=np.int64)) == []
        assert rle_decode([], 0, 4).size == 0

    def test_bad_totals_rejected(self):
        with pytest.raises(ValueError):
            rle_decode([[0, 3]], 4, 2)
        with pytest.raises(ValueError):
            rle_decode([[0, 5]], 4, 2)

    def test_bad_values_rejected(self):
        with pytest.raises(ValueError):
            rle_decode([[7, 4]], 4, 2)
        with pytest.raises(ValueError):
            rle_decode([[0, 0], [1, 4]], 4, 2)
        with pytest.raises(ValueError):
            rle_decode([[True, 4]], 4, 2)

    @given(st.lists(st.integers(0, 3), min_size=0, max_size=200))
    @settings(max_examples=100)
    def test_round_trip_property(self, values):
        arr = np.array(values, dtype=np.int64)
        assert np.array_equal(rle_decode(rle_encode(arr), len(arr), 4), arr)


class TestParseDragPlan:
    def test_minimal_plan(self):
        plan = parse_drag_plan(plan_bytes())
        assert plan.mode == "drag"
        assert plan.grid == GridSpec(8, 8)
        assert plan.mask.count() == 9
        assert plan.instructions == (
            DragInstruction(Point(2.0, 2.0), Point(3.0, 2.0)),
        )
        assert plan.scale == ScaleVector(1.0, 1.0)
        assert plan.trans_width == 2
        assert plan.noise_seed == 0

    def test_move_mode_scale(self):
        plan = parse_drag_plan(plan_bytes(mode="move", scale=[2, 1]))
        assert plan.scale == ScaleVector(2.0, 1.0)

    def test_target_outside_grid(self):
        bad = plan_bytes(
            instructions=[{"handle": [2, 2], "target": [9.5, 2]}]
        )
        with pytest.raises(ParseError) as exc:
            parse_drag_plan(bad)
        assert exc.value.path == "/instructions/0/target"

    def test_unknown_field_rejected(self):
        with pytest.raises(ParseError) as exc:
            parse_drag_plan(plan_bytes(extra=1))
        assert exc.value.path == "/extra"

    def test_unknown_nested_field_rejected(self):
        bad = plan_bytes(grid={"width": 8, "height": 8, "depth": 2})
        with pytest.raises(ParseError) as exc:
            parse_drag_plan(bad)
        assert exc.value.path == "/grid/depth"

    def test_bad_mode(self):
        with pytest.raises(ParseError) as exc:
            parse_drag_plan(plan_bytes(mode="slide"))
        assert exc.value.path == "/mode"

    def test_nonpositive_scale(self):
        with pytest.raises(ParseError) as exc:
            parse_drag_plan(plan_bytes(scale=[0, 1]))
        assert exc.value.path == "/scale"

    def test_bool_not_a_number(self):
        with pytest.raises(ParseError):
            parse_drag_plan(plan_bytes(trans_width=True))

    def test_invalid_json(self):
        with pytest.raises(ParseError):
            parse_drag_plan(b"{nope")

    def test_mask_rle_wrong_total(self):
        with pytest.raises(ParseError) as exc:
            parse_drag_plan(plan_bytes(mask=[[1, 5]]))
        assert exc.value.path == "/mask"

    def test_mask_path_disallowed_without_base_dir(self):
        with pytest.raises(ParseError) as exc:
            parse_drag_plan(plan_bytes(mask="mask.pgm"))
        assert exc.value.path == "/mask"

    def test_mask_path_resolved(self, tmp_path):
        mask = EditableMask.from_cells(GridSpec(8, 8), [(1, 1), (2, 2)])
        write_mask_pgm(mask, tmp_path / "m.pgm")
        plan = parse_drag_plan(plan_bytes(mask="m.pgm"), base_dir=tmp_path)
        assert plan.mask.count() == 2
        assert plan.mask.is_editable(1, 1)

    def test_mask_path_dimension_mismatch(self, tmp_path):
        mask = EditableMask.full(GridSpec(4, 4))
        write_mask_pgm(mask, tmp_path / "m.pgm")
        with pytest.raises(ParseError) as exc:
            parse_drag_plan(plan_bytes(mask="m.pgm"), base_dir=tmp_path)
        assert exc.value.path == "/mask"

    def test_wrong_format_version(self):
        with pytest.raises(ParseError) as exc:
            parse_drag_plan(plan_bytes(format_version=2))
        assert exc.value.path == "/format_version"

    def test_round_trip_identity(self):
        plan = parse_drag_plan(plan_bytes(mode="move", scale=[2, 0.5], noise_seed=42))
        text = plan_to_json(plan)
        again = parse_drag_plan(text)
        assert again.grid == plan.grid
        assert again.mode == plan.mode
        assert again.instructions == plan.instructions
        assert again.scale == plan.scale
        assert again.trans_width == plan.trans_width
        assert again.noise_seed == plan.noise_seed
        assert np.array_equal(again.mask.cells, plan.mask.cells)
        # and the serialization itself is a fixed point
        assert plan_to_json(again) == text


class TestPlanDocument:
    def build(self):
        grid = GridSpec(6, 6)
        mask = EditableMask.from_cells(grid, [(1, 1), (2, 1), (1, 2), (2, 2)])
        instrs = [DragInstruction(Point(1.5, 1.5), Point(2.5, 1.5))]
        field, maps, part = compute_correspondence(mask, instrs, mode="move", trans_width=1)
        return build_plan_document(part, maps, field)

    def test_document_shape(self):
        doc = self.build()
        assert doc["format_version"] == 1
        assert doc["stats"] == {"bg": 16, "dst": 4, "inp": 2, "trans": 14}
        assert len(doc["field"]) == 4
        assert len(doc["maps"]["M"]) == 4
        assert len(doc["maps"]["A"]) == 4
        total = sum(count for _, count in doc["regions"])
        assert total == 36

    def test_canonical_json_round_trips(self):
        doc = self.build()
        text = canonical_json(doc)
        assert json.loads(text) == doc
        assert canonical_json(json.loads(text)) == text

    def test_infinite_alpha_serialized_as_null(self):
        grid = GridSpec(8, 8)
        mask = EditableMask.from_cells(
            grid, [(x, y) for x in (1, 2, 3) for y in (1, 2, 3)]
        )
        instrs = [DragInstruction(Point(2.0, 2.0), Point(3.0, 2.0))]
        field, maps, part = compute_correspondence(mask, instrs, mode="drag")
        doc = build_plan_document(part, maps, field)
        handle_rows = [r for r in doc["field"] if (r[0], r[1]) == (2, 2)]
        assert handle_rows[0][5] is None
        canonical_json(doc)  # must not raise on the null


class TestPgm:
    def test_round_trip(self, tmp_path):
        grid = GridSpec(5, 3)
        mask = EditableMask.from_cells(grid, [(0, 0), (4, 2), (2, 1)])
        path = tmp_path / "mask.pgm"
        write_mask_pgm(mask, path)
        again = read_mask_pgm(path)
        assert again.grid == grid
        assert np.array_equal(again.cells, mask.cells)

    def test_header_with_comment(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n2 2\n255\n" + bytes([0, 255, 255, 0]))
        mask = read_mask_pgm(path)
        assert mask.cells.tolist() == [[False, True], [True, False]]

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + b"\x00" * 7)
        with pytest.raises(IoError):
            read_mask_pgm(path)

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "w.pgm"
        path.write_bytes(b"P6\n2 2\n255\n" + b"\x00" * 12)
        with pytest.raises(IoError):
            read_mask_pgm(path)


class TestRegionViz:
    def test_all_bg_is_uniform_gray(self, tmp_path):
        grid = GridSpec(4, 4)
        part = partition_regions(EditableMask.empty(grid), MatchingMaps.empty(), 1)
        path = tmp_path / "bg.ppm"
        write_region_viz(part, path)
        pixels = read_ppm(path)
        assert pixels.shape == (4, 4, 3)
        assert (pixels == np.array([128, 128, 128], dtype=np.uint8)).all()

    def test_colors_match_labels(self):
        grid = GridSpec(6, 6)
        mask = EditableMask.from_cells(grid, [(1, 1), (2, 1), (1, 2), (2, 2)])
        dst = np.array([[2, 1], [3, 1], [2, 2], [3, 2]], dtype=np.int64)
        maps = MatchingMaps(dst, dst - np.array([1, 0]), np.ones(4))
        part = partition_regions(mask, maps, trans_width=1)
        pixels = render_region_pixels(part)
        assert pixels[1, 2].tolist() == [220, 50, 50]  # dst
        assert pixels[1, 1].tolist() == [235, 200, 40]  # inp
        assert pixels[0, 0].tolist() == [60, 180, 90]  # trans ring corner
        assert pixels[5, 5].tolist() == [128, 128, 128]  # bg

    def test_ppm_round_trip(self, tmp_path):
        grid = GridSpec(3, 2)
        part = partition_regions(EditableMask.empty(grid), MatchingMaps.empty(), 0)
        path = tmp_path / "x.ppm"
        write_region_viz(part, path)
        assert read_ppm(path).shape == (2, 3, 3)


class TestTensorIo:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(5)
        arr = rng.standard_normal((16, 16, 4)).astype(np.float32)
        path = tmp_path / "z.tensor"
        write_tensor(path, arr)
        again = read_tensor(path)
        assert again.dtype == np.float32
        assert np.array_equal(again, arr)
        assert again.tobytes() == arr.tobytes()

    def test_zero_length_shape(self, tmp_path):
        path = tmp_path / "empty.tensor"
        write_tensor(path, np.zeros((0,), dtype=np.float32))
        out = read_tensor(path)
        assert out.shape == (0,)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "bad.tensor"
        write_tensor(path, np.ones((4, 4), dtype=np.float32))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(CorruptTensor):
            read_tensor(path)

    def test_missing_sidecar(self, tmp_path):
        path = tmp_path / "lost.tensor"
        path.write_bytes(b"\x00" * 16)
        with pytest.raises(IoError):
            read_tensor(path)

    def test_bad_sidecar_dtype(self, tmp_path):
        path = tmp_path / "odd.tensor"
        write_tensor(path, np.ones((2,), dtype=np.float32))
        sidecar = tmp_path / "odd.tensor.json"
        sidecar.write_text(sidecar.read_text().replace("f32", "f64"))
        with pytest.raises(CorruptTensor):
            read_tensor(path)

    def test_float64_input_downcast_on_write(self, tmp_path):
        arr = np.linspace(0, 1, 12).reshape(3, 4)
        path = tmp_path / "d.tensor"
        write_tensor(path, arr)
        out = read_tensor(path)
        assert np.array_equal(out, arr.astype(np.float32))


class TestCanonicalJson:
    def test_sorted_and_compact(self):
        assert canonical_json({"b": 1, "a": [1.5, None]}) == '{"a":[1.5,null],"b":1}'

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("nan")})
