"""Geometry tests: reference circles, stretch factors, winner-takes-all fusion."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dragfield.errors import (
    EmptyEditableRegion,
    HandleOutsideCircle,
    NoInstructions,
    PointOutsideCircle,
)
from dragfield.geometry import (
    DragInstruction,
    EditableMask,
    GridSpec,
    Point,
    ReferenceCircle,
    ScaleVector,
    per_instruction_displacement,
    reference_circle,
    round_half_away,
    stretch_factor,
    wta_fuse,
)


def rect_mask(grid, x0, y0, x1, y1):
    """Mask covering the inclusive lattice rectangle [x0,x1] x [y0,y1]."""
    cells = [(x, y) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)]
    return EditableMask.from_cells(grid, cells)


def bisect_ray_circle(s, u, circle, hi=None):
    """Independent ray-circle intersection: bisection on the signed distance."""
    cx, cy, r = circle.center.x, circle.center.y, circle.radius

    def f(t):
        x = s.x + t * u[0]
        y = s.y + t * u[1]
        return math.sqrt((x - cx) ** 2 + (y - cy) ** 2) - r

    lo = 0.0
    hi = hi if hi is not None else 4.0 * r + 1.0
    assert f(lo) < 0 < f(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def brute_force_wta(mask, instructions, circle, mode, scale):
    """Direct O(m*k) nearest-handle scan with the same tie and weight rules."""
    out = []
    for x, y in mask.cell_array():
        px, py = float(x), float(y)
        best_i, best_alpha = None, None
        for i, instr in enumerate(instructions):
            hx, hy = instr.handle.lattice_cell()
            if (x, y) == (hx, hy):
                a = math.inf
            else:
                dx = px - instr.handle.x
                dy = py - instr.handle.y
                a = 1.0 / math.sqrt(dx * dx + dy * dy)
            if best_alpha is None or a > best_alpha:
                best_i, best_alpha = i, a
        instr = instructions[best_i]
        dxv, dyv = instr.vector
        if mode == "drag":
            lam = stretch_factor(Point(px, py), instr.handle, circle)
        else:
            lam = 1.0
        vx = lam * dxv + (scale.rx - 1.0) * (px - instr.handle.x)
        vy = lam * dyv + (scale.ry - 1.0) * (py - instr.handle.y)
        alpha = 1.0 if mode == "move" else best_alpha
        out.append(((x, y), best_i, alpha, (vx, vy)))
    return out


class TestRounding:
    def test_half_away_from_zero(self):
        assert round_half_away(2.5) == 3
        assert round_half_away(-0.5) == -1
        assert round_half_away(3.4) == 3
        assert round_half_away(7.6) == 8
        assert round_half_away(-0.6) == -1
        assert round_half_away(0.0) == 0


class TestReferenceCircle:
    def test_square_region(self):
        grid = GridSpec(11, 11)
        circ = reference_circle(rect_mask(grid, 0, 0, 10, 10))
        assert circ.center == Point(5.0, 5.0)
        assert circ.radius == pytest.approx(5.0 * math.sqrt(2.0), abs=1e-12)

    def test_single_cell_fallback(self):
        grid = GridSpec(8, 8)
        circ = reference_circle(EditableMask.from_cells(grid, [(3, 3)]))
        assert circ.center == Point(3.0, 3.0)
        assert circ.radius == 0.5

    def test_rectangular_region(self):
        grid = GridSpec(8, 8)
        circ = reference_circle(rect_mask(grid, 0, 0, 4, 2))
        assert circ.center == Point(2.0, 1.0)
        assert circ.radius == pytest.approx(math.sqrt(5.0), abs=1e-12)

    def test_empty_mask_raises(self):
        grid = GridSpec(4, 4)
        with pytest.raises(EmptyEditableRegion):
            reference_circle(EditableMask.empty(grid))

    def test_circumscribes_all_editable_cells(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            w, h = rng.integers(2, 20, size=2)
            grid = GridSpec(int(w), int(h))
            arr = rng.random((h, w)) < 0.4
            if not arr.any():
                arr[0, 0] = True
            mask = EditableMask(grid, arr)
            circ = reference_circle(mask)
            for x, y in mask.cell_array():
                d = math.sqrt((x - circ.center.x) ** 2 + (y - circ.center.y) ** 2)
                assert d <= circ.radius + 1e-9


class TestStretchFactor:
    CIRCLE = ReferenceCircle(Point(5.0, 5.0), 5.0 * math.sqrt(2.0))

    def test_handle_moves_fully(self):
        assert stretch_factor(Point(5, 5), Point(5, 5), self.CIRCLE) == 1.0

    def test_zero_on_boundary(self):
        p = Point(5.0 + 5.0 * math.sqrt(2.0), 5.0)
        assert stretch_factor(p, Point(5, 5), self.CIRCLE) == pytest.approx(0.0, abs=1e-9)

    def test_midway_point_matches_bisection_oracle(self):
        p, s = Point(10, 5), Point(5, 5)
        lam = stretch_factor(p, s, self.CIRCLE)
        # frozen from the bisection oracle below
        assert lam == pytest.approx(1.0 - math.sqrt(2.0) / 2.0, abs=1e-9)
        t_p = 5.0
        t_q = bisect_ray_circle(s, (1.0, 0.0), self.CIRCLE)
        assert lam == pytest.approx((t_q - t_p) / t_q, abs=1e-12)

    def test_handle_on_circle_rejected(self):
        s = Point(5.0 + 5.0 * math.sqrt(2.0), 5.0)
        with pytest.raises(HandleOutsideCircle):
            stretch_factor(Point(5, 5), s, self.CIRCLE)

    def test_point_outside_rejected(self):
        with pytest.raises(PointOutsideCircle):
            stretch_factor(Point(50, 5), Point(5, 5), self.CIRCLE)

    @given(
        st.floats(0.0, 2 * math.pi),
        st.floats(0.0, 1.0),
        st.floats(0.0, 2 * math.pi),
        st.floats(0.0, 0.8),
    )
    @settings(max_examples=200)
    def test_matches_bisection_oracle_randomly(self, theta_p, rad_p, theta_s, rad_s):
        circle = ReferenceCircle(Point(3.0, 4.0), 6.0)
        s = Point(
            circle.center.x + rad_s * circle.radius * math.cos(theta_s),
            circle.center.y + rad_s * circle.radius * math.sin(theta_s),
        )
        p = Point(
            circle.center.x + rad_p * circle.radius * math.cos(theta_p),
            circle.center.y + rad_p * circle.radius * math.sin(theta_p),
        )
        lam = stretch_factor(p, s, circle)
        t_p = math.sqrt((p.x - s.x) ** 2 + (p.y - s.y) ** 2)
        if t_p <= 1e-9:
            assert lam == 1.0
            return
        u = ((p.x - s.x) / t_p, (p.y - s.y) / t_p)
        t_q = bisect_ray_circle(s, u, circle)
        assert lam == pytest.approx((t_q - t_p) / t_q, abs=1e-9)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    @settings(max_examples=200)
    def test_monotone_along_ray(self, a, b):
        circle = ReferenceCircle(Point(0.0, 0.0), 10.0)
        s = Point(1.0, -2.0)
        t1, t2 = sorted([a, b])
        # points along the +x ray from s, staying inside the circle
        q_t = bisect_ray_circle(s, (1.0, 0.0), circle)
        p1 = Point(s.x + t1 * (q_t - 1e-6), s.y)
        p2 = Point(s.x + t2 * (q_t - 1e-6), s.y)
        l1 = stretch_factor(p1, s, circle)
        l2 = stretch_factor(p2, s, circle)
        assert l2 <= l1 + 1e-12


class TestPerInstructionDisplacement:
    CIRCLE = ReferenceCircle(Point(5.0, 5.0), 5.0 * math.sqrt(2.0))

    def test_full_at_handle(self):
        instr = DragInstruction(Point(5, 5), Point(7, 5))
        assert per_instruction_displacement(Point(5, 5), instr, self.CIRCLE) == (2.0, 0.0)

    def test_zero_on_circle(self):
        instr = DragInstruction(Point(5, 5), Point(7, 8))
        p = Point(5.0, 5.0 + 5.0 * math.sqrt(2.0))
        vx, vy = per_instruction_displacement(p, instr, self.CIRCLE)
        assert abs(vx) < 1e-9 and abs(vy) < 1e-9

    def test_frozen_midway_example(self):
        instr = DragInstruction(Point(5, 5), Point(7, 5))
        vx, vy = per_instruction_displacement(Point(10, 5), instr, self.CIRCLE)
        assert vx == pytest.approx(0.5857864376269049, abs=1e-6)
        assert vy == 0.0

    def test_parallel_to_drag_vector(self):
        rng = np.random.default_rng(3)
        instr = DragInstruction(Point(4, 6), Point(6.5, 3.0))
        d = instr.vector
        for _ in range(100):
            ang, rad = rng.uniform(0, 2 * math.pi), rng.uniform(0, 1)
            p = Point(5 + rad * 7 * math.cos(ang), 5 + rad * 7 * math.sin(ang))
            vx, vy = per_instruction_displacement(p, instr, self.CIRCLE)
            assert abs(vx * d[1] - vy * d[0]) < 1e-9


class TestWtaFuse:
    def test_nearest_handle_wins(self):
        grid = GridSpec(11, 11)
        mask = rect_mask(grid, 0, 0, 10, 10)
        circle = reference_circle(mask)
        instrs = [
            DragInstruction(Point(2, 2), Point(3, 2)),
            DragInstruction(Point(8, 8), Point(7, 8)),
        ]
        field = wta_fuse(mask, instrs, circle, mode="drag")
        idx = np.flatnonzero((field.cells[:, 0] == 3) & (field.cells[:, 1] == 3))[0]
        assert field.winners[idx] == 0
        assert field.alpha[idx] == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)

    def test_move_mode_pure_translation(self):
        grid = GridSpec(10, 10)
        mask = rect_mask(grid, 1, 1, 6, 6)
        instrs = [DragInstruction(Point(2, 2), Point(5, 1))]
        field = wta_fuse(mask, instrs, None, mode="move")
        assert np.all(field.vectors == np.array([3.0, -1.0]))
        assert np.all(field.alpha == 1.0)
        assert not field.alpha_inf.any()

    def test_identity_edit_is_zero(self):
        grid = GridSpec(9, 9)
        mask = rect_mask(grid, 2, 2, 6, 6)
        circle = reference_circle(mask)
        instrs = [DragInstruction(Point(4, 4), Point(4, 4))]
        field = wta_fuse(mask, instrs, circle, mode="drag")
        assert np.all(field.vectors == 0.0)

    def test_scale_identity(self):
        grid = GridSpec(9, 9)
        mask = rect_mask(grid, 2, 2, 6, 6)
        circle = reference_circle(mask)
        instrs = [DragInstruction(Point(4, 4), Point(4, 4))]
        field = wta_fuse(mask, instrs, circle, mode="move", scale=ScaleVector(1.0, 1.0))
        assert np.all(field.vectors == 0.0)

    def test_handle_cell_gets_infinite_weight(self):
        grid = GridSpec(8, 8)
        mask = rect_mask(grid, 1, 1, 5, 5)
        circle = reference_circle(mask)
        instrs = [DragInstruction(Point(3, 3), Point(4, 3))]
        field = wta_fuse(mask, instrs, circle, mode="drag")
        idx = np.flatnonzero((field.cells[:, 0] == 3) & (field.cells[:, 1] == 3))[0]
        assert field.alpha_inf[idx]
        assert field.alpha[idx] == math.inf

    def test_tie_breaks_to_lowest_index(self):
        grid = GridSpec(9, 9)
        mask = rect_mask(grid, 0, 0, 8, 8)
        circle = reference_circle(mask)
        # cell (4, 4) is equidistant from both handles
        instrs = [
            DragInstruction(Point(2, 4), Point(2, 3)),
            DragInstruction(Point(6, 4), Point(6, 5)),
        ]
        field = wta_fuse(mask, instrs, circle, mode="drag")
        idx = np.flatnonzero((field.cells[:, 0] == 4) & (field.cells[:, 1] == 4))[0]
        assert field.winners[idx] == 0

    def test_no_instructions_raises(self):
        grid = GridSpec(4, 4)
        mask = EditableMask.full(grid)
        with pytest.raises(NoInstructions):
            wta_fuse(mask, [], None, mode="move")

    def test_matches_brute_force_scan(self):
        rng = np.random.default_rng(11)
        for trial in range(30):
            w = int(rng.integers(4, 24))
            h = int(rng.integers(4, 24))
            grid = GridSpec(w, h)
            arr = rng.random((h, w)) < 0.5
            arr[h // 2, w // 2] = True
            mask = EditableMask(grid, arr)
            circle = reference_circle(mask)
            mode = "drag" if trial % 2 == 0 else "move"
            k = int(rng.integers(1, 5))
            instrs = []
            for _ in range(k):
                for _ in range(200):
                    cand = Point(
                        float(rng.uniform(0, w - 1)), float(rng.uniform(0, h - 1))
                    )
                    if mode == "move" or circle.strictly_inside(cand, 1e-6):
                        break
                tgt = Point(float(rng.uniform(0, w - 1)), float(rng.uniform(0, h - 1)))
                instrs.append(DragInstruction(cand, tgt))
            scale = ScaleVector(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)))
            field = wta_fuse(mask, instrs, circle, mode=mode, scale=scale)
            oracle = brute_force_wta(mask, instrs, circle, mode, scale)
            for j, ((x, y), wi, a, (vx, vy)) in enumerate(oracle):
                assert tuple(field.cells[j]) == (x, y)
                assert field.winners[j] == wi
                assert field.alpha[j] == a
                assert field.vectors[j, 0] == pytest.approx(vx, rel=1e-9, abs=1e-12)
                assert field.vectors[j, 1] == pytest.approx(vy, rel=1e-9, abs=1e-12)

    def test_opposing_drags_keep_full_magnitude(self):
        grid = GridSpec(13, 13)
        mask = rect_mask(grid, 2, 2, 10, 10)
        circle = reference_circle(mask)
        u = 2.0
        instrs = [
            DragInstruction(Point(6, 4), Point(6, 4 - u)),
            DragInstruction(Point(6, 8), Point(6, 8 + u)),
        ]
        field = wta_fuse(mask, instrs, circle, mode="drag")
        for j in range(len(field)):
            x, y = field.cells[j]
            winner = instrs[field.winners[j]]
            vx, vy = per_instruction_displacement(Point(float(x), float(y)), winner, circle)
            assert field.vectors[j, 0] == pytest.approx(vx, abs=1e-12)
            assert field.vectors[j, 1] == pytest.approx(vy, abs=1e-12)

    @given(st.integers(0, 100))
    @settings(max_examples=60, deadline=None)
    def test_winner_matches_oracle_property(self, seed):
        rng = np.random.default_rng(seed)
        w = int(rng.integers(3, 16))
        h = int(rng.integers(3, 16))
        grid = GridSpec(w, h)
        arr = rng.random((h, w)) < 0.6
        arr[0, 0] = True
        mask = EditableMask(grid, arr)
        k = int(rng.integers(1, 6))
        instrs = [
            DragInstruction(
                Point(float(rng.uniform(0, w - 1)), float(rng.uniform(0, h - 1))),
                Point(float(rng.uniform(0, w - 1)), float(rng.uniform(0, h - 1))),
            )
            for _ in range(k)
        ]
        field = wta_fuse(mask, instrs, None, mode="move")
        oracle = brute_force_wta(mask, instrs, None, "move", ScaleVector())
        assert [o[1] for o in oracle] == list(field.winners)
