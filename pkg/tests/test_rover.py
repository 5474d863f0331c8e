import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weavesim.rover import (
    Box,
    EmptyPlan,
    HeightOutOfRange,
    InsufficientBattery,
    RoverConfig,
    SamplePlan,
    StartBlocked,
    energy_feasible,
    plan_grid,
    route_avoiding,
    sense_obstacle,
)

CFG = RoverConfig()
CLEAR = Fraction(1, 4) + Fraction(1, 50)
CELL = Fraction(1, 20)


def F(x):
    return Fraction(str(x))


def oracle_route(waypoints, length, width, boxes):
    """Independent lattice BFS in networkx; returns (hops, unreachable)."""
    nx_, ny_ = int(F(length) / CELL) + 1, int(F(width) / CELL) + 1

    grown = [(F(b.x_min) - CLEAR, F(b.x_max) + CLEAR, F(b.y_min) - CLEAR, F(b.y_max) + CLEAR) for b in boxes]

    def blocked(i, j):
        x, y = i * CELL, j * CELL
        return any(x0 < x < x1 and y0 < y < y1 for x0, x1, y0, y1 in grown)

    g = nx.grid_2d_graph(nx_, ny_)
    g.remove_nodes_from([n for n in list(g) if blocked(*n)])
    node = lambda p: (round(F(p[0]) / CELL), round(F(p[1]) / CELL))  # noqa: E731
    here = node(waypoints[0])
    hops, unreachable = 0, []
    for wp in waypoints[1:]:
        t = node(wp)
        try:
            hops += nx.shortest_path_length(g, here, t)
        except (nx.NetworkXNoPath, nx.NodeNotFound):
            unreachable.append(wp)
            continue
        here = t
    return hops, unreachable


def interval_gap(a0, a1, b0, b1):
    lo, hi = min(a0, a1), max(a0, a1)
    return max(b0 - hi, lo - b1, 0)


def random_boxes(rng, k):
    boxes = []
    for _ in range(k):
        x, y = rng.uniform(0.5, 7.0), rng.uniform(0.3, 3.3)
        w, h = rng.uniform(0.1, 1.2), rng.uniform(0.1, 1.0)
        boxes.append(Box(round(x, 2), round(y, 2), round(x + w, 2), round(y + h, 2)))
    return boxes


class TestGrid:
    def test_room_at_one_metre(self):
        plan = plan_grid(8, 4, 1.0, [1.0])
        assert len(plan.waypoints) == 45
        assert plan.distance_m == 44.0

    def test_serpentine_steps(self):
        plan = plan_grid(8, 4, 0.5, [0.6, 1.2])
        pts = np.array(plan.waypoints)
        steps = np.abs(np.diff(pts, axis=0))
        assert np.all((steps == [0.5, 0]).all(axis=1) | (steps == [0, 0.5]).all(axis=1))
        assert len(set(plan.waypoints)) == len(plan.waypoints) == 17 * 9
        assert plan.distance_m == pytest.approx(0.5 * (len(pts) - 1))

    def test_decimal_spacing_is_exact(self):
        plan = plan_grid(8, 4, 0.1, [1.0])
        assert len(plan.waypoints) == 81 * 41
        assert plan.distance_m == pytest.approx(0.1 * (81 * 41 - 1), rel=1e-15)

    def test_heights(self):
        with pytest.raises(HeightOutOfRange) as info:
            plan_grid(8, 4, 1, [1.0, 2.0])
        assert info.value.height == 2.0
        with pytest.raises(HeightOutOfRange):
            plan_grid(8, 4, 1, [0.5])
        assert plan_grid(8, 4, 1, [0.55, 1.85]).heights == (0.55, 1.85)

    def test_single_point(self):
        plan = plan_grid(0.5, 0.5, 1.0, [1.0])
        assert plan.waypoints == [(0.0, 0.0)] and plan.distance_m == 0.0

    def test_empty(self):
        with pytest.raises(EmptyPlan):
            plan_grid(8, 4, 1, [])
        with pytest.raises(ValueError):
            plan_grid(8, 4, 0, [1.0])

    @given(st.integers(1, 20), st.integers(1, 20), st.sampled_from([0.25, 0.5, 1.0]))
    def test_minimal_among_serpentines(self, nx_, ny_, s):
        plan = plan_grid((nx_ - 1) * s, (ny_ - 1) * s, s, [1.0])
        # any traversal of n lattice points needs at least n-1 unit steps
        assert plan.distance_m == pytest.approx((nx_ * ny_ - 1) * s)
        assert len(set(plan.waypoints)) == nx_ * ny_


class TestRouting:
    def test_no_obstacles_unchanged(self):
        plan = plan_grid(8, 4, 1, [1.0])
        routed = route_avoiding(plan, 8, 4, [])
        assert routed.waypoints == plan.waypoints
        assert routed.distance_m == plan.distance_m
        assert routed.unreachable == []

    def test_wall_splits_room(self):
        plan = plan_grid(8, 4, 1, [1.0])
        wall = Box(3.9, -1.0, 4.1, 5.0)
        routed = route_avoiding(plan, 8, 4, [wall])
        assert sorted(routed.unreachable) == sorted(p for p in plan.waypoints if p[0] >= 4)
        assert all(p[0] < 4 for p in routed.waypoints)

    def test_box_between_waypoints(self):
        plan = SamplePlan([(1.0, 2.0), (4.0, 2.0)], (1.0,), 3.0, 0.0)
        box = Box(2.0, 1.5, 3.0, 2.5)
        routed = route_avoiding(plan, 8, 4, [box])
        hops, _ = oracle_route(plan.waypoints, 8, 4, [box])
        assert routed.distance_m >= 3.0
        assert routed.distance_m == pytest.approx(hops * 0.05, abs=1e-12)
        # up and over the grown box: 3 m along x plus twice the 0.8 m climb
        assert routed.distance_m == pytest.approx(3.0 + 2 * 0.8)

    def test_start_blocked(self):
        plan = plan_grid(8, 4, 1, [1.0])
        with pytest.raises(StartBlocked):
            route_avoiding(plan, 8, 4, [Box(-0.5, -0.5, 0.1, 0.1)])

    def test_oracle_on_random_obstacles(self):
        plan = plan_grid(8, 4, 1, [1.0])
        for seed in range(50):
            rng = np.random.default_rng(seed)
            boxes = random_boxes(rng, int(rng.integers(1, 6)))
            if any(F(b.x_min) - CLEAR < 0 < F(b.x_max) + CLEAR and F(b.y_min) - CLEAR < 0 < F(b.y_max) + CLEAR for b in boxes):
                continue
            routed = route_avoiding(plan, 8, 4, boxes)
            hops, unreachable = oracle_route(plan.waypoints, 8, 4, boxes)
            assert routed.unreachable == unreachable
            assert routed.distance_m == pytest.approx(hops * 0.05, abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_clearance_exact(self, seed):
        rng = np.random.default_rng(seed)
        boxes = random_boxes(rng, 4)
        plan = plan_grid(8, 4, 1, [1.0])
        try:
            routed = route_avoiding(plan, 8, 4, boxes)
        except StartBlocked:
            return
        pts = [(F(x), F(y)) for x, y in routed.path]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:] or pts):
            for b in boxes:
                dx = interval_gap(x0, x1, F(b.x_min), F(b.x_max))
                dy = interval_gap(y0, y1, F(b.y_min), F(b.y_max))
                assert dx * dx + dy * dy >= CLEAR * CLEAR

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_fewer_obstacles_never_longer(self, seed):
        rng = np.random.default_rng(seed)
        boxes = random_boxes(rng, 4)
        plan = plan_grid(8, 4, 1, [1.0])
        try:
            full = route_avoiding(plan, 8, 4, boxes)
        except StartBlocked:
            return
        # freeing cells can only shorten legs between the same waypoints
        reached = SamplePlan(full.waypoints, full.heights, 0.0, 0.0)
        for k in range(len(boxes)):
            fewer = route_avoiding(reached, 8, 4, boxes[:k] + boxes[k + 1 :])
            assert not fewer.unreachable
            assert fewer.distance_m <= full.distance_m + 1e-12


class TestSensor:
    def test_one_metre(self):
        assert sense_obstacle(1.0) == 0.999

    def test_half_step_toward_zero(self):
        assert sense_obstacle(1.0005) == 0.999
        assert sense_obstacle(1.0006) == 1.002

    def test_out_of_range(self):
        assert sense_obstacle(0.01) is None
        assert sense_obstacle(5.0) is None
        assert sense_obstacle(4.0) == 3.999
        assert sense_obstacle(0.02) == 0.021

    @given(st.floats(0.02, 4.0))
    def test_idempotent(self, d):
        q = sense_obstacle(d)
        assert sense_obstacle(q) == q
        assert abs(q - d) <= 0.0015 + 1e-12


class TestEnergy:
    def test_two_hours_at_fifty_watts(self):
        cfg = RoverConfig(drive_power_w=50, speed_m_s=0.25)
        check = energy_feasible(2 * 3600 * 0.25, cfg)
        assert check.ok and check.wh == pytest.approx(100)

    def test_shortfall(self):
        cfg = RoverConfig(drive_power_w=100, speed_m_s=0.25)
        with pytest.raises(InsufficientBattery) as info:
            energy_feasible(4 * 3600 * 0.25, cfg)
        assert info.value.shortfall_wh == pytest.approx(230)

    def test_zero_length(self):
        assert energy_feasible(plan_grid(0, 0, 1, [1.0])).wh == 0.0

    def test_defaults(self):
        assert (CFG.lift_min_m, CFG.lift_max_m) == (0.55, 1.85)
        assert (CFG.sensor_min_m, CFG.sensor_max_m, CFG.sensor_resolution_m) == (0.02, 4.0, 0.003)
        assert CFG.localization_precision_m == 0.02 and CFG.battery_wh == 170.0
        assert math.isclose(float(CFG.clearance_m), 0.27)
