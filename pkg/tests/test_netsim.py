import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weavesim.netsim import (
    NS,
    US,
    Disconnected,
    Engine,
    InvalidFanout,
    Link,
    LinkTemplate,
    Network,
    NoPath,
    SchedulePast,
    SimTimeOverflow,
    build_topology,
    tile_node,
    to_simtime,
    transit,
)
from weavesim.rng import RngStreams


def tiles(n):
    return [tile_node(i) for i in range(n)]


def chain_graph(template=LinkTemplate(delay=1 * US, residence=2 * US)):
    return build_topology(
        "explicit", ["a", "b"], template, edges=[("a", "s1"), ("s1", "s2"), ("s2", "b")], switches=["s1", "s2"]
    )


class TestTopology:
    def test_star(self):
        g = build_topology("star", tiles(4))
        assert len(g.links) == 4
        assert all({"sw0"} & {l.a, l.b} for l in g.links)

    def test_tree_mirrors_four_48_port_switches(self):
        g = build_topology("tree", tiles(140), fanout=48)
        assert len(g.switches) == 4
        assert len(g.links) == 140 + 3

    def test_explicit_isolated_node(self):
        with pytest.raises(Disconnected):
            build_topology("explicit", ["a", "b", "c"], edges=[("a", "b")])

    def test_invalid_fanout(self):
        with pytest.raises(InvalidFanout):
            build_topology("tree", tiles(4), fanout=0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 512), st.integers(1, 64))
    def test_closed_form_edge_counts(self, n, fanout):
        assert len(build_topology("star", tiles(n)).links) == n
        s = math.ceil(n / fanout)
        tree = build_topology("tree", tiles(n), fanout=fanout)
        assert len(tree.links) == n + s
        assert len(tree.nodes) == n + s + 1
        mesh = build_topology("mesh", tiles(n), fanout=fanout)
        assert len(mesh.links) == n + s * (s - 1) // 2

    def test_mesh_routes_through_switch_pair(self):
        g = build_topology("mesh", tiles(6), fanout=2)
        assert g.path("t000", "t005") == ("t000", "sw00", "sw02", "t005")

    def test_asymmetry_split(self):
        link = LinkTemplate(delay=10 * US, asymmetry=5).link("x", "y")
        assert link.asymmetry == 5
        assert link.delay("x", "y") - link.delay("y", "x") == 5


class TestEngine:
    def test_equal_due_times_follow_issue_order(self):
        eng, seen = Engine(), []
        for name in "abc":
            eng.schedule(10, lambda e: seen.append(e.payload), payload=name)
        eng.run_until(10)
        assert seen == ["a", "b", "c"]

    def test_empty_queue_advances_time(self):
        eng = Engine()
        assert eng.run_until(5 * US) == 0
        assert eng.now == 5 * US

    def test_schedule_past(self):
        eng = Engine()
        eng.run_until(100)
        with pytest.raises(SchedulePast):
            eng.schedule(99)

    def test_overflow_is_an_error(self):
        with pytest.raises(SimTimeOverflow):
            Engine().schedule(2**63)
        with pytest.raises(SimTimeOverflow):
            to_simtime(1e10, unit=10**12)

    def test_causality_under_self_scheduling(self):
        eng = Engine()
        rng = np.random.default_rng(3)
        times = []

        def handler(event):
            assert event.due == eng.now
            times.append(eng.now)
            if len(times) < 500:
                eng.schedule_in(int(rng.integers(0, 50)), handler)

        eng.schedule(0, handler)
        eng.run_until(10**9)
        assert times == sorted(times) and len(times) == 500

    def test_replay_gives_identical_trace(self):
        def run(seed):
            g = build_topology("tree", tiles(20), LinkTemplate(jitter_sigma=10 * NS, residence=US, residence_jitter=50 * NS), fanout=4)
            eng = Engine()
            net = Network(g, eng, RngStreams(seed))
            arrivals = []
            for i in range(20):
                eng.schedule(i * US, lambda e, i=i: net.send("root", tile_node(i), lambda d: arrivals.append(d.payload.arrival)))
            eng.run_until(10**9)
            return eng.trace_hash(), arrivals

        assert run(7) == run(7)
        assert run(7) != run(8)


class TestTransit:
    def test_additive_delays(self):
        d = transit(chain_graph(), "a", "b", 0, RngStreams(0))
        assert d.delay == 7 * US
        assert d.residence == 4 * US
        assert d.link_delay == 3 * US

    def test_reverse_symmetric(self):
        g = chain_graph()
        assert transit(g, "b", "a", 0, RngStreams(0)).delay == transit(g, "a", "b", 0, RngStreams(0)).delay

    def test_transparent_hops_record_residence(self):
        g = chain_graph(LinkTemplate(delay=1 * US, residence=2 * US, transparent_clock=True))
        d = transit(g, "a", "b", 5 * US, RngStreams(0))
        assert [h.node for h in d.hops] == ["s1", "s2"]
        assert d.hops[0].ingress == 6 * US and d.hops[0].egress == 8 * US
        assert all(h.transparent for h in d.hops)

    def test_jitter_std(self):
        g = build_topology("explicit", ["a", "b"], LinkTemplate(delay=1 * US, jitter_sigma=10 * NS), edges=[("a", "b")])
        streams = RngStreams(11)
        delays = np.array([transit(g, "a", "b", 0, streams).delay for _ in range(10_000)])
        assert abs(delays.std() / (10 * NS) - 1) < 0.05

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 5 * US), st.integers(0, 5 * US), st.integers(0, 3 * US))
    def test_delay_minus_residence_is_link_sum(self, fwd, res, seed):
        g = build_topology("tree", tiles(9), LinkTemplate(delay=fwd, residence=res), fanout=3)
        d = transit(g, "t000", "t008", 0, RngStreams(seed))
        links = sum(g.link(u, v).delay(u, v) for u, v in zip(d.path, d.path[1:]))
        assert d.delay - d.residence == links

    def test_tie_break_by_node_id(self):
        g = build_topology(
            "explicit", ["a", "z"], LinkTemplate(delay=US),
            edges=[("a", "m2"), ("m2", "z"), ("a", "m1"), ("m1", "z")], switches=["m1", "m2"],
        )
        assert g.path("a", "z") == ("a", "m1", "z")

    def test_no_path(self):
        g = chain_graph()
        with pytest.raises(NoPath):
            transit(g, "a", "nowhere", 0, RngStreams(0))

    def test_link_rejects_negative_delay(self):
        with pytest.raises(ValueError):
            Link("a", "b", -1, 0)
