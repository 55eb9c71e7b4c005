from __future__ import annotations

import dataclasses
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qconsensus.analysis import (
    active_nodes,
    check_invariants,
    check_mass_conservation,
    convergence_round,
    leading_mass_nodes,
    round_metrics,
    spread,
    sweep,
    theoretical_bound_alg3,
)
from qconsensus.engine import MASS, Message, RunConfig, run
from qconsensus.graph import build_digraph, gen_random_strongly_connected
from qconsensus.protocol import ZERO, Average, Mass, NodeState, StatePair


def net_from_masses(masses, state=StatePair(1, 1)):
    return tuple(NodeState(Mass(*m), state, 0) for m in masses)


def all_pass(verdicts):
    return {k: v[:3] for k, v in verdicts.items() if v} == {}


class TestLeadingMass:
    def test_examples(self, trace1, trace2):
        assert leading_mass_nodes(trace2.snapshots[1]) == {3}
        assert leading_mass_nodes(trace1.snapshots[3]) == {1, 3}
        assert leading_mass_nodes(net_from_masses([(5, 3), (0, 0), (0, 0)])) == {0}

    def test_ties_on_count_broken_by_value(self):
        assert leading_mass_nodes(net_from_masses([(3, 2), (4, 2), (9, 1)])) == {1}

    @given(
        st.lists(st.tuples(st.integers(-9, 9), st.integers(0, 3)), min_size=2, max_size=8),
        st.randoms(),
    )
    def test_relabeling_invariance(self, masses, rnd):
        masses = [(y, z) if z else (0, 0) for y, z in masses]
        perm = list(range(len(masses)))
        rnd.shuffle(perm)
        permuted = [None] * len(masses)
        for old, new in enumerate(perm):
            permuted[new] = masses[old]
        before = leading_mass_nodes(net_from_masses(masses))
        after = leading_mass_nodes(net_from_masses(permuted))
        assert after == {perm[j] for j in before}


class TestConservation:
    def test_example1_every_round(self, trace1):
        for net in trace1.snapshots:
            assert check_mass_conservation(net, (), Average(24, 4))

    def test_corrupted_value(self, trace1):
        net = list(trace1.snapshots[1])
        s = net[0]
        net[0] = s._replace(mass=Mass(s.mass.y + 1, s.mass.z))
        assert not check_mass_conservation(net, (), Average(24, 4))

    def test_example2_round1(self, trace2):
        assert check_mass_conservation(trace2.snapshots[1], (), Average(22, 4))

    def test_inflight_mass_counted_but_broadcasts_not(self):
        net = net_from_masses([(0, 0), (4, 1)])
        inflight = [
            Message("mass", 0, 1, 6, 1, 0, 1),
            Message("state", 1, 0, 99, 9, 0, 1),
        ]
        assert check_mass_conservation(net, inflight, Average(10, 2))


class TestConvergenceRound:
    def test_examples(self, trace1, trace2):
        assert convergence_round(trace1, Average(24, 4)) == 3
        assert convergence_round(trace2.snapshots, Average(22, 4)) == 4

    def test_already_consensus(self):
        t = run(RunConfig("alg2", build_digraph(3, [(1, 0), (2, 1), (0, 2)]), [7, 7, 7]))
        assert convergence_round(t, Average(21, 3)) == 0

    def test_never(self):
        net = net_from_masses([(1, 1), (2, 1)], StatePair(1, 1))
        assert convergence_round([net], Average(3, 2)) is None

    @given(st.integers(0, 300), st.sampled_from(["alg2", "alg3"]))
    @settings(max_examples=30, deadline=None)
    def test_truncation_after_k0(self, seed, alg):
        d = gen_random_strongly_connected(7, 0.3, seed)
        vals = [seed % 11 - 5, 3, 8, -1, 0, 4, 9]
        first = run(RunConfig(alg, d, vals))
        assert first.termination.k0 is not None
        # keep running past k0 so there is something to cut away
        cfg = RunConfig(alg, d, vals, termination="round-cap", max_rounds=first.termination.round + 20)
        t = run(cfg)
        k0 = convergence_round(t, cfg.average)
        assert k0 == first.termination.k0
        for cut in range(k0 + 1, len(t.snapshots) + 1):
            assert convergence_round(t.snapshots[:cut], cfg.average) == k0


class TestBound:
    @pytest.mark.parametrize("n, m, want", [(4, 6, 124), (2, 2, 8), (20, 20, 8000)])
    def test_values(self, n, m, want):
        assert theoretical_bound_alg3(n, m) == want

    @pytest.mark.parametrize("n, m", [(1, 1), (5, 4)])
    def test_domain(self, n, m):
        with pytest.raises(ValueError):
            theoretical_bound_alg3(n, m)


class TestInvariantSuite:
    def test_golden_traces_clean(self, trace1, trace2):
        v1 = check_invariants(trace1.snapshots, trace1.messages, "alg2", Average(24, 4))
        v2 = check_invariants(trace2.snapshots, trace2.messages, "alg3", Average(22, 4))
        assert all_pass(v1) and all_pass(v2)
        assert "leading_mass_transmits" in v1 and "leading_mass_retained" in v2
        assert "state_dominance" in v2 and "quiescence" in v2

    def test_negative_count_flagged(self, trace1):
        snaps = list(trace1.snapshots)
        net = list(snaps[2])
        net[1] = net[1]._replace(mass=Mass(0, -1))
        snaps[2] = tuple(net)
        v = check_invariants(snaps, trace1.messages, "alg2", Average(24, 4))
        assert v["nonnegativity"] and v["mass_conservation"]

    def test_state_regression_flagged(self, trace1):
        snaps = list(trace1.snapshots)
        net = list(snaps[3])
        net[0] = net[0]._replace(state=StatePair(9, 1))
        snaps[3] = tuple(net)
        v = check_invariants(snaps, trace1.messages, "alg2", Average(24, 4))
        assert v["state_monotone"]

    def test_silent_leader_flagged(self, trace1):
        msgs = [m for m in trace1.messages if not (m.send_round == 2 and m.sender == 0)]
        v = check_invariants(trace1.snapshots, msgs, "alg2", Average(24, 4))
        assert v["leading_mass_transmits"] and v["replay"]

    def test_leader_handing_on_flagged(self):
        # a leading mass (4, 2) sent away under alg3 breaks retention
        snaps = [
            net_from_masses([(4, 2), (1, 1), (1, 1)], StatePair(4, 2)),
            net_from_masses([(0, 0), (5, 3), (1, 1)], StatePair(4, 2)),
        ]
        msgs = [Message(MASS, 0, 1, 4, 2, 0, 0)]
        v = check_invariants(snaps, msgs, "alg3", Average(6, 4))
        assert v["leading_mass_retained"]

    def test_dominance_flagged(self):
        snaps = [(
            NodeState(Mass(6, 2), StatePair(6, 2), 0),
            NodeState(ZERO, StatePair(9, 3), 0),
            NodeState(Mass(3, 1), StatePair(3, 1), 0),
        )]
        v = check_invariants(snaps, [], "alg3", Average(9, 3))
        assert v["state_dominance"]

    def test_late_chatter_flagged(self, trace2):
        extra = Message("state", 0, 2, 11, 2, 10, 11)
        v = check_invariants(trace2.snapshots, list(trace2.messages) + [extra], "alg3", Average(22, 4))
        assert v["quiescence"]

    @given(
        st.sampled_from(["alg1", "alg2", "alg3"]),
        st.integers(2, 12),
        st.integers(0, 10**6),
        st.lists(st.integers(-50, 50), min_size=12, max_size=12),
    )
    @settings(max_examples=60, deadline=None)
    def test_random_runs_clean(self, alg, n, seed, vals):
        d = gen_random_strongly_connected(n, 0.25, seed)
        cfg = RunConfig(alg, d, vals[:n], seed=seed, termination="all")
        t = run(cfg)
        assert all_pass(check_invariants(t.snapshots, t.messages, alg, cfg.average))


def test_round_metrics(trace1):
    rm = round_metrics(trace1.snapshots, trace1.messages, Average(24, 4))
    assert [r.active for r in rm] == [4, 4, 2, 2]
    assert [r.mass_msgs for r in rm] == [4, 2, 2, 0]
    assert [r.converged for r in rm] == [False, False, False, True]
    assert rm[3].equal_holders == {1, 3}


def test_spread_exact():
    net = (NodeState(ZERO, StatePair(1, 3), 0), NodeState(ZERO, StatePair(1, 2), 0))
    assert spread(net) == Fraction(1, 6)
    assert active_nodes(net) == 0


class TestSweep:
    def configs(self, alg, count, n=10):
        return [
            (s, RunConfig(alg, gen_random_strongly_connected(n, 0.2, s), list(range(n)), seed=s))
            for s in range(count)
        ]

    def test_alg3_all_converge(self):
        res = sweep(self.configs("alg3", 100, 20))
        assert res.summary.fraction_converged == 1.0
        assert res.plot[-1].max_spread == 0 and res.plot[-1].frac_converged == 1

    def test_single_seed_degenerates(self):
        res = sweep(self.configs("alg2", 1))
        d = res.summary.k0
        assert d.min == d.max == d.median == d.mean == res.rows[0].k0

    def test_alg2_within_bound(self):
        for row in sweep(self.configs("alg2", 100)).rows:
            assert row.k0 <= theoretical_bound_alg3(row.n, row.m)

    def test_parallel_matches_serial(self):
        cfgs = self.configs("alg1", 6)
        a, b = sweep(cfgs), sweep(cfgs, workers=3)
        assert a.rows == b.rows and a.plot == b.plot

    def test_error_recorded_per_seed(self):
        cfgs = self.configs("alg2", 3)
        bad = dataclasses.replace(cfgs[1][1])
        bad.algorithm = "bogus"
        res = sweep([cfgs[0], (1, bad), cfgs[2]])
        assert res.summary.errors == 1 and res.rows[1].terminated_by == "error"
        assert res.rows[0].error is None and res.rows[2].error is None
