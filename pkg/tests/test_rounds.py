import random

import pytest

from mmbsim.checker import check
from mmbsim.errors import AdversaryError
from mmbsim.graph import DualGraph, make_line
from mmbsim.rounds import (
    RoundAdversary, RoundProtocol, RoundRecord, RoundTrace, SpitefulAdversary, UniformOneAdversary,
    check_round_rules, lower_to_trace, run_rounds,
)


class Fixed(RoundProtocol):
    """Broadcasts a fixed set of (node -> payload) every round; records what is heard."""

    def __init__(self, plan):
        self.plan = plan
        self.heard = {}

    def intents(self, r):
        return self.plan.get(r, {})

    def receive(self, r, deliveries):
        for v, ds in deliveries.items():
            self.heard.setdefault(v, []).extend(ds)


# 0 - 1 reliable, 1 - 2 unreliable only
TRIPLE = DualGraph(3, frozenset({(0, 1)}), frozenset({(0, 1), (1, 2)}))


@pytest.mark.parametrize("adv", [UniformOneAdversary(), SpitefulAdversary()])
def test_forced_delivery(adv):
    p = Fixed({0: {0: "m"}})
    run_rounds(make_line(2), p, adv, 1)
    assert p.heard == {1: [(0, "m", True)]}


def test_unreliable_only_neighbor_delivered_by_uniform():
    p = Fixed({0: {2: "w"}})
    run_rounds(TRIPLE, p, UniformOneAdversary(), 1)
    assert p.heard == {1: [(2, "w", False)]}


def test_broadcasters_hear_nothing():
    p = Fixed({0: {0: "a", 1: "b"}})
    run_rounds(make_line(2), p, UniformOneAdversary(), 1)
    assert p.heard == {}


def test_spiteful_prefers_unreliable():
    for seed in range(20):
        p = Fixed({0: {0: "g", 2: "x"}})
        run_rounds(TRIPLE, p, SpitefulAdversary(), 1, seed=seed)
        assert p.heard == {1: [(2, "x", False)]}


def test_uniform_is_fair():
    adv, rng = UniformOneAdversary(), random.Random(1)
    picks = [adv.pick(1, [0, 2], TRIPLE, rng) for _ in range(10_000)]
    share = picks.count(0) / len(picks)
    assert 0.45 <= share <= 0.55


class Lazy(RoundAdversary):
    def choose(self, r, broadcasters, graph, rng):
        return {}


class Loud(RoundAdversary):
    def choose(self, r, broadcasters, graph, rng):
        return {v: [v] for v in broadcasters}


def test_adversary_rules_enforced():
    with pytest.raises(AdversaryError):
        run_rounds(make_line(2), Fixed({0: {0: "m"}}), Lazy(), 1)
    with pytest.raises(AdversaryError):
        run_rounds(make_line(2), Fixed({0: {0: "m"}}), Loud(), 1)


def test_check_round_rules_reports():
    rt = RoundTrace(0, 1, [RoundRecord(0, {0: "m"}, {})])
    assert check_round_rules(rt, make_line(2))


def test_lowering(enh):
    g = make_line(4)
    p = Fixed({0: {0: "a"}, 2: {1: "b", 3: "c"}})
    rt = run_rounds(g, p, UniformOneAdversary(), 4)
    assert [rec.round for rec in rt.records] == [0, 2]  # round 1 is empty: nothing emitted
    tr = lower_to_trace(rt, enh, g)
    assert not any(e.kind == "ack" for e in tr.events)
    assert sum(e.kind == "bcast" for e in tr.events) == sum(e.kind == "abort" for e in tr.events) == 3
    assert not any(e.kind == "bcast" and e.time == 1 for e in tr.events)
    assert check(tr, g, enh).ok


def test_record_off_keeps_nothing():
    rt = run_rounds(make_line(3), Fixed({0: {0: "m"}}), UniformOneAdversary(), 3, record=False)
    assert rt.records == [] and rt.rounds_run == 3
