import pytest

from mmbsim.checker import check
from mmbsim.errors import PreconditionViolation
from mmbsim.fmmb import (
    FmmbParams, fmmb_run, gather, log2n, mis, overlay, round_budget, spread, verify_mis,
)
from mmbsim.graph import DualGraph, make_grey_zone, make_line, metrics
from mmbsim.rounds import SpitefulAdversary, UniformOneAdversary, lower_to_trace
from mmbsim.trace import ENHANCED, EngineConfig

P = FmmbParams()


def test_params_defaults():
    assert P.activation == pytest.approx(1 / 9)
    assert FmmbParams(c=1.0).activation == 0.25
    assert P.election_rounds(100) == 28
    assert P.spread_phases(5, 3) == 16
    with pytest.raises(ValueError):
        FmmbParams(p_act=0.5)


def test_round_budget_formula():
    L = log2n(100)
    assert L == 7
    assert round_budget(100, 10, 8) == 64 * (10 * L + 8 * L + L ** 3)


def test_verify_mis_examples():
    edgeless = DualGraph(4, frozenset(), frozenset())
    assert verify_mis(edgeless, {0, 1, 2, 3}) == (True, None)
    assert verify_mis(make_line(3), {0, 1}) == (False, ("edge", 0, 1))
    assert verify_mis(make_line(5), {0, 2, 4}) == (True, None)
    assert verify_mis(make_line(5), {0, 4}) == (False, ("undominated", 2))


def test_mis_single_node():
    res = mis(make_line(1), P, SpitefulAdversary())
    assert res.members == {0} and res.joined_phase[0] == 0


@pytest.mark.parametrize("seed", range(20))
def test_mis_line_valid(seed):
    g = make_line(12)
    res = mis(g, P, UniformOneAdversary(), seed=seed)
    assert verify_mis(g, res.members)[0]


def test_mis_grey_zone():
    ok = 0
    for seed in range(20):
        g = make_grey_zone(100, c=1.5, side=7, seed=seed)
        ok += verify_mis(g, mis(g, P, SpitefulAdversary(), seed=seed, record=False).members)[0]
    assert ok >= 19


def test_gather_empty():
    g = make_line(3)
    res = gather(g, {1}, {}, P, SpitefulAdversary())
    assert all(not m for m in res.message_sets) and res.owned_by_mis({1}) == set()


def test_gather_single_neighbor():
    g = make_line(2)
    res = gather(g, {0}, {1: ["m"]}, FmmbParams(c=1.0), SpitefulAdversary(), seed=3)
    assert "m" in res.message_sets[0] and "m" not in res.message_sets[1]


def test_gather_requires_mis():
    with pytest.raises(PreconditionViolation):
        gather(make_line(3), {0}, {}, P, SpitefulAdversary())


def test_overlay_examples():
    assert overlay(make_line(3), {1}).diameter == 0
    ov = overlay(make_line(7), {0, 3, 6})
    assert ov.edges == {(0, 3), (3, 6)} and ov.diameter == 2


@pytest.mark.parametrize("seed", range(10))
def test_overlay_connected_for_connected_graphs(seed):
    g = make_grey_zone(60, c=1.5, side=5, connected=True, seed=seed)
    S = mis(g, P, SpitefulAdversary(), seed=seed, record=False).members
    ov = overlay(g, S)
    assert ov.diameter < len(S) or len(S) == 1
    # connectivity: diameter is finite over all pairs, i.e. BFS from every member reaches all
    adj = ov.adjacency()
    seen, stack = {min(S)}, [min(S)]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    assert seen == set(S)


def test_spread_isolated_mis_node():
    g = make_line(1)
    sets = [dict.fromkeys(["a", "b", "c"])]
    res = spread(g, {0}, overlay(g, {0}), sets, P, SpitefulAdversary())
    assert res.complete


def test_spread_between_adjacent_mis_nodes():
    g = make_line(4)
    S = {0, 3}
    sets = [dict.fromkeys(["m"]), {}, {}, {}]
    res = spread(g, S, overlay(g, S), sets, P, SpitefulAdversary(), seed=1)
    assert res.complete and "m" in res.message_sets[3]


def test_fmmb_single_node():
    res = fmmb_run(make_line(1), {0: ["m"]})
    assert res.complete and res.delivered[0] == {"m"}
    assert res.stage_rounds["mis"] == P.mis_rounds(1)


def test_fmmb_end_to_end_and_lowering():
    enh = EngineConfig(8, 1, model=ENHANCED)
    for seed in range(3):
        g = make_grey_zone(64, c=1.5, side=5.6, connected=True, seed=seed)
        arr = {v: [i] for i, v in enumerate(range(0, 64, 8))}
        res = fmmb_run(g, arr, seed=seed, record=True)
        D = metrics(g).diameter_g
        assert res.complete and res.rounds <= round_budget(64, D, 8)
        assert all(d == set(range(8)) for d in res.delivered)
        assert check(lower_to_trace(res.round_trace(), enh, g), g, enh).ok


def test_fmmb_disconnected_targets_component_only():
    g = DualGraph(4, frozenset({(0, 1), (2, 3)}), frozenset({(0, 1), (2, 3), (1, 2)}))
    res = fmmb_run(g, {0: ["x"], 3: ["y"]}, seed=2)
    assert res.complete
    assert "x" in res.delivered[1] and "y" in res.delivered[2]
