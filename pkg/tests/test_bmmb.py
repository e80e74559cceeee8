import dataclasses
import random

import pytest

from mmbsim.bmmb import (
    BmmbAutomaton, assert_arbitrary_bound, assert_r_restricted_bound, bmmb_automata, build_timeline,
    queue_law_holds, t_bound,
)
from mmbsim.engine import run
from mmbsim.errors import InvalidParameter, PreconditionViolation
from mmbsim.graph import make_grey_zone, make_line, restrict_to_power
from mmbsim.schedulers import make_scheduler
from mmbsim.trace import EngineConfig


def test_single_node_order(cfg):
    autos = bmmb_automata(1)
    tr = run(make_line(1), autos, make_scheduler("eager"), cfg, {0: [5, 2]})
    assert [e.payload for e in tr.events if e.kind == "bcast"] == [2, 5]
    assert autos[0].sent == {2, 5}


def test_line3_eager_reaches_end(cfg):
    tr = run(make_line(3), bmmb_automata(3), make_scheduler("eager"), cfg, {0: ["m"]})
    assert tr.get_times()[("m", 2)] == 2


class _Ctx:
    def __init__(self):
        self.sent = []

    def broadcast(self, p):
        self.sent.append(p)


def test_duplicate_discarded():
    a = BmmbAutomaton()
    a.ctx = _Ctx()
    a.on_receive("m", 1, True)
    a.on_receive("x", 1, True)
    before = len(a.bcastq)
    a.on_receive("m", 2, False)
    assert len(a.bcastq) == before == 2 and a.ctx.sent == ["m"]


def test_timeline_examples(cfg):
    tr = run(make_line(4), bmmb_automata(4), make_scheduler("eager"), cfg, {0: ["m"]})
    lines = build_timeline(tr)
    assert lines[0].get["m"] == 0
    for line in lines:
        for m, t in line.ack.items():
            assert t >= line.get[m]
    assert not lines[3].received(2) and lines[3].received(3 * cfg.f_prog) == {"m"}


def test_t_bound_examples(cfg):
    assert t_bound(0, 1, 1, cfg) == 0
    assert t_bound(5, 2, 2, cfg) == 25
    D, k, r = 63, 8, 1
    assert t_bound(D, k, r, cfg) == (D + (r + 1) * k - 2) * cfg.f_prog + r * (k - 1) * cfg.f_ack
    with pytest.raises(InvalidParameter):
        t_bound(1, 0, 1, cfg)


def test_arbitrary_bound_line16_random(cfg):
    g = make_line(16)
    for seed in range(50):
        tr = run(g, bmmb_automata(16), make_scheduler("random"), cfg, {0: [0], 5: [1], 9: [2], 15: [3]}, seed=seed)
        rep = assert_arbitrary_bound(tr, g, cfg)
        assert rep.ok and rep.checked > 0
        assert queue_law_holds(tr, g.n)


def test_arbitrary_bound_flags_deleted_ack(cfg):
    g = make_line(6)
    tr = run(g, bmmb_automata(6), make_scheduler("slow"), cfg, {0: ["m"]})
    victim = next(e for e in tr.events if e.kind == "ack" and e.node == 2)
    mutated = dataclasses.replace(tr, events=[e for e in tr.events if e is not victim])
    rep = assert_arbitrary_bound(mutated, g, cfg)
    assert any(c.node == 2 and c.message == "m" and c.ell == 1 for c in rep.counterexamples)


def test_r1_line32_eager(cfg):
    g = make_line(32)
    arr = {0: [0], 1: [1], 2: [2], 3: [3]}
    tr = run(g, bmmb_automata(32), make_scheduler("eager"), cfg, arr)
    assert assert_r_restricted_bound(tr, g, cfg, 1).ok
    done = max(e.time for e in tr.events)
    assert done <= t_bound(31, 4, 1, cfg) + cfg.f_ack


def test_r2_geometric_random(cfg):
    for seed in range(10):
        g = restrict_to_power(make_grey_zone(40, c=2.0, side=4.5, seed=seed), 2)
        arr = {v: [i] for i, v in enumerate(random.Random(seed).sample(range(40), 4))}
        tr = run(g, bmmb_automata(40), make_scheduler("random"), cfg, arr, seed=seed)
        rep = assert_r_restricted_bound(tr, g, cfg, 2)
        assert rep.ok
        # ell = 1: every reachable node has received something by t(d, 1)
        lines = build_timeline(tr)
        for m, v in tr.arrivals().items():
            for j, d in g.dist_g[v].items():
                assert lines[j].received(t_bound(d, 1, 2, cfg))


def test_r_restricted_precondition(cfg):
    g = make_grey_zone(40, c=2.0, side=4, seed=1)
    tr = run(g, bmmb_automata(40), make_scheduler("eager"), cfg, {0: [0]})
    if not g.extra_edges() or all(g.dist_g[u].get(v, 99) <= 1 for u, v in g.edges_gp):
        pytest.skip("graph happens to be 1-restricted")
    with pytest.raises(PreconditionViolation):
        assert_r_restricted_bound(tr, g, cfg, 1)


def test_late_arrival_rejected(cfg):
    tr = run(make_line(2), bmmb_automata(2), make_scheduler("eager"), cfg, {0: ["m"]})
    ev = dataclasses.replace(tr.events[0], time=tr.events[0].time + 1)
    with pytest.raises(PreconditionViolation):
        assert_arbitrary_bound(dataclasses.replace(tr, events=[ev] + tr.events[1:]), tr.graph, cfg)
