from fractions import Fraction

import pytest

from mmbsim.bmmb import bmmb_automata
from mmbsim.checker import check
from mmbsim.engine import Ack, Deliver, NodeAutomaton, run
from mmbsim.errors import ExecutionError, SchedulerError
from mmbsim.graph import make_line, make_random_dual
from mmbsim.schedulers import PlanScheduler, SCHEDULERS, make_scheduler
from mmbsim.trace import Trace


def kinds(trace):
    return [(e.kind, e.node, e.time) for e in trace.events]


@pytest.mark.parametrize("name", sorted(SCHEDULERS))
def test_single_node(cfg, name):
    g = make_line(1)
    tr = run(g, bmmb_automata(1), make_scheduler(name), cfg, {0: ["m"]})
    assert [e.kind for e in tr.events] == ["arrive", "bcast", "ack"]


def test_line2_slow_synchronous(cfg):
    g = make_line(2)
    tr = run(g, bmmb_automata(2), make_scheduler("slow"), cfg, {0: ["m"]})
    assert kinds(tr) == [
        ("arrive", 0, 0), ("bcast", 0, 0), ("rcv", 1, 1), ("bcast", 1, 1), ("rcv", 0, 2), ("ack", 0, 8), ("ack", 1, 9),
    ]
    assert check(tr).ok


@pytest.mark.parametrize("name", sorted(SCHEDULERS))
def test_determinism(cfg, name):
    g = make_random_dual(20, 0.2, 0.2, seed=4)
    a = run(g, bmmb_automata(g.n), make_scheduler(name), cfg, {0: [0], 7: [1]}, seed=9)
    b = run(g, bmmb_automata(g.n), make_scheduler(name), cfg, {0: [0], 7: [1]}, seed=9)
    assert a.to_jsonl() == b.to_jsonl()
    assert a.digests == b.digests


def test_trace_jsonl_round_trip(cfg):
    g = make_line(4)
    tr = run(g, bmmb_automata(4), make_scheduler("random"), cfg, {0: [0, 1]}, seed=2)
    back = Trace.from_jsonl(tr.to_jsonl())
    assert back.to_jsonl() == tr.to_jsonl()
    assert all(isinstance(e.time, Fraction) for e in back.events)


def test_horizon_truncates(cfg):
    g = make_line(10)
    tr = run(g, bmmb_automata(10), make_scheduler("slow"), cfg, {0: ["m"]}, horizon=3)
    assert tr.truncated and tr.end_time == 3
    rep = check(tr)
    assert rep.ok and rep.warnings


class _Script(PlanScheduler):
    def __init__(self, decisions):
        self.decisions = decisions

    def plan(self, inst, view):
        yield from self.decisions(inst, self.config)


def test_scheduler_cannot_ack_early(cfg):
    g = make_line(2)
    sched = _Script(lambda inst, c: [Ack(inst.instance_id, inst.bcast_at + 1)])
    with pytest.raises(SchedulerError):
        run(g, bmmb_automata(2), sched, cfg, {0: ["m"]})


def test_scheduler_cannot_exceed_f_ack(cfg):
    g = make_line(2)
    sched = _Script(lambda inst, c: [Deliver(inst.instance_id, 1 - inst.sender, inst.bcast_at),
                                     Ack(inst.instance_id, inst.bcast_at + c.f_ack + 1)])
    with pytest.raises(SchedulerError):
        run(g, bmmb_automata(2), sched, cfg, {0: ["m"]})


def test_scheduler_cannot_deliver_outside_gp(cfg):
    g = make_line(3)
    sched = _Script(lambda inst, c: [Deliver(inst.instance_id, 2, inst.bcast_at)])
    with pytest.raises(SchedulerError):
        run(g, bmmb_automata(3), sched, cfg, {0: ["m"]})


class _DoubleBroadcaster(NodeAutomaton):
    def on_arrive(self, payload):
        self.ctx.broadcast(payload)
        self.ctx.broadcast(payload)


def test_automaton_double_broadcast_is_an_error(cfg):
    with pytest.raises(ExecutionError):
        run(make_line(2), [_DoubleBroadcaster(), _DoubleBroadcaster()], make_scheduler("eager"), cfg, {0: ["m"]})


@pytest.mark.parametrize("name", sorted(SCHEDULERS))
def test_builtin_schedulers_clean(cfg, name):
    for seed in range(10):
        g = make_random_dual(30, 0.1, 0.1, seed=seed)
        tr = run(g, bmmb_automata(g.n), make_scheduler(name), cfg, {0: [0], 5: [1], 9: [2]}, seed=seed)
        assert check(tr, g, cfg).ok


def test_random_scheduler_uses_unreliable_links(cfg):
    g = make_random_dual(30, 0.1, 0.3, seed=1)
    tr = run(g, bmmb_automata(g.n), make_scheduler("random"), cfg, {0: [0], 5: [1]}, seed=1)
    assert any(e.kind == "rcv" and e.reliable is False for e in tr.events)
