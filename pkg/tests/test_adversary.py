import pytest

from mmbsim.adversary import crossing_lower_bound, eager_contrast, measure_completion, run_lower_bound, star_lower_bound
from mmbsim.checker import check
from mmbsim.errors import InvalidParameter
from mmbsim.trace import EngineConfig


def test_star_k2(cfg):
    setup = star_lower_bound(2, cfg)
    lb = run_lower_bound(setup)
    v = setup.graph.vertex("v")
    gets = lb.trace.get_times()
    assert max(gets[(0, v)], gets[(1, v)]) >= 8
    assert check(lb.trace).ok


@pytest.mark.parametrize("seed", range(3))
def test_star_k32(cfg, seed):
    setup = star_lower_bound(32, cfg)
    lb = run_lower_bound(setup, seed)
    assert lb.measured >= 248 == setup.expected_floor
    assert check(lb.trace).ok
    cert = lb.certificate()
    assert cert["holds"] and cert["floor"] == "248/1"


def test_crossing_d2_phase_one(cfg):
    setup = crossing_lower_bound(2, cfg)
    g = setup.graph
    lb = run_lower_bound(setup)
    gets = lb.trace.get_times()
    a2, b2 = g.vertex("a2"), g.vertex("b2")
    assert gets[(0, a2)] == 8
    first_b2 = next(e for e in lb.trace.events if e.kind == "rcv" and e.node == b2 and e.payload == 0)
    assert 1 <= first_b2.time <= 7 and first_b2.reliable is False
    assert check(lb.trace).ok


def test_crossing_d40(cfg):
    setup = crossing_lower_bound(40, cfg)
    lb = run_lower_bound(setup)
    assert lb.measured == 312 and lb.measured >= setup.expected_floor == 304
    assert check(lb.trace).ok
    contrast = eager_contrast(setup)
    assert contrast.measured <= 2 * (40 * cfg.f_prog + cfg.f_ack)


def test_crossing_needs_integer_ratio():
    with pytest.raises(InvalidParameter):
        crossing_lower_bound(4, EngineConfig("15/2", 1))
    with pytest.raises(InvalidParameter):
        star_lower_bound(1, EngineConfig(8, 1))


def test_completion_per_component(cfg):
    setup = crossing_lower_bound(5, cfg)
    comp = measure_completion(run_lower_bound(setup).trace, setup.graph)
    assert set(comp.per_message) == {0, 1} and all(c == 1.0 for c in comp.coverage.values())
