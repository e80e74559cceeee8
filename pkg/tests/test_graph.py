import itertools
import math
import random

import pytest

from mmbsim.errors import InvalidParameter
from mmbsim.graph import (
    DualGraph, bfs, is_r_restricted, make_double_line, make_grey_zone, make_line, make_random_dual,
    make_star_bridge, metrics, power_graph, read_graph, restrict_to_power, sphere_pack_limit,
    verify_grey_zone, write_graph,
)


def test_line_examples():
    g1 = make_line(1)
    assert g1.n == 1 and not g1.edges_g
    g2 = make_line(2)
    assert g2.edges_g == {(0, 1)} and g2.edges_gp == g2.edges_g
    assert metrics(make_line(5)).diameter_g == 4


def test_star_bridge_examples():
    g = make_star_bridge(2)
    assert g.n == 3 and len(g.edges_g) == 2 and metrics(g).diameter_g == 2
    g4 = make_star_bridge(4)
    hub, v = 3, 4
    assert len(g4.adj_g[hub]) == 4 and len(g4.adj_g[v]) == 1
    g32 = make_star_bridge(32)
    assert g32.dist_g[0][g32.vertex("v")] == 2
    assert g32.label(31) == "u32"


def test_double_line_examples():
    g = make_double_line(2)
    assert g.n == 4 and len(g.edges_g) == 2
    extra = {tuple(sorted((g.label(u), g.label(v)))) for u, v in g.extra_edges()}
    assert extra == {("a1", "b2"), ("a2", "b1")}
    assert verify_grey_zone(g, 1.5)
    assert not verify_grey_zone(make_double_line(6), 1.2)
    m = metrics(make_double_line(40))
    assert [len(c) for c in m.components] == [40, 40]
    m10 = metrics(make_double_line(10))
    assert len(m10.components) == 2 and m10.component_diameters == (9, 9)


def test_grey_zone_examples():
    g = make_grey_zone(1, seed=3)
    assert g.n == 1 and not g.edges_gp
    g = make_grey_zone(40, c=1.0, side=4, p_link=1.0, seed=1)
    assert g.edges_gp == g.edges_g
    g = make_grey_zone(100, c=1.5, side=7, p_link=0.5, seed=7)
    assert verify_grey_zone(g, 1.5)
    assert g.extra_edges()  # the grey zone is populated at this density


def test_grey_zone_connected_and_deterministic():
    a = make_grey_zone(60, c=1.5, side=5, connected=True, seed=11)
    b = make_grey_zone(60, c=1.5, side=5, connected=True, seed=11)
    assert a.dumps() == b.dumps()
    assert len(metrics(a).components) == 1


def test_invariants_rejected():
    with pytest.raises(InvalidParameter):
        DualGraph(3, frozenset({(0, 1)}), frozenset())
    with pytest.raises(InvalidParameter):
        DualGraph(2, frozenset(), frozenset({(1, 1)}))
    with pytest.raises(InvalidParameter):
        make_line(0)
    with pytest.raises(InvalidParameter):
        make_grey_zone(5, c=0.5)


def test_r_restricted_examples():
    line = make_line(6)
    assert is_r_restricted(line, 1)
    assert not is_r_restricted(make_double_line(4), 1)
    g = DualGraph(6, line.edges_g, line.edges_g | {(0, 3)})
    assert is_r_restricted(g, 3) and not is_r_restricted(g, 2)
    assert is_r_restricted(restrict_to_power(g, 2), 2)


def test_power_graph_examples():
    g = make_line(3)
    assert power_graph(g, 1) == g.edges_g
    assert power_graph(g, 2) == g.edges_g | {(0, 2)}
    h = make_double_line(4)
    closure = power_graph(h, h.n)
    expected = {(u, v) for comp in metrics(h).components for u, v in itertools.combinations(comp, 2)}
    assert closure == expected


def _bfs_oracle(g, s):
    dist, frontier = {s: 0}, [s]
    while frontier:
        nxt = []
        for u in frontier:
            for a, b in g.edges_g:
                for x, y in ((a, b), (b, a)):
                    if x == u and y not in dist:
                        dist[y] = dist[u] + 1
                        nxt.append(y)
        frontier = nxt
    return dist


@pytest.mark.parametrize("seed", range(5))
def test_bfs_matches_oracle(seed):
    g = make_random_dual(25, 0.12, 0.1, seed=seed)
    for s in range(g.n):
        assert bfs(g.adj_g, s) == _bfs_oracle(g, s)


def test_metrics_singleton():
    assert metrics(make_line(1)).diameter_g == 0


def test_sphere_pack_limit():
    assert sphere_pack_limit(0) == 1
    assert sphere_pack_limit(1) == 9
    assert sphere_pack_limit(3) == 49
    # random greedy packings of points pairwise > 1 apart within radius 1 never exceed the bound
    rng = random.Random(0)
    for _ in range(200):
        pts = []
        for _ in range(300):
            r, a = math.sqrt(rng.random()), rng.uniform(0, 2 * math.pi)
            p = (r * math.cos(a), r * math.sin(a))
            if all(math.dist(p, q) > 1 for q in pts):
                pts.append(p)
        assert len(pts) <= sphere_pack_limit(1)


def test_round_trip(tmp_path):
    for g in (make_line(5), make_star_bridge(6), make_double_line(40), make_grey_zone(30, seed=2)):
        p = tmp_path / "g.json"
        write_graph(g, p)
        assert read_graph(p) == g
