import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from scenegen.graph import (GraphError, Network, connected_components, lcc_size_ratio, node_fraction,
                            reachability, shortest_path_distances, shortest_path_tree,
                            structural_quintuple, weight_entropy, weight_entropy_ratio, weight_fraction,
                            weighted_degree)


@st.composite
def networks(draw, max_nodes=10):
    n = draw(st.integers(2, max_nodes))
    nodes = [f"v{i}" for i in range(n)]
    pairs = list(itertools.combinations(nodes, 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    weights = draw(st.lists(st.integers(1, 6), min_size=len(chosen), max_size=len(chosen)))
    return Network(nodes, [(u, v, float(w)) for (u, v), w in zip(chosen, weights)])


def test_container_rejects_self_loops_and_bad_weights():
    g = Network()
    with pytest.raises(GraphError):
        g.add_edge("a", "a", 1.0)
    with pytest.raises(GraphError):
        g.add_edge("a", "b", 0.0)


def test_edges_are_symmetric(triangle_tail):
    for u, v, w in triangle_tail.edges():
        assert triangle_tail.weight(v, u) == w
        assert u < v


def test_node_fraction():
    orig = Network(list("abcde"), [("a", "b", 1.0)])
    assert node_fraction(orig, orig) == 1
    assert node_fraction(orig.subgraph("abcd"), orig) == 0.8
    assert node_fraction(Network(), orig) == 0
    with pytest.raises(GraphError):
        node_fraction(Network(), Network())


def test_weight_fraction():
    tri = Network(edges=[("a", "b", 1.0), ("b", "c", 2.0), ("a", "c", 3.0)])
    assert weight_fraction(tri, tri) == 1
    assert weight_fraction(tri.edge_subgraph([("b", "c"), ("a", "c")]), tri) == pytest.approx(5 / 6, abs=1e-15)
    assert weight_fraction(Network(tri.nodes), tri) == 0


def test_weight_entropy_ratio():
    orig = Network(edges=[("a", "b", 1.0), ("b", "c", 1.0), ("c", "d", 1.0), ("d", "a", 1.0)])
    assert weight_entropy(orig) == 2.0
    assert weight_entropy_ratio(orig, orig) == 1
    assert weight_entropy_ratio(orig.edge_subgraph([("a", "b"), ("b", "c")]), orig) == 0.5
    assert weight_entropy_ratio(orig.edge_subgraph([("a", "b")]), orig) == 0
    with pytest.raises(GraphError):
        weight_entropy_ratio(orig, Network(edges=[("x", "y", 2.0)]))


def test_lcc_size_ratio():
    orig = Network(edges=[("A", "B", 1.0), ("B", "C", 1.0)])
    assert lcc_size_ratio(orig, orig) == 1
    assert lcc_size_ratio(orig.edge_subgraph([("A", "B")]), orig) == pytest.approx(2 / 3, abs=1e-15)
    assert lcc_size_ratio(Network(["A", "B", "C"]), orig) == pytest.approx(1 / 3, abs=1e-15)


def test_reachability_examples():
    assert reachability(Network(edges=[("a", "b", 1.0), ("b", "c", 1.0)])) == 1
    two = Network(edges=[("a", "b", 1.0), ("c", "d", 1.0)])
    assert reachability(two) == pytest.approx(1 / 3, abs=1e-15)
    assert reachability(Network(list("abc"))) == 0
    with pytest.raises(GraphError):
        reachability(Network(["a"]))


def test_weighted_degree():
    g = Network(["z"], [("a", "b", 2.0), ("a", "c", 3.0)])
    assert weighted_degree(g, "z") == 0
    assert weighted_degree(g, "a") == 5
    tri = Network(edges=[("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0)])
    assert [weighted_degree(tri, n) for n in "abc"] == [2, 2, 2]
    with pytest.raises(GraphError):
        weighted_degree(g, "nope")


def test_identity_quintuple(triangle_tail):
    q = structural_quintuple(triangle_tail, triangle_tail)
    assert (q.nf, q.wf, q.we, q.lcc_s) == (1, 1, 1, 1)
    assert q.reachability == reachability(triangle_tail)


def test_shortest_path_tree_examples():
    star = Network(edges=[("c", x, 1.0) for x in "pqrs"])
    assert shortest_path_tree(star, "c") == {"c": None, "p": "c", "q": "c", "r": "c", "s": "c"}
    g = Network(edges=[("A", "B", 1.0), ("B", "C", 1.0), ("A", "C", 0.4)])
    assert shortest_path_tree(g, "A") == {"A": None, "B": "A", "C": "B"}
    assert shortest_path_tree(g, "A", "unit") == {"A": None, "B": "A", "C": "A"}
    with pytest.raises(GraphError):
        shortest_path_tree(g, "Z")


def test_tie_break_prefers_smaller_parent():
    # d reachable at equal length through b or c
    g = Network(edges=[("a", "c", 1.0), ("a", "b", 1.0), ("c", "d", 1.0), ("b", "d", 1.0)])
    assert shortest_path_tree(g, "a")["d"] == "b"


def _simple_path_lengths(g: Network, s: str) -> dict[str, float]:
    best = {s: 0.0}

    def walk(u, seen, length):
        for v, w in g.neighbors(u).items():
            if v in seen:
                continue
            d = length + 1.0 / w
            if d < best.get(v, math.inf):
                best[v] = d
            walk(v, seen | {v}, d)

    walk(s, {s}, 0.0)
    return best


@settings(max_examples=60, deadline=None)
@given(networks(max_nodes=7))
def test_dijkstra_matches_path_enumeration(g):
    for s in g.sorted_nodes():
        dist, _ = shortest_path_distances(g, s)
        ref = _simple_path_lengths(g, s)
        assert dist.keys() == ref.keys()
        for v in ref:
            assert dist[v] == pytest.approx(ref[v], rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(networks(max_nodes=12))
def test_reachability_matches_pair_oracle(g):
    assert reachability(g) == pytest.approx(oracles.reachability(g), abs=1e-15)
    assert sorted(map(sorted, connected_components(g))) == sorted(map(sorted, oracles.components(g)))


@settings(max_examples=60, deadline=None)
@given(networks(max_nodes=10), st.randoms(use_true_random=False))
def test_subgraph_metrics_bounded(g, rnd):
    assume(g.number_of_edges() >= 2)  # a single edge has zero weight entropy
    edges = [(u, v) for u, v, _ in g.edges() if rnd.random() < 0.5]
    kept = [n for n in g.sorted_nodes() if rnd.random() < 0.8]
    sub = g.edge_subgraph(edges, nodes=kept + [x for e in edges for x in e])
    assert sub.is_subgraph_of(g)
    q = structural_quintuple(sub, g)
    assert 0 <= q.nf <= 1 and 0 <= q.lcc_s <= 1 and 0 <= q.reachability <= 1
    assert 0 <= q.wf <= 1
    assert q.we >= 0


@settings(max_examples=40, deadline=None)
@given(networks(max_nodes=9), st.permutations(range(9)))
def test_metrics_invariant_under_relabeling(g, perm):
    mapping = {f"v{i}": f"w{perm[i]}" for i in range(9)}
    h = Network([mapping[n] for n in g.nodes], [(mapping[u], mapping[v], w) for u, v, w in g.edges()])
    assert reachability(h) == reachability(g)
    assert weight_entropy(h) == pytest.approx(weight_entropy(g), abs=1e-12)
    assert sorted(len(c) for c in connected_components(h)) == sorted(len(c) for c in connected_components(g))


def test_serialization_round_trip(tmp_path, triangle_tail):
    g = triangle_tail.copy()
    g.add_node("lonely", category="Infrastructure")
    assert Network.from_edgelist(g.to_edgelist(), nodes=g.nodes) == g
    assert Network.from_json(g.to_json()) == g
    g.save(tmp_path / "g")
    assert (tmp_path / "g.edges").read_text().splitlines()[0] == "a b 3.0"
    assert Network.from_json(json.loads((tmp_path / "g.json").read_text())) == g


def test_random_graph_reachability_against_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = oracles.random_graph(rng, max_nodes=50, max_edges=60)
        assert reachability(g) == pytest.approx(oracles.reachability(g), abs=1e-15)
