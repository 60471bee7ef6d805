import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from scenegen import metrics as M
from scenegen.graph import Network, structural_quintuple, weighted_degree
from scenegen.ingest import CATEGORIES, DemandSeries

finite = st.floats(0.01, 100, allow_nan=False)


def series(by_year: dict[int, tuple[float, ...]], api_calls=None) -> DemandSeries:
    years = sorted(by_year)
    calls = {c: {y: float(by_year[y][i]) for y in years} for i, c in enumerate(CATEGORIES)}
    return DemandSeries(years, calls, api_calls or {y: {} for y in years})


def test_sum_activity():
    d = series({2000: (0, 0, 0, 0), 2001: (3, 1, 0, 2), 2002: (0, 7, 0, 0)})
    assert M.sum_activity(d, 2000) == 0
    assert M.sum_activity(d, 2001) == 6
    assert M.sum_activity(d, 2002) == 7


def test_sum_activity_index():
    assert M.sum_activity_index(90, 100) == 0.9
    assert M.sum_activity_index(100, 90) == 0.9
    assert M.sum_activity_index(0, 0) == 1


def test_linear_trend_recovers_line():
    trend = M.linear_trend([1, 2, 3, 4], [3, 5, 7, 9])
    assert trend == pytest.approx({1: 3, 2: 5, 3: 7, 4: 9}, abs=1e-9)
    assert M.linear_trend([1, 2], [5, 0])[2] >= 0


def test_demand_similarity():
    a = series({1: (1, 0, 0, 0)})
    b = series({1: (0, 1, 0, 0)})
    c = series({1: (0.5, 0.5, 0, 0)})
    assert M.demand_similarity(a, a, 1) == 1
    assert M.demand_similarity(a, b, 1) == 0
    assert M.demand_similarity(c, a, 1) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    with pytest.raises(M.MetricError):
        M.demand_similarity(series({1: (0, 0, 0, 0)}), a, 1)


@given(st.lists(finite, min_size=4, max_size=4), st.lists(finite, min_size=4, max_size=4), finite, finite)
def test_similarity_symmetric_and_scale_invariant(x, y, s, t):
    assert M.share_similarity(x, y) == pytest.approx(M.share_similarity(y, x), abs=1e-12)
    assert M.share_similarity(np.multiply(x, s), np.multiply(y, t)) == pytest.approx(M.share_similarity(x, y), abs=1e-12)


def test_individual_effectiveness():
    assert M.individual_effectiveness(0, 5, 0, 3) == 0
    assert M.individual_effectiveness(5, 5, 3, 3) == pytest.approx(math.log(2), abs=1e-15)
    assert M.individual_effectiveness(5, 5, 0, 3, M.EffectivenessWeights(1, 0)) == pytest.approx(math.log(2))
    with pytest.raises(M.MetricError):
        M.individual_effectiveness(0, 0, 1, 1)
    with pytest.raises(M.MetricError):
        M.EffectivenessWeights(0, 0)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_effectiveness_monotone(c1, c2, d1, d2):
    cmax, dmax = 20.0, 20.0
    lo = M.individual_effectiveness(min(c1, c2), cmax, min(d1, d2), dmax)
    hi = M.individual_effectiveness(max(c1, c2), cmax, max(d1, d2), dmax)
    assert lo <= hi


def test_effectiveness_array_matches_scalar():
    calls = np.array([0.0, 2.0, 5.0])
    degs = np.array([1.0, 3.0, 0.0])
    u = M.effectiveness_array(calls, degs)
    ref = [M.individual_effectiveness(c, 5, d, 3) for c, d in zip(calls, degs)]
    assert u == pytest.approx(ref, abs=1e-15)
    # a zero maximum drops that term instead of failing
    assert M.effectiveness_array(np.zeros(2), np.array([1.0, 2.0])) == pytest.approx(
        [0.5 * math.log(1.5), 0.5 * math.log(2)])


def test_bin_niches():
    h = M.bin_niches(np.linspace(0, 1, 16), m=4)
    assert h.counts == (4, 4, 4, 4)
    assert M.bin_niches([0.3] * 9).counts == (9,)
    assert M.bin_niches(np.arange(100.0)).m == 10


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200), st.integers(1, 20))
def test_bin_niches_conserves_mass(u, m):
    assert M.bin_niches(u, m).n_total == len(u)


def test_value_entropy_examples():
    uniform = M.NicheHistogram((4, 4, 4, 4), ())
    single = M.NicheHistogram((16,), ())
    assert M.value_entropy(uniform, normalized=False) == pytest.approx(math.e, abs=1e-12)
    assert M.value_entropy(uniform) == pytest.approx(1.0, abs=1e-12)
    assert M.value_entropy(single, normalized=False) == pytest.approx(1.0, abs=1e-12)
    assert M.value_entropy(single) == pytest.approx(1 / math.e, abs=1e-12)
    assert M.value_entropy(M.NicheHistogram((8, 8), ()), normalized=False) == pytest.approx(math.exp(0.5), abs=1e-12)
    with pytest.raises(M.MetricError):
        M.value_entropy(M.NicheHistogram((1,), ()))


@given(st.lists(st.integers(0, 30), min_size=1, max_size=12).filter(lambda c: sum(c) >= 2))
def test_value_entropy_matches_oracle_and_range(counts):
    h = M.NicheHistogram(tuple(counts), ())
    assert M.value_entropy(h) == pytest.approx(oracles.value_entropy(counts), rel=1e-12)
    assert 0 < M.value_entropy(h) <= 1
    # current entropy never exceeds log2 N = 2 * optimal, so raw u stays in [1, e]
    assert 1 - 1e-12 <= M.value_entropy(h, normalized=False) <= math.e + 1e-12


def test_deviation_examples():
    es = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert M.deviation(es, es) == 0
    assert M.deviation([1.1, 0.9], [1.0, 1.0]) == pytest.approx(0.10, abs=1e-12)
    assert M.deviation(2 * es, es) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(M.MetricError):
        M.deviation([1.0], [0.0])
    with pytest.raises(M.MetricError):
        M.deviation([[1.0, 2.0]], [[1.0]])


@settings(max_examples=100)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20), st.floats(0.01, 100))
def test_deviation_properties(pairs, c):
    tau = np.array([p[0] for p in pairs])
    es = np.array([p[1] for p in pairs])
    d = M.deviation(tau, es)
    assert d >= 0
    assert d == pytest.approx(oracles.deviation(tau, es), rel=1e-12)
    assert M.deviation(c * tau, c * es) == pytest.approx(d, rel=1e-9, abs=1e-15)
    assert M.deviation(es, es) == 0


def test_deviation_accepts_vectors():
    v = M.ScenarioVector(1, 1, 1, 1, 1, 1, 0.5, 0.5)
    w = M.ScenarioVector.from_array(v.as_array() * 1.1)
    assert M.deviation([w], [v]) == pytest.approx(0.1, abs=1e-12)


def _toy():
    orig = Network(edges=[("a", "b", 2.0), ("b", "c", 1.0), ("c", "d", 1.0), ("a", "c", 3.0)])
    sub = orig.edge_subgraph([("a", "b"), ("a", "c")], nodes=["a", "b", "c", "d"])
    cat = {"a": CATEGORIES[0], "b": CATEGORIES[0], "c": CATEGORIES[1], "d": CATEGORIES[3]}
    calls = {"a": 4.0, "b": 1.0, "c": 2.0, "d": 3.0}
    vec = [0.0] * 4
    for n, x in calls.items():
        vec[CATEGORIES.index(cat[n])] += x
    return orig, sub, series({1: tuple(vec)}, {1: calls})


def test_identity_scenario_vector():
    orig, _, d = _toy()
    v = M.scenario_vector(d, d, orig, orig, M.EffectivenessWeights(), 1)
    assert (v.nf, v.wf, v.we, v.lcc_s, v.similarity, v.sa) == (1, 1, 1, 1, 1, 1)


def test_toy_vector_matches_components():
    orig, sub, d = _toy()
    ref = series({1: (5.0, 4.0, 0.0, 3.0)})
    v = M.scenario_vector(d, ref, sub, orig, M.EffectivenessWeights(), 1, sa_trend=12.0)
    calls = d.api_calls[1]
    us = [M.individual_effectiveness(calls[n], 4.0, weighted_degree(sub, n), 5.0) for n in "abcd"]
    q = structural_quintuple(sub, orig)
    assert v.sa == pytest.approx(10 / 12, abs=1e-15)
    assert v.similarity == pytest.approx(M.share_similarity([5, 2, 0, 3], [5, 4, 0, 3]))
    assert (v.nf, v.wf, v.we, v.lcc_s, v.reachability) == q.as_tuple()
    assert v.ve == pytest.approx(M.value_entropy(M.bin_niches(us)), abs=1e-15)


def test_empty_demand_year_errors():
    orig, _, _ = _toy()
    zero = series({1: (0, 0, 0, 0)})
    with pytest.raises(M.MetricError):
        M.scenario_vector(zero, zero, orig, orig, M.EffectivenessWeights(), 1)
