"""Scenario-vector scoring: demand indices, value entropy and deviation."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Mapping, Sequence

import numpy as np

from .graph import Network, StructuralQuintuple, structural_quintuple, weighted_degree
from .ingest import CATEGORIES, DemandSeries

DIMS: tuple[str, ...] = ("SA", "Similarity", "NF", "WF", "WE", "LCC_S", "Reachability", "VE")


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class EffectivenessWeights:
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise MetricError(f"invalid effectiveness weights {self}")


@dataclass(frozen=True)
class ScenarioVector:
    """One time step: environment pair, structural quintuple, effectiveness."""

    sa: float
    similarity: float
    nf: float
    wf: float
    we: float
    lcc_s: float
    reachability: float
    ve: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(DIMS, astuple(self)))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ScenarioVector":
        if len(values) != len(DIMS):
            raise MetricError(f"expected {len(DIMS)} values, got {len(values)}")
        return cls(*(float(v) for v in values))


assert len(fields(ScenarioVector)) == len(DIMS)


# -- environment pair ----------------------------------------------------


def sum_activity(demand: DemandSeries, year: int) -> float:
    return demand.total(year)


def sum_activity_index(sa_gen: float, sa_trend: float) -> float:
    """Ratio of the smaller to the larger of generated and expected activity."""
    hi = max(sa_gen, sa_trend)
    if hi <= 0:
        return 1.0
    return min(sa_gen, sa_trend) / hi


def linear_trend(years: Sequence[int], values: Sequence[float]) -> dict[int, float]:
    """Least-squares line through (year, value), clipped at zero."""
    x = np.asarray(years, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(x) < 2:
        return {int(a): float(b) for a, b in zip(x, y)}
    slope, intercept = np.polyfit(x, y, 1)
    return {int(a): max(0.0, float(slope * a + intercept)) for a in x}


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise MetricError("cosine of a zero vector")
    if np.array_equal(a / na, b / nb):
        return 1.0
    return float(a @ b / (na * nb))


def share_similarity(gen: Sequence[float], ref: Sequence[float]) -> float:
    """Cosine between two category-share vectors built from raw counts."""
    gs, rs = float(np.sum(gen)), float(np.sum(ref))
    if gs <= 0 or rs <= 0:
        raise MetricError("zero demand vector")
    return cosine(np.asarray(gen, dtype=float) / gs, np.asarray(ref, dtype=float) / rs)


def demand_similarity(gen: DemandSeries, ref: DemandSeries, year: int) -> float:
    """Cosine between the two years' category-share vectors."""
    try:
        return share_similarity(gen.vector(year), ref.vector(year))
    except MetricError:
        raise MetricError(f"zero demand vector in {year}") from None


# -- effectiveness and value entropy -------------------------------------


def individual_effectiveness(c_i: float, c_max: float, d_i: float, d_max: float,
                             w: EffectivenessWeights = EffectivenessWeights()) -> float:
    if c_max <= 0 or d_max <= 0:
        raise MetricError("zero maxima: degenerate year")
    return w.alpha * math.log(c_i / c_max + 1) + w.beta * math.log(d_i / d_max + 1)


def effectiveness_array(calls: np.ndarray, degrees: np.ndarray,
                        w: EffectivenessWeights = EffectivenessWeights()) -> np.ndarray:
    """Vectorised individual effectiveness; a term whose maximum is zero contributes 0."""
    calls = np.asarray(calls, dtype=float)
    degrees = np.asarray(degrees, dtype=float)
    u = np.zeros(len(calls))
    c_max = calls.max() if len(calls) else 0.0
    d_max = degrees.max() if len(degrees) else 0.0
    if c_max > 0:
        u += w.alpha * np.log(calls / c_max + 1)
    if d_max > 0:
        u += w.beta * np.log(degrees / d_max + 1)
    return u


def node_effectiveness(g: Network, api_calls: Mapping[str, float],
                       w: EffectivenessWeights = EffectivenessWeights()) -> np.ndarray:
    nodes = g.sorted_nodes()
    calls = [float(api_calls.get(n, 0.0)) for n in nodes]
    degs = [weighted_degree(g, n) for n in nodes]
    return effectiveness_array(np.array(calls), np.array(degs), w)


@dataclass(frozen=True)
class NicheHistogram:
    counts: tuple[int, ...]
    edges: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.counts)

    @property
    def n_total(self) -> int:
        return sum(self.counts)


def bin_niches(utilities: Sequence[float], m: int | None = None) -> NicheHistogram:
    """Equal-width niches over [min, max]; ``m`` defaults to round(sqrt(N))."""
    u = np.asarray(utilities, dtype=float)
    if u.size == 0:
        raise MetricError("no utilities to bin")
    if m is None:
        m = max(1, round(math.sqrt(u.size)))
    if m < 1:
        raise MetricError("m must be >= 1")
    lo, hi = float(u.min()), float(u.max())
    if hi == lo:
        return NicheHistogram((int(u.size),), (lo, hi))
    width = (hi - lo) / m
    idx = np.minimum(((u - lo) / width).astype(int), m - 1)
    counts = np.bincount(idx, minlength=m)
    edges = tuple(lo + j * width for j in range(m)) + (hi,)
    return NicheHistogram(tuple(int(c) for c in counts), edges)


def current_entropy(h: NicheHistogram) -> float:
    n = h.n_total
    return -math.fsum((c / n) * math.log2(c / n) for c in h.counts if c > 0) + 0.0


def optimal_entropy(n_total: int) -> float:
    return math.log2(math.sqrt(n_total))


def value_entropy(h: NicheHistogram, normalized: bool = True) -> float:
    """``e ** (1 - |H - H*| / H*)`` with H* = log2 sqrt(N); divided by e when normalized."""
    if h.n_total < 2:
        raise MetricError("value entropy needs at least 2 individuals")
    opt = optimal_entropy(h.n_total)
    gap = abs(current_entropy(h) - opt) / opt
    if normalized:
        return math.exp(-gap)
    return math.exp(1 - gap)


# -- deviation -----------------------------------------------------------


def deviation(generated, expected) -> float:
    """Summed absolute gap to the expected scenario over its summed magnitude.

    Both arguments are (T, L) arrays or anything ``np.asarray`` turns into one
    (a ``Scenario``, a list of ``ScenarioVector``).
    """
    tau = _as_matrix(generated)
    es = _as_matrix(expected)
    if tau.shape != es.shape:
        raise MetricError(f"shape mismatch {tau.shape} vs {es.shape}")
    denom = math.fsum(np.abs(es).ravel())
    if denom == 0:
        raise MetricError("expected scenario is all zeros")
    return math.fsum(np.abs(tau - es).ravel()) / denom


def _as_matrix(x) -> np.ndarray:
    if hasattr(x, "matrix"):
        x = x.matrix
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], ScenarioVector):
        x = [v.as_array() for v in x]
    m = np.asarray(x, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    return m


# -- assembly ------------------------------------------------------------


def system_value_entropy(utilities: Sequence[float], normalized: bool = True) -> float:
    """Value entropy of a population's effectiveness values (0 below two individuals)."""
    if len(utilities) < 2:
        return 0.0
    return value_entropy(bin_niches(utilities), normalized)


def vector_from_parts(sa_gen: float, sa_trend: float, gen_counts: Sequence[float],
                      ref_counts: Sequence[float], quintuple: StructuralQuintuple,
                      utilities: Sequence[float], normalized_ve: bool = True) -> ScenarioVector:
    if sa_gen <= 0:
        raise MetricError("no generated demand")
    return ScenarioVector(
        sa=sum_activity_index(sa_gen, sa_trend),
        similarity=share_similarity(gen_counts, ref_counts),
        nf=quintuple.nf, wf=quintuple.wf, we=quintuple.we, lcc_s=quintuple.lcc_s,
        reachability=quintuple.reachability,
        ve=system_value_entropy(utilities, normalized_ve),
    )


def scenario_vector(demand_gen: DemandSeries, demand_ref: DemandSeries, sub: Network, orig: Network,
                    weights: EffectivenessWeights, year: int, sa_trend: float | None = None,
                    normalized_ve: bool = True) -> ScenarioVector:
    """Score one year. ``sa_trend`` defaults to the reference activity."""
    sa_gen = sum_activity(demand_gen, year)
    if sa_gen <= 0:
        raise MetricError(f"no demand in {year}")
    trend = sum_activity(demand_ref, year) if sa_trend is None else sa_trend
    utilities = node_effectiveness(sub, demand_gen.api_calls.get(year, {}), weights)
    return vector_from_parts(sa_gen, trend, demand_gen.vector(year), demand_ref.vector(year),
                             structural_quintuple(sub, orig), utilities, normalized_ve)


def category_shares(demand: DemandSeries, year: int) -> dict[str, float]:
    v = demand.vector(year)
    s = sum(v)
    return {c: (x / s if s else 0.0) for c, x in zip(CATEGORIES, v)}
