"""Wiring: ecosystem data, the five comparison methods and the agent pipeline.

Every method yields one scenario (a per-year sequence of scenario vectors)
scored against the expected scenario built from the original data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import backbone as bb
from .config import RunConfig
from .env_agent import (EnvironmentBoundary, EnvironmentResult, history_matrix, load_knowledge,
                        parse_prompts, run_environment_agent)
from .graph import Network, StructuralQuintuple, structural_quintuple, weighted_degree
from .ingest import (CATEGORIES, ApiRecord, DemandSeries, MashupRecord, build_demand_series,
                     build_network, classify_categories, dataset_years, load_dataset)
from .llm import LLMAdapter
from .metrics import (DIMS, EffectivenessWeights, ScenarioVector, deviation, effectiveness_array,
                      linear_trend, vector_from_parts)
from .planner_agent import (CalibrationReport, ConstraintText, ExperimentScheme, Execution,
                            OptimizeReport, calibrate, compile_rule, extract_constraints,
                            load_documents, optimize_scheme)
from .scenario import (DiscreteDistribution, SampleSpace, Scenario, ScenarioSet, expected_scenario,
                       reduce_scenarios, sample_scenarios)
from .social_agent import (PairStrengths, Threshold, ThresholdPolicy, admit, ecosystem_entities,
                           featurize, pair_strengths)

log = logging.getLogger(__name__)

METHOD_ORDER = ("original", "cluster", "gt", "hss", "pla", "ours")
REPORT_COLUMNS = DIMS + ("Deviation",)


@dataclass
class EcosystemData:
    apis: list[ApiRecord]
    mashups: list[MashupRecord]
    category_map: dict[str, str]
    years: list[int]
    demand: DemandSeries
    networks: dict[int, Network]


def prepare(apis: Sequence[ApiRecord], mashups: Sequence[MashupRecord], years: Sequence[int] | None = None,
            classifier=None) -> EcosystemData:
    all_years = dataset_years(mashups)
    years = sorted(years) if years else all_years
    missing = sorted(set(years) - set(all_years))
    if missing:
        raise ValueError(f"no mashups in year(s) {missing}")
    cmap = classify_categories(apis, classifier)
    demand = build_demand_series(mashups, cmap, years)
    nets = {y: build_network(mashups, y) for y in years}
    return EcosystemData(list(apis), list(mashups), cmap, list(years), demand, nets)


def load(cfg: RunConfig, adapter: LLMAdapter | None = None) -> EcosystemData:
    apis, mashups = load_dataset(cfg.dataset, cfg.format)
    classifier = None
    if cfg.llm_mode == "remote" and adapter is not None:
        from .ingest import AdapterClassifier

        classifier = AdapterClassifier(adapter)
    return prepare(apis, mashups, cfg.years, classifier)


def make_adapter(cfg: RunConfig) -> LLMAdapter:
    return LLMAdapter.from_env(cfg.llm_mode, seed=cfg.seed, key_env=cfg.llm_api_key_env,
                               endpoint=cfg.llm_endpoint, model=cfg.llm_model,
                               timeout=cfg.llm_timeout, max_in_flight=cfg.llm_max_in_flight)


@dataclass
class MethodResult:
    method: str
    years: list[int]
    vectors: list[ScenarioVector]
    deviation: float
    nodes: int = 0
    edges: int = 0
    extra: dict = field(default_factory=dict)

    def matrix(self) -> np.ndarray:
        return np.array([v.as_array() for v in self.vectors])

    def row(self) -> dict[str, float]:
        means = self.matrix().mean(axis=0)
        out = {d: float(x) for d, x in zip(DIMS, means)}
        out["Deviation"] = float(self.deviation)
        return out

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "years": self.years,
            "vectors": [v.as_dict() for v in self.vectors],
            "deviation": self.deviation,
            "row": self.row(),
            "nodes": self.nodes,
            "edges": self.edges,
            "extra": self.extra,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MethodResult":
        vecs = [ScenarioVector.from_array([v[d] for d in DIMS]) for v in obj["vectors"]]
        return cls(obj["method"], list(obj["years"]), vecs, float(obj["deviation"]),
                   int(obj.get("nodes", 0)), int(obj.get("edges", 0)), dict(obj.get("extra", {})))


@dataclass
class _YearParts:
    nodes: list[str]
    categories: np.ndarray  # category index per node
    calls: np.ndarray
    degrees: np.ndarray
    quintuple: StructuralQuintuple


class Evaluator:
    """Scores per-year subnetworks and demand against the original data.

    The expected scenario is the original data's own scenario; the activity
    index compares against a least-squares trend of historical activity.
    """

    def __init__(self, data: EcosystemData, weights: EffectivenessWeights = EffectivenessWeights()):
        self.data = data
        self.weights = weights
        self.sa_trend = linear_trend(data.years, [data.demand.total(y) for y in data.years])
        self.ref_counts = {y: data.demand.vector(y) for y in data.years}
        self._cat_index = {c: i for i, c in enumerate(CATEGORIES)}
        original = [self.vector(y, data.networks[y]) for y in data.years]
        self.history = [Scenario.from_vectors(original)]
        self.expected = expected_scenario(self.history)

    def parts(self, year: int, sub: Network) -> _YearParts:
        nodes = sub.sorted_nodes()
        api_calls = self.data.demand.api_calls.get(year, {})
        return _YearParts(
            nodes,
            np.array([self._cat_index[self.data.category_map[n]] for n in nodes], dtype=int),
            np.array([float(api_calls.get(n, 0.0)) for n in nodes]),
            np.array([weighted_degree(sub, n) for n in nodes]),
            structural_quintuple(sub, self.data.networks[year]),
        )

    def vector_from(self, year: int, parts: _YearParts, multipliers: np.ndarray | None = None) -> ScenarioVector:
        """``multipliers`` scales each category's per-API calls (length 4)."""
        calls = parts.calls if multipliers is None else parts.calls * multipliers[parts.categories]
        counts = np.bincount(parts.categories, weights=calls, minlength=len(CATEGORIES))
        utilities = effectiveness_array(calls, parts.degrees, self.weights)
        return vector_from_parts(float(calls.sum()), self.sa_trend[year], counts, self.ref_counts[year],
                                 parts.quintuple, utilities)

    def vector(self, year: int, sub: Network, multipliers: np.ndarray | None = None) -> ScenarioVector:
        return self.vector_from(year, self.parts(year, sub), multipliers)

    def score(self, method: str, vectors: Sequence[ScenarioVector], **extra) -> MethodResult:
        nodes = sum(len(self.data.networks[y]) for y in self.data.years)
        edges = sum(self.data.networks[y].number_of_edges() for y in self.data.years)
        return MethodResult(method, list(self.data.years), list(vectors), deviation(vectors, self.expected),
                            nodes, edges, extra)


# -- baselines -----------------------------------------------------------


def run_baseline(method: str, data: EcosystemData, ev: Evaluator, cfg: RunConfig,
                 ) -> tuple[MethodResult, dict[int, Network]]:
    subs: dict[int, Network] = {}
    vectors = []
    removed = {}
    for y in data.years:
        g = data.networks[y]
        if method == "original":
            sub = g
        else:
            ctx = {}
            if method == "cluster":
                ctx["features"] = bb.node_features(g, data.demand.api_calls.get(y, {}),
                                                   data.category_map, CATEGORIES)
            res = bb.extract(g, method, cfg.backbone_params(method), **ctx)
            sub = res.sub
            removed[str(y)] = len(res.removed_nodes)
        subs[y] = sub
        vectors.append(ev.vector(y, sub))
    extra = {"params": {k: v for k, v in cfg.backbone_params(method).items()}} if method != "original" else {}
    if removed:
        extra["removed_nodes"] = removed
    return ev.score(method, vectors, **extra), subs


# -- agent pipeline ------------------------------------------------------


@dataclass
class AgentRun:
    environment: EnvironmentResult
    constraints: list[ConstraintText]
    rules: list
    scheme0: ExperimentScheme
    calibrated: ExperimentScheme
    calibration: CalibrationReport
    scheme: ExperimentScheme
    optimization: OptimizeReport
    full_set: ScenarioSet
    reduced_set: ScenarioSet
    result: MethodResult
    networks: dict[int, Network]


class AgentPipeline:
    """Environment, social and planner agents coordinated into one scheme run."""

    def __init__(self, data: EcosystemData, evaluator: Evaluator, cfg: RunConfig,
                 adapter: LLMAdapter | None = None):
        self.data = data
        self.ev = evaluator
        self.cfg = cfg
        self.adapter = adapter or make_adapter(cfg)
        self._strengths: dict[int, PairStrengths] = {}
        self._arrays: dict[int, dict] = {}
        self._parts: dict[tuple, tuple[Network, _YearParts]] = {}
        self.boundary: EnvironmentBoundary | None = None
        self.ev_bounds: dict[str, tuple[float, float]] | None = None

    # environment -----------------------------------------------------

    def environment(self) -> EnvironmentResult:
        knowledge = load_knowledge(self.cfg.knowledge_dir)
        prompts = parse_prompts(Path(self.cfg.prompts_path).read_text(encoding="utf-8"))
        res = run_environment_agent(self.data.demand, self.data.apis, knowledge, prompts, self.adapter,
                                    self.cfg.seed, self.cfg.theta_high, self.cfg.theta_risk, self.cfg.z_cap,
                                    self.cfg.credibility_mode, self.cfg.feature_dim, self.cfg.candidate_cap)
        self.boundary = res.boundary
        self.ev_bounds = res.boundary.multiplier_range(self.data.demand)
        hist = history_matrix(self.data.demand)
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = np.array([res.boundary.vmin[c] for c in CATEGORIES]) / hist
            hi = np.array([res.boundary.vmax[c] for c in CATEGORIES]) / hist
        self._mult_lo = np.where(hist > 0, lo, 1.0)
        self._mult_hi = np.where(hist > 0, hi, 1.0)
        return res

    # social ----------------------------------------------------------

    def strengths(self, year: int) -> PairStrengths:
        if year not in self._strengths:
            g = self.data.networks[year]
            inds, groups, inter = ecosystem_entities(g, self.data.category_map,
                                                     self.data.demand.api_calls.get(year, {}), CATEGORIES)
            featurize(inds + groups, self.adapter, self.cfg.feature_dim)
            ps = pair_strengths(inds, groups, inter)
            self._strengths[year] = ps
            arrays = {}
            for cls, rows in ps.pairs.items():
                s = np.array([x for _, _, x in rows], dtype=float)
                arrays[cls] = (rows, s, s[s > 0])
            self._arrays[year] = arrays
        return self._strengths[year]

    def policy(self, scheme: ExperimentScheme) -> ThresholdPolicy:
        b = scheme.backbone
        return ThresholdPolicy(Threshold.q(float(b.get("q_ii", self.cfg.policy_ii))),
                               Threshold.q(float(b.get("q_ig", self.cfg.policy_ig))),
                               Threshold.q(float(b.get("q_gg", self.cfg.policy_gg))))

    def _admitted(self, year: int, policy: ThresholdPolicy) -> tuple:
        self.strengths(year)
        masks = []
        for cls in ("ii", "ig"):
            rows, s, pos = self._arrays[year][cls]
            t = policy.for_class(cls)
            if not t.quantile:
                m = t.value
            else:
                m = float(np.quantile(pos, t.value)) if len(pos) else math.inf
            masks.append((s > 0) & (s >= m))
        return tuple(np.flatnonzero(m).tobytes() for m in masks), masks

    def year_parts(self, year: int, policy: ThresholdPolicy) -> tuple[Network, _YearParts]:
        key, masks = self._admitted(year, policy)
        cache_key = (year, key)
        if cache_key not in self._parts:
            g = self.data.networks[year]
            ii_rows = self._arrays[year]["ii"][0]
            ig_rows = self._arrays[year]["ig"][0]
            keep = {a for (a, _, _), ok in zip(ig_rows, masks[1]) if ok}
            edges = [(a, b) for (a, b, _), ok in zip(ii_rows, masks[0]) if ok]
            for a, b in edges:
                keep.update((a, b))
            sub = g.edge_subgraph(edges, nodes=sorted(keep))
            self._parts[cache_key] = (sub, self.ev.parts(year, sub))
        return self._parts[cache_key]

    def social_backbone(self, year: int, scheme: ExperimentScheme) -> Network:
        """Full social skeleton (individuals and groups) for export."""
        return admit(self.strengths(year), self.policy(scheme)).network

    def multipliers(self, scheme: ExperimentScheme, t: int) -> np.ndarray:
        m = np.array([scheme.ev[c] for c in CATEGORIES])
        if self.boundary is not None:
            m = np.clip(m, self._mult_lo[:, t], self._mult_hi[:, t])
        return m

    def execute(self, scheme: ExperimentScheme) -> Execution:
        policy = self.policy(scheme)
        vectors, demand = [], []
        for t, y in enumerate(self.data.years):
            _, parts = self.year_parts(y, policy)
            m = self.multipliers(scheme, t)
            vectors.append(self.ev.vector_from(y, parts, m))
            calls = parts.calls * m[parts.categories]
            counts = np.bincount(parts.categories, weights=calls, minlength=len(CATEGORIES))
            demand.append({c: float(x) for c, x in zip(CATEGORIES, counts)})
        return Execution(vectors, demand, deviation(vectors, self.ev.expected))

    # planner ---------------------------------------------------------

    def initial_scheme(self) -> ExperimentScheme:
        """Environment multipliers start mid-envelope; structure at the configured quantiles."""
        if self.ev_bounds:
            ev = {c: (lo + hi) / 2 for c, (lo, hi) in self.ev_bounds.items()}
        else:
            ev = {c: 1.0 for c in CATEGORIES}
        return ExperimentScheme(ev, {"method": "social", "q_ii": self.cfg.policy_ii,
                                     "q_ig": self.cfg.policy_ig, "q_gg": self.cfg.policy_gg},
                                [], self.cfg.seed)

    def rules(self) -> tuple[list[ConstraintText], list]:
        docs = load_documents(self.cfg.constraints_dir)
        constraints = extract_constraints(docs, self.adapter)
        return constraints, [compile_rule(c, self.adapter) for c in constraints]

    # scenarios -------------------------------------------------------

    def sample_space(self, scheme: ExperimentScheme) -> SampleSpace:
        """Empirical per-step distributions from demand-perturbed executions."""
        rng = np.random.default_rng(self.cfg.seed)
        runs = []
        for _ in range(self.cfg.n_perturbations):
            u = rng.uniform(-1.0, 1.0, size=len(CATEGORIES))
            ev = {c: scheme.ev[c] * (1 + self.cfg.sample_spread * u[i]) for i, c in enumerate(CATEGORIES)}
            runs.append(np.array([v.as_array() for v in self.execute(replace(scheme, ev=ev)).vectors]))
        stack = np.stack(runs)  # (K, T, L)
        dists = {d: [DiscreteDistribution.empirical(stack[:, t, j]) for t in range(stack.shape[1])]
                 for j, d in enumerate(DIMS)}
        return SampleSpace(DIMS, dists)

    def run(self) -> AgentRun:
        env = self.environment()
        constraints, rules = self.rules()
        scheme0 = self.initial_scheme()
        calibrated, calib = calibrate(scheme0, self.ev.expected, self.execute, self.cfg.eta, self.cfg.epsilon,
                                      self.cfg.max_iters, self.cfg.fd_step, self.ev_bounds)
        scheme, opt = optimize_scheme(calibrated, rules, self.execute, self.cfg.max_rounds, self.ev_bounds)
        full = sample_scenarios(self.sample_space(scheme), self.cfg.n_scenarios, len(self.data.years),
                                self.cfg.seed)
        reduced = reduce_scenarios(full, self.cfg.n_reduced)
        chosen = reduced.most_probable()
        result = self.ev.score("ours", chosen.vectors(), probability=chosen.probability,
                               scheme=scheme.to_json(), converged=opt.converged)
        policy = self.policy(scheme)
        nets = {y: self.year_parts(y, policy)[0] for y in self.data.years}
        return AgentRun(env, constraints, rules, scheme0, calibrated, calib, scheme, opt, full, reduced,
                        result, nets)


def run_method(method: str, data: EcosystemData, ev: Evaluator, cfg: RunConfig,
               adapter: LLMAdapter | None = None) -> tuple[MethodResult, dict[int, Network]]:
    if method == "ours":
        run = AgentPipeline(data, ev, cfg, adapter).run()
        return run.result, run.networks
    return run_baseline(method, data, ev, cfg)


def component_ids(g: Network) -> dict[str, int]:
    from .graph import connected_components

    comps = sorted(connected_components(g), key=lambda c: (-len(c), min(c)))
    return {n: i for i, c in enumerate(comps) for n in c}


def network_snapshot(g: Network, category_map: dict[str, str]) -> dict:
    comp = component_ids(g)
    return {
        "nodes": [{"id": n, "category": category_map.get(n), "component": comp[n]} for n in g.sorted_nodes()],
        "edges": [[u, v, w] for u, v, w in g.edges()],
    }


def isclose_rows(a: dict, b: dict, tol: float = 1e-12) -> bool:
    return all(math.isclose(a[k], b[k], abs_tol=tol) for k in a)
