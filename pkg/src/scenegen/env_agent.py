"""Environment agent: extreme demand-environment generation.

Semantic features per (category, year) record, shock rules distilled from a
knowledge base, and adversarial prompts are combined into candidate demand
trajectories. Candidates that are credible enough and extreme enough define
the per-category, per-period demand envelope.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import CATEGORIES, ApiRecord, DemandSeries
from .llm import CompletionRequest, LLMAdapter, SchemaHint, hash_uniforms

log = logging.getLogger(__name__)

DEFAULT_THETA_HIGH = 0.6
DEFAULT_THETA_RISK = 2.0
DEFAULT_Z_CAP = 3.0
DEFAULT_CANDIDATE_CAP = 5000


class EnvironmentAgentError(RuntimeError):
    pass


@dataclass(frozen=True)
class SemanticFeature:
    source_id: str
    category: str
    year: int
    vector: tuple[float, ...]
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class EventRule:
    id: str
    description: str
    effect: dict  # category -> (lo, hi)

    def __post_init__(self):
        for c, (lo, hi) in self.effect.items():
            if c not in CATEGORIES:
                raise ValueError(f"rule {self.id}: unknown category {c!r}")
            if not 0 < lo <= hi:
                raise ValueError(f"rule {self.id}: bad shock range [{lo}, {hi}]")


@dataclass(frozen=True)
class AdversarialPrompt:
    id: str
    text: str
    onset: int | None = None
    persistence: int | None = None  # None = until the horizon


@dataclass
class CandidateScenario:
    trajectory: dict[str, np.ndarray]  # category -> (T,)
    triple: tuple[str, str, str]  # (feature id, rule id, prompt id)
    credibility: float = 1.0
    risk: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.array([self.trajectory[c] for c in CATEGORIES])


@dataclass
class EnvironmentBoundary:
    years: list[int]
    vmin: dict[str, np.ndarray]
    vmax: dict[str, np.ndarray]

    def __post_init__(self):
        for c in CATEGORIES:
            if np.any(self.vmin[c] > self.vmax[c]):
                raise ValueError(f"boundary inverted for {c}")

    def contains(self, demand: DemandSeries) -> bool:
        hist = history_matrix(demand)
        lo = np.array([self.vmin[c] for c in CATEGORIES])
        hi = np.array([self.vmax[c] for c in CATEGORIES])
        return bool(np.all(lo <= hist) and np.all(hist <= hi))

    def multiplier_range(self, base: DemandSeries) -> dict[str, tuple[float, float]]:
        """Widest demand multiplier per category the envelope admits."""
        out = {}
        for i, c in enumerate(CATEGORIES):
            b = history_matrix(base)[i]
            ok = b > 0
            if not np.any(ok):
                out[c] = (1.0, 1.0)
                continue
            out[c] = (float(np.min(self.vmin[c][ok] / b[ok])), float(np.max(self.vmax[c][ok] / b[ok])))
        return out

    def to_json(self) -> dict:
        return {
            "years": list(self.years),
            "bounds": {c: [[float(a), float(b)] for a, b in zip(self.vmin[c], self.vmax[c])]
                       for c in CATEGORIES},
        }


def history_matrix(demand: DemandSeries) -> np.ndarray:
    """(categories, T) array of call counts."""
    return np.array([[demand.calls[c][y] for y in demand.years] for c in CATEGORIES], dtype=float)


# -- semantics -----------------------------------------------------------


def extract_semantics(history: DemandSeries, apis: Sequence[ApiRecord], adapter: LLMAdapter,
                      dim: int = 8) -> list[SemanticFeature]:
    """One feature per (category, year) record."""
    if not history.years:
        raise EnvironmentAgentError("empty history")
    feats = []
    for c in CATEGORIES:
        prev = None
        for y in history.years:
            n = history.calls[c][y]
            active = sum(1 for a in apis if a.year_active_from <= y <= a.year_active_to)
            text = f"category: {c}\nyear: {y}\nmashup calls: {n:g}\nactive APIs: {active}"
            vec = adapter.extract_features(text, dim)
            tags = []
            if prev is not None:
                tags.append("growth" if n > prev else "decline" if n < prev else "flat")
            feats.append(SemanticFeature(f"{c}@{y}", c, y, tuple(vec), tuple(tags)))
            prev = n
    return feats


_NUM = r"[-+]?(?:\d+\.\d*|\.\d+|\d+)"
_CAT = "|".join(re.escape(c) for c in CATEGORIES)
_EFFECT = re.compile(rf"(?P<cat>{_CAT})\s*[×xX*]\s*\[\s*(?P<lo>{_NUM})\s*,\s*(?P<hi>{_NUM})\s*\]")
_RULE_LINE = re.compile(rf"^\s*(?P<label>[^:\n]+):\s*(?P<body>.*(?:{_CAT})\s*[×xX*]\s*\[.*)$")


def parse_rule_blocks(doc_id: str, text: str) -> list[EventRule]:
    """Lines of the form ``label: Category ×[lo,hi]; Category ×[lo,hi] ...``."""
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _RULE_LINE.match(line)
        if not m:
            continue
        effect = {}
        for e in _EFFECT.finditer(m.group("body")):
            effect[e.group("cat")] = (float(e.group("lo")), float(e.group("hi")))
        try:
            rules.append(EventRule(f"{doc_id}:{lineno}", m.group("label").strip(), effect))
        except ValueError as exc:
            log.warning("skipping rule in %s line %d: %s", doc_id, lineno, exc)
    return rules


def distill_rules(knowledge: Sequence[tuple[str, str]], adapter: LLMAdapter | None = None) -> list[EventRule]:
    """Shock rules from ``(doc_id, text)`` documents.

    Stub mode reads structured rule lines straight from the documents; remote
    mode asks the model to restate each document in that form first.
    """
    rules = []
    for doc_id, text in knowledge:
        source = text
        if adapter is not None and adapter.mode == "remote":
            resp = adapter.complete(CompletionRequest(
                system_prompt=("Summarise demand shocks in the document, one per line, as "
                               "'label: <Category> ×[lo,hi]' with categories " + ", ".join(CATEGORIES) + "."),
                user_prompt=text,
                max_tokens=512,
            ))
            source = resp.text
        found = parse_rule_blocks(doc_id, source)
        if not found:
            log.warning("knowledge doc %s yielded no rules", doc_id)
        rules.extend(found)
    return rules


def load_knowledge(directory: str | Path) -> list[tuple[str, str]]:
    root = Path(directory)
    return [(p.name, p.read_text(encoding="utf-8")) for p in sorted(root.glob("*.txt"))]


_ONSET = re.compile(r"onset\s*=\s*(\d+)")
_PERSIST = re.compile(r"persistence\s*=\s*(\d+|full)")


def parse_prompts(text: str) -> list[AdversarialPrompt]:
    """One prompt per non-comment line; ``onset=k`` / ``persistence=n|full`` are optional."""
    prompts = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        onset = _ONSET.search(line)
        pers = _PERSIST.search(line)
        persistence = None
        if pers and pers.group(1) != "full":
            persistence = int(pers.group(1))
        prompts.append(AdversarialPrompt(f"p{len(prompts)}", line,
                                         int(onset.group(1)) if onset else None, persistence))
    return prompts


# -- candidates ----------------------------------------------------------


def apply_shock(base: np.ndarray, factors: dict[int, float], onset: int, persistence: int | None) -> np.ndarray:
    """Scale rows of ``base`` (categories x T) by ``factors`` from ``onset`` on."""
    out = base.copy()
    T = base.shape[1]
    end = T if persistence is None else min(T, onset + persistence)
    for row, f in factors.items():
        out[row, onset:end] *= f
    return np.maximum(out, 0.0)


def generate_candidates(features: Sequence[SemanticFeature], rules: Sequence[EventRule],
                        prompts: Sequence[AdversarialPrompt], base: DemandSeries,
                        adapter: LLMAdapter | None = None, seed: int = 0,
                        cap: int = DEFAULT_CANDIDATE_CAP) -> list[CandidateScenario]:
    """Every (prompt, feature, rule) combination applied to the base trajectory.

    The shock factor is drawn inside the rule's range from a hash of the
    triple. A prompt without an explicit onset shocks from the feature's year.
    """
    if not features or not rules or not prompts:
        raise EnvironmentAgentError("features, rules and prompts must all be nonempty")
    hist = history_matrix(base)
    T = hist.shape[1]
    year_index = {y: i for i, y in enumerate(base.years)}
    total = len(features) * len(rules) * len(prompts)
    if total > cap:
        log.warning("%d candidates exceed cap %d; truncating", total, cap)
    out = []
    for p in prompts:
        for c in features:
            for rule in rules:
                if len(out) >= cap:
                    return out
                factors = {}
                for cat, (lo, hi) in sorted(rule.effect.items()):
                    u = hash_uniforms(seed, 1, c.source_id, rule.id, p.id, cat)[0]
                    factors[CATEGORIES.index(cat)] = lo + (hi - lo) * u
                onset = p.onset if p.onset is not None else year_index.get(c.year, 0)
                traj = apply_shock(hist, factors, min(onset, T - 1), p.persistence)
                out.append(CandidateScenario({cat: traj[i] for i, cat in enumerate(CATEGORIES)},
                                             (c.source_id, rule.id, p.id)))
    return out


# -- credibility and gating ----------------------------------------------


def max_zscore(candidate: CandidateScenario, history: DemandSeries) -> float:
    hist = history_matrix(history)
    mu = hist.mean(axis=1)
    sd = hist.std(axis=1)
    sd = np.maximum(sd, 1e-6 * np.maximum(1.0, np.abs(mu)))
    z = np.abs(candidate.matrix() - mu[:, None]) / sd[:, None]
    return float(z.max())


def score_credibility(c: CandidateScenario, history: DemandSeries, adapter: LLMAdapter | None = None,
                      mode: str = "stub-statistical", z_cap: float = DEFAULT_Z_CAP) -> float:
    if not history.years:
        raise EnvironmentAgentError("empty history")
    if mode == "stub-statistical":
        return math.exp(-max(0.0, max_zscore(c, history) - z_cap))
    if mode == "remote-judge":
        if adapter is None:
            raise EnvironmentAgentError("remote-judge mode needs an adapter")
        rows = "\n".join(f"{cat}: " + ", ".join(f"{v:g}" for v in c.trajectory[cat]) for cat in CATEGORIES)
        resp = adapter.complete(CompletionRequest(
            system_prompt="Rate how plausible this demand trajectory is, from 0 (impossible) to 1 (fully credible).",
            user_prompt=rows,
            schema_hint=SchemaHint("score"),
        ))
        if resp.parsed is None:
            raise EnvironmentAgentError(f"judge returned no score: {resp.text!r}")
        return float(resp.parsed)
    raise ValueError(f"unknown credibility mode {mode!r}")


def historical_boundary(history: DemandSeries) -> EnvironmentBoundary:
    hist = history_matrix(history)
    return EnvironmentBoundary(list(history.years),
                               {c: hist[i].copy() for i, c in enumerate(CATEGORIES)},
                               {c: hist[i].copy() for i, c in enumerate(CATEGORIES)})


def gate_and_bound(cands: Sequence[CandidateScenario], history: DemandSeries,
                   theta_high: float = DEFAULT_THETA_HIGH, theta_risk: float = DEFAULT_THETA_RISK,
                   ) -> tuple[list[CandidateScenario], EnvironmentBoundary]:
    """Keep credible (``>= theta_high``) high-risk (``>= theta_risk``) candidates;
    bound them together with the historical series."""
    high_risk = []
    for c in cands:
        if c.credibility >= theta_high:
            c.risk = max_zscore(c, history)
            if c.risk >= theta_risk:
                high_risk.append(c)
    hist = history_matrix(history)
    if not high_risk:
        log.warning("no candidate survived gating; boundary is the historical envelope")
        return high_risk, historical_boundary(history)
    stack = np.stack([c.matrix() for c in high_risk] + [hist])
    lo, hi = stack.min(axis=0), stack.max(axis=0)
    return high_risk, EnvironmentBoundary(list(history.years),
                                          {c: lo[i] for i, c in enumerate(CATEGORIES)},
                                          {c: hi[i] for i, c in enumerate(CATEGORIES)})


@dataclass
class EnvironmentResult:
    features: list[SemanticFeature]
    rules: list[EventRule]
    candidates: list[CandidateScenario]
    high_risk: list[CandidateScenario]
    boundary: EnvironmentBoundary
    stats: dict = field(default_factory=dict)


def run_environment_agent(history: DemandSeries, apis: Sequence[ApiRecord],
                          knowledge: Sequence[tuple[str, str]], prompts: Sequence[AdversarialPrompt],
                          adapter: LLMAdapter, seed: int, theta_high: float = DEFAULT_THETA_HIGH,
                          theta_risk: float = DEFAULT_THETA_RISK, z_cap: float = DEFAULT_Z_CAP,
                          credibility_mode: str = "stub-statistical", feature_dim: int = 8,
                          cap: int = DEFAULT_CANDIDATE_CAP) -> EnvironmentResult:
    features = extract_semantics(history, apis, adapter, feature_dim)
    rules = distill_rules(knowledge, adapter)
    if not rules:
        log.warning("no event rules; boundary is the historical envelope")
        return EnvironmentResult(features, rules, [], [], historical_boundary(history))
    cands = generate_candidates(features, rules, prompts, history, adapter, seed, cap)
    for c in cands:
        c.credibility = score_credibility(c, history, adapter, credibility_mode, z_cap)
    high_risk, boundary = gate_and_bound(cands, history, theta_high, theta_risk)
    stats = {"features": len(features), "rules": len(rules), "candidates": len(cands),
             "high_risk": len(high_risk)}
    return EnvironmentResult(features, rules, cands, high_risk, boundary, stats)
