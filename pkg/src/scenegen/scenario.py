"""Scenarios, scenario sets, sampling and greedy reduction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .metrics import DIMS, ScenarioVector

MASS_TOL = 1e-9


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    matrix: np.ndarray  # (T, L)
    probability: float = 1.0

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if self.matrix.shape[0] < 1:
            raise ScenarioError("scenario needs T >= 1")
        if not 0 < self.probability <= 1 + MASS_TOL:
            raise ScenarioError(f"probability {self.probability} outside (0, 1]")

    @classmethod
    def from_vectors(cls, vectors: Sequence[ScenarioVector], probability: float = 1.0) -> "Scenario":
        return cls(np.array([v.as_array() for v in vectors]), probability)

    @property
    def T(self) -> int:
        return self.matrix.shape[0]

    @property
    def L(self) -> int:
        return self.matrix.shape[1]

    def vectors(self) -> list[ScenarioVector]:
        return [ScenarioVector.from_array(row) for row in self.matrix]


@dataclass
class ScenarioSet:
    scenarios: list[Scenario]
    kind: str = "full"
    dims: tuple[str, ...] = DIMS

    def __post_init__(self):
        if self.kind not in ("full", "reduced"):
            raise ScenarioError(f"unknown set kind {self.kind!r}")
        shapes = {s.matrix.shape for s in self.scenarios}
        if len(shapes) > 1:
            raise ScenarioError(f"scenarios disagree on shape: {sorted(shapes)}")
        total = self.total_probability()
        if self.kind == "full" and self.scenarios and abs(total - 1) > MASS_TOL:
            raise ScenarioError(f"full set probabilities sum to {total}")
        if self.kind == "reduced" and total > 1 + MASS_TOL:
            raise ScenarioError(f"reduced set probabilities sum to {total} > 1")

    def __len__(self) -> int:
        return len(self.scenarios)

    def total_probability(self) -> float:
        return float(np.sum([s.probability for s in self.scenarios]))

    def most_probable(self) -> Scenario:
        return max(self.scenarios, key=lambda s: s.probability)

    def to_json(self) -> dict:
        first = self.scenarios[0] if self.scenarios else None
        return {
            "T": first.T if first else 0,
            "L": first.L if first else len(self.dims),
            "dims": list(self.dims),
            "kind": self.kind,
            "scenarios": [{"p": s.probability, "matrix": s.matrix.tolist()} for s in self.scenarios],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioSet":
        scen = [Scenario(np.array(s["matrix"], dtype=float).reshape(obj["T"], obj["L"]), s["p"])
                for s in obj["scenarios"]]
        return cls(scen, obj.get("kind", "full"), tuple(obj["dims"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioSet":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# -- sample space --------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite discrete distribution, optionally bounded to [lo, hi]."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ScenarioError("values/probs must be nonempty and equally long")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1) > 1e-9:
            raise ScenarioError("probabilities must be nonnegative and sum to 1")

    @classmethod
    def point(cls, value: float) -> "DiscreteDistribution":
        return cls((float(value),), (1.0,))

    @classmethod
    def uniform(cls, values: Sequence[float]) -> "DiscreteDistribution":
        vals = tuple(float(v) for v in values)
        return cls(vals, tuple(1.0 / len(vals) for _ in vals))

    @classmethod
    def empirical(cls, samples: Sequence[float], bins: int | None = None) -> "DiscreteDistribution":
        """Histogram of ``samples``; each bin is represented by its mean sample."""
        x = np.sort(np.asarray(samples, dtype=float))
        if bins is None or np.ptp(x) == 0:
            vals, counts = np.unique(x, return_counts=True)
        else:
            edges = np.linspace(x[0], x[-1], bins + 1)
            idx = np.minimum(np.searchsorted(edges, x, side="right") - 1, bins - 1)
            vals = np.array([x[idx == b].mean() for b in range(bins) if np.any(idx == b)])
            counts = np.array([np.sum(idx == b) for b in range(bins) if np.any(idx == b)])
        probs = counts / counts.sum()
        return cls(tuple(float(v) for v in vals), tuple(float(p) for p in probs))

    @property
    def support(self) -> tuple[float, float]:
        return min(self.values), max(self.values)

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.values[rng.choice(len(self.values), p=self.probs)])


@dataclass
class SampleSpace:
    """Value distribution per dimension, either shared over time or one per step."""

    dims: tuple[str, ...]
    distributions: Mapping[str, DiscreteDistribution | Sequence[DiscreteDistribution]]
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for d, (lo, hi) in self.bounds.items():
            dists = self.distributions.get(d)
            if dists is None:
                continue
            for dist in (dists if isinstance(dists, (list, tuple)) else [dists]):
                a, b = dist.support
                if a < lo - 1e-12 or b > hi + 1e-12:
                    raise ScenarioError(f"dimension {d}: support [{a}, {b}] leaves bounds [{lo}, {hi}]")

    def distribution(self, dim: str, t: int) -> DiscreteDistribution:
        try:
            d = self.distributions[dim]
        except KeyError:
            raise ScenarioError(f"no distribution for dimension {dim!r}") from None
        if isinstance(d, (list, tuple)):
            return d[t]
        return d


def sample_scenarios(x: SampleSpace, n: int, T: int, seed: int) -> ScenarioSet:
    if n < 1:
        raise ScenarioError("n must be >= 1")
    missing = [d for d in x.dims if d not in x.distributions]
    if missing:
        raise ScenarioError(f"missing distributions for {missing}")
    children = np.random.SeedSequence(seed).spawn(n)
    scenarios = []
    for child in children:
        rng = np.random.default_rng(child)
        m = np.array([[x.distribution(d, t).sample(rng) for d in x.dims] for t in range(T)])
        scenarios.append(Scenario(m, 1.0 / n))
    return ScenarioSet(scenarios, "full", tuple(x.dims))


def l1_distance(a: Scenario, b: Scenario) -> float:
    return float(np.abs(a.matrix - b.matrix).sum())


def reduce_scenarios(s: ScenarioSet, c: int) -> ScenarioSet:
    """Greedy nearest-pair merging under L1 until ``c`` scenarios remain.

    The less probable scenario of the closest pair is folded into the other
    (ties keep the earlier one). Total probability is preserved.
    """
    if not 1 <= c <= len(s):
        raise ScenarioError(f"target count {c} outside [1, {len(s)}]")
    items = [Scenario(sc.matrix.copy(), sc.probability) for sc in s.scenarios]
    if c == len(items):
        return ScenarioSet(items, "reduced", s.dims)
    flat = np.array([sc.matrix.ravel() for sc in items])
    dist = np.abs(flat[:, None, :] - flat[None, :, :]).sum(axis=2)
    alive = list(range(len(items)))
    probs = [sc.probability for sc in items]
    while len(alive) > c:
        best = None
        for ai, i in enumerate(alive):
            for j in alive[ai + 1:]:
                key = (dist[i, j], i, j)
                if best is None or key < best:
                    best = key
        _, i, j = best
        keep, drop = (i, j) if probs[i] >= probs[j] else (j, i)
        probs[keep] += probs[drop]
        alive.remove(drop)
    out = [Scenario(items[i].matrix, min(probs[i], 1.0)) for i in alive]
    return ScenarioSet(out, "reduced", s.dims)


def truncate_scenarios(s: ScenarioSet, min_probability: float) -> ScenarioSet:
    """Drop scenarios below ``min_probability`` without renormalising."""
    kept = [Scenario(sc.matrix.copy(), sc.probability) for sc in s.scenarios
            if sc.probability >= min_probability]
    return ScenarioSet(kept, "reduced", s.dims)


def expected_scenario(history: Sequence[Scenario]) -> np.ndarray:
    """Per-step, per-dimension mean of historical scenarios, as a (T, L) array."""
    if not history:
        raise ScenarioError("empty history")
    shapes = {h.matrix.shape for h in history}
    if len(shapes) != 1:
        raise ScenarioError(f"history scenarios disagree on shape: {sorted(shapes)}")
    return np.mean([h.matrix for h in history], axis=0)
