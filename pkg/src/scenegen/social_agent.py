"""Social agent: relationship backbone over individuals and groups.

Pair strength is the clamped cosine of entity features times a saturating
interaction factor ``x / (x + 1)``. Each pair class (individual-individual,
individual-group, group-group) has its own admission threshold, either fixed
or a quantile of that class's positive strengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import Network
from .llm import LLMAdapter

INDIVIDUAL = "individual"
GROUP = "group"
PAIR_CLASSES = ("ii", "ig", "gg")


class SocialAgentError(ValueError):
    pass


@dataclass
class SocialEntity:
    id: str
    kind: str
    description: str
    features: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (INDIVIDUAL, GROUP):
            raise SocialAgentError(f"entity {self.id}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Threshold:
    value: float
    quantile: bool = False

    def __post_init__(self):
        if self.quantile and not 0 < self.value < 1:
            raise SocialAgentError(f"quantile rule must lie in (0, 1), got {self.value}")

    @classmethod
    def fixed(cls, value: float) -> "Threshold":
        return cls(float(value), False)

    @classmethod
    def q(cls, value: float) -> "Threshold":
        return cls(float(value), True)


@dataclass(frozen=True)
class ThresholdPolicy:
    ii: Threshold = Threshold.q(0.9)
    ig: Threshold = Threshold.q(0.9)
    gg: Threshold = Threshold.q(0.9)

    def for_class(self, cls: str) -> Threshold:
        return getattr(self, cls)


def partition_entities(records: Iterable[Mapping]) -> tuple[list[SocialEntity], list[SocialEntity]]:
    """Split raw records into individuals and groups.

    A record is tagged through ``kind`` (a string or list of strings); untagged
    records with a ``members`` list are groups when it has more than one member.
    """
    individuals, groups, offenders = [], [], []
    for r in records:
        kinds = r.get("kind")
        kinds = {kinds} if isinstance(kinds, str) else set(kinds or ())
        if len(kinds) > 1:
            offenders.append(f"{r.get('id')}: mixed tags {sorted(kinds)}")
            continue
        if kinds:
            kind = kinds.pop()
        elif "members" in r:
            kind = GROUP if len(r["members"]) > 1 else INDIVIDUAL
        else:
            offenders.append(f"{r.get('id')}: untagged")
            continue
        if kind not in (INDIVIDUAL, GROUP):
            offenders.append(f"{r.get('id')}: unknown kind {kind!r}")
            continue
        e = SocialEntity(str(r["id"]), kind, str(r.get("description", r["id"])))
        (individuals if kind == INDIVIDUAL else groups).append(e)
    if offenders:
        raise SocialAgentError("cannot classify records: " + "; ".join(offenders))
    return individuals, groups


def featurize(entities: Sequence[SocialEntity], adapter: LLMAdapter, dim: int = 8) -> list[SocialEntity]:
    for e in entities:
        e.features = np.asarray(adapter.extract_features(f"{e.kind}: {e.description}", dim), dtype=float)
    return list(entities)


def interaction_factor(x: float | None) -> float:
    return 1.0 if x is None else x / (x + 1.0)


def relationship_strength(a: SocialEntity, b: SocialEntity, interactions: float | None = None) -> float:
    if a.features is None or b.features is None:
        raise SocialAgentError("entities must be featurized first")
    na, nb = np.linalg.norm(a.features), np.linalg.norm(b.features)
    if na == 0 or nb == 0:
        raise SocialAgentError("zero feature vector")
    cos = float(a.features @ b.features / (na * nb))
    return min(1.0, max(0.0, cos)) * interaction_factor(interactions)


def pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass
class PairStrengths:
    """Strengths for every candidate pair, grouped by pair class."""

    individuals: list[str]
    groups: list[str]
    pairs: dict[str, list[tuple[str, str, float]]] = field(default_factory=dict)


def _feature_matrix(entities: Sequence[SocialEntity]) -> np.ndarray:
    if not entities:
        return np.zeros((0, 1))
    f = np.array([e.features for e in entities], dtype=float)
    norms = np.linalg.norm(f, axis=1)
    if np.any(norms == 0):
        raise SocialAgentError("zero feature vector")
    return f / norms[:, None]


def pair_strengths(individuals: Sequence[SocialEntity], groups: Sequence[SocialEntity],
                   interactions: Mapping[tuple[str, str], float] | None = None) -> PairStrengths:
    """Evaluate all I-I, I-G and G-G pairs.

    With an ``interactions`` mapping, pairs missing from it count as zero
    interactions; with ``None`` the interaction factor is 1 everywhere.
    """
    for e in (*individuals, *groups):
        if e.features is None:
            raise SocialAgentError(f"entity {e.id} is not featurized")
    fi, fg = _feature_matrix(individuals), _feature_matrix(groups)
    ids_i = [e.id for e in individuals]
    ids_g = [e.id for e in groups]

    def factor(a: str, b: str) -> float:
        if interactions is None:
            return 1.0
        return interaction_factor(interactions.get(pair_key(a, b), 0.0))

    out = PairStrengths(ids_i, ids_g, {c: [] for c in PAIR_CLASSES})
    for cls, left, right, fl, fr, same in (
        ("ii", ids_i, ids_i, fi, fi, True),
        ("ig", ids_i, ids_g, fi, fg, False),
        ("gg", ids_g, ids_g, fg, fg, True),
    ):
        if not left or not right:
            continue
        cos = np.clip(fl @ fr.T, 0.0, 1.0)
        rows = out.pairs[cls]
        for a_idx, a in enumerate(left):
            start = a_idx + 1 if same else 0
            for b_idx in range(start, len(right)):
                b = right[b_idx]
                c = cos[a_idx, b_idx]
                if c == 0:
                    rows.append((a, b, 0.0))
                    continue
                rows.append((a, b, float(c) * factor(a, b)))
    return out


def resolve_threshold(t: Threshold, strengths: Sequence[float]) -> float:
    """Fixed value, or the quantile of the class's positive strengths (inf if none)."""
    if not t.quantile:
        return t.value
    pos = [s for s in strengths if s > 0]
    if not pos:
        return math.inf
    return float(np.quantile(pos, t.value))


@dataclass
class SocialBackbone:
    network: Network
    thresholds: dict[str, float]
    counts: dict[str, int]


def admit(strengths: PairStrengths, policy: ThresholdPolicy) -> SocialBackbone:
    """Admit pairs whose strength meets their class threshold. Zero-strength
    pairs carry no relation and are never admitted."""
    n = Network()
    for i in strengths.individuals:
        n.add_node(i, kind=INDIVIDUAL)
    for g in strengths.groups:
        n.add_node(g, kind=GROUP)
    resolved, counts = {}, {}
    for cls in PAIR_CLASSES:
        rows = strengths.pairs.get(cls, [])
        m = resolve_threshold(policy.for_class(cls), [s for _, _, s in rows])
        resolved[cls] = m
        counts[cls] = 0
        for a, b, s in rows:
            if s > 0 and s >= m:
                n.add_edge(a, b, s)
                counts[cls] += 1
    return SocialBackbone(n, resolved, counts)


def build_backbone(individuals: Sequence[SocialEntity], groups: Sequence[SocialEntity],
                   policy: ThresholdPolicy = ThresholdPolicy(),
                   interactions: Mapping[tuple[str, str], float] | None = None) -> SocialBackbone:
    return admit(pair_strengths(individuals, groups, interactions), policy)


# -- ecosystem wiring ----------------------------------------------------


def ecosystem_entities(orig: Network, category_map: Mapping[str, str], api_calls: Mapping[str, float],
                       categories: Sequence[str]) -> tuple[list[SocialEntity], list[SocialEntity], dict]:
    """APIs as individuals, categories as groups, co-mashup counts as interactions.

    I-G interactions are the API's calls when it belongs to the category;
    G-G interactions sum co-occurrence weight across the two categories.
    """
    individuals = [SocialEntity(a, INDIVIDUAL, f"API {a} in {category_map[a]}") for a in orig.sorted_nodes()]
    groups = [SocialEntity(c, GROUP, f"API category {c}") for c in categories]
    inter: dict[tuple[str, str], float] = {}
    for u, v, w in orig.edges():
        inter[pair_key(u, v)] = w
        cu, cv = category_map[u], category_map[v]
        if cu != cv:
            k = pair_key(cu, cv)
            inter[k] = inter.get(k, 0.0) + w
    for a in orig.sorted_nodes():
        inter[pair_key(a, category_map[a])] = float(api_calls.get(a, 0.0))
    return individuals, groups, inter


def api_subgraph(backbone: Network, orig: Network) -> Network:
    """Restrict a social backbone to the API network.

    Individual-individual links keep their original co-occurrence weights;
    an API survives if it has any admitted link, including to a group.
    """
    keep = [n for n in backbone.sorted_nodes()
            if n in orig and backbone.node_attrs.get(n, {}).get("kind") == INDIVIDUAL and backbone.degree(n) > 0]
    keep_set = set(keep)
    edges = [(u, v) for u, v, _ in backbone.edges() if u in keep_set and v in keep_set and orig.has_edge(u, v)]
    return orig.edge_subgraph(edges, nodes=keep)
