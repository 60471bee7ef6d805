"""Baseline backbone methods: global threshold, high salience skeleton,
primary linkage and k-means cluster filtering."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .graph import Network, shortest_path_tree, tree_edges, weighted_degree

METHODS = ("gt", "hss", "pla", "cluster")


@dataclass
class BackboneResult:
    sub: Network
    method: str
    params: dict = field(default_factory=dict)
    removed_nodes: set[str] = field(default_factory=set)

    def manifest(self) -> dict:
        return {
            "method": self.method,
            "params": self.params,
            "removed_nodes": sorted(self.removed_nodes),
            "nodes": len(self.sub),
            "edges": self.sub.number_of_edges(),
        }


def median_weight(g: Network) -> float:
    weights = [w for _, _, w in g.edges()]
    return statistics.median(weights) if weights else 1.0


def global_threshold(g: Network, threshold: float, strict: bool = False) -> BackboneResult:
    """Keep edges with ``w >= threshold`` (``w > threshold`` when ``strict``).

    Nodes left without any incident edge are dropped.
    """
    if strict:
        kept = [(u, v) for u, v, w in g.edges() if w > threshold]
    else:
        kept = [(u, v) for u, v, w in g.edges() if w >= threshold]
    sub = g.edge_subgraph(kept)
    return BackboneResult(sub, "gt", {"threshold": threshold, "strict": strict}, g.nodes - sub.nodes)


def salience_counts(g: Network, length_mode: str = "inverse_weight") -> dict[tuple[str, str], int]:
    """Number of per-node shortest-path trees containing each edge."""
    counts = {(u, v): 0 for u, v, _ in g.edges()}
    for s in g.sorted_nodes():
        for e in tree_edges(shortest_path_tree(g, s, length_mode)):
            counts[e] += 1
    return counts


def edge_salience(g: Network, length_mode: str = "inverse_weight") -> dict[tuple[str, str], float]:
    n = len(g)
    return {e: c / n for e, c in salience_counts(g, length_mode).items()}


def high_salience_skeleton(g: Network, salience_threshold: float = 0.5,
                           length_mode: str = "inverse_weight") -> BackboneResult:
    if not 0 < salience_threshold <= 1:
        raise ValueError("salience_threshold must lie in (0, 1]")
    n = len(g)
    # integer comparison so a threshold of exactly c/n keeps the edge
    kept = [e for e, c in salience_counts(g, length_mode).items()
            if c >= salience_threshold * n - 1e-9]
    sub = g.edge_subgraph(kept, nodes=g.sorted_nodes())
    return BackboneResult(sub, "hss", {"salience_threshold": salience_threshold,
                                       "length_mode": length_mode})


def primary_linkage(g: Network) -> BackboneResult:
    """Keep only reciprocated maximum-weight links; every node survives."""
    best: dict[str, str] = {}
    for u in g.sorted_nodes():
        nb = g.neighbors(u)
        if nb:
            # heaviest neighbour; ties to the smaller id
            best[u] = min(nb, key=lambda v: (-nb[v], v))
    kept = [(u, v) for u, v in best.items() if best.get(v) == u and u < v]
    sub = g.edge_subgraph(kept, nodes=g.sorted_nodes())
    return BackboneResult(sub, "pla", {})


def default_k(n: int) -> int:
    return max(1, round(math.sqrt(n / 2)))


def kmeans(x: np.ndarray, k: int, seed: int, max_iter: int = 100, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Plain Lloyd iterations from ``k`` distinct random rows. Returns (centers, labels)."""
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = x[np.sort(rng.choice(n, size=k, replace=False))].astype(float)
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d.argmin(axis=1)
        new = centers.copy()
        for j in range(k):
            members = x[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        shift = np.linalg.norm(new - centers)
        scale = max(np.linalg.norm(centers), 1e-12)
        centers = new
        if shift <= tol * scale:
            break
    d = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return centers, d.argmin(axis=1)


def cosine_to_center(x: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> np.ndarray:
    c = centers[labels]
    sims = np.empty(len(x))
    for i, (a, b) in enumerate(zip(x, c)):
        if np.allclose(a, b, rtol=0, atol=1e-12):
            sims[i] = 1.0
            continue
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        sims[i] = 0.0 if na == 0 or nb == 0 else float(a @ b / (na * nb))
    return sims


def cluster_filter(g: Network, node_features: Mapping[str, np.ndarray], k: int | None = None,
                   sigma_mult: float = 1.0, seed: int = 0) -> BackboneResult:
    """Drop nodes whose cosine similarity to their k-means centre falls below
    ``mean - sigma_mult * std``; return the induced subgraph on the rest."""
    nodes = g.sorted_nodes()
    if not nodes:
        return BackboneResult(Network(), "cluster", {"k": k, "sigma_mult": sigma_mult, "seed": seed})
    k = default_k(len(nodes)) if k is None else k
    if k > len(nodes):
        raise ValueError(f"k={k} exceeds node count {len(nodes)}")
    x = np.array([np.asarray(node_features[n], dtype=float) for n in nodes])
    centers, labels = kmeans(x, k, seed)
    sims = cosine_to_center(x, centers, labels)
    cut = sims.mean() - sigma_mult * sims.std()
    removed = {n for n, s in zip(nodes, sims) if s < cut}
    sub = g.subgraph(n for n in nodes if n not in removed)
    return BackboneResult(sub, "cluster", {"k": k, "sigma_mult": sigma_mult, "seed": seed}, removed)


def zscore_columns(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return (x - mu) / sd


def node_features(g: Network, api_calls: Mapping[str, float], category_map: Mapping[str, str],
                  categories: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Z-scored (weighted degree, call count, category one-hot) per node."""
    nodes = g.sorted_nodes()
    if not nodes:
        return {}
    rows = []
    for n in nodes:
        onehot = [1.0 if category_map.get(n) == c else 0.0 for c in categories]
        rows.append([weighted_degree(g, n), float(api_calls.get(n, 0.0)), *onehot])
    z = zscore_columns(np.array(rows))
    return dict(zip(nodes, z))


def extract(g: Network, method: str, params: Mapping | None = None, **context) -> BackboneResult:
    """Dispatch by method name. ``context`` supplies ``features`` for cluster runs."""
    params = dict(params or {})
    if method == "gt":
        threshold = params.get("threshold")
        if threshold is None:
            threshold = median_weight(g)
        return global_threshold(g, float(threshold), bool(params.get("strict", False)))
    if method == "hss":
        return high_salience_skeleton(g, float(params.get("salience_threshold", 0.5)),
                                      params.get("length_mode", "inverse_weight"))
    if method == "pla":
        return primary_linkage(g)
    if method == "cluster":
        k = params.get("k")
        return cluster_filter(g, context["features"], None if k is None else int(k),
                              float(params.get("sigma_mult", 1.0)), int(params.get("seed", 0)))
    raise ValueError(f"unknown backbone method {method!r}; expected one of {METHODS}")
