"""Brute-force reference implementations used to check the fast code paths.

Nothing here imports the algorithms under test; only the Network container.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from scenegen.graph import Network


def random_graph(rng: np.random.Generator, max_nodes: int = 30, max_edges: int = 120,
                 max_weight: int = 5) -> Network:
    n = int(rng.integers(2, max_nodes + 1))
    nodes = [f"n{i:02d}" for i in range(n)]
    pairs = list(itertools.combinations(nodes, 2))
    m = int(rng.integers(1, min(max_edges, len(pairs)) + 1))
    picks = rng.choice(len(pairs), size=m, replace=False)
    g = Network(nodes)
    for k in picks:
        u, v = pairs[k]
        g.add_edge(u, v, float(rng.integers(1, max_weight + 1)))
    return g


def gt_filter(g: Network, t: float) -> set[tuple[str, str]]:
    return {(u, v) for u, v, w in g.edges() if w >= t}


def pla_edges(g: Network) -> set[tuple[str, str]]:
    """Edge kept iff each endpoint is the other's heaviest neighbour (ties: smaller id)."""
    def top(u):
        nb = sorted(g.neighbors(u).items(), key=lambda kv: kv[0])
        best_w = max(w for _, w in nb)
        return [v for v, w in nb if w == best_w][0]

    out = set()
    for u, v, _ in g.edges():
        if top(u) == v and top(v) == u:
            out.add((u, v))
    return out


def all_pairs_lengths(g: Network) -> dict[str, dict[str, float]]:
    """Floyd-Warshall over edge lengths 1/w."""
    nodes = g.sorted_nodes()
    d = {u: {v: (0.0 if u == v else math.inf) for v in nodes} for u in nodes}
    for u, v, w in g.edges():
        d[u][v] = d[v][u] = 1.0 / w
    for k in nodes:
        for i in nodes:
            for j in nodes:
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d


def salience_counts(g: Network, tol: float = 1e-12) -> dict[tuple[str, str], int]:
    """Per-source tree: each reachable node hangs off its smallest-id neighbour on a shortest path."""
    d = all_pairs_lengths(g)
    counts = {(u, v): 0 for u, v, _ in g.edges()}
    for s in g.sorted_nodes():
        for v in g.sorted_nodes():
            if v == s or math.isinf(d[s][v]):
                continue
            cands = sorted(u for u, w in g.neighbors(v).items()
                           if abs(d[s][u] + 1.0 / w - d[s][v]) <= tol * max(1.0, d[s][v]))
            u = cands[0]
            counts[(min(u, v), max(u, v))] += 1
    return counts


def components(g: Network) -> list[set[str]]:
    """Union-find."""
    parent = {n: n for n in g.nodes}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for u, v, _ in g.edges():
        parent[find(u)] = find(v)
    groups: dict[str, set[str]] = {}
    for n in g.nodes:
        groups.setdefault(find(n), set()).add(n)
    return list(groups.values())


def reachability(g: Network) -> float:
    nodes = g.sorted_nodes()
    comp = {n: i for i, c in enumerate(components(g)) for n in c}
    pairs = list(itertools.combinations(nodes, 2))
    return sum(comp[a] == comp[b] for a, b in pairs) / len(pairs)


def value_entropy(counts, normalized: bool = True) -> float:
    n = sum(counts)
    h = -sum(c / n * math.log2(c / n) for c in counts if c)
    opt = 0.5 * math.log2(n)
    u = math.exp(1 - abs(h - opt) / opt)
    return u / math.e if normalized else u


def deviation(tau, es) -> float:
    tau, es = np.asarray(tau, float).ravel(), np.asarray(es, float).ravel()
    return float(sum(abs(a - b) for a, b in zip(tau, es)) / sum(abs(b) for b in es))
