"""Weighted undirected networks and the structural metrics of a scenario vector."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

# Relative tolerance when comparing path lengths for tie-breaking.
PATH_TOL = 1e-12


class GraphError(ValueError):
    pass


class Network:
    """Undirected graph with positive edge weights and no self-loops."""

    def __init__(self, nodes: Iterable[str] = (), edges: Iterable[tuple[str, str, float]] = ()):
        self._adj: dict[str, dict[str, float]] = {}
        self.node_attrs: dict[str, dict] = {}
        for n in nodes:
            self.add_node(n)
        for u, v, w in edges:
            self.add_edge(u, v, w)

    def add_node(self, n: str, **attrs) -> None:
        self._adj.setdefault(n, {})
        if attrs:
            self.node_attrs.setdefault(n, {}).update(attrs)

    def add_edge(self, u: str, v: str, weight: float = 1.0) -> None:
        if u == v:
            raise GraphError(f"self-loop on {u!r}")
        if not weight > 0:
            raise GraphError(f"edge ({u!r}, {v!r}) weight must be positive, got {weight}")
        self.add_node(u)
        self.add_node(v)
        self._adj[u][v] = float(weight)
        self._adj[v][u] = float(weight)

    def __contains__(self, n) -> bool:
        return n in self._adj

    def __len__(self) -> int:
        return len(self._adj)

    @property
    def nodes(self) -> set[str]:
        return set(self._adj)

    def sorted_nodes(self) -> list[str]:
        return sorted(self._adj)

    def neighbors(self, n: str) -> dict[str, float]:
        return self._adj[n]

    def weight(self, u: str, v: str) -> float:
        return self._adj.get(u, {}).get(v, 0.0)

    def has_edge(self, u: str, v: str) -> bool:
        return v in self._adj.get(u, {})

    def edges(self) -> Iterator[tuple[str, str, float]]:
        """Each edge once as ``(u, v, w)`` with ``u < v``, in sorted order."""
        for u in sorted(self._adj):
            for v in sorted(self._adj[u]):
                if u < v:
                    yield u, v, self._adj[u][v]

    def number_of_edges(self) -> int:
        return sum(len(nb) for nb in self._adj.values()) // 2

    def total_weight(self) -> float:
        return math.fsum(w for _, _, w in self.edges())

    def degree(self, n: str) -> int:
        return len(self._adj[n])

    def copy(self) -> "Network":
        g = Network(self._adj, self.edges())
        g.node_attrs = {k: dict(v) for k, v in self.node_attrs.items()}
        return g

    def subgraph(self, nodes: Iterable[str]) -> "Network":
        """Induced subgraph."""
        keep = set(nodes) & self.nodes
        g = Network(sorted(keep))
        for u, v, w in self.edges():
            if u in keep and v in keep:
                g.add_edge(u, v, w)
        return g

    def edge_subgraph(self, edges: Iterable[tuple[str, str]], nodes: Iterable[str] | None = None) -> "Network":
        """Subgraph on the given edges (original weights). Nodes default to edge endpoints."""
        g = Network(nodes or ())
        for u, v in edges:
            if not self.has_edge(u, v):
                raise GraphError(f"({u!r}, {v!r}) is not an edge")
            g.add_edge(u, v, self._adj[u][v])
        return g

    def is_subgraph_of(self, other: "Network") -> bool:
        if not self.nodes <= other.nodes:
            return False
        return all(other.weight(u, v) == w for u, v, w in self.edges())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self.nodes == other.nodes and list(self.edges()) == list(other.edges())

    def __repr__(self) -> str:
        return f"Network(nodes={len(self)}, edges={self.number_of_edges()})"

    # -- serialization ---------------------------------------------------

    def to_edgelist(self) -> str:
        lines = [f"{u} {v} {w!r}" for u, v, w in self.edges()]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_edgelist(cls, text: str, nodes: Iterable[str] = ()) -> "Network":
        g = cls(nodes)
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise GraphError(f"line {lineno}: expected 'u v weight', got {line!r}")
            g.add_edge(parts[0], parts[1], float(parts[2]))
        return g

    def to_json(self) -> dict:
        return {
            "nodes": [{"id": n, **self.node_attrs.get(n, {})} for n in self.sorted_nodes()],
            "edges": [[u, v, w] for u, v, w in self.edges()],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Network":
        g = cls()
        for node in obj["nodes"]:
            attrs = {k: v for k, v in node.items() if k != "id"}
            g.add_node(node["id"], **attrs)
        for u, v, w in obj["edges"]:
            g.add_edge(u, v, w)
        return g

    def save(self, stem: str | Path) -> None:
        """Write ``<stem>.edges`` and ``<stem>.json``."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        stem.with_suffix(".edges").write_text(self.to_edgelist(), encoding="utf-8")
        stem.with_suffix(".json").write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")


# -- connectivity --------------------------------------------------------


def connected_components(g: Network) -> list[set[str]]:
    seen: set[str] = set()
    comps = []
    for start in g.sorted_nodes():
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            for v in g.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    comp.add(v)
                    stack.append(v)
        comps.append(comp)
    return comps


def largest_component_size(g: Network) -> int:
    return max((len(c) for c in connected_components(g)), default=0)


# -- structural metrics --------------------------------------------------


def node_fraction(sub: Network, orig: Network) -> float:
    if len(orig) == 0:
        raise GraphError("original network is empty")
    return len(sub.nodes & orig.nodes) / len(orig)


def weight_fraction(sub: Network, orig: Network) -> float:
    total = orig.total_weight()
    if total <= 0:
        raise GraphError("original network has zero total weight")
    return sub.total_weight() / total


def weight_entropy(g: Network) -> float:
    """Shannon entropy (bits) of the edge-weight distribution."""
    weights = [w for _, _, w in g.edges()]
    total = math.fsum(weights)
    if total <= 0:
        return 0.0
    h = -math.fsum((w / total) * math.log2(w / total) for w in weights)
    return h if h > 0 else 0.0


def weight_entropy_ratio(sub: Network, orig: Network) -> float:
    h_orig = weight_entropy(orig)
    if h_orig == 0:
        raise GraphError("original network has zero weight entropy")
    return weight_entropy(sub) / h_orig


def lcc_size_ratio(sub: Network, orig: Network) -> float:
    base = largest_component_size(orig)
    if base == 0:
        raise GraphError("original network is empty")
    return largest_component_size(sub) / base


def reachability(g: Network) -> float:
    """Fraction of unordered node pairs joined by at least one path."""
    n = len(g)
    if n < 2:
        raise GraphError("reachability needs at least 2 nodes")
    connected = sum(len(c) * (len(c) - 1) // 2 for c in connected_components(g))
    return connected / (n * (n - 1) // 2)


def weighted_degree(g: Network, node: str) -> float:
    if node not in g:
        raise GraphError(f"unknown node {node!r}")
    return math.fsum(g.neighbors(node).values())


@dataclass(frozen=True)
class StructuralQuintuple:
    nf: float
    wf: float
    we: float
    lcc_s: float
    reachability: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.nf, self.wf, self.we, self.lcc_s, self.reachability)


def structural_quintuple(sub: Network, orig: Network) -> StructuralQuintuple:
    """NF, WF, WE, LCC_S as ratios to ``orig``; reachability of ``sub`` itself."""
    if sub.number_of_edges() == 0:
        we = 0.0
    else:
        we = weight_entropy_ratio(sub, orig)
    reach = reachability(sub) if len(sub) >= 2 else 0.0
    return StructuralQuintuple(
        nf=node_fraction(sub, orig),
        wf=weight_fraction(sub, orig),
        we=we,
        lcc_s=lcc_size_ratio(sub, orig),
        reachability=reach,
    )


# -- shortest paths ------------------------------------------------------


def edge_length(w: float, length_mode: str) -> float:
    if length_mode == "inverse_weight":
        return 1.0 / w
    if length_mode == "unit":
        return 1.0
    raise ValueError(f"unknown length mode {length_mode!r}")


def _same_length(a: float, b: float) -> bool:
    return abs(a - b) <= PATH_TOL * max(1.0, abs(a), abs(b))


def shortest_path_distances(g: Network, source: str, length_mode: str = "inverse_weight") -> tuple[dict[str, float], dict[str, str | None]]:
    """Dijkstra from ``source``; equal-length ties go to the smaller parent id."""
    if source not in g:
        raise GraphError(f"unknown source {source!r}")
    dist = {source: 0.0}
    parent: dict[str, str | None] = {source: None}
    done: set[str] = set()
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in g.neighbors(u).items():
            if v in done:
                continue
            nd = d + edge_length(w, length_mode)
            old = dist.get(v)
            if old is None or (nd < old and not _same_length(nd, old)):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
            elif _same_length(nd, old) and u < parent[v]:
                parent[v] = u
    return dist, parent


def shortest_path_tree(g: Network, source: str, length_mode: str = "inverse_weight") -> dict[str, str | None]:
    """Parent map of the shortest-path tree rooted at ``source`` (root maps to None)."""
    return shortest_path_distances(g, source, length_mode)[1]


def tree_edges(parent: dict[str, str | None]) -> set[tuple[str, str]]:
    return {(min(v, p), max(v, p)) for v, p in parent.items() if p is not None}
