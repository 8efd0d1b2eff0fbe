"""Immutable undirected graphs, partitions and their dense matrix views."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "Partition",
    "MATRIX_KINDS",
    "build_graph",
    "matrix_view",
    "connected_components",
]

MATRIX_KINDS = (
    "adjacency",
    "degree",
    "normalized-adjacency",
    "laplacian",
    "normalized-laplacian",
    "adjacency-with-self-loops",
    "normalized-adjacency-with-self-loops",
)


class GraphError(ValueError):
    """Raised for invalid graph construction or undefined matrix views."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph stored as a symmetric CSR adjacency.

    Neighbor lists are sorted by node id. ``edges`` holds each undirected
    edge once as ``(u, v, w)`` with ``u < v``, in ingest order.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    edges: tuple[tuple[int, int, float], ...]
    duplicate_count: int = 0
    self_loop_count: int = 0

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        """Unweighted degree (neighbor count) of every node."""
        return np.diff(self.indptr)

    @property
    def strengths(self) -> np.ndarray:
        """Weighted degree of every node."""
        rows = np.repeat(np.arange(self.num_nodes), np.diff(self.indptr))
        return np.bincount(rows, weights=self.weights, minlength=self.num_nodes)

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def neighbor_weights(self, u: int) -> np.ndarray:
        return self.weights[self.indptr[u] : self.indptr[u + 1]]

    def edge_array(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` int array, ``u < v`` per row."""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array([(u, v) for u, v, _ in self.edges], dtype=np.int64)

    def subgraph(self, nodes: Sequence[int]) -> tuple["Graph", np.ndarray]:
        """Induced subgraph on ``nodes``; returns it with the old-id array."""
        nodes = np.asarray(nodes, dtype=np.int64)
        remap = np.full(self.num_nodes, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        sub = [
            (int(remap[u]), int(remap[v]), w)
            for u, v, w in self.edges
            if remap[u] >= 0 and remap[v] >= 0
        ]
        return build_graph(sub, len(nodes)), nodes

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Graph with node ``u`` renamed to ``perm[u]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return build_graph(
            [(int(perm[u]), int(perm[v]), w) for u, v, w in self.edges],
            self.num_nodes,
        )


def build_graph(
    edge_list: Iterable[Sequence[float]], n: int
) -> Graph:
    """Build a :class:`Graph` from ``(u, v)`` or ``(u, v, w)`` tuples.

    Self-loops are dropped and counted. Repeated edges (in either
    orientation) keep the first weight and bump ``duplicate_count``.
    """
    if n < 0:
        raise GraphError(f"negative node count {n}")
    seen: dict[tuple[int, int], float] = {}
    order: list[tuple[int, int]] = []
    dups = loops = 0
    for item in edge_list:
        u, v = int(item[0]), int(item[1])
        w = float(item[2]) if len(item) > 2 else 1.0
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) references a node outside [0, {n})")
        if u == v:
            loops += 1
            continue
        key = (u, v) if u < v else (v, u)
        if key in seen:
            dups += 1
            continue
        seen[key] = w
        order.append(key)

    m = len(order)
    if m:
        e = np.array(order, dtype=np.int64)
        w = np.array([seen[k] for k in order], dtype=np.float64)
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        ww = np.concatenate([w, w])
        perm = np.lexsort((dst, src))
        src, dst, ww = src[perm], dst[perm], ww[perm]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
    else:
        dst = np.zeros(0, dtype=np.int64)
        ww = np.zeros(0, dtype=np.float64)
        indptr = np.zeros(n + 1, dtype=np.int64)
    return Graph(
        num_nodes=n,
        indptr=_frozen(indptr),
        indices=_frozen(dst),
        weights=_frozen(ww),
        edges=tuple((u, v, seen[(u, v)]) for u, v in order),
        duplicate_count=dups,
        self_loop_count=loops,
    )


@dataclass(frozen=True, eq=False)
class Partition:
    """Hard assignment of every node to one cluster id in ``[0, num_clusters)``."""

    assignment: np.ndarray
    num_clusters: int = field(default=-1)

    def __post_init__(self) -> None:
        a = np.array(self.assignment, dtype=np.int64).ravel()
        if a.size and a.min() < 0:
            raise GraphError("cluster ids must be non-negative")
        k = int(a.max()) + 1 if a.size else 0
        if self.num_clusters not in (-1, k):
            raise GraphError(
                f"num_clusters={self.num_clusters} but max cluster id is {k - 1}"
            )
        object.__setattr__(self, "assignment", _frozen(a))
        object.__setattr__(self, "num_clusters", k)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "Partition":
        """Canonical partition: ids renumbered by first appearance."""
        labels = np.asarray(labels).ravel()
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        return cls(rank[inv.ravel()])

    @property
    def num_nodes(self) -> int:
        return len(self.assignment)

    def canonical(self) -> "Partition":
        return Partition.from_labels(self.assignment)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_clusters)

    def clusters(self) -> list[np.ndarray]:
        """Node ids of every non-empty cluster, in cluster-id order."""
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(self.sizes())[:-1]
        return [c for c in np.split(order, bounds) if len(c)]

    def same_as(self, other: "Partition") -> bool:
        """Equality up to relabeling of cluster ids."""
        return self.num_nodes == other.num_nodes and np.array_equal(
            self.canonical().assignment, other.canonical().assignment
        )

    def __len__(self) -> int:
        return self.num_nodes


def _dense_adjacency(g: Graph) -> np.ndarray:
    a = np.zeros((g.num_nodes, g.num_nodes))
    rows = np.repeat(np.arange(g.num_nodes), np.diff(g.indptr))
    a[rows, g.indices] = g.weights
    return a


def _inv_sqrt(deg: np.ndarray, kind: str) -> np.ndarray:
    bad = np.flatnonzero(deg <= 0)
    if bad.size:
        raise GraphError(
            f"{kind} is undefined: node {int(bad[0])} is isolated (degree 0)"
        )
    return 1.0 / np.sqrt(deg)


def matrix_view(g: Graph, kind: str) -> np.ndarray:
    """Dense ``n x n`` matrix of the requested kind (see ``MATRIX_KINDS``)."""
    if kind not in MATRIX_KINDS:
        raise GraphError(f"unknown matrix kind {kind!r}; expected one of {MATRIX_KINDS}")
    a = _dense_adjacency(g)
    if kind == "adjacency":
        return a
    if kind in ("adjacency-with-self-loops", "normalized-adjacency-with-self-loops"):
        a[np.diag_indices_from(a)] += 1.0
        if kind == "adjacency-with-self-loops":
            return a
        s = _inv_sqrt(a.sum(axis=1), kind)
        return s[:, None] * a * s[None, :]
    deg = a.sum(axis=1)
    if kind == "degree":
        return np.diag(deg)
    if kind == "laplacian":
        return np.diag(deg) - a
    s = _inv_sqrt(deg, kind)
    na = s[:, None] * a * s[None, :]
    if kind == "normalized-adjacency":
        return na
    return np.eye(g.num_nodes) - na


def connected_components(g: Graph) -> Partition:
    """Components labelled in order of their smallest node id."""
    comp = np.full(g.num_nodes, -1, dtype=np.int64)
    indptr, indices = g.indptr, g.indices
    c = 0
    for s in range(g.num_nodes):
        if comp[s] >= 0:
            continue
        comp[s] = c
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in indices[indptr[u] : indptr[u + 1]]:
                if comp[v] < 0:
                    comp[v] = c
                    queue.append(v)
        c += 1
    return Partition(comp)
