"""Leiden community detection for the Constant Potts Model and modularity.

Every level runs fast local moving, refines each community into
well-connected sub-communities, and aggregates the refined partition while
seeding the aggregate network with the unrefined one.

Both objectives share one gain formula. Moving node ``v`` (node weight
``w_v``) from community ``A`` to ``B`` changes quality by::

    k_vB - k_vA' - res * w_v * (W_B - W_A')

where ``A' = A - {v}``, ``k_vC`` is the edge weight between ``v`` and ``C``,
and ``W_C`` the summed node weights of ``C``. CPM uses ``res = gamma`` and
node sizes as weights; modularity (scaled by ``m``) uses
``res = gamma / 2m`` and node strengths.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from graphclust.graph import Graph, GraphError, Partition, build_graph, connected_components

# gains closer than this are ties (guards against rounding-driven ping-pong)
_TIE = 1e-10

__all__ = [
    "AggregateGraph",
    "LeidenResult",
    "QualityObjective",
    "aggregate",
    "leiden",
    "local_move",
    "quality",
    "refine",
]


@dataclass(frozen=True)
class QualityObjective:
    kind: str = "modularity"
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("cpm", "modularity"):
            raise ValueError(f"unknown objective {self.kind!r}; expected 'cpm' or 'modularity'")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True, eq=False)
class AggregateGraph:
    """Network whose nodes are communities of a finer level.

    ``self_weights[i]`` is the edge weight inside aggregate node ``i``,
    ``node_sizes[i]`` the number of original nodes it holds, and ``carry``
    maps every original node to its aggregate node.
    """

    graph: Graph
    self_weights: np.ndarray
    node_sizes: np.ndarray
    carry: np.ndarray

    @property
    def total_weight(self) -> float:
        return self.graph.total_weight + float(self.self_weights.sum())


class _Level:
    """Adjacency lists plus per-node self weight, size and strength."""

    __slots__ = ("n", "nbrs", "wts", "selfw", "size", "strength", "m")

    def __init__(self, nbrs, wts, selfw, size):
        self.n = len(nbrs)
        self.nbrs = nbrs
        self.wts = wts
        self.selfw = selfw
        self.size = size
        self.strength = [sum(w) + 2.0 * s for w, s in zip(wts, selfw)]
        self.m = 0.5 * sum(self.strength)

    @classmethod
    def of(cls, g: Graph | AggregateGraph) -> "_Level":
        if isinstance(g, AggregateGraph):
            base, selfw, size = g.graph, g.self_weights.tolist(), g.node_sizes.tolist()
        else:
            base, selfw, size = g, [0.0] * g.num_nodes, [1] * g.num_nodes
        ip = base.indptr
        idx = base.indices.tolist()
        w = base.weights.tolist()
        nbrs = [idx[ip[v] : ip[v + 1]] for v in range(base.num_nodes)]
        wts = [w[ip[v] : ip[v + 1]] for v in range(base.num_nodes)]
        return cls(nbrs, wts, [float(s) for s in selfw], [int(s) for s in size])

    def node_weights(self, obj: QualityObjective) -> list[float]:
        return [float(s) for s in self.size] if obj.kind == "cpm" else self.strength

    def resolution(self, obj: QualityObjective) -> float:
        if obj.kind == "cpm":
            return obj.gamma
        return obj.gamma / (2.0 * self.m) if self.m > 0 else 0.0


def _level_quality(lv: _Level, comm: list[int], obj: QualityObjective) -> float:
    k = max(comm) + 1 if comm else 0
    internal = [0.0] * k
    for v in range(lv.n):
        cv = comm[v]
        internal[cv] += lv.selfw[v]
        for u, w in zip(lv.nbrs[v], lv.wts[v]):
            if u > v and comm[u] == cv:
                internal[cv] += w
    if obj.kind == "cpm":
        sizes = [0] * k
        for v in range(lv.n):
            sizes[comm[v]] += lv.size[v]
        return sum(e - obj.gamma * s * (s - 1) / 2.0 for e, s in zip(internal, sizes))
    if lv.m <= 0:
        raise GraphError("modularity is undefined on an edgeless graph")
    vol = [0.0] * k
    for v in range(lv.n):
        vol[comm[v]] += lv.strength[v]
    m = lv.m
    return sum(e / m - obj.gamma * (d / (2.0 * m)) ** 2 for e, d in zip(internal, vol))


def quality(g: Graph | AggregateGraph, p: Partition, obj: QualityObjective) -> float:
    """CPM ``sum_C [e_C - gamma * C(n_C, 2)]`` or modularity
    ``sum_C [e_C/m - gamma * (vol_C / 2m)^2]``; ``e_C`` counts internal edges
    (including aggregate self weights) and ``n_C`` original nodes."""
    lv = _Level.of(g)
    assignment = p.assignment if isinstance(p, Partition) else np.asarray(p)
    if len(assignment) != lv.n:
        raise GraphError("partition size does not match the graph")
    return _level_quality(lv, assignment.tolist(), obj)


def _move_nodes(lv: _Level, comm: list[int], obj: QualityObjective, rng: np.random.Generator) -> list[int]:
    n = lv.n
    comm = list(comm)
    nw = lv.node_weights(obj)
    res = lv.resolution(obj)
    total = [0.0] * n
    count = [0] * n
    for v in range(n):
        total[comm[v]] += nw[v]
        count[comm[v]] += 1
    empty = [c for c in range(n) if count[c] == 0]
    heapq.heapify(empty)
    queue = deque(rng.permutation(n).tolist())
    queued = [True] * n
    nbrs, wts = lv.nbrs, lv.wts
    while queue:
        v = queue.popleft()
        queued[v] = False
        a = comm[v]
        links: dict[int, float] = {}
        for u, w in zip(nbrs[v], wts[v]):
            c = comm[u]
            links[c] = links.get(c, 0.0) + w
        wv = nw[v]
        rest = total[a] - wv
        k_a = links.get(a, 0.0)
        best, best_gain = a, 0.0
        for c in sorted(links):
            if c == a:
                continue
            gain = links[c] - k_a - res * wv * (total[c] - rest)
            # staying put competes as a zero-gain candidate; equal gains go
            # to the lowest community id (a zero-gain move strictly lowers
            # the node's id, so the queue still drains)
            if gain > best_gain + _TIE or (gain >= best_gain - _TIE and c < best):
                best, best_gain = c, gain
        if count[a] > 1 and empty:
            c = empty[0]
            gain = -k_a + res * wv * rest
            if gain > best_gain + _TIE or (gain >= best_gain - _TIE and c < best):
                best, best_gain = c, gain
        if best == a:
            continue
        if best == (empty[0] if empty else -1):
            heapq.heappop(empty)
        total[a] -= wv
        count[a] -= 1
        if count[a] == 0:
            heapq.heappush(empty, a)
        total[best] += wv
        count[best] += 1
        comm[v] = best
        for u in nbrs[v]:
            if comm[u] != best and not queued[u]:
                queued[u] = True
                queue.append(u)
    return comm


def _refine(lv: _Level, comm: list[int], obj: QualityObjective, theta: float, rng: np.random.Generator) -> list[int]:
    n = lv.n
    nw = lv.node_weights(obj)
    res = lv.resolution(obj)
    ref = list(range(n))
    ref_total = list(nw)
    ref_count = [1] * n
    k = max(comm) + 1 if n else 0
    members: list[list[int]] = [[] for _ in range(k)]
    comm_total = [0.0] * k
    for v in range(n):
        members[comm[v]].append(v)
        comm_total[comm[v]] += nw[v]
    # edge weight from each node to the rest of its own community
    k_in = [0.0] * n
    for v in range(n):
        cv = comm[v]
        k_in[v] = sum(w for u, w in zip(lv.nbrs[v], lv.wts[v]) if comm[u] == cv)
    # edge weight from each refined community to the rest of its community
    ext = list(k_in)
    for s, nodes in enumerate(members):
        if len(nodes) < 2:
            continue
        tot_s = comm_total[s]
        for v in rng.permutation(nodes).tolist():
            if ref_count[ref[v]] != 1:
                continue
            if k_in[v] < res * nw[v] * (tot_s - nw[v]):
                continue
            links: dict[int, float] = {}
            for u, w in zip(lv.nbrs[v], lv.wts[v]):
                if comm[u] == s:
                    links[ref[u]] = links.get(ref[u], 0.0) + w
            own = ref[v]
            cands: list[tuple[int, float]] = []
            for c in sorted(links):
                if c == own:
                    continue
                if ext[c] < res * ref_total[c] * (tot_s - ref_total[c]):
                    continue
                gain = links[c] - res * nw[v] * ref_total[c]
                if gain > 0:
                    cands.append((c, gain))
            if not cands:
                continue
            if theta <= 0:
                target = max(cands, key=lambda cg: (cg[1], -cg[0]))[0]
            else:
                top = max(g for _, g in cands)
                weights = np.array([math.exp((g - top) / theta) for _, g in cands])
                cum = np.cumsum(weights)
                pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
                target = cands[min(pick, len(cands) - 1)][0]
            ext[target] = ext[target] + k_in[v] - 2.0 * links[target]
            ref_total[target] += nw[v]
            ref_count[target] += 1
            ref_total[own] = 0.0
            ref_count[own] = 0
            ref[v] = target
    return ref


def _dense(labels: list[int]) -> tuple[list[int], int]:
    remap: dict[int, int] = {}
    out = [remap.setdefault(c, len(remap)) for c in labels]
    return out, len(remap)


def _aggregate(lv: _Level, ref: list[int], comm: list[int]) -> tuple[_Level, list[int], list[int]]:
    ref_d, r = _dense(ref)
    selfw = [0.0] * r
    size = [0] * r
    between: list[dict[int, float]] = [dict() for _ in range(r)]
    init = [0] * r
    for v in range(lv.n):
        a = ref_d[v]
        selfw[a] += lv.selfw[v]
        size[a] += lv.size[v]
        init[a] = comm[v]
        for u, w in zip(lv.nbrs[v], lv.wts[v]):
            if u <= v:
                continue
            b = ref_d[u]
            if a == b:
                selfw[a] += w
            else:
                between[a][b] = between[a].get(b, 0.0) + w
                between[b][a] = between[b].get(a, 0.0) + w
    nbrs = [sorted(d) for d in between]
    wts = [[between[a][b] for b in nbrs[a]] for a in range(r)]
    init_d, _ = _dense(init)
    return _Level(nbrs, wts, selfw, size), init_d, ref_d


def _to_aggregate_graph(lv: _Level, carry: np.ndarray) -> AggregateGraph:
    edges = [(v, u, w) for v in range(lv.n) for u, w in zip(lv.nbrs[v], lv.wts[v]) if u > v]
    return AggregateGraph(
        build_graph(edges, lv.n),
        np.array(lv.selfw, dtype=np.float64),
        np.array(lv.size, dtype=np.int64),
        carry,
    )


def _labels_of(p: Partition | np.ndarray | list[int], n: int) -> list[int]:
    a = p.assignment if isinstance(p, Partition) else np.asarray(p)
    if len(a) != n:
        raise GraphError("partition size does not match the graph")
    return [int(x) for x in a]


def local_move(g: Graph | AggregateGraph, p: Partition, obj: QualityObjective, seed: int = 0) -> Partition:
    """Queue-driven greedy moves until no node has a positive-gain move."""
    lv = _Level.of(g)
    comm = _move_nodes(lv, _labels_of(p, lv.n), obj, np.random.default_rng(seed))
    return Partition(_dense(comm)[0])


def refine(g: Graph | AggregateGraph, p: Partition, obj: QualityObjective, theta: float = 0.01, seed: int = 0) -> Partition:
    """Split each community of ``p`` into well-connected sub-communities.

    Starting from singletons, each well-connected singleton node merges into
    a well-connected sub-community of its own community, chosen among the
    positive-gain candidates with probability proportional to
    ``exp(gain / theta)`` (``theta = 0``: the best one).
    """
    lv = _Level.of(g)
    ref = _refine(lv, _labels_of(p, lv.n), obj, theta, np.random.default_rng(seed))
    return Partition(_dense(ref)[0])


def aggregate(g: Graph | AggregateGraph, p_refined: Partition, p: Partition) -> tuple[AggregateGraph, Partition]:
    """Collapse refined communities into nodes; the returned partition groups
    them by their community in ``p``."""
    lv = _Level.of(g)
    ref = _labels_of(p_refined, lv.n)
    comm = _labels_of(p, lv.n)
    owner: dict[int, int] = {}
    for v in range(lv.n):
        if owner.setdefault(ref[v], comm[v]) != comm[v]:
            raise GraphError(f"refined community {ref[v]} straddles communities {owner[ref[v]]} and {comm[v]}")
    new, init, ref_d = _aggregate(lv, ref, comm)
    base_carry = g.carry if isinstance(g, AggregateGraph) else np.arange(lv.n)
    carry = np.asarray(ref_d, dtype=np.int64)[base_carry]
    return _to_aggregate_graph(new, carry), Partition(init)


def _split_disconnected(g: Graph, labels: np.ndarray) -> np.ndarray:
    """Give every connected piece of a community its own id (never lowers quality)."""
    inner = [(u, v) for u, v, _ in g.edges if labels[u] == labels[v]]
    return connected_components(build_graph(inner, g.num_nodes)).assignment


@dataclass
class LeidenResult:
    partition: Partition
    quality: float
    levels: int
    quality_trace: list[float]


def leiden(
    g: Graph,
    obj: QualityObjective | None = None,
    seed: int = 0,
    max_levels: int = 50,
    theta: float = 0.01,
    check: bool = False,
) -> LeidenResult:
    """Leiden: local moving, refinement and aggregation until every
    community is a single aggregate node (or ``max_levels``).

    Returned communities are connected. ``check`` asserts that quality never
    decreases from level to level.
    """
    obj = obj or QualityObjective()
    if g.total_weight <= 0:
        raise GraphError("Leiden needs at least one edge")
    rng = np.random.default_rng(seed)
    lv = _Level.of(g)
    comm = list(range(lv.n))
    node_of = np.arange(g.num_nodes)
    trace: list[float] = []
    levels = 0
    for levels in range(1, max_levels + 1):
        comm = _move_nodes(lv, comm, obj, rng)
        q = _level_quality(lv, comm, obj)
        if check and trace and q < trace[-1] - 1e-9 * max(1.0, abs(trace[-1])):
            raise AssertionError(f"quality decreased at level {levels}: {trace[-1]} -> {q}")
        trace.append(q)
        if len(set(comm)) == lv.n:
            break
        ref = _refine(lv, comm, obj, theta, rng)
        if len(set(ref)) == lv.n:
            # refinement merged nothing; aggregate the communities directly so
            # the next level is strictly smaller
            ref = comm
        lv, comm, ref_d = _aggregate(lv, ref, comm)
        node_of = np.asarray(ref_d, dtype=np.int64)[node_of]
    labels = np.asarray(comm, dtype=np.int64)[node_of]
    labels = _split_disconnected(g, labels)
    part = Partition.from_labels(labels)
    return LeidenResult(part, quality(g, part, obj), levels, trace)
