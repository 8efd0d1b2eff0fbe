"""Markov clustering: alternate expansion (matrix power) and inflation
(entrywise power plus column renormalization) of a column-stochastic random
walk until it stops changing, then read clusters off the attractors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from graphclust.graph import Graph, GraphError, Partition

__all__ = ["MclConfig", "MclResult", "mcl", "transition_matrix", "extract_clusters"]

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class MclConfig:
    expansion: int = 2
    inflation: float = 2.0
    epsilon: float = 1e-4
    max_rounds: int = 100
    prune_threshold: float = 1e-8
    add_self_loops: bool = True

    def __post_init__(self) -> None:
        if int(self.expansion) != self.expansion or self.expansion < 2:
            raise ValueError("expansion must be an integer >= 2")
        if not self.inflation > 1:
            raise ValueError("inflation must be > 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be >= 0")


@dataclass
class MclResult:
    partition: Partition
    converged: bool
    rounds: int
    column_sum_error: list[float] = field(default_factory=list)
    final_change: float = float("nan")


def transition_matrix(g: Graph, add_self_loops: bool = True) -> np.ndarray:
    """Column-stochastic walk matrix: ``M[v, u] = A[v, u] / deg(u)``."""
    n = g.num_nodes
    a = np.zeros((n, n))
    rows = np.repeat(np.arange(n), np.diff(g.indptr))
    a[rows, g.indices] = 1.0
    if add_self_loops:
        a[np.diag_indices(n)] = 1.0
    deg = a.sum(axis=0)
    bad = np.flatnonzero(deg == 0)
    if bad.size:
        raise GraphError(f"node {int(bad[0])} is isolated; enable self-loops to include it")
    return a / deg[None, :]


def _sparse_transition(g: Graph, add_self_loops: bool) -> scipy.sparse.csc_matrix:
    n = g.num_nodes
    a = scipy.sparse.csr_matrix((np.ones(len(g.indices)), g.indices, g.indptr), shape=(n, n))
    if add_self_loops:
        a = a + scipy.sparse.identity(n, format="csr")
    deg = np.asarray(a.sum(axis=0)).ravel()
    bad = np.flatnonzero(deg == 0)
    if bad.size:
        raise GraphError(f"node {int(bad[0])} is isolated; enable self-loops to include it")
    return a.multiply(1.0 / deg[None, :]).tocsc()


def _inflate(p, r: float, prune: float):
    if scipy.sparse.issparse(p):
        p = p.power(r).tocsc()
        p = p.multiply(1.0 / np.asarray(p.sum(axis=0)).ravel()[None, :]).tocsc()
        if prune > 0:
            p.data[p.data < prune] = 0.0
            p.eliminate_zeros()
            p = p.multiply(1.0 / np.asarray(p.sum(axis=0)).ravel()[None, :]).tocsc()
        return p
    p = np.power(p, r)
    p /= p.sum(axis=0, keepdims=True)
    if prune > 0:
        p[p < prune] = 0.0
        p /= p.sum(axis=0, keepdims=True)
    return p


def _expand(p, e: int):
    out = p
    for _ in range(e - 1):
        out = out @ p
    return out


def _max_change(p, q) -> float:
    if scipy.sparse.issparse(p):
        d = (p - q).tocsc()
        return float(np.abs(d.data).max()) if d.nnz else 0.0
    return float(np.max(np.abs(p - q)))


def _column_error(p) -> float:
    s = np.asarray(p.sum(axis=0)).ravel()
    return float(np.max(np.abs(s - 1.0)))


def extract_clusters(p, threshold: float) -> Partition:
    """Attractors are nodes whose diagonal entry exceeds ``threshold``; each
    attractor's row gathers the columns above ``threshold``. A node claimed
    by several attractors goes to the lowest-index one; unclaimed nodes
    become singletons."""
    dense = p.toarray() if scipy.sparse.issparse(p) else np.asarray(p)
    n = dense.shape[0]
    owner = np.full(n, -1, dtype=np.int64)
    for a in np.flatnonzero(np.diag(dense) > threshold):
        claimed = np.flatnonzero((dense[a] > threshold) & (owner < 0))
        owner[claimed] = a
    free = np.flatnonzero(owner < 0)
    owner[free] = n + free
    return Partition.from_labels(owner)


def mcl(g: Graph, cfg: MclConfig | None = None) -> MclResult:
    """Run MCL to convergence (``max |P - P_prev| <= epsilon``) or
    ``max_rounds``; a non-converged run is flagged, not raised."""
    cfg = cfg or MclConfig()
    if g.num_nodes > DENSE_LIMIT:
        p = _sparse_transition(g, cfg.add_self_loops)
    else:
        p = transition_matrix(g, cfg.add_self_loops)
    errors: list[float] = []
    converged = False
    change = float("nan")
    rounds = 0
    for rounds in range(1, cfg.max_rounds + 1):
        nxt = _inflate(_expand(p, int(cfg.expansion)), cfg.inflation, cfg.prune_threshold)
        errors.append(_column_error(nxt))
        change = _max_change(nxt, p)
        p = nxt
        if change <= cfg.epsilon:
            converged = True
            break
    return MclResult(extract_clusters(p, cfg.epsilon), converged, rounds, errors, change)
