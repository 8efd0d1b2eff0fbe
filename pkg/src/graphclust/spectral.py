"""Spectral clustering with multiple eigenvectors of the normalized Laplacian."""

from __future__ import annotations

import numpy as np

from graphclust.graph import Graph, GraphError, Partition, connected_components, matrix_view
from graphclust.numerics import kmeans, sym_eigs_smallest

__all__ = ["spectral_embedding", "spectral_clustering", "DisconnectedGraphError"]


class DisconnectedGraphError(GraphError):
    """Spectral clustering was asked to run on a disconnected graph without fallback."""


def spectral_embedding(g: Graph, k: int, normalize_rows: bool = False) -> np.ndarray:
    """Rows of the ``k`` eigenvectors of the normalized Laplacian with the
    smallest eigenvalues, one row per node."""
    if not 1 <= k <= g.num_nodes:
        raise GraphError(f"k={k} must lie in [1, n={g.num_nodes}]")
    lap = matrix_view(g, "normalized-laplacian")
    u = sym_eigs_smallest(lap, k).vectors
    if normalize_rows:
        norms = np.linalg.norm(u, axis=1, keepdims=True)
        u = u / np.where(norms > 0, norms, 1.0)
    return u


def _cluster_connected(g: Graph, k: int, seed: int, normalize_rows: bool, n_init: int) -> np.ndarray:
    if k == 1:
        return np.zeros(g.num_nodes, dtype=np.int64)
    u = spectral_embedding(g, k, normalize_rows)
    return kmeans(u, k, seed=seed, n_init=n_init).partition.assignment


def _split_budget(sizes: np.ndarray, k: int) -> np.ndarray:
    """One cluster per component, extras handed out greedily to the
    component with the most nodes per allotted cluster."""
    alloc = np.ones(len(sizes), dtype=np.int64)
    for _ in range(k - len(sizes)):
        ratio = np.where(alloc < sizes, sizes / alloc, -1.0)
        alloc[int(np.argmax(ratio))] += 1
    return alloc


def spectral_clustering(
    g: Graph,
    k: int,
    seed: int = 0,
    normalize_rows: bool = False,
    fallback: bool = True,
    n_init: int = 10,
) -> Partition:
    """Partition ``g`` into ``k`` clusters: normalized Laplacian, its ``k``
    smallest eigenvectors as node coordinates, then k-means on the rows.

    Disconnected graphs (where the normalized Laplacian is undefined on
    isolated nodes and the spectrum is dominated by components) are handled
    when ``fallback`` is set: with at least ``k`` components whole
    components are packed into ``k`` clusters, largest first, each further
    component going to the currently smallest cluster; with fewer, each
    component is clustered separately with its share of the ``k`` clusters.
    """
    n = g.num_nodes
    if k < 2:
        raise GraphError(f"k={k}: spectral clustering needs k >= 2")
    if k > n:
        raise GraphError(f"k={k} exceeds the number of nodes {n}")
    comps = connected_components(g)
    if comps.num_clusters == 1:
        return Partition(_cluster_connected(g, k, seed, normalize_rows, n_init))
    members = comps.clusters()
    if not fallback:
        listing = "; ".join(
            "{" + ", ".join(str(int(x)) for x in c[:8]) + (", ..." if len(c) > 8 else "") + "}"
            for c in members[:10]
        )
        raise DisconnectedGraphError(
            f"graph has {len(members)} connected components: {listing}"
            + (" ..." if len(members) > 10 else "")
        )
    sizes = np.array([len(c) for c in members], dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    if len(members) >= k:
        order = sorted(range(len(members)), key=lambda c: (-sizes[c], c))
        load = np.zeros(k, dtype=np.int64)
        for rank, c in enumerate(order):
            target = rank if rank < k else int(np.argmin(load))
            out[members[c]] = target
            load[target] += sizes[c]
        return Partition(out)
    alloc = _split_budget(sizes, k)
    offset = 0
    for c, nodes in enumerate(members):
        sub, _ = g.subgraph(nodes)
        out[nodes] = _cluster_connected(sub, int(alloc[c]), seed, normalize_rows, n_init) + offset
        offset += int(alloc[c])
    return Partition.from_labels(out)
