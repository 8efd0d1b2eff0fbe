"""Dense numeric substrate: symmetric eigensolver, inverse, k-means, assignment."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from graphclust._backend import kernels
from graphclust.graph import Partition

__all__ = [
    "EigenPairs",
    "NumericError",
    "sym_eigs_smallest",
    "sym_eigh",
    "inverse",
    "kmeans",
    "KMeansResult",
    "linear_assignment",
]

SYMMETRY_TOL = 1e-10
PIVOT_TOL = 1e-12


class NumericError(ArithmeticError):
    """Asymmetric input, singular matrix, or a non-finite value."""


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # column i pairs with values[i]

    def __len__(self) -> int:
        return len(self.values)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eigh(m: np.ndarray) -> EigenPairs:
    """Full spectrum via Householder tridiagonalization and implicit QL."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NumericError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > SYMMETRY_TOL:
        raise NumericError(f"matrix is not symmetric (max |M - M^T| = {asym:.3g})")
    d, e, q = kernels.tridiagonalize(m)
    zt = np.ascontiguousarray(q.T)
    kernels.tridiagonal_ql(d, e, zt)
    order = np.argsort(d, kind="stable")
    return EigenPairs(d[order], _fix_signs(zt[order].T.copy()))


def sym_eigs_smallest(m: np.ndarray, k: int) -> EigenPairs:
    """The ``k`` algebraically smallest eigenpairs of a symmetric matrix."""
    n = np.asarray(m).shape[0]
    if not 1 <= k <= n:
        raise NumericError(f"k={k} outside [1, {n}]")
    full = sym_eigh(m)
    return EigenPairs(full.values[:k].copy(), np.ascontiguousarray(full.vectors[:, :k]))


def inverse(m: np.ndarray) -> np.ndarray:
    """Inverse through LU with partial pivoting.

    Raises :class:`NumericError` naming the first pivot whose magnitude is
    at or below ``1e-12``.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NumericError(f"expected a square matrix, got shape {m.shape}")
    with warnings.catch_warnings():
        # a zero pivot is reported below with its index
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
    small = np.flatnonzero(np.abs(np.diag(lu)) <= PIVOT_TOL)
    if small.size:
        raise NumericError(f"matrix is singular: pivot {int(small[0])} is {lu[small[0], small[0]]:.3g}")
    return scipy.linalg.lu_solve((lu, piv), np.eye(m.shape[0]))


def linear_assignment(cost: np.ndarray, maximize: bool = False) -> np.ndarray:
    """Optimal one-to-one assignment of rows to columns (Kuhn-Munkres).

    Rectangular inputs are padded with zeros to square. Returns, for each
    original row, its assigned column (possibly a padding column, i.e.
    ``>= cost.shape[1]``).
    """
    cost = np.asarray(cost, dtype=np.float64)
    r, c = cost.shape
    size = max(r, c)
    square = np.zeros((size, size))
    square[:r, :c] = -cost if maximize else cost
    return kernels.linear_assignment(square)[:r]


@dataclass(frozen=True)
class KMeansResult:
    partition: Partition
    centers: np.ndarray
    inertia: float
    iterations: int
    inertia_trace: tuple[float, ...]


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = points[idx]
        closest = np.minimum(closest, _sq_dists(points, centers[c : c + 1])[:, 0])
    return centers


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iters: int = 300,
    n_init: int = 1,
) -> KMeansResult:
    """Lloyd's k-means with k-means++ seeding.

    Runs ``n_init`` seeded restarts and keeps the lowest inertia. An empty
    cluster is reseeded at the point farthest from its current center.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = len(points)
    if k < 1 or k > n:
        raise NumericError(f"k={k} must lie in [1, n={n}]")
    rng = np.random.default_rng(seed)
    best: KMeansResult | None = None
    for _ in range(n_init):
        res = _lloyd(points, k, rng, max_iters)
        if best is None or res.inertia < best.inertia:
            best = res
    assert best is not None
    return best


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator, max_iters: int) -> KMeansResult:
    centers = _plus_plus(points, k, rng)
    labels = np.full(len(points), -1, dtype=np.int64)
    trace: list[float] = []
    it = 0
    for it in range(1, max_iters + 1):
        dist = _sq_dists(points, centers)
        new = np.argmin(dist, axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            own = dist[np.arange(len(points)), new]
            far = int(np.argmax(own))
            new[far] = c
            dist[far] = 0.0
            counts = np.bincount(new, minlength=k)
        trace.append(float(dist[np.arange(len(points)), new].sum()))
        if np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centers[c] = points[labels == c].mean(axis=0)
    inertia = float(_sq_dists(points, centers)[np.arange(len(points)), labels].sum())
    return KMeansResult(Partition(labels), centers, inertia, it, tuple(trace))
