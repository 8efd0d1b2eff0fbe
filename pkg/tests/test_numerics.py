import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphclust.graph import build_graph, matrix_view
from graphclust.metrics import ari
from graphclust.numerics import NumericError, inverse, kmeans, linear_assignment, sym_eigh, sym_eigs_smallest

from conftest import random_graph


def test_path_laplacian_spectrum(path2):
    assert np.allclose(sym_eigs_smallest(matrix_view(path2, "laplacian"), 2).values, [0, 2], atol=1e-12)


def test_two_triangles_double_zero(two_triangles):
    vals = sym_eigs_smallest(matrix_view(two_triangles, "laplacian"), 2).values
    assert np.allclose(vals, [0, 0], atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_random_symmetric_residual_and_rayleigh_bound(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(8, 8))
    m = a + a.T
    pairs = sym_eigh(m)
    for lam, v in zip(pairs.values, pairs.vectors.T):
        assert np.linalg.norm(m @ v - lam * v) < 1e-8
    # Monte-Carlo Rayleigh quotients never undercut the smallest eigenvalue
    # and the minimum over many samples gets close to it
    x = rng.normal(size=(100_000, 8))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    rq = np.einsum("ij,jk,ik->i", x, m, x)
    assert rq.min() >= pairs.values[0] - 1e-9
    assert rq.min() - pairs.values[0] < 0.05 * (pairs.values[-1] - pairs.values[0])


def test_laplacian_second_eigenvalue_is_min_rayleigh_over_ones_complement():
    g = random_graph(8, 0.6, seed=2)
    lap = matrix_view(g, "laplacian")
    lam2 = sym_eigh(lap).values[1]
    rng = np.random.default_rng(0)
    x = rng.normal(size=(100_000, 8))
    x -= x.mean(axis=1, keepdims=True)
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    rq = np.einsum("ij,jk,ik->i", x, lap, x)
    assert rq.min() >= lam2 - 1e-9
    assert rq.min() - lam2 < 0.05 * lam2


@given(st.integers(1, 25), st.integers(0, 10_000))
def test_eigensolver_reconstructs(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    m = (a + a.T) / 2
    p = sym_eigh(m)
    assert np.all(np.diff(p.values) >= 0)
    assert np.allclose(p.vectors @ np.diag(p.values) @ p.vectors.T, m, atol=1e-9)
    assert np.allclose(p.vectors.T @ p.vectors, np.eye(n), atol=1e-9)
    assert np.allclose(p.values, np.linalg.eigvalsh(m), atol=1e-9)


@given(st.integers(2, 30), st.integers(0, 10_000))
def test_rayleigh_identity(n, seed):
    g = random_graph(n, 0.3, seed)
    x = np.random.default_rng(seed).normal(size=n)
    lhs = x @ matrix_view(g, "laplacian") @ x
    rhs = sum((x[u] - x[v]) ** 2 for u, v, _ in g.edges)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_eigenvector_signs_deterministic():
    m = np.diag([3.0, 1.0, 2.0])
    m[0, 1] = m[1, 0] = 0.5
    v = sym_eigh(m).vectors
    idx = np.argmax(np.abs(v), axis=0)
    assert np.all(v[idx, range(3)] > 0)


def test_eigensolver_input_checks():
    with pytest.raises(NumericError, match="not symmetric"):
        sym_eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(NumericError, match="non-finite"):
        sym_eigh(np.array([[np.nan]]))
    with pytest.raises(NumericError, match="outside"):
        sym_eigs_smallest(np.eye(2), 3)


def test_inverse_examples():
    assert np.allclose(inverse(np.eye(3)), np.eye(3))
    assert np.allclose(inverse(np.array([[2.0, 0], [0, 4.0]])), [[0.5, 0], [0, 0.25]])
    m = np.random.default_rng(1).normal(size=(6, 6))
    assert np.allclose(m @ inverse(m), np.eye(6), atol=1e-10)


def test_inverse_singular_names_pivot():
    with pytest.raises(NumericError, match="pivot 1"):
        inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_linear_assignment_small():
    cost = np.array([[4.0, 1, 3], [2, 0, 5], [3, 2, 2]])
    cols = linear_assignment(cost)
    assert cost[range(3), cols].sum() == 5
    assert sorted(cols.tolist()) == [0, 1, 2]
    assert linear_assignment(np.array([[1.0, 9.0]]), maximize=True).tolist() == [1]


def test_kmeans_well_separated():
    pts = np.array([[0, 0], [0.1, 0], [10, 10], [10.1, 10]])
    res = kmeans(pts, 2, seed=0)
    assert res.partition.same_as(type(res.partition)([0, 0, 1, 1]))


def test_kmeans_k_equals_n():
    pts = np.random.default_rng(0).normal(size=(6, 2))
    res = kmeans(pts, 6, seed=1)
    assert sorted(res.partition.sizes().tolist()) == [1] * 6
    assert res.inertia == pytest.approx(0.0, abs=1e-18)


def test_kmeans_planted_blobs():
    rng = np.random.default_rng(7)
    centers = np.array([[0, 0], [10, 0], [0, 10]])
    y = np.repeat([0, 1, 2], 100)
    pts = centers[y] + rng.normal(scale=0.1, size=(300, 2))
    best = max(ari(y, kmeans(pts, 3, seed=s).partition) for s in range(10))
    assert best >= 0.99


def test_kmeans_translation_invariant_and_monotone():
    pts = np.random.default_rng(3).normal(size=(50, 3))
    a = kmeans(pts, 4, seed=9)
    b = kmeans(pts + 100.0, 4, seed=9)
    assert a.partition.same_as(b.partition)
    trace = np.array(a.inertia_trace)
    assert np.all(np.diff(trace) <= 1e-9)


def test_kmeans_duplicate_points_reseed_empty_cluster():
    pts = np.zeros((5, 2))
    pts[4] = 1.0
    res = kmeans(pts, 3, seed=0)
    assert res.partition.num_clusters <= 3
    assert res.inertia == pytest.approx(0.0)


def test_kmeans_errors():
    with pytest.raises(NumericError):
        kmeans(np.zeros((3, 2)), 4)
