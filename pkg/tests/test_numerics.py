import itertools
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smkl import numerics
from smkl.numerics import (DegenerateClusteringError, NotPositiveDefiniteError,
                           connected_components, hungarian, kmeans, laplacian,
                           smallest_eigenpairs, solve_spd)

from conftest import random_block_graph, random_psd


def test_eigenpairs_diagonal():
    ep = smallest_eigenpairs(np.diag([3.0, 1.0, 2.0]), 2)
    np.testing.assert_allclose(ep.values, [1.0, 2.0])
    np.testing.assert_allclose(np.abs(ep.vectors), [[0, 0], [1, 0], [0, 1]], atol=1e-12)


def test_eigenpairs_two_components_have_two_zero_eigenvalues():
    W = np.zeros((6, 6))
    W[:3, :3] = 1.0
    W[3:, 3:] = 1.0
    ep = smallest_eigenpairs(laplacian(W), 2)
    np.testing.assert_allclose(ep.values, [0.0, 0.0], atol=1e-8)


def test_eigenvalue_sum_is_trace(rng):
    A = rng.standard_normal((6, 6))
    M = A + A.T
    assert abs(smallest_eigenpairs(M, 6).values.sum() - np.trace(M)) <= 1e-8


def test_eigenpairs_rejects_c_larger_than_n():
    with pytest.raises(ValueError):
        smallest_eigenpairs(np.eye(3), 4)


@pytest.mark.parametrize("n", [5, 40, 200])
def test_eigen_residual_and_orthonormality(rng, n):
    A = rng.standard_normal((n, n))
    M = (A + A.T) / 2
    c = min(n, 7)
    ep = smallest_eigenpairs(M, c)
    assert np.all(np.diff(ep.values) >= 0)
    assert np.abs(ep.vectors.T @ ep.vectors - np.eye(c)).max() <= 1e-8
    fro = np.linalg.norm(M)
    for lam, v in zip(ep.values, ep.vectors.T):
        assert np.linalg.norm(M @ v - lam * v) <= 1e-8 * fro
    np.testing.assert_allclose(ep.values, np.linalg.eigvalsh(M)[:c], atol=1e-10)


def test_solve_spd_identity(rng):
    B = rng.standard_normal((4, 3))
    np.testing.assert_allclose(solve_spd(np.eye(4), B), B)


def test_solve_spd_diagonal():
    np.testing.assert_allclose(solve_spd(np.diag([2.0, 4.0]), [[2.0], [4.0]]), [[1.0], [1.0]])


def test_solve_spd_residual(rng):
    A = 2 * np.eye(8) + random_psd(rng, 8)
    B = rng.standard_normal((8, 5))
    X = solve_spd(A, B)
    assert np.abs(A @ X - B).max() <= 1e-8 * (1 + np.abs(B).max())


def test_solve_spd_indefinite_raises():
    with pytest.raises(NotPositiveDefiniteError):
        solve_spd(np.diag([1.0, -1.0]), np.ones(2))


def test_shared_factor_concurrent_solves(rng):
    from concurrent.futures import ThreadPoolExecutor
    A = np.eye(30) + random_psd(rng, 30)
    factor = numerics.SPDFactor(A)
    rhs = [rng.standard_normal((30, 4)) for _ in range(8)]
    with ThreadPoolExecutor(4) as pool:
        sols = list(pool.map(factor.solve, rhs))
    for B, X in zip(rhs, sols):
        np.testing.assert_allclose(A @ X, B, atol=1e-9)


# ------------------------------------------------------------------ kmeans

def test_kmeans_repeated_points_exact_groups():
    pts = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    truth = np.array([0, 1, 2, 2, 1, 0, 0, 1, 2])
    labels = kmeans(pts[truth], 3, seed=4)
    # identical points share a label and distinct points do not
    assert len(set(zip(truth, labels))) == 3


def test_kmeans_single_cluster(rng):
    assert np.all(kmeans(rng.standard_normal((10, 2)), 1) == 0)


def test_kmeans_degenerate():
    with pytest.raises(DegenerateClusteringError):
        kmeans(np.ones((5, 2)), 2)


def _wcss(X, labels):
    return sum(((X[labels == k] - X[labels == k].mean(0)) ** 2).sum() for k in np.unique(labels))


def test_kmeans_two_blobs_matches_brute_force(rng):
    X = np.vstack([rng.normal([5, 5], 0.1, (4, 2)), rng.normal([-5, 5], 0.1, (4, 2))])
    best = min((np.array(bits) for bits in itertools.product([0, 1], repeat=8)
                if 0 < sum(bits) < 8), key=lambda b: _wcss(X, b))
    labels = kmeans(X, 2, normalize=False, seed=1)
    assert len(set(zip(best, labels))) == 2
    # row normalization keeps the same partition for these blobs
    labels = kmeans(X, 2, seed=1)
    assert len(set(zip(best, labels))) == 2


def test_lloyd_objective_non_increasing(rng):
    X = rng.standard_normal((60, 3))
    centers = X[rng.choice(60, 4, replace=False)].copy()
    _, _, history = numerics.lloyd(X, centers)
    assert np.all(np.diff(history) <= 1e-12)


def test_kmeans_deterministic(rng):
    X = rng.standard_normal((50, 3))
    np.testing.assert_array_equal(kmeans(X, 4, seed=7), kmeans(X, 4, seed=7))


def test_kmeans_restarts_never_worse(rng):
    X = rng.standard_normal((80, 2))
    Xn = X / np.linalg.norm(X, axis=1, keepdims=True)
    one = _wcss(Xn, kmeans(X, 5, restarts=1, seed=3))
    many = _wcss(Xn, kmeans(X, 5, restarts=10, seed=3))
    assert many <= one + 1e-12


# ------------------------------------------------------------------ hungarian

def brute_force_assignment(cost):
    c = cost.shape[0]
    return min(sum(cost[i, p[i]] for i in range(c)) for p in itertools.permutations(range(c)))


def test_hungarian_identity():
    a = hungarian([[1, 2], [2, 1]])
    assert list(a.perm) == [0, 1] and a.cost == 2


def test_hungarian_swap():
    a = hungarian([[2, 1], [1, 2]])
    assert list(a.perm) == [1, 0] and a.cost == 2


@pytest.mark.parametrize("c", range(1, 8))
def test_hungarian_matches_exhaustive(rng, c):
    for _ in range(5):
        cost = rng.integers(0, 20, (c, c)).astype(float)
        a = hungarian(cost)
        assert sorted(a.perm) == list(range(c))
        assert a.cost == cost[np.arange(c), a.perm].sum()
        assert a.cost == brute_force_assignment(cost)


def test_hungarian_non_square():
    with pytest.raises(ValueError):
        hungarian(np.ones((2, 3)))


# ------------------------------------------------------------------ components

def bfs_components(W, tol=0.0):
    n = len(W)
    seen = -np.ones(n, dtype=int)
    count = 0
    for s in range(n):
        if seen[s] >= 0:
            continue
        seen[s] = count
        queue = deque([s])
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(W[i] > tol):
                if seen[j] < 0:
                    seen[j] = count
                    queue.append(j)
        count += 1
    return count


def test_components_two_cliques():
    W = np.zeros((5, 5))
    W[:2, :2] = 1
    W[2:, 2:] = 1
    assert connected_components(W)[0] == 2


def test_components_empty_graph():
    assert connected_components(np.zeros((4, 4)))[0] == 4


def test_components_path():
    W = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    assert connected_components(W)[0] == 1


def test_components_default_tolerance_ignores_tiny_entries():
    W = np.zeros((4, 4))
    W[:2, :2] = 1
    W[2:, 2:] = 1
    W[0, 3] = W[3, 0] = 1e-12
    assert connected_components(W)[0] == 2
    assert connected_components(W, tol=0.0)[0] == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 8), min_size=1, max_size=5), st.integers(0, 2**31 - 1),
       st.floats(0.2, 1.0))
def test_zero_eigen_multiplicity_equals_component_count(sizes, seed, density):
    rng = np.random.default_rng(seed)
    W, _ = random_block_graph(rng, sizes, density)
    zeros = int(np.sum(np.linalg.eigvalsh(laplacian(W)) < 1e-8))
    count, _ = connected_components(W, 0.0)
    assert zeros == count == bfs_components(W) == len(sizes)
