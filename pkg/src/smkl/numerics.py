"""Dense numeric building blocks used by the solver.

Symmetric eigenpairs, SPD solves, k-means with farthest-point seeding,
optimal assignment and graph connected components.
"""
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky factorization fails."""


class DegenerateClusteringError(ValueError):
    """Raised when there are fewer distinct points than clusters."""


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class Assignment:
    perm: np.ndarray
    cost: float


def symmetrize(M):
    M = np.asarray(M, dtype=float)
    return (M + M.T) / 2.0


def smallest_eigenpairs(M, c):
    """Return the `c` algebraically smallest eigenpairs of ``(M + M.T) / 2``.

    Parameters
    ----------
    M : ndarray, shape (n, n)
    c : int
        Number of pairs, ``1 <= c <= n``.

    Returns
    -------
    EigenPairs
        Values ascending, vectors as orthonormal columns.
    """
    M = symmetrize(M)
    n = M.shape[0]
    if not 1 <= c <= n:
        raise ValueError(f"need 1 <= c <= n, got c={c}, n={n}")
    values, vectors = linalg.eigh(M, subset_by_index=[0, c - 1])
    return EigenPairs(values, vectors)


class SPDFactor:
    """Cholesky factor of a symmetric positive-definite matrix.

    The factor is computed once; `solve` is read-only and can be called
    from several threads.
    """

    def __init__(self, A):
        A = symmetrize(A)
        try:
            self._cho = linalg.cho_factor(A, lower=True, check_finite=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc
        self.n = A.shape[0]

    def solve(self, B):
        return linalg.cho_solve(self._cho, B)


def solve_spd(A, B):
    """Solve ``A X = B`` for symmetric positive-definite `A`."""
    return SPDFactor(A).solve(np.asarray(B, dtype=float))


def _normalize_rows(X):
    norms = np.linalg.norm(X, axis=1)
    out = X.copy()
    nz = norms > 0
    out[nz] /= norms[nz, None]
    return out


def _farthest_point_seeds(X, c, rng):
    """Weighted farthest-point seeding (k-means++ style D^2 sampling)."""
    n = X.shape[0]
    centers = np.empty((c, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for k in range(1, c):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers[k] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[k]) ** 2, axis=1))
    return centers


def _sq_dists(X, C):
    d2 = (X ** 2).sum(1)[:, None] - 2.0 * X @ C.T + (C ** 2).sum(1)[None, :]
    return np.maximum(d2, 0.0)


def lloyd(X, centers, max_iter=300):
    """Run Lloyd iterations from `centers`.

    Returns ``(labels, centers, inertia_history)``; the history holds the
    within-cluster sum of squares after each assignment step.
    """
    c = centers.shape[0]
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(X, centers)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(X)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(c):
            members = X[labels == k]
            # empty clusters keep their previous center
            if len(members):
                centers[k] = members.mean(axis=0)
    return labels, centers, history


def kmeans(rows, c, restarts=10, seed=0, normalize=True):
    """Best-of-restarts k-means on the rows of a matrix.

    Rows are scaled to unit length first (zero rows are left alone) unless
    ``normalize=False``.

    Returns
    -------
    labels : ndarray of int, shape (n,)
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= c <= n:
        raise ValueError(f"need 1 <= c <= n, got c={c}, n={n}")
    if normalize:
        X = _normalize_rows(X)
    if c == 1:
        return np.zeros(n, dtype=int)
    if len(np.unique(X, axis=0)) < c:
        raise DegenerateClusteringError(
            f"only {len(np.unique(X, axis=0))} distinct rows for {c} clusters")
    rng = np.random.default_rng(seed)
    best_labels, best_obj = None, np.inf
    for _ in range(restarts):
        centers = _farthest_point_seeds(X, c, rng)
        labels, _, history = lloyd(X, centers)
        if history[-1] < best_obj:
            best_obj, best_labels = history[-1], labels
    return _canonical_labels(best_labels)


def _canonical_labels(labels):
    # relabel by order of first appearance so output does not depend on
    # which center happened to be seeded first
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(labels.max() + 1, dtype=int)
    remap[np.unique(labels)[order]] = np.arange(len(order))
    return remap[labels]


def hungarian(cost):
    """Minimum-cost perfect matching on a square cost matrix.

    ``perm[i]`` is the column matched to row ``i``.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=int)
    perm[rows] = cols
    return Assignment(perm, float(cost[rows, cols].sum()))


def connected_components(W, tol=None):
    """Connected components of the graph with an edge wherever ``W > tol``.

    `tol` defaults to ``1e-8 * max(W)``.

    Returns
    -------
    count : int
    labels : ndarray of int, shape (n,)
    """
    W = np.asarray(W, dtype=float)
    if tol is None:
        tol = 1e-8 * W.max() if W.size else 0.0
    adj = csr_matrix(W > tol)
    count, labels = _cc(adj, directed=False)
    return int(count), labels


def laplacian(W):
    """Unnormalized Laplacian ``D - W`` with D the row sums of W."""
    return np.diag(W.sum(axis=1)) - W
