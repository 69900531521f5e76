"""Alternating solver for self-weighted multiple kernel graph learning.

The model jointly learns a nonnegative affinity graph ``S``, a consensus
kernel ``K`` that every base kernel is treated as a perturbation of, and an
indicator matrix ``P`` (spectral embedding for clustering, label scores for
semi-supervised classification)::

    Tr(K - 2KS + S^T K S) + gamma ||S||_F^2 + alpha Tr(P^T L P)
        + beta sum_i w_i ||H_i - K||_F^2

with ``w_i = 1 / (2 ||H_i - K||_F)`` refreshed after every kernel step.
Two baselines share the same machinery: KGL (a single fixed kernel) and
PMKL (``K = sum_i theta_i H_i`` with ``sum_i sqrt(theta_i) = 1``).
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import linalg

from . import numerics
from .data_io import LabelVector, UNLABELED, read_key_values, write_dense_matrix
from .kernels import KernelBank, KernelMatrix

log = logging.getLogger(__name__)

RIDGE_ESCALATIONS = 3


class IllConditionedKernelError(np.linalg.LinAlgError):
    """``gamma * I + K`` could not be factorized even after ridge shifts."""


class DisconnectedUnlabeledError(np.linalg.LinAlgError):
    """The unlabeled block of the Laplacian is singular."""


class DegenerateObjectiveError(ValueError):
    """Every PMKL kernel cost is nonpositive."""


@dataclass
class AffinityGraph:
    S: np.ndarray
    W: np.ndarray
    L: np.ndarray

    @classmethod
    def from_S(cls, S):
        W = (S + S.T) / 2.0
        return cls(S, W, numerics.laplacian(W))


@dataclass
class FitResult:
    S: np.ndarray
    K: np.ndarray
    w: np.ndarray
    P: np.ndarray
    labels: np.ndarray
    objective_trace: list
    iterations: int
    converged: bool
    alpha_final: float
    method: str = "smkl"
    mode: str = "clustering"
    theta: Optional[np.ndarray] = None
    history: dict = field(default_factory=dict, repr=False)

    @property
    def graph(self):
        return AffinityGraph.from_S(self.S)


# ---------------------------------------------------------------- block steps

def pairwise_row_dists(P):
    """``G[i, j] = ||P[i] - P[j]||^2``, symmetric with zero diagonal."""
    sq = np.einsum("ij,ij->i", P, P)
    G = sq[:, None] + sq[None, :] - 2.0 * P @ P.T
    G = np.maximum((G + G.T) / 2.0, 0.0)
    np.fill_diagonal(G, 0.0)
    return G


def factor_shifted_kernel(K, gamma):
    """Cholesky factor of ``gamma I + K``, escalating a ridge on failure."""
    n = K.shape[0]
    A = numerics.symmetrize(K) + gamma * np.eye(n)
    try:
        return numerics.SPDFactor(A)
    except numerics.NotPositiveDefiniteError:
        pass
    shift = 1e-6 * np.linalg.norm(A)
    for _ in range(RIDGE_ESCALATIONS):
        try:
            log.debug("gamma*I + K not PD; retrying with ridge %.3g", shift)
            return numerics.SPDFactor(A + shift * np.eye(n))
        except numerics.NotPositiveDefiniteError:
            shift *= 10.0
    raise IllConditionedKernelError(
        f"gamma*I + K is not positive definite (gamma={gamma}) after ridge escalation")


def solve_S_columns(K, G, alpha, gamma, workers=1):
    """Closed-form column-wise minimizer before the nonnegativity clamp.

    Column ``i`` is ``(gamma I + K)^{-1} (K[:, i] - alpha G[:, i] / 4)``.
    Columns are independent; with ``workers > 1`` they are solved in
    parallel chunks against one shared factorization.
    """
    K = numerics.symmetrize(K)
    factor = factor_shifted_kernel(K, gamma)
    rhs = K - (alpha / 4.0) * G
    if workers <= 1:
        return factor.solve(rhs)
    chunks = np.array_split(np.arange(K.shape[0]), workers)
    Z = np.empty_like(rhs)
    with ThreadPoolExecutor(workers) as pool:
        for idx, block in zip(chunks, pool.map(lambda ix: factor.solve(rhs[:, ix]), chunks)):
            Z[:, idx] = block
    return Z


def _column_costs(A, B, X):
    # per-column value of x^T A x - 2 b^T x
    return np.einsum("ij,ij->j", X, A @ X - 2.0 * B)


def nonnegative_column(A, b, x0, tol=1e-12):
    """Minimize ``x^T A x - 2 b^T x`` over ``x >= 0`` by an active-set method.

    Lawson-Hanson iterations in quadratic form, started from the feasible
    point `x0` with its support as the initial passive set. Every step
    moves along a segment towards a subspace minimizer, so the value never
    rises above the value at `x0`.
    """
    n = len(b)
    x = np.maximum(x0, 0.0)
    passive = x > 0
    scale = max(1.0, np.abs(b).max())
    for _ in range(3 * n + 10):
        x, passive = _settle(A, b, x, passive)
        grad = b - A @ x
        grad[passive] = -np.inf
        j = int(np.argmax(grad))
        if grad[j] <= tol * scale:
            break
        passive[j] = True
    return x


def _settle(A, b, x, passive):
    # inner loop: walk to the subspace minimizer on `passive`, dropping
    # coordinates that would turn negative
    while True:
        idx = np.flatnonzero(passive)
        z = np.zeros_like(x)
        if idx.size:
            z[idx] = linalg.solve(A[np.ix_(idx, idx)], b[idx], assume_a="pos")
        if np.all(z[idx] > 0):
            return z, passive
        neg = idx[z[idx] <= 0]
        step = np.min(x[neg] / (x[neg] - z[neg]))
        x = x + step * (z - x)
        passive = passive & (x > 1e-15 * max(1.0, x.max()))
        x[~passive] = 0.0


def _fista(A, B, X, iters):
    # monotone accelerated projected gradient on all columns at once
    lip = 2.0 * np.linalg.eigvalsh(A)[-1]
    fX = _column_costs(A, B, X)
    Y, t = X.copy(), 1.0
    for _ in range(iters):
        Z = np.maximum(Y - 2.0 * (A @ Y - B) / lip, 0.0)
        fZ = _column_costs(A, B, Z)
        better = fZ <= fX
        X_new = np.where(better, Z, X)
        t_new = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        Y = X_new + (t / t_new) * (Z - X_new) + ((t - 1.0) / t_new) * (X_new - X)
        X, fX, t = X_new, np.where(better, fZ, fX), t_new
    return X


def _kkt_solution(A, b, guess, tol=1e-12):
    # exact minimizer on the guessed support if it satisfies the optimality
    # conditions of the full problem, else None
    idx = np.flatnonzero(guess)
    x = np.zeros(len(b))
    if idx.size:
        try:
            x[idx] = linalg.solve(A[np.ix_(idx, idx)], b[idx], assume_a="pos")
        except np.linalg.LinAlgError:
            return None
        if np.any(x[idx] <= 0):
            return None
    grad = b - A @ x
    grad[idx] = -np.inf
    if grad.max() > tol * max(1.0, np.abs(b).max()):
        return None
    return x


def nonnegative_columns(A, B, X0, workers=1, warm_iters=60):
    """Column-wise nonnegative quadratic minimization.

    A short vectorized accelerated projected-gradient pass estimates each
    column's support; the exact minimizer on that support is accepted when
    it passes the optimality check, otherwise the active-set method takes
    over from the projected-gradient point. Columns are independent.
    """
    Xw = _fista(A, B, np.maximum(X0, 0.0), warm_iters)
    thresh = 1e-6 * max(1.0, Xw.max())

    def one(j):
        x = _kkt_solution(A, B[:, j], Xw[:, j] > thresh)
        if x is None:
            x = nonnegative_column(A, B[:, j], Xw[:, j])
        return x

    cols = range(B.shape[1])
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(one, cols))
    else:
        out = [one(j) for j in cols]
    return np.column_stack(out)


def update_S(K, G, alpha, gamma, S_prev=None, exact=True, workers=1):
    """S step over nonnegative matrices.

    With ``exact=True`` each column is the minimizer of its quadratic over
    the nonnegative orthant, warm-started at `S_prev` (descent from
    `S_prev` is guaranteed). With ``exact=False`` the closed-form column is
    clamped at zero. Both coincide whenever the closed form is already
    nonnegative.
    """
    Z = solve_S_columns(K, G, alpha, gamma, workers)
    if not exact or np.all(Z >= 0):
        return AffinityGraph.from_S(np.maximum(Z, 0.0))
    n = K.shape[0]
    A = numerics.symmetrize(K) + gamma * np.eye(n)
    B = K - (alpha / 4.0) * G
    start = np.maximum(Z, 0.0)
    if S_prev is not None:
        # begin from whichever feasible point is better column by column
        prev_better = _column_costs(A, B, S_prev) < _column_costs(A, B, start)
        start = np.where(prev_better, S_prev, start)
    return AffinityGraph.from_S(nonnegative_columns(A, B, start, workers))


def update_K(S, bank, w, beta):
    """Consensus kernel step, symmetrized afterwards.

    ``K = (2 S^T - S S^T - I + 2 beta sum_i w_i H_i) / (2 beta sum_i w_i)``
    """
    S = S.S if isinstance(S, AffinityGraph) else S
    H = _stack(bank)
    w = np.asarray(w, dtype=float)
    n = S.shape[0]
    num = 2.0 * S.T - S @ S.T - np.eye(n) + 2.0 * beta * np.tensordot(w, H, axes=1)
    return numerics.symmetrize(num / (2.0 * beta * w.sum()))


def project_psd(K):
    """Nearest positive semi-definite matrix in Frobenius norm."""
    vals, vecs = np.linalg.eigh(numerics.symmetrize(K))
    if vals[0] >= 0:
        return numerics.symmetrize(K)
    vals = np.maximum(vals, 0.0)
    return numerics.symmetrize((vecs * vals) @ vecs.T)


def kernel_residuals(bank, K):
    H = _stack(bank)
    return np.sqrt(((H - K[None]) ** 2).sum(axis=(1, 2)))


def update_w(bank, K, epsilon_w=1e-12):
    """Self-weights ``1 / (2 max(||H_i - K||_F, epsilon_w))``."""
    return 1.0 / (2.0 * np.maximum(kernel_residuals(bank, K), epsilon_w))


def update_P_clustering(L, c):
    """The `c` eigenvectors of `L` with the smallest eigenvalues."""
    return numerics.smallest_eigenpairs(L, c).vectors


def one_hot(labels, c):
    Y = np.zeros((len(labels), c))
    Y[np.arange(len(labels)), labels] = 1.0
    return Y


def update_P_ssl(L, Y_l, mask, ridge=1e-8):
    """Harmonic label scores with the labeled rows pinned to `Y_l`.

    Solves ``(L_uu + ridge I) P_u = -L_ul Y_l``. Rows of the returned
    matrix follow the original sample order.
    """
    lab, unl = mask.labeled_idx, mask.unlabeled_idx
    n, c = L.shape[0], Y_l.shape[1]
    P = np.zeros((n, c))
    P[lab] = Y_l
    if len(unl) == 0:
        return P
    Luu = L[np.ix_(unl, unl)] + ridge * np.eye(len(unl))
    rhs = -L[np.ix_(unl, lab)] @ Y_l
    try:
        P[unl] = numerics.solve_spd(Luu, rhs)
    except numerics.NotPositiveDefiniteError as exc:
        raise DisconnectedUnlabeledError(
            "unlabeled block of the Laplacian is singular; some unlabeled "
            "component touches no labeled sample") from exc
    return P


def decide_labels(P):
    """Row-wise argmax; ties go to the lowest class index."""
    return np.argmax(P, axis=1)


def self_expression_cost(K, S):
    """``Tr(K - 2 K S + S^T K S)``."""
    return float(np.trace(K) - 2.0 * np.sum(K * S.T) + np.sum(S * (K @ S)))


def objective(S, K, P, w=None, bank=None, alpha=1.0, beta=1.0, gamma=1.0):
    """Full objective value; the kernel-fidelity term is skipped when `bank` is None."""
    S = S.S if isinstance(S, AffinityGraph) else S
    L = AffinityGraph.from_S(S).L
    value = (self_expression_cost(K, S) + gamma * float(np.sum(S * S))
             + alpha * float(np.trace(P.T @ L @ P)))
    if bank is not None:
        value += beta * float(np.dot(w, kernel_residuals(bank, K) ** 2))
    return value


def pmkl_costs(bank, S):
    """``f_i = Tr(H_i - 2 H_i S + S^T H_i S)`` for each base kernel."""
    S = S.S if isinstance(S, AffinityGraph) else S
    return np.array([self_expression_cost(H, S) for H in _stack(bank)])


def pmkl_theta_from_costs(f):
    """Minimize ``sum theta_i f_i`` subject to ``sum sqrt(theta_i) = 1``.

    With ``u_i = sqrt(theta_i)`` the problem is a weighted least-norm
    problem on the simplex; the minimizer is ``u_i ∝ 1 / f_i``.
    """
    f = np.asarray(f, dtype=float)
    if np.all(f <= 0):
        raise DegenerateObjectiveError("all PMKL kernel costs are nonpositive")
    inv = 1.0 / np.maximum(f, 1e-12)
    u = inv / inv.sum()
    return u ** 2


def pmkl_update_theta(bank, S):
    return pmkl_theta_from_costs(pmkl_costs(bank, S))


def _stack(bank):
    if isinstance(bank, KernelBank):
        return bank.stack()
    if isinstance(bank, KernelMatrix):
        return bank.values[None]
    H = np.asarray(bank, dtype=float)
    return H[None] if H.ndim == 2 else H


# ---------------------------------------------------------------- driver

def random_affinity(n, seed):
    rng = np.random.default_rng(seed)
    S = rng.random((n, n))
    return S / S.sum(axis=0, keepdims=True)


def count_zero_eigenvalues(L, c):
    """How many of the c+1 smallest eigenvalues fall below ``1e-8 ||L||_F``."""
    k = min(c + 1, L.shape[0])
    ev = numerics.smallest_eigenpairs(L, k)
    thr = 1e-8 * np.linalg.norm(L)
    return int(np.sum(ev.values < thr)), ev


def _extract_cluster_labels(S, P, cfg):
    W = (S + S.T) / 2.0
    count, comp = numerics.connected_components(W)
    if count == cfg.c:
        return numerics._canonical_labels(comp)
    return numerics.kmeans(P, cfg.c, restarts=cfg.kmeans_restarts, seed=cfg.seed)


def _alternate(H, cfg, method, mode, Y=None, mask=None, freeze_weights=False,
               workers=1, callback=None):
    n = H.shape[1]
    r = H.shape[0]
    alpha, beta, gamma = cfg.alpha, cfg.beta, cfg.gamma
    adaptive = cfg.adaptive_alpha and mode == "clustering"

    if method == "pmkl":
        theta = np.full(r, 1.0 / r ** 2)
        K = np.tensordot(theta, H, axes=1)
    else:
        theta = None
        K = H.mean(axis=0)
    w = update_w(H, K, cfg.epsilon_w) if method == "smkl" else np.ones(r)

    if mode == "ssl":
        c = Y.num_classes
        Y_l = one_hot(Y.labels[mask.labeled_idx], c)
    else:
        c = cfg.c

    def p_step(graph):
        if mode == "ssl":
            return update_P_ssl(graph.L, Y_l, mask, cfg.ridge), None
        if adaptive:
            zeros, ev = count_zero_eigenvalues(graph.L, c)
            return ev.vectors[:, :c], zeros
        return update_P_clustering(graph.L, c), None

    graph = AffinityGraph.from_S(random_affinity(n, cfg.seed))
    P, _ = p_step(graph)

    trace, alphas = [], []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        G = pairwise_row_dists(P)
        graph = update_S(K, G, alpha, gamma, graph.S, cfg.exact_s, workers)
        if method == "smkl":
            K = update_K(graph.S, H, w, beta)
            if cfg.psd_kernel:
                K = project_psd(K)
        elif method == "pmkl":
            theta = pmkl_update_theta(H, graph.S)
            K = np.tensordot(theta, H, axes=1)
        P, zeros = p_step(graph)

        fidelity = H if method == "smkl" else None
        value = objective(graph.S, K, P, w, fidelity, alpha, beta, gamma)
        trace.append(value)
        alphas.append(alpha)
        if callback is not None:
            callback(it, graph, K, P, theta if method == "pmkl" else w, alpha, value)

        if method == "smkl" and not freeze_weights:
            w = update_w(H, K, cfg.epsilon_w)

        alpha_changed = False
        if adaptive and zeros is not None:
            if zeros < c:
                alpha, alpha_changed = 2.0 * alpha, True
            elif zeros > c:
                alpha, alpha_changed = alpha / 2.0, True

        if len(trace) > 1 and not alpha_changed and alphas[-1] == alphas[-2]:
            prev = trace[-2]
            if abs(value - prev) / max(abs(prev), 1.0) < cfg.rel_tol:
                converged = True
                break

    if mode == "ssl":
        labels = decide_labels(P)
    else:
        labels = _extract_cluster_labels(graph.S, P, cfg)

    return FitResult(
        S=graph.S, K=K, w=theta if method == "pmkl" else w, P=P, labels=labels,
        objective_trace=trace, iterations=it, converged=converged,
        alpha_final=alpha, method=method, mode=mode, theta=theta,
        history={"alpha": alphas},
    )


def _check_clustering(bank, cfg):
    if cfg.c < 2:
        raise ValueError(f"clustering needs c >= 2, got {cfg.c}")
    if cfg.c > bank.shape[1]:
        raise ValueError(f"c={cfg.c} exceeds sample count {bank.shape[1]}")


def fit_clustering(bank, cfg, freeze_weights=False, workers=1, callback=None):
    """Cluster with the self-weighted multiple kernel model.

    Parameters
    ----------
    bank : KernelBank
    cfg : SolverConfig
        ``cfg.c`` is the number of clusters.
    freeze_weights : bool
        Keep the kernel weights at their initial values instead of
        refreshing them after each kernel step.
    workers : int
        Threads used for the column-wise S solve.
    callback : callable, optional
        Called as ``callback(it, graph, K, P, w, alpha, objective)`` after
        each iteration (``w`` is theta for PMKL).

    Returns
    -------
    FitResult
    """
    H = _stack(bank)
    _check_clustering(H, cfg)
    return _alternate(H, cfg, "smkl", "clustering", freeze_weights=freeze_weights,
                      workers=workers, callback=callback)


def _check_ssl(Y, mask, n):
    if len(Y) != n or mask.n != n:
        raise ValueError("labels, mask and kernels disagree on sample count")
    lab = Y.labels[mask.labeled_idx]
    if np.any(lab == UNLABELED):
        raise ValueError("mask marks an unlabeled sample as labeled")
    missing = set(range(Y.num_classes)) - set(lab.tolist())
    if missing:
        raise ValueError(f"classes {sorted(missing)} have no labeled sample")


def fit_ssl(bank, Y, mask, cfg, freeze_weights=False, workers=1, callback=None):
    """Semi-supervised classification; labeled rows of P stay one-hot.

    `Y` holds the labels of at least the samples in ``mask.labeled_idx``;
    other entries are ignored.
    """
    if not isinstance(Y, LabelVector):
        Y = LabelVector.from_array(Y)
    H = _stack(bank)
    _check_ssl(Y, mask, H.shape[1])
    return _alternate(H, cfg, "smkl", "ssl", Y=Y, mask=mask,
                      freeze_weights=freeze_weights, workers=workers, callback=callback)


def fit_kgl(K, cfg, workers=1, callback=None):
    """Single fixed kernel baseline: only the S and P steps run."""
    H = _stack(K)
    if H.shape[0] != 1:
        raise ValueError("fit_kgl takes a single kernel")
    _check_clustering(H, cfg)
    return _alternate(H, cfg, "kgl", "clustering", workers=workers, callback=callback)


def fit_pmkl(bank, cfg, workers=1, callback=None):
    """Parameterized MKL baseline with ``K = sum_i theta_i H_i``."""
    H = _stack(bank)
    _check_clustering(H, cfg)
    return _alternate(H, cfg, "pmkl", "clustering", workers=workers, callback=callback)


def fit_ssl_kgl(K, Y, mask, cfg):
    """Single-kernel variant of `fit_ssl`."""
    if not isinstance(Y, LabelVector):
        Y = LabelVector.from_array(Y)
    H = _stack(K)
    _check_ssl(Y, mask, H.shape[1])
    return _alternate(H, cfg, "kgl", "ssl", Y=Y, mask=mask)


def fit_ssl_pmkl(bank, Y, mask, cfg):
    if not isinstance(Y, LabelVector):
        Y = LabelVector.from_array(Y)
    H = _stack(bank)
    _check_ssl(Y, mask, H.shape[1])
    return _alternate(H, cfg, "pmkl", "ssl", Y=Y, mask=mask)


# ---------------------------------------------------------------- reports

def _fmt(x):
    return repr(float(x))


def format_fit_report(result):
    """Key-value text summary of a FitResult."""
    lines = [
        f"method={result.method}",
        f"mode={result.mode}",
        f"iterations={result.iterations}",
        f"converged={str(result.converged).lower()}",
        f"alpha_final={_fmt(result.alpha_final)}",
        "objective_trace=" + ",".join(_fmt(v) for v in result.objective_trace),
        ("theta=" if result.method == "pmkl" else "w=")
        + ",".join(_fmt(v) for v in result.w),
        "labels=" + ",".join(str(int(y)) for y in result.labels),
    ]
    return "\n".join(lines) + "\n"


def write_fit_report(result, path, matrices_dir=None):
    with open(path, "w") as fh:
        fh.write(format_fit_report(result))
    if matrices_dir is not None:
        write_dense_matrix(Path(matrices_dir) / "S.csv", result.S)
        write_dense_matrix(Path(matrices_dir) / "K.csv", result.K)


def read_fit_report(path):
    out = {}
    for _, key, value in read_key_values(path):
        out[key] = value
    return out
