"""Synthetic data sets with known ground truth."""
import numpy as np


def make_blobs(n=150, centers=3, separation=8.0, std=1.0, dim=2, seed=0):
    """Isotropic Gaussian blobs with equal sizes (up to rounding).

    Centers sit on a circle of radius ``separation * std / (2 sin(pi / k))``
    so neighbouring centers are exactly ``separation`` standard deviations
    apart.

    Returns
    -------
    X : ndarray, shape (n, dim)
    y : ndarray of int, shape (n,)
    """
    rng = np.random.default_rng(seed)
    k = centers
    radius = separation * std / (2.0 * np.sin(np.pi / k)) if k > 1 else 0.0
    angles = 2.0 * np.pi * np.arange(k) / k
    mu = np.zeros((k, dim))
    mu[:, 0] = radius * np.cos(angles)
    if dim > 1:
        mu[:, 1] = radius * np.sin(angles)
    y = np.arange(n) % k
    X = mu[y] + std * rng.standard_normal((n, dim))
    return X, y


def make_moons(n=200, noise=0.05, seed=0):
    """Two interleaving half circles with Gaussian noise of std `noise`."""
    rng = np.random.default_rng(seed)
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0.0, np.pi, n_out)
    t_in = np.linspace(0.0, np.pi, n_in)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)])
    X = np.vstack([outer, inner]) + noise * rng.standard_normal((n, 2))
    y = np.concatenate([np.zeros(n_out, dtype=int), np.ones(n_in, dtype=int)])
    return X, y
