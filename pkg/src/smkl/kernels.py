"""Base kernel construction and the fixed kernel recipes."""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_io import DataMatrix, load_dense_matrix, write_dense_matrix


class DegenerateDataError(ValueError):
    """All samples coincide, or a kernel is identically zero."""


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    kind: str

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v = (v + v.T) / 2.0
        if not np.all(np.isfinite(v)):
            raise DegenerateDataError(f"kernel {self.kind} has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class KernelBank:
    kernels: tuple
    recipe_name: str

    def __post_init__(self):
        ks = tuple(self.kernels)
        if not ks:
            raise ValueError("kernel bank is empty")
        n = ks[0].values.shape[0]
        if any(k.values.shape != (n, n) for k in ks):
            raise ValueError("bank members differ in size")
        object.__setattr__(self, "kernels", ks)

    def __len__(self):
        return len(self.kernels)

    def __getitem__(self, i):
        return self.kernels[i]

    @property
    def n(self):
        return self.kernels[0].values.shape[0]

    @property
    def kinds(self):
        return [k.kind for k in self.kernels]

    def stack(self):
        """Bank as an array of shape (r, n, n)."""
        return np.stack([k.values for k in self.kernels])


def _as_array(X):
    return X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=float)


def pairwise_sq_dists(X):
    """Squared Euclidean distances between rows and their maximum.

    Returns
    -------
    D2 : ndarray, shape (n, n)
    dmax2 : float
    """
    X = _as_array(X)
    sq = np.einsum("ij,ij->i", X, X)
    D2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    D2 = np.maximum((D2 + D2.T) / 2.0, 0.0)
    np.fill_diagonal(D2, 0.0)
    return D2, float(D2.max())


def gaussian_kernel(D2, t, dmax2):
    """``exp(-D2 / (t * dmax2))``."""
    if not dmax2 > 0:
        raise DegenerateDataError("all samples are identical (max distance is 0)")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    return KernelMatrix(np.exp(-np.asarray(D2) / (t * dmax2)), f"gaussian(t={t:g})")


def linear_kernel(X):
    X = _as_array(X)
    return KernelMatrix(X @ X.T, "linear")


def polynomial_kernel(X, a, b):
    """``(a + <x, y>) ** b``."""
    X = _as_array(X)
    return KernelMatrix((a + X @ X.T) ** b, f"polynomial(a={a:g},b={b:d})")


def rescale_kernel(H):
    """Divide by the largest absolute entry so the result lies in [-1, 1]."""
    scale = np.abs(H.values).max()
    if scale == 0:
        raise DegenerateDataError(f"kernel {H.kind} is identically zero")
    if scale == 1.0:
        return H
    return KernelMatrix(H.values / scale, H.kind)


RECIPES = {
    "clustering12": (
        [("gaussian", t) for t in (0.01, 0.05, 0.1, 1, 10, 50, 100)]
        + [("linear",)]
        + [("polynomial", a, b) for a in (0, 1) for b in (2, 4)]
    ),
    "ssl7": (
        [("gaussian", t) for t in (0.1, 1, 10, 100)]
        + [("linear",)]
        + [("polynomial", a, 2) for a in (0, 1)]
    ),
}


def _build_one(X, D2, dmax2, item):
    if item[0] == "gaussian":
        return gaussian_kernel(D2, item[1], dmax2)
    if item[0] == "linear":
        return linear_kernel(X)
    if item[0] == "polynomial":
        return polynomial_kernel(X, item[1], item[2])
    raise ValueError(f"unknown kernel spec {item!r}")


def build_bank(X, recipe="clustering12"):
    """Build a rescaled kernel bank from a data matrix.

    Parameters
    ----------
    X : DataMatrix or ndarray, shape (n, d)
    recipe : str or list of tuple
        ``"clustering12"``, ``"ssl7"``, or a list of kernel specs such as
        ``[("gaussian", 1.0), ("linear",), ("polynomial", 1, 2)]``.
    """
    X = _as_array(X)
    if isinstance(recipe, str):
        if recipe not in RECIPES:
            raise ValueError(f"unknown recipe {recipe!r}; choose from {sorted(RECIPES)}")
        items, name = RECIPES[recipe], recipe
    else:
        items, name = list(recipe), "custom"
    D2, dmax2 = pairwise_sq_dists(X)
    kernels = [rescale_kernel(_build_one(X, D2, dmax2, item)) for item in items]
    return KernelBank(tuple(kernels), name)


MANIFEST = "manifest.json"


def save_bank(bank, out_dir):
    """Write each member as ``H_XX.csv`` plus a manifest of kinds in order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, k in enumerate(bank.kernels):
        name = f"H_{i:02d}.csv"
        write_dense_matrix(out / name, k.values)
        files.append({"file": name, "kind": k.kind})
    (out / MANIFEST).write_text(
        json.dumps({"recipe": bank.recipe_name, "kernels": files}, indent=2) + "\n")


def load_bank(in_dir):
    src = Path(in_dir)
    manifest = json.loads((src / MANIFEST).read_text())
    kernels = [KernelMatrix(_load_square(src / e["file"]), e["kind"])
               for e in manifest["kernels"]]
    return KernelBank(tuple(kernels), manifest["recipe"])


def _load_square(path):
    values = load_dense_matrix(path).values
    if values.shape[0] != values.shape[1]:
        raise ValueError(f"{path}: kernel is not square")
    return values
