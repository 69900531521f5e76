"""Loading data matrices, label files and solver configuration."""
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

UNLABELED = -1


class DataFormatError(ValueError):
    """Malformed input file."""


@dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray
    row_ids: Optional[tuple] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataFormatError(f"data matrix must be 2-D, got {v.ndim}-D")
        if v.shape[0] < 2 or v.shape[1] < 1:
            raise DataFormatError(f"need n >= 2 and d >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataFormatError("data matrix has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelVector:
    labels: np.ndarray
    num_classes: int

    @classmethod
    def from_array(cls, labels):
        y = np.asarray(labels, dtype=int)
        if y.ndim != 1:
            raise DataFormatError("labels must be a vector")
        if np.any(y < UNLABELED):
            raise DataFormatError(f"label below {UNLABELED}")
        if np.all(y == UNLABELED):
            raise DataFormatError("every sample is unlabeled")
        y.setflags(write=False)
        return cls(y, int(y.max()) + 1)

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class LabelMask:
    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray

    @property
    def n(self):
        return len(self.labeled_idx) + len(self.unlabeled_idx)


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    c: int = 2
    max_iter: int = 200
    rel_tol: float = 1e-5
    seed: int = 0
    adaptive_alpha: bool = True
    kmeans_restarts: int = 10
    epsilon_w: float = 1e-12
    ridge: float = 1e-8
    psd_kernel: bool = True
    exact_s: bool = True

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "c", "max_iter", "rel_tol",
                     "kmeans_restarts", "epsilon_w", "ridge"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.rel_tol >= 1:
            raise ValueError(f"rel_tol must be < 1, got {self.rel_tol}")

    def with_(self, **changes):
        return replace(self, **changes)


_CONFIG_TYPES = {f.name: f.type for f in fields(SolverConfig)}


def parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def coerce_config_value(key, text):
    """Convert the string `text` to the type of SolverConfig field `key`."""
    if key not in _CONFIG_TYPES:
        raise KeyError(f"unknown config key {key!r}")
    kind = _CONFIG_TYPES[key]
    if kind in (bool, "bool"):
        return parse_bool(text)
    if kind in (int, "int"):
        value = float(text)
        if value != int(value):
            raise ValueError(f"{key} must be an integer, got {text!r}")
        return int(value)
    return float(text)


def read_key_values(path):
    """Read ``key=value`` lines, skipping blanks and ``#`` comments.

    Returns a list of ``(lineno, key, value)`` in file order.
    """
    items = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        items.append((lineno, key.strip(), value.strip()))
    return items


def config_from_mapping(mapping, base=None):
    base = base or SolverConfig()
    values = {k: coerce_config_value(k, v) if isinstance(v, str) else v
              for k, v in mapping.items()}
    return replace(base, **values)


def load_config(path):
    """Load a SolverConfig from a ``key=value`` file; absent keys take defaults."""
    mapping = {}
    for lineno, key, value in read_key_values(path):
        if key not in _CONFIG_TYPES:
            raise KeyError(f"{path}:{lineno}: unknown config key {key!r}")
        mapping[key] = value
    return config_from_mapping(mapping)


def load_dense_matrix(path, delimiter=","):
    """Read a delimiter-separated numeric text file, one sample per line."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(delimiter)
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataFormatError(
                    f"{path}: ragged rows, line {lineno} has {len(cells)} "
                    f"columns, expected {width}")
            row = []
            for col, cell in enumerate(cells, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"{path}: non-numeric cell {cell.strip()!r} at row {lineno}, "
                        f"column {col}") from None
                if not np.isfinite(value):
                    raise DataFormatError(
                        f"{path}: non-finite cell at row {lineno}, column {col}")
                row.append(value)
            rows.append(row)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return DataMatrix(np.array(rows, dtype=float))


def write_dense_matrix(path, M, delimiter=","):
    """Write a matrix with round-trip exact float formatting."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    with open(path, "w") as fh:
        for row in M:
            fh.write(delimiter.join(repr(float(v)) for v in row))
            fh.write("\n")


def load_labels(path, n):
    """Read one integer label per line; -1 marks an unlabeled sample."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if len(lines) != n:
        raise DataFormatError(f"{path}: expected {n} labels, found {len(lines)}")
    try:
        labels = [int(ln) for ln in lines]
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    return LabelVector.from_array(labels)


def write_labels(path, labels):
    with open(path, "w") as fh:
        for y in np.asarray(labels, dtype=int):
            fh.write(f"{y}\n")


def split_labeled(labels, fraction, seed):
    """Stratified random split into labeled and unlabeled indices.

    Each class gets ``round(fraction * n_k)`` labeled samples, at least
    one; the total is then nudged toward ``round(fraction * n)`` by
    adding or removing samples from the largest classes.
    """
    y = labels.labels if isinstance(labels, LabelVector) else np.asarray(labels)
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    classes = np.unique(y[y != UNLABELED])
    n = len(y)
    target = int(round(fraction * n))
    if target < len(classes):
        raise ValueError(
            f"fraction {fraction} gives {target} labeled slots for {len(classes)} classes")
    rng = np.random.default_rng(seed)
    pools = {k: rng.permutation(np.flatnonzero(y == k)) for k in classes}
    quota = {k: max(1, int(round(fraction * len(pools[k])))) for k in classes}

    by_size = sorted(classes, key=lambda k: (-len(pools[k]), k))
    total = sum(quota.values())
    moved = True
    while total != target and moved:
        moved = False
        for k in by_size:
            if total > target and quota[k] > 1:
                quota[k] -= 1
                total -= 1
                moved = True
            elif total < target and quota[k] < len(pools[k]):
                quota[k] += 1
                total += 1
                moved = True
            if total == target:
                break

    labeled = np.sort(np.concatenate([pools[k][:quota[k]] for k in classes]))
    unlabeled = np.setdiff1d(np.arange(n), labeled)
    return LabelMask(labeled, unlabeled)
