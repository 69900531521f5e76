"""Batch experiment runner.

Subcommands::

    smkl run <spec-file>
    smkl kernels <data> <recipe> <out-dir>
    smkl eval <pred-file> <truth-file>

A spec file uses the ``key=value`` format of solver configs, with dotted
keys for nesting::

    data = blobs.csv
    labels = blobs_labels.txt
    mode = clustering            # or ssl
    method = smkl,kgl,pmkl
    recipe = clustering12
    kernel_index = best          # kgl only: an index or "best"
    label_fraction = 0.1,0.3,0.5 # ssl only
    repeats = 20                 # ssl only
    solver.c = 3
    sweep.alpha = 0.1,1,10
    out_dir = results
    workers = 1
"""
import argparse
import csv
import datetime
import io
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import core
from .data_io import (DataFormatError, LabelVector, SolverConfig, UNLABELED,
                      coerce_config_value, load_dense_matrix, load_labels,
                      parse_bool, read_key_values, split_labeled, write_dense_matrix,
                      write_labels)
from .evaluation import evaluate
from .kernels import RECIPES, build_bank, save_bank

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2

SWEEP_AXES = ("alpha", "beta", "gamma")
METHODS = ("smkl", "kgl", "pmkl")
TABLE_COLUMNS = ("method", "kernel", "fraction", "alpha", "beta", "gamma",
                 "acc", "acc_std", "nmi", "nmi_std", "iterations", "converged",
                 "runs", "status", "error", "best")


class SpecError(ValueError):
    """Invalid experiment spec file."""


@dataclass
class ExperimentSpec:
    data_path: Path
    labels_path: Path
    out_dir: Path
    mode: str = "clustering"
    methods: tuple = ("smkl",)
    recipe: Optional[str] = None
    kernel_index: Optional[str] = None
    label_fractions: tuple = (0.1,)
    repeats: int = 20
    sweep: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    delimiter: str = ","
    workers: int = 1
    save_matrices: bool = False

    def __post_init__(self):
        if self.mode not in ("clustering", "ssl"):
            raise SpecError(f"mode must be clustering or ssl, got {self.mode!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise SpecError(f"unknown method(s) {bad}; choose from {METHODS}")
        if self.recipe is None:
            self.recipe = "clustering12" if self.mode == "clustering" else "ssl7"
        if self.recipe not in RECIPES:
            raise SpecError(f"unknown recipe {self.recipe!r}")
        if "kgl" in self.methods:
            if self.kernel_index is None:
                raise SpecError("method kgl needs kernel_index (an integer or 'best')")
            if self.kernel_index != "best":
                try:
                    idx = int(self.kernel_index)
                except ValueError:
                    raise SpecError(f"bad kernel_index {self.kernel_index!r}") from None
                if not 0 <= idx < len(RECIPES[self.recipe]):
                    raise SpecError(f"kernel_index {idx} out of range for {self.recipe}")
        if self.mode == "ssl":
            if not all(0 < f < 1 for f in self.label_fractions):
                raise SpecError("label_fraction values must lie in (0, 1)")
            if self.repeats < 1:
                raise SpecError("repeats must be >= 1")
        if self.workers < 1:
            raise SpecError("workers must be >= 1")


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def load_spec(path):
    """Parse an experiment spec file; relative paths resolve against its folder."""
    path = Path(path)
    base = path.parent
    top, solver, sweep = {}, {}, {}
    try:
        items = read_key_values(path)
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from None
    for lineno, key, value in items:
        try:
            if key.startswith("solver."):
                name = key[len("solver."):]
                solver[name] = coerce_config_value(name, value)
            elif key.startswith("sweep."):
                name = key[len("sweep."):]
                if name not in SWEEP_AXES:
                    raise SpecError(f"cannot sweep {name!r}; axes are {SWEEP_AXES}")
                sweep[name] = _floats(value)
                if not sweep[name]:
                    raise SpecError(f"empty sweep list for {name}")
            else:
                top[key] = value
        except (KeyError, ValueError) as exc:
            raise SpecError(f"{path}:{lineno}: {exc}") from None

    known = {"data", "labels", "out_dir", "mode", "method", "recipe", "kernel_index",
             "label_fraction", "repeats", "delimiter", "workers", "save_matrices"}
    unknown = set(top) - known
    if unknown:
        raise SpecError(f"{path}: unknown key(s) {sorted(unknown)}")
    for required in ("data", "labels"):
        if required not in top:
            raise SpecError(f"{path}: missing required key {required!r}")
    try:
        cfg = SolverConfig(**solver)
        return ExperimentSpec(
            data_path=base / top["data"],
            labels_path=base / top["labels"],
            out_dir=base / top.get("out_dir", "results"),
            mode=top.get("mode", "clustering"),
            methods=tuple(m.strip() for m in top.get("method", "smkl").split(",") if m.strip()),
            recipe=top.get("recipe"),
            kernel_index=top.get("kernel_index"),
            label_fractions=_floats(top.get("label_fraction", "0.1")),
            repeats=int(top.get("repeats", "20")),
            sweep=sweep,
            solver=cfg,
            delimiter=top.get("delimiter", ","),
            workers=int(top.get("workers", "1")),
            save_matrices=parse_bool(top.get("save_matrices", "false")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- points

@dataclass(frozen=True)
class Point:
    method: str
    alpha: float
    beta: float
    gamma: float
    kernel: Optional[int] = None
    fraction: Optional[float] = None


def expand_points(spec, n_kernels):
    grid = [spec.sweep.get(a, (getattr(spec.solver, a),)) for a in SWEEP_AXES]
    fractions = spec.label_fractions if spec.mode == "ssl" else (None,)
    points = []
    for method in spec.methods:
        if method == "kgl":
            kernels = (range(n_kernels) if spec.kernel_index == "best"
                       else [int(spec.kernel_index)])
        else:
            kernels = [None]
        for frac, (a, b, g), k in itertools.product(fractions, itertools.product(*grid), kernels):
            points.append(Point(method, a, b, g, k, frac))
    return points


_CTX = {}


def _set_context(ctx):
    _CTX.clear()
    _CTX.update(ctx)


def _fit_once(point, cfg, bank, Y=None, mask=None):
    if point.kernel is not None:
        kernel = bank[point.kernel]
    if Y is None:
        if point.method == "smkl":
            return core.fit_clustering(bank, cfg)
        if point.method == "pmkl":
            return core.fit_pmkl(bank, cfg)
        return core.fit_kgl(kernel, cfg)
    if point.method == "smkl":
        return core.fit_ssl(bank, Y, mask, cfg)
    if point.method == "pmkl":
        return core.fit_ssl_pmkl(bank, Y, mask, cfg)
    return core.fit_ssl_kgl(kernel, Y, mask, cfg)


def run_point(point):
    """Fit and score one parameter point; never raises."""
    spec, bank, truth = _CTX["spec"], _CTX["bank"], _CTX["truth"]
    cfg = replace(spec.solver, alpha=point.alpha, beta=point.beta, gamma=point.gamma)
    row = {"method": point.method, "kernel": point.kernel, "fraction": point.fraction,
           "alpha": point.alpha, "beta": point.beta, "gamma": point.gamma}
    try:
        if spec.mode == "clustering":
            result = _fit_once(point, cfg, bank)
            rep = evaluate(result.labels, truth)
            row.update(acc=rep.acc, acc_std=0.0, nmi=rep.nmi, nmi_std=0.0,
                       iterations=result.iterations, converged=result.converged, runs=1)
            keep = result
        else:
            Y = LabelVector.from_array(truth)
            accs, nmis, iters, conv = [], [], [], []
            keep = None
            for k in range(spec.repeats):
                mask = split_labeled(Y, point.fraction, spec.solver.seed + k)
                result = _fit_once(point, replace(cfg, seed=spec.solver.seed + k), bank, Y, mask)
                scored = mask.unlabeled_idx[truth[mask.unlabeled_idx] != UNLABELED]
                rep = evaluate(result.labels, truth, scored, mode="ssl")
                accs.append(rep.acc)
                nmis.append(rep.nmi)
                iters.append(result.iterations)
                conv.append(result.converged)
                if keep is None:
                    keep = result
            row.update(acc=float(np.mean(accs)), acc_std=float(np.std(accs)),
                       nmi=float(np.mean(nmis)), nmi_std=float(np.std(nmis)),
                       iterations=float(np.mean(iters)), converged=all(conv), runs=len(accs))
        row.update(status="ok", error="")
        return row, keep
    except Exception as exc:  # isolate failures per point
        log.warning("point %s failed: %s", point, exc)
        row.update(acc=np.nan, acc_std=np.nan, nmi=np.nan, nmi_std=np.nan,
                   iterations=0, converged=False, runs=0,
                   status="failed", error=type(exc).__name__)
        return row, None


def mark_best(rows):
    """Flag the highest-accuracy successful row per (method, fraction)."""
    best = {}
    for i, row in enumerate(rows):
        row["best"] = False
        if row["status"] != "ok":
            continue
        key = (row["method"], row["fraction"])
        if key not in best or row["acc"] > rows[best[key]]["acc"]:
            best[key] = i
    for i in best.values():
        rows[i]["best"] = True
    return rows


# ---------------------------------------------------------------- output

def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "nan" if np.isnan(value) else f"{value:.6g}"
    return str(value)


def emit_sweep_table(results, axes=SWEEP_AXES, path=None):
    """Long-format table: one row per parameter point, all metric columns.

    `axes` names the swept parameters; they lead the column order. Returns
    the CSV text and writes it to `path` when given.
    """
    if not results:
        raise ValueError("no results to tabulate")
    lead = [a for a in axes if a in TABLE_COLUMNS]
    columns = lead + [c for c in TABLE_COLUMNS if c not in lead]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in results:
        writer.writerow([_cell(row.get(c)) for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def format_report(spec, rows, n, d):
    """Human-readable report body (no timestamp)."""
    out = [
        f"data: {spec.data_path.name} (n={n}, d={d})",
        f"mode: {spec.mode}",
        f"recipe: {spec.recipe}",
        f"methods: {','.join(spec.methods)}",
    ]
    if spec.mode == "ssl":
        out.append(f"label fractions: {','.join(_cell(f) for f in spec.label_fractions)}; "
                   f"repeats: {spec.repeats}")
    out.append("")
    header = f"{'method':<6} {'kernel':>6} {'frac':>5} {'alpha':>9} {'beta':>9} {'gamma':>9} "
    header += ("{:>17} {:>17}".format("acc(mean±std)", "nmi(mean±std)") if spec.mode == "ssl"
               else f"{'acc':>8} {'nmi':>8}")
    header += f" {'iters':>7} {'conv':>5} status"
    out.append(header)

    def fmt(row):
        line = (f"{row['method']:<6} {_cell(row['kernel']):>6} {_cell(row['fraction']):>5} "
                f"{_cell(row['alpha']):>9} {_cell(row['beta']):>9} {_cell(row['gamma']):>9} ")
        if spec.mode == "ssl":
            line += (f"{100 * row['acc']:>8.2f}±{100 * row['acc_std']:<8.2f} "
                     f"{row['nmi']:>8.4f}±{row['nmi_std']:<8.4f}")
        else:
            line += f"{row['acc']:>8.4f} {row['nmi']:>8.4f}"
        line += f" {_cell(row['iterations']):>7} {_cell(row['converged']):>5} {row['status']}"
        if row["error"]:
            line += f" ({row['error']})"
        return line

    out.extend(fmt(r) for r in rows)
    out.append("")
    for r in rows:
        if r["best"]:
            out.append("best " + fmt(r))
    failed = sum(r["status"] != "ok" for r in rows)
    out.append(f"points: {len(rows)}, failed: {failed}")
    return "\n".join(out) + "\n"


def run_experiment(spec):
    """Run every parameter point of `spec` and write the report files.

    Returns the list of result rows. Files written to ``spec.out_dir``:
    ``report.txt``, ``report.csv``, ``labels.txt``, ``fit_report.txt`` and,
    with ``save_matrices``, ``S.csv`` and ``K.csv`` (all for the best row of
    the first method).
    """
    X = load_dense_matrix(spec.data_path, spec.delimiter)
    truth = load_labels(spec.labels_path, X.n).labels
    if spec.mode == "clustering" and np.any(truth == UNLABELED):
        raise DataFormatError("clustering needs a ground-truth label for every sample")
    bank = build_bank(X, spec.recipe)
    if spec.mode == "clustering" and spec.solver.c != int(truth.max()) + 1:
        log.info("solver.c=%d differs from %d label classes", spec.solver.c, truth.max() + 1)

    points = expand_points(spec, len(bank))
    ctx = {"spec": spec, "bank": bank, "truth": np.asarray(truth)}
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers, initializer=_set_context,
                                 initargs=(ctx,)) as pool:
            outcomes = list(pool.map(run_point, points))
    else:
        _set_context(ctx)
        outcomes = [run_point(p) for p in points]

    rows = mark_best([row for row, _ in outcomes])
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    (spec.out_dir / "report.txt").write_text(
        f"# generated {stamp}\n" + format_report(spec, rows, X.n, X.d))
    axes = [a for a in SWEEP_AXES if a in spec.sweep]
    emit_sweep_table(rows, axes or SWEEP_AXES, spec.out_dir / "report.csv")

    first = next((i for i, r in enumerate(rows)
                  if r["best"] and r["method"] == spec.methods[0]), None)
    if first is None:
        first = next((i for i, r in enumerate(rows) if r["best"]), None)
    if first is not None:
        result = outcomes[first][1]
        write_labels(spec.out_dir / "labels.txt", result.labels)
        core.write_fit_report(result, spec.out_dir / "fit_report.txt",
                              spec.out_dir if spec.save_matrices else None)
    return rows


# ---------------------------------------------------------------- entry points

def _cmd_run(args):
    spec = load_spec(args.spec)
    rows = run_experiment(spec)
    print((spec.out_dir / "report.txt").read_text(), end="")
    return EXIT_PARTIAL if any(r["status"] != "ok" for r in rows) else EXIT_OK


def _cmd_kernels(args):
    X = load_dense_matrix(args.data, args.delimiter)
    bank = build_bank(X, args.recipe)
    save_bank(bank, args.out_dir)
    for i, kind in enumerate(bank.kinds):
        print(f"H_{i:02d}.csv  {kind}")
    return EXIT_OK


def _cmd_eval(args):
    pred_lines = [ln for ln in Path(args.pred).read_text().split() if ln]
    pred = load_labels(args.pred, len(pred_lines)).labels
    truth = load_labels(args.truth, len(pred)).labels
    mode = "ssl" if args.ssl else "clustering"
    keep = np.flatnonzero(truth != UNLABELED)
    rep = evaluate(pred, truth, keep, mode=mode)
    print(f"acc={rep.acc:.6f}")
    print(f"nmi={rep.nmi:.6f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="smkl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment spec file")
    p.add_argument("spec")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("kernels", help="build and export a kernel bank")
    p.add_argument("data")
    p.add_argument("recipe", choices=sorted(RECIPES))
    p.add_argument("out_dir")
    p.add_argument("--delimiter", default=",")
    p.set_defaults(func=_cmd_kernels)

    p = sub.add_parser("eval", help="score predicted labels against ground truth")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--ssl", action="store_true",
                   help="plain label match instead of best cluster matching")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SpecError, DataFormatError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
