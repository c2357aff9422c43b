"""NMSE, the experiment grid runner, and trace/result serialization."""
import csv
import dataclasses
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DimensionError, ParameterError
from .linalg import _as_matrix

TRACE_FIELDS = ("iter", "objective", "train_f", "nmse", "rank", "seconds")
RESULT_FIELDS = ("algorithm", "observed_ratio", "seed", "nmse", "iterations", "seconds", "status")


def fmt_float(x):
    """17 significant digits, enough to round-trip any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def nmse(X, eval_set):
    """``||X - O||^2 / ||O||^2`` over the entries of ``eval_set`` only."""
    X = _as_matrix(X)
    if tuple(X.shape) != tuple(eval_set.shape):
        raise DimensionError(f"matrix shape {X.shape} does not match {eval_set.shape}")
    if len(eval_set) == 0:
        raise ParameterError("nmse needs a non-empty evaluation set")
    truth = eval_set.values
    denom = float(np.dot(truth, truth))
    if denom == 0.0:
        raise ParameterError("nmse is undefined when all evaluation values are zero")
    resid = kernels.gather(X, eval_set.rows, eval_set.cols) - truth
    return float(np.dot(resid, resid)) / denom


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    observed_ratio: float
    seed: int
    nmse: float
    iterations: int
    seconds: float
    status: str = "ok"

    @property
    def failed(self):
        return self.status != "ok"


@dataclass
class ExperimentGrid:
    """Cartesian product ``algorithms x observed_ratios x seeds`` on one dataset.

    ``dataset`` is a :class:`~discmc.data.RatingsDataset` or a path to a
    u.data file. Each config's ``seed`` is overridden by the grid seed, so
    a cell is fully determined by ``(config, ratio, seed)``.
    """

    algorithms: list
    observed_ratios: list
    seeds: list
    dataset: object
    n_jobs: int = 1

    def __post_init__(self):
        if not self.algorithms or not self.observed_ratios or not self.seeds:
            raise ParameterError("grid lists must be non-empty")
        for r in self.observed_ratios:
            if not 0 < r < 1:
                raise ParameterError(f"observed ratio {r} outside (0, 1)")


def _run_cell(config, ds, ratio, seed):
    from .data import SplitSpec, split
    from .solvers import run

    train, test = split(ds, SplitSpec(ratio, seed))
    cfg = dataclasses.replace(config, seed=seed)
    start = time.perf_counter()
    try:
        X, trace = run(cfg, train, test)
        err = nmse(X, test)
    except Exception as exc:  # noqa: BLE001 - failed cells become sentinel rows
        msg = " ".join(str(exc).split()) or type(exc).__name__
        return ResultRow(config.name, ratio, seed, float("nan"), 0,
                         time.perf_counter() - start, f"failed: {msg}")
    return ResultRow(config.name, ratio, seed, err, trace.iterations, time.perf_counter() - start)


def run_grid(grid):
    """Run every cell of ``grid``; rows sorted by (algorithm, ratio, seed)."""
    from .data import load_movielens

    ds = grid.dataset
    if isinstance(ds, (str, Path)):
        ds = load_movielens(ds)
    cells = [(c, ds, r, s) for c in grid.algorithms for r in grid.observed_ratios for s in grid.seeds]
    if grid.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=grid.n_jobs) as pool:
            rows = list(pool.map(_run_cell, *zip(*cells)))
    else:
        rows = [_run_cell(*cell) for cell in cells]
    return sorted(rows, key=lambda r: (r.algorithm, r.observed_ratio, r.seed))


def _open_for_write(path):
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as err:
        raise OSError(err.errno, f"cannot write {path}: {err.strerror}") from err


def trace_to_csv(trace):
    out = io.StringIO()
    out.write(",".join(TRACE_FIELDS) + "\n")
    for r in trace.records:
        out.write(f"{r.iter},{fmt_float(r.objective)},{fmt_float(r.train_f)},"
                  f"{fmt_float(r.nmse)},{r.rank},{fmt_float(r.seconds)}\n")
    return out.getvalue()


def trace_to_json(trace):
    def num(x):
        s = fmt_float(x)
        return "null" if s == "nan" else s

    items = [
        f'{{"iter": {r.iter}, "objective": {num(r.objective)}, "train_f": {num(r.train_f)}, '
        f'"nmse": {num(r.nmse)}, "rank": {r.rank}, "seconds": {num(r.seconds)}}}'
        for r in trace.records
    ]
    if not items:
        return "[]\n"
    return "[\n  " + ",\n  ".join(items) + "\n]\n"


def export_trace(trace, fmt, path):
    """Write ``trace`` as CSV or JSON with the fixed field set."""
    if fmt not in ("csv", "json"):
        raise ParameterError(f"unknown trace format {fmt!r}")
    text = trace_to_csv(trace) if fmt == "csv" else trace_to_json(trace)
    with _open_for_write(path) as fh:
        fh.write(text)
    return Path(path)


def read_trace(path, fmt=None):
    """Parse a file written by :func:`export_trace`."""
    import json

    from .solvers import ConvergenceTrace, TraceRecord

    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    text = path.read_text(encoding="utf-8")
    if fmt == "json":
        raw = json.loads(text)
    elif fmt == "csv":
        raw = list(csv.DictReader(io.StringIO(text)))
    else:
        raise ParameterError(f"unknown trace format {fmt!r}")

    def real(v):
        return float("nan") if v is None else float(v)

    records = [
        TraceRecord(int(d["iter"]), real(d["objective"]), real(d["train_f"]),
                    real(d["nmse"]), int(d["rank"]), real(d["seconds"]))
        for d in raw
    ]
    return ConvergenceTrace(records=records)


def results_to_csv(rows):
    out = io.StringIO()
    out.write(",".join(RESULT_FIELDS) + "\n")
    for r in rows:
        status = r.status.replace(",", ";")
        out.write(f"{r.algorithm},{fmt_float(r.observed_ratio)},{r.seed},{fmt_float(r.nmse)},"
                  f"{r.iterations},{fmt_float(r.seconds)},{status}\n")
    return out.getvalue()


def write_results(rows, path):
    with _open_for_write(path) as fh:
        fh.write(results_to_csv(rows))
    return Path(path)


def read_results(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return [
            ResultRow(d["algorithm"], float(d["observed_ratio"]), int(d["seed"]), float(d["nmse"]),
                      int(d["iterations"]), float(d["seconds"]), d["status"])
            for d in csv.DictReader(fh)
        ]
