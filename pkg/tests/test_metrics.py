import csv
import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import discmc.solvers as solvers
from discmc import (
    Alphabet,
    ConvergenceTrace,
    ExperimentGrid,
    IndexSet,
    ObservedMatrix,
    ParameterError,
    SolverConfig,
    SyntheticSpec,
    export_trace,
    nmse,
    read_trace,
    run_grid,
    synth_discrete_lowrank,
)
from discmc.metrics import RESULT_FIELDS, TRACE_FIELDS, read_results, write_results
from discmc.solvers import TraceRecord

ALPHA = Alphabet.integers(1, 5)


def random_eval(rng, shape=(7, 6), frac=0.5):
    S = IndexSet.from_mask(rng.random(shape) < frac)
    return ObservedMatrix(shape, S.rows, S.cols, rng.uniform(1, 5, size=len(S)))


# ---- nmse -----------------------------------------------------------------

def test_nmse_examples(rng):
    E = random_eval(rng)
    assert nmse(E.dense, E) == 0.0
    assert nmse(np.zeros(E.shape), E) == 1.0


def test_nmse_two_loop_oracle(rng, backend):
    E = random_eval(rng)
    X = rng.normal(3, 1, size=E.shape)
    num = den = 0.0
    for i, j, v in E.triplets():
        num += (X[i, j] - v) ** 2
        den += v**2
    assert abs(nmse(X, E) - num / den) <= 1e-12


def test_nmse_ignores_entries_outside_eval_set(rng):
    E = random_eval(rng)
    X = E.dense.copy()
    X[~E.index_set.mask] = 1e6
    assert nmse(X, E) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3), st.integers(0, 2**31 - 1))
def test_nmse_scale_invariant(c, seed):
    rng = np.random.default_rng(seed)
    E = random_eval(rng)
    X = rng.normal(3, 1, size=E.shape)
    cE = ObservedMatrix(E.shape, E.rows, E.cols, c * E.values)
    assert abs(nmse(c * X, cE) - nmse(X, E)) <= 1e-12 * max(1.0, nmse(X, E))


def test_nmse_errors(rng):
    empty = ObservedMatrix((3, 3), [], [], [])
    with pytest.raises(ParameterError):
        nmse(np.zeros((3, 3)), empty)
    with pytest.raises(ValueError):
        nmse(np.zeros((2, 3)), random_eval(rng, (3, 3)))
    zeros = ObservedMatrix((2, 2), [0], [0], [0.0])
    with pytest.raises(ParameterError):
        nmse(np.ones((2, 2)), zeros)


# ---- grid -----------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_dataset():
    _, ds = synth_discrete_lowrank(SyntheticSpec(20, 15, 2, ALPHA, seed=0))
    return ds


def configs(*names):
    return [SolverConfig.make(a, alphabet=ALPHA, max_iter=15) for a in names]


def test_grid_validation(tiny_dataset):
    with pytest.raises(ParameterError):
        ExperimentGrid(configs("apg"), [], [0], tiny_dataset)
    with pytest.raises(ParameterError):
        ExperimentGrid(configs("apg"), [1.0], [0], tiny_dataset)


def test_grid_single_cell(tiny_dataset):
    rows = run_grid(ExperimentGrid(configs("apg"), [0.5], [0], tiny_dataset))
    assert len(rows) == 1
    r = rows[0]
    assert r.status == "ok" and r.nmse >= 0 and r.iterations >= 1


def test_grid_product_count_and_order(tiny_dataset):
    algos = configs("soft_impute", "apg", "discrete_apg", "niapg", "discrete_niapg")
    ratios = [0.2, 0.3, 0.4, 0.5, 0.6]
    grid = ExperimentGrid([dataclasses.replace(c, max_iter=2) for c in algos], ratios, [0, 1, 2], tiny_dataset)
    rows = run_grid(grid)
    assert len(rows) == 75
    keys = [(r.algorithm, r.observed_ratio, r.seed) for r in rows]
    assert keys == sorted(keys) and len(set(keys)) == 75


def test_grid_deterministic_and_parallel_safe(tiny_dataset):
    grid = ExperimentGrid(configs("apg", "discrete_apg"), [0.3, 0.5], [0, 1], tiny_dataset)
    a = run_grid(grid)
    b = run_grid(dataclasses.replace(grid, n_jobs=2))
    strip = lambda rows: [dataclasses.replace(r, seconds=0.0) for r in rows]
    assert strip(a) == strip(b)


def test_grid_failed_cell_becomes_sentinel(tiny_dataset, monkeypatch):
    real = solvers.run

    def flaky(config, *args, **kwargs):
        if config.label == "broken":
            raise FloatingPointError("injected,\nfailure")
        return real(config, *args, **kwargs)

    monkeypatch.setattr(solvers, "run", flaky)
    bad = dataclasses.replace(configs("apg")[0], label="broken")
    rows = run_grid(ExperimentGrid([bad] + configs("apg"), [0.5], [0], tiny_dataset))
    assert [r.algorithm for r in rows] == ["apg", "broken"]
    broken = rows[1]
    assert broken.failed and broken.status.startswith("failed: ") and math.isnan(broken.nmse)
    assert "\n" not in broken.status
    assert not rows[0].failed


def test_results_csv_round_trip(tmp_path, tiny_dataset):
    rows = run_grid(ExperimentGrid(configs("apg", "soft_impute"), [0.4], [0, 3], tiny_dataset))
    p = write_results(rows, tmp_path / "res.csv")
    assert p.read_text().splitlines()[0] == ",".join(RESULT_FIELDS)
    assert read_results(p) == rows


# ---- trace export ---------------------------------------------------------

def make_trace(rng, n):
    recs = [
        TraceRecord(i + 1, float(rng.normal() * 1e3), float(rng.random()), float(rng.random()),
                    int(rng.integers(0, 50)), float(i * 0.1 + rng.random()))
        for i in range(n)
    ]
    return ConvergenceTrace(records=recs, stop_reason="tolerance")


def test_export_empty_trace_csv(tmp_path):
    p = export_trace(ConvergenceTrace(), "csv", tmp_path / "t.csv")
    assert p.read_text() == ",".join(TRACE_FIELDS) + "\n"


def test_export_three_records(tmp_path, rng):
    p = export_trace(make_trace(rng, 3), "csv", tmp_path / "t.csv")
    lines = p.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == "iter,objective,train_f,nmse,rank,seconds"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_export_round_trip_exact(tmp_path, rng, fmt):
    tr = make_trace(rng, 25)
    tr.records[3] = dataclasses.replace(tr.records[3], nmse=float("nan"))
    back = read_trace(export_trace(tr, fmt, tmp_path / f"t.{fmt}"))
    assert len(back.records) == 25
    for a, b in zip(tr.records, back.records):
        for name in TRACE_FIELDS:
            x, y = getattr(a, name), getattr(b, name)
            assert x == y or (math.isnan(x) and math.isnan(y))


def test_json_is_valid_with_fixed_keys(tmp_path, rng):
    tr = make_trace(rng, 2)
    tr.records[0] = dataclasses.replace(tr.records[0], nmse=float("nan"))
    p = export_trace(tr, "json", tmp_path / "t.json")
    data = json.loads(p.read_text())
    assert [list(d) for d in data] == [list(TRACE_FIELDS)] * 2
    assert data[0]["nmse"] is None
    assert json.loads(export_trace(ConvergenceTrace(), "json", tmp_path / "e.json").read_text()) == []


def test_export_csv_parses_with_csv_module(tmp_path, rng):
    p = export_trace(make_trace(rng, 4), "csv", tmp_path / "t.csv")
    with open(p, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and list(rows[0]) == list(TRACE_FIELDS)


def test_export_errors(tmp_path, rng):
    with pytest.raises(ParameterError):
        export_trace(make_trace(rng, 1), "xml", tmp_path / "t.xml")
    missing = tmp_path / "no" / "such" / "dir" / "t.csv"
    with pytest.raises(OSError, match=str(missing.parent)):
        export_trace(make_trace(rng, 1), "csv", missing)
