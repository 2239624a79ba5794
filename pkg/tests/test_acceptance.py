"""Acceptance criteria. Each test carries the criterion it checks; the run
ends with one PASS/FAIL line per criterion. Tolerances are fixed here."""

import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convsel.backends import direct_conv, im2col, im2col_gemm_conv, max_rel_error, random_tensors, winograd_conv
from convsel.dataset import read_dataset, read_features
from convsel.dispatch import (
    NetworkSpec,
    OracleModel,
    SyntheticTiming,
    emit_report,
    evaluate_network,
    load_network,
    summary_lines,
)
from convsel.harness import DEFAULT_WH, GridConfig, generate_shape_grid, run_sweep
from convsel.learners import (
    evaluate_accuracy,
    gini_index,
    holdout_split,
    load_model,
    predict_nb,
    save_model,
    train_decision_tree,
    train_naive_bayes,
)
from convsel.shapes import ConvMethod, LayerShape

from oracles import conv_loops

GEMM_TOL = 1e-4
WINOGRAD_TOL = 1e-3
GINI_TOL = 1e-12
POSTERIOR_TOL = 1e-9
DT_HOLDOUT_MIN = 0.95
NB_HOLDOUT_MIN = 0.70
TREND_MIN_FRACTION = 0.90
TREND_MAX_FLOPS = 1e8
SYN = SyntheticTiming()

EQUIVALENCE = "backend equivalence"
BLOWUP = "im2col blowup"
LEARNERS = "learner correctness"
PIPELINE = "synthetic pipeline reproduction"
BOUND = "dispatch bound"
FIDELITY = "report fidelity"
TREND = "hardware-free trend check"
CLI = "CLI end-to-end"


def random_vectors(n=1000, seed=7):
    rng = np.random.default_rng(seed)
    return rng.uniform([1, 1, 1, 1, 1], [300, 300, 2048, 11, 1024], size=(n, 5))


# ------------------------------------------------------------ backends


def equivalence_shapes():
    """20 random shapes per K in 1..11, 20 more with K=3, plus the largest
    allowed shape for every K."""
    rng = np.random.default_rng(2024)
    shapes = []
    for k in [*range(1, 12), 3]:
        lo = max(1, k - 2)
        for _ in range(20):
            w, h = rng.integers(lo, 33, size=2)
            c_in, c_out = rng.integers(1, 33, size=2)
            shapes.append(LayerShape(int(w), int(h), int(c_in), k, int(c_out)))
        shapes.append(LayerShape(32, 32, 32, k, 32))
    return shapes


@pytest.mark.acceptance(EQUIVALENCE)
def test_backend_equivalence_gemm_and_winograd():
    started = time.monotonic()
    shapes = equivalence_shapes()
    assert len(shapes) >= 200
    assert {s.kernel_size for s in shapes} == set(range(1, 12))
    worst_gemm = worst_wino = 0.0
    n_wino = 0
    for i, shape in enumerate(shapes):
        image, kernels = random_tensors(shape, np.random.default_rng(i))
        ref = direct_conv(image, kernels, shape)
        worst_gemm = max(worst_gemm, max_rel_error(im2col_gemm_conv(image, kernels, shape), ref))
        if shape.kernel_size == 3:
            n_wino += 1
            worst_wino = max(worst_wino, max_rel_error(winograd_conv(image, kernels, shape), ref))
    print(f"shapes={len(shapes)} winograd_shapes={n_wino} gemm_err={worst_gemm:.2e} wino_err={worst_wino:.2e}")
    assert worst_gemm <= GEMM_TOL
    assert worst_wino <= WINOGRAD_TOL
    assert time.monotonic() - started < 120


@pytest.mark.acceptance(EQUIVALENCE)
def test_backend_equivalence_direct_vs_loop_oracle():
    # the scalar oracle is slow, so it runs on the cheap shapes plus small
    # shapes for every K
    started = time.monotonic()
    rng = np.random.default_rng(99)
    cheap = [s for s in equivalence_shapes() if s.flops <= 1e5]
    extra = []
    for k in range(1, 12):
        for _ in range(3):
            lo = max(1, k - 2)
            w, h = rng.integers(lo, lo + 6, size=2)
            extra.append(LayerShape(int(w), int(h), int(rng.integers(1, 4)), k, int(rng.integers(1, 4))))
    checked = cheap + extra
    assert {s.kernel_size for s in checked} == set(range(1, 12))
    for i, shape in enumerate(checked):
        image, kernels = random_tensors(shape, np.random.default_rng(1000 + i))
        assert np.array_equal(direct_conv(image, kernels, shape), conv_loops(image, kernels)), shape
    print(f"oracle_shapes={len(checked)}")
    assert time.monotonic() - started < 120


@pytest.mark.acceptance(BLOWUP)
def test_im2col_blowup_all_grid_extents():
    for h in DEFAULT_WH:
        for w in DEFAULT_WH:
            shape = LayerShape(w, h, 1, 3, 8)
            cols = im2col(np.zeros(shape.input_dims, np.float32), shape)
            assert cols.size == 9 * h * w


# ------------------------------------------------------------ learners


@pytest.mark.acceptance(LEARNERS)
def test_gini_hand_values():
    assert abs(gini_index((10, 0, 0)) - 0.0) <= GINI_TOL
    assert abs(gini_index((5, 5, 0)) - 0.5) <= GINI_TOL
    assert abs(gini_index((4, 4, 4)) - 2 / 3) <= GINI_TOL
    assert abs(gini_index((4, 3, 3)) - 0.66) <= GINI_TOL


@pytest.mark.acceptance(LEARNERS)
def test_nb_posteriors_sum_to_one(grid_nb):
    for x in random_vectors():
        _, posterior = predict_nb(grid_nb, x)
        assert abs(posterior.sum() - 1.0) <= POSTERIOR_TOL


@pytest.mark.acceptance(LEARNERS)
def test_dt_unlimited_depth_fits_grid(grid_xy):
    model = train_decision_tree(*grid_xy, max_depth=None)
    assert evaluate_accuracy(model, *grid_xy).accuracy == 1.0


@pytest.mark.acceptance(LEARNERS)
@settings(max_examples=100, deadline=None)
@given(data=st.data(), n=st.integers(1, 60))
def test_dt_unlimited_depth_fits_any_contradiction_free_data(data, n):
    rows = data.draw(st.lists(
        st.tuples(*[st.integers(1, 20)] * 5), min_size=n, max_size=n, unique=True))
    y = data.draw(st.lists(st.integers(0, 2), min_size=len(rows), max_size=len(rows)))
    X = np.array(rows, dtype=float)
    model = train_decision_tree(X, y, max_depth=None)
    assert evaluate_accuracy(model, X, y).accuracy == 1.0


@pytest.mark.acceptance(LEARNERS)
def test_save_load_preserves_predictions(tmp_path, grid_dt, grid_nb):
    X = random_vectors()
    for model in (grid_dt, grid_nb):
        path = tmp_path / f"{model.kind}.model"
        save_model(model, path)
        assert np.array_equal(load_model(path).predict_many(X), model.predict_many(X))


# ------------------------------------------------------------- pipeline


@pytest.fixture(scope="module")
def timed_pipeline():
    started = time.monotonic()
    records = run_sweep(generate_shape_grid(GridConfig()), synthetic=True)
    X = np.array([r.shape.features() for r in records])
    y = np.array([int(r.label) for r in records])
    train_idx, hold_idx = holdout_split(len(y), 0.2, seed=0)
    dt = train_decision_tree(X[train_idx], y[train_idx], max_depth=12)
    nb = train_naive_bayes(X[train_idx], y[train_idx])
    acc_dt = evaluate_accuracy(dt, X[hold_idx], y[hold_idx]).accuracy
    acc_nb = evaluate_accuracy(nb, X[hold_idx], y[hold_idx]).accuracy
    return records, acc_dt, acc_nb, time.monotonic() - started


@pytest.mark.acceptance(PIPELINE)
def test_pipeline_more_than_4000_records(timed_pipeline):
    assert len(timed_pipeline[0]) > 4000


@pytest.mark.acceptance(PIPELINE)
def test_pipeline_full_grid_has_9900_records(timed_pipeline):
    # 1000 of the 9900 grid combinations have no output pixel (W or H = 7
    # with K = 10 or 11) and cannot be benchmarked
    assert len(timed_pipeline[0]) == 9900


@pytest.mark.acceptance(PIPELINE)
def test_pipeline_holdout_accuracies(timed_pipeline):
    _, acc_dt, acc_nb, elapsed = timed_pipeline
    print(f"dt_holdout={acc_dt:.4f} nb_holdout={acc_nb:.4f} elapsed={elapsed:.1f}s")
    assert acc_dt >= DT_HOLDOUT_MIN
    assert NB_HOLDOUT_MIN <= acc_nb < acc_dt
    assert elapsed < 300


# ------------------------------------------------------------- dispatch


@pytest.fixture(scope="module")
def grid_network(grid_shapes):
    return NetworkSpec("grid", tuple(grid_shapes))


@pytest.mark.acceptance(BOUND)
def test_dispatch_bound_trained_models(grid_network, grid_dt, grid_nb):
    for model in (grid_dt, grid_nb):
        r = evaluate_network(model, grid_network, SYN)
        static = [r.method_total(m) for m in ConvMethod if r.completes_all(m)]
        print(f"{model.kind}: oracle={r.total_oracle:.6e} model={r.total_predicted:.6e} static_min={min(static):.6e}")
        assert r.total_oracle <= r.total_predicted <= min(static)


@pytest.mark.acceptance(BOUND)
def test_dispatch_bound_oracle_as_model(grid_network):
    r = evaluate_network(OracleModel(SYN), grid_network, SYN)
    assert r.accuracy == 1.0
    speedup = r.total_oracle / r.total_predicted
    assert speedup == 1.0 and f"{speedup:.2f}X" == "1.00X"


@pytest.mark.acceptance(FIDELITY)
@pytest.mark.parametrize("name,n_layers", [("mobilenets", 15), ("inceptionv3", 66)])
def test_report_fidelity(tmp_path, grid_dt, grid_nb, name, n_layers):
    network = load_network(name)
    assert len(network.layers) == n_layers
    n_k3 = sum(s.kernel_size == 3 for s in network.layers)
    for model in (grid_dt, grid_nb):
        report = evaluate_network(model, network, SYN)
        assert sum(report.model_selection) == sum(report.oracle_selection) == n_layers
        assert report.layers_completed(ConvMethod.WINOGRAD) == n_k3
        keys = [line.split(": ", 1)[0] for line in summary_lines(report)]
        for key in ("accuracy_pct", "speedup_vs_gemm", "speedup_vs_direct"):
            assert key in keys
        if n_k3 < n_layers:
            assert "winograd" in keys and "speedup_vs_winograd" not in keys
        a = emit_report(report, tmp_path / f"{model.kind}-a")
        b = emit_report(evaluate_network(model, network, SYN), tmp_path / f"{model.kind}-b")
        for key in a:
            assert a[key].read_bytes() == b[key].read_bytes()
        assert len(a["plot"].read_text().splitlines()) == 1 + 5


# ---------------------------------------------------------------- trend


@pytest.mark.acceptance(TREND)
@pytest.mark.slow
def test_measured_gemm_beats_direct(grid_shapes):
    started = time.monotonic()
    shapes = [s for s in grid_shapes if s.kernel_size == 3 and s.in_channels >= 64]
    records = run_sweep(shapes, synthetic=False, max_flops=TREND_MAX_FLOPS)
    wins = sum(
        r.timing(ConvMethod.GEMM).micros < r.timing(ConvMethod.DIRECT).micros for r in records
    )
    elapsed = time.monotonic() - started
    print(f"gemm faster on {wins}/{len(records)} shapes in {elapsed:.1f}s")
    assert len(records) >= 20
    assert wins >= TREND_MIN_FRACTION * len(records)
    assert elapsed < 600


# ------------------------------------------------------------------ cli


def convsel(*args):
    proc = subprocess.run([sys.executable, "-m", "convsel", *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.mark.acceptance(CLI)
def test_cli_three_phase_pipeline(tmp_path):
    data, model, out = tmp_path / "dataset", tmp_path / "dt.model", tmp_path / "report"
    convsel("generate-dataset", "--synthetic", "--out", str(data))
    convsel("train", "--dataset", str(data / "features.csv"), "--model-out", str(model),
            "--kind", "dt", "--holdout", "0.2")
    summary = convsel("evaluate", "--model", str(model), "--network", "gridsample",
                      "--timing", "synthetic", "--out", str(out))

    records = read_dataset(data)
    X, y = read_features(data / "features.arff")
    assert len(records) == len(y) > 4000
    assert [int(r.label) for r in records] == y.tolist()
    loaded = load_model(model)
    assert evaluate_accuracy(loaded, X, y).accuracy >= DT_HOLDOUT_MIN

    assert "accuracy_pct: 100.00" in summary
    plot = [line.split(",") for line in (out / "plot.csv").read_text().splitlines()[1:]]
    assert [row[0] for row in plot] == ["gemm", "direct", "winograd", "model", "oracle"]
    network = load_network("gridsample")
    assert all(sum(map(int, row[3:])) == len(network.layers) for row in plot)
    assert summary.startswith((out / "summary.txt").read_text())
