"""Error-rate definitions, binomial relation, scatter binning."""
import numpy as np
import pytest

from pulsenet.metrics import (
    MetricsReport,
    absolute_error,
    binomial_subset_estimate,
    global_error,
    multipulse_curve,
    outcome_grid,
    scatter_rows,
    subset_error,
    write_curve_csv,
    write_scatter_csv,
)


def test_absolute_error_cases():
    a = np.array([[1, 0, 1], [0, 0, 1]])
    assert absolute_error(a, a) == 0.0
    assert absolute_error(a, 1 - a) == 1.0
    b = a.copy()
    b[0, 0] ^= 1
    assert absolute_error(b, a) == pytest.approx(1 / 6)


def test_one_wrong_bit_in_10x17():
    labels = np.zeros((10, 17), dtype=int)
    preds = labels.copy()
    preds[3, 5] = 1
    assert absolute_error(preds, labels) == pytest.approx(1 / 170)
    assert subset_error(preds, labels) == pytest.approx(0.1)


def test_subset_error_cases():
    a = np.array([[1, 0], [0, 1], [1, 1]])
    assert subset_error(a, a) == 0.0
    b = a.copy()
    b[:, 0] ^= 1
    assert subset_error(b, a) == 1.0


def test_shape_mismatch():
    with pytest.raises(ValueError):
        absolute_error(np.zeros((2, 3)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        subset_error(np.zeros((2, 3)), np.zeros((2, 4)))


def test_binomial_subset_estimate():
    exact, approx, gap = binomial_subset_estimate(0.0, 17)
    assert exact == 0.0 and approx == 0.0
    exact, approx, _ = binomial_subset_estimate(0.01, 17)
    assert exact == pytest.approx(1 - 0.99**17)
    assert exact == pytest.approx(0.1571, abs=2e-4)
    assert approx == pytest.approx(0.17)
    exact, _, _ = binomial_subset_estimate(1.0, 17)
    assert exact == 1.0


def test_subset_bounds_hold_on_random_data():
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = int(rng.integers(1, 20))
        n = int(rng.integers(1, 60))
        preds = rng.integers(0, 2, (n, k))
        labels = rng.integers(0, 2, (n, k))
        ea, es = absolute_error(preds, labels), subset_error(preds, labels)
        assert es >= ea - 1e-12
        assert es <= min(1.0, k * ea) + 1e-12


def test_iid_simulator_matches_binomial_formula():
    rng = np.random.default_rng(42)
    k, e, n = 17, 0.01, 100_000
    flips = rng.random((n, k)) < e
    labels = rng.integers(0, 2, (n, k))
    preds = labels ^ flips
    e_sub = subset_error(preds, labels)
    expected = binomial_subset_estimate(e, k)[0]
    assert abs(e_sub - expected) / expected < 0.05


def _report(outcomes, kind="ce", k=17):
    rep = MetricsReport(kind=kind, k=k, repeats=1, per_sample_outcomes=outcomes)
    if kind == "ce" and outcomes:
        rep.top1_error = global_error(rep)
    return rep


def test_outcome_grid_all_correct():
    rng = np.random.default_rng(1)
    outcomes = [
        (int(w), float(s), 1, True)
        for w, s in zip(rng.integers(100, 10000, 500), rng.uniform(-12, 12, 500))
    ]
    grid = outcome_grid(_report(outcomes))
    assert np.nanmax(grid.errors) == 0.0


def test_outcome_grid_reaggregates_exactly():
    rng = np.random.default_rng(2)
    outcomes = [
        (int(w), float(s), 1, bool(c))
        for w, s, c in zip(
            rng.integers(100, 10000, 2000),
            rng.uniform(-12, 12, 2000),
            rng.random(2000) < 0.7,
        )
    ]
    rep = _report(outcomes)
    grid = outcome_grid(rep)
    assert grid.counts.sum() == len(outcomes)
    weighted = np.nansum(grid.errors * grid.counts) / grid.counts.sum()
    assert weighted == pytest.approx(global_error(rep), abs=1e-12)


def test_outcome_grid_random_guess_uniform_error():
    rng = np.random.default_rng(3)
    k = 17
    outcomes = [
        (int(w), float(s), 1, bool(rng.integers(0, k) == 0))
        for w, s in zip(rng.integers(100, 10000, 40000), rng.uniform(-12, 12, 40000))
    ]
    grid = outcome_grid(_report(outcomes))
    populated = grid.counts > 50
    errs = grid.errors[populated]
    # binomial oracle per bin: error ~= (K-1)/K everywhere
    assert np.all(np.abs(errs - 16 / 17) < 0.08)


def test_empty_report_rejected():
    with pytest.raises(ValueError):
        outcome_grid(_report([]))


def test_scatter_csv_roundtrip(tmp_path):
    outcomes = [(100, -3.5, 1, True), (9000, 11.0, 1, False)]
    rep = _report(outcomes)
    path = tmp_path / "scatter.csv"
    write_scatter_csv(rep, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "pulse_width,snr_db,L,correct"
    assert lines[1] == "100,-3.5,1,1"
    assert lines[2] == "9000,11.0,1,0"
    assert scatter_rows(rep)[0] == (100, -3.5, 1, 1)


def test_multipulse_curve_rows_and_bounds(tmp_path):
    reports = {}
    for l, (ea, es) in {1: (0.01, 0.12), 2: (0.03, 0.30)}.items():
        reports[l] = MetricsReport(kind="bce", k=17, repeats=1, e_abs=ea, e_sub=es)
    rows = multipulse_curve(reports)
    assert rows[0] == (1, 0.01, 0.12, pytest.approx(0.17))
    for _, ea, es, k_ea in rows:
        assert ea <= es <= min(1.0, k_ea) + 1e-12
    path = tmp_path / "curve.csv"
    write_curve_csv(rows, path)
    assert path.read_text().splitlines()[0] == "L,e_abs,e_sub,k_eabs"


def test_report_json_roundtrip():
    rep = MetricsReport(
        kind="bce", k=4, repeats=2, e_abs=0.1, e_sub=0.3,
        per_sample_outcomes=[(100, 1.5, 2, True)],
    )
    back = MetricsReport.from_json(rep.to_json())
    assert back.e_abs == rep.e_abs
    assert back.per_sample_outcomes == [(100, 1.5, 2, True)]
