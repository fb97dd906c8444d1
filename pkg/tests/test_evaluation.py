import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ev_discharge.dataset import TripRecord, select
from ev_discharge.domain import DischargeSession, DrivingMode
from ev_discharge.evaluation import (
    BaselinePredictor,
    FitError,
    OLS_COLUMNS,
    ablation_study,
    build_predictors,
    compute_metrics,
    consumption_stats,
    emit_figure_data,
    evaluate,
    fit_linear_baseline,
    fit_ols,
    ols_design,
    rolling_mean,
    stratified_report,
    velocity_band,
)
from ev_discharge.hybrid import fit_residual_model, predict_records
from ev_discharge.network import TrainConfig


def rec(i, distance, velocity, mode, true, physics=None, temp=20.0, split="test"):
    s = DischargeSession(0.8, distance, velocity, mode, temp)
    return TripRecord(i, s, physics if physics is not None else true, true, split=split, max_velocity_kmh=velocity)


# --- metrics --------------------------------------------------------------

def test_metrics_hand_values():
    m = compute_metrics([10.0, 5.0], [10.0, 5.0])
    assert (m.mae, m.mape, m.rmse, m.n) == (0.0, 0.0, 0.0, 2)
    m = compute_metrics([11.0], [10.0])
    assert (m.mae, m.mape, m.rmse) == pytest.approx((1.0, 10.0, 1.0))
    m = compute_metrics([12.0, 8.0], [10.0, 10.0])
    assert (m.mae, m.mape, m.rmse) == pytest.approx((2.0, 20.0, 2.0))


def test_metrics_errors():
    with pytest.raises(ValueError, match="index 1"):
        compute_metrics([1.0, 1.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        compute_metrics([], [])
    with pytest.raises(ValueError):
        compute_metrics([1.0], [1.0, 2.0])


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0.1, 100)), min_size=1, max_size=50))
def test_mae_never_exceeds_rmse(pairs):
    p, t = zip(*pairs)
    m = compute_metrics(p, t)
    assert 0 <= m.mae <= m.rmse * (1 + 1e-12) + 1e-12
    assert m.mape >= 0


# --- linear baseline ------------------------------------------------------

def _sessions(rng, n):
    modes = list(DrivingMode)
    return [DischargeSession(0.8, float(rng.uniform(20, 200)), float(rng.choice([40, 60, 80, 100, 120])),
                             modes[i % 3], float(rng.choice([-5, 20, 32]))) for i in range(n)]


def test_ols_recovers_exact_linear_target(rng):
    sessions = _sessions(rng, 200)
    X = ols_design(sessions)
    coef = fit_ols(X, 0.2 * X[:, 1])
    assert coef[1] == pytest.approx(0.2, abs=1e-6)
    assert np.all(np.abs(np.delete(coef, 1)) < 1e-4)


def test_ols_residuals_orthogonal(rng):
    sessions = _sessions(rng, 300)
    X = ols_design(sessions)
    y = rng.uniform(5, 50, 300)
    r = y - X @ fit_ols(X, y)
    assert np.max(np.abs(X.T @ r)) / 300 < 1e-6


def test_ols_constant_target(rng):
    X = ols_design(_sessions(rng, 60))
    coef = fit_ols(X, np.full(60, 7.0))
    assert coef[0] == pytest.approx(7.0, abs=1e-5)
    assert np.all(np.abs(coef[1:]) < 1e-6)


def test_ols_errors(rng):
    X = ols_design(_sessions(rng, 4))
    with pytest.raises(FitError):
        fit_ols(X, np.ones(4))
    same = ols_design([DischargeSession(0.8, 50.0, 60.0, "eco")] * 30)
    with pytest.raises(FitError):
        fit_ols(same, np.ones(30))


def test_linear_baseline_coefficients(small_corpus):
    base = fit_linear_baseline(select(small_corpus, "train"))
    assert list(base.to_dict()["coefficients"]) == list(OLS_COLUMNS)
    assert base.to_dict()["coefficients"]["distance"] > 0


def test_constant_rate_is_linear_in_distance():
    pred = BaselinePredictor("constant_rate")
    out = pred.predict_sessions([DischargeSession(0.8, d, 60.0, "eco") for d in (10.0, 20.0, 100.0)])
    assert np.allclose(out, [1.85, 3.7, 18.5])


# --- strata ---------------------------------------------------------------

@pytest.mark.parametrize("v, band", [(40, "40-60"), (59.9, "40-60"), (60, "60-80"), (100, "100-120"), (120, "100-120")])
def test_velocity_bands(v, band):
    assert velocity_band(v) == band


def test_velocity_band_out_of_range():
    with pytest.raises(ValueError):
        velocity_band(130.0)


def test_strata_identities(small_corpus):
    test = select(small_corpus, "test")
    pred = np.array([r.physics_energy for r in test])
    for by in ("mode", "velocity_band", "velocity_band+mode"):
        rep = stratified_report(pred, test, by)
        present = [s for s in rep.strata.values() if s is not None]
        assert sum(s.n for s in present) == rep.n
        assert sum(s.n * s.mae for s in present) / rep.n == pytest.approx(rep.mae, rel=1e-12)


def test_single_stratum_equals_overall():
    recs = [rec(i, 50.0 + i, 80.0, "eco", 8.0 + 0.1 * i, physics=8.0) for i in range(6)]
    pred = [r.physics_energy for r in recs]
    rep = stratified_report(pred, recs, "mode")
    assert rep.strata["eco"].to_dict() == {k: v for k, v in rep.to_dict().items() if k != "strata"}
    assert rep.strata["normal"] is None
    assert rep.to_dict()["strata"]["normal"] == {"n": 0}


# --- consumption stats ----------------------------------------------------

def test_consumption_single_record():
    stats = consumption_stats([rec(0, 50.0, 60.0, "eco", 7.5)])
    assert stats["eco"]["mean"] == stats["eco"]["min"] == stats["eco"]["max"] == pytest.approx(0.15)
    assert stats["eco"]["std"] == 0.0
    assert "normal" not in stats


def test_consumption_hand_values():
    recs = [rec(0, 100.0, 60.0, "eco", 12.0), rec(1, 50.0, 60.0, "eco", 8.0),
            rec(2, 100.0, 60.0, "normal", 18.0), rec(3, 100.0, 60.0, "normal", 20.0),
            rec(4, 10.0, 60.0, "aggressive", 3.0), rec(5, 20.0, 60.0, "aggressive", 4.0)]
    s = consumption_stats(recs)
    assert s["eco"]["mean"] == pytest.approx(0.14) and s["eco"]["std"] == pytest.approx(0.02)
    assert s["normal"]["mean"] == pytest.approx(0.19) and s["normal"]["std"] == pytest.approx(0.01)
    assert s["aggressive"]["min"] == pytest.approx(0.2) and s["aggressive"]["max"] == pytest.approx(0.3)


def test_consumption_mode_ordering(small_corpus):
    s = consumption_stats(small_corpus)
    assert s["eco"]["mean"] < s["normal"]["mean"] < s["aggressive"]["mean"]


# --- ablation -------------------------------------------------------------

def test_ablation_rows(small_corpus):
    cfg = TrainConfig(max_epochs=5, patience=2, seed=1)
    rows = ablation_study(small_corpus, cfg, ["battery_state"])
    assert [r.variant for r in rows] == ["full", "without_battery_state", "physics_only"]
    test = select(small_corpus, "test")
    physics = compute_metrics(predict_records(None, test), [r.true_energy for r in test]).mape
    assert rows[-1].mape == physics and rows[-1].seed is None
    assert rows[0].seed == rows[1].seed == 1


def test_ablation_unknown_group(small_corpus):
    with pytest.raises(KeyError, match="bogus"):
        ablation_study(small_corpus, TrainConfig(max_epochs=2, patience=1), ["bogus"])


# --- figure data ----------------------------------------------------------

def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_figure_data(tmp_path, small_corpus, small_model):
    model, _ = small_model
    preds = build_predictors(small_corpus, model)
    paths = emit_figure_data(small_corpus, tmp_path, preds, n_steps=100)
    errors = _read(paths["error_hist"])
    assert len(errors) == len(small_corpus) * len(preds)
    for name in preds:
        assert sum(r["model"] == name for r in errors) == len(small_corpus)

    soc = _read(paths["soc_depletion"])
    const = [(float(r["distance_km"]), float(r["soc"])) for r in soc if r["series"] == "constant_rate"]
    d, s = np.array(const).T
    assert np.allclose(s, 0.8 - 0.185 * d / 75.0)
    observed = [r for r in soc if r["series"] == "observed"]
    assert len(observed) == sum(r.session.mode is DrivingMode.NORMAL for r in small_corpus)

    rates = _read(paths["rate_vs_distance"])
    assert len(rates) == len(small_corpus)
    first_eco = next(r for r in rates if r["mode"] == "eco")
    assert float(first_eco["rolling_mean"]) == float(first_eco["rate_kwh_per_km"])


def test_rolling_mean():
    x = np.array([1.0, 4.0, 2.0, 8.0])
    assert np.array_equal(rolling_mean(x, 1), x)
    assert np.allclose(rolling_mean(x, 2), [1.0, 2.5, 3.0, 5.0])
    assert np.allclose(rolling_mean(x, 10), np.cumsum(x) / np.arange(1, 5))
    with pytest.raises(ValueError):
        rolling_mean(x, 0)


# --- end to end -----------------------------------------------------------

def test_evaluate_without_model(small_corpus):
    report = evaluate(small_corpus)
    assert list(report.comparison) == ["constant_rate", "linear_regression", "physics_only"]
    assert report.table_vii is None and report.notices
    assert not any(line.startswith("hybrid") for line in report.to_text().splitlines())


def test_evaluate_with_model(small_corpus, small_model, tmp_path):
    report = evaluate(small_corpus, small_model[0])
    assert report.comparison["hybrid"].mape < report.comparison["physics_only"].mape
    files = report.write(tmp_path)
    assert files["json"].exists() and "Model comparison" in files["text"].read_text()


def test_eco_only_corpus_constant_rate_worse_than_hybrid(small_corpus):
    eco = [r for r in small_corpus if r.session.mode is DrivingMode.ECO]
    model, _ = fit_residual_model(eco, TrainConfig(seed=0, max_epochs=40, patience=10))
    test = select(eco, "test")
    truth = [r.true_energy for r in test]
    const = compute_metrics(BaselinePredictor("constant_rate").predict(test), truth).mape
    hyb = compute_metrics(predict_records(model, test), truth).mape
    assert const > hyb
