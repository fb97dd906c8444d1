"""Error metrics, comparison baselines, stratified reports, ablations and figure data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .dataset import TripRecord, select
from .domain import MODES, DischargeSession, DrivingMode, VehicleParams
from .features import FEATURE_GROUPS, feature_row
from .hybrid import fit_residual_model, predict_records
from .network import ResidualModel, TrainConfig
from .physics import simulate
from .trip import DEFAULT_N_STEPS, synthesize_trajectory

CONSTANT_RATE = 0.185  # kWh/km
VELOCITY_BANDS = ((40.0, 60.0), (60.0, 80.0), (80.0, 100.0), (100.0, 120.0))
ROLLING_WINDOW = 25


@dataclass
class MetricsReport:
    mae: float
    mape: float  # percent
    rmse: float
    n: int
    strata: Optional[dict] = None

    def to_dict(self) -> dict:
        d = {"mae": self.mae, "mape": self.mape, "rmse": self.rmse, "n": self.n}
        if self.strata is not None:
            d["strata"] = {k: (v.to_dict() if v is not None else {"n": 0}) for k, v in self.strata.items()}
        return d


def compute_metrics(predictions, truths) -> MetricsReport:
    pred = np.asarray(predictions, dtype=float)
    true = np.asarray(truths, dtype=float)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError(f"predictions and truths must be 1-D of equal length ({pred.shape} vs {true.shape})")
    if pred.size == 0:
        raise ValueError("cannot compute metrics on zero samples")
    zero = np.flatnonzero(true <= 0)
    if zero.size:
        raise ValueError(f"MAPE undefined: non-positive truth at index {int(zero[0])}")
    err = pred - true
    return MetricsReport(
        mae=float(np.mean(np.abs(err))),
        mape=float(100.0 * np.mean(np.abs(err) / true)),
        rmse=float(np.sqrt(np.mean(err * err))),
        n=int(pred.size),
    )


def _truths(records: Sequence[TripRecord]) -> np.ndarray:
    return np.array([r.true_energy for r in records])


# -- baselines ---------------------------------------------------------------

OLS_COLUMNS = ("intercept", "distance", "mean_velocity", "mode_normal", "mode_aggressive", "temperature")


def ols_design(sessions: Sequence[DischargeSession]) -> np.ndarray:
    """Eco is the reference mode, so the mode dummies are not collinear with the intercept."""
    return np.array(
        [
            [
                1.0,
                s.distance,
                s.mean_velocity,
                float(s.mode is DrivingMode.NORMAL),
                float(s.mode is DrivingMode.AGGRESSIVE),
                s.ambient_temp,
            ]
            for s in sessions
        ]
    )


class FitError(RuntimeError):
    pass


@dataclass
class BaselinePredictor:
    kind: str  # "constant_rate" | "linear_regression" | "physics_only" | "hybrid"
    rate: float = CONSTANT_RATE
    coef: Optional[np.ndarray] = None
    model: Optional[ResidualModel] = None

    def predict_sessions(self, sessions: Sequence[DischargeSession]) -> np.ndarray:
        if self.kind == "constant_rate":
            return self.rate * np.array([s.distance for s in sessions])
        if self.kind == "linear_regression":
            return ols_design(sessions) @ self.coef
        raise ValueError(f"{self.kind} needs trip records, not bare sessions")

    def predict(self, records: Sequence[TripRecord]) -> np.ndarray:
        if self.kind == "physics_only":
            return predict_records(None, records)
        if self.kind == "hybrid":
            return predict_records(self.model, records)
        return self.predict_sessions([r.session for r in records])

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant_rate":
            d["rate_kwh_per_km"] = self.rate
        if self.kind == "linear_regression":
            d["coefficients"] = dict(zip(OLS_COLUMNS, map(float, self.coef)))
        return d


def fit_ols(X: np.ndarray, y: np.ndarray, jitter: float = 1e-8) -> np.ndarray:
    """Normal equations with a small ridge term on the Gram matrix."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] < X.shape[1] + 1:
        raise FitError(f"need at least {X.shape[1] + 1} rows to fit {X.shape[1]} coefficients")
    gram = X.T @ X + jitter * np.eye(X.shape[1])
    if np.linalg.cond(gram) > 1e12:
        raise FitError("design matrix is rank deficient")
    return np.linalg.solve(gram, X.T @ y)


def fit_linear_baseline(records: Sequence[TripRecord]) -> BaselinePredictor:
    sessions = [r.session for r in records]
    return BaselinePredictor("linear_regression", coef=fit_ols(ols_design(sessions), _truths(records)))


# -- stratification ----------------------------------------------------------


def velocity_band(v: float) -> str:
    for lo, hi in VELOCITY_BANDS:
        if lo <= v < hi or (hi == VELOCITY_BANDS[-1][1] and v == hi):
            return f"{lo:g}-{hi:g}"
    raise ValueError(f"velocity {v} km/h falls outside every band")


STRATIFIERS: dict[str, Callable[[TripRecord], str]] = {
    "mode": lambda r: r.session.mode.value,
    "velocity_band": lambda r: velocity_band(r.session.mean_velocity),
    "velocity_band+mode": lambda r: f"{velocity_band(r.session.mean_velocity)}|{r.session.mode.value}",
}


def _stratum_labels(by: str) -> list[str]:
    modes = [m.value for m in MODES]
    bands = [f"{lo:g}-{hi:g}" for lo, hi in VELOCITY_BANDS]
    if by == "mode":
        return modes
    if by == "velocity_band":
        return bands
    return [f"{b}|{m}" for b in bands for m in modes]


def stratified_report(predictions, records: Sequence[TripRecord], by: str = "mode") -> MetricsReport:
    """Overall metrics plus one entry per stratum (``None`` for an empty stratum)."""
    if by not in STRATIFIERS:
        raise ValueError(f"unknown stratification {by!r} (expected one of {sorted(STRATIFIERS)})")
    pred = np.asarray(predictions, dtype=float)
    truth = _truths(records)
    labels = np.array([STRATIFIERS[by](r) for r in records])
    report = compute_metrics(pred, truth)
    report.strata = {}
    for label in _stratum_labels(by):
        mask = labels == label
        report.strata[label] = compute_metrics(pred[mask], truth[mask]) if mask.any() else None
    return report


def consumption_stats(records: Sequence[TripRecord]) -> dict:
    """Per-mode mean / population std / min / max of true kWh per km."""
    if not records:
        raise ValueError("consumption_stats needs at least one record")
    out = {}
    for mode in MODES:
        rates = np.array([r.true_energy / r.session.distance for r in records if r.session.mode is mode])
        if rates.size == 0:
            continue
        out[mode.value] = {
            "mean": float(rates.mean()),
            "std": float(rates.std()),
            "min": float(rates.min()),
            "max": float(rates.max()),
            "n": int(rates.size),
        }
    return out


# -- ablation ----------------------------------------------------------------


@dataclass
class AblationRow:
    variant: str
    removed: tuple
    mape: Optional[float]
    seed: Optional[int]
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"variant": self.variant, "removed": list(self.removed), "mape": self.mape,
                "seed": self.seed, "error": self.error}


def ablation_study(
    records: Sequence[TripRecord],
    config: TrainConfig = TrainConfig(),
    feature_groups: Optional[Sequence[str]] = None,
) -> list[AblationRow]:
    """Retrain from scratch without each feature group and report test MAPE.

    Rows: full model, one per group, physics only. Every training row uses
    ``config.seed``; a row that fails records its error and the study goes on.
    """
    groups = list(FEATURE_GROUPS) if feature_groups is None else list(feature_groups)
    for g in groups:
        if g not in FEATURE_GROUPS:
            raise KeyError(f"unknown feature group {g!r} (known: {', '.join(FEATURE_GROUPS)})")
    test = select(records, "test")
    truth = _truths(test)
    rows = []
    for variant, removed in [("full", ())] + [(f"without_{g}", (g,)) for g in groups]:
        try:
            model, _ = fit_residual_model(records, config, removed)
            mape = compute_metrics(predict_records(model, test), truth).mape
            rows.append(AblationRow(variant, removed, mape, config.seed))
        except (ValueError, RuntimeError) as exc:
            rows.append(AblationRow(variant, removed, None, config.seed, str(exc)))
    physics = compute_metrics(predict_records(None, test), truth).mape
    rows.append(AblationRow("physics_only", (), physics, None))
    return rows


# -- figure data -------------------------------------------------------------


def rolling_mean(values, window: int = ROLLING_WINDOW) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` points average what is available."""
    values = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    csum = np.concatenate(([0.0], np.cumsum(values)))
    idx = np.arange(1, values.size + 1)
    lo = np.maximum(0, idx - window)
    return (csum[idx] - csum[lo]) / (idx - lo)


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def emit_figure_data(
    records: Sequence[TripRecord],
    out_dir,
    predictors: dict,
    *,
    vehicle: VehicleParams = VehicleParams(),
    n_steps: int = DEFAULT_N_STEPS,
    seed: int = 0,
    window: int = ROLLING_WINDOW,
    scenario_velocity: float = 90.0,
    scenario_soc: float = 0.8,
    scenario_temp: float = 20.0,
) -> dict:
    """Write soc_depletion.csv, error_hist.csv and rate_vs_distance.csv into ``out_dir``.

    ``predictors`` maps a model name to a :class:`BaselinePredictor`.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    capacity = vehicle.battery_capacity

    # SoC after a normal-mode trip of each grid distance, per model
    grid = np.arange(0.0, 205.0, 5.0)
    soc_rows = []
    for name, pred in predictors.items():
        for d in grid:
            if d == 0.0:
                energy = 0.0
            else:
                session = DischargeSession(scenario_soc, float(d), scenario_velocity, DrivingMode.NORMAL, scenario_temp)
                energy = float(_scenario_energy(pred, session, vehicle, n_steps, seed))
            soc_rows.append([name, float(d), max(0.0, scenario_soc - energy / capacity)])
    for r in records:
        if r.session.mode is DrivingMode.NORMAL:
            soc_rows.append(["observed", r.session.distance, max(0.0, scenario_soc - r.true_energy / capacity)])
    paths = {"soc_depletion": _write_csv(out_dir / "soc_depletion.csv", ["series", "distance_km", "soc"], soc_rows)}

    truth = _truths(records)
    err_rows = []
    for name, pred in predictors.items():
        signed = 100.0 * (pred.predict(records) - truth) / truth
        for r, e in zip(records, signed):
            err_rows.append([name, r.trip_id, r.session.mode.value, float(e)])
    paths["error_hist"] = _write_csv(
        out_dir / "error_hist.csv", ["model", "trip_id", "mode", "signed_pct_error"], err_rows
    )

    rate_rows = []
    for mode in MODES:
        recs = sorted((r for r in records if r.session.mode is mode), key=lambda r: (r.session.distance, r.trip_id))
        if not recs:
            continue
        rates = np.array([r.true_energy / r.session.distance for r in recs])
        for r, rate, trend in zip(recs, rates, rolling_mean(rates, window)):
            rate_rows.append([mode.value, r.session.distance, float(rate), float(trend)])
    paths["rate_vs_distance"] = _write_csv(
        out_dir / "rate_vs_distance.csv", ["mode", "distance_km", "rate_kwh_per_km", "rolling_mean"], rate_rows
    )
    return paths


def _scenario_energy(pred: BaselinePredictor, session, vehicle, n_steps, seed) -> float:
    if pred.kind in ("constant_rate", "linear_regression"):
        return float(pred.predict_sessions([session])[0])
    trajectory = synthesize_trajectory(session, n_steps, np.random.default_rng(seed))
    physics = simulate(session, vehicle, trajectory).total_energy
    if pred.kind == "physics_only" or pred.model is None:
        return physics
    row = feature_row(session, physics, trajectory.max_velocity_kmh)
    return max(0.0, physics + float(pred.model.predict_raw(row)[0]))


# -- full evaluation ---------------------------------------------------------


@dataclass
class EvaluationReport:
    comparison: dict  # model name -> MetricsReport on the test split
    by_mode: dict  # model name -> MetricsReport with strata
    by_velocity: dict
    table_vii: Optional[MetricsReport]
    consumption: dict
    linear_baseline: dict
    ablation: Optional[list] = None
    notices: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "comparison": {k: v.to_dict() for k, v in self.comparison.items()},
            "by_mode": {k: v.to_dict() for k, v in self.by_mode.items()},
            "by_velocity_band": {k: v.to_dict() for k, v in self.by_velocity.items()},
            "hybrid_by_velocity_and_mode": self.table_vii.to_dict() if self.table_vii else None,
            "consumption_stats": self.consumption,
            "linear_baseline": self.linear_baseline,
            "notices": self.notices,
        }
        if self.ablation is not None:
            d["ablation"] = [row.to_dict() for row in self.ablation]
        return d

    def to_text(self) -> str:
        lines = ["Model comparison on the test split", f"{'model':<20}{'MAE kWh':>10}{'MAPE %':>10}{'RMSE kWh':>10}{'n':>6}"]
        for name, m in self.comparison.items():
            lines.append(f"{name:<20}{m.mae:>10.3f}{m.mape:>10.2f}{m.rmse:>10.3f}{m.n:>6d}")
        lines += ["", "MAPE % by driving mode", f"{'model':<20}" + "".join(f"{m.value:>12}" for m in MODES)]
        for name, rep in self.by_mode.items():
            cells = [rep.strata.get(m.value) for m in MODES]
            lines.append(f"{name:<20}" + "".join(f"{c.mape:>12.2f}" if c else f"{'-':>12}" for c in cells))
        if self.table_vii is not None:
            lines += ["", "Hybrid MAPE % by velocity band and mode",
                      f"{'band km/h':<12}" + "".join(f"{m.value:>12}" for m in MODES)]
            for lo, hi in VELOCITY_BANDS:
                band = f"{lo:g}-{hi:g}"
                cells = [self.table_vii.strata.get(f"{band}|{m.value}") for m in MODES]
                lines.append(f"{band:<12}" + "".join(f"{c.mape:>12.2f}" if c else f"{'-':>12}" for c in cells))
        lines += ["", "Consumption rate kWh/km (all splits)", f"{'stat':<8}" + "".join(f"{m.value:>12}" for m in MODES)]
        for stat in ("mean", "std", "min", "max"):
            lines.append(f"{stat:<8}" + "".join(
                f"{self.consumption[m.value][stat]:>12.3f}" if m.value in self.consumption else f"{'-':>12}"
                for m in MODES))
        if self.ablation is not None:
            lines += ["", "Feature ablation (test MAPE %)"]
            for row in self.ablation:
                value = f"{row.mape:.2f}" if row.mape is not None else f"error: {row.error}"
                lines.append(f"  {row.variant:<32}{value}")
        for note in self.notices:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> dict:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        js = out_dir / "report.json"
        js.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        txt = out_dir / "report.txt"
        txt.write_text(self.to_text())
        return {"json": js, "text": txt}


def build_predictors(records: Sequence[TripRecord], model: Optional[ResidualModel]) -> dict:
    predictors = {
        "constant_rate": BaselinePredictor("constant_rate"),
        "linear_regression": fit_linear_baseline(select(records, "train")),
        "physics_only": BaselinePredictor("physics_only"),
    }
    if model is not None:
        predictors["hybrid"] = BaselinePredictor("hybrid", model=model)
    return predictors


def evaluate(
    records: Sequence[TripRecord],
    model: Optional[ResidualModel] = None,
    *,
    ablation_config: Optional[TrainConfig] = None,
) -> EvaluationReport:
    test = select(records, "test")
    if not test:
        raise ValueError("corpus has no test split")
    predictors = build_predictors(records, model)
    truth = _truths(test)
    comparison, by_mode, by_velocity = {}, {}, {}
    for name, pred in predictors.items():
        p = pred.predict(test)
        comparison[name] = compute_metrics(p, truth)
        by_mode[name] = stratified_report(p, test, "mode")
        by_velocity[name] = stratified_report(p, test, "velocity_band")
    notices = []
    table_vii = None
    if model is not None:
        table_vii = stratified_report(predictors["hybrid"].predict(test), test, "velocity_band+mode")
    else:
        notices.append("no residual model supplied; hybrid rows omitted")
    ablation = ablation_study(records, ablation_config) if ablation_config is not None else None
    return EvaluationReport(
        comparison=comparison,
        by_mode=by_mode,
        by_velocity=by_velocity,
        table_vii=table_vii,
        consumption=consumption_stats(records),
        linear_baseline=predictors["linear_regression"].to_dict(),
        ablation=ablation,
        notices=notices,
    )
