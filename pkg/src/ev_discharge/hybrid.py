"""Physics baseline plus learned residual, falling back to physics alone without a model."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import TripRecord, select
from .domain import DischargeSession, DrivingProfile, VehicleParams
from .features import StandardizationStats, columns_without, feature_row, raw_features
from .network import ResidualModel, TrainConfig, TrainingLog, train
from .physics import simulate
from .seeding import derive_seed
from .trip import DEFAULT_KAPPA, DEFAULT_N_STEPS, synthesize_trajectory


@dataclass(frozen=True)
class HybridPrediction:
    physics_energy: float
    residual: float
    hybrid_energy: float
    final_soc: float
    used_fallback: bool
    clamped: bool
    physics_latency: float  # ms
    ml_latency: float  # ms
    total_latency: float  # ms

    def to_dict(self, include_latency: bool = True) -> dict:
        d = asdict(self)
        if not include_latency:
            for key in ("physics_latency", "ml_latency", "total_latency"):
                d.pop(key)
        return d


def fit_residual_model(
    records: Sequence[TripRecord],
    config: TrainConfig = TrainConfig(),
    exclude_groups: Sequence[str] = (),
) -> tuple[ResidualModel, TrainingLog]:
    """Standardise on the train split, then train on train/val residuals."""
    train_recs = select(records, "train")
    val_recs = select(records, "val")
    if not train_recs or not val_recs:
        raise ValueError("corpus needs non-empty train and val splits")
    raw_train = raw_features(train_recs)
    stats = StandardizationStats.fit(raw_train, columns_without(exclude_groups))
    y_train = np.array([r.residual for r in train_recs])
    y_val = np.array([r.residual for r in val_recs])
    net, log = train(stats.transform(raw_train), y_train, stats.transform(raw_features(val_recs)), y_val, config)
    return ResidualModel(net, stats, config), log


def predict_records(model: Optional[ResidualModel], records: Sequence[TripRecord]) -> np.ndarray:
    """Hybrid energies for stored records (physics energies are reused, not re-simulated)."""
    physics = np.array([r.physics_energy for r in records])
    if model is None:
        return physics
    return np.maximum(physics + model.predict_raw(raw_features(records)), 0.0)


def predict(
    session: DischargeSession,
    vehicle: VehicleParams = VehicleParams(),
    model: Optional[ResidualModel] = None,
    n_steps: int = DEFAULT_N_STEPS,
    seed: int = 0,
    *,
    kappa: float = DEFAULT_KAPPA,
    layout: str = "contiguous",
    n_cycles: int = 10,
    profile: Optional[DrivingProfile] = None,
) -> HybridPrediction:
    """Simulate the trip, then add the model's residual when a model is supplied.

    A negative hybrid energy is clamped to zero and flagged via ``clamped``.
    """
    t0 = time.perf_counter()
    trajectory = synthesize_trajectory(
        session, n_steps, np.random.default_rng(seed), profile=profile,
        kappa=kappa, layout=layout, n_cycles=n_cycles,
    )
    physics = simulate(session, vehicle, trajectory, profile=profile).total_energy
    t1 = time.perf_counter()

    residual = 0.0
    if model is not None:
        row = feature_row(session, physics, trajectory.max_velocity_kmh)
        residual = float(model.predict_raw(row)[0])
    t2 = time.perf_counter()

    hybrid = physics + residual
    clamped = hybrid < 0.0
    if clamped:
        hybrid = 0.0
    final_soc = max(0.0, session.initial_soc - hybrid / vehicle.battery_capacity)
    return HybridPrediction(
        physics_energy=physics,
        residual=residual,
        hybrid_energy=hybrid,
        final_soc=final_soc,
        used_fallback=model is None,
        clamped=clamped,
        physics_latency=(t1 - t0) * 1e3,
        ml_latency=(t2 - t1) * 1e3,
        total_latency=(t2 - t0) * 1e3,
    )


@dataclass
class BatchResult:
    predictions: list
    errors: dict  # index -> message
    total_latency: float  # ms, wall clock for the whole batch

    @property
    def mean_latency(self) -> float:
        return self.total_latency / max(1, len(self.predictions) + len(self.errors))


def predict_batch(
    sessions: Sequence[DischargeSession],
    vehicle: VehicleParams = VehicleParams(),
    model: Optional[ResidualModel] = None,
    n_steps: int = DEFAULT_N_STEPS,
    master_seed: int = 0,
    *,
    profiles: Sequence[DrivingProfile] = (),
    **kwargs,
) -> BatchResult:
    """Predict every session with seed ``derive_seed(master_seed, "trip", i)``.

    Failing items are recorded in ``errors`` (and get ``None`` in
    ``predictions``); the rest of the batch still runs. The residual model is
    evaluated once on the stacked feature matrix.
    """
    if not sessions:
        raise ValueError("predict_batch needs at least one session")
    overrides = {p.mode: p for p in profiles}
    t0 = time.perf_counter()
    physics, rows, errors, timings = {}, {}, {}, {}
    for i, session in enumerate(sessions):
        s0 = time.perf_counter()
        try:
            profile = overrides.get(session.mode)
            trajectory = synthesize_trajectory(
                session, n_steps, np.random.default_rng(derive_seed(master_seed, "trip", i)),
                profile=profile, **kwargs,
            )
            physics[i] = simulate(session, vehicle, trajectory, profile=profile).total_energy
            rows[i] = feature_row(session, physics[i], trajectory.max_velocity_kmh)
        except (ValueError, ArithmeticError) as exc:
            errors[i] = str(exc)
        timings[i] = (time.perf_counter() - s0) * 1e3

    ok = sorted(physics)
    residuals = np.zeros(len(ok))
    m0 = time.perf_counter()
    if model is not None and ok:
        residuals = model.predict_raw(np.vstack([rows[i] for i in ok]))
    ml_each = (time.perf_counter() - m0) * 1e3 / max(1, len(ok))

    predictions: list = [None] * len(sessions)
    for i, res in zip(ok, residuals):
        session = sessions[i]
        hybrid = physics[i] + float(res)
        clamped = hybrid < 0.0
        hybrid = max(hybrid, 0.0)
        predictions[i] = HybridPrediction(
            physics_energy=physics[i],
            residual=float(res),
            hybrid_energy=hybrid,
            final_soc=max(0.0, session.initial_soc - hybrid / vehicle.battery_capacity),
            used_fallback=model is None,
            clamped=clamped,
            physics_latency=timings[i],
            ml_latency=ml_each,
            total_latency=timings[i] + ml_each,
        )
    return BatchResult(predictions, errors, (time.perf_counter() - t0) * 1e3)
