"""Trip feature matrix for the residual learner and its standardisation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import DischargeSession, DrivingMode

FEATURE_NAMES = (
    "distance",
    "mean_velocity",
    "max_velocity",
    "mode_eco",
    "mode_normal",
    "mode_aggressive",
    "temperature",
    "time_of_day",
    "initial_soc",
    "physics_energy",
    "consumption_rate",
)
ONE_HOT = ("mode_eco", "mode_normal", "mode_aggressive")

FEATURE_GROUPS = {
    "physics_prediction": ("physics_energy", "consumption_rate"),
    "driving_behavior": ONE_HOT,
    "velocity": ("mean_velocity", "max_velocity"),
    "environmental": ("temperature", "time_of_day"),
    "battery_state": ("initial_soc",),
}


def feature_row(session: DischargeSession, physics_energy: float, max_velocity_kmh: float) -> np.ndarray:
    if session.distance <= 0:
        raise ValueError("distance must be > 0 to form a consumption rate")
    mode = session.mode
    return np.array(
        [
            session.distance,
            session.mean_velocity,
            max_velocity_kmh,
            float(mode is DrivingMode.ECO),
            float(mode is DrivingMode.NORMAL),
            float(mode is DrivingMode.AGGRESSIVE),
            session.ambient_temp,
            session.time_of_day,
            session.initial_soc,
            physics_energy,
            physics_energy / session.distance,
        ]
    )


def raw_features(records: Sequence) -> np.ndarray:
    """Unscaled (n, 11) matrix for a sequence of TripRecords."""
    if not records:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.vstack([feature_row(r.session, r.physics_energy, r.max_velocity_kmh) for r in records])


def columns_without(groups: Sequence[str] = ()) -> tuple[str, ...]:
    dropped = set()
    for g in groups:
        if g not in FEATURE_GROUPS:
            raise KeyError(f"unknown feature group {g!r} (known: {', '.join(FEATURE_GROUPS)})")
        dropped.update(FEATURE_GROUPS[g])
    return tuple(name for name in FEATURE_NAMES if name not in dropped)


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, raw: np.ndarray, columns: Sequence[str] = FEATURE_NAMES) -> "StandardizationStats":
        """Fit on the *training* rows of ``raw``; one-hot columns are left unscaled."""
        columns = tuple(columns)
        idx = [FEATURE_NAMES.index(c) for c in columns]
        sub = raw[:, idx]
        mean = sub.mean(axis=0)
        std = sub.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        for j, name in enumerate(columns):
            if name in ONE_HOT:
                mean[j], std[j] = 0.0, 1.0
        return cls(columns, mean, std)

    def transform(self, raw: np.ndarray) -> np.ndarray:
        raw = np.atleast_2d(raw)
        idx = [FEATURE_NAMES.index(c) for c in self.columns]
        return (raw[:, idx] - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationStats":
        return cls(tuple(d["columns"]), np.asarray(d["mean"], float), np.asarray(d["std"], float))


def featurize(records: Sequence, stats: StandardizationStats) -> np.ndarray:
    return stats.transform(raw_features(records))
