"""Physical constants, driving profiles and trip descriptors.

All quantities are stored in the units named on each field. Unit
conversions (km/h to m/s, kW*s to kWh) happen inside the operations that
need them, never in storage.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional


class DrivingMode(str, enum.Enum):
    ECO = "eco"
    NORMAL = "normal"
    AGGRESSIVE = "aggressive"

    @classmethod
    def parse(cls, value: "str | DrivingMode") -> "DrivingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown driving mode {value!r} (expected one of {valid})") from None


MODES = (DrivingMode.ECO, DrivingMode.NORMAL, DrivingMode.AGGRESSIVE)


@dataclass(frozen=True)
class DrivingProfile:
    mode: DrivingMode
    max_accel: float  # m/s^2
    efficiency_multiplier: float
    regen_efficiency: float
    mode_aux_power: float  # kW
    accel_phase_frac: float
    cruise_phase_frac: float
    brake_phase_frac: float

    def __post_init__(self):
        if self.max_accel <= 0:
            raise ValueError(f"max_accel must be > 0, got {self.max_accel}")
        if not 0.0 < self.regen_efficiency < 1.0:
            raise ValueError(f"regen_efficiency must lie in (0, 1), got {self.regen_efficiency}")
        if self.efficiency_multiplier <= 0:
            raise ValueError("efficiency_multiplier must be > 0")
        if self.mode_aux_power < 0:
            raise ValueError("mode_aux_power must be >= 0")
        fracs = self.phase_fractions
        if min(fracs) < 0:
            raise ValueError(f"phase fractions must be non-negative, got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"phase fractions must sum to 1, got {sum(fracs)!r}")

    @property
    def phase_fractions(self) -> tuple[float, float, float]:
        return (self.accel_phase_frac, self.cruise_phase_frac, self.brake_phase_frac)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DrivingProfile":
        data = dict(data)
        data["mode"] = DrivingMode.parse(data["mode"])
        return cls(**data)


_CANONICAL = {
    DrivingMode.ECO: DrivingProfile(DrivingMode.ECO, 1.5, 0.85, 0.75, 0.0, 0.20, 0.65, 0.15),
    DrivingMode.NORMAL: DrivingProfile(DrivingMode.NORMAL, 2.5, 1.00, 0.65, 0.5, 0.30, 0.50, 0.20),
    DrivingMode.AGGRESSIVE: DrivingProfile(
        DrivingMode.AGGRESSIVE, 4.0, 1.35, 0.50, 1.5, 0.40, 0.35, 0.25
    ),
}


def canonical_profile(mode: "DrivingMode | str") -> DrivingProfile:
    """Return the built-in parameter set for one of the three driving modes."""
    return _CANONICAL[DrivingMode.parse(mode)]


@dataclass(frozen=True)
class VehicleParams:
    battery_capacity: float = 75.0  # kWh
    mass: float = 1800.0  # kg
    drag_coeff: float = 0.24
    frontal_area: float = 2.3  # m^2
    rolling_coeff: float = 0.01
    drivetrain_eff: float = 0.90
    air_density: float = 1.225  # kg/m^3
    gravity: float = 9.81  # m/s^2

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"vehicle parameter {f.name} must be a positive number, got {value!r}")
        if self.drivetrain_eff > 1.0:
            raise ValueError(f"drivetrain_eff must lie in (0, 1], got {self.drivetrain_eff}")

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "VehicleParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown vehicle parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class DischargeSession:
    """One trip: where the battery starts, how far and how fast, and how it is driven.

    ``target_final_soc`` is carried for completeness of the trip descriptor;
    the forward simulation never reads it.
    """

    initial_soc: float
    distance: float  # km
    mean_velocity: float  # km/h
    mode: DrivingMode = DrivingMode.NORMAL
    ambient_temp: float = 20.0  # degC
    time_of_day: float = 12.0  # hours
    grade_angle: float = 0.0  # rad
    target_final_soc: Optional[float] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "mode", DrivingMode.parse(self.mode))
        if not 0.0 <= self.initial_soc <= 1.0:
            raise ValueError(f"initial_soc must lie in [0, 1], got {self.initial_soc}")
        if not (math.isfinite(self.distance) and self.distance > 0):
            raise ValueError(f"distance must be > 0 km, got {self.distance}")
        if not (math.isfinite(self.mean_velocity) and self.mean_velocity > 0):
            raise ValueError(f"mean_velocity must be > 0 km/h, got {self.mean_velocity}")
        if not 0.0 <= self.time_of_day < 24.0:
            raise ValueError(f"time_of_day must lie in [0, 24), got {self.time_of_day}")
        if not math.isfinite(self.ambient_temp):
            raise ValueError("ambient_temp must be finite")
        if self.target_final_soc is not None:
            if not 0.0 <= self.target_final_soc < self.initial_soc:
                raise ValueError("target_final_soc must lie in [0, initial_soc)")

    @property
    def profile(self) -> DrivingProfile:
        return canonical_profile(self.mode)

    @property
    def mean_velocity_ms(self) -> float:
        return self.mean_velocity / 3.6

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d
