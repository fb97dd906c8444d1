"""Longitudinal power model and energy / state-of-charge integration.

Force and power helpers accept scalars or numpy arrays and broadcast.
Powers are returned in kW.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .domain import DischargeSession, DrivingProfile, VehicleParams
from .trip import Phase, TripTrajectory

BASE_AUX_POWER = 0.5  # kW
DEFAULT_REGEN_LIMIT = 50.0  # kW of charge acceptance above the concurrent draw


def rolling_force(vehicle: VehicleParams, grade=0.0):
    return vehicle.rolling_coeff * vehicle.mass * vehicle.gravity * np.cos(grade)


def aero_force(vehicle: VehicleParams, velocity):
    return 0.5 * vehicle.air_density * vehicle.drag_coeff * vehicle.frontal_area * np.square(velocity)


def grade_force(vehicle: VehicleParams, grade=0.0):
    return vehicle.mass * vehicle.gravity * np.sin(grade)


def inertial_force(vehicle: VehicleParams, accel):
    return vehicle.mass * np.asarray(accel, dtype=float)


def traction_power(vehicle: VehicleParams, profile: DrivingProfile, velocity, accel, grade=0.0):
    """Battery-side traction power scaled by the mode's efficiency multiplier.

    A negative force total gives zero traction power; braking recovery is
    accounted for separately by :func:`regen_power`.
    """
    force = (
        rolling_force(vehicle, grade)
        + aero_force(vehicle, velocity)
        + grade_force(vehicle, grade)
        + inertial_force(vehicle, accel)
    )
    wheel = np.maximum(0.0, force * velocity / vehicle.drivetrain_eff)
    return profile.efficiency_multiplier * wheel / 1000.0


def climate_power(ambient_temp: float) -> float:
    if ambient_temp < 0:
        return 2.0
    if ambient_temp < 15:
        return 1.0
    if ambient_temp <= 25:
        return 0.5
    return 2.5


def auxiliary_power(profile: DrivingProfile, ambient_temp: float) -> float:
    return BASE_AUX_POWER + climate_power(ambient_temp) + profile.mode_aux_power


def regen_power(vehicle: VehicleParams, profile: DrivingProfile, velocity, accel):
    accel = np.asarray(accel, dtype=float)
    braking = vehicle.mass * np.abs(accel) * velocity / 1000.0
    return np.where(accel < 0, profile.regen_efficiency * braking, 0.0)


@dataclass(frozen=True)
class PowerBreakdown:
    traction: float
    auxiliary: float
    regen: float

    @property
    def net(self) -> float:
        return self.traction + self.auxiliary - self.regen


def power_at(
    vehicle: VehicleParams,
    profile: DrivingProfile,
    velocity: float,
    accel: float,
    ambient_temp: float,
    grade: float = 0.0,
    regen_limit: float = DEFAULT_REGEN_LIMIT,
) -> PowerBreakdown:
    pt = float(traction_power(vehicle, profile, velocity, accel, grade))
    pa = auxiliary_power(profile, ambient_temp)
    pr = min(float(regen_power(vehicle, profile, velocity, accel)), pt + pa + regen_limit)
    return PowerBreakdown(pt, pa, pr)


@dataclass(frozen=True, eq=False)
class SimulationResult:
    total_energy: float  # kWh
    final_soc: float
    initial_soc: float
    distance: float  # km
    soc_time: np.ndarray  # s, n_steps + 1 points
    soc: np.ndarray
    traction_energy: float  # kWh
    auxiliary_energy: float  # kWh
    regen_recovered: float  # kWh
    braking_energy: float  # kWh of m*|a|*v over braking steps, before regen efficiency
    braking_event_count: int
    depleted: bool

    @property
    def consumption_rate(self) -> float:
        return self.total_energy / self.distance

    @property
    def energy_breakdown(self) -> dict[str, float]:
        return {
            "traction": self.traction_energy,
            "auxiliary": self.auxiliary_energy,
            "regen_recovered": self.regen_recovered,
        }

    def to_dict(self, include_trajectory: bool = False) -> dict:
        d = {
            "total_energy_kwh": self.total_energy,
            "final_soc": self.final_soc,
            "initial_soc": self.initial_soc,
            "distance_km": self.distance,
            "consumption_rate_kwh_per_km": self.consumption_rate,
            "energy_breakdown_kwh": self.energy_breakdown,
            "braking_energy_kwh": self.braking_energy,
            "braking_event_count": self.braking_event_count,
            "depleted": self.depleted,
        }
        if include_trajectory:
            d["soc_trajectory"] = [[float(t), float(s)] for t, s in zip(self.soc_time, self.soc)]
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(**kwargs), indent=2)

    def write_soc_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_s", "soc"])
            for t, s in zip(self.soc_time, self.soc):
                writer.writerow([repr(float(t)), repr(float(s))])


def count_runs(mask: np.ndarray) -> int:
    """Number of maximal runs of True in a boolean array."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return 0
    return int(mask[0]) + int(np.count_nonzero(mask[1:] & ~mask[:-1]))


def simulate(
    session: DischargeSession,
    vehicle: VehicleParams,
    trajectory: TripTrajectory,
    *,
    profile: Optional[DrivingProfile] = None,
    regen_limit: float = DEFAULT_REGEN_LIMIT,
    aux_power: Optional[float] = None,
) -> SimulationResult:
    """Integrate battery power over the trajectory.

    ``aux_power`` overrides the auxiliary model (kW) when given. The returned
    SoC trajectory is floored at zero; ``total_energy`` is never truncated.
    """
    profile = profile or session.profile
    v = trajectory.velocity
    a = trajectory.acceleration
    dt = trajectory.dt
    grade = session.grade_angle

    p_trac = traction_power(vehicle, profile, v, a, grade)
    p_aux = auxiliary_power(profile, session.ambient_temp) if aux_power is None else float(aux_power)
    p_regen = np.minimum(regen_power(vehicle, profile, v, a), p_trac + p_aux + regen_limit)

    to_kwh = dt / 3600.0
    traction_kwh = float(p_trac.sum()) * to_kwh
    aux_kwh = p_aux * trajectory.n_steps * to_kwh
    regen_kwh = float(p_regen.sum()) * to_kwh
    total = traction_kwh + aux_kwh - regen_kwh

    braking = a < 0
    braking_kwh = float((vehicle.mass * np.abs(a[braking]) * v[braking]).sum()) / 1000.0 * to_kwh

    capacity = vehicle.battery_capacity
    cumulative = np.concatenate(([0.0], np.cumsum((p_trac + p_aux - p_regen) * to_kwh)))
    soc = np.maximum(0.0, session.initial_soc - cumulative / capacity)
    final_soc = max(0.0, session.initial_soc - total / capacity)

    return SimulationResult(
        total_energy=total,
        final_soc=final_soc,
        initial_soc=session.initial_soc,
        distance=session.distance,
        soc_time=np.arange(trajectory.n_steps + 1) * dt,
        soc=soc,
        traction_energy=traction_kwh,
        auxiliary_energy=aux_kwh,
        regen_recovered=regen_kwh,
        braking_energy=braking_kwh,
        braking_event_count=count_runs(trajectory.phase == Phase.BRAKE),
        depleted=bool(session.initial_soc - total / capacity <= 0.0),
    )
