"""Discretise a trip into fixed-length steps with a phase, velocity and acceleration each."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .domain import DischargeSession, DrivingProfile

DEFAULT_N_STEPS = 1000
DEFAULT_KAPPA = 0.05
PHASE_LAYOUTS = ("contiguous", "cycles")


class Phase(enum.IntEnum):
    ACCEL = 0
    CRUISE = 1
    BRAKE = 2


@dataclass(frozen=True)
class TrajectoryStep:
    time: float  # s
    velocity: float  # m/s
    acceleration: float  # m/s^2
    phase: Phase


@dataclass(frozen=True, eq=False)
class TripTrajectory:
    """Per-step arrays for one trip. ``time[k] = k * dt``."""

    dt: float
    time: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    phase: np.ndarray  # Phase codes as int8

    @property
    def n_steps(self) -> int:
        return int(self.velocity.shape[0])

    @property
    def max_velocity_kmh(self) -> float:
        return float(self.velocity.max() * 3.6)

    @property
    def distance_m(self) -> float:
        return float(self.velocity.sum() * self.dt)

    def __len__(self) -> int:
        return self.n_steps

    def __iter__(self) -> Iterator[TrajectoryStep]:
        for k in range(self.n_steps):
            yield self.step(k)

    def step(self, k: int) -> TrajectoryStep:
        return TrajectoryStep(
            float(self.time[k]),
            float(self.velocity[k]),
            float(self.acceleration[k]),
            Phase(int(self.phase[k])),
        )

    def equals(self, other: "TripTrajectory") -> bool:
        return (
            self.dt == other.dt
            and np.array_equal(self.velocity, other.velocity)
            and np.array_equal(self.acceleration, other.acceleration)
            and np.array_equal(self.phase, other.phase)
        )


def time_step(distance: float, mean_velocity: float, n_steps: int) -> float:
    """Step length in seconds so that ``n_steps`` steps span the trip duration distance/velocity."""
    if not (distance > 0 and mean_velocity > 0 and n_steps > 0):
        raise ValueError(
            f"distance, mean_velocity and n_steps must all be > 0 "
            f"(got {distance}, {mean_velocity}, {n_steps})"
        )
    return distance * 3600.0 / (mean_velocity * n_steps)


def _phase_counts(profile: DrivingProfile, n_steps: int) -> tuple[int, int, int]:
    n_accel = int(round(n_steps * profile.accel_phase_frac))
    n_brake = int(round(n_steps * profile.brake_phase_frac))
    # rounding up both outer phases can overflow a tiny schedule
    while n_accel + n_brake > n_steps:
        if n_accel >= n_brake:
            n_accel -= 1
        else:
            n_brake -= 1
    return n_accel, n_steps - n_accel - n_brake, n_brake


def phase_schedule(profile: DrivingProfile, n_steps: int) -> np.ndarray:
    """One Accel -> Cruise -> Brake arc; cruise takes whatever rounding leaves over."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    n_accel, n_cruise, n_brake = _phase_counts(profile, n_steps)
    return np.repeat(
        np.array([Phase.ACCEL, Phase.CRUISE, Phase.BRAKE], dtype=np.int8),
        [n_accel, n_cruise, n_brake],
    )


def cyclic_phase_schedule(profile: DrivingProfile, n_steps: int, n_cycles: int) -> np.ndarray:
    """``n_cycles`` back-to-back arcs whose lengths differ by at most one step."""
    if n_cycles < 1:
        raise ValueError(f"n_cycles must be >= 1, got {n_cycles}")
    n_cycles = min(n_cycles, n_steps)
    lengths = [len(chunk) for chunk in np.array_split(np.arange(n_steps), n_cycles)]
    return np.concatenate([phase_schedule(profile, n) for n in lengths])


def velocity_perturbation(
    rng: np.random.Generator,
    profile: DrivingProfile,
    mean_velocity_ms: float,
    kappa: float = DEFAULT_KAPPA,
    size: Optional[int] = None,
):
    """Zero-mean normal draw(s) with std kappa * efficiency_multiplier * mean velocity."""
    if mean_velocity_ms <= 0:
        raise ValueError("mean_velocity_ms must be > 0")
    sigma = kappa * profile.efficiency_multiplier * mean_velocity_ms
    if sigma == 0.0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sigma, size)


def step_acceleration(phase, profile: DrivingProfile):
    """+0.7 a_max while accelerating, 0 cruising, -0.7 a_max braking. Accepts arrays."""
    sign = 1 - np.asarray(phase, dtype=np.int64)  # ACCEL=0 -> 1, CRUISE=1 -> 0, BRAKE=2 -> -1
    accel = 0.7 * profile.max_accel * sign.astype(float)
    return float(accel) if accel.ndim == 0 else accel


def synthesize_trajectory(
    session: DischargeSession,
    n_steps: int = DEFAULT_N_STEPS,
    rng: Optional[np.random.Generator] = None,
    *,
    profile: Optional[DrivingProfile] = None,
    kappa: float = DEFAULT_KAPPA,
    layout: str = "contiguous",
    n_cycles: int = 10,
) -> TripTrajectory:
    """Build the per-step velocity/acceleration/phase arrays for ``session``.

    Velocity is the mean velocity plus an independent perturbation per step,
    clamped at zero. Acceleration follows the phase only and is not integrated
    into the velocity.
    """
    profile = profile or session.profile
    dt = time_step(session.distance, session.mean_velocity, n_steps)
    if layout == "contiguous":
        phases = phase_schedule(profile, n_steps)
    elif layout == "cycles":
        phases = cyclic_phase_schedule(profile, n_steps, n_cycles)
    else:
        raise ValueError(f"unknown phase layout {layout!r} (expected one of {PHASE_LAYOUTS})")

    v_mean = session.mean_velocity_ms
    if kappa == 0.0:
        velocity = np.full(n_steps, v_mean)
    else:
        if rng is None:
            raise ValueError("an rng is required when kappa > 0")
        dv = velocity_perturbation(rng, profile, v_mean, kappa, size=n_steps)
        velocity = np.maximum(v_mean + dv, 0.0)

    return TripTrajectory(
        dt=dt,
        time=np.arange(n_steps) * dt,
        velocity=velocity,
        acceleration=step_acceleration(phases, profile),
        phase=phases,
    )
