"""Synthetic trip corpus: sampled sessions, physics baseline, noisy ground truth, splits."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .domain import MODES, DischargeSession, DrivingMode, DrivingProfile, VehicleParams
from .physics import simulate
from .seeding import make_rng
from .trip import DEFAULT_KAPPA, DEFAULT_N_STEPS, synthesize_trajectory

GENERATOR_VERSION = "1.0"

VELOCITY_CHOICES = (40.0, 60.0, 80.0, 100.0, 120.0)
TEMPERATURE_CHOICES = (20.0, -5.0, 32.0)
NOISE_KEYS = ("terrain", "traffic", "driver", "weather")
SPLITS = ("train", "val", "test")

CSV_COLUMNS = [
    "trip_id", "distance_km", "mean_velocity_kmh", "mode", "temp_c", "time_of_day_h",
    "initial_soc", "physics_kwh", "true_kwh", "residual_kwh", "eps_terrain", "eps_traffic",
    "eps_driver", "eps_weather", "split", "max_velocity_kmh",
]


@dataclass(frozen=True)
class NoiseConfig:
    sigma_terrain: float = 0.05
    sigma_traffic: float = 0.08
    sigma_driver: float = 0.06
    sigma_weather: float = 0.03
    structured_fraction: float = 0.7

    def __post_init__(self):
        if min(self.sigmas) < 0:
            raise ValueError("noise standard deviations must be >= 0")
        if not 0.0 <= self.structured_fraction <= 1.0:
            raise ValueError("structured_fraction must lie in [0, 1]")

    @property
    def sigmas(self) -> tuple[float, float, float, float]:
        return (self.sigma_terrain, self.sigma_traffic, self.sigma_driver, self.sigma_weather)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TripRecord:
    trip_id: int
    session: DischargeSession
    physics_energy: float
    true_energy: float
    noise: dict = field(default_factory=dict)
    split: str = "train"
    max_velocity_kmh: float = 0.0

    @property
    def residual(self) -> float:
        return self.true_energy - self.physics_energy

    def to_row(self) -> list:
        s = self.session
        return [
            self.trip_id, repr(s.distance), repr(s.mean_velocity), s.mode.value,
            repr(s.ambient_temp), repr(s.time_of_day), repr(s.initial_soc),
            repr(self.physics_energy), repr(self.true_energy), repr(self.residual),
            *(repr(float(self.noise.get(k, 0.0))) for k in NOISE_KEYS),
            self.split, repr(self.max_velocity_kmh),
        ]


def sample_session(rng: np.random.Generator) -> DischargeSession:
    distance = rng.uniform(20.0, 200.0)
    velocity = VELOCITY_CHOICES[rng.integers(len(VELOCITY_CHOICES))]
    soc = rng.uniform(0.3, 1.0)
    mode = MODES[rng.integers(len(MODES))]
    temp = TEMPERATURE_CHOICES[rng.integers(len(TEMPERATURE_CHOICES))]
    tod = rng.uniform(0.0, 24.0)
    return DischargeSession(
        initial_soc=float(soc), distance=float(distance), mean_velocity=velocity,
        mode=mode, ambient_temp=temp, time_of_day=float(tod),
    )


# Structured (feature-dependent) noise shapes. Each raw shape has zero mean and
# unit std under the session sampling distribution, so g_j = sigma_j * shape.

_TERRAIN_PHASE = 2 * math.pi * (
    int.from_bytes(hashlib.blake2b(b"terrain", digest_size=4).digest(), "little") / 2**32
)
_DRIVER_LEVELS = {DrivingMode.ECO: -1.0, DrivingMode.NORMAL: 0.0, DrivingMode.AGGRESSIVE: 1.0}
_WEATHER_LEVELS = {-5.0: 1.0, 20.0: -1.0, 32.0: 0.0}
_LEVEL_SCALE = math.sqrt(1.5)  # {-1, 0, 1} uniform has std sqrt(2/3)


def _rush(tod):
    tod = np.asarray(tod, dtype=float)
    return np.exp(-0.5 * ((tod - 8.0) / 3.0) ** 2) + np.exp(-0.5 * ((tod - 17.5) / 3.0) ** 2)


def _moments_uniform_tod(fn, n: int = 240_000) -> tuple[float, float]:
    grid = (np.arange(n) + 0.5) * (24.0 / n)
    vals = fn(grid)
    return float(vals.mean()), float(vals.std())


_RUSH_MEAN, _RUSH_STD = _moments_uniform_tod(_rush)
_VELOCITY_MEAN = float(np.mean(VELOCITY_CHOICES))
_VELOCITY_STD = float(np.std(VELOCITY_CHOICES))


def structured_shapes(session: DischargeSession) -> dict[str, float]:
    """Deterministic unit-variance noise shapes for one session."""
    terrain = math.sqrt(2.0) * math.sin(2 * math.pi * session.time_of_day / 24.0 + _TERRAIN_PHASE)
    slow = -(session.mean_velocity - _VELOCITY_MEAN) / _VELOCITY_STD
    rush = (float(_rush(session.time_of_day)) - _RUSH_MEAN) / _RUSH_STD
    traffic = (slow + rush) / math.sqrt(2.0)
    driver = _LEVEL_SCALE * _DRIVER_LEVELS[session.mode]
    weather = _LEVEL_SCALE * _WEATHER_LEVELS.get(session.ambient_temp, _weather_level(session.ambient_temp))
    return {"terrain": terrain, "traffic": traffic, "driver": driver, "weather": weather}


def _weather_level(temp: float) -> float:
    # temperatures off the sampled grid: cold is costly, mild is cheap, hot in between
    if temp < 5.0:
        return 1.0
    if temp <= 26.0:
        return -1.0
    return 0.0


def apply_noise(
    physics_energy: float,
    session: DischargeSession,
    config: NoiseConfig,
    rng: np.random.Generator,
) -> tuple[float, dict[str, float]]:
    """Return (true_energy, per-factor relative noise)."""
    if not physics_energy > 0:
        raise ValueError(f"physics_energy must be > 0, got {physics_energy}")
    frac = config.structured_fraction
    shapes = structured_shapes(session)
    draws = rng.normal(0.0, 1.0, len(NOISE_KEYS))
    eps = {
        key: frac * sigma * shapes[key] + (1.0 - frac) * sigma * float(z)
        for key, sigma, z in zip(NOISE_KEYS, config.sigmas, draws)
    }
    return physics_energy * (1.0 + sum(eps.values())), eps


def split_counts(n_trips: int) -> dict[str, int]:
    n_val = int(math.floor(0.15 * n_trips))
    n_test = int(math.floor(0.15 * n_trips))
    return {"train": n_trips - n_val - n_test, "val": n_val, "test": n_test}


@dataclass(frozen=True)
class CorpusSettings:
    n_trips: int = 1500
    seed: int = 0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    n_steps: int = DEFAULT_N_STEPS
    kappa: float = DEFAULT_KAPPA
    layout: str = "contiguous"
    n_cycles: int = 10
    profiles: tuple = ()  # DrivingProfile overrides, at most one per mode

    def profile_for(self, mode: DrivingMode) -> Optional[DrivingProfile]:
        for p in self.profiles:
            if p.mode is mode:
                return p
        return None

    def to_dict(self) -> dict:
        d = {
            "generator_version": GENERATOR_VERSION,
            "n_trips": self.n_trips,
            "seed": self.seed,
            "noise": self.noise.to_dict(),
            "vehicle": self.vehicle.to_dict(),
            "n_steps": self.n_steps,
            "kappa": self.kappa,
            "phase_layout": self.layout,
            "phase_cycles": self.n_cycles,
        }
        if self.profiles:
            d["profiles"] = {p.mode.value: p.to_dict() for p in self.profiles}
        return d


class CorpusError(RuntimeError):
    pass


def generate_trip(settings: CorpusSettings, index: int) -> TripRecord:
    session = sample_session(make_rng(settings.seed, "session", index))
    profile = settings.profile_for(session.mode)
    trajectory = synthesize_trajectory(
        session, settings.n_steps, make_rng(settings.seed, "trip", index), profile=profile,
        kappa=settings.kappa, layout=settings.layout, n_cycles=settings.n_cycles,
    )
    physics = simulate(session, settings.vehicle, trajectory, profile=profile).total_energy
    true_energy, eps = apply_noise(physics, session, settings.noise, make_rng(settings.seed, "noise", index))
    return TripRecord(index, session, physics, true_energy, eps, "train", trajectory.max_velocity_kmh)


def build_corpus(
    n_trips: int = 1500,
    seed: int = 0,
    config: Optional[NoiseConfig] = None,
    *,
    settings: Optional[CorpusSettings] = None,
    jobs: int = 1,
) -> list[TripRecord]:
    """Generate ``n_trips`` records and assign exact 70/15/15 splits.

    Each trip draws from its own seed stream so results do not depend on
    ``jobs`` or on generation order.
    """
    if settings is None:
        settings = CorpusSettings(n_trips=n_trips, seed=seed, noise=config or NoiseConfig())
    n = settings.n_trips
    if n < 10:
        raise ValueError(f"n_trips must be >= 10, got {n}")

    def attempt(i):
        try:
            return generate_trip(settings, i)
        except (ValueError, ArithmeticError) as exc:
            return exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(attempt, range(n)))
    else:
        results = [attempt(i) for i in range(n)]

    records = [r for r in results if isinstance(r, TripRecord)]
    failures = n - len(records)
    if failures > 0.01 * n:
        first = next(r for r in results if not isinstance(r, TripRecord))
        raise CorpusError(f"{failures} of {n} trips failed to simulate; first error: {first}")

    counts = split_counts(len(records))
    order = make_rng(settings.seed, "split").permutation(len(records))
    labels = np.empty(len(records), dtype=object)
    labels[order[: counts["train"]]] = "train"
    labels[order[counts["train"]: counts["train"] + counts["val"]]] = "val"
    labels[order[counts["train"] + counts["val"]:]] = "test"
    for rec, label in zip(records, labels):
        rec.split = label
    return records


def select(records: Sequence[TripRecord], split: str) -> list[TripRecord]:
    return [r for r in records if r.split == split]


def write_corpus(records: Sequence[TripRecord], path, settings: Optional[CorpusSettings] = None) -> Path:
    """Write the CSV and, when settings are given, a ``.json`` sidecar next to it."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.to_row())
    if settings is not None:
        sidecar = sidecar_path(path)
        sidecar.write_text(json.dumps(settings.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(".json") if path.suffix else path.with_name(path.name + ".json")


def read_corpus(path) -> list[TripRecord]:
    path = Path(path)
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS[:15]) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing column(s) {sorted(missing)}")
        for row in reader:
            session = DischargeSession(
                initial_soc=float(row["initial_soc"]),
                distance=float(row["distance_km"]),
                mean_velocity=float(row["mean_velocity_kmh"]),
                mode=DrivingMode.parse(row["mode"]),
                ambient_temp=float(row["temp_c"]),
                time_of_day=float(row["time_of_day_h"]),
            )
            split = row["split"]
            if split not in SPLITS:
                raise ValueError(f"{path}: unknown split {split!r} for trip {row['trip_id']}")
            max_v = row.get("max_velocity_kmh")
            records.append(
                TripRecord(
                    trip_id=int(row["trip_id"]),
                    session=session,
                    physics_energy=float(row["physics_kwh"]),
                    true_energy=float(row["true_kwh"]),
                    noise={k: float(row[f"eps_{k}"]) for k in NOISE_KEYS},
                    split=split,
                    max_velocity_kmh=float(max_v) if max_v else session.mean_velocity,
                )
            )
    return records


def read_sidecar(path) -> Optional[dict]:
    sidecar = sidecar_path(path)
    if not sidecar.exists():
        return None
    return json.loads(sidecar.read_text())
