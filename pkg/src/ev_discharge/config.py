"""JSON run configuration.

Document layout (every key optional)::

    {
      "vehicle":  {"battery_capacity": 75, "mass": 1800, ...},
      "profiles": {"eco": {"max_accel": 1.5, "efficiency_multiplier": 0.85, ...}},
      "n_steps": 1000, "seed": 0, "kappa": 0.05,
      "phase_layout": "contiguous", "phase_cycles": 10,
      "noise": {"sigma_terrain": 0.05, ..., "structured_fraction": 0.7},
      "train": {"lr0": 0.001, "batch_size": 32, ...},
      "paths": {"corpus": "corpus.csv", "model": "model.json", "report_dir": "report"}
    }

A profile entry only needs the fields it changes; the rest come from the
built-in profile for that mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .dataset import NoiseConfig
from .domain import DrivingMode, DrivingProfile, VehicleParams, canonical_profile
from .network import TrainConfig
from .trip import DEFAULT_KAPPA, DEFAULT_N_STEPS, PHASE_LAYOUTS

_TOP_KEYS = {"vehicle", "profiles", "n_steps", "seed", "kappa", "phase_layout", "phase_cycles", "noise", "train", "paths"}


@dataclass(frozen=True)
class RunConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    profiles: tuple = ()
    n_steps: int = DEFAULT_N_STEPS
    seed: Optional[int] = None
    kappa: float = DEFAULT_KAPPA
    phase_layout: str = "contiguous"
    phase_cycles: int = 10
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.phase_layout not in PHASE_LAYOUTS:
            raise ValueError(f"phase_layout must be one of {PHASE_LAYOUTS}")
        given = [Path(p).resolve() for p in self.paths.values() if p]
        if len(given) != len(set(given)):
            raise ValueError("corpus, model and report paths must be distinct")

    def profile_for(self, mode: DrivingMode) -> DrivingProfile:
        for p in self.profiles:
            if p.mode is mode:
                return p
        return canonical_profile(mode)

    def to_dict(self) -> dict:
        return {
            "vehicle": self.vehicle.to_dict(),
            "profiles": {p.mode.value: p.to_dict() for p in self.profiles},
            "n_steps": self.n_steps,
            "seed": self.seed,
            "kappa": self.kappa,
            "phase_layout": self.phase_layout,
            "phase_cycles": self.phase_cycles,
            "noise": self.noise.to_dict(),
            "train": self.train.to_dict(),
            "paths": {k: str(v) for k, v in self.paths.items()},
        }


def _pick(cls, data: dict, where: str) -> dict:
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{where}: unknown key(s) {sorted(unknown)}")
    return data


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ValueError(f"config: unknown key(s) {sorted(unknown)}")
    profiles = []
    for mode_name, overrides in (data.get("profiles") or {}).items():
        mode = DrivingMode.parse(mode_name)
        base = canonical_profile(mode)
        overrides = {k: v for k, v in _pick(DrivingProfile, overrides, f"profiles.{mode_name}").items() if k != "mode"}
        profiles.append(replace(base, **overrides))
    kwargs: dict[str, Any] = {"profiles": tuple(profiles)}
    if "vehicle" in data:
        kwargs["vehicle"] = VehicleParams.from_dict(data["vehicle"])
    if "noise" in data:
        kwargs["noise"] = NoiseConfig(**_pick(NoiseConfig, data["noise"], "noise"))
    if "train" in data:
        kwargs["train"] = TrainConfig(**_pick(TrainConfig, data["train"], "train"))
    for key in ("n_steps", "seed", "phase_cycles"):
        if key in data:
            kwargs[key] = int(data[key])
    if "kappa" in data:
        kwargs["kappa"] = float(data["kappa"])
    if "phase_layout" in data:
        kwargs["phase_layout"] = str(data["phase_layout"])
    if "paths" in data:
        kwargs["paths"] = dict(data["paths"])
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    return config_from_dict(json.loads(Path(path).read_text()))
