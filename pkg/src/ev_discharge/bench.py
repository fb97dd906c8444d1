"""Wall-clock latency of the physics, residual and hybrid prediction paths. Informational only."""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from .dataset import TripRecord
from .domain import VehicleParams
from .features import raw_features
from .hybrid import predict, predict_batch
from .network import ResidualModel
from .trip import DEFAULT_N_STEPS


def _summary(samples_ms) -> dict:
    a = np.asarray(samples_ms, dtype=float)
    return {"p50_ms": float(np.percentile(a, 50)), "p95_ms": float(np.percentile(a, 95)), "n": int(a.size)}


def benchmark(
    model: ResidualModel,
    records: Sequence[TripRecord],
    *,
    vehicle: VehicleParams = VehicleParams(),
    n_steps: int = DEFAULT_N_STEPS,
    batch_sizes: Sequence[int] = (1, 20),
    seed: int = 0,
) -> dict:
    if not records:
        raise ValueError("benchmark needs at least one trip")
    sessions = [r.session for r in records]
    physics_ms, hybrid_ms = [], []
    for i, s in enumerate(sessions):
        physics_ms.append(predict(s, vehicle, None, n_steps, seed + i).physics_latency)
        hybrid_ms.append(predict(s, vehicle, model, n_steps, seed + i).total_latency)

    raw = raw_features(records)
    ml_ms = []
    for row in raw:
        t0 = time.perf_counter()
        model.predict_raw(row)
        ml_ms.append((time.perf_counter() - t0) * 1e3)

    batches = {}
    for size in batch_sizes:
        if size < 1:
            raise ValueError("batch sizes must be >= 1")
        per_trip = []
        for start in range(0, len(sessions) - size + 1, size):
            chunk = sessions[start: start + size]
            result = predict_batch(chunk, vehicle, model, n_steps, seed)
            per_trip.append(result.total_latency / len(chunk))
        batches[str(size)] = _summary(per_trip) if per_trip else {"n": 0}

    return {
        "n_trips": len(sessions),
        "n_steps": n_steps,
        "physics": _summary(physics_ms),
        "ml": _summary(ml_ms),
        "hybrid": _summary(hybrid_ms),
        "batch_per_trip": batches,
    }
