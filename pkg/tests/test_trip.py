import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ev_discharge.domain import MODES, DischargeSession, canonical_profile
from ev_discharge.trip import (
    Phase,
    cyclic_phase_schedule,
    phase_schedule,
    step_acceleration,
    synthesize_trajectory,
    time_step,
    velocity_perturbation,
)

A, C, B = Phase.ACCEL, Phase.CRUISE, Phase.BRAKE


def test_time_step_examples():
    assert time_step(100, 90, 1000) == pytest.approx(4.0, rel=1e-15)
    assert time_step(50, 100, 500) == pytest.approx(3.6, rel=1e-15)
    # one step spans the whole trip: 37 km at 74 km/h is half an hour
    assert time_step(37, 74, 1) == pytest.approx(1800.0)


@pytest.mark.parametrize("args", [(0, 90, 10), (10, 0, 10), (10, 90, 0), (-1, 90, 10)])
def test_time_step_rejects_non_positive(args):
    with pytest.raises(ValueError):
        time_step(*args)


def test_phase_schedule_examples():
    assert list(phase_schedule(canonical_profile("normal"), 10)) == [A, A, A, C, C, C, C, C, B, B]
    assert list(phase_schedule(canonical_profile("eco"), 1)) == [C]
    agg = phase_schedule(canonical_profile("aggressive"), 100)
    assert [int(np.sum(agg == p)) for p in (A, C, B)] == [40, 35, 25]


@given(n=st.integers(1, 5000), mode=st.sampled_from(MODES))
def test_phase_counts_track_fractions(n, mode):
    profile = canonical_profile(mode)
    sched = phase_schedule(profile, n)
    assert len(sched) == n
    for phase, frac in zip((A, C, B), profile.phase_fractions):
        assert abs(int(np.sum(sched == phase)) - n * frac) <= 1
    # contiguous Accel -> Cruise -> Brake
    assert np.all(np.diff(sched.astype(int)) >= 0)


def test_cyclic_schedule_keeps_fractions():
    profile = canonical_profile("normal")
    sched = cyclic_phase_schedule(profile, 1000, 10)
    assert len(sched) == 1000
    assert [int(np.sum(sched == p)) for p in (A, C, B)] == [300, 500, 200]
    assert int(np.sum((sched[1:] == B) & (sched[:-1] != B)) + (sched[0] == B)) == 10


def test_step_acceleration_examples():
    assert step_acceleration(A, canonical_profile("normal")) == pytest.approx(1.75)
    for mode in MODES:
        assert step_acceleration(C, canonical_profile(mode)) == 0.0
    assert step_acceleration(B, canonical_profile("aggressive")) == pytest.approx(-2.8)


def test_perturbation_zero_kappa():
    rng = np.random.default_rng(0)
    for mode in MODES:
        assert velocity_perturbation(rng, canonical_profile(mode), 25.0, kappa=0.0) == 0.0


def test_perturbation_std_normal_mode():
    draws = velocity_perturbation(np.random.default_rng(1), canonical_profile("normal"), 25.0, size=100_000)
    # configured sigma = 0.05 * 1.0 * 25
    assert np.std(draws) == pytest.approx(1.25, rel=0.03)


def test_perturbation_std_ratio_eco_vs_aggressive():
    eco = velocity_perturbation(np.random.default_rng(2), canonical_profile("eco"), 25.0, size=100_000)
    agg = velocity_perturbation(np.random.default_rng(2), canonical_profile("aggressive"), 25.0, size=100_000)
    assert np.std(eco) / np.std(agg) == pytest.approx(0.85 / 1.35, rel=0.03)


def test_perturbation_is_zero_mean():
    n = 20_000
    draws = velocity_perturbation(np.random.default_rng(3), canonical_profile("aggressive"), 30.0, size=n)
    sigma = 0.05 * 1.35 * 30.0
    assert abs(draws.mean()) < 3 * sigma / np.sqrt(n)


def _session(mode="normal", d=100.0, v=90.0):
    return DischargeSession(0.8, d, v, mode, 20.0)


def test_trajectory_deterministic_for_seed():
    a = synthesize_trajectory(_session(), 1000, np.random.default_rng(42))
    b = synthesize_trajectory(_session(), 1000, np.random.default_rng(42))
    assert a.equals(b)
    assert a.velocity.tobytes() == b.velocity.tobytes()


def test_trajectory_without_perturbation():
    traj = synthesize_trajectory(_session(), 1000, kappa=0.0)
    assert np.all(traj.velocity == 90.0 / 3.6)
    assert traj.max_velocity_kmh == pytest.approx(90.0)


def test_trajectory_mean_velocity_and_distance():
    traj = synthesize_trajectory(_session(), 1000, np.random.default_rng(7))
    assert traj.velocity.mean() == pytest.approx(25.0, rel=0.02)
    assert traj.distance_m == pytest.approx(100_000.0, rel=0.02)
    assert traj.n_steps == 1000 and traj.dt == pytest.approx(4.0)
    assert traj.time[-1] == pytest.approx(999 * 4.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), mode=st.sampled_from(MODES),
       v=st.floats(1.0, 150.0), n=st.integers(1, 400))
def test_velocity_never_negative(seed, mode, v, n):
    traj = synthesize_trajectory(_session(mode, 10.0, v), n, np.random.default_rng(seed), kappa=2.0)
    assert np.all(traj.velocity >= 0.0)


def test_trajectory_steps_iterate():
    traj = synthesize_trajectory(_session(), 10, kappa=0.0)
    steps = list(traj)
    assert len(steps) == 10
    assert steps[0].phase is A and steps[-1].phase is B
    assert steps[0].acceleration == pytest.approx(1.75)


def test_unknown_layout_rejected():
    with pytest.raises(ValueError):
        synthesize_trajectory(_session(), 10, kappa=0.0, layout="random")
