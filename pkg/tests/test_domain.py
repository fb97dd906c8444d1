import dataclasses

import pytest

from ev_discharge.domain import (
    MODES,
    DischargeSession,
    DrivingMode,
    DrivingProfile,
    VehicleParams,
    canonical_profile,
)


@pytest.mark.parametrize(
    "mode, expected",
    [
        ("eco", (1.5, 0.85, 0.75, 0.0, 0.20, 0.65, 0.15)),
        ("normal", (2.5, 1.00, 0.65, 0.5, 0.30, 0.50, 0.20)),
        ("aggressive", (4.0, 1.35, 0.50, 1.5, 0.40, 0.35, 0.25)),
    ],
)
def test_canonical_profiles_match_table(mode, expected):
    p = canonical_profile(mode)
    got = (p.max_accel, p.efficiency_multiplier, p.regen_efficiency, p.mode_aux_power,
           p.accel_phase_frac, p.cruise_phase_frac, p.brake_phase_frac)
    assert got == expected
    assert abs(sum(p.phase_fractions) - 1.0) <= 1e-9


def test_profile_ordering():
    eco, normal, aggr = (canonical_profile(m) for m in MODES)
    assert eco.max_accel < normal.max_accel < aggr.max_accel
    assert eco.regen_efficiency > normal.regen_efficiency > aggr.regen_efficiency
    assert eco.efficiency_multiplier < normal.efficiency_multiplier < aggr.efficiency_multiplier


def test_canonical_profile_is_pure_and_immutable():
    assert canonical_profile(DrivingMode.NORMAL) == canonical_profile("NORMAL")
    with pytest.raises(dataclasses.FrozenInstanceError):
        canonical_profile("eco").max_accel = 9.0


def test_profile_rejects_bad_fractions():
    with pytest.raises(ValueError):
        DrivingProfile(DrivingMode.ECO, 1.5, 0.85, 0.75, 0.0, 0.2, 0.6, 0.15)
    with pytest.raises(ValueError):
        DrivingProfile(DrivingMode.ECO, 1.5, 0.85, 1.0, 0.0, 0.2, 0.65, 0.15)


def test_vehicle_defaults_and_validation():
    v = VehicleParams()
    assert (v.battery_capacity, v.mass, v.drag_coeff, v.frontal_area) == (75, 1800, 0.24, 2.3)
    assert (v.rolling_coeff, v.drivetrain_eff, v.air_density, v.gravity) == (0.01, 0.90, 1.225, 9.81)
    with pytest.raises(ValueError):
        VehicleParams(mass=0)
    with pytest.raises(ValueError):
        VehicleParams(drivetrain_eff=1.2)
    with pytest.raises(ValueError):
        VehicleParams.from_dict({"wheelbase": 2.8})


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(initial_soc=1.2, distance=10, mean_velocity=50),
        dict(initial_soc=0.5, distance=0, mean_velocity=50),
        dict(initial_soc=0.5, distance=10, mean_velocity=-1),
        dict(initial_soc=0.5, distance=10, mean_velocity=50, target_final_soc=0.6),
        dict(initial_soc=0.5, distance=10, mean_velocity=50, time_of_day=24.0),
    ],
)
def test_session_invariants(kwargs):
    with pytest.raises(ValueError):
        DischargeSession(**kwargs)


def test_session_defaults():
    s = DischargeSession(0.8, 100, 90, "eco")
    assert s.mode is DrivingMode.ECO
    assert s.grade_angle == 0.0
    assert s.target_final_soc is None
    assert s.mean_velocity_ms == pytest.approx(25.0)
