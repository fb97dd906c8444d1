# %% [markdown]
# # Physics baseline for one trip
#
# A trip is synthesized as a sequence of accel / cruise / brake steps, then the
# longitudinal force balance gives traction power per step. Auxiliary load and
# regenerative braking are added on top and integrated into kWh.

# %%
import numpy as np

from ev_discharge import DischargeSession, VehicleParams, simulate, synthesize_trajectory
from ev_discharge.physics import aero_force, grade_force, rolling_force, traction_power
from ev_discharge.domain import canonical_profile

vehicle = VehicleParams()
vehicle

# %% [markdown]
# Forces at 90 km/h on flat ground. Aero dominates rolling above roughly 65 km/h.

# %%
v = 90 / 3.6
print("rolling  N", rolling_force(vehicle, 0.0))
print("aero     N", aero_force(vehicle, v))
print("grade 5% N", grade_force(vehicle, 0.05))
print("cruise power kW", traction_power(vehicle, canonical_profile("normal"), v, 0.0))

# %% [markdown]
# ## Baseline scenario: 100 km at 90 km/h from 80% SoC

# %%
for mode in ("eco", "normal", "aggressive"):
    s = DischargeSession(0.8, 100.0, 90.0, mode, 20.0)
    r = simulate(s, vehicle, synthesize_trajectory(s, 1000, np.random.default_rng(1)))
    print(f"{mode:<11} {r.total_energy:7.2f} kWh  final SoC {r.final_soc:.3f}  "
          f"traction {r.traction_energy:6.2f}  aux {r.auxiliary_energy:5.2f}  regen {r.regen_recovered:5.2f}")

# %% [markdown]
# Aggressive driving spends 40% of the trip accelerating at 0.7 * 4 m/s^2.
# The inertial term m*a*v swamps everything else, which is why its energy is
# several times the eco figure (see 05_baseline_gap.py).

# %%
s = DischargeSession(0.8, 100.0, 90.0, "normal", 20.0)
traj = synthesize_trajectory(s, 1000, np.random.default_rng(1))
r = simulate(s, vehicle, traj)
print("steps", traj.n_steps, "dt", traj.dt, "s  max speed", round(traj.max_velocity_kmh, 1), "km/h")
print("SoC every 100 steps:", np.round(r.soc[::100], 3))

# %% [markdown]
# Alternating phases in ten short arcs gives nearly the same energy but ten braking
# events instead of one.

# %%
cyc = simulate(s, vehicle, synthesize_trajectory(s, 1000, np.random.default_rng(1), layout="cycles", n_cycles=10))
print(r.braking_event_count, cyc.braking_event_count, round(r.total_energy, 3), round(cyc.total_energy, 3))
