"""Tune the four gains with Nelder-Mead, seeded at the published values.

The search runs on a 1 ms grid to keep each evaluation short, then the
winner is re-simulated at 0.1 ms. Takes a couple of minutes.
"""

from dataclasses import replace

from cavity_fl import REFERENCE_GAINS, Gains, PlantParams, Profile, SimConfig, TuneConfig, routh_hurwitz, simulate, tune

params = PlantParams()
seed = Gains(*REFERENCE_GAINS, mapping="ascending")
scenario = SimConfig(profile=Profile.constant(400.0), t_end=20.0, dt=1e-3, log_stride=10)

result = tune(TuneConfig(scenario=scenario, initial_gains=seed, budget=500), params)
print(f"{result.n_evals} evaluations, budget exhausted: {result.budget_exhausted}")
print("best gains:", result.gains, "cost:", round(result.cost, 4))
print("characteristic polynomial:", routh_hurwitz(result.gains).coefficients)

for e in result.trace[:: max(1, result.n_evals // 12)]:
    print(f"  eval {e.eval:4d}  cost {e.cost:10.4f}  best {e.best_cost:10.4f}  settle {e.settling_time}")

# %% confirm at the fine step
fine = replace(scenario, dt=1e-4, log_stride=1)
for label, gains in (("seed", seed), ("tuned", result.gains)):
    m = simulate(replace(fine, gains=gains), params).metrics
    print(f"{label:>5}: settling {m.settling_time_2pct} s, overshoot {m.overshoot_pct:.2f} %, ISE {m.ise:.3g}")
