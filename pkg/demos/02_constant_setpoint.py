"""Constant 400 bar set point with the published gains.

Both readings of the gain ordering are simulated. The DESCENDING reading has
a right-half-plane pole pair and runs the screw into its end stop; the
ASCENDING reading is stable but its slowest pole pair (Re ~ -0.033 1/s)
needs about two minutes to enter the 2% band.

Pass ``--plot`` to save ``constant_setpoint.png`` (needs matplotlib).
"""

import sys
from dataclasses import replace

from cavity_fl import REFERENCE_GAINS, Gains, PlantParams, Profile, SimConfig, routh_hurwitz, simulate

params = PlantParams()
base = SimConfig(profile=Profile.constant(400.0), t_end=20.0, dt=1e-4, log_stride=10)

runs = {}
for mapping in ("descending", "ascending"):
    gains = Gains(*REFERENCE_GAINS, mapping=mapping)
    rh = routh_hurwitz(gains)
    res = simulate(replace(base, gains=gains), params)
    runs[mapping] = res
    print(f"{mapping:>10}: Routh {rh.status.value:8s} first column {[round(c, 3) for c in rh.first_column]}")
    print(f"{'':>10}  status {res.status.value}, t_last {res.t[-1]:.2f} s, y_last {res.y[-1]:.1f}")
    if res.metrics:
        print(f"{'':>10}  {res.metrics}")

# %% long horizon for the stable reading
long = simulate(replace(base, gains=Gains(*REFERENCE_GAINS, mapping="ascending"), t_end=150.0, dt=1e-3), params)
print("ascending, 150 s horizon:", long.metrics)

if "--plot" in sys.argv:
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    for name, res in runs.items():
        ax[0].plot(res.t, res.y, label=name)
        ax[1].plot(res.t, res.column("u"), label=name)
    ax[0].axhline(400.0, color="k", lw=0.5)
    ax[0].set_ylabel("cavity pressure")
    ax[1].set_ylabel("voltage U")
    ax[1].set_xlabel("t [s]")
    ax[0].legend()
    fig.savefig("constant_setpoint.png", dpi=120)
