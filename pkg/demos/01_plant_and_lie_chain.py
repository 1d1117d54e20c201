"""Plant model and the output Lie chain.

Builds the default machine, evaluates the drift and input fields at a
charged-screw state, walks the Lie chain of the cavity pressure, and checks
it against finite differences. The last block shows how far the typeset
decoupling coefficient sits from the derived one.
"""

import json

import numpy as np

from cavity_fl import PlantParams, f_of, g_of, lie_chain, relative_degree_check, verification_report
from cavity_fl.lie import lf4_typeset, lglf3_typeset

params = PlantParams()
print("nozzle conductance Q =", params.Q)
print("assumed values:", params.assumptions())

# screw at 10, moving forward slowly, screw pressure ahead of cavity pressure
x = np.array([10.0, -0.5, 0.0, 250.0, 200.0])
print("f(x) =", f_of(x, params))
print("g    =", g_of(params))

chain = lie_chain(x, params)
for k in range(5):
    print(f"L_f^{k} h = {chain.order(k): .6e}")
print(f"L_g L_f^3 h = {chain.lglf3: .6e}")

rd = relative_degree_check(x, params)
print("relative degree:", rd["relative_degree"], "passed:", rd["passed"])

# %% typeset forms vs derived forms
print("typeset L_g L_f^3 h:", lglf3_typeset(x, params), " derived:", chain.lglf3)
print("typeset L_f^4 h    :", lf4_typeset(x, params), " derived:", chain.lf4)

# %% oracle sweep over 100 random states
report = verification_report(params)
print(json.dumps(report["lie_chain_vs_fd"], indent=2))
print(json.dumps(report["typeset_deviation"], indent=2))
