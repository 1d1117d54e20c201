"""Lie-derivative chain of the cavity-pressure output ``h(x) = x5``.

Writing ``d = x4 - x5`` and ``a = Q beta_c / v0`` the output derivatives are
``L_f^k h = a * d^(k-1)`` for k >= 1, where ``d^(j)`` is the j-th time
derivative of the pressure differential along the drift. With
``P = beta_s x2 + Q beta_s d`` (so that ``f4 = -P / x1``)::

    d'    = -P / x1 - a d
    d''   = -(P' / x1 - P x2 / x1^2) - a d'
    d'''  = -(P'' / x1 - 2 P' x2 / x1^2 - P x3 / x1^2 + 2 P x2^2 / x1^3) - a d''
    P'    = beta_s x3 + Q beta_s d'
    P''   = beta_s f3(x) + Q beta_s d''

The input first enters through ``x3`` inside ``P'``, giving relative degree 4
and ``L_g L_f^3 h = -K w0^2 Q beta_s beta_c / (v0 x1)``.

The finite-difference routines here are deliberately independent of that
derivation: they only evaluate the drift field and a lower-order Lie value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import PlantParams, SingularityError, as_state, f_of, g_of

__all__ = [
    "LieChain",
    "FD_STEP_REL",
    "FD_STEP_ABS",
    "FD_TOL",
    "lie_chain",
    "lie_f",
    "lglf3",
    "fd_lie",
    "fd_lglf3",
    "relative_degree_check",
    "lf4_typeset",
    "lglf3_typeset",
    "sample_states",
    "verification_report",
]

FD_STEP_REL = 1e-5
FD_STEP_ABS = 1e-8
# relative agreement between analytic and finite-difference orders 1..4
FD_TOL = {1: 1e-7, 2: 1e-6, 3: 1e-5, 4: 1e-4}
LGLF3_TOL = 1e-6
STRUCTURAL_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class LieChain:
    lf0: float
    lf1: float
    lf2: float
    lf3: float
    lf4: float
    lglf3: float

    def order(self, k: int) -> float:
        return (self.lf0, self.lf1, self.lf2, self.lf3, self.lf4)[k]


def _chain(x1, x2, x3, x4, x5, p):
    """Scalar kernel: (L0, L1, L2, L3, L4, LgL3) without validation."""
    a = p.a
    bs = p.beta_s
    qbs = p.b
    inv = 1.0 / x1
    inv2 = inv * inv
    d = x4 - x5
    P = bs * x2 + qbs * d
    d1 = -P * inv - a * d
    P1 = bs * x3 + qbs * d1
    d2 = -(P1 * inv - P * x2 * inv2) - a * d1
    f3 = -p.two_dw0 * x3 - p.w0sq * x2
    P2 = bs * f3 + qbs * d2
    d3 = -(P2 * inv - 2.0 * P1 * x2 * inv2 - P * x3 * inv2 + 2.0 * P * x2 * x2 * inv2 * inv) - a * d2
    return x5, a * d, a * d1, a * d2, a * d3, -a * bs * p.kw2 * inv


def lie_chain(x: Sequence[float], params: PlantParams) -> LieChain:
    """All output Lie derivatives at ``x`` in one pass."""
    x = as_state(x)
    vals = _chain(*x, params)
    if not all(math.isfinite(v) for v in vals):
        raise SingularityError(f"non-finite Lie chain at {x}")
    return LieChain(*vals)


def lie_f(x: Sequence[float], params: PlantParams, order: int) -> float:
    """Analytic ``L_f^order h`` for order 0..4."""
    if order not in range(5):
        raise ValueError(f"order must be in 0..4, got {order}")
    return lie_chain(x, params).order(order)


def lglf3(x: Sequence[float], params: PlantParams) -> float:
    """Analytic decoupling coefficient ``L_g L_f^3 h``."""
    return lie_chain(x, params).lglf3


def _fd_gradient(fun, x, step_rel):
    x = np.asarray(x, dtype=float)
    h = np.maximum(np.maximum(np.abs(x), 1.0) * step_rel, FD_STEP_ABS)
    grad = np.empty(5)
    for i in range(5):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        if xm[0] <= 0.0:
            raise SingularityError("finite-difference stencil leaves x1 > 0")
        grad[i] = (fun(xp) - fun(xm)) / (2.0 * h[i])
    return grad


def fd_lie(
    x: Sequence[float],
    params: PlantParams,
    order: int,
    step_rel: float = FD_STEP_REL,
    nested: bool = False,
) -> float:
    """Finite-difference estimate of ``L_f^order h`` (order 1..4).

    The estimate is ``grad(L^(order-1)) . f(x)`` with the gradient taken by
    central differences. By default the differentiated function is the
    analytic order-1 value, so each order is checked by one differencing
    level; with ``nested=True`` the lower order is itself a finite-difference
    estimate, recursively down to ``h(x) = x5`` (accurate only for low
    orders).
    """
    if order not in range(1, 5):
        raise ValueError(f"order must be in 1..4, got {order}")
    x = as_state(x)
    if order == 1:
        lower = lambda z: z[4]
    elif nested:
        lower = lambda z: fd_lie(z, params, order - 1, step_rel, nested=True)
    else:
        lower = lambda z: lie_f(z, params, order - 1)
    return float(_fd_gradient(lower, x, step_rel) @ f_of(x, params))


def fd_lglf3(x: Sequence[float], params: PlantParams, step_rel: float = FD_STEP_REL) -> float:
    """Finite-difference estimate of ``L_g L_f^3 h`` from the analytic ``L_f^3 h``."""
    x = as_state(x)
    grad = _fd_gradient(lambda z: lie_f(z, params, 3), x, step_rel)
    return float(grad @ g_of(params))


def relative_degree_check(x: Sequence[float], params: PlantParams, step_rel: float = FD_STEP_REL) -> dict:
    """Confirm that the input first appears in the fourth output derivative.

    Returns a dict with the analytic ``(L_g h, L_g L_f h, L_g L_f^2 h)``
    (structurally zero), their finite-difference estimates, the analytic and
    finite-difference ``L_g L_f^3 h`` and a ``passed`` flag.
    """
    x = as_state(x)
    g = g_of(params)
    chain = lie_chain(x, params)
    gnorm = float(np.linalg.norm(g))
    fd = []
    for k in range(3):
        grad = _fd_gradient(lambda z, k=k: lie_f(z, params, k), x, step_rel)
        fd.append(float(grad @ g))
    fd_l3 = fd_lglf3(x, params, step_rel)
    scales = [max(abs(chain.order(k)), 1.0) * gnorm for k in range(3)]
    zeros_ok = all(abs(v) < STRUCTURAL_ZERO_TOL * s for v, s in zip(fd, scales))
    rel = abs(fd_l3 - chain.lglf3) / max(abs(chain.lglf3), 1.0)
    nonzero_ok = chain.lglf3 != 0.0 and rel <= LGLF3_TOL and math.copysign(1, fd_l3) == math.copysign(1, chain.lglf3)
    return {
        "analytic_lg_lower": [0.0, 0.0, 0.0],
        "fd_lg_lower": fd,
        "fd_scales": scales,
        "lglf3": chain.lglf3,
        "fd_lglf3": fd_l3,
        "lglf3_rel_err": rel,
        "relative_degree": 4 if (zeros_ok and nonzero_ok) else None,
        "passed": bool(zeros_ok and nonzero_ok),
    }


def lglf3_typeset(x: Sequence[float], params: PlantParams) -> float:
    """Decoupling coefficient in its originally typeset form ``K beta_s w0^2 / x1``.

    Kept only to measure how far it is from :func:`lglf3`.
    """
    x = as_state(x)
    return params.K * params.beta_s * params.w0**2 / x[0]


def lf4_typeset(x: Sequence[float], params: PlantParams) -> float:
    """``L_f^4 h`` evaluated term by term as originally typeset.

    Kept only to measure how far it is from the derived chain; not used by
    the controller.
    """
    x1, x2, x3, x4, x5 = as_state(x)
    Q, Bs, Bc, v0 = params.Q, params.beta_s, params.beta_c, params.v0
    D, w0 = params.D, params.w0
    t1 = Q**2 * Bs**2 / v0 * (x3 / x1**2 - 2 * x2**2 / x1**3)
    t2 = (
        Q**3 * Bs**3 * Bc / (v0 * x1**3)
        + Q**2 * Bs**2 * Bc / (v0**2 * x1**3) * x2
        + Q**3 * Bc**2 * Bs**2 / (v0**2 * x1**2) * x2
        + Q**3 * Bc**3 * Bs / (v0**3 * x1)
    ) * (-x2 - Q * (x4 - x5))
    t3 = (2 * Q**3 * Bs**2 * Bc / (v0 * x1**3) + Q**3 * Bc**2 * Bs / (v0**2 * x1**2)) * (x2 * x5 - x4 * x2)
    t4 = -(
        Q**4 * Bs**3 * Bc**2 / (v0**2 * x1**2) + Q**4 * Bc**3 * Bs / (v0**3 * x1) - Q**4 * Bc**4 / v0**4
    ) * (x4 - x5)
    t5 = Q**2 * Bs * Bc / (v0**2 * x1**2) * (x4 * x3 - x2**2 * x4 / x1)
    t6 = Q**2 * Bc**2 * Bs / (v0**2 * x1) * (x3 - x2**2 / x1)
    t7 = -Bs / x1 * (-2 * D * w0 * x3 - w0**2 * x2 - x2 * x3 / x1 + 2 * x2 * x3 / x1 - x2**3 / x1**2)
    return t1 + t2 + t3 + t4 + t5 + t6 + t7


def sample_states(n: int, seed: int = 0) -> np.ndarray:
    """Random valid states: x1 in [0.1, 20], x2, x3 in [-10, 10], pressures in [0, 1000]."""
    rng = np.random.default_rng(seed)
    return np.column_stack(
        [
            rng.uniform(0.1, 20.0, n),
            rng.uniform(-10.0, 10.0, n),
            rng.uniform(-10.0, 10.0, n),
            rng.uniform(0.0, 1000.0, n),
            rng.uniform(0.0, 1000.0, n),
        ]
    )


def verification_report(params: PlantParams, n_states: int = 100, seed: int = 0) -> dict:
    """Compare the analytic chain with the finite-difference oracle at random states.

    Also reports the relative deviation of the typeset decoupling coefficient
    and typeset fourth derivative from the derived ones.
    """
    states = sample_states(n_states, seed)
    worst = {k: 0.0 for k in FD_TOL}
    rd_pass = True
    worst_zero = 0.0
    worst_lg = 0.0
    lg_dev = []
    lf4_dev = []
    for x in states:
        chain = lie_chain(x, params)
        for k in FD_TOL:
            est = fd_lie(x, params, k)
            worst[k] = max(worst[k], abs(est - chain.order(k)) / max(abs(chain.order(k)), 1.0))
        rd = relative_degree_check(x, params)
        rd_pass &= rd["passed"]
        worst_zero = max(worst_zero, max(abs(v) / s for v, s in zip(rd["fd_lg_lower"], rd["fd_scales"])))
        worst_lg = max(worst_lg, rd["lglf3_rel_err"])
        lg_dev.append(abs(lglf3_typeset(x, params) - chain.lglf3) / abs(chain.lglf3))
        lf4_dev.append(abs(lf4_typeset(x, params) - chain.lf4) / max(abs(chain.lf4), 1.0))
    orders = {
        str(k): {"max_rel_err": float(worst[k]), "tol": FD_TOL[k], "passed": bool(worst[k] <= FD_TOL[k])} for k in FD_TOL
    }
    chain_ok = all(o["passed"] for o in orders.values())
    return {
        "n_states": n_states,
        "seed": seed,
        "lie_chain_vs_fd": orders,
        "relative_degree": {
            "passed": bool(rd_pass),
            "max_scaled_lg_lower": worst_zero,
            "tol_lg_lower": STRUCTURAL_ZERO_TOL,
            "max_lglf3_rel_err": worst_lg,
            "tol_lglf3": LGLF3_TOL,
        },
        "typeset_deviation": {
            "lglf3_rel_dev_median": float(np.median(lg_dev)),
            "lglf3_rel_dev_max": float(np.max(lg_dev)),
            "lf4_rel_dev_median": float(np.median(lf4_dev)),
            "lf4_rel_dev_max": float(np.max(lf4_dev)),
        },
        "passed": bool(chain_ok and rd_pass),
    }
