"""Feedback-linearising cavity-pressure controller.

The control law cancels the output's fourth-derivative drift and imposes
``y'''' = v`` with the synthetic input built from model-based error
derivatives::

    U = (v - L_f^4 h(x)) / (L_g L_f^3 h(x))
    v = yd'''' - c3 e''' - c2 e'' - c1 e' - c0 e

Which of k1..k4 plays c3..c0 is set by :class:`Mapping`. The closed-loop
error then obeys ``s^4 + c3 s^3 + c2 s^2 + c1 s + c0 = 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lie import _chain
from .model import PlantParams, SingularityError, as_state
from .reference import ReferenceSample

__all__ = [
    "Mapping",
    "Gains",
    "REFERENCE_GAINS",
    "DecouplingError",
    "ControlDecision",
    "error_derivatives",
    "synthetic_input",
    "control_law",
    "characteristic_polynomial",
    "RouthStatus",
    "RouthReport",
    "routh_hurwitz",
    "DECOUPLING_EPS",
]

# |L_g L_f^3 h| below DECOUPLING_EPS * max(1, |L_f^4 h|, |v|) is treated as singular
DECOUPLING_EPS = 1e-12


class DecouplingError(SingularityError):
    """The decoupling coefficient is too small to invert."""


class Mapping(str, enum.Enum):
    """Assignment of k1..k4 to error-derivative orders.

    DESCENDING: k1 e''' + k2 e'' + k3 e' + k4 e
    ASCENDING:  k4 e''' + k3 e'' + k2 e' + k1 e
    """

    DESCENDING = "descending"
    ASCENDING = "ascending"


@dataclass(frozen=True)
class Gains:
    k1: float
    k2: float
    k3: float
    k4: float
    mapping: Mapping

    def __post_init__(self):
        object.__setattr__(self, "mapping", Mapping(self.mapping))
        for name in ("k1", "k2", "k3", "k4"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"gain {name} must be finite")

    @property
    def values(self) -> tuple:
        return (self.k1, self.k2, self.k3, self.k4)

    def feedback_coefficients(self) -> tuple:
        """Weights ``(c0, c1, c2, c3)`` on ``(e, e', e'', e''')``."""
        if self.mapping is Mapping.DESCENDING:
            return (self.k4, self.k3, self.k2, self.k1)
        return (self.k1, self.k2, self.k3, self.k4)

    def with_values(self, values: Sequence[float]) -> "Gains":
        return Gains(*(float(v) for v in values), mapping=self.mapping)

    def to_dict(self) -> dict:
        return {"k1": self.k1, "k2": self.k2, "k3": self.k3, "k4": self.k4, "mapping": self.mapping.value}


REFERENCE_GAINS = (0.7, 2.0, 30.0, 2.5)


@dataclass(frozen=True)
class ControlDecision:
    u: float
    v: float
    e_derivs: tuple
    saturated: bool


def error_derivatives(x: Sequence[float], ref: ReferenceSample, params: PlantParams) -> np.ndarray:
    """``(e, e', e'', e''')`` reconstructed from the state through the Lie chain."""
    x = as_state(x)
    chain = _chain(*x, params)
    return np.array([chain[k] - ref[k] for k in range(4)])


def synthetic_input(e_derivs: Sequence[float], ydddd: float, gains: Gains) -> float:
    c = gains.feedback_coefficients()
    e0, e1, e2, e3 = e_derivs
    return ydddd - c[3] * e3 - c[2] * e2 - c[1] * e1 - c[0] * e0


def _decide(x1, x2, x3, x4, x5, ref, coeffs, params):
    # scalar kernel; returns (u, v, e0..e3, saturated)
    l0, l1, l2, l3, l4, lg = _chain(x1, x2, x3, x4, x5, params)
    e0 = l0 - ref[0]
    e1 = l1 - ref[1]
    e2 = l2 - ref[2]
    e3 = l3 - ref[3]
    v = ref[4] - coeffs[3] * e3 - coeffs[2] * e2 - coeffs[1] * e1 - coeffs[0] * e0
    num = v - l4
    if not abs(lg) > DECOUPLING_EPS * max(1.0, abs(l4), abs(v)):
        raise DecouplingError(f"|L_g L_f^3 h| = {abs(lg):.3g} too small to invert")
    u = num / lg
    if not math.isfinite(u):
        raise SingularityError(f"non-finite control {u!r}")
    sat = False
    lim = params.u_limit
    if lim is not None and abs(u) > lim:
        u = math.copysign(lim, u)
        sat = True
    return u, v, e0, e1, e2, e3, sat


def control_law(x: Sequence[float], ref: ReferenceSample, gains: Gains, params: PlantParams) -> ControlDecision:
    """Voltage command cancelling the output drift and imposing ``y'''' = v``.

    Raises
    ------
    SingularityError
        x1 <= 0 or a non-finite intermediate.
    DecouplingError
        The decoupling coefficient is numerically zero.
    """
    x = as_state(x)
    u, v, e0, e1, e2, e3, sat = _decide(*x, ref, gains.feedback_coefficients(), params)
    return ControlDecision(u=u, v=v, e_derivs=(e0, e1, e2, e3), saturated=sat)


def characteristic_polynomial(gains: Gains) -> np.ndarray:
    """Monic error polynomial, highest power first."""
    c0, c1, c2, c3 = gains.feedback_coefficients()
    return np.array([1.0, c3, c2, c1, c0])


class RouthStatus(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class RouthReport:
    status: RouthStatus
    coefficients: tuple
    first_column: tuple
    sign_changes: int

    @property
    def stable(self) -> bool:
        return self.status is RouthStatus.STABLE

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "coefficients": list(self.coefficients),
            "first_column": list(self.first_column),
            "sign_changes": self.sign_changes,
        }


def routh_array(coeffs: Sequence[float]) -> list:
    """Routh table rows for ``coeffs`` (highest power first).

    Construction stops at the first zero pivot; the returned rows end there.
    """
    coeffs = [float(c) for c in coeffs]
    n = len(coeffs) - 1
    width = n // 2 + 1
    rows = [coeffs[0::2], coeffs[1::2]]
    rows = [r + [0.0] * (width - len(r)) for r in rows]
    for _ in range(n - 1):
        above, pivot_row = rows[-2], rows[-1]
        pivot = pivot_row[0]
        if pivot == 0.0:
            break
        new = [(pivot * above[j + 1] - above[0] * pivot_row[j + 1]) / pivot for j in range(width - 1)] + [0.0]
        rows.append(new)
    return rows


def routh_hurwitz(gains_or_coeffs) -> RouthReport:
    """Routh-Hurwitz test of the closed-loop error polynomial.

    Accepts :class:`Gains` or raw coefficients (highest power first). A zero
    pivot is reported as MARGINAL without any epsilon substitution.
    """
    if isinstance(gains_or_coeffs, Gains):
        coeffs = characteristic_polynomial(gains_or_coeffs)
    else:
        coeffs = np.asarray(gains_or_coeffs, dtype=float)
    n = len(coeffs) - 1
    rows = routh_array(coeffs)
    col = tuple(float(r[0]) for r in rows)
    changes = sum(1 for a, b in zip(col, col[1:]) if a * b < 0)
    if len(rows) < n + 1 or any(c == 0.0 for c in col):
        status = RouthStatus.MARGINAL
    elif changes == 0 and col[0] > 0:
        status = RouthStatus.STABLE
    elif changes == 0 and all(c < 0 for c in col):
        status = RouthStatus.STABLE
    else:
        status = RouthStatus.UNSTABLE
    return RouthReport(status=status, coefficients=tuple(float(c) for c in coeffs), first_column=col, sign_changes=changes)
