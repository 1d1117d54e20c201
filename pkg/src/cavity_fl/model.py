"""Five-state input-affine model of a servo-electric injection moulding machine.

State ordering::

    x1  screw position          (must stay > 0)
    x2  drive velocity
    x3  drive acceleration
    x4  screw pressure
    x5  cavity pressure         (controlled output)

Dynamics are ``xdot = f(x) + g * U`` with U the servo voltage. The drive is a
second-order lag (gain K, damping D, cut-off w0), the screw and cavity
pressures couple through a Newtonian nozzle with conductance Q.

All constants are used verbatim in "model units". The printed model mixes bar,
cm and SI quantities and the screw-pressure row carries no specific-volume
factor, so it is not dimensionally consistent; that is kept as-is on purpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "ParameterError",
    "SingularityError",
    "PlantParams",
    "derive_q",
    "as_state",
    "f_of",
    "g_of",
    "rhs",
]


class ParameterError(ValueError):
    """Raised when a parameter set violates one of its invariants."""


class SingularityError(ArithmeticError):
    """Raised when a state reaches x1 <= 0 or produces non-finite values."""


def derive_q(params: "PlantParams") -> float:
    """Nozzle conductance ``pi R^4 / (8 v_sp L mu)`` from the stored fields."""
    return math.pi * params.R**4 / (8.0 * params.v_sp * params.L * params.mu)


@dataclass(frozen=True)
class PlantParams:
    """Physical and model constants of the machine.

    The defaults are the published machine values; ``v_sp`` and ``v0`` are
    assumptions (the source gives no numbers for them) and are reported as
    such by :meth:`assumptions`.
    """

    K: float = 23.4
    D: float = 0.79
    w0: float = 133.0
    beta_s: float = 8662.0
    beta_c: float = 8662.0
    R: float = 0.2
    L: float = 8.0
    mu: float = 60.0
    v_sp: float = 1.0
    v0: float = 1.0
    u_limit: Optional[float] = None

    # derived, cached once so every consumer sees the same bits
    Q: float = field(init=False, repr=False, compare=False)
    a: float = field(init=False, repr=False, compare=False)
    b: float = field(init=False, repr=False, compare=False)
    kw2: float = field(init=False, repr=False, compare=False)
    w0sq: float = field(init=False, repr=False, compare=False)
    two_dw0: float = field(init=False, repr=False, compare=False)

    ASSUMED = ("v_sp", "v0")

    def __post_init__(self):
        for name in ("K", "D", "w0", "beta_s", "beta_c", "R", "L", "mu", "v_sp", "v0"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} > 0 violated (got {value!r})")
        if self.u_limit is not None and not (math.isfinite(self.u_limit) and self.u_limit > 0):
            raise ParameterError(f"u_limit > 0 violated (got {self.u_limit!r})")
        q = derive_q(self)
        if not (math.isfinite(q) and q > 0):
            raise ParameterError(f"Q > 0 and finite violated (got {q!r})")
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "a", q * self.beta_c / self.v0)
        object.__setattr__(self, "b", q * self.beta_s)
        object.__setattr__(self, "kw2", self.K * self.w0**2)
        object.__setattr__(self, "w0sq", self.w0**2)
        object.__setattr__(self, "two_dw0", 2.0 * self.D * self.w0)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.init}

    def assumptions(self) -> dict:
        """Values not given by the machine data and therefore assumed."""
        return {name: getattr(self, name) for name in self.ASSUMED}


def as_state(x: Sequence[float]) -> np.ndarray:
    """Validate and copy a state vector.

    Raises
    ------
    SingularityError
        If x1 <= 0 or any entry is non-finite.
    """
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape != (5,):
        raise ValueError(f"state must have 5 entries, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise SingularityError(f"non-finite state {arr}")
    if arr[0] <= 0.0:
        raise SingularityError(f"screw position x1 = {arr[0]!r} must be > 0")
    return arr


def _f(x1, x2, x3, x4, x5, p):
    # scalar kernel shared by the simulator
    inv = 1.0 / x1
    d = x4 - x5
    return (
        x2,
        x3,
        -p.two_dw0 * x3 - p.w0sq * x2,
        -p.beta_s * inv * x2 - p.Q * p.beta_s * inv * d,
        p.a * d,
    )


def f_of(x: Sequence[float], params: PlantParams) -> np.ndarray:
    """Drift vector field f(x)."""
    x = as_state(x)
    with np.errstate(all="ignore"):
        out = np.array(_f(*x, params))
    if not np.all(np.isfinite(out)):
        raise SingularityError(f"non-finite drift at {x}")
    return out


def g_of(params: PlantParams) -> np.ndarray:
    """Input vector field; only the drive acceleration is actuated."""
    return np.array([0.0, 0.0, params.kw2, 0.0, 0.0])


def rhs(x: Sequence[float], u: float, params: PlantParams) -> np.ndarray:
    """Open-loop right-hand side ``f(x) + g U``."""
    if not math.isfinite(u):
        raise ValueError(f"input must be finite, got {u!r}")
    return f_of(x, params) + g_of(params) * u
