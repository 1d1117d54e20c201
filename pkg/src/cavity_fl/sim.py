"""Fixed-step RK4 simulation of the plant under feedback or constant input.

In ``CONTINUOUS`` mode the control law is re-evaluated at every Runge-Kutta
stage, so the integrator sees the smooth closed-loop vector field and keeps
its fourth-order accuracy. In ``ZOH`` mode the voltage is computed at sample
instants and held, which is the discrete-deployment approximation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .controller import DecouplingError, Gains, _decide
from .model import PlantParams, SingularityError, _f, as_state
from .reference import Profile, ProfileKind, eval_profile

__all__ = [
    "COLUMNS",
    "DEFAULT_X0",
    "ControlMode",
    "Status",
    "SimConfig",
    "Metrics",
    "SimResult",
    "rk4_step",
    "simulate",
    "metrics",
]

COLUMNS = ("t", "x1", "x2", "x3", "x4", "x5", "yd", "e", "u", "v", "saturated")
DEFAULT_X0 = (10.0, 0.0, 0.0, 0.0, 0.0)
DIVERGENCE_LIMIT = 1e12
SETTLING_BAND = 0.02


class ControlMode(str, enum.Enum):
    CONTINUOUS = "continuous"
    ZOH = "zoh"


class Status(str, enum.Enum):
    COMPLETED = "completed"
    SINGULARITY_ABORT = "singularity_abort"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class SimConfig:
    """Simulation scenario.

    ``gains=None`` runs open loop with the constant voltage ``u_open``.
    """

    profile: Profile
    t_end: float
    gains: Optional[Gains] = None
    x0: tuple = DEFAULT_X0
    dt: float = 1e-4
    control_mode: ControlMode = ControlMode.CONTINUOUS
    sample_period: Optional[float] = None
    log_stride: int = 1
    u_open: float = 0.0
    x1_floor: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "control_mode", ControlMode(self.control_mode))
        object.__setattr__(self, "x0", tuple(float(v) for v in as_state(self.x0)))
        if not self.dt > 0:
            raise ValueError("dt > 0 violated")
        if not self.t_end > self.dt:
            raise ValueError("t_end > dt violated")
        if int(self.log_stride) != self.log_stride or self.log_stride < 1:
            raise ValueError("log_stride >= 1 (integer) violated")
        if self.x0[0] <= self.x1_floor:
            raise ValueError("x1(0) above x1_floor violated")
        if self.control_mode is ControlMode.ZOH:
            if self.sample_period is None or self.sample_period < self.dt:
                raise ValueError("ZOH sample_period >= dt violated")
            m = self.sample_period / self.dt
            if abs(m - round(m)) > 1e-9 * m:
                raise ValueError("ZOH sample_period must be an integer multiple of dt")
        elif self.sample_period is not None:
            raise ValueError("sample_period is only valid with control_mode 'zoh'")
        if not math.isfinite(self.u_open):
            raise ValueError("u_open must be finite")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def hold_steps(self) -> int:
        if self.control_mode is ControlMode.ZOH:
            return int(round(self.sample_period / self.dt))
        return 1

    def to_dict(self) -> dict:
        return {
            "x0": list(self.x0),
            "profile": self.profile.to_dict(),
            "gains": None if self.gains is None else self.gains.to_dict(),
            "dt": self.dt,
            "t_end": self.t_end,
            "control_mode": self.control_mode.value,
            "sample_period": self.sample_period,
            "log_stride": self.log_stride,
            "u_open": self.u_open,
            "x1_floor": self.x1_floor,
        }


@dataclass(frozen=True)
class Metrics:
    settling_time_2pct: float
    overshoot_pct: float
    ise: float
    iae: float
    final_error: float

    @property
    def settled(self) -> bool:
        return math.isfinite(self.settling_time_2pct)

    def to_dict(self) -> dict:
        return {
            "settling_time_2pct": self.settling_time_2pct if self.settled else None,
            "settled": self.settled,
            "overshoot_pct": self.overshoot_pct,
            "ise": self.ise,
            "iae": self.iae,
            "final_error": self.final_error,
        }


@dataclass
class SimResult:
    rows: np.ndarray
    status: Status
    metrics: Optional[Metrics] = None
    message: str = ""
    columns: tuple = field(default=COLUMNS)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.rows[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.rows[:, 5]

    @property
    def states(self) -> np.ndarray:
        return self.rows[:, 1:6]


class _Abort(Exception):
    def __init__(self, status, message):
        super().__init__(message)
        self.status = status


def _rk4(x, ufun, t, dt, p, floor, u0=None):
    # x is a 5-tuple of floats; ufun(t, x) -> float; unrolled for speed
    half = 0.5 * dt
    kw2 = p.kw2
    x1, x2, x3, x4, x5 = x
    u = ufun(t, x) if u0 is None else u0
    a1, a2, a3, a4, a5 = _f(x1, x2, x3, x4, x5, p)
    a3 += kw2 * u
    s = (x1 + half * a1, x2 + half * a2, x3 + half * a3, x4 + half * a4, x5 + half * a5)
    _check_stage(s[0], floor)
    b1, b2, b3, b4, b5 = _f(*s, p)
    b3 += kw2 * ufun(t + half, s)
    s = (x1 + half * b1, x2 + half * b2, x3 + half * b3, x4 + half * b4, x5 + half * b5)
    _check_stage(s[0], floor)
    c1, c2, c3, c4, c5 = _f(*s, p)
    c3 += kw2 * ufun(t + half, s)
    s = (x1 + dt * c1, x2 + dt * c2, x3 + dt * c3, x4 + dt * c4, x5 + dt * c5)
    _check_stage(s[0], floor)
    d1, d2, d3, d4, d5 = _f(*s, p)
    d3 += kw2 * ufun(t + dt, s)
    w = dt / 6.0
    return (
        x1 + w * (a1 + 2.0 * b1 + 2.0 * c1 + d1),
        x2 + w * (a2 + 2.0 * b2 + 2.0 * c2 + d2),
        x3 + w * (a3 + 2.0 * b3 + 2.0 * c3 + d3),
        x4 + w * (a4 + 2.0 * b4 + 2.0 * c4 + d4),
        x5 + w * (a5 + 2.0 * b5 + 2.0 * c5 + d5),
    )


def _check_stage(x1, floor):
    if not x1 > floor:
        if math.isfinite(x1):
            raise _Abort(Status.SINGULARITY_ABORT, f"x1 = {x1!r} reached the floor {floor!r}")
        raise _Abort(Status.DIVERGED, "non-finite state")


def rk4_step(
    x: Sequence[float],
    u: Union[float, Callable[[float, tuple], float]],
    dt: float,
    params: PlantParams,
    t: float = 0.0,
) -> np.ndarray:
    """One classic Runge-Kutta step of ``f(x) + g U``.

    ``u`` is either a constant voltage held over the step or a callable
    ``u(t, x)`` evaluated at every stage.

    Raises
    ------
    SingularityError
        If any stage state has x1 <= 0 or is non-finite.
    """
    x = tuple(float(v) for v in as_state(x))
    if not dt > 0:
        raise ValueError("dt > 0 violated")
    ufun = u if callable(u) else (lambda _t, _x: u)
    try:
        out = _rk4(x, ufun, t, dt, params, 0.0)
    except _Abort as exc:
        raise SingularityError(str(exc)) from None
    if not all(math.isfinite(v) for v in out):
        raise SingularityError("non-finite state after step")
    return np.array(out)


def simulate(cfg: SimConfig, params: PlantParams) -> SimResult:
    """Integrate from 0 to ``cfg.t_end`` and log every ``log_stride``-th step.

    Aborts are reported through :attr:`SimResult.status`, never raised; the
    rows logged up to the abort are kept. Metrics are computed only for
    completed runs.
    """
    n = cfg.n_steps
    dt = cfg.dt
    stride = cfg.log_stride
    hold = cfg.hold_steps
    floor = cfg.x1_floor
    profile = cfg.profile
    gains = cfg.gains
    closed = gains is not None
    coeffs = gains.feedback_coefficients() if closed else None
    continuous = closed and cfg.control_mode is ControlMode.CONTINUOUS
    if profile.kind is ProfileKind.CONSTANT:
        const_ref = eval_profile(profile, 0.0)
        ref_at = lambda _t: const_ref
    else:
        ref_at = lambda t: eval_profile(profile, t)

    def u_closed(t, s):
        return _decide(*s, ref_at(t), coeffs, params)[0]

    n_rows = n // stride + 1 + (1 if n % stride else 0)
    rows = np.empty((n_rows, len(COLUMNS)))
    r = 0
    x = cfg.x0
    status = Status.COMPLETED
    message = ""
    u = cfg.u_open
    v = math.nan
    sat = False
    k = 0
    try:
        while True:
            t = k * dt
            ref = ref_at(t)
            if closed and k % hold == 0:
                u, v, *_, sat = _decide(*x, ref, coeffs, params)
            if k % stride == 0 or k == n:
                rows[r] = (t, *x, ref[0], x[4] - ref[0], u, v, float(sat))
                r += 1
            if k == n:
                break
            if continuous:
                x = _rk4(x, u_closed, t, dt, params, floor, u0=u)
            else:
                held = u
                x = _rk4(x, lambda _t, _s: held, t, dt, params, floor)
            k += 1
            if not all(math.isfinite(xi) and abs(xi) <= DIVERGENCE_LIMIT for xi in x):
                raise _Abort(Status.DIVERGED, f"|x| exceeded {DIVERGENCE_LIMIT:g} at t = {k * dt:g}")
            if not x[0] > floor:
                raise _Abort(Status.SINGULARITY_ABORT, f"x1 reached the floor at t = {k * dt:g}")
    except _Abort as exc:
        status, message = exc.status, str(exc)
    except DecouplingError as exc:
        status, message = Status.SINGULARITY_ABORT, str(exc)
    except (SingularityError, OverflowError, ZeroDivisionError) as exc:
        status, message = Status.DIVERGED, str(exc)
    result = SimResult(rows=rows[:r], status=status, message=message)
    if status is Status.COMPLETED:
        result.metrics = metrics(result.rows, profile)
    return result


def metrics(rows: np.ndarray, profile: Profile) -> Metrics:
    """Tracking metrics of a completed run.

    The settling time is the earliest logged time after which
    ``|e| <= 2%`` of the final reference level for every remaining sample
    (+inf if the last sample is outside the band). Overshoot is measured
    past the final level, relative to the step from the initial output.
    ISE and IAE are left Riemann sums over the logged grid.
    """
    t = rows[:, 0]
    y = rows[:, 5]
    e = rows[:, 7]
    target = profile.final_level
    step = target - y[0]
    band = SETTLING_BAND * abs(target) if target != 0 else SETTLING_BAND * abs(step)
    outside = np.nonzero(np.abs(e) > band)[0]
    if outside.size == 0:
        settling = float(t[0])
    elif outside[-1] + 1 < len(t):
        settling = float(t[outside[-1] + 1])
    else:
        settling = math.inf
    if step != 0:
        overshoot = max(0.0, float(np.max(np.sign(step) * (y - target)))) / abs(step) * 100.0
        overshoot = float(overshoot)
    else:
        overshoot = 0.0
    widths = np.diff(t)
    ise = float(np.sum(e[:-1] ** 2 * widths))
    iae = float(np.sum(np.abs(e[:-1]) * widths))
    return Metrics(
        settling_time_2pct=settling,
        overshoot_pct=overshoot,
        ise=ise,
        iae=iae,
        final_error=float(e[-1]),
    )
