"""Cavity-pressure reference trajectories with analytic derivatives to order 4."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = ["ProfileError", "ProfileKind", "Profile", "ReferenceSample", "eval_profile", "validate_profile"]


class ProfileError(ValueError):
    pass


class ProfileKind(str, enum.Enum):
    CONSTANT = "constant"
    RAMP_HOLD = "ramp_hold"
    SMOOTH_STEP = "smooth_step"


class ReferenceSample(NamedTuple):
    yd: float
    yd1: float
    yd2: float
    yd3: float
    yd4: float


# 126 s^5 - 420 s^6 + 540 s^7 - 315 s^8 + 70 s^9: first four derivatives vanish at 0 and 1
_BLEND = np.array([0, 0, 0, 0, 0, 126, -420, 540, -315, 70], dtype=float)
_BLEND_DERIVS = [_BLEND] + [P.polyder(_BLEND, m) for m in range(1, 5)]


@dataclass(frozen=True)
class Profile:
    """A reference trajectory.

    ``CONSTANT`` uses ``level``; ``RAMP_HOLD`` goes linearly from ``start`` to
    ``end`` over ``[0, t_ramp]`` and then holds; ``SMOOTH_STEP`` blends from
    ``start`` to ``end`` over ``[t0, t1]`` with a degree-9 polynomial whose
    first four derivatives vanish at both ends.
    """

    kind: ProfileKind
    level: Optional[float] = None
    start: Optional[float] = None
    end: Optional[float] = None
    t_ramp: Optional[float] = None
    t0: Optional[float] = None
    t1: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        required = {
            ProfileKind.CONSTANT: ("level",),
            ProfileKind.RAMP_HOLD: ("start", "end", "t_ramp"),
            ProfileKind.SMOOTH_STEP: ("start", "end", "t0", "t1"),
        }[self.kind]
        for name in ("level", "start", "end", "t_ramp", "t0", "t1"):
            value = getattr(self, name)
            if name in required:
                if value is None or not math.isfinite(value):
                    raise ProfileError(f"{self.kind.value}: {name} must be a finite number")
            elif value is not None:
                raise ProfileError(f"{self.kind.value}: unexpected field {name}")
        if self.kind is ProfileKind.RAMP_HOLD and not self.t_ramp > 0:
            raise ProfileError("ramp_hold: t_ramp > 0 violated")
        if self.kind is ProfileKind.SMOOTH_STEP and not (self.t1 > self.t0 and self.t0 >= 0):
            raise ProfileError("smooth_step: t1 > t0 >= 0 violated")

    @classmethod
    def constant(cls, level: float) -> "Profile":
        return cls(ProfileKind.CONSTANT, level=level)

    @classmethod
    def ramp_hold(cls, start: float, end: float, t_ramp: float) -> "Profile":
        return cls(ProfileKind.RAMP_HOLD, start=start, end=end, t_ramp=t_ramp)

    @classmethod
    def smooth_step(cls, start: float, end: float, t0: float, t1: float) -> "Profile":
        return cls(ProfileKind.SMOOTH_STEP, start=start, end=end, t0=t0, t1=t1)

    @property
    def final_level(self) -> float:
        return self.level if self.kind is ProfileKind.CONSTANT else self.end

    @property
    def initial_level(self) -> float:
        return self.level if self.kind is ProfileKind.CONSTANT else self.start

    @property
    def breakpoints(self) -> tuple:
        """Times where some derivative channel is discontinuous."""
        return (self.t_ramp,) if self.kind is ProfileKind.RAMP_HOLD else ()

    @property
    def is_c4(self) -> bool:
        return self.kind is not ProfileKind.RAMP_HOLD

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        for name in ("level", "start", "end", "t_ramp", "t0", "t1"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


def eval_profile(p: Profile, t: float) -> ReferenceSample:
    """Reference value and its first four time derivatives at ``t``.

    ``RAMP_HOLD`` is right-continuous at the corner: the hold values are
    returned at ``t == t_ramp``.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    kind = p.kind
    if kind is ProfileKind.CONSTANT:
        return ReferenceSample(float(p.level), 0.0, 0.0, 0.0, 0.0)
    if kind is ProfileKind.RAMP_HOLD:
        if t < p.t_ramp:
            slope = (p.end - p.start) / p.t_ramp
            return ReferenceSample(p.start + slope * t, float(slope), 0.0, 0.0, 0.0)
        return ReferenceSample(float(p.end), 0.0, 0.0, 0.0, 0.0)
    if t <= p.t0:
        return ReferenceSample(float(p.start), 0.0, 0.0, 0.0, 0.0)
    if t >= p.t1:
        return ReferenceSample(float(p.end), 0.0, 0.0, 0.0, 0.0)
    span = p.t1 - p.t0
    s = (t - p.t0) / span
    amp = p.end - p.start
    vals = [amp * P.polyval(s, c) / span**m for m, c in enumerate(_BLEND_DERIVS)]
    vals[0] += p.start
    return ReferenceSample(*(float(v) for v in vals))


def validate_profile(p: Profile, n_samples: int = 50, t_end: Optional[float] = None, rtol: float = 1e-4) -> dict:
    """Check that each derivative channel is the derivative of the one below it.

    Central differences of channel k-1 are compared with channel k at
    ``n_samples`` times spread over the interesting part of the profile.
    Stencils straddling a breakpoint are skipped; profiles that are not C4
    are flagged (``c4: False``) but still pass if the smooth pieces agree.

    Raises
    ------
    ProfileError
        If a derivative channel disagrees with its finite difference.
    """
    if t_end is None:
        t_end = {
            ProfileKind.CONSTANT: 1.0,
            ProfileKind.RAMP_HOLD: 2.0 * (p.t_ramp or 1.0),
            ProfileKind.SMOOTH_STEP: (p.t1 or 1.0) + 0.25 * ((p.t1 or 1.0) - (p.t0 or 0.0)),
        }[p.kind]
    h = 1e-5 * t_end
    times = np.linspace(2 * h, t_end, n_samples)
    grid = np.linspace(0.0, t_end, 1001)
    scale = np.max(np.abs([eval_profile(p, t) for t in grid]), axis=0)
    worst = 0.0
    checked = 0
    for t in times:
        if any(abs(t - b) <= 2 * h for b in p.breakpoints):
            continue
        lo, hi = eval_profile(p, t - h), eval_profile(p, t + h)
        mid = eval_profile(p, t)
        for k in range(1, 5):
            fd = (hi[k - 1] - lo[k - 1]) / (2 * h)
            err = abs(fd - mid[k]) / max(abs(mid[k]), scale[k], 1.0)
            worst = max(worst, err)
            if err > rtol:
                raise ProfileError(
                    f"{p.kind.value}: derivative order {k} inconsistent at t={t:g} (rel err {err:.3g})"
                )
        checked += 1
    return {"passed": True, "c4": p.is_c4, "max_rel_err": float(worst), "samples_checked": checked}
