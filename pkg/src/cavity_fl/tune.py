"""Derivative-free tuning of the four feedback gains.

Candidates are screened with the Routh-Hurwitz test before any simulation;
unstable ones get a large finite penalty so the optimizer can still rank
them. Nelder-Mead runs in log-gain space with box projection onto the
bounds; the grid search walks a logarithmic lattice.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .controller import Gains, RouthStatus, characteristic_polynomial, routh_hurwitz
from .model import PlantParams
from .sim import SimConfig, Status, simulate

__all__ = [
    "TuneMethod",
    "TuneConfig",
    "TraceEntry",
    "TuneResult",
    "PENALTY",
    "evaluate",
    "objective",
    "tune",
]

PENALTY = 1e9
TRACE_COLUMNS = ("eval", "k1", "k2", "k3", "k4", "cost", "best_cost", "routh", "status", "settling_time")


class TuneMethod(str, enum.Enum):
    NELDER_MEAD = "nelder_mead"
    GRID = "grid"


@dataclass(frozen=True)
class TuneConfig:
    scenario: SimConfig
    initial_gains: Gains
    method: TuneMethod = TuneMethod.NELDER_MEAD
    bounds: Tuple[Tuple[float, float], ...] = ((1e-3, 1e3),) * 4
    budget: int = 500
    weights: Tuple[float, float, float] = (1e-6, 1.0, 1.0)
    grid_points: int = 5
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", TuneMethod(self.method))
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) != 4:
            raise ValueError("bounds must give (min, max) for each of the 4 gains")
        for lo, hi in bounds:
            if not (0 < lo < hi and math.isfinite(hi)):
                raise ValueError("bounds 0 < min < max violated")
        object.__setattr__(self, "bounds", bounds)
        if int(self.budget) != self.budget or self.budget < 1:
            raise ValueError("budget >= 1 violated")
        w = tuple(float(v) for v in self.weights)
        if len(w) != 3 or any(not (v >= 0 and math.isfinite(v)) for v in w) or not any(v > 0 for v in w):
            raise ValueError("weights >= 0 with at least one positive violated")
        object.__setattr__(self, "weights", w)
        if self.grid_points < 2:
            raise ValueError("grid_points >= 2 violated")
        if self.workers < 1:
            raise ValueError("workers >= 1 violated")

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "initial_gains": self.initial_gains.to_dict(),
            "bounds": [list(b) for b in self.bounds],
            "budget": self.budget,
            "weights": list(self.weights),
            "grid_points": self.grid_points,
            "workers": self.workers,
            "scenario": self.scenario.to_dict(),
        }


@dataclass(frozen=True)
class TraceEntry:
    eval: int
    gains: tuple
    cost: float
    best_cost: float
    routh: str
    status: str
    settling_time: float

    def row(self) -> tuple:
        return (self.eval, *self.gains, self.cost, self.best_cost, self.routh, self.status, self.settling_time)


@dataclass
class TuneResult:
    gains: Optional[Gains]
    cost: float
    trace: List[TraceEntry]
    success: bool
    budget_exhausted: bool
    message: str = ""

    @property
    def n_evals(self) -> int:
        return len(self.trace)


def evaluate(gains: Gains, cfg: TuneConfig, params: PlantParams) -> dict:
    """Cost of one candidate with diagnostics.

    Returns a dict with ``cost``, ``routh`` status, simulation ``status``
    (``"skipped"`` for Routh-rejected candidates) and ``settling_time``.
    """
    report = routh_hurwitz(gains)
    if report.status is not RouthStatus.STABLE:
        worst = float(np.max(np.roots(characteristic_polynomial(gains)).real))
        return {
            "cost": PENALTY + 1e6 * max(0.0, worst),
            "routh": report.status.value,
            "status": "skipped",
            "settling_time": math.inf,
        }
    scenario = cfg.scenario
    res = simulate(replace(scenario, gains=gains), params)
    if res.status is not Status.COMPLETED:
        reached = res.t[-1] if len(res.t) else 0.0
        return {
            "cost": PENALTY * (1.0 + (1.0 - reached / scenario.t_end)),
            "routh": report.status.value,
            "status": res.status.value,
            "settling_time": math.inf,
        }
    m = res.metrics
    w_ise, w_settle, w_sat = cfg.weights
    # unsettled runs are charged the full horizon
    settle = m.settling_time_2pct if m.settled else scenario.t_end
    sat_fraction = float(np.mean(res.column("saturated")))
    cost = w_ise * m.ise + w_settle * settle + w_sat * sat_fraction
    return {
        "cost": float(cost),
        "routh": report.status.value,
        "status": res.status.value,
        "settling_time": m.settling_time_2pct,
    }


def objective(gains: Gains, cfg: TuneConfig, params: PlantParams) -> float:
    """Composite tuning cost; penalties instead of exceptions."""
    return evaluate(gains, cfg, params)["cost"]


class _BudgetExhausted(Exception):
    pass


class _Recorder:
    def __init__(self, cfg, params):
        self.cfg = cfg
        self.params = params
        self.trace = []
        self.best = math.inf
        self.best_gains = None

    def record(self, gains, info):
        cost = info["cost"]
        if info["routh"] == RouthStatus.STABLE.value and info["status"] == Status.COMPLETED.value and cost < self.best:
            self.best = cost
            self.best_gains = gains
        # best-so-far over every candidate, penalised ones included, so the column is monotone
        prev = self.trace[-1].best_cost if self.trace else math.inf
        self.trace.append(
            TraceEntry(
                eval=len(self.trace),
                gains=gains.values,
                cost=cost,
                best_cost=min(prev, cost),
                routh=info["routh"],
                status=info["status"],
                settling_time=info["settling_time"],
            )
        )

    def __call__(self, gains):
        if len(self.trace) >= self.cfg.budget:
            raise _BudgetExhausted
        info = evaluate(gains, self.cfg, self.params)
        self.record(gains, info)
        return info["cost"]


def _nelder_mead(cfg, rec):
    lo = np.log([b[0] for b in cfg.bounds])
    hi = np.log([b[1] for b in cfg.bounds])
    x0 = np.clip(np.log(cfg.initial_gains.values), lo, hi)
    simplex = [x0]
    for i in range(4):
        vertex = x0.copy()
        vertex[i] = min(vertex[i] + math.log(1.1), hi[i])
        if vertex[i] == x0[i]:
            vertex[i] = max(x0[i] - math.log(1.1), lo[i])
        simplex.append(vertex)
    fun = lambda z: rec(cfg.initial_gains.with_values(np.exp(np.clip(z, lo, hi))))
    try:
        minimize(
            fun,
            x0,
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={
                "initial_simplex": np.array(simplex),
                "maxfev": cfg.budget,
                "maxiter": 100 * cfg.budget,
                "xatol": 1e-4,
                "fatol": 1e-6,
                "adaptive": False,
            },
        )
    except _BudgetExhausted:
        return True
    return len(rec.trace) >= cfg.budget


def _eval_one(args):
    gains, cfg, params = args
    return evaluate(gains, cfg, params)


def _grid(cfg, rec):
    axes = [np.geomspace(lo, hi, cfg.grid_points) for lo, hi in cfg.bounds]
    points = itertools.product(*axes)
    candidates = [cfg.initial_gains.with_values(pt) for pt in itertools.islice(points, cfg.budget)]
    total = cfg.grid_points**4
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            infos = list(pool.map(_eval_one, [(g, cfg, rec.params) for g in candidates]))
    else:
        infos = [evaluate(g, cfg, rec.params) for g in candidates]
    for g, info in zip(candidates, infos):
        rec.record(g, info)
    return total > cfg.budget


def tune(cfg: TuneConfig, params: PlantParams) -> TuneResult:
    """Search for gains minimising :func:`objective`.

    The returned gains are the best Routh-stable, completed candidate seen.
    If no candidate qualifies, ``gains`` is None and ``success`` False.
    """
    rec = _Recorder(cfg, params)
    if cfg.method is TuneMethod.NELDER_MEAD:
        exhausted = _nelder_mead(cfg, rec)
    else:
        exhausted = _grid(cfg, rec)
    if rec.best_gains is None:
        return TuneResult(None, math.inf, rec.trace, False, exhausted, "no stable completed candidate")
    return TuneResult(rec.best_gains, rec.best, rec.trace, True, exhausted)
