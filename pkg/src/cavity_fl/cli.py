"""Command-line front end.

Usage::

    cavity-fl simulate|verify|stability|tune --config run.json [--out DIR]

The config is a strict JSON document (unknown keys are rejected) with the
optional blocks ``plant``, ``sim``, ``gains``, ``tune`` and ``output_dir``.
Every default filled in is echoed in the outputs. Verbosity is controlled
with ``CAVITY_FL_LOG=off|info|debug``.

Exit codes: 0 success, 1 config/validation error, 2 simulation aborted or
diverged (or tuning found no stable candidate), 3 verification failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

from .controller import REFERENCE_GAINS, Gains, Mapping, routh_hurwitz
from .lie import relative_degree_check, verification_report
from .model import PlantParams
from .reference import Profile, ProfileError, validate_profile
from .sim import COLUMNS, DEFAULT_X0, SimConfig, Status, simulate
from .tune import TRACE_COLUMNS, TuneConfig, tune

log = logging.getLogger("cavity_fl")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("simulate", "verify", "stability", "tune")

_PLANT_KEYS = ("K", "D", "w0", "beta_s", "beta_c", "R", "L", "mu", "v_sp", "v0", "u_limit")
_SIM_KEYS = ("x0", "profile", "dt", "t_end", "control_mode", "sample_period", "log_stride", "u_open", "x1_floor")
_PROFILE_KEYS = ("kind", "level", "start", "end", "t_ramp", "t0", "t1")
_GAIN_KEYS = ("k1", "k2", "k3", "k4", "mapping")
_TUNE_KEYS = (
    "method", "initial_gains", "bounds", "budget", "weights", "grid_points", "workers", "dt", "log_stride",
)
_TOP_KEYS = ("plant", "sim", "gains", "tune", "output_dir")

DEFAULT_PROFILE = {"kind": "constant", "level": 400.0}
DEFAULT_T_END = 20.0


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    plant: PlantParams
    sim: SimConfig
    gains: Optional[Gains]
    tune: Optional[TuneConfig]
    output_dir: Path
    defaults_used: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "plant": self.plant.to_dict(),
            "sim": self.sim.to_dict(),
            "gains": None if self.gains is None else self.gains.to_dict(),
            "tune": None if self.tune is None else self.tune.to_dict(),
            "output_dir": str(self.output_dir),
        }

    def assumptions(self) -> dict:
        return {
            **self.plant.assumptions(),
            "x0": list(self.sim.x0),
            "mapping": None if self.gains is None else self.gains.mapping.value,
            "defaults_used": list(self.defaults_used),
        }


def _block(doc, name, allowed):
    if not isinstance(doc, dict):
        raise ConfigError(f"{name}: expected an object, got {type(doc).__name__}")
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {', '.join(repr(k) for k in unknown)}")
    return doc


def _get(doc, key, default, path, used):
    if key in doc:
        return doc[key]
    used.append(f"{path}.{key}")
    return default


def _parse_gains(doc, path, used) -> Gains:
    _block(doc, path, _GAIN_KEYS)
    ks = [_get(doc, f"k{i + 1}", REFERENCE_GAINS[i], path, used) for i in range(4)]
    mapping = _get(doc, "mapping", Mapping.ASCENDING.value, path, used)
    try:
        return Gains(*(float(k) for k in ks), mapping=Mapping(mapping))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_config(text: str, output_dir: Optional[str] = None) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises
    ------
    ConfigError
        On malformed JSON (with line/column), unknown keys, or a violated
        invariant (the message names it).
    """
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    _block(doc, "config", _TOP_KEYS)
    used: List[str] = []

    plant_doc = _block(doc.get("plant", {}), "plant", _PLANT_KEYS)
    try:
        plant = PlantParams(**plant_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"plant: {exc}") from None
    for key in PlantParams.ASSUMED:
        if key not in plant_doc:
            used.append(f"plant.{key}")

    if "gains" in doc and doc["gains"] is None:
        gains = None
    else:
        if "gains" not in doc:
            used.append("gains")
        gains = _parse_gains(doc.get("gains", {}), "gains", used)

    sim_doc = _block(doc.get("sim", {}), "sim", _SIM_KEYS)
    prof_doc = _block(_get(sim_doc, "profile", DEFAULT_PROFILE, "sim", used), "sim.profile", _PROFILE_KEYS)
    try:
        profile = Profile(**prof_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sim.profile: {exc}") from None
    try:
        sim = SimConfig(
            profile=profile,
            gains=gains,
            x0=tuple(_get(sim_doc, "x0", DEFAULT_X0, "sim", used)),
            t_end=float(_get(sim_doc, "t_end", DEFAULT_T_END, "sim", used)),
            dt=float(_get(sim_doc, "dt", 1e-4, "sim", used)),
            control_mode=_get(sim_doc, "control_mode", "continuous", "sim", used),
            sample_period=sim_doc.get("sample_period"),
            log_stride=_get(sim_doc, "log_stride", 1, "sim", used),
            u_open=float(_get(sim_doc, "u_open", 0.0, "sim", used)),
            x1_floor=float(_get(sim_doc, "x1_floor", 1e-6, "sim", used)),
        )
    except (TypeError, ValueError, ArithmeticError) as exc:
        raise ConfigError(f"sim: {exc}") from None

    tune_cfg = None
    if doc.get("tune") is not None:
        tdoc = _block(doc["tune"], "tune", _TUNE_KEYS)
        if "initial_gains" in tdoc:
            initial = _parse_gains(tdoc["initial_gains"], "tune.initial_gains", used)
        elif gains is not None:
            initial = gains
        else:
            initial = _parse_gains({}, "tune.initial_gains", used)
        try:
            scenario = replace(
                sim,
                gains=None,
                dt=float(tdoc.get("dt", sim.dt)),
                log_stride=tdoc.get("log_stride", sim.log_stride),
            )
            kwargs = {k: tdoc[k] for k in ("method", "budget", "grid_points", "workers") if k in tdoc}
            if "bounds" in tdoc:
                b = tdoc["bounds"]
                kwargs["bounds"] = tuple(tuple(x) for x in b) if isinstance(b[0], (list, tuple)) else (tuple(b),) * 4
            if "weights" in tdoc:
                kwargs["weights"] = tuple(tdoc["weights"])
            tune_cfg = TuneConfig(scenario=scenario, initial_gains=initial, **kwargs)
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"tune: {exc}") from None

    out = output_dir if output_dir is not None else doc.get("output_dir", "out")
    if "output_dir" not in doc and output_dir is None:
        used.append("output_dir")
    return RunConfig(plant=plant, sim=sim, gains=gains, tune=tune_cfg, output_dir=Path(out), defaults_used=used)


def _clean(obj):
    # JSON has no inf/nan; they become null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, obj) -> None:
    _atomic_write(path, json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n")


def _fmt(value) -> str:
    # repr is the shortest string that round-trips a float
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def trajectory_rows(result):
    for row in result.rows:
        vals = [float(v) for v in row]
        vals[-1] = int(vals[-1])
        yield vals


def cmd_simulate(cfg: RunConfig) -> int:
    result = simulate(cfg.sim, cfg.plant)
    out = cfg.output_dir
    _write_csv(out / "trajectory.csv", COLUMNS, trajectory_rows(result))
    _write_json(
        out / "metrics.json",
        {
            "status": result.status.value,
            "message": result.message,
            "metrics": None if result.metrics is None else result.metrics.to_dict(),
            "assumptions": cfg.assumptions(),
            "config": cfg.to_dict(),
        },
    )
    log.info("simulate: %s", result.status.value)
    return EXIT_OK if result.status is Status.COMPLETED else EXIT_ABORT


def cmd_verify(cfg: RunConfig) -> int:
    report = verification_report(cfg.plant)
    report["relative_degree_at_x0"] = relative_degree_check(cfg.sim.x0, cfg.plant)
    try:
        report["profile"] = validate_profile(cfg.sim.profile)
    except ProfileError as exc:
        report["profile"] = {"passed": False, "error": str(exc)}
    passed = report["passed"] and report["relative_degree_at_x0"]["passed"] and report["profile"]["passed"]
    report["passed"] = bool(passed)
    report["assumptions"] = cfg.assumptions()
    _write_json(cfg.output_dir / "verification.json", report)
    log.info("verify: %s", "PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_stability(cfg: RunConfig) -> int:
    values = cfg.gains.values if cfg.gains is not None else REFERENCE_GAINS
    out = {"gains": list(values)}
    for m in Mapping:
        out[m.value] = routh_hurwitz(Gains(*values, mapping=m)).to_dict()
    _write_json(cfg.output_dir / "routh.json", out)
    return EXIT_OK


def cmd_tune(cfg: RunConfig) -> int:
    tcfg = cfg.tune
    if tcfg is None:
        tcfg = TuneConfig(
            scenario=replace(cfg.sim, gains=None),
            initial_gains=cfg.gains or Gains(*REFERENCE_GAINS, mapping=Mapping.ASCENDING),
        )
        cfg.defaults_used.append("tune")
    result = tune(tcfg, cfg.plant)
    _write_csv(cfg.output_dir / "tune_trace.csv", TRACE_COLUMNS, (e.row() for e in result.trace))
    _write_json(
        cfg.output_dir / "best_gains.json",
        {
            "success": result.success,
            "gains": None if result.gains is None else result.gains.to_dict(),
            "cost": result.cost,
            "n_evals": result.n_evals,
            "budget_exhausted": result.budget_exhausted,
            "message": result.message,
            "tune": tcfg.to_dict(),
            "assumptions": cfg.assumptions(),
        },
    )
    return EXIT_OK if result.success else EXIT_ABORT


_DISPATCH = {"simulate": cmd_simulate, "verify": cmd_verify, "stability": cmd_stability, "tune": cmd_tune}


def run(command: str, cfg: RunConfig) -> int:
    return _DISPATCH[command](cfg)


def _setup_logging():
    level = os.environ.get("CAVITY_FL_LOG", "off").lower()
    levels = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, levels["off"]), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="cavity-fl", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, output_dir=args.out)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
