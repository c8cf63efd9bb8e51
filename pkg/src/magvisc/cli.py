"""Command-line front end.

    magvisc simulate --config run.toml --out results/
    magvisc sweep-epsilon --config run.toml --jobs 4
    magvisc refine --set grid.N=50 --set kernel.family="constant"

Every command writes ``summary.json`` and ``manifest.json`` to the output
directory; ``simulate`` adds ``trajectory.csv`` and ``energy.csv``, the sweeps
add ``sweep.csv``.  The exit status is 1 when any enabled check fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .config import COMMANDS, RunConfig, config_to_dict, parse_config
from .diagnostics import apriori_bounds, check_lemma21, check_lemma22, energy, gronwall_check
from .dynamics import Mode
from .errors import MagviscError
from .experiments import SweepResult, epsilon_sweep, delta_sweep, refinement_study
from .kernel import Constant, make_kernel

logger = logging.getLogger("magvisc")

UNIFORMITY_RATIO = 1.1


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def _fmt(x) -> str:
    return repr(float(x))


def write_trajectory_csv(path: Path, traj, stride: int) -> None:
    x = traj.grid.nodes
    levels = list(range(0, traj.n_levels, stride))
    if levels[-1] != traj.n_levels - 1:
        levels.append(traj.n_levels - 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "u", "v", "m1", "m2"])
        for n in levels:
            t = _fmt(traj.t[n])
            for j in range(x.size):
                w.writerow([t, _fmt(x[j]), _fmt(traj.u[n, j]), _fmt(traj.v[n, j]),
                            _fmt(traj.m1[n, j]), _fmt(traj.m2[n, j])])


def write_energy_csv(path: Path, report) -> None:
    cols = report.columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for n in range(report.t.size):
            w.writerow([_fmt(getattr(report, c)[n]) for c in cols])


def write_sweep_csv(path: Path, result: SweepResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "value", "metric", "level", "number"])
        for p, v, metric, level, num in result.long_rows():
            w.writerow([p, _fmt(v), metric, level, _fmt(num)])


def _check(passed: bool, **details) -> dict:
    return {"passed": bool(passed), **details}


def _uniform(result: SweepResult) -> dict:
    ratios = result.bound_ratios()
    return _check(all(r <= UNIFORMITY_RATIO for r in ratios.values()), ratios=ratios, limit=UNIFORMITY_RATIO)


def _wave_oracle(cfg: RunConfig):
    """Closed-form u for a constant kernel without coupling or forcing."""
    s = cfg.scenario
    if not (isinstance(s.kernel, Constant) and s.lam == 0.0 and s.forcing.is_zero and s.u1 == "sine"):
        return None
    if Mode(s.mode) is Mode.VISCOELASTIC:
        return None
    c = math.sqrt(s.kernel.value)
    k = s.u1_mode * math.pi
    amp = s.u1_amplitude
    return lambda x, t: amp * np.sin(k * x) * np.sin(k * c * t) / (k * c)


def cmd_simulate(cfg: RunConfig, out: Path) -> dict:
    traj = cfg.scenario.simulate()
    report = energy(traj)
    write_trajectory_csv(out / "trajectory.csv", traj, cfg.output.stride)
    write_energy_csv(out / "energy.csv", report)
    d = cfg.diagnostics
    checks = {}
    if d.lemma21:
        c = check_lemma21(traj, report, d.tol_k)
        checks["lemma21"] = _check(c.passed, max_residual=c.max_residual, tol=c.tol)
    if d.lemma22 and traj.mode is not Mode.VISCOELASTIC:
        c = check_lemma22(traj, report, d.tol_k)
        checks["lemma22"] = _check(c.passed, max_residual=c.max_residual, tol=c.tol)
    if d.gronwall:
        g = gronwall_check(report, traj.params.dt)
        checks["gronwall"] = _check(g.passed, C=g.C, C_tilde=g.C_tilde, max_excess=g.max_excess)
    return {
        "dt": traj.params.dt,
        "n_steps": traj.params.n_steps,
        "apriori_bounds": apriori_bounds(traj, report).as_dict(),
        "checks": checks,
    }


def cmd_sweep_epsilon(cfg: RunConfig, out: Path) -> dict:
    res = epsilon_sweep(cfg.scenario, cfg.sweep.epsilons, jobs=cfg.sweep.jobs)
    write_sweep_csv(out / "sweep.csv", res)
    summary = res.to_dict()
    summary["checks"] = {
        "cauchy_decreasing": _check(res.extra["cauchy_decreasing"]),
        "singular_closer": _check(res.extra["singular_closer"]),
        "bounds_uniform": _uniform(res),
    }
    return summary


def cmd_sweep_delta(cfg: RunConfig, out: Path) -> dict:
    res = delta_sweep(cfg.scenario, cfg.sweep.deltas, jobs=cfg.sweep.jobs)
    write_sweep_csv(out / "sweep.csv", res)
    summary = res.to_dict()
    summary["checks"] = {
        "penalty_within_cap": _check(res.extra["penalty_within_cap"]),
        "slope": _check(res.extra["slope_ok"], slope=res.extra["slope"]),
        "bounds_uniform": _uniform(res),
    }
    return summary


def _decreasing(values) -> bool:
    mags = [abs(v) for v in values]
    return all(b < a for a, b in zip(mags, mags[1:]))


def cmd_refine(cfg: RunConfig, out: Path) -> dict:
    res = refinement_study(
        cfg.scenario,
        levels=cfg.sweep.levels,
        oracle=_wave_oracle(cfg),
        test_functions=cfg.weak.test_functions(),
        jobs=cfg.sweep.jobs,
    )
    write_sweep_csv(out / "sweep.csv", res)
    summary = res.to_dict()
    errors = res.extra.get("oracle_errors", res.pairwise_diffs)
    summary["checks"] = {
        "errors_decreasing": _check(_decreasing(errors)),
        "weak_decreasing": _check(_decreasing(res.extra["weak_residuals_u"])),
    }
    return summary


def cmd_check_weak(cfg: RunConfig, out: Path) -> dict:
    res = refinement_study(
        cfg.scenario, levels=cfg.sweep.levels, test_functions=cfg.weak.test_functions(), jobs=cfg.sweep.jobs
    )
    ru, rm = res.extra["weak_residuals_u"], res.extra["weak_residuals_m"]
    return {
        "h": list(res.values),
        "dt": res.extra["dt"],
        "weak_residuals_u": ru,
        "weak_residuals_m": rm,
        "checks": {
            "displacement_decreasing": _check(_decreasing(ru)),
            "magnetization_decreasing": _check(_decreasing(rm) or max(abs(r) for r in rm) <= 1e-10),
        },
    }


def cmd_validate_kernel(cfg: RunConfig, out: Path) -> dict:
    s = cfg.scenario
    rep = make_kernel(s.kernel, s.epsilon).validate(s.T, samples=200)
    return {
        "integrable_on_0T": rep.integrable_on_0T,
        "sign_violations": [list(v) for v in rep.sign_violations],
        "sampled_range": list(rep.sampled_range),
        "checks": {"kernel": _check(rep.ok)},
    }


HANDLERS = {
    "simulate": cmd_simulate,
    "sweep-epsilon": cmd_sweep_epsilon,
    "sweep-delta": cmd_sweep_delta,
    "refine": cmd_refine,
    "validate-kernel": cmd_validate_kernel,
    "check-weak": cmd_check_weak,
}


def manifest(cfg: RunConfig) -> dict:
    """Config echo plus everything needed to reproduce the numbers."""
    return {
        "command": cfg.command,
        "config": config_to_dict(cfg),
        "resolved": {"dt": cfg.scenario.time_step()},
        "versions": {
            "magvisc": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def execute(cfg: RunConfig, out: Optional[Path] = None) -> int:
    """Run one configured command, write its artifacts, return the exit status."""
    out = Path(out if out is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    summary = HANDLERS[cfg.command](cfg, out)
    wall = time.perf_counter() - start
    passed = all(c["passed"] for c in summary["checks"].values())
    summary["command"] = cfg.command
    summary["passed"] = passed
    _write_json(out / "summary.json", summary)
    _write_json(out / "manifest.json", manifest(cfg))
    # kept out of the JSON files so identical configs give identical outputs
    (out / "wall_time.txt").write_text(f"{wall:.6f}\n")
    for name, c in summary["checks"].items():
        logger.info("%-24s %s", name, "PASS" if c["passed"] else "FAIL")
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magvisc", description="Magneto-viscoelastic memory simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--jobs", type=int, help="worker processes for sweeps")
        p.add_argument("--stride", type=int, help="write every n-th level to trajectory.csv")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration value (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = list(args.set)
    if args.jobs is not None:
        overrides.append(f"sweep.jobs={args.jobs}")
    if args.stride is not None:
        overrides.append(f"output.stride={args.stride}")
    if args.out is not None:
        overrides.append(f"output.dir={json.dumps(args.out)}")
    try:
        cfg = parse_config(args.config, overrides, command=args.command)
        return execute(cfg)
    except MagviscError as exc:
        print(f"magvisc: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
