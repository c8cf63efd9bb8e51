"""TOML run configuration: parsing, validation and serialization.

Layout (every section and key is optional)::

    [kernel]       family = "fractional" | "prony" | "constant"
                   alpha, scale | terms = [[c, r], ...] | value
    [model]        lambda, delta, epsilon, T, mode
    [grid]         N, cfl, dt
    [initial]      u1, u1_amplitude, u1_mode, theta, theta_max
    [forcing]      kind, amplitude, mode, omega
    [output]       dir, stride
    [diagnostics]  lemma21, lemma22, gronwall, tol_k
    [sweep]        epsilons, deltas, levels, jobs
    [weak]         phi, phi_k, psi1, psi2, psi_k

The initial displacement is zero by model assumption; a ``u0`` key anywhere is
rejected.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Sequence

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .diagnostics import LEMMA_TOL_K, TestFunction
from .dynamics import Mode
from .errors import InvalidSpec, ParseError, ValidationError
from .experiments import Scenario
from .field import Forcing, Grid
from .kernel import Constant, Fractional, KernelSpec, PronySeries, make_kernel

COMMANDS = ("simulate", "sweep-epsilon", "sweep-delta", "refine", "validate-kernel", "check-weak")


@dataclass(frozen=True)
class OutputOptions:
    dir: str = "out"
    stride: int = 10


@dataclass(frozen=True)
class DiagnosticOptions:
    lemma21: bool = True
    lemma22: bool = True
    gronwall: bool = True
    tol_k: float = LEMMA_TOL_K


@dataclass(frozen=True)
class SweepOptions:
    epsilons: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025, 0.0125)
    deltas: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    levels: int = 3
    jobs: int = 1


@dataclass(frozen=True)
class WeakOptions:
    phi: str = "sin_decay"
    phi_k: int = 1
    psi1: str = "sin_decay"
    psi2: str = "zero"
    psi_k: int = 1

    def test_functions(self) -> tuple[TestFunction, tuple[TestFunction, TestFunction]]:
        return (
            TestFunction(self.phi, self.phi_k),
            (TestFunction(self.psi1, self.psi_k), TestFunction(self.psi2, self.psi_k)),
        )


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    command: str = "simulate"
    output: OutputOptions = OutputOptions()
    diagnostics: DiagnosticOptions = DiagnosticOptions()
    sweep: SweepOptions = SweepOptions()
    weak: WeakOptions = WeakOptions()


_SECTIONS = {
    "run": {"command"},
    "kernel": {"family", "alpha", "scale", "terms", "value"},
    "model": {"lambda", "delta", "epsilon", "T", "mode"},
    "grid": {"N", "cfl", "dt"},
    "initial": {"u1", "u1_amplitude", "u1_mode", "theta", "theta_max"},
    "forcing": {"kind", "amplitude", "mode", "omega"},
    "output": {"dir", "stride"},
    "diagnostics": {"lemma21", "lemma22", "gronwall", "tol_k"},
    "sweep": {"epsilons", "deltas", "levels", "jobs"},
    "weak": {"phi", "phi_k", "psi1", "psi2", "psi_k"},
}


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, "must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(name, "must be finite")
    return value


def _integer(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(name, "must be an integer")
    return int(value)


def _flag(value, name: str) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(name, "must be true or false")
    return value


def _text(value, name: str, choices: Sequence[str]) -> str:
    if value not in choices:
        raise ValidationError(name, f"must be one of {', '.join(choices)}")
    return value


def _kernel(sec: dict) -> KernelSpec:
    family = _text(sec.get("family", "constant"), "family", ("fractional", "prony", "constant"))
    if family == "fractional":
        alpha = _number(sec.get("alpha", 0.5), "alpha")
        scale = _number(sec.get("scale", 1.0), "scale")
        if not 0.0 < alpha < 1.0:
            raise ValidationError("alpha", "must lie in (0,1)")
        if not scale > 0:
            raise ValidationError("scale", "must be positive")
        return Fractional(alpha, scale)
    if family == "prony":
        raw = sec.get("terms", [[1.0, 1.0]])
        try:
            terms = tuple((_number(c, "terms"), _number(r, "terms")) for c, r in raw)
        except (TypeError, ValueError):
            raise ValidationError("terms", "must be a list of [coefficient, rate] pairs") from None
        try:
            return PronySeries(terms)
        except InvalidSpec as exc:
            raise ValidationError("terms", str(exc)) from None
    value = _number(sec.get("value", 1.0), "value")
    if not value > 0:
        raise ValidationError("value", "must be positive")
    return Constant(value)


def config_from_dict(data: dict[str, Any], command: Optional[str] = None) -> RunConfig:
    """Validate a parsed TOML document and build a :class:`RunConfig`."""
    _reject_u0(data)
    for name, sec in data.items():
        if name not in _SECTIONS:
            raise ValidationError(name, "unknown section")
        if not isinstance(sec, dict):
            raise ValidationError(name, "must be a table")
        for key in sec:
            if key not in _SECTIONS[name]:
                raise ValidationError(f"{name}.{key}", "unknown key")
    get = lambda s: data.get(s, {})  # noqa: E731

    command = command or get("run").get("command", "simulate")
    _text(command, "command", COMMANDS)
    kernel = _kernel(get("kernel"))

    model = get("model")
    lam = _number(model.get("lambda", 0.0), "lambda")
    delta = _number(model.get("delta", 0.01), "delta")
    eps = _number(model.get("epsilon", 0.0), "epsilon")
    T = _number(model.get("T", 1.0), "T")
    if lam < 0:
        raise ValidationError("lambda", "must be >= 0")
    if not 0 < delta < 1:
        raise ValidationError("delta", "must lie in (0,1)")
    if eps < 0:
        raise ValidationError("epsilon", "must be >= 0")
    if not T > 0:
        raise ValidationError("T", "must be positive")
    singular = make_kernel(kernel, eps).is_singular
    default_mode = Mode.SINGULAR if singular else Mode.REGULAR
    mode = Mode(_text(model.get("mode", default_mode.value), "mode", [m.value for m in Mode]))
    if mode is not Mode.SINGULAR and singular:
        raise ValidationError("epsilon", "must be > 0 for the second-order form with a singular kernel")

    grid = get("grid")
    N = _integer(grid.get("N", 200), "N")
    if N < 4:
        raise ValidationError("N", "must be >= 4")
    cfl = _number(grid.get("cfl", 0.5), "cfl")
    if not 0 < cfl <= 1:
        raise ValidationError("cfl", "must lie in (0,1]")
    dt = grid.get("dt")
    if dt is not None:
        dt = _number(dt, "dt")
        if not dt > 0:
            raise ValidationError("dt", "must be positive")
        n = round(T / dt)
        if n < 1 or abs(n * dt - T) > 1e-9 * T:
            raise ValidationError("dt", "must divide T")
        if mode is not Mode.SINGULAR:
            g0 = make_kernel(kernel, eps).eval(0.0)
            if dt > Grid(N).h / math.sqrt(g0) * (1 + 1e-12):
                raise ValidationError("dt", "violates the CFL bound h / sqrt(G_eps(0))")

    init = get("initial")
    u1 = _text(init.get("u1", "sine"), "u1", ("sine", "zero"))
    theta = _text(init.get("theta", "smoothstep"), "theta", ("smoothstep", "constant"))
    u1_mode = _integer(init.get("u1_mode", 1), "u1_mode")
    if u1_mode < 1:
        raise ValidationError("u1_mode", "must be >= 1")

    frc = get("forcing")
    kind = _text(frc.get("kind", "zero"), "forcing.kind", ("zero", "sine"))
    forcing = Forcing(
        kind,
        _number(frc.get("amplitude", 0.0), "forcing.amplitude"),
        _integer(frc.get("mode", 1), "forcing.mode"),
        _number(frc.get("omega", 0.0), "forcing.omega"),
    )

    scenario = Scenario(
        kernel=kernel,
        lam=lam,
        delta=delta,
        epsilon=eps,
        T=T,
        n_cells=N,
        dt=dt,
        cfl=cfl,
        mode=mode,
        u1=u1,
        u1_amplitude=_number(init.get("u1_amplitude", 1.0), "u1_amplitude"),
        u1_mode=u1_mode,
        theta=theta,
        theta_max=_number(init.get("theta_max", 1.0), "theta_max"),
        forcing=forcing,
    )

    out = get("output")
    stride = _integer(out.get("stride", 10), "stride")
    if stride < 1:
        raise ValidationError("stride", "must be >= 1")
    output = OutputOptions(str(out.get("dir", "out")), stride)

    diag = get("diagnostics")
    tol_k = _number(diag.get("tol_k", LEMMA_TOL_K), "tol_k")
    if not tol_k > 0:
        raise ValidationError("tol_k", "must be positive")
    diagnostics = DiagnosticOptions(
        _flag(diag.get("lemma21", True), "lemma21"),
        _flag(diag.get("lemma22", True), "lemma22"),
        _flag(diag.get("gronwall", True), "gronwall"),
        tol_k,
    )

    sw = get("sweep")
    eps_values = tuple(_number(v, "epsilons") for v in sw.get("epsilons", SweepOptions.epsilons))
    delta_values = tuple(_number(v, "deltas") for v in sw.get("deltas", SweepOptions.deltas))
    for name, vals in (("epsilons", eps_values), ("deltas", delta_values)):
        if len(vals) < 2 or any(b >= a for a, b in zip(vals, vals[1:])) or vals[-1] <= 0:
            raise ValidationError(name, "must be at least two positive, strictly decreasing values")
    if any(d >= 1 for d in delta_values):
        raise ValidationError("deltas", "must lie in (0,1)")
    levels = _integer(sw.get("levels", 3), "levels")
    jobs = _integer(sw.get("jobs", 1), "jobs")
    if levels < 2:
        raise ValidationError("levels", "must be >= 2")
    if jobs < 1:
        raise ValidationError("jobs", "must be >= 1")
    sweep = SweepOptions(eps_values, delta_values, levels, jobs)

    wk = get("weak")
    kinds = ("sin_decay", "cos_decay", "bump", "sin", "zero")
    weak = WeakOptions(
        _text(wk.get("phi", "sin_decay"), "phi", kinds),
        _integer(wk.get("phi_k", 1), "phi_k"),
        _text(wk.get("psi1", "sin_decay"), "psi1", kinds),
        _text(wk.get("psi2", "zero"), "psi2", kinds),
        _integer(wk.get("psi_k", 1), "psi_k"),
    )
    return RunConfig(scenario, command, output, diagnostics, sweep, weak)


def _reject_u0(data) -> None:
    if isinstance(data, dict):
        if "u0" in data:
            raise ValidationError("u0", "fixed to zero by model assumption")
        for value in data.values():
            _reject_u0(value)


def _parse_value(text: str):
    """A TOML scalar or array; bare words fall back to strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply ``section.key=value`` strings to a parsed document in place."""
    for item in overrides:
        path, sep, raw = item.partition("=")
        section, dot, key = path.strip().partition(".")
        if not sep or not dot or not key:
            raise ParseError(f"override {item!r} is not of the form section.key=value")
        data.setdefault(section, {})[key] = _parse_value(raw.strip())
    return data


def parse_config(path=None, overrides: Sequence[str] = (), command: Optional[str] = None) -> RunConfig:
    """Read a TOML file (or start from defaults when ``path`` is None)."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ParseError(f"config file {path} does not exist") from None
        except tomllib.TOMLDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    apply_overrides(data, overrides)
    return config_from_dict(data, command)


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    s = cfg.scenario
    spec = s.kernel
    if isinstance(spec, Fractional):
        kernel = {"family": "fractional", "alpha": spec.alpha, "scale": spec.scale}
    elif isinstance(spec, PronySeries):
        kernel = {"family": "prony", "terms": [list(t) for t in spec.terms]}
    else:
        kernel = {"family": "constant", "value": spec.value}
    grid: dict[str, Any] = {"N": s.n_cells, "cfl": s.cfl}
    if s.dt is not None:
        grid["dt"] = s.dt
    if s.forcing.kind == "table":
        raise ValidationError("forcing", "tabulated forcing cannot be written to a config file")
    as_dict = lambda obj: {f.name: getattr(obj, f.name) for f in fields(obj)}  # noqa: E731
    sweep = as_dict(cfg.sweep)
    sweep["epsilons"] = list(sweep["epsilons"])
    sweep["deltas"] = list(sweep["deltas"])
    return {
        "run": {"command": cfg.command},
        "kernel": kernel,
        "model": {"lambda": s.lam, "delta": s.delta, "epsilon": s.epsilon, "T": s.T, "mode": Mode(s.mode).value},
        "grid": grid,
        "initial": {
            "u1": s.u1,
            "u1_amplitude": s.u1_amplitude,
            "u1_mode": s.u1_mode,
            "theta": s.theta,
            "theta_max": s.theta_max,
        },
        "forcing": {
            "kind": s.forcing.kind,
            "amplitude": s.forcing.amplitude,
            "mode": s.forcing.mode,
            "omega": s.forcing.omega,
        },
        "output": as_dict(cfg.output),
        "diagnostics": as_dict(cfg.diagnostics),
        "sweep": sweep,
        "weak": as_dict(cfg.weak),
    }


def serialize(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def write_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(serialize(cfg))
