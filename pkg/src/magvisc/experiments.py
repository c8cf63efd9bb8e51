"""Parameter sweeps: eps -> 0, delta -> 0 and grid refinement.

A :class:`Scenario` is an immutable description of one run.  Sweeps vary one
field of it, run the variants (in worker processes when ``jobs > 1``) and fold
the results sequentially in the order of the parameter values, so the output
does not depend on scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .diagnostics import AprioriBounds, TestFunction, apriori_bounds, energy, weak_residual
from .dynamics import Mode, ModelParams, Trajectory, run
from .field import Forcing, Grid, InitialData, l2_norm_sq, qt_norm_sq
from .kernel import KernelSpec, make_kernel


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one run.

    ``dt=None`` picks ``cfl * h / sqrt(G_eps(0))`` rounded down to divide T.
    """

    kernel: KernelSpec
    lam: float = 0.0
    delta: float = 0.01
    epsilon: float = 0.0
    T: float = 1.0
    n_cells: int = 200
    dt: Optional[float] = None
    cfl: float = 0.5
    mode: Mode = Mode.REGULAR
    u1: str = "sine"
    u1_amplitude: float = 1.0
    u1_mode: int = 1
    theta: str = "smoothstep"
    theta_max: float = 1.0
    forcing: Forcing = Forcing()

    @property
    def grid(self) -> Grid:
        return Grid(self.n_cells)

    def time_step(self) -> float:
        if self.dt is not None:
            return float(self.dt)
        return ModelParams.dt_for(make_kernel(self.kernel, self.epsilon), self.grid, self.T, self.cfl)

    def initial_data(self) -> InitialData:
        return InitialData.from_profiles(
            self.grid,
            u1=self.u1,
            u1_amplitude=self.u1_amplitude,
            u1_mode=self.u1_mode,
            theta=self.theta,
            theta_max=self.theta_max,
            forcing=self.forcing,
        )

    def params(self) -> ModelParams:
        return ModelParams(
            self.lam, self.delta, make_kernel(self.kernel, self.epsilon), self.T, self.time_step(), self.grid
        )

    def simulate(self) -> Trajectory:
        return run(self.initial_data(), self.params(), Mode(self.mode))

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class SweepResult:
    """Per-value bounds and successive differences of one sweep.

    ``pairwise_diffs[i]`` compares value i with value i+1 in L2(Q) after
    restriction to the coarser of the two lattices.
    """

    parameter: str
    values: tuple[float, ...]
    bounds: tuple[AprioriBounds, ...]
    pairwise_diffs: tuple[float, ...]
    pairwise_diffs_m: tuple[float, ...]
    observed_orders: tuple[float, ...]
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly decreasing")
        if any(d < 0 for d in self.pairwise_diffs + self.pairwise_diffs_m):
            raise ValueError("differences must be nonnegative")

    def bound_ratios(self) -> dict[str, float]:
        return bound_ratios(self.bounds)

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "values": list(self.values),
            "bounds": [b.as_dict() for b in self.bounds],
            "pairwise_diffs": list(self.pairwise_diffs),
            "pairwise_diffs_m": list(self.pairwise_diffs_m),
            "observed_orders": list(self.observed_orders),
            "bound_ratios": self.bound_ratios(),
            **self.extra,
        }

    def long_rows(self) -> list[tuple[str, float, str, int, float]]:
        """(parameter, value, metric, level, number) rows for a long-format CSV."""
        rows = []
        for i, (v, b) in enumerate(zip(self.values, self.bounds)):
            for name, num in b.as_dict().items():
                rows.append((self.parameter, v, name, i, num))
            if i < len(self.pairwise_diffs):
                rows.append((self.parameter, v, "diff_u", i, self.pairwise_diffs[i]))
                rows.append((self.parameter, v, "diff_m", i, self.pairwise_diffs_m[i]))
            if i < len(self.observed_orders):
                rows.append((self.parameter, v, "order", i, self.observed_orders[i]))
        return rows


def bound_ratios(bounds: Sequence[AprioriBounds]) -> dict[str, float]:
    """max/min of every constant across runs; 1 when all are zero."""
    out = {}
    for name in ("C1", "C2", "C3", "C4", "C5"):
        vals = np.array([getattr(b, name) for b in bounds])
        hi, lo = float(vals.max()), float(vals.min())
        if hi == 0.0:
            out[name] = 1.0
        elif lo <= 0.0:
            out[name] = math.inf
        else:
            out[name] = hi / lo
    return out


def restrict(values, n_levels: int, n_nodes: int) -> np.ndarray:
    """Subsample (levels, nodes) samples onto a coarser nested lattice.

    The result is unchanged by a second application with the same target.
    """
    values = np.asarray(values)
    lv, nd = values.shape[-2], values.shape[-1]
    if (lv - 1) % (n_levels - 1) or (nd - 1) % (n_nodes - 1):
        raise ValueError(f"lattice {n_levels}x{n_nodes} is not nested in {lv}x{nd}")
    st, sx = (lv - 1) // (n_levels - 1), (nd - 1) // (n_nodes - 1)
    return values[..., ::st, ::sx]


def _l2q_diff(a: Trajectory, b: Trajectory, attr: str) -> float:
    """L2(Q) distance on the coarser lattice of the two runs."""
    if a.n_levels > b.n_levels or a.grid.n_nodes > b.grid.n_nodes:
        a, b = b, a
    grid, dt = a.grid, a.params.dt
    if attr == "m":
        fa, fb = a.m, restrict(b.m, a.n_levels, grid.n_nodes)
        diff = fa - fb
        return math.sqrt(qt_norm_sq(diff[0], grid, dt) + qt_norm_sq(diff[1], grid, dt))
    fa, fb = getattr(a, attr), restrict(getattr(b, attr), a.n_levels, grid.n_nodes)
    return math.sqrt(qt_norm_sq(fa - fb, grid, dt))


def _simulate(scenario: Scenario) -> Trajectory:
    return scenario.simulate()


def run_many(scenarios: Sequence[Scenario], jobs: int = 1) -> list[Trajectory]:
    """Simulate in order; with ``jobs > 1`` the runs go to worker processes."""
    scenarios = list(scenarios)
    if jobs <= 1 or len(scenarios) < 2:
        return [_simulate(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=min(jobs, len(scenarios))) as pool:
        return list(pool.map(_simulate, scenarios))


def _orders(diffs: Sequence[float], values: Sequence[float]) -> tuple[float, ...]:
    """Slopes ``log(d_i / d_{i+1}) / log(v_i / v_{i+1})``; NaN where undefined."""
    out = []
    for i in range(len(diffs) - 1):
        d0, d1 = diffs[i], diffs[i + 1]
        v0, v1 = values[i], values[i + 1]
        if d0 > 0 and d1 > 0 and v0 > 0 and v1 > 0:
            out.append(math.log(d0 / d1) / math.log(v0 / v1))
        else:
            out.append(math.nan)
    return tuple(out)


def _check_descending(values: Sequence[float], name: str, positive: bool = True) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if len(values) < 2:
        raise ValueError(f"{name} sweep needs at least two values")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} values must be strictly decreasing")
    if positive and values[-1] <= 0:
        raise ValueError(f"{name} values must be positive")
    return values


def epsilon_sweep(
    base: Scenario,
    values: Sequence[float] = (0.2, 0.1, 0.05, 0.025, 0.0125),
    jobs: int = 1,
    compare_singular: bool = True,
) -> SweepResult:
    """Runs the shifted problem per eps on one grid and one time step.

    The time step is fixed by the smallest eps (the stiffest kernel) unless
    ``base.dt`` is set.  With ``compare_singular`` the smallest-eps run is
    also compared with the unshifted evolution form on the same lattice.
    """
    values = _check_descending(values, "epsilon")
    dt = base.dt if base.dt is not None else base.replace(epsilon=values[-1]).time_step()
    scen = [base.replace(epsilon=e, dt=dt, mode=Mode.REGULAR) for e in values]
    if compare_singular:
        scen.append(base.replace(epsilon=0.0, dt=dt, mode=Mode.SINGULAR))
    trajs = run_many(scen, jobs)
    runs = trajs[: len(values)]
    bounds = tuple(apriori_bounds(t) for t in runs)
    du = tuple(_l2q_diff(a, b, "u") for a, b in zip(runs, runs[1:]))
    dm = tuple(_l2q_diff(a, b, "m") for a, b in zip(runs, runs[1:]))
    extra = {
        "dt": dt,
        "cauchy_decreasing": all(b < a for a, b in zip(du, du[1:])),
    }
    if compare_singular:
        sing = trajs[-1]
        extra["singular_diff"] = _l2q_diff(runs[-1], sing, "u")
        extra["singular_diff_m"] = _l2q_diff(runs[-1], sing, "m")
        extra["singular_bounds"] = apriori_bounds(sing).as_dict()
        extra["singular_closer"] = extra["singular_diff"] < du[-1]
    return SweepResult("epsilon", values, bounds, du, dm, _orders(du, values), extra)


def penalty_norm(traj: Trajectory, level: int = -1) -> float:
    """``|| |m|^2 - 1 ||_{L2(Omega)}`` at one level."""
    eta = traj.m1[level] ** 2 + traj.m2[level] ** 2 - 1.0
    return math.sqrt(float(l2_norm_sq(eta, traj.grid)))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x; NaN if any y is zero."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(y <= 0) or np.any(x <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def delta_sweep(
    base: Scenario,
    values: Sequence[float] = (1e-1, 1e-2, 1e-3),
    jobs: int = 1,
    slope_window: tuple[float, float] = (0.3, 0.7),
) -> SweepResult:
    """Penalty saturation: ``|| |m|^2 - 1 ||(T)`` against ``sqrt(C5 delta)``."""
    values = _check_descending(values, "delta")
    dt = base.time_step()
    runs = run_many([base.replace(delta=d, dt=dt) for d in values], jobs)
    bounds = tuple(apriori_bounds(t) for t in runs)
    du = tuple(_l2q_diff(a, b, "u") for a, b in zip(runs, runs[1:]))
    dm = tuple(_l2q_diff(a, b, "m") for a, b in zip(runs, runs[1:]))
    norms = [penalty_norm(t) for t in runs]
    caps = [math.sqrt(b.C5 * d) for b, d in zip(bounds, values)]
    slope = loglog_slope(values, norms)
    extra = {
        "dt": dt,
        "penalty_norms": norms,
        "penalty_caps": caps,
        "penalty_within_cap": all(n <= c * (1 + 1e-12) for n, c in zip(norms, caps)),
        "slope": slope,
        "slope_ok": bool(slope_window[0] <= slope <= slope_window[1]),
    }
    return SweepResult("delta", values, bounds, du, dm, _orders(du, values), extra)


def refinement_study(
    base: Scenario,
    levels: int = 3,
    oracle: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    test_functions: Optional[tuple[TestFunction, tuple[TestFunction, TestFunction]]] = None,
    jobs: int = 1,
) -> SweepResult:
    """Runs at (N, dt), (2N, dt/2), ... and reports observed orders.

    With an ``oracle(x, t)`` for u the errors are max-norm distances to it on
    each run's own lattice; otherwise successive L2(Q) differences are used.
    """
    if levels < 2:
        raise ValueError("refinement needs at least two levels")
    dt0 = base.time_step()
    scen = [base.replace(n_cells=base.n_cells * 2**j, dt=dt0 / 2**j) for j in range(levels)]
    runs = run_many(scen, jobs)
    hs = tuple(1.0 / s.n_cells for s in scen)
    bounds = tuple(apriori_bounds(t) for t in runs)
    du = tuple(_l2q_diff(a, b, "u") for a, b in zip(runs, runs[1:]))
    dm = tuple(_l2q_diff(a, b, "m") for a, b in zip(runs, runs[1:]))
    extra: dict = {"dt": [s.time_step() for s in scen]}
    if oracle is not None:
        errors = []
        for t in runs:
            X, Tt = np.meshgrid(t.grid.nodes, t.t)
            errors.append(float(np.max(np.abs(t.u - oracle(X, Tt)))))
        extra["oracle_errors"] = errors
        orders = _orders(errors, hs)
    else:
        orders = _orders(du, hs)
    if test_functions is not None:
        phi, psi = test_functions
        res = [weak_residual(t, phi, psi) for t in runs]
        extra["weak_residuals_u"] = [r[0] for r in res]
        extra["weak_residuals_m"] = [r[1] for r in res]
        extra["weak_orders_u"] = list(_orders([abs(r[0]) for r in res], hs))
    return SweepResult("h", hs, bounds, du, dm, orders, extra)
