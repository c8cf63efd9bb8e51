"""Time integration of the coupled displacement / magnetization system.

Three formulations are available through :func:`run`:

``Mode.REGULAR``
    Second-order form with a shifted (regular) kernel::

        u_tt - G_eps(0) u_xx - int_0^t Gdot_eps(t - tau) u_xx(tau) dtau
             - (lam/2) (Lambda(m).m)_x = f

    stepped with velocity Verlet (leapfrog in u).  Explicit, so the time step
    must satisfy ``dt <= h / sqrt(G_eps(0))``.

``Mode.SINGULAR``
    First-order evolution form that tolerates an unbounded kernel::

        u_t = u1 + int_0^t G(t - tau) u_xx dtau
                 + int_0^t (lam/2) (Lambda(m).m)_x dtau + int_0^t f dtau

    The weight of the newest level is treated implicitly (one tridiagonal
    solve per step); older levels come from the stored history.

``Mode.VISCOELASTIC``
    The regular displacement equation alone with a prescribed right-hand
    side F; the magnetization is frozen at m0.

The magnetization equation ``m_t + m (|m|^2 - 1)/delta + lam Lambda(m) u_x = m_xx``
is advanced by backward Euler in the diffusion and an explicit coupling term.
The penalty ``(|m|^4/4 - |m|^2/2)/delta`` is split into its convex quartic
part, linearized as ``|m_old|^2 m_new / delta``, and its concave quadratic part,
taken explicitly.  The system matrix stays diagonally dominant for every dt,
and the discrete energy decreases whenever |m| <= 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import CflViolation, SingularDerivative, SizeMismatch, SolverFailure
from .field import NEUMANN, FieldState, Forcing, Grid, InitialData, dx_centered, dxx
from .kernel import RelaxationKernel
from .memory import ConvolutionPlan, History, build_plan, convolve_dotG, convolve_known


class Mode(str, enum.Enum):
    REGULAR = "regular"
    SINGULAR = "singular"
    VISCOELASTIC = "viscoelastic"


@dataclass(frozen=True)
class ModelParams:
    lam: float
    delta: float
    kernel: RelaxationKernel
    T: float
    dt: float
    grid: Grid
    cfl_max: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not (self.T > 0 and self.dt > 0):
            raise ValueError("T and dt must be positive")
        if not 0 < self.cfl_max <= 1:
            raise ValueError("cfl_max must lie in (0, 1]")
        n = round(self.T / self.dt)
        if n < 1 or abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T = {self.T} is not an integer multiple of dt = {self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def cfl_bound(self) -> float:
        """Largest dt allowed for the explicit regular scheme."""
        if self.kernel.is_singular:
            return 0.0
        return self.cfl_max * self.grid.h / math.sqrt(self.kernel.eval(0.0))

    @staticmethod
    def dt_for(kernel: RelaxationKernel, grid: Grid, T: float, cfl: float) -> float:
        """Time step ``cfl * h / sqrt(G_eps(0))`` rounded down to divide T.

        For a singular kernel the modulus factor is dropped.
        """
        g0 = math.inf if kernel.is_singular else kernel.eval(0.0)
        dt = cfl * grid.h / (math.sqrt(g0) if math.isfinite(g0) else 1.0)
        n = math.ceil(T / dt * (1 - 1e-12))
        return T / n


def lambda_op(m) -> np.ndarray:
    """``Lambda(m) = (m2, m1)`` for m shaped (2, ...)."""
    m = np.asarray(m, dtype=float)
    return np.stack([m[1], m[0]])


def lambda_dot(m) -> np.ndarray:
    """``Lambda(m) . m = 2 m1 m2``."""
    m = np.asarray(m, dtype=float)
    return 2.0 * m[0] * m[1]


def magnetic_flux(m1, m2, lam: float, grid: Grid) -> np.ndarray:
    """``(lam/2) (Lambda(m).m)_x``."""
    return 0.5 * lam * dx_centered(2.0 * m1 * m2, grid)


def step_magnetization(m1, m2, u, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Advance m by one step, with the displacement u held at its old value."""
    grid = params.grid
    dt, h2 = params.dt, grid.h**2
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    n = grid.n_nodes
    if m1.shape != (n,) or m2.shape != (n,) or np.shape(u) != (n,):
        raise SizeMismatch("magnetization step needs node profiles")
    # convex part |m|^4/4 linearized implicitly, concave part -|m|^2/2 explicit
    implicit = (m1 * m1 + m2 * m2) / params.delta
    ux = dx_centered(u, grid)
    rhs = np.empty((n, 2))
    rhs[:, 0] = m1 / dt + m1 / params.delta - params.lam * m2 * ux
    rhs[:, 1] = m2 / dt + m2 / params.delta - params.lam * m1 * ux
    ab = np.empty((3, n))
    ab[1] = 1.0 / dt + implicit + 2.0 / h2
    ab[0, 1:] = -1.0 / h2
    ab[2, :-1] = -1.0 / h2
    ab[0, 0] = 0.0
    ab[2, -1] = 0.0
    ab[0, 1] = -2.0 / h2  # mirrored ghost node on the left
    ab[2, -2] = -2.0 / h2  # and on the right
    if not np.all(np.isfinite(ab)) or not np.all(np.isfinite(rhs)):
        raise SolverFailure("non-finite entries in the magnetization system")
    try:
        sol = solve_banded((1, 1), ab, rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - diagonally dominant
        raise SolverFailure(str(exc)) from exc
    return sol[:, 0].copy(), sol[:, 1].copy()


@dataclass
class Trajectory:
    """All time levels of a run, stored as (levels, nodes) arrays."""

    params: ModelParams
    mode: Mode
    initial: InitialData
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    forcing: np.ndarray
    history: History = field(repr=False)

    @property
    def grid(self) -> Grid:
        return self.params.grid

    @property
    def n_levels(self) -> int:
        return self.t.size

    def state(self, n: int) -> FieldState:
        return FieldState(float(self.t[n]), self.u[n], self.v[n], self.m1[n], self.m2[n])

    @property
    def states(self) -> list[FieldState]:
        return [self.state(n) for n in range(self.n_levels)]

    @property
    def m(self) -> np.ndarray:
        """Magnetization shaped (2, levels, nodes)."""
        return np.stack([self.m1, self.m2])


class _Stepper:
    def __init__(self, params: ModelParams, initial: InitialData, forcing: Optional[Forcing] = None):
        if initial.grid != params.grid:
            raise SizeMismatch("initial data and parameters use different grids")
        self.params = params
        self.grid = params.grid
        self.initial = initial
        self.forcing = (forcing or initial.forcing).sample(self.grid, params.times)
        n_nodes = self.grid.n_nodes
        self.n = 0
        self.u = np.zeros(n_nodes)
        self.v = initial.u1.copy()
        m0 = initial.m0
        self.m1, self.m2 = m0[0].copy(), m0[1].copy()
        self.history = History(params.dt, n_nodes, capacity=params.n_steps + 1)
        self.history.append(np.zeros(n_nodes))

    @property
    def t(self) -> float:
        return self.n * self.params.dt

    @property
    def state(self) -> FieldState:
        return FieldState(self.t, self.u.copy(), self.v.copy(), self.m1.copy(), self.m2.copy())

    def _flux(self, m1, m2) -> np.ndarray:
        return magnetic_flux(m1, m2, self.params.lam, self.grid)


class RegularStepper(_Stepper):
    """Velocity Verlet for the shifted-kernel problem (or the viscoelastic subproblem)."""

    def __init__(self, params, initial, coupled: bool = True, forcing: Optional[Forcing] = None):
        super().__init__(params, initial, forcing)
        kernel = params.kernel
        if kernel.is_singular:
            raise SingularDerivative("the regular form needs a kernel finite at zero (epsilon_shift > 0)")
        if params.dt > params.cfl_bound() * (1 + 1e-12):
            raise CflViolation(f"dt = {params.dt:.6g} exceeds the CFL bound {params.cfl_bound():.6g}")
        self.coupled = coupled
        self.g0 = kernel.eval(0.0)
        self.plan: ConvolutionPlan = build_plan(kernel, params.dt, max(params.n_steps, 1), derivative=True)
        self.a = self._accel()

    def _accel(self) -> np.ndarray:
        y = self.history.levels[self.n]
        a = self.g0 * y + convolve_dotG(self.history, self.plan, self.n) + self.forcing[self.n]
        if self.coupled:
            a = a + self._flux(self.m1, self.m2)
        a[0] = a[-1] = 0.0
        return a

    def step(self) -> FieldState:
        dt = self.params.dt
        u_new = self.u + dt * self.v + 0.5 * dt * dt * self.a
        u_new[0] = u_new[-1] = 0.0
        if self.coupled:
            self.m1, self.m2 = step_magnetization(self.m1, self.m2, self.u, self.params)
        self.u = u_new
        self.n += 1
        self.history.append(dxx(u_new, self.grid))
        a_new = self._accel()
        self.v = self.v + 0.5 * dt * (self.a + a_new)
        self.v[0] = self.v[-1] = 0.0
        self.a = a_new
        return self.state


class SingularStepper(_Stepper):
    """Evolution form with product-integrated memory; handles singular kernels."""

    def __init__(self, params, initial, forcing: Optional[Forcing] = None):
        super().__init__(params, initial, forcing)
        dt, h2 = params.dt, self.grid.h**2
        self.plan = build_plan(params.kernel, dt, max(params.n_steps, 1))
        self.w_head = self.plan.head_weight
        interior = self.grid.n_nodes - 2
        c = 0.5 * dt * self.w_head / h2
        self.ab = np.empty((3, interior))
        self.ab[0] = -c
        self.ab[1] = 1.0 + 2.0 * c
        self.ab[2] = -c
        self.flux_int = np.zeros(self.grid.n_nodes)
        self.force_int = np.zeros(self.grid.n_nodes)
        self.flux_prev = self._flux(self.m1, self.m2)

    def step(self) -> FieldState:
        dt = self.params.dt
        n = self.n
        self.m1, self.m2 = step_magnetization(self.m1, self.m2, self.u, self.params)
        flux_new = self._flux(self.m1, self.m2)
        self.flux_int = self.flux_int + 0.5 * dt * (self.flux_prev + flux_new)
        self.force_int = self.force_int + 0.5 * dt * (self.forcing[n] + self.forcing[n + 1])
        self.flux_prev = flux_new
        known = convolve_known(self.history, self.plan, n + 1)
        r = self.initial.u1 + known + self.flux_int + self.force_int
        rhs = self.u + 0.5 * dt * (self.v + r)
        u_new = np.zeros_like(self.u)
        u_new[1:-1] = solve_banded((1, 1), self.ab, rhs[1:-1], check_finite=False)
        y_new = dxx(u_new, self.grid)
        self.history.append(y_new)
        v_new = r + self.w_head * y_new
        v_new[0] = v_new[-1] = 0.0
        self.u, self.v = u_new, v_new
        self.n = n + 1
        return self.state


Hook = Callable[[FieldState, int], None]


def make_stepper(initial: InitialData, params: ModelParams, mode: Mode, forcing: Optional[Forcing] = None):
    mode = Mode(mode)
    if mode is Mode.SINGULAR:
        return SingularStepper(params, initial, forcing)
    return RegularStepper(params, initial, coupled=mode is Mode.REGULAR, forcing=forcing)


def run(
    initial: InitialData,
    params: ModelParams,
    mode: Mode = Mode.REGULAR,
    forcing: Optional[Forcing] = None,
    hooks: Iterable[Hook] = (),
) -> Trajectory:
    """Integrate from t = 0 to params.T and return every level.

    ``forcing`` overrides ``initial.forcing``; for ``Mode.VISCOELASTIC`` it is
    the prescribed right-hand side F.
    """
    mode = Mode(mode)
    stepper = make_stepper(initial, params, mode, forcing)
    hooks = list(hooks)
    nt = params.n_steps + 1
    nn = params.grid.n_nodes
    u, v, m1, m2 = (np.empty((nt, nn)) for _ in range(4))

    def record(n):
        u[n], v[n], m1[n], m2[n] = stepper.u, stepper.v, stepper.m1, stepper.m2
        if hooks:
            state = stepper.state
            for hook in hooks:
                hook(state, n)

    record(0)
    for n in range(1, nt):
        stepper.step()
        record(n)
    return Trajectory(
        params=params,
        mode=mode,
        initial=initial,
        t=params.times,
        u=u,
        v=v,
        m1=m1,
        m2=m2,
        forcing=stepper.forcing,
        history=stepper.history,
    )


def step_coupled_eps(stepper: RegularStepper) -> FieldState:
    """One regular-form step; the stepper carries state, history and plan."""
    return stepper.step()


def step_evolution_singular(stepper: SingularStepper) -> FieldState:
    """One evolution-form step; the stepper carries state, history and plan."""
    return stepper.step()
