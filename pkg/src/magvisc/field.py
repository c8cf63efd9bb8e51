"""Uniform grid on (0, 1), field containers and finite-difference operators."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SizeMismatch

logger = logging.getLogger(__name__)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class Grid:
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ValueError(f"n_cells must be an integer >= 4, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_nodes)


@dataclass
class FieldState:
    t: float
    u: np.ndarray
    v: np.ndarray
    m1: np.ndarray
    m2: np.ndarray

    @property
    def m(self) -> np.ndarray:
        return np.stack([self.m1, self.m2])


def _check(f, grid: Grid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != grid.n_nodes:
        raise SizeMismatch(f"expected {grid.n_nodes} nodes on the last axis, got {f.shape[-1]}")
    return f


def dxx(f, grid: Grid, bc: str = DIRICHLET) -> np.ndarray:
    """Second derivative by central differences.

    Dirichlet fields get zero at the two boundary nodes; Neumann fields use
    a mirrored ghost node, giving ``2 (f[1] - f[0]) / h**2`` at the left end.
    Works along the last axis.
    """
    f = _check(f, grid)
    h2 = grid.h**2
    out = np.zeros_like(f)
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / h2
    if bc == NEUMANN:
        out[..., 0] = 2.0 * (f[..., 1] - f[..., 0]) / h2
        out[..., -1] = 2.0 * (f[..., -2] - f[..., -1]) / h2
    elif bc != DIRICHLET:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return out


def dx_centered(f, grid: Grid) -> np.ndarray:
    """First derivative: central inside, one-sided second order at the ends."""
    f = _check(f, grid)
    h = grid.h
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * h)
    return out


def _trapezoid_weights(n: int, step: float) -> np.ndarray:
    w = np.full(n, step)
    w[0] = w[-1] = 0.5 * step
    return w


def integrate(f, grid: Grid) -> np.ndarray:
    """Trapezoid rule over Omega along the last axis."""
    f = _check(f, grid)
    return f @ _trapezoid_weights(grid.n_nodes, grid.h)


def l2_norm_sq(f, grid: Grid) -> np.ndarray:
    f = _check(f, grid)
    return integrate(f * f, grid)


def gradient_norm_sq(f, grid: Grid) -> np.ndarray:
    """``int |f_x|^2`` from cell differences (midpoint rule per cell)."""
    f = _check(f, grid)
    d = np.diff(f, axis=-1)
    return np.sum(d * d, axis=-1) / grid.h


def time_integrate(values, dt: float, axis: int = 0) -> np.ndarray:
    """Trapezoid rule in time over uniformly spaced levels."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if n < 2:
        return np.zeros(np.delete(values.shape, axis)) if values.ndim > 1 else 0.0
    w = _trapezoid_weights(n, dt)
    return np.tensordot(w, values, axes=([0], [axis]))


def cumulative_time_integral(values, dt: float) -> np.ndarray:
    """Running trapezoid integrals along axis 0, starting from zero."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    if values.shape[0] > 1:
        out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]), axis=0)
    return out


def qt_norm_sq(trajectory, grid: Grid, dt: float) -> float:
    """Space-time L2 norm squared of samples shaped (levels, nodes)."""
    return float(time_integrate(l2_norm_sq(trajectory, grid), dt))


def theta_smoothstep(x, theta_max: float) -> np.ndarray:
    """``theta_max * x**2 (3 - 2x)``: flat at both ends."""
    x = np.asarray(x, dtype=float)
    return theta_max * x**2 * (3.0 - 2.0 * x)


def profile_sine(x, amplitude: float = 1.0, mode: int = 1) -> np.ndarray:
    return amplitude * np.sin(mode * np.pi * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Forcing:
    """External force f(x, t) given by a closed-form tag or a sample table.

    ``kind`` is ``"zero"``, ``"sine"`` (``amplitude * sin(mode pi x) cos(omega t)``)
    or ``"table"`` (one row of node samples per time level).
    """

    kind: str = "zero"
    amplitude: float = 0.0
    mode: int = 1
    omega: float = 0.0
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("zero", "sine", "table"):
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        if self.kind == "table" and self.table is None:
            raise ValueError("table forcing needs samples")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "sine" and self.amplitude == 0.0)

    def sample(self, grid: Grid, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        shape = (times.size, grid.n_nodes)
        if self.kind == "zero":
            return np.zeros(shape)
        if self.kind == "sine":
            space = profile_sine(grid.nodes, self.amplitude, self.mode)
            return np.cos(self.omega * times)[:, None] * space[None, :]
        table = np.asarray(self.table, dtype=float)
        if table.shape != shape:
            raise SizeMismatch(f"forcing table has shape {table.shape}, run needs {shape}")
        return table.copy()


@dataclass(frozen=True)
class InitialData:
    """Initial velocity, magnetization angle and forcing on the grid nodes.

    The initial displacement is always zero; ``m0 = (cos theta, sin theta)``
    so that ``|m0| = 1`` holds exactly.
    """

    grid: Grid
    u1: np.ndarray
    theta: np.ndarray
    forcing: Forcing = Forcing()

    def __post_init__(self):
        u1 = _check(self.u1, self.grid).copy()
        theta = _check(self.theta, self.grid).copy()
        if u1[0] != 0.0 or u1[-1] != 0.0:
            logger.warning("u1 is nonzero on the boundary; boundary values are set to zero")
            u1[0] = u1[-1] = 0.0
        slope = dx_centered(theta, self.grid)
        # one-sided differences of compatible data are O(h^2), not zero
        tol = 10.0 * self.grid.h**2 * (1.0 + np.max(np.abs(theta)))
        if max(abs(slope[0]), abs(slope[-1])) > tol:
            logger.warning("m0 is not compatible with the Neumann condition (theta' != 0 at the boundary)")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "theta", theta)

    @property
    def m0(self) -> np.ndarray:
        return np.stack([np.cos(self.theta), np.sin(self.theta)])

    @classmethod
    def from_profiles(
        cls,
        grid: Grid,
        u1: str = "sine",
        u1_amplitude: float = 1.0,
        u1_mode: int = 1,
        theta: str = "smoothstep",
        theta_max: float = 1.0,
        forcing: Forcing = Forcing(),
    ) -> "InitialData":
        x = grid.nodes
        if u1 == "sine":
            u1_vals = profile_sine(x, u1_amplitude, u1_mode)
            u1_vals[-1] = 0.0
        elif u1 == "zero":
            u1_vals = np.zeros_like(x)
        else:
            raise ValueError(f"unknown u1 profile {u1!r}")
        if theta == "smoothstep":
            theta_vals = theta_smoothstep(x, theta_max)
        elif theta == "constant":
            theta_vals = np.full_like(x, theta_max)
        else:
            raise ValueError(f"unknown theta profile {theta!r}")
        return cls(grid, u1_vals, theta_vals, forcing)
