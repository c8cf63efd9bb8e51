"""History storage and product-integration memory convolutions.

The stored profile y(tau) (normally u_xx) is reconstructed piecewise linearly
between time levels and integrated exactly against the kernel on every lag
interval ``[k dt, (k+1) dt]``.  With ``s = t_n - tau`` the contribution of lag
interval k is::

    y[n-k] * M0_k + (y[n-k-1] - y[n-k]) * M1_k / dt

where M0_k, M1_k are the zeroth and first moments of the kernel (or of its
derivative) on that interval.  The singular head interval is never sampled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PlanMismatch, SingularDerivative
from .kernel import RelaxationKernel


class History:
    """Append-only store of node profiles at t_k = k * dt."""

    def __init__(self, dt: float, n_nodes: int, capacity: int = 16):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.dt = float(dt)
        self.n_nodes = int(n_nodes)
        self._data = np.zeros((max(int(capacity), 1), self.n_nodes))
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def append(self, profile) -> None:
        profile = np.asarray(profile, dtype=float)
        if profile.shape != (self.n_nodes,):
            raise PlanMismatch(f"profile has shape {profile.shape}, history stores {self.n_nodes} nodes")
        if self._count == self._data.shape[0]:
            grown = np.zeros((2 * self._data.shape[0], self.n_nodes))
            grown[: self._count] = self._data[: self._count]
            self._data = grown
        self._data[self._count] = profile
        self._count += 1

    @property
    def levels(self) -> np.ndarray:
        """Read-only view of the stored profiles, shape (levels, nodes)."""
        view = self._data[: self._count]
        view.flags.writeable = False
        return view

    @classmethod
    def from_array(cls, dt: float, values) -> "History":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        hist = cls(dt, values.shape[1], capacity=values.shape[0])
        hist._data[:] = values
        hist._count = values.shape[0]
        return hist


@dataclass(frozen=True)
class ConvolutionPlan:
    """Precomputed lag-interval moments for one kernel and time step.

    With ``derivative=True`` the moments are those of the kernel derivative.
    For a singular kernel the head moment ``m0[0]`` of the derivative is
    infinite and is stored as NaN; only the history-difference form can use
    such a plan.
    """

    kernel: RelaxationKernel
    dt: float
    n_max: int
    derivative: bool
    m0: np.ndarray
    m1: np.ndarray

    @property
    def singular_head(self) -> bool:
        return bool(np.isnan(self.m0[0]))

    @property
    def lead_weights(self) -> np.ndarray:
        """Weight of y[n-k] from lag interval k."""
        return self.m0 - self.m1 / self.dt

    @property
    def tail_weights(self) -> np.ndarray:
        """Weight of y[n-k-1] from lag interval k."""
        return self.m1 / self.dt

    @property
    def head_weight(self) -> float:
        """Total weight multiplying the newest level y[n]."""
        return float(self.lead_weights[0])


def build_plan(kernel: RelaxationKernel, dt: float, n_max: int, derivative: bool = False) -> ConvolutionPlan:
    """Moments on the lag intervals ``[k dt, (k+1) dt]`` for k < n_max."""
    if not dt > 0 or n_max < 1:
        raise ValueError("build_plan needs dt > 0 and n_max >= 1")
    k = np.arange(n_max, dtype=float)
    a, b = k * dt, (k + 1.0) * dt
    if not derivative:
        m0, m1 = kernel.moment0(a, b), kernel.moment1(a, b)
    elif kernel.is_singular:
        m0 = np.full(n_max, np.nan)
        if n_max > 1:
            m0[1:] = kernel.dot_moment0(a[1:], b[1:])
        m1 = kernel.dot_moment1(a, b)
    else:
        m0, m1 = kernel.dot_moment0(a, b), kernel.dot_moment1(a, b)
    m0 = np.atleast_1d(np.asarray(m0, dtype=float))
    m1 = np.atleast_1d(np.asarray(m1, dtype=float))
    return ConvolutionPlan(kernel, float(dt), int(n_max), bool(derivative), m0, m1)


def _check_plan(history: History, plan: ConvolutionPlan, n: int) -> None:
    if not np.isclose(history.dt, plan.dt, rtol=1e-12, atol=0.0):
        raise PlanMismatch(f"history dt {history.dt} != plan dt {plan.dt}")
    if n > plan.n_max:
        raise PlanMismatch(f"plan covers {plan.n_max} lag intervals, level {n} requested")
    if n < 0:
        raise PlanMismatch("negative level")


def _level_weights(plan: ConvolutionPlan, n: int) -> np.ndarray:
    """Weights w_j with ``int_0^{t_n} K(t_n - tau) y(tau) dtau = sum_j w_j y_j``."""
    w = np.zeros(n + 1)
    if n == 0:
        return w
    w[1:] += plan.lead_weights[:n][::-1]
    w[:n] += plan.tail_weights[:n][::-1]
    return w


def _levels_for(history: History, n: int) -> np.ndarray:
    if len(history) < n + 1:
        raise PlanMismatch(f"history holds {len(history)} levels, level {n} requested")
    return history.levels[: n + 1]


def convolve(history: History, plan: ConvolutionPlan, n: int) -> np.ndarray:
    _check_plan(history, plan, n)
    if plan.singular_head:
        raise SingularDerivative("plan has an infinite head moment")
    if n == 0:
        return np.zeros(history.n_nodes)
    return _level_weights(plan, n) @ _levels_for(history, n)


def convolve_known(history: History, plan: ConvolutionPlan, n: int) -> np.ndarray:
    """The convolution at level n without the contribution of y[n].

    Used by implicit steppers: the full value is this plus
    ``plan.head_weight * y[n]``.  Needs levels 0..n-1 only.
    """
    _check_plan(history, plan, n)
    if plan.singular_head:
        raise SingularDerivative("plan has an infinite head moment")
    if n == 0:
        return np.zeros(history.n_nodes)
    w = _level_weights(plan, n)[:-1]
    return w @ _levels_for(history, n - 1)


def convolve_G(history: History, plan: ConvolutionPlan, n: int) -> np.ndarray:
    """``int_0^{t_n} G(t_n - tau) y(tau) dtau`` at every node."""
    if plan.derivative:
        raise PlanMismatch("convolve_G needs a plan built from kernel values")
    return convolve(history, plan, n)


def convolve_dotG(history: History, plan: ConvolutionPlan, n: int) -> np.ndarray:
    """``int_0^{t_n} Gdot_eps(t_n - tau) y(tau) dtau`` at every node."""
    if not plan.derivative:
        raise PlanMismatch("convolve_dotG needs a plan built from kernel derivatives")
    if plan.kernel.is_singular:
        raise SingularDerivative("convolve_dotG needs epsilon_shift > 0 for a singular family")
    return convolve(history, plan, n)


def history_difference_form(history: History, plan: ConvolutionPlan, n: int) -> np.ndarray:
    """``int_0^{t_n} Gdot(s + eps) [y(t_n) - y(t_n - s)] ds`` at every node.

    The bracket vanishes at s = 0, so this is finite even for an unshifted
    singular kernel.
    """
    if not plan.derivative:
        raise PlanMismatch("history_difference_form needs a plan built from kernel derivatives")
    _check_plan(history, plan, n)
    if n == 0:
        return np.zeros(history.n_nodes)
    y = _levels_for(history, n)
    yn = y[n]
    rev = y[::-1]  # rev[k] = y[n-k]
    m0 = plan.m0[:n]
    m1 = plan.m1[:n]
    out = -((rev[1 : n + 1] - rev[:n]).T @ m1) / plan.dt
    if n > 1:
        out += (yn[None, :] - rev[1:n]).T @ m0[1:]
    return out


def convolution_matrix(plan: ConvolutionPlan, n_levels: int) -> np.ndarray:
    """Lower-triangular W with ``(W @ Y)[n] = convolve(Y, plan, n)`` for every level."""
    if plan.singular_head:
        raise SingularDerivative("plan has an infinite head moment")
    if n_levels - 1 > plan.n_max:
        raise PlanMismatch(f"plan covers {plan.n_max} lag intervals, {n_levels} levels requested")
    W = np.zeros((n_levels, n_levels))
    lead, tail = plan.lead_weights, plan.tail_weights
    for k in range(n_levels - 1):
        rows = np.arange(k + 1, n_levels)
        W[rows, rows - k] += lead[k]
        W[rows, rows - k - 1] += tail[k]
    return W
