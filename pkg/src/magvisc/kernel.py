"""Relaxation kernels.

Three families are supported::

    Fractional(alpha, scale)   G(s) = scale * s**(-alpha) / Gamma(1 - alpha)
    PronySeries(terms)         G(s) = sum_i c_i * exp(-r_i * s)
    Constant(value)            G(s) = value

A :class:`RelaxationKernel` wraps a family with a time shift ``epsilon_shift``
so that ``kernel.eval(t) == G(t + epsilon_shift)``.  A positive shift turns the
weakly singular fractional kernel into a smooth one that is finite at zero.

Interval moments ``moment0`` / ``moment1`` are exact closed forms, including
intervals starting at the singularity.  They are the building blocks of the
product-integration weights in :mod:`magvisc.memory`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import gamma

from .errors import EvalAtSingularity, InvalidSpec, NotIntegrable, SingularDerivative

# Below this ratio interval/left-endpoint the power-law moment uses a series.
_SERIES_CUTOFF = 1e-3
# Below this value of rate*width the exponential moment uses a series.
_EXP_SERIES_CUTOFF = 0.1


@dataclass(frozen=True)
class Fractional:
    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidSpec(f"alpha must lie in (0,1), got {self.alpha}")
        if not self.scale > 0.0:
            raise InvalidSpec(f"scale must be positive, got {self.scale}")

    @classmethod
    def unchecked(cls, alpha: float, scale: float = 1.0) -> "Fractional":
        """Build a spec without validation.  Test use only."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "alpha", float(alpha))
        object.__setattr__(obj, "scale", float(scale))
        return obj


@dataclass(frozen=True)
class PronySeries:
    terms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        terms = tuple((float(c), float(r)) for c, r in self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise InvalidSpec("PronySeries needs at least one term")
        for c, r in terms:
            if c < 0.0 or r < 0.0:
                raise InvalidSpec(f"Prony coefficients and rates must be >= 0, got ({c}, {r})")
        if not any(c > 0.0 for c, _ in terms):
            raise InvalidSpec("PronySeries needs a term with positive coefficient")


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not self.value > 0.0:
            raise InvalidSpec(f"Constant kernel value must be positive, got {self.value}")


KernelSpec = Union[Fractional, PronySeries, Constant]


@dataclass(frozen=True)
class KernelValidationReport:
    integrable_on_0T: bool
    sign_violations: list[tuple[float, str]] = field(default_factory=list)
    sampled_range: tuple[float, float, int] = (0.0, 0.0, 0)

    @property
    def ok(self) -> bool:
        return self.integrable_on_0T and not self.sign_violations


def _pow_diff(a, b, p):
    """``b**p - a**p`` for 0 <= a <= b, accurate when b is close to a."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(np.broadcast(a, b).shape)
    a, b = np.broadcast_arrays(a, b)
    near = (a > 0) & (b - a < a)
    r = (b[near] - a[near]) / a[near]
    out[near] = a[near] ** p * np.expm1(p * np.log1p(r))
    far = ~near & (a > 0)
    out[far] = b[far] ** p - a[far] ** p
    out[a == 0] = b[a == 0] ** p
    return out


def _power_moment1(a, width, alpha):
    """``int_0^width w (a + w)**(-alpha) dw`` for a >= 0."""
    a = np.asarray(a, dtype=float)
    width = np.asarray(width, dtype=float)
    a, width = np.broadcast_arrays(a, width)
    out = np.empty(a.shape)
    zero = a == 0
    out[zero] = width[zero] ** (2 - alpha) / (2 - alpha)
    pos = ~zero
    ap = a[pos]
    r = width[pos] / ap
    small = r < _SERIES_CUTOFF
    val = np.empty(ap.shape)
    # int_0^r z (1+z)^(-alpha) dz, in closed form and as a binomial series
    rb = r[~small]
    e2 = np.expm1((2 - alpha) * np.log1p(rb))
    e1 = np.expm1((1 - alpha) * np.log1p(rb))
    val[~small] = e2 / (2 - alpha) - e1 / (1 - alpha)
    rs = r[small]
    series = np.zeros(rs.shape)
    coef = 1.0
    for k in range(10):
        series += coef * rs ** (k + 2) / (k + 2)
        coef *= (-alpha - k) / (k + 1)
    val[small] = series
    out[pos] = ap ** (2 - alpha) * val
    return out


def _phi1(x):
    """``(1 - exp(-x)) / x`` with the limit 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape)
    nz = x != 0
    out[nz] = -np.expm1(-x[nz]) / x[nz]
    return out


def _phi2(x):
    """``(1 - exp(-x) (1 + x)) / x**2`` with the limit 1/2 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    small = x < _EXP_SERIES_CUTOFF
    xs = x[small]
    series = np.zeros(xs.shape)
    term = np.ones(xs.shape)
    for k in range(16):
        series += term / (k + 2)
        term = term * (-xs) / (k + 1)
    out[small] = series
    xb = x[~small]
    out[~small] = -(np.expm1(-xb) + xb * np.exp(-xb)) / xb**2
    return out


@dataclass(frozen=True)
class RelaxationKernel:
    """A relaxation function evaluated with a time shift.

    ``eval(t)`` returns ``G(t + epsilon_shift)``; ``eval_dot`` and
    ``eval_ddot`` give the first and second derivatives.
    """

    spec: KernelSpec
    epsilon_shift: float = 0.0

    def __post_init__(self):
        if not (self.epsilon_shift >= 0.0 and math.isfinite(self.epsilon_shift)):
            raise InvalidSpec(f"epsilon_shift must be finite and >= 0, got {self.epsilon_shift}")

    @property
    def is_singular(self) -> bool:
        """True when G(epsilon_shift) is infinite."""
        return isinstance(self.spec, Fractional) and self.epsilon_shift == 0.0

    def translated(self, epsilon: float) -> "RelaxationKernel":
        return RelaxationKernel(self.spec, epsilon)

    def _shifted(self, t):
        s = np.asarray(t, dtype=float) + self.epsilon_shift
        if isinstance(self.spec, Fractional):
            if np.any(s <= 0.0):
                raise EvalAtSingularity("fractional kernel evaluated at t + epsilon_shift <= 0")
        elif np.any(s < 0.0):
            raise EvalAtSingularity("kernel evaluated at negative time")
        return s

    def _eval_order(self, t, order):
        s = self._shifted(t)
        spec = self.spec
        if isinstance(spec, Fractional):
            a = spec.alpha
            c = spec.scale / gamma(1.0 - a)
            if order == 0:
                out = c * s ** (-a)
            elif order == 1:
                out = -a * c * s ** (-a - 1.0)
            else:
                out = a * (a + 1.0) * c * s ** (-a - 2.0)
        elif isinstance(spec, PronySeries):
            out = np.zeros(s.shape)
            for coef, rate in spec.terms:
                out = out + coef * (-rate) ** order * np.exp(-rate * s)
        else:
            out = np.full(s.shape, spec.value if order == 0 else 0.0)
        return out if out.ndim else float(out)

    def eval(self, t):
        return self._eval_order(t, 0)

    def eval_dot(self, t):
        return self._eval_order(t, 1)

    def eval_ddot(self, t):
        return self._eval_order(t, 2)

    def _check_interval(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.any(a < 0) or np.any(b <= a):
            raise ValueError("moments need 0 <= a < b")
        return a + self.epsilon_shift, b - a

    def moment0(self, a, b):
        """``int_a^b G(s + epsilon_shift) ds``."""
        ap, width = self._check_interval(a, b)
        spec = self.spec
        if isinstance(spec, Fractional):
            alpha = spec.alpha
            if alpha >= 1.0 and np.any(ap == 0):
                raise NotIntegrable(f"s**(-{alpha}) is not integrable at the origin")
            out = spec.scale / gamma(2.0 - alpha) * _pow_diff(ap, ap + width, 1.0 - alpha)
        elif isinstance(spec, PronySeries):
            out = np.zeros(np.broadcast(ap, width).shape)
            for coef, rate in spec.terms:
                out = out + coef * np.exp(-rate * ap) * width * _phi1(rate * width)
        else:
            out = spec.value * width * np.ones(np.broadcast(ap, width).shape)
        return out if np.ndim(out) else float(out)

    def moment1(self, a, b):
        """``int_a^b (s - a) G(s + epsilon_shift) ds``."""
        ap, width = self._check_interval(a, b)
        spec = self.spec
        if isinstance(spec, Fractional):
            alpha = spec.alpha
            if alpha >= 2.0 and np.any(ap == 0):
                raise NotIntegrable(f"s**(1-{alpha}) is not integrable at the origin")
            out = spec.scale / gamma(1.0 - alpha) * _power_moment1(ap, width, alpha)
        elif isinstance(spec, PronySeries):
            out = np.zeros(np.broadcast(ap, width).shape)
            for coef, rate in spec.terms:
                out = out + coef * np.exp(-rate * ap) * width**2 * _phi2(rate * width)
        else:
            out = 0.5 * spec.value * width**2 * np.ones(np.broadcast(ap, width).shape)
        return out if np.ndim(out) else float(out)

    def dot_moment0(self, a, b):
        """``int_a^b Gdot(s + epsilon_shift) ds = G(b') - G(a')``."""
        ap, width = self._check_interval(a, b)
        spec = self.spec
        if isinstance(spec, Fractional):
            if np.any(ap == 0):
                raise SingularDerivative("derivative of a singular kernel is not integrable at 0")
            c = spec.scale / gamma(1.0 - spec.alpha)
            out = c * ap ** (-spec.alpha) * np.expm1(-spec.alpha * np.log1p(width / ap))
        elif isinstance(spec, PronySeries):
            out = np.zeros(np.broadcast(ap, width).shape)
            for coef, rate in spec.terms:
                out = out + coef * np.exp(-rate * ap) * np.expm1(-rate * width)
        else:
            out = np.zeros(np.broadcast(ap, width).shape)
        return out if np.ndim(out) else float(out)

    def dot_moment1(self, a, b):
        """``int_a^b (s - a) Gdot(s + epsilon_shift) ds``.

        Finite even at a singular origin because the weight vanishes there.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        out = (b - a) * self.eval(b) - self.moment0(a, b)
        return out if np.ndim(out) else float(out)

    def validate(self, horizon: float, samples: int = 200) -> KernelValidationReport:
        """Sample the sign conditions on log-spaced points of (0, horizon]."""
        if not horizon > 0 or samples < 2:
            raise ValueError("validate needs horizon > 0 and samples >= 2")
        t_min = horizon * 1e-8
        ts = np.geomspace(t_min, horizon, samples)
        violations: list[tuple[float, str]] = []
        g, gd, gdd = self.eval(ts), self.eval_dot(ts), self.eval_ddot(ts)
        for t, a, b, c in zip(ts, g, gd, gdd):
            if not a > 0:
                violations.append((float(t), "G > 0"))
            if not b <= 0:
                violations.append((float(t), "Gdot <= 0"))
            if not c >= 0:
                violations.append((float(t), "Gddot >= 0"))
        try:
            integral = self.moment0(0.0, horizon)
            integrable = bool(np.isfinite(integral))
        except NotIntegrable:
            integrable = False
        return KernelValidationReport(integrable, violations, (float(t_min), float(horizon), samples))


def make_kernel(spec: KernelSpec, epsilon_shift: float = 0.0) -> RelaxationKernel:
    return RelaxationKernel(spec, float(epsilon_shift))


def eval(kernel: RelaxationKernel, t):  # noqa: A001 - mirrors the method name
    return kernel.eval(t)


def eval_dot(kernel: RelaxationKernel, t):
    return kernel.eval_dot(t)


def eval_ddot(kernel: RelaxationKernel, t):
    return kernel.eval_ddot(t)


def validate(kernel: RelaxationKernel, horizon: float, samples: int = 200) -> KernelValidationReport:
    return kernel.validate(horizon, samples)


def moment0(kernel: RelaxationKernel, a, b):
    return kernel.moment0(a, b)


def moment1(kernel: RelaxationKernel, a, b):
    return kernel.moment1(a, b)
