import math

import numpy as np
import pytest
from scipy import integrate

from magvisc.errors import PlanMismatch, SingularDerivative
from magvisc.kernel import Constant, Fractional, PronySeries, make_kernel
from magvisc.memory import (
    History,
    build_plan,
    convolution_matrix,
    convolve_dotG,
    convolve_G,
    convolve_known,
    history_difference_form,
)


def _history(dt, fn, n):
    t = np.arange(n + 1) * dt
    return History.from_array(dt, np.column_stack([fn(t), 2 * fn(t)]))


def test_history_append_and_readonly():
    h = History(0.1, 3, capacity=1)
    for k in range(5):
        h.append(np.full(3, k))
    assert len(h) == 5 and h.levels[4, 0] == 4
    with pytest.raises(ValueError):
        h.levels[0, 0] = 1.0
    with pytest.raises(PlanMismatch):
        h.append(np.zeros(2))


def test_constant_history_fractional_exact():
    k = make_kernel(Fractional(0.5))
    n, dt = 40, 1 / 40
    plan = build_plan(k, dt, n)
    hist = _history(dt, np.ones_like, n)
    for m in (1, 7, 40):
        t = m * dt
        assert convolve_G(hist, plan, m)[0] == pytest.approx(2 * math.sqrt(t / math.pi), rel=1e-13)


def test_linear_history_is_exact():
    # piecewise-linear reconstruction is exact for linear data
    k = make_kernel(PronySeries(((1.0, 3.0),)), 0.0)
    dt, n = 0.05, 20
    plan = build_plan(k, dt, n)
    hist = _history(dt, lambda t: 1 + t, n)
    t = n * dt
    q = integrate.quad(lambda s: k.eval(t - s) * (1 + s), 0, t, epsrel=1e-13)[0]
    assert convolve_G(hist, plan, n)[0] == pytest.approx(q, rel=1e-12)


def test_second_order_convergence_smooth_history():
    k = make_kernel(Fractional(0.4))
    t = 0.5
    exact = integrate.quad(lambda s: np.cos(3 * s), 0, t, weight="alg", wvar=(0, -0.4))[0]
    exact *= k.eval(1.0)  # scale / Gamma(1 - alpha)
    errs = []
    for n in (32, 64):
        dt = t / n
        plan = build_plan(k, dt, n)
        errs.append(abs(convolve_G(_history(dt, lambda s: np.cos(3 * s), n), plan, n)[0] - exact))
    assert errs[0] / errs[1] > 3.0


def test_convolve_known_plus_head():
    k = make_kernel(Fractional(0.5))
    dt, n = 0.01, 30
    plan = build_plan(k, dt, n)
    hist = _history(dt, np.sin, n)
    full = convolve_G(hist, plan, n)
    part = convolve_known(hist, plan, n) + plan.head_weight * hist.levels[n]
    np.testing.assert_allclose(part, full, rtol=1e-14)


def test_derivative_plan_rules():
    sing = make_kernel(Fractional(0.5))
    plan = build_plan(sing, 0.01, 10, derivative=True)
    assert plan.singular_head
    hist = _history(0.01, np.sin, 10)
    with pytest.raises(SingularDerivative):
        convolve_dotG(hist, plan, 10)
    with pytest.raises(PlanMismatch):
        convolve_G(hist, plan, 10)
    # the difference form is finite for a singular kernel
    assert np.all(np.isfinite(history_difference_form(hist, plan, 10)))


def test_equivalent_form_identity_discrete():
    k = make_kernel(Fractional(0.5), 0.1)
    dt, n = 0.01, 50
    plan = build_plan(k, dt, n, derivative=True)
    hist = _history(dt, lambda t: np.exp(-t) * np.sin(5 * t), n)
    y = hist.levels
    for m in (1, 20, 50):
        lhs = k.eval(0.0) * y[m] + convolve_dotG(hist, plan, m)
        rhs = k.eval(m * dt) * y[m] - history_difference_form(hist, plan, m)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-13)


def test_plan_mismatch():
    k = make_kernel(Constant(1.0))
    plan = build_plan(k, 0.1, 5)
    with pytest.raises(PlanMismatch):
        convolve_G(History.from_array(0.2, np.zeros((3, 2))), plan, 2)
    with pytest.raises(PlanMismatch):
        convolve_G(History.from_array(0.1, np.zeros((9, 2))), plan, 8)


def test_convolution_matrix_matches_convolve():
    k = make_kernel(Fractional(0.3), 0.0)
    dt, n = 0.02, 15
    plan = build_plan(k, dt, n)
    hist = _history(dt, np.cos, n)
    W = convolution_matrix(plan, n + 1)
    direct = np.array([convolve_G(hist, plan, m) for m in range(n + 1)])
    np.testing.assert_allclose(W @ hist.levels, direct, rtol=1e-13, atol=1e-15)
