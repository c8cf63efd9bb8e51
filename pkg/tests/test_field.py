import logging
import math

import numpy as np
import pytest

from magvisc.errors import SizeMismatch
from magvisc.field import (
    NEUMANN,
    Forcing,
    Grid,
    InitialData,
    cumulative_time_integral,
    dx_centered,
    dxx,
    gradient_norm_sq,
    integrate,
    l2_norm_sq,
    qt_norm_sq,
    theta_smoothstep,
    time_integrate,
)


def test_grid_basics():
    g = Grid(10)
    assert g.h == 0.1 and g.n_nodes == 11
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    with pytest.raises(ValueError):
        Grid(3)


def test_dxx_quadratic_is_exact():
    g = Grid(20)
    x = g.nodes
    out = dxx(x**2, g)
    np.testing.assert_allclose(out[1:-1], 2.0, rtol=1e-9)
    assert out[0] == 0.0 and out[-1] == 0.0


def test_dxx_neumann_mirror():
    g = Grid(50)
    f = np.cos(np.pi * g.nodes)
    out = dxx(f, g, NEUMANN)
    np.testing.assert_allclose(out, -np.pi**2 * f, atol=5e-3)
    with pytest.raises(ValueError):
        dxx(f, g, "periodic")


def test_dx_centered_second_order():
    errs = []
    for n in (20, 40):
        g = Grid(n)
        errs.append(np.max(np.abs(dx_centered(np.sin(2 * g.nodes), g) - 2 * np.cos(2 * g.nodes))))
    assert errs[0] / errs[1] > 3.5


def test_quadratures():
    g = Grid(100)
    x = g.nodes
    assert integrate(np.sin(np.pi * x), g) == pytest.approx(2 / np.pi, rel=1e-4)
    assert l2_norm_sq(np.sin(np.pi * x), g) == pytest.approx(0.5, rel=1e-12)
    # exchange of theta = pi x^2 (3 - 2x) is 3 pi^2 / 5
    th = theta_smoothstep(x, np.pi)
    ex = 0.5 * (gradient_norm_sq(np.cos(th), g) + gradient_norm_sq(np.sin(th), g))
    assert ex == pytest.approx(3 * np.pi**2 / 5, rel=1e-3)


def test_time_integrals():
    t = np.linspace(0, 1, 101)
    assert time_integrate(t, 0.01) == pytest.approx(0.5)
    cum = cumulative_time_integral(t, 0.01)
    np.testing.assert_allclose(cum, 0.5 * t**2, atol=1e-12)
    g = Grid(10)
    assert qt_norm_sq(np.ones((101, 11)), g, 0.01) == pytest.approx(1.0)


def test_size_mismatch():
    with pytest.raises(SizeMismatch):
        integrate(np.ones(5), Grid(10))


def test_initial_data_unit_length():
    g = Grid(40)
    ini = InitialData.from_profiles(g, theta_max=2.0)
    np.testing.assert_allclose(np.hypot(*ini.m0), 1.0, atol=1e-15)
    assert ini.u1[0] == 0.0 and ini.u1[-1] == 0.0


def test_initial_data_warnings(caplog):
    g = Grid(40)
    with caplog.at_level(logging.WARNING):
        InitialData(g, np.ones(41), np.zeros(41))
    assert "boundary" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.WARNING):
        InitialData(g, np.zeros(41), g.nodes.copy())
    assert "Neumann" in caplog.text
    caplog.clear()
    with caplog.at_level(logging.WARNING):
        InitialData.from_profiles(g)
    assert caplog.text == ""


def test_forcing_samples():
    g = Grid(10)
    times = np.array([0.0, 0.5])
    f = Forcing("sine", 2.0, 1, math.pi).sample(g, times)
    np.testing.assert_allclose(f[0], 2.0 * np.sin(np.pi * g.nodes))
    np.testing.assert_allclose(f[1], 0.0, atol=1e-12)
    assert Forcing().is_zero and Forcing("sine", 0.0).is_zero
    with pytest.raises(SizeMismatch):
        Forcing("table", table=np.zeros((3, 11))).sample(g, times)
    with pytest.raises(ValueError):
        Forcing("table")
