import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kerrdg import cavity_mode, gaussian_pulse, manufactured_kerr
from kerrdg.diagnostics import energy_semidiscrete
from kerrdg.scenarios import build_scenario, zero
from kerrdg.timestepping import Solver

from conftest import unit_disc

H = 1e-3


def _d(f, h=H):
    # fourth-order central difference
    return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)


def _residuals(sc, x, y, t):
    m = sc.material
    eps0, mu0, chi1, chi3 = m.eps0, m.mu0, m.chi1, m.chi3

    def D(tt):
        ex, ey, _ = sc.exact(x, y, tt)
        e2 = ex * ex + ey * ey
        return np.array([ex, ey]) * eps0 * ((1 + chi1) + chi3 * e2)

    dDdt = _d(lambda h: D(t + h))
    dHdx = _d(lambda h: sc.exact(x + h, y, t)[2])
    dHdy = _d(lambda h: sc.exact(x, y + h, t)[2])
    dExdy = _d(lambda h: sc.exact(x, y + h, t)[0])
    dEydx = _d(lambda h: sc.exact(x + h, y, t)[1])
    dHdt = _d(lambda h: sc.exact(x, y, t + h)[2])
    jx, jy = sc.source(x, y, t) if sc.source else (0.0, 0.0)
    return (dDdt[0] - dHdy - jx, dDdt[1] + dHdx - jy, mu0 * dHdt - (dExdy - dEydx))


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 3), st.floats(-2, 2))
def test_manufactured_residual_vanishes(x, y, t, a):
    sc = manufactured_kerr(a)
    scale = 1 + abs(a) ** 3 * 40
    for r in _residuals(sc, x, y, t):
        assert abs(r) <= 1e-10 * scale


def test_manufactured_residual_other_materials():
    sc = manufactured_kerr(0.7, eps0=1.5, mu0=2.0, chi1=0.3, chi3=2.0)
    for x, y, t in np.random.default_rng(3).uniform(0, 1, (20, 3)):
        assert max(abs(r) for r in _residuals(sc, x, y, t)) <= 1e-9


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 3))
def test_cavity_residual_vanishes(x, y, t):
    for m, n in ((1, 1), (2, 1)):
        assert max(abs(r) for r in _residuals(cavity_mode(m, n, eps_r=2.0), x, y, t)) <= 1e-9


def test_cavity_frequency():
    assert cavity_mode(1, 1).params["omega"] == pytest.approx(math.pi * math.sqrt(2))


@given(st.floats(0, 1), st.floats(0, 3))
def test_pec_walls(s, t):
    for sc in (cavity_mode(1, 2), manufactured_kerr(1.3)):
        for wall in (0.0, 1.0):
            assert abs(sc.exact(s, wall, t)[0]) < 1e-14
            assert abs(sc.exact(wall, s, t)[1]) < 1e-14


def test_cavity_initial_energy_magnetic():
    sc = cavity_mode()
    ex, ey, hz = sc.initial(np.array([0.3]), np.array([0.6]))
    assert ex == 0 and ey == 0 and hz == pytest.approx(math.cos(0.3 * math.pi) * math.cos(0.6 * math.pi))


def test_cavity_rejects_bad_modes():
    for args in ((0, 0), (-1, 1)):
        with pytest.raises(ValueError):
            cavity_mode(*args)
    assert cavity_mode(chi3=1.0).exact is None


def test_zero_amplitude_manufactured():
    sc = manufactured_kerr(0.0)
    x = np.linspace(0, 1, 5)
    assert not np.any(sc.source(x, x, 0.7)) and not np.any(sc.exact(x, x, 0.7))


def test_gaussian_pulse():
    x = np.linspace(0, 1, 5)
    assert not np.any(gaussian_pulse(amplitude=0.0).initial(x, x))
    sc = gaussian_pulse(width=0.2)
    disc = unit_disc(4, 2)
    rep = energy_semidiscrete(Solver(disc, sc.material).initial_state(sc), 0.0, sc.material.on(disc), disc)
    assert rep.quadratic_E == 0.0 and rep.quartic == 0.0 and rep.quadratic_H > 0
    with pytest.raises(ValueError):
        gaussian_pulse(width=0.0)


def test_build_scenario():
    assert build_scenario("cavity", m=2).params["m"] == 2
    assert build_scenario("zero").name == "zero"
    assert zero().exact(0.1, 0.2, 0.3) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError, match="unknown scenario"):
        build_scenario("nope")
