import numpy as np
import pytest
from hypothesis import given, strategies as st

from kerrdg import FieldState, Material, cavity_mode
from kerrdg.diagnostics import (
    BoundaryAccumulator, EnergyReport, convergence_rates, energy_fully_discrete, energy_semidiscrete,
    l2_error_vs_reference, source_energy_bound,
)
from kerrdg.projection import project_2d
from kerrdg.timestepping import Solver, integrate_semidiscrete_rk4

from conftest import random_state, unit_disc


def _const_E(disc):
    return project_2d(1, lambda x, y: 1 + 0 * x, disc)


def test_zero_state_energies():
    disc = unit_disc(2, 1)
    mat = Material(chi3=1.0).on(disc)
    s = FieldState.zeros(disc)
    assert energy_semidiscrete(s, 0.0, mat, disc).total_semidiscrete == 0.0
    assert energy_fully_discrete(s.Ex, s.Ey, s.Hz, mat, disc).total_fullydiscrete == 0.0


def test_constant_field_energies():
    disc = unit_disc(3, 1)
    mat = Material(1.0, 1.0, 0.0, 1.0).on(disc)
    ex = _const_E(disc)
    rep = energy_semidiscrete(FieldState(ex, disc.zeros(), disc.zeros()), 0.0, mat, disc)
    assert rep.total_semidiscrete == pytest.approx(2.5, rel=1e-13)
    full = energy_fully_discrete(ex, disc.zeros(), disc.zeros(), mat, disc)
    assert full.total_fullydiscrete == pytest.approx(2.0, rel=1e-13)


def test_linear_energy_is_classical(rng):
    disc = unit_disc(3, 2)
    mat = Material(2.0, 3.0).on(disc)
    s = random_state(disc, rng)
    rep = energy_semidiscrete(s, 0.0, mat, disc)
    assert rep.quartic == 0.0
    want = sum(c * np.sum(a**2) * disc.jac[0, 0] for c, a in ((2.0, s.Ex), (2.0, s.Ey), (3.0, s.Hz)))
    assert rep.total_semidiscrete == pytest.approx(want, rel=1e-12)


@given(st.integers(0, 10**6), st.floats(0, 3), st.floats(0, 5))
def test_component_relation(seed, chi3, acc):
    disc = unit_disc(2, 1)
    mat = Material(1.0, 1.0, 0.5, chi3).on(disc)
    s = random_state(disc, np.random.default_rng(seed))
    rep = energy_semidiscrete(s, acc, mat, disc)
    assert min(rep.quadratic_E, rep.quadratic_H, rep.quartic, rep.boundary_accumulator) >= 0
    rel = rep.total_fullydiscrete - rep.boundary_accumulator + 0.5 * rep.quartic
    assert rep.total_semidiscrete >= rel - 1e-12 * abs(rel)
    # the lower bound needs acc <= qE + qH + 1.5 quartic, true at acc = 0
    fresh = energy_semidiscrete(s, 0.0, mat, disc)
    assert fresh.total_fullydiscrete + 0.5 * fresh.quartic >= 0


def test_component_relation_along_lossy_trajectory():
    sc = cavity_mode(chi3=1.0)
    disc = unit_disc(4, 1)
    sol = Solver(disc, sc.material, 1.0)
    traj = integrate_semidiscrete_rk4(sol, sol.initial_state(sc), 0.01, 100)
    for rep in traj.energies:
        rel = rep.total_fullydiscrete - rep.boundary_accumulator + 0.5 * rep.quartic
        assert rep.total_semidiscrete >= rel >= 0
    assert traj.energies[-1].boundary_accumulator > 0


def test_accumulator_nondecreasing(rng):
    disc = unit_disc(3, 1)
    acc = BoundaryAccumulator(0.5, disc, disc.zeros(), disc.zeros())
    values = []
    for _ in range(5):
        s = random_state(disc, rng)
        values.append(acc.advance(s.Ex, s.Ey, 0.01))
    assert all(b >= a for a, b in zip(values, values[1:])) and values[-1] > 0
    assert BoundaryAccumulator(0.0, disc, s.Ex, s.Ey).advance(s.Ex, s.Ey, 0.1) == 0.0


def test_rk4_semidiscrete_energy_constant():
    sc = cavity_mode(chi3=1.0)
    disc = unit_disc(6, 1)
    sol = Solver(disc, sc.material, 0.5)
    e = integrate_semidiscrete_rk4(sol, sol.initial_state(sc), 0.005, 60).totals("semi")
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-6


def test_source_bound_zero_current():
    lhs, rhs = source_energy_bound([1.0, 1.2, 0.9], [0.0, 0.0], 0.1, 0.2)
    assert lhs == 1.2 and rhs == pytest.approx(3 * np.exp(8 * 0.2 + 1))
    lhs, rhs = source_energy_bound([1.0, 1.2, 0.9], [0.0, 0.0, 0.0], 0.1, 0.2, "semi_discrete")
    assert rhs == 2.0


def test_source_bound_zero_initial_data():
    lhs, rhs = source_energy_bound([0.0, 0.01, 0.02], [1.0, 1.0], 0.1, 0.2)
    assert lhs < rhs
    lhs, rhs = source_energy_bound([0.0, 0.01, 0.02], [1.0, 1.0, 1.0], 0.1, 0.2, "semi_discrete")
    assert lhs < rhs
    with pytest.raises(ValueError):
        source_energy_bound([1.0], [], 0.1, 0.1, "other")


def test_error_of_projection_is_small_and_converges():
    sc = cavity_mode()
    errs = []
    for n in (4, 8):
        disc = unit_disc(n, 1)
        s = Solver(disc, sc.material).initial_state(sc)
        errs.append(np.linalg.norm(l2_error_vs_reference(s, sc.exact, sc.material, disc)))
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_error_zero_for_polynomial_exact():
    disc = unit_disc(3, 2)
    exact = lambda x, y, t: (x * y, 1 + y * y, x - y)
    s = FieldState(*(project_2d(w, lambda x, y, c=c: exact(x, y, 0)[c], disc) for c, w in enumerate((1, 2, 3))))
    assert max(l2_error_vs_reference(s, exact, Material(), disc)) < 1e-13


def test_convergence_rate_examples():
    assert convergence_rates([(1, 1), (0.5, 0.25)]) == pytest.approx([2.0])
    assert convergence_rates([(1, 1), (0.5, 0.125)]) == pytest.approx([3.0])
    assert convergence_rates([(1, 1), (0.5, 1)]) == [0.0]


def test_convergence_rate_rejects_zero_error():
    with pytest.raises(ValueError, match="exact"):
        convergence_rates([(1, 1), (0.5, 0.0)])
    with pytest.raises(ValueError):
        convergence_rates([(1, 1)])


def test_energy_row_layout():
    r = EnergyReport(1.0, 2.0, 3.0, 4.0)
    assert r.row(7, 0.5) == [7, 0.5, 1.0, 2.0, 3.0, 4.0, 1 + 2 + 4.5 + 4, 6.0]
