"""Energy functionals, the semi-discrete energy-rate balance, L2 errors and convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from kerrdg.constitutive import CellMass, solve_semidiscrete_velocity
from kerrdg.fields import Discretization, FieldState, Material, MaterialField, evaluate_on_rule, over_rule
from kerrdg.spatial import FluxConfig, boundary_trace_integrals, semidiscrete_residual

ENERGY_HEADER = [
    "step", "t", "quadratic_E", "quadratic_H", "quartic",
    "boundary_accumulator", "total_semidiscrete", "total_fullydiscrete",
]


@dataclass(frozen=True)
class EnergyReport:
    quadratic_E: float
    quadratic_H: float
    quartic: float
    boundary_accumulator: float = 0.0

    @property
    def total_semidiscrete(self) -> float:
        return self.quadratic_E + self.quadratic_H + 1.5 * self.quartic + self.boundary_accumulator

    @property
    def total_fullydiscrete(self) -> float:
        return self.quadratic_E + self.quadratic_H + self.quartic

    def row(self, step: int, t: float) -> list:
        return [step, t, self.quadratic_E, self.quadratic_H, self.quartic,
                self.boundary_accumulator, self.total_semidiscrete, self.total_fullydiscrete]


def energy_components(Ex, Ey, Hz, mat: MaterialField, disc: Discretization) -> tuple[float, float, float]:
    """(||E||^2_{eps_lin}, ||H||^2_{mu0}, || |E|^2 ||^2_{eps_nl}) by volume quadrature."""
    ex, ey, hz = disc.to_nodes(Ex), disc.to_nodes(Ey), disc.to_nodes(Hz)
    e2 = ex * ex + ey * ey
    return (disc.integrate(mat.eps_lin * e2),
            disc.integrate(mat.mu0 * hz * hz),
            disc.integrate(mat.eps_nl * e2 * e2))


def energy_semidiscrete(state: FieldState, accumulator: float, mat: MaterialField,
                        disc: Discretization) -> EnergyReport:
    return EnergyReport(*energy_components(state.Ex, state.Ey, state.Hz, mat, disc), accumulator)


def energy_fully_discrete(Ex, Ey, H_half, mat: MaterialField, disc: Discretization,
                          accumulator: float = 0.0) -> EnergyReport:
    """Energy at level n from E^n and H^{n+1/2}, as the leapfrog scheme stores them."""
    return EnergyReport(*energy_components(Ex, Ey, H_half, mat, disc), accumulator)


class BoundaryAccumulator:
    """Running 2 c0 times the time integral of the bottom/left wall trace integrals (trapezoidal rule).

    The factor 2 makes qE + qH + 1.5 quartic + accumulator constant in time,
    since the quadratic terms are not halved.
    """

    def __init__(self, c0: float, disc: Discretization, Ex, Ey):
        self.c0 = c0
        self.disc = disc
        self.value = 0.0
        self._last = boundary_trace_integrals(Ex, Ey, disc) if c0 else 0.0

    def advance(self, Ex, Ey, dt: float) -> float:
        if self.c0:
            now = boundary_trace_integrals(Ex, Ey, self.disc)
            self.value += self.c0 * abs(dt) * (self._last + now)
            self._last = now
        return self.value


def discrete_energy_rate_identity(state: FieldState, cfg: FluxConfig, mat: MaterialField,
                                  disc: Discretization, jx=None, jy=None) -> tuple[float, float, float]:
    """(lhs_rate, boundary_dissipation, source_power) of the semi-discrete power balance.

    lhs_rate integrates eps_lin E.E' + 3 eps_nl |E|^2 E.E' + mu0 H H' with the
    velocities from the semi-discrete system; J is given at quadrature nodes.
    The balance is lhs_rate + boundary_dissipation - source_power = 0.
    """
    r = semidiscrete_residual(state, disc, cfg, jx, jy)
    vx, vy = solve_semidiscrete_velocity(state.Ex, state.Ey, r.rx, r.ry, mat, disc)
    vz = CellMass(mat.mu0, disc).solve(r.rz)
    ex, ey, hz = disc.to_nodes(state.Ex), disc.to_nodes(state.Ey), disc.to_nodes(state.Hz)
    dx, dy, dz = disc.to_nodes(vx), disc.to_nodes(vy), disc.to_nodes(vz)
    edot = ex * dx + ey * dy
    lhs = disc.integrate(mat.eps_lin * edot + 3.0 * mat.eps_nl * (ex * ex + ey * ey) * edot + mat.mu0 * hz * dz)
    diss = cfg.c0 * boundary_trace_integrals(state.Ex, state.Ey, disc)
    power = 0.0
    if jx is not None:
        power += disc.integrate(jx * ex)
    if jy is not None:
        power += disc.integrate(jy * ey)
    return lhs, diss, power


def current_norm_sq(jx, jy, mat: MaterialField, disc: Discretization) -> float:
    """||J||^2 weighted by 1/eps_lin."""
    return disc.integrate((jx * jx + jy * jy) / mat.eps_lin)


def source_energy_bound(energies, j_norms_sq, dt: float, T: float,
                        kind: str = "fully_discrete") -> tuple[float, float]:
    """Both sides of the energy bound under a current density.

    energies: per-level totals E_h^n (fully discrete) or E_h(t^n) (semi-discrete).
    j_norms_sq: ||J||^2_{1/eps_lin} at the sampling times of each step.
    fully_discrete: max E_h^n <= exp(8T+1) (3 E_h^0 + dt sum ||J^{n+1/2}||^2).
    semi_discrete:  max E_h(t) <= 2 E_h(0) + 8 (int_0^T ||J||)^2.
    """
    energies = np.asarray(energies, dtype=float)
    j = np.asarray(j_norms_sq, dtype=float)
    lhs = float(energies.max())
    if kind == "fully_discrete":
        rhs = math.exp(8 * T + 1) * (3 * energies[0] + dt * float(j.sum()))
    elif kind == "semi_discrete":
        rhs = 2 * energies[0] + 8 * (dt * float(np.sqrt(j).sum())) ** 2
    else:
        raise ValueError(f"unknown bound kind {kind!r}")
    return lhs, rhs


def l2_error_vs_reference(state: FieldState, exact, material: Material,
                          disc: Discretization) -> tuple[float, float, float]:
    """Weighted L2 errors (eps_lin for E, mu0 for H) against exact(X, Y, t) -> (Ex, Ey, Hz).

    Integrated with two more Gauss nodes per direction than the solver uses.
    """
    rule = over_rule(disc)
    X, Y = disc.points(rule)
    mat = material.sample(X, Y)
    w = np.outer(rule.weights, rule.weights) * disc.jac[:, :, None, None]
    ref = exact(X, Y, state.t)
    out = []
    for coeffs, u, weight in zip((state.Ex, state.Ey, state.Hz), ref, (mat.eps_lin, mat.eps_lin, mat.mu0)):
        diff = evaluate_on_rule(coeffs, disc, rule) - u
        out.append(math.sqrt(float(np.sum(weight * diff * diff * w))))
    return tuple(out)


def convergence_rates(pairs) -> list[float]:
    """Observed orders log(e1/e2)/log(h1/h2) between consecutive (h, error) pairs."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (h, error) pairs")
    for h, e in pairs:
        if h <= 0:
            raise ValueError(f"step size must be positive, got {h}")
        if not e > 0:
            raise ValueError(f"error {e} is not positive (exact); no rate defined")
    return [math.log(e1 / e2) / math.log(h1 / h2) for (h1, e1), (h2, e2) in zip(pairs, pairs[1:])]


def l2_difference(a: FieldState, b: FieldState, material: Material,
                  disc: Discretization) -> tuple[float, float, float]:
    """Weighted L2 distance between two discrete states on the same discretization."""
    rule = over_rule(disc)
    X, Y = disc.points(rule)
    mat = material.sample(X, Y)
    w = np.outer(rule.weights, rule.weights) * disc.jac[:, :, None, None]
    out = []
    for name, weight in (("Ex", mat.eps_lin), ("Ey", mat.eps_lin), ("Hz", mat.mu0)):
        diff = evaluate_on_rule(getattr(a, name) - getattr(b, name), disc, rule)
        out.append(math.sqrt(float(np.sum(weight * diff * diff * w))))
    return tuple(out)
