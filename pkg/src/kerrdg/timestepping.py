"""Leapfrog scheme with Newton electric updates, the RK4 reference integrator, CFL logic and start-up."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from kerrdg.constitutive import CellMass, ElectricUpdate, NewtonFailure, solve_semidiscrete_velocity
from kerrdg.diagnostics import (
    BoundaryAccumulator,
    EnergyReport,
    current_norm_sq,
    energy_fully_discrete,
    energy_semidiscrete,
)
from kerrdg.fields import Discretization, FieldState, Material, MaterialField, extract_traces
from kerrdg.mesh import Mesh
from kerrdg.projection import project_2d
from kerrdg.spatial import (
    FluxConfig,
    boundary_trace_integrals,
    compute_fluxes,
    electric_flux_only,
    electric_residual,
    magnetic_flux_only,
    magnetic_residual,
    semidiscrete_residual,
)

log = logging.getLogger(__name__)


def cfl_max_dt(mesh: Mesh, mat: MaterialField, c_inv: float, cfl_safety: float = 0.9) -> float:
    """cfl_safety * min(h / (4 C_inv C_eps_mu), 1/4) with h the smallest cell dimension."""
    if c_inv <= 0 or not 0 < cfl_safety:
        raise ValueError("C_inv and cfl_safety must be positive")
    return cfl_safety * min(mesh.h_min / (4.0 * c_inv * mat.c_eps_mu), 0.25)


def default_c_inv(k: int) -> float:
    return float((k + 1) ** 2)


@dataclass(frozen=True)
class StepPlan:
    dt: float
    n_steps: int
    T: float
    cfl_safety: float = 0.9
    c_inv: float = 4.0

    def __post_init__(self):
        if self.n_steps < 0 or self.T < 0:
            raise ValueError("step count and final time must be nonnegative")
        if self.n_steps and abs(self.n_steps * self.dt - self.T) > 1e-12 * self.T:
            raise ValueError("n_steps * dt must equal T")

    @classmethod
    def make(cls, T: float, mesh: Mesh, mat: MaterialField, k: int, dt: float | None = None,
             cfl_safety: float = 0.9, c_inv: float | None = None) -> "StepPlan":
        """Round the requested (or CFL-limited) step down so that an integer number of steps reaches T."""
        c_inv = default_c_inv(k) if c_inv is None else c_inv
        bound = cfl_max_dt(mesh, mat, c_inv, cfl_safety if dt is None else 1.0)
        target = bound if dt is None else dt
        if target <= 0:
            raise ValueError("time step must be positive")
        if T == 0:
            return cls(target, 0, 0.0, cfl_safety, c_inv)
        n = max(1, math.ceil(T / target * (1 - 1e-12)))
        plan = cls(T / n, n, T, cfl_safety, c_inv)
        if plan.dt > bound * (1 + 1e-12):
            log.warning("dt = %g exceeds the CFL bound %g", plan.dt, bound)
        return plan


class Solver:
    """Spatial discretization plus material, penalty and current for one problem."""

    def __init__(self, disc: Discretization, material: Material, c0: float = 0.5, source=None,
                 newton_tol: float = 1e-12, newton_max_iter: int = 50):
        self.disc = disc
        self.material = material
        self.mat = material.on(disc)
        self.cfg = FluxConfig(c0)
        self.c0 = self.cfg.c0
        self._free = FluxConfig(0.0)
        self.source = source
        self._j_cache = None
        self.X, self.Y = disc.points()
        self.mu_mass = CellMass(self.mat.mu0, disc)
        self.eps_mass = CellMass(self.mat.eps_lin, disc) if self.mat.linear else None
        self.electric = ElectricUpdate(disc, self.mat, c0, newton_tol, newton_max_iter)
        self.newton_max = 0

    def current(self, t: float):
        """J at the volume quadrature nodes; the last evaluation is cached."""
        if self.source is None:
            return None, None
        if self._j_cache is None or self._j_cache[0] != t:
            jx, jy = self.source(self.X, self.Y, t)
            self._j_cache = (t, np.broadcast_to(jx, self.X.shape), np.broadcast_to(jy, self.X.shape))
        return self._j_cache[1], self._j_cache[2]

    def current_norm_sq(self, t: float) -> float:
        jx, jy = self.current(t)
        return 0.0 if jx is None else current_norm_sq(jx, jy, self.mat, self.disc)

    def project(self, u, which) -> np.ndarray:
        return project_2d(which, u, self.disc)

    def initial_state(self, scenario) -> FieldState:
        """E_x^0 = Pi_1 E_x, E_y^0 = Pi_2 E_y, H_z^0 = Pi_3 H_z."""
        return FieldState(*(project_2d(w, scenario.initial_component(c), self.disc)
                            for c, w in enumerate((1, 2, 3))), t=0.0)

    # semi-discrete system
    def rates(self, state: FieldState):
        jx, jy = self.current(state.t)
        r = semidiscrete_residual(state, self.disc, self.cfg, jx, jy)
        vx, vy = solve_semidiscrete_velocity(state.Ex, state.Ey, r.rx, r.ry, self.mat, self.disc, self.eps_mass)
        return vx, vy, self.mu_mass.solve(r.rz)

    # leapfrog pieces
    def magnetic_update(self, Ex, Ey, H, dt: float) -> np.ndarray:
        """H + dt * M_mu^{-1} rz(E) with E fluxes taken from E (the new electric level)."""
        fl = electric_flux_only(Ex, Ey, self.disc)
        return H + dt * self.mu_mass.solve(magnetic_residual(Ex, Ey, fl, self.disc))

    def electric_update(self, Ex, Ey, H_half, dt: float, t_half: float):
        """Newton solve for E at the next level given H at the half level and J(t_half)."""
        fl = magnetic_flux_only(H_half, self.disc)
        jx, jy = self.current(t_half)
        r0x, r0y = electric_residual(H_half, fl, self.disc, jx, jy)
        ex, ey, report = self.electric.solve(Ex, Ey, r0x, r0y, dt)
        self.newton_max = max(self.newton_max, report.iterations)
        return ex, ey, report


def init_half_step_H(state0: FieldState, dt: float, solver: Solver, strategy: str = "taylor",
                     exact=None) -> np.ndarray:
    """H^{1/2} from H^0: Taylor start H^0 + dt/2 dH/dt(0), or the projected analytic H(dt/2)."""
    if strategy == "taylor":
        if dt == 0:
            return state0.Hz.copy()
        fl = compute_fluxes(extract_traces(state0, solver.disc), solver.cfg)
        rz = magnetic_residual(state0.Ex, state0.Ey, fl, solver.disc)
        return state0.Hz + 0.5 * dt * solver.mu_mass.solve(rz)
    if strategy == "exact":
        if exact is None:
            raise ValueError("exact start needs an exact solution")
        return project_2d(3, lambda x, y: exact(x, y, 0.5 * dt)[2], solver.disc)
    raise ValueError(f"unknown start strategy {strategy!r}")


@dataclass
class LeapfrogState:
    """E at level n and H at level n + 1/2."""

    Ex: np.ndarray
    Ey: np.ndarray
    H_half: np.ndarray
    n: int = 0


def step_leapfrog(s: LeapfrogState, dt: float, solver: Solver) -> LeapfrogState:
    """(E^n, H^{n+1/2}) -> (E^{n+1}, H^{n+3/2})."""
    ex, ey, _ = solver.electric_update(s.Ex, s.Ey, s.H_half, dt, (s.n + 0.5) * dt)
    if not (np.isfinite(ex).all() and np.isfinite(ey).all()):
        raise FloatingPointError(f"non-finite electric field at step {s.n}")
    h = solver.magnetic_update(ex, ey, s.H_half, dt)
    if not np.isfinite(h).all():
        raise FloatingPointError(f"non-finite magnetic field at step {s.n}")
    return LeapfrogState(ex, ey, h, s.n + 1)


class StepFailure(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    energies: list = field(default_factory=list)  # EnergyReport per recorded level
    j_norms_sq: list = field(default_factory=list)
    final: FieldState | None = None
    newton_max_iterations: int = 0

    def totals(self, kind: str = "fully") -> np.ndarray:
        attr = "total_fullydiscrete" if kind == "fully" else "total_semidiscrete"
        return np.array([getattr(e, attr) for e in self.energies])


def run_leapfrog(solver: Solver, state0: FieldState, plan: StepPlan, start: str = "taylor", exact=None,
                 callback=None) -> Trajectory:
    """Step from (E^0, H^{1/2}) for n = 0 .. N-1, recording the energy of every level.

    The recorded H is H^{n+1/2}; ``final`` carries E^N and H^{N+1/2} with t = T.
    ``callback(n, LeapfrogState)`` runs after every step.
    """
    dt = plan.dt
    disc = solver.disc
    solver.newton_max = 0
    s = LeapfrogState(state0.Ex, state0.Ey, init_half_step_H(state0, dt, solver, start, exact))
    acc = BoundaryAccumulator(solver.c0, disc, s.Ex, s.Ey)
    traj = Trajectory()

    def record(s):
        traj.times.append(s.n * dt)
        traj.energies.append(energy_fully_discrete(s.Ex, s.Ey, s.H_half, solver.mat, disc, acc.value))

    record(s)
    for n in range(plan.n_steps):
        traj.j_norms_sq.append(solver.current_norm_sq((n + 0.5) * dt))
        try:
            s = step_leapfrog(s, dt, solver)
        except (NewtonFailure, FloatingPointError) as exc:
            raise StepFailure(n, exc) from exc
        acc.advance(s.Ex, s.Ey, dt)
        record(s)
        if callback is not None:
            callback(n, s)
    traj.final = FieldState(s.Ex, s.Ey, s.H_half, plan.n_steps * dt)
    traj.newton_max_iterations = solver.newton_max
    return traj


def leapfrog_final_fields(traj: Trajectory, solver: Solver, dt: float) -> FieldState:
    """Fields at t = T with H synchronised to E by averaging H^{N-1/2} and H^{N+1/2}."""
    f = traj.final
    back = solver.magnetic_update(f.Ex, f.Ey, f.Hz, -dt)
    return FieldState(f.Ex, f.Ey, 0.5 * (back + f.Hz), f.t)


def integrate_semidiscrete_rk4(solver: Solver, state0: FieldState, dt: float, n_steps: int,
                               callback=None) -> Trajectory:
    """Classical RK4 on the semi-discrete system with the boundary accumulator as a fifth component.

    The accumulator obeys acc' = 2 c0 (int_bottom (E_x^+)^2 + int_left (E_y^+)^2), so
    the augmented energy is conserved up to the integrator error.
    """
    disc = solver.disc
    c0 = solver.c0

    def f(st: FieldState):
        vx, vy, vz = solver.rates(st)
        va = 2.0 * c0 * boundary_trace_integrals(st.Ex, st.Ey, disc) if c0 else 0.0
        return vx, vy, vz, va

    def shifted(st, acc, k, a):
        return FieldState(st.Ex + a * k[0], st.Ey + a * k[1], st.Hz + a * k[2], st.t + a), acc + a * k[3]

    st, acc = state0.copy(), 0.0
    traj = Trajectory()
    traj.times.append(st.t)
    traj.energies.append(energy_semidiscrete(st, acc, solver.mat, disc))
    traj.j_norms_sq.append(solver.current_norm_sq(st.t))
    for n in range(n_steps):
        t0 = state0.t + n * dt
        st.t = t0
        k1 = f(st)
        s2, _ = shifted(st, acc, k1, 0.5 * dt)
        k2 = f(s2)
        s3, _ = shifted(st, acc, k2, 0.5 * dt)
        k3 = f(s3)
        s4, _ = shifted(st, acc, k3, dt)
        k4 = f(s4)
        incr = [(a + 2 * b + 2 * c + d) * (dt / 6.0) for a, b, c, d in zip(k1, k2, k3, k4)]
        st = FieldState(st.Ex + incr[0], st.Ey + incr[1], st.Hz + incr[2], state0.t + (n + 1) * dt)
        acc = acc + incr[3]
        if not st.is_finite():
            raise StepFailure(n, FloatingPointError("non-finite field in RK4 stage"))
        traj.times.append(st.t)
        traj.energies.append(energy_semidiscrete(st, acc, solver.mat, disc))
        traj.j_norms_sq.append(solver.current_norm_sq(st.t))
        if callback is not None:
            callback(n, st)
    traj.final = st
    return traj
