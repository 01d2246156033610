"""Kerr constitutive law: nonlinear mass matrices, midpoint differences and the per-element Newton solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kerrdg.fields import Discretization, MaterialField
from kerrdg.spatial import boundary_penalty, penalty_matrix


class NewtonFailure(RuntimeError):
    def __init__(self, message: str, element=None, residual: float = float("nan")):
        super().__init__(message)
        self.element = element
        self.residual = residual


def weighted_gram(weight: np.ndarray, disc: Discretization) -> np.ndarray:
    """Cellwise matrices of the integral of weight * phi_n * phi_p; weight is (nx, ny, ..., m, m)."""
    lead = weight.shape[:-2]
    N = disc.n_modes
    jac = disc.jac.reshape(disc.jac.shape + (1,) * (weight.ndim - 2))
    wq = (weight * disc.w2 * jac).reshape(*lead, -1)
    return (wq @ disc.phi_pairs).reshape(*lead, N, N)


def _cell_constant(a: np.ndarray) -> bool:
    return bool(np.all(a == a[..., :1, :1]))


class CellMass:
    """Weighted mass matrix per cell with a diagonal fast path for cellwise-constant weights."""

    def __init__(self, weight: np.ndarray, disc: Discretization):
        self.diag = None
        self.inv = None
        if _cell_constant(weight):
            self.diag = (disc.jac * weight[:, :, 0, 0])[:, :, None, None]
        else:
            self.matrix = weighted_gram(weight, disc)
            self.inv = np.linalg.inv(self.matrix)

    def solve(self, r: np.ndarray) -> np.ndarray:
        if self.diag is not None:
            return r / self.diag
        shape = r.shape
        flat = r.reshape(shape[0], shape[1], -1)
        return np.einsum("ijnp,ijp->ijn", self.inv, flat).reshape(shape)

    def apply(self, c: np.ndarray) -> np.ndarray:
        if self.diag is not None:
            return c * self.diag
        shape = c.shape
        flat = c.reshape(shape[0], shape[1], -1)
        return np.einsum("ijnp,ijp->ijn", self.matrix, flat).reshape(shape)


def constitutive_tensor(ex, ey, eps_lin, eps_nl):
    """Pointwise entries of eps0[(1+chi1) I + chi3(|E|^2 I + 2 E E^T)]."""
    e2 = ex * ex + ey * ey
    axx = eps_lin + eps_nl * (e2 + 2.0 * ex * ex)
    axy = 2.0 * eps_nl * ex * ey
    ayy = eps_lin + eps_nl * (e2 + 2.0 * ey * ey)
    return axx, axy, ayy


def _block(axx, axy, ayy, disc: Discretization) -> np.ndarray:
    Mxx, Mxy, Myy = weighted_gram(np.stack(np.broadcast_arrays(axx, axy, ayy), axis=2), disc).transpose(2, 0, 1, 3, 4)
    nx, ny, N, _ = Mxx.shape
    out = np.empty((nx, ny, 2 * N, 2 * N))
    out[..., :N, :N] = Mxx
    out[..., :N, N:] = Mxy
    out[..., N:, :N] = Mxy  # Gram matrices are symmetric
    out[..., N:, N:] = Myy
    return out


def assemble_nonlinear_mass(ex_q: np.ndarray, ey_q: np.ndarray, mat: MaterialField,
                            disc: Discretization) -> np.ndarray:
    """Per-cell 2N x 2N matrix of the linearized constitutive map acting on stacked (dEx, dEy)."""
    return _block(*constitutive_tensor(ex_q, ey_q, mat.eps_lin, mat.eps_nl), disc)


def _stack(ax, ay):
    nx, ny = ax.shape[:2]
    return np.concatenate([ax.reshape(nx, ny, -1), ay.reshape(nx, ny, -1)], axis=-1)


def _unstack(u, shape):
    N = u.shape[-1] // 2
    return u[..., :N].reshape(shape), u[..., N:].reshape(shape)


def solve_semidiscrete_velocity(Ex, Ey, rx, ry, mat: MaterialField, disc: Discretization,
                                linear_mass: CellMass | None = None):
    """Solve M_nl(E) v = (rx, ry) cellwise for the electric time derivative."""
    if mat.linear:
        lm = linear_mass or CellMass(mat.eps_lin, disc)
        return lm.solve(rx), lm.solve(ry)
    M = assemble_nonlinear_mass(disc.to_nodes(Ex), disc.to_nodes(Ey), mat, disc)
    b = _stack(rx, ry)[..., None]
    try:
        v = np.linalg.solve(M, b)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError("singular nonlinear mass matrix (non-finite field values?)") from exc
    if not np.isfinite(v).all():
        raise FloatingPointError("non-finite velocity from the nonlinear mass solve")
    return _unstack(v, rx.shape)


def cubic_energy_identity_check(E, Edot) -> tuple[float, float]:
    """Both sides of the pointwise identity behind d/dt of the quartic energy term."""
    ex, ey = E
    dx, dy = Edot
    e2 = ex * ex + ey * ey
    lhs = e2 * (ex * dx + ey * dy) + 2 * (ex * ex * dx * ex + ey * ey * dy * ey) + 2 * ex * ey * (dy * ex + dx * ey)
    rhs = 3 * e2 * (ex * dx + ey * dy)
    return lhs, rhs


def midpoint_delta_pointwise(eox, eoy, enx, eny, eps_lin, eps_nl):
    """Pointwise D^{n+1} - D^n in the midpoint form that telescopes the discrete energy."""
    dx = enx - eox
    dy = eny - eoy
    half_sq = 0.5 * (enx * enx + eox * eox + eny * eny + eoy * eoy)
    cross = enx * eny + eox * eoy
    fx = eps_lin * dx + eps_nl * (half_sq * dx + (enx * enx + eox * eox) * dx + cross * dy)
    fy = eps_lin * dy + eps_nl * (half_sq * dy + (eny * eny + eoy * eoy) * dy + cross * dx)
    return fx, fy


def midpoint_jacobian_pointwise(eox, eoy, enx, eny, eps_lin, eps_nl):
    """Derivative of ``midpoint_delta_pointwise`` with respect to (enx, eny)."""
    dx = enx - eox
    dy = eny - eoy
    half_sq = 0.5 * (enx * enx + eox * eox + eny * eny + eoy * eoy)
    cross = enx * eny + eox * eoy
    jxx = eps_lin + eps_nl * (half_sq + enx * enx + eox * eox + 3.0 * enx * dx + eny * dy)
    jyy = eps_lin + eps_nl * (half_sq + eny * eny + eoy * eoy + 3.0 * eny * dy + enx * dx)
    jxy = eps_nl * (eny * dx + enx * dy + cross)
    return jxx, jxy, jyy


def midpoint_constitutive_delta(Ex_old, Ey_old, Ex_new, Ey_new, mat: MaterialField,
                                disc: Discretization) -> tuple[np.ndarray, np.ndarray]:
    """Weak vectors of (D^{n+1} - D^n) tested against each basis function."""
    fx, fy = midpoint_delta_pointwise(disc.to_nodes(Ex_old), disc.to_nodes(Ey_old),
                                      disc.to_nodes(Ex_new), disc.to_nodes(Ey_new),
                                      mat.eps_lin, mat.eps_nl)
    return disc.load(fx), disc.load(fy)


@dataclass
class NewtonReport:
    iterations: int
    iterations_per_cell: np.ndarray
    residual: float
    line_search_cuts: int = 0


def _scalar_if_uniform(a: np.ndarray):
    flat = a.reshape(-1)
    return float(flat[0]) if np.all(flat == flat[0]) else a


class ElectricUpdate:
    """Root of  Delta D(E^{n+1}) - dt * (r0 - penalty((E^{n+1} + E^n)/2)) = 0, cell by cell.

    ``r0`` is the electric weak residual built from H^{n+1/2} with c0 = 0 fluxes plus
    the J^{n+1/2} load; the penalty only touches a cell's own wall trace, so
    the system decouples over cells.  Internally cells are flattened to index
    i * ny + j and only cells that have not converged are revisited.
    """

    def __init__(self, disc: Discretization, mat: MaterialField, c0: float,
                 tol: float = 1e-12, max_iter: int = 50):
        if tol <= 0:
            raise ValueError("Newton tolerance must be positive")
        if max_iter < 1:
            raise ValueError("Newton max_iter must be at least 1")
        self.disc = disc
        self.mat = mat
        self.c0 = c0
        self.tol = tol
        self.max_iter = max_iter
        nx, ny = disc.mesh.nx, disc.mesh.ny
        ne = nx * ny
        self.N = disc.n_modes
        self.pen = penalty_matrix(disc, c0)
        self._pen_flat = self.pen.reshape(ne, 2 * self.N, 2 * self.N)
        self._wall_mask = np.any(self._pen_flat != 0, axis=(1, 2))
        self._wq = (disc.w2.reshape(-1)[None, :] * disc.jac.reshape(ne, 1))
        q = disc.m * disc.m
        self._eps_lin = _scalar_if_uniform(mat.eps_lin.reshape(ne, q))
        self._eps_nl = _scalar_if_uniform(mat.eps_nl.reshape(ne, q))
        self._linear = mat.linear
        # residual norms are measured per unit reference cell so the stopping test does not depend on h
        self._scale = 1.0 / disc.jac.reshape(ne)

    # flat kernels on a subset of cells -------------------------------------------------
    def _coef(self, a, idx):
        return a if np.isscalar(a) else a[idx]

    def _terms(self, old, u, idx):
        phiT = self.disc._phi2_t
        N = self.N
        enx = u[:, :N] @ phiT
        eny = u[:, N:] @ phiT
        eox, eoy = old[0][idx], old[1][idx]
        dx = enx - eox
        dy = eny - eoy
        sx = enx * enx + eox * eox
        sy = eny * eny + eoy * eoy
        half = 0.5 * (sx + sy)
        cross = enx * eny + eox * eoy
        return enx, eny, dx, dy, sx, sy, half, cross

    def _residual(self, t, u, u_old, r0, dt, idx):
        enx, eny, dx, dy, sx, sy, half, cross = t
        a = self._coef(self._eps_lin, idx)
        if self._linear:
            fx, fy = a * dx, a * dy
        else:
            b = self._coef(self._eps_nl, idx)
            fx = (a + b * (half + sx)) * dx + b * cross * dy
            fy = (a + b * (half + sy)) * dy + b * cross * dx
        wq = self._wq[idx]
        phi = self.disc.phi2
        R = np.concatenate([(fx * wq) @ phi, (fy * wq) @ phi], axis=1)
        R -= dt * r0[idx]
        if self.c0:
            wall = self._wall_mask[idx]
            if wall.any():
                P = self._pen_flat[idx[wall]]
                mid = 0.5 * (u[wall] + u_old[idx[wall]])
                R[wall] += dt * np.einsum("enp,ep->en", P, mid)
        return R

    def _jacobian(self, t, dt, idx):
        enx, eny, dx, dy, sx, sy, half, cross = t
        a = self._coef(self._eps_lin, idx)
        N = self.N
        wq = self._wq[idx]
        if self._linear:
            jxx = np.broadcast_to(a, wq.shape)
            g = ((jxx * wq) @ self.disc.phi_pairs).reshape(-1, N, N)
            J = np.zeros((len(idx), 2 * N, 2 * N))
            J[:, :N, :N] = g
            J[:, N:, N:] = g
        else:
            b = self._coef(self._eps_nl, idx)
            jxx = a + b * (half + sx + 3.0 * enx * dx + eny * dy)
            jyy = a + b * (half + sy + 3.0 * eny * dy + enx * dx)
            jxy = b * (eny * dx + enx * dy + cross)
            g = (np.stack([jxx, jxy, jyy], axis=1) * wq[:, None, :]) @ self.disc.phi_pairs
            g = g.reshape(len(idx), 3, N, N)
            J = np.empty((len(idx), 2 * N, 2 * N))
            J[:, :N, :N] = g[:, 0]
            J[:, :N, N:] = g[:, 1]
            J[:, N:, :N] = g[:, 1]
            J[:, N:, N:] = g[:, 2]
        if self.c0:
            wall = self._wall_mask[idx]
            if wall.any():
                J[wall] += 0.5 * dt * self._pen_flat[idx[wall]]
        return J

    # grid-shaped views, convenient for testing ------------------------------------------
    def _flat(self, a):
        nx, ny = a.shape[:2]
        return a.reshape(nx * ny, -1)

    def _prepare(self, Ex_old, Ey_old):
        u_old = np.concatenate([self._flat(Ex_old), self._flat(Ey_old)], axis=1)
        phiT = self.disc._phi2_t
        return u_old, (u_old[:, :self.N] @ phiT, u_old[:, self.N:] @ phiT)

    def residual(self, Ex_old, Ey_old, Ex_new, Ey_new, r0x, r0y, dt):
        u_old, old = self._prepare(Ex_old, Ey_old)
        u = np.concatenate([self._flat(Ex_new), self._flat(Ey_new)], axis=1)
        r0 = np.concatenate([self._flat(r0x), self._flat(r0y)], axis=1)
        idx = np.arange(u.shape[0])
        R = self._residual(self._terms(old, u, idx), u, u_old, r0, dt, idx)
        return _unstack(R.reshape(Ex_old.shape[:2] + (-1,)), Ex_old.shape)

    def jacobian(self, Ex_old, Ey_old, Ex_new, Ey_new, dt):
        u_old, old = self._prepare(Ex_old, Ey_old)
        u = np.concatenate([self._flat(Ex_new), self._flat(Ey_new)], axis=1)
        idx = np.arange(u.shape[0])
        J = self._jacobian(self._terms(old, u, idx), dt, idx)
        return J.reshape(Ex_old.shape[:2] + J.shape[1:])

    def solve(self, Ex_old, Ey_old, r0x, r0y, dt):
        shape = Ex_old.shape
        nx, ny = shape[:2]
        u_old, old = self._prepare(Ex_old, Ey_old)
        r0 = np.concatenate([self._flat(r0x), self._flat(r0y)], axis=1)
        u = u_old.copy()
        ne = u.shape[0]
        counts = np.zeros(ne, dtype=int)
        cuts = 0
        final_rn = np.zeros(ne)

        idx = np.arange(ne)
        t = self._terms(old, u, idx)
        R = self._residual(t, u, u_old, r0, dt, idx)
        rn = np.linalg.norm(R, axis=1) * self._scale
        target = self.tol * (1.0 + rn)
        while True:
            if not np.all(np.isfinite(rn)):
                bad = idx[~np.isfinite(rn)][0]
                cell = (int(bad // ny), int(bad % ny))
                raise NewtonFailure(f"non-finite Newton residual in cell {cell}", cell)
            done = rn <= target[idx]
            final_rn[idx[done]] = rn[done]
            if done.all():
                break
            if done.any():
                keep = ~done
                idx, R, rn = idx[keep], R[keep], rn[keep]
                t = tuple(a[keep] for a in t)
            if counts[idx].max() >= self.max_iter:
                worst = int(np.argmax(rn))
                cell = (int(idx[worst] // ny), int(idx[worst] % ny))
                raise NewtonFailure(
                    f"Newton did not converge in {self.max_iter} iterations; cell {cell} "
                    f"residual {rn[worst]:.3e}", cell, float(rn[worst]))
            J = self._jacobian(t, dt, idx)
            d = -np.linalg.solve(J, R[..., None])[..., 0]
            counts[idx] += 1
            u_try = u[idx] + d
            t_try = self._terms(old, u_try, idx)
            R_try = self._residual(t_try, u_try, u_old, r0, dt, idx)
            rn_try = np.linalg.norm(R_try, axis=1) * self._scale[idx]
            step = np.ones(len(idx))
            for _ in range(30):
                worse = ~(rn_try <= rn)
                if not worse.any():
                    break
                cuts += int(worse.sum())
                step[worse] *= 0.5
                u_try = u[idx] + step[:, None] * d
                t_try = self._terms(old, u_try, idx)
                R_try = self._residual(t_try, u_try, u_old, r0, dt, idx)
                rn_try = np.linalg.norm(R_try, axis=1) * self._scale[idx]
            u[idx] = u_try
            t, R, rn = t_try, R_try, rn_try
        N = self.N
        ex = u[:, :N].reshape(shape)
        ey = u[:, N:].reshape(shape)
        return ex, ey, NewtonReport(int(counts.max()), counts.reshape(nx, ny), float(final_rn.max()), cuts)


def newton_electric_update(Ex_old, Ey_old, r0x, r0y, dt, c0, mat: MaterialField, disc: Discretization,
                           tol: float = 1e-12, max_iter: int = 50):
    """Functional wrapper around ElectricUpdate.solve."""
    return ElectricUpdate(disc, mat, c0, tol, max_iter).solve(Ex_old, Ey_old, r0x, r0y, dt)
