"""Alternating-flux DG curl operator with PEC boundaries and bottom/left penalties."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kerrdg.fields import Discretization, FieldState, TraceSet, extract_traces


@dataclass(frozen=True)
class FluxConfig:
    c0: float = 0.5
    mode: str = "semi_discrete"

    def __post_init__(self):
        if not (np.isfinite(self.c0) and self.c0 >= 0):
            raise ValueError(f"penalty c0 must be >= 0, got {self.c0}")
        if self.mode not in ("semi_discrete", "fully_discrete_pair"):
            raise ValueError(f"unknown flux mode {self.mode!r}")


@dataclass
class FaceFluxes:
    """Numerical fluxes at face quadrature nodes (same face indexing as TraceSet)."""

    ey_hat: np.ndarray
    hz_hat_v: np.ndarray
    ex_hat: np.ndarray
    hz_hat_h: np.ndarray


@dataclass
class WeakResidual:
    """Weak right-hand sides for d/dt D_x, d/dt D_y and mu0 d/dt H_z, tested against each basis function."""

    rx: np.ndarray
    ry: np.ndarray
    rz: np.ndarray


def compute_fluxes(traces: TraceSet, cfg: FluxConfig, traces_new: TraceSet | None = None) -> FaceFluxes:
    """Alternating interior fluxes: E from above/right, H from below/left.

    On the PEC walls the tangential E flux is zero; H_z takes the interior value,
    plus a penalty on the bottom (+c0 E_x) and left (-c0 E_y) walls.  In
    ``fully_discrete_pair`` mode ``traces`` carries (E^n, H^{n+1/2}) and
    ``traces_new`` carries E^{n+1}: the E fluxes use E^{n+1} and the penalty uses
    the average of the two electric traces.
    """
    pair = cfg.mode == "fully_discrete_pair"
    if pair and traces_new is None:
        raise ValueError("fully_discrete_pair mode needs the E^{n+1} traces")
    e_src = traces_new if pair else traces

    ex_hat = np.zeros_like(traces.ex_plus)
    ex_hat[:, 1:-1] = e_src.ex_plus[:, 1:-1]
    ey_hat = np.zeros_like(traces.ey_plus)
    ey_hat[1:-1] = e_src.ey_plus[1:-1]

    if pair:
        ex_pen = 0.5 * (traces_new.ex_plus[:, 0] + traces.ex_plus[:, 0])
        ey_pen = 0.5 * (traces_new.ey_plus[0] + traces.ey_plus[0])
    else:
        ex_pen = traces.ex_plus[:, 0]
        ey_pen = traces.ey_plus[0]

    hz_h = traces.hz_minus_h.copy()
    hz_h[:, 0] = traces.hz_plus_h[:, 0] + cfg.c0 * ex_pen
    hz_v = traces.hz_minus_v.copy()
    hz_v[0] = traces.hz_plus_v[0] - cfg.c0 * ey_pen
    return FaceFluxes(ey_hat, hz_v, ex_hat, hz_h)


def magnetic_flux_only(Hz: np.ndarray, disc: Discretization) -> FaceFluxes:
    """H fluxes with c0 = 0 (interior value on every wall); the E entries are left empty."""
    from kerrdg.fields import _horizontal, _vertical

    b = disc.basis
    v_m, v_p = _vertical(Hz, b)
    h_m, h_p = _horizontal(Hz, b)
    v_m[0] = v_p[0]
    h_m[:, 0] = h_p[:, 0]
    return FaceFluxes(None, v_m, None, h_m)


def electric_flux_only(Ex: np.ndarray, Ey: np.ndarray, disc: Discretization) -> FaceFluxes:
    """E fluxes (value from above / right, zero on the walls); the H entries are left empty."""
    from kerrdg.fields import _south, _west

    b = disc.basis
    nx, ny = Ex.shape[:2]
    ex_hat = np.zeros((nx, ny + 1, b.m))
    ex_hat[:, 1:-1] = _south(Ex[:, 1:], b)
    ey_hat = np.zeros((nx + 1, ny, b.m))
    ey_hat[1:-1] = _west(Ey[1:], b)
    return FaceFluxes(ey_hat, None, ex_hat, None)


def _face_modes(vals: np.ndarray, disc: Discretization) -> np.ndarray:
    """Reference-face integrals of vals * phi_a, last axis nodes -> modes."""
    return vals @ (disc.basis.weights[:, None] * disc.basis.V)


def electric_residual(Hz: np.ndarray, fluxes: FaceFluxes, disc: Discretization,
                      jx: np.ndarray | None = None, jy: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(rx, ry): weak forms of d_y H_z + J_x and -d_x H_z + J_y."""
    b = disc.basis
    hx = 0.5 * disc.hx[:, None, None, None]
    hy = 0.5 * disc.hy[None, :, None, None]
    Fh = _face_modes(fluxes.hz_hat_h, disc)  # (nx, ny+1, n)
    Fv = _face_modes(fluxes.hz_hat_v, disc)  # (nx+1, ny, n)
    rx = hx * (Fh[:, 1:, :, None] * b.right[None, None, None, :] - Fh[:, :-1, :, None] * b.left)
    rx -= hx * (Hz @ b.S)
    ry = -hy * (Fv[1:, :, None, :] * b.right[:, None] - Fv[:-1, :, None, :] * b.left[:, None])
    ry += hy * (b.S.T @ Hz)
    if jx is not None:
        rx += disc.load(jx)
    if jy is not None:
        ry += disc.load(jy)
    return rx, ry


def magnetic_residual(Ex: np.ndarray, Ey: np.ndarray, fluxes: FaceFluxes, disc: Discretization) -> np.ndarray:
    """rz: weak form of d_y E_x - d_x E_y."""
    b = disc.basis
    hx = 0.5 * disc.hx[:, None, None, None]
    hy = 0.5 * disc.hy[None, :, None, None]
    Fe_h = _face_modes(fluxes.ex_hat, disc)
    Fe_v = _face_modes(fluxes.ey_hat, disc)
    rz = -hy * (Fe_v[1:, :, None, :] * b.right[:, None] - Fe_v[:-1, :, None, :] * b.left[:, None])
    rz += hy * (b.S.T @ Ey)
    rz += hx * (Fe_h[:, 1:, :, None] * b.right[None, None, None, :] - Fe_h[:, :-1, :, None] * b.left)
    rz -= hx * (Ex @ b.S)
    return rz


def curl_residual(state: FieldState, fluxes: FaceFluxes, disc: Discretization,
                  jx: np.ndarray | None = None, jy: np.ndarray | None = None) -> WeakResidual:
    """Weak right-hand sides of all three equations; J is given at volume quadrature nodes."""
    rx, ry = electric_residual(state.Hz, fluxes, disc, jx, jy)
    return WeakResidual(rx, ry, magnetic_residual(state.Ex, state.Ey, fluxes, disc))


def semidiscrete_residual(state: FieldState, disc: Discretization, cfg: FluxConfig,
                          jx=None, jy=None) -> WeakResidual:
    return curl_residual(state, compute_fluxes(extract_traces(state, disc), cfg), disc, jx, jy)


def boundary_penalty(Ex: np.ndarray, Ey: np.ndarray, disc: Discretization, c0: float) -> tuple[np.ndarray, np.ndarray]:
    """Weak vectors of the penalty terms, so that rx(c0) = rx(0) - px and ry(c0) = ry(0) - py."""
    b = disc.basis
    px = np.zeros_like(Ex)
    py = np.zeros_like(Ey)
    if c0 == 0:
        return px, py
    # bottom wall: trace E_x(x, p+) in x-modes
    tr = Ex[:, 0] @ b.left
    px[:, 0] = c0 * 0.5 * disc.hx[:, None, None] * tr[:, :, None] * b.left[None, None, :]
    tr = np.einsum("jab,a->jb", Ey[0], b.left)
    py[0] = c0 * 0.5 * disc.hy[:, None, None] * b.left[None, :, None] * tr[:, None, :]
    return px, py


def penalty_matrix(disc: Discretization, c0: float) -> np.ndarray:
    """Per-element (nx, ny, 2N, 2N) matrix of ``boundary_penalty`` on stacked (Ex, Ey)."""
    n = disc.k + 1
    N = n * n
    P = np.zeros((disc.mesh.nx, disc.mesh.ny, 2 * N, 2 * N))
    if c0 == 0:
        return P
    ll = np.outer(disc.basis.left, disc.basis.left)
    I = np.eye(n)
    bx = np.kron(I, ll)  # delta_aa' l_b l_b'
    by = np.kron(ll, I)  # l_a l_a' delta_bb'
    P[:, 0, :N, :N] += c0 * 0.5 * disc.hx[:, None, None] * bx
    P[0, :, N:, N:] += c0 * 0.5 * disc.hy[:, None, None] * by
    return P


def boundary_trace_integrals(Ex: np.ndarray, Ey: np.ndarray, disc: Discretization) -> float:
    """Integral of (E_x^+)^2 along the bottom wall plus (E_y^+)^2 along the left wall."""
    b = disc.basis
    bottom = np.einsum("iab,b,qa->iq", Ex[:, 0], b.left, b.V)
    left = np.einsum("jab,a,qb->jq", Ey[0], b.left, b.V)
    return float(0.5 * np.sum(disc.hx[:, None] * b.weights * bottom**2)
                 + 0.5 * np.sum(disc.hy[:, None] * b.weights * left**2))
