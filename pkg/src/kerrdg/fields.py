"""DG field storage, material sampling, evaluation, traces and weighted norms."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

from kerrdg.basis import Basis1D, QuadratureRule, build_basis, gauss_legendre, legendre_table
from kerrdg.mesh import Mesh

Coefficient = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]


class Discretization:
    """A mesh together with a Q_k basis and the quadrature geometry built from them.

    Coefficient arrays have shape ``(nx, ny, k+1, k+1)``: cell (i, j), x-mode a,
    y-mode b.  Quadrature-point arrays have shape ``(nx, ny, m, m)``.
    """

    def __init__(self, mesh: Mesh, basis: Basis1D):
        self.mesh = mesh
        self.basis = basis
        self.k = basis.k
        self.m = basis.m
        hx, hy = mesh.hx, mesh.hy
        self.hx = hx
        self.hy = hy
        self.jac = 0.25 * hx[:, None] * hy[None, :]
        self.w2 = np.outer(basis.weights, basis.weights)
        # tensor basis table: phi2[p*m + q, a*(k+1) + b] = V[p, a] * V[q, b]
        V = basis.V
        self.phi2 = np.einsum("pa,qb->pqab", V, V).reshape(self.m * self.m, -1)
        self._phi2_t = np.ascontiguousarray(self.phi2.T)
        # products phi_n phi_p at each node, for weighted Gram matrices in one GEMM
        self.phi_pairs = np.einsum("qn,qp->qnp", self.phi2, self.phi2).reshape(self.m * self.m, -1)

    @classmethod
    def build(cls, mesh: Mesh, k: int, m: int | None = None) -> "Discretization":
        return cls(mesh, build_basis(k, m))

    @property
    def coeff_shape(self) -> tuple[int, int, int, int]:
        n = self.k + 1
        return (self.mesh.nx, self.mesh.ny, n, n)

    @property
    def n_modes(self) -> int:
        return (self.k + 1) ** 2

    def points(self, rule: QuadratureRule | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates (X, Y), each of shape (nx, ny, m, m), of a tensor rule."""
        rule = rule or self.basis.rule
        xq = self.mesh.x_centers[:, None] + 0.5 * self.hx[:, None] * rule.nodes[None, :]
        yq = self.mesh.y_centers[:, None] + 0.5 * self.hy[:, None] * rule.nodes[None, :]
        X = np.broadcast_to(xq[:, None, :, None], (self.mesh.nx, self.mesh.ny, rule.m, rule.m))
        Y = np.broadcast_to(yq[None, :, None, :], (self.mesh.nx, self.mesh.ny, rule.m, rule.m))
        return X, Y

    def face_points_x(self) -> np.ndarray:
        """x-coordinates (nx, m) of quadrature nodes along horizontal faces."""
        return self.mesh.x_centers[:, None] + 0.5 * self.hx[:, None] * self.basis.nodes[None, :]

    def face_points_y(self) -> np.ndarray:
        """y-coordinates (ny, m) of quadrature nodes along vertical faces."""
        return self.mesh.y_centers[:, None] + 0.5 * self.hy[:, None] * self.basis.nodes[None, :]

    def zeros(self) -> np.ndarray:
        return np.zeros(self.coeff_shape)

    def to_nodes(self, coeffs: np.ndarray, V: np.ndarray | None = None) -> np.ndarray:
        """Values of a coefficient array at tensor quadrature nodes."""
        nx, ny = coeffs.shape[:2]
        if V is None:
            flat = coeffs.reshape(nx, ny, -1) @ self._phi2_t
            return flat.reshape(nx, ny, self.m, self.m)
        return np.einsum("ijab,pa,qb->ijpq", coeffs, V, V, optimize=True)

    def load(self, values: np.ndarray) -> np.ndarray:
        """Weak-form load vectors: integral over each cell of values * phi_ab."""
        nx, ny = values.shape[:2]
        wv = (values * self.w2 * self.jac[:, :, None, None]).reshape(nx, ny, -1)
        n = self.k + 1
        return (wv @ self.phi2).reshape(nx, ny, n, n)

    def integrate(self, values: np.ndarray) -> float:
        """Integral over the domain of quadrature-point values."""
        return float(np.sum(values * self.w2 * self.jac[:, :, None, None]))


@dataclass
class FieldState:
    """Modal coefficients of (E_x, E_y, H_z) at time t, each of shape (nx, ny, k+1, k+1)."""

    Ex: np.ndarray
    Ey: np.ndarray
    Hz: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, disc: Discretization, t: float = 0.0) -> "FieldState":
        return cls(disc.zeros(), disc.zeros(), disc.zeros(), t)

    def copy(self) -> "FieldState":
        return FieldState(self.Ex.copy(), self.Ey.copy(), self.Hz.copy(), self.t)

    def with_(self, **kw) -> "FieldState":
        return replace(self, **kw)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.Ex).all() and np.isfinite(self.Ey).all() and np.isfinite(self.Hz).all())

    def check(self, disc: Discretization) -> None:
        for name in ("Ex", "Ey", "Hz"):
            a = getattr(self, name)
            if a.shape != disc.coeff_shape:
                raise ValueError(f"{name} has shape {a.shape}, expected {disc.coeff_shape}")
        if not self.is_finite():
            raise FloatingPointError("non-finite field coefficients")

    def as_flat(self, name: str) -> np.ndarray:
        """(nx*ny, (k+1)^2) view with cell index i + nx*j and mode index a*(k+1) + b."""
        a = getattr(self, name)
        nx, ny, n, _ = a.shape
        return a.transpose(1, 0, 2, 3).reshape(nx * ny, n * n)


@dataclass
class MaterialField:
    """Material coefficients sampled at the volume quadrature points of a discretization."""

    eps0: float
    mu0: np.ndarray
    chi1: np.ndarray
    chi3: np.ndarray
    eps_lin: np.ndarray = field(init=False, repr=False)
    eps_nl: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.eps0) and self.eps0 > 0):
            raise ValueError(f"eps0 must be positive, got {self.eps0}")
        if not np.all(np.isfinite(self.mu0)) or np.any(self.mu0 <= 0):
            raise ValueError("mu0 samples must be positive and finite")
        for name in ("chi1", "chi3"):
            a = getattr(self, name)
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise ValueError(f"{name} samples must be nonnegative and finite")
        self.eps_lin = self.eps0 * (1.0 + self.chi1)
        self.eps_nl = self.eps0 * self.chi3

    @property
    def linear(self) -> bool:
        return not np.any(self.chi3)

    @property
    def c_eps_mu(self) -> float:
        """max over samples of (eps0 * mu0 * (1 + chi1))^(-1/2)."""
        return float(np.max(1.0 / np.sqrt(self.eps_lin * self.mu0)))


@dataclass(frozen=True)
class Material:
    """Material description: eps0 is a constant, the others constants or functions of (x, y)."""

    eps0: float = 1.0
    mu0: Coefficient = 1.0
    chi1: Coefficient = 0.0
    chi3: Coefficient = 0.0

    def sample(self, X: np.ndarray, Y: np.ndarray) -> MaterialField:
        def ev(c):
            if callable(c):
                return np.array(np.broadcast_to(c(X, Y), X.shape), dtype=float)
            return np.full(X.shape, float(c))

        return MaterialField(float(self.eps0), ev(self.mu0), ev(self.chi1), ev(self.chi3))

    def on(self, disc: Discretization, rule: QuadratureRule | None = None) -> MaterialField:
        return self.sample(*disc.points(rule))

    @property
    def is_constant(self) -> bool:
        return not any(callable(c) for c in (self.mu0, self.chi1, self.chi3))


def evaluate_volume(state: FieldState, disc: Discretization) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Ex, Ey, Hz) at the volume quadrature nodes."""
    return disc.to_nodes(state.Ex), disc.to_nodes(state.Ey), disc.to_nodes(state.Hz)


def _east(c, basis):
    return (np.swapaxes(c, -1, -2) @ basis.right) @ basis.V.T


def _west(c, basis):
    return (np.swapaxes(c, -1, -2) @ basis.left) @ basis.V.T


def _north(c, basis):
    return (c @ basis.right) @ basis.V.T


def _south(c, basis):
    return (c @ basis.left) @ basis.V.T


@dataclass
class TraceSet:
    """One-sided limits at face quadrature nodes.

    Vertical faces x = x_edges[f], f = 0..nx, arrays of shape (nx+1, ny, m):
    ``*_minus`` comes from the cell on the left, ``*_plus`` from the right.
    Horizontal faces y = y_edges[f], arrays of shape (nx, ny+1, m): ``*_minus``
    from below, ``*_plus`` from above.  Sides outside the domain are NaN.
    """

    ey_minus: np.ndarray
    ey_plus: np.ndarray
    hz_minus_v: np.ndarray
    hz_plus_v: np.ndarray
    ex_minus: np.ndarray
    ex_plus: np.ndarray
    hz_minus_h: np.ndarray
    hz_plus_h: np.ndarray


def _vertical(c, basis):
    nx, ny = c.shape[:2]
    minus = np.full((nx + 1, ny, basis.m), np.nan)
    plus = np.full((nx + 1, ny, basis.m), np.nan)
    minus[1:] = _east(c, basis)
    plus[:-1] = _west(c, basis)
    return minus, plus


def _horizontal(c, basis):
    nx, ny = c.shape[:2]
    minus = np.full((nx, ny + 1, basis.m), np.nan)
    plus = np.full((nx, ny + 1, basis.m), np.nan)
    minus[:, 1:] = _north(c, basis)
    plus[:, :-1] = _south(c, basis)
    return minus, plus


def extract_traces(state: FieldState, disc: Discretization) -> TraceSet:
    b = disc.basis
    ey_m, ey_p = _vertical(state.Ey, b)
    hv_m, hv_p = _vertical(state.Hz, b)
    ex_m, ex_p = _horizontal(state.Ex, b)
    hh_m, hh_p = _horizontal(state.Hz, b)
    return TraceSet(ey_m, ey_p, hv_m, hv_p, ex_m, ex_p, hh_m, hh_p)


def weighted_l2_norm(values: np.ndarray, weight, disc: Discretization, rule: QuadratureRule | None = None) -> float:
    """sqrt of the integral of weight * values^2 (values sampled on ``rule`` nodes)."""
    rule = rule or disc.basis.rule
    w2 = np.outer(rule.weights, rule.weights)
    integrand = np.asarray(weight) * values**2 * w2 * disc.jac[:, :, None, None]
    return float(np.sqrt(np.sum(integrand)))


def over_rule(disc: Discretization, extra: int = 2) -> QuadratureRule:
    return gauss_legendre(disc.m + extra)


def evaluate_on_rule(coeffs: np.ndarray, disc: Discretization, rule: QuadratureRule) -> np.ndarray:
    V, _ = legendre_table(disc.k, rule.nodes)
    return disc.to_nodes(coeffs, V)


SNAPSHOT_HEADER = ["cell_i", "cell_j", "mode_ix", "mode_iy", "coeff_Ex", "coeff_Ey", "coeff_Hz"]


def write_snapshot(path, state: FieldState) -> None:
    """Write coefficients as CSV, one row per (cell, mode), cell i varying fastest."""
    nx, ny, n, _ = state.Ex.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_HEADER)
        for j in range(ny):
            for i in range(nx):
                for a in range(n):
                    for b in range(n):
                        w.writerow(
                            [i, j, a, b]
                            + [repr(float(arr[i, j, a, b])) for arr in (state.Ex, state.Ey, state.Hz)]
                        )


def read_snapshot(path, t: float = 0.0) -> FieldState:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != SNAPSHOT_HEADER:
        raise ValueError(f"unexpected snapshot header {rows[0]}")
    data = np.array(rows[1:], dtype=float)
    idx = data[:, :4].astype(int)
    nx, ny, n = idx[:, 0].max() + 1, idx[:, 1].max() + 1, idx[:, 2].max() + 1
    out = [np.zeros((nx, ny, n, n)) for _ in range(3)]
    for c in range(3):
        out[c][idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]] = data[:, 4 + c]
    return FieldState(*out, t=t)
