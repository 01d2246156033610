"""One-sided and L2 projections onto P_k / Q_k, and their tensor products."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from kerrdg.basis import Basis1D, build_basis
from kerrdg.fields import Discretization, evaluate_on_rule, over_rule
from kerrdg.mesh import build_mesh

FLAVORS = ("plain", "plus", "minus")

# (x flavor, y flavor) of the four 2D projectors
PROJECTORS = {
    1: ("plain", "plus"),
    2: ("plus", "plain"),
    3: ("minus", "minus"),
    4: ("plain", "plain"),
}


def _which(which) -> int:
    if isinstance(which, str):
        which = which.lower().removeprefix("pi")
    w = int(which)
    if w not in PROJECTORS:
        raise ValueError(f"unknown projector {which!r}; expected 1..4")
    return w


def _sample_points(basis: Basis1D) -> np.ndarray:
    """Reference sample locations: the quadrature nodes followed by -1 and +1."""
    return np.concatenate([basis.nodes, [-1.0, 1.0]])


def projector_matrix(flavor: str, basis: Basis1D) -> np.ndarray:
    """(k+1, m+2) matrix taking samples at ``_sample_points`` to modal coefficients.

    plain matches all k+1 moments; plus/minus match the moments against degree
    <= k-1 and the value at the left/right end point.
    """
    return _projector_matrix(flavor, basis.k, basis.m)


@lru_cache(maxsize=None)
def _projector_matrix(flavor: str, k: int, m: int) -> np.ndarray:
    if flavor not in FLAVORS:
        raise ValueError(f"unknown projector flavor {flavor!r}")
    basis = build_basis(k, m)
    n = k + 1
    moments = np.zeros((n, m + 2))
    moments[:, :m] = (basis.weights[:, None] * basis.V).T
    if flavor == "plain":
        P = moments
    else:
        end, col = (basis.left, m) if flavor == "plus" else (basis.right, m + 1)
        A = np.zeros((n, n))
        A[:k, :k] = np.eye(k)
        A[k] = end
        R = np.zeros((n, m + 2))
        R[:k] = moments[:k]
        R[k, col] = 1.0
        P = np.linalg.solve(A, R)
    P.setflags(write=False)
    return P


def project_1d(flavor: str, u, cell: tuple[float, float], basis: Basis1D) -> np.ndarray:
    """Coefficients of the projection of u onto P_k(cell) in the reference basis."""
    a, b = cell
    x = 0.5 * (a + b) + 0.5 * (b - a) * _sample_points(basis)
    # end points exactly
    x[-2], x[-1] = a, b
    return projector_matrix(flavor, basis) @ np.asarray(u(x), dtype=float)


def project_2d(which, u, disc: Discretization) -> np.ndarray:
    """Cellwise projection Pi_which of u(x, y) into Q_k, shape (nx, ny, k+1, k+1)."""
    fx, fy = PROJECTORS[_which(which)]
    basis = disc.basis
    mesh = disc.mesh
    ref = _sample_points(basis)
    xs = mesh.x_centers[:, None] + 0.5 * disc.hx[:, None] * ref[None, :]
    ys = mesh.y_centers[:, None] + 0.5 * disc.hy[:, None] * ref[None, :]
    xs[:, -2], xs[:, -1] = mesh.x_edges[:-1], mesh.x_edges[1:]
    ys[:, -2], ys[:, -1] = mesh.y_edges[:-1], mesh.y_edges[1:]
    U = np.asarray(u(xs[:, None, :, None], ys[None, :, None, :]), dtype=float)
    U = np.broadcast_to(U, (mesh.nx, mesh.ny, ref.size, ref.size))
    Px = projector_matrix(fx, basis)
    Py = projector_matrix(fy, basis)
    return np.einsum("ap,bq,ijpq->ijab", Px, Py, U, optimize=True)


def l2_projection_error(coeffs: np.ndarray, u, disc: Discretization) -> float:
    rule = over_rule(disc)
    X, Y = disc.points(rule)
    diff = evaluate_on_rule(coeffs, disc, rule) - u(X, Y)
    w2 = np.outer(rule.weights, rule.weights)
    return float(np.sqrt(np.sum(diff**2 * w2 * disc.jac[:, :, None, None])))


def projection_error_study(which, u, k: int, levels: int, n0: int = 4,
                           domain=(0.0, 1.0, 0.0, 1.0)) -> list[tuple[float, float]]:
    """(h, L2 error of Pi_which u) on uniform meshes with n0 * 2^l cells per side."""
    out = []
    for level in range(levels):
        n = n0 * 2**level
        disc = Discretization.build(build_mesh(*domain, n, n), k)
        out.append((disc.mesh.h_max, l2_projection_error(project_2d(which, u, disc), u, disc)))
    return out
