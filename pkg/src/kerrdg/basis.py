"""Orthonormal Legendre basis and Gauss-Legendre quadrature on [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

MAX_GAUSS_POINTS = 32


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def m(self) -> int:
        return self.nodes.size


def gauss_legendre(m: int) -> QuadratureRule:
    """m-point Gauss-Legendre rule on (-1, 1), exact up to degree 2m-1."""
    if int(m) != m or not 1 <= m <= MAX_GAUSS_POINTS:
        raise ValueError(f"number of Gauss points must be in [1, {MAX_GAUSS_POINTS}], got {m}")
    x, w = legendre.leggauss(int(m))
    # symmetrize away the last-ulp asymmetry of the eigenvalue solver
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(x, w)


def legendre_table(k: int, x) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the orthonormal Legendre functions 0..k at points x.

    Returns two arrays of shape ``x.shape + (k+1,)``.
    """
    x = np.asarray(x, dtype=float)
    scale = np.sqrt(np.arange(k + 1) + 0.5)
    vals = legendre.legvander(x, k) * scale
    ders = np.empty_like(vals)
    for n in range(k + 1):
        c = np.zeros(n + 1)
        c[n] = scale[n]
        ders[..., n] = legendre.legval(x, legendre.legder(c)) if n > 0 else 0.0
    return vals, ders


@dataclass(frozen=True)
class Basis1D:
    """Tables of the degree-k orthonormal basis at the nodes of an m-point rule.

    V[q, n] and D[q, n] hold phi_n and phi_n' at node q; ``left``/``right`` hold
    phi_n(-1) and phi_n(+1).  ``S[p, n]`` is the reference stiffness
    integral of phi_p * phi_n'.
    """

    k: int
    rule: QuadratureRule
    V: np.ndarray
    D: np.ndarray
    left: np.ndarray
    right: np.ndarray
    S: np.ndarray

    @property
    def m(self) -> int:
        return self.rule.m

    @property
    def n_modes(self) -> int:
        return self.k + 1

    @property
    def nodes(self) -> np.ndarray:
        return self.rule.nodes

    @property
    def weights(self) -> np.ndarray:
        return self.rule.weights

    def values_at(self, x) -> np.ndarray:
        return legendre_table(self.k, x)[0]


def build_basis(k: int, m: int | None = None) -> Basis1D:
    """Orthonormal degree-k basis tabulated at an m-point Gauss rule (default m = 2k+2)."""
    if int(k) != k or k < 0:
        raise ValueError(f"polynomial order must be >= 0, got {k}")
    k = int(k)
    if m is None:
        m = 2 * k + 2
    if m < k + 1:
        raise ValueError(f"need at least k+1={k + 1} quadrature points for order {k}, got {m}")
    rule = gauss_legendre(m)
    V, D = legendre_table(k, rule.nodes)
    ends, _ = legendre_table(k, np.array([-1.0, 1.0]))
    S = V.T @ (rule.weights[:, None] * D)
    return Basis1D(k, rule, V, D, ends[0].copy(), ends[1].copy(), S)


def eval_modal_1d(coeffs, basis: Basis1D, x_ref) -> np.ndarray | float:
    """Evaluate sum_n coeffs[n] * phi_n at reference points in [-1, 1]."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.n_modes:
        raise ValueError(f"expected {basis.n_modes} coefficients, got {coeffs.shape[-1]}")
    vals = basis.values_at(x_ref)
    out = vals @ coeffs
    return float(out) if np.ndim(out) == 0 else out
