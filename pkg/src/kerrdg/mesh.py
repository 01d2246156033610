"""Cartesian tensor-product meshes of a rectangle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Partition of (r, s) x (p, q) into cells K_ij = I_i x J_j.

    Cell (i, j) spans ``x_edges[i]..x_edges[i+1]`` and ``y_edges[j]..y_edges[j+1]``;
    ``i`` runs along x and varies fastest in any flattened cell ordering.
    """

    x_edges: np.ndarray
    y_edges: np.ndarray

    def __post_init__(self):
        for name in ("x_edges", "y_edges"):
            e = np.asarray(getattr(self, name), dtype=float)
            if e.ndim != 1 or e.size < 2:
                raise ValueError(f"{name} needs at least two entries")
            if not np.all(np.isfinite(e)):
                raise ValueError(f"{name} must be finite")
            if not np.all(np.diff(e) > 0):
                raise ValueError(f"{name} must be strictly increasing")
            e.setflags(write=False)
            object.__setattr__(self, name, e)

    @property
    def nx(self) -> int:
        return self.x_edges.size - 1

    @property
    def ny(self) -> int:
        return self.y_edges.size - 1

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def hx(self) -> np.ndarray:
        return np.diff(self.x_edges)

    @property
    def hy(self) -> np.ndarray:
        return np.diff(self.y_edges)

    @property
    def h_max(self) -> float:
        return float(max(self.hx.max(), self.hy.max()))

    @property
    def h_min(self) -> float:
        return float(min(self.hx.min(), self.hy.min()))

    @property
    def domain(self) -> tuple[float, float, float, float]:
        return (
            float(self.x_edges[0]),
            float(self.x_edges[-1]),
            float(self.y_edges[0]),
            float(self.y_edges[-1]),
        )

    @property
    def x_centers(self) -> np.ndarray:
        return 0.5 * (self.x_edges[1:] + self.x_edges[:-1])

    @property
    def y_centers(self) -> np.ndarray:
        return 0.5 * (self.y_edges[1:] + self.y_edges[:-1])


def build_mesh(r: float, s: float, p: float, q: float, nx: int, ny: int) -> Mesh:
    """Uniform nx-by-ny mesh of (r, s) x (p, q)."""
    if not (r < s and p < q):
        raise ValueError(f"degenerate domain ({r}, {s}) x ({p}, {q})")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    x = np.linspace(r, s, int(nx) + 1)
    y = np.linspace(p, q, int(ny) + 1)
    # pin the end points exactly
    x[0], x[-1], y[0], y[-1] = r, s, p, q
    return Mesh(x, y)


def mesh_from_edges(x_edges, y_edges) -> Mesh:
    """Non-uniform mesh from explicit edge lists."""
    return Mesh(np.asarray(x_edges, dtype=float), np.asarray(y_edges, dtype=float))


def shape_regularity(mesh: Mesh) -> float:
    """Largest ratio hx*hy / inradius over all cells (diagnostic only)."""
    hx = mesh.hx[:, None]
    hy = mesh.hy[None, :]
    rho = 0.5 * np.minimum(hx, hy)
    return float(np.max(hx * hy / rho))
