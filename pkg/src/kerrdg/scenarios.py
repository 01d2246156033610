"""Built-in problems: PEC cavity eigenmode, Kerr manufactured solution, Gaussian pulse and the zero field."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from kerrdg.fields import Material

UNIT_SQUARE = (0.0, 1.0, 0.0, 1.0)

Fields = Callable[[np.ndarray, np.ndarray, float], tuple]


@dataclass(frozen=True)
class Scenario:
    """A problem on a rectangle: material, initial fields, optional exact solution and current.

    ``exact`` and ``source`` take (x, y, t) and return (Ex, Ey, Hz) and (Jx, Jy).
    ``initial`` takes (x, y) and returns (Ex, Ey, Hz) at t = 0.
    """

    name: str
    material: Material
    initial: Callable
    exact: Optional[Fields] = None
    source: Optional[Fields] = None
    domain: tuple = UNIT_SQUARE
    notes: str = ""
    params: dict = field(default_factory=dict)

    def initial_component(self, c: int):
        return lambda x, y: self.initial(x, y)[c]


def _zeros_like(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def zero(eps0=1.0, mu0=1.0, chi1=0.0, chi3=0.0) -> Scenario:
    mat = Material(eps0, mu0, chi1, chi3)

    def exact(x, y, t):
        z = _zeros_like(x, y)
        return z, z, z

    return Scenario("zero", mat, lambda x, y: exact(x, y, 0.0), exact, None, notes="identically zero")


def cavity_mode(m: int = 1, n: int = 1, eps_r: float = 1.0, mu0: float = 1.0, chi3: float = 0.0) -> Scenario:
    """TE_mn eigenmode of the PEC unit square; exact only when chi3 = 0."""
    if m < 0 or n < 0 or (m == 0 and n == 0):
        raise ValueError(f"cavity mode needs (m, n) nonnegative and not both zero, got ({m}, {n})")
    if eps_r <= 0 or mu0 <= 0:
        raise ValueError("eps_r and mu0 must be positive")
    eps = eps_r
    omega = math.pi * math.sqrt((m * m + n * n) / (eps * mu0))
    a, b = m * math.pi, n * math.pi

    def fields(x, y, t):
        cx, sx = np.cos(a * x), np.sin(a * x)
        cy, sy = np.cos(b * y), np.sin(b * y)
        ex = -(b / (eps * omega)) * cx * sy * math.sin(omega * t)
        ey = (a / (eps * omega)) * sx * cy * math.sin(omega * t)
        hz = cx * cy * math.cos(omega * t)
        return ex, ey, hz

    return Scenario(
        "cavity", Material(eps_r, mu0, 0.0, chi3), lambda x, y: fields(x, y, 0.0),
        fields if chi3 == 0 else None, None,
        notes=f"omega = {omega!r}", params={"m": m, "n": n, "eps_r": eps_r, "omega": omega},
    )


def manufactured_kerr(amplitude: float = 1.0, eps0: float = 1.0, mu0: float = 1.0,
                      chi1: float = 1.0, chi3: float = 1.0) -> Scenario:
    """Divergence-free standing wave solving the full Kerr system with a closed-form current.

    E = A (cos(pi x) sin(pi y), -sin(pi x) cos(pi y)) cos t and
    H = (2 pi A / mu0) cos(pi x) cos(pi y) sin t satisfy Faraday's law exactly;
    J = dD/dt - curl H then closes Ampere's law.
    """
    A = amplitude
    pi = math.pi

    def shape(x, y):
        return A * np.cos(pi * x) * np.sin(pi * y), -A * np.sin(pi * x) * np.cos(pi * y)

    def fields(x, y, t):
        ux, uy = shape(x, y)
        hz = (2 * pi * A / mu0) * np.cos(pi * x) * np.cos(pi * y) * math.sin(t)
        return ux * math.cos(t), uy * math.cos(t), hz

    def source(x, y, t):
        ux, uy = shape(x, y)
        c, s = math.cos(t), math.sin(t)
        u2 = ux * ux + uy * uy
        # D = eps0 ((1+chi1) u c + chi3 |u|^2 u c^3)
        factor = -eps0 * s * ((1 + chi1) + 3 * chi3 * u2 * c * c)
        k = 2 * pi * pi * A / mu0 * s
        dy_h = -k * np.cos(pi * x) * np.sin(pi * y)
        dx_h = -k * np.sin(pi * x) * np.cos(pi * y)
        return factor * ux - dy_h, factor * uy + dx_h

    return Scenario(
        "manufactured_kerr", Material(eps0, mu0, chi1, chi3), lambda x, y: fields(x, y, 0.0),
        fields, source, notes="closed-form source", params={"amplitude": A},
    )


def gaussian_pulse(center=(0.5, 0.5), width: float = 0.1, amplitude: float = 1.0,
                   eps0: float = 1.0, mu0: float = 1.0, chi1: float = 0.0, chi3: float = 1.0) -> Scenario:
    """H_z = A exp(-|x - c|^2 / w^2) with E = 0; no exact solution."""
    if width <= 0:
        raise ValueError("pulse width must be positive")
    cx, cy = center

    def initial(x, y):
        hz = amplitude * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width**2)
        z = np.zeros_like(hz)
        return z, z, hz

    return Scenario(
        "gaussian_pulse", Material(eps0, mu0, chi1, chi3), initial, None, None,
        notes="stability exercise", params={"center": (cx, cy), "width": width, "amplitude": amplitude},
    )


BUILDERS = {
    "cavity": cavity_mode,
    "manufactured_kerr": manufactured_kerr,
    "gaussian_pulse": gaussian_pulse,
    "zero": zero,
}


def build_scenario(name: str, **params) -> Scenario:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(BUILDERS)}") from None
    return builder(**params)


__all__ = ["Material", "Scenario", "build_scenario", "cavity_mode", "gaussian_pulse", "manufactured_kerr", "zero"]
