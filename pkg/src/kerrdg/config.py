"""Run configuration: flat ``key=value`` documents with dotted keys, validated against a schema."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


ALIASES = {
    "k": "order",
    "Nx": "mesh.nx",
    "Ny": "mesh.ny",
    "m": "quadrature",
    "T": "final_time",
    "newton_tol": "newton.tol",
}

INTEGRATORS = ("leapfrog", "rk4_reference")
STARTS = ("taylor", "exact")


def _int(lo=None):
    def conv(key, raw):
        try:
            v = int(raw)
        except ValueError:
            raise ConfigError(key, f"expected an integer, got {raw!r}") from None
        if lo is not None and v < lo:
            raise ConfigError(key, f"must be >= {lo}, got {v}")
        return v
    return conv


def _float(lo=None, strict=False, hi=None):
    def conv(key, raw):
        try:
            v = float(raw)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {raw!r}") from None
        if not math.isfinite(v):
            raise ConfigError(key, f"must be finite, got {raw!r}")
        if lo is not None and (v <= lo if strict else v < lo):
            raise ConfigError(key, f"must be {'>' if strict else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            raise ConfigError(key, f"must be <= {hi}, got {v}")
        return v
    return conv


def _dt(key, raw):
    # "cfl" is what the effective config echoes when no step was given
    return None if raw == "cfl" else _float(0.0, strict=True)(key, raw)


def _choice(options):
    def conv(key, raw):
        if raw not in options:
            raise ConfigError(key, f"expected one of {', '.join(options)}, got {raw!r}")
        return raw
    return conv


def _str(key, raw):
    if not raw:
        raise ConfigError(key, "must not be empty")
    return raw


# key -> (converter, default); None default means "unset"
SCHEMA = {
    "scenario": (_str, None),
    "mesh.nx": (_int(1), None),
    "mesh.ny": (_int(1), None),
    "order": (_int(0), 1),
    "quadrature": (_int(1), None),
    "c0": (_float(0.0), 0.5),
    "dt": (_dt, None),
    "cfl_safety": (_float(0.0, strict=True, hi=1.0), None),
    "final_time": (_float(0.0), None),
    "c_inv": (_float(0.0, strict=True), None),
    "integrator": (_choice(INTEGRATORS), "leapfrog"),
    "start": (_choice(STARTS), "taylor"),
    "newton.tol": (_float(0.0, strict=True), 1e-12),
    "newton.max_iter": (_int(1), 50),
    "output.dir": (_str, "run_output"),
    "output.energy": (_str, "energy.csv"),
    "output.snapshots": (_str, "snapshot"),
    "output.stride": (_int(0), 0),
}

# per-scenario parameters, all numeric
SCENARIO_PARAMS = {
    "cavity": {"m": _int(0), "n": _int(0), "eps_r": _float(0.0, True), "mu0": _float(0.0, True),
               "chi3": _float(0.0)},
    "manufactured_kerr": {"amplitude": _float(), "eps0": _float(0.0, True), "mu0": _float(0.0, True),
                          "chi1": _float(0.0), "chi3": _float(0.0)},
    "gaussian_pulse": {"center_x": _float(), "center_y": _float(), "width": _float(0.0, True),
                       "amplitude": _float(), "eps0": _float(0.0, True), "mu0": _float(0.0, True),
                       "chi1": _float(0.0), "chi3": _float(0.0)},
    "zero": {"eps0": _float(0.0, True), "mu0": _float(0.0, True), "chi1": _float(0.0), "chi3": _float(0.0)},
}

REQUIRED = ("scenario", "mesh.nx", "final_time")


@dataclass
class RunConfig:
    scenario: str
    scenario_params: dict
    nx: int
    ny: int
    order: int
    quadrature: int
    c0: float
    dt: float | None
    cfl_safety: float
    final_time: float
    c_inv: float
    integrator: str
    start: str
    newton_tol: float
    newton_max_iter: int
    output_dir: str
    output_energy: str
    output_snapshots: str
    output_stride: int
    warnings: list = field(default_factory=list)

    def effective(self) -> dict:
        """The fully resolved key=value view, in a fixed order."""
        out = {"scenario": self.scenario}
        for k in sorted(self.scenario_params):
            out[f"scenario.{k}"] = self.scenario_params[k]
        out.update({
            "mesh.nx": self.nx, "mesh.ny": self.ny, "order": self.order, "quadrature": self.quadrature,
            "c0": self.c0, "dt": "cfl" if self.dt is None else self.dt, "cfl_safety": self.cfl_safety,
            "final_time": self.final_time, "c_inv": self.c_inv, "integrator": self.integrator,
            "start": self.start, "newton.tol": self.newton_tol, "newton.max_iter": self.newton_max_iter,
            "output.dir": self.output_dir, "output.energy": self.output_energy,
            "output.snapshots": self.output_snapshots, "output.stride": self.output_stride,
        })
        return out

    def render(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.effective().items())


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def parse_pairs(text: str) -> list[tuple[int, str, str]]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        pairs.append((lineno, key, value))
    return pairs


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Validate a document and apply defaults; every error names the offending key."""
    raw: dict[str, str] = {}
    params_raw: dict[str, str] = {}
    entries = [(ln, k, v) for ln, k, v in parse_pairs(text)]
    entries += [(0, k, str(v)) for k, v in (overrides or {}).items()]
    for _, key, value in entries:
        key = ALIASES.get(key, key)
        if key.startswith("scenario."):
            params_raw[key.removeprefix("scenario.")] = value
        elif key in SCHEMA:
            raw[key] = value
        else:
            raise ConfigError(key, "unknown key")

    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(key, "required key is missing")
    vals = {}
    for key, (conv, default) in SCHEMA.items():
        vals[key] = conv(key, raw[key]) if key in raw else default

    name = vals["scenario"]
    if name not in SCENARIO_PARAMS:
        raise ConfigError("scenario", f"unknown scenario {name!r}; choose from {', '.join(sorted(SCENARIO_PARAMS))}")
    schema = SCENARIO_PARAMS[name]
    params = {}
    for p, value in params_raw.items():
        if p not in schema:
            raise ConfigError(f"scenario.{p}", f"unknown parameter for scenario {name!r}")
        params[p] = schema[p](f"scenario.{p}", value)

    k = vals["order"]
    m = vals["quadrature"] if vals["quadrature"] is not None else 2 * k + 2
    if m < k + 1:
        raise ConfigError("quadrature", f"needs at least order + 1 = {k + 1} nodes, got {m}")
    if m > 32:
        raise ConfigError("quadrature", f"at most 32 nodes are supported, got {m}")
    ny = vals["mesh.ny"] if vals["mesh.ny"] is not None else vals["mesh.nx"]

    warnings = []
    if vals["dt"] is not None and raw.get("cfl_safety") is not None:
        msg = "both dt and cfl_safety given; dt takes precedence"
        log.warning(msg)
        warnings.append(msg)
    c_inv = vals["c_inv"] if vals["c_inv"] is not None else float((k + 1) ** 2)
    return RunConfig(
        scenario=name, scenario_params=params, nx=vals["mesh.nx"], ny=ny, order=k, quadrature=m,
        c0=vals["c0"], dt=vals["dt"], cfl_safety=vals["cfl_safety"] if vals["cfl_safety"] is not None else 0.9,
        final_time=vals["final_time"], c_inv=c_inv, integrator=vals["integrator"], start=vals["start"],
        newton_tol=vals["newton.tol"], newton_max_iter=vals["newton.max_iter"],
        output_dir=vals["output.dir"], output_energy=vals["output.energy"],
        output_snapshots=vals["output.snapshots"], output_stride=vals["output.stride"], warnings=warnings,
    )


def load_config(path, overrides: dict | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), overrides)
