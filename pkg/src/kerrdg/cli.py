"""Command line driver: ``run``, ``converge`` and ``identities`` subcommands."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from kerrdg.config import ConfigError, RunConfig, load_config
from kerrdg.constitutive import cubic_energy_identity_check, midpoint_delta_pointwise
from kerrdg.diagnostics import (
    ENERGY_HEADER,
    convergence_rates,
    l2_difference,
    l2_error_vs_reference,
    source_energy_bound,
)
from kerrdg.fields import Discretization, FieldState, write_snapshot
from kerrdg.mesh import build_mesh
from kerrdg.scenarios import build_scenario
from kerrdg.timestepping import (
    LeapfrogState,
    Solver,
    StepFailure,
    StepPlan,
    Trajectory,
    integrate_semidiscrete_rk4,
    leapfrog_final_fields,
    run_leapfrog,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3
EXIT_ENERGY = 4

log = logging.getLogger("kerrdg")


def make_scenario(cfg: RunConfig):
    params = dict(cfg.scenario_params)
    if cfg.scenario == "gaussian_pulse" and ("center_x" in params or "center_y" in params):
        params["center"] = (params.pop("center_x", 0.5), params.pop("center_y", 0.5))
    try:
        return build_scenario(cfg.scenario, **params)
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from None


@dataclass
class Outcome:
    trajectory: Trajectory
    plan: StepPlan
    fields: FieldState  # E and H at the same time T
    disc: Discretization
    solver: Solver
    bound: tuple[float, float]


def simulate(cfg: RunConfig, scenario=None, on_step=None) -> Outcome:
    scenario = scenario or make_scenario(cfg)
    r, s, p, q = scenario.domain
    disc = Discretization.build(build_mesh(r, s, p, q, cfg.nx, cfg.ny), cfg.order, cfg.quadrature)
    solver = Solver(disc, scenario.material, cfg.c0, scenario.source, cfg.newton_tol, cfg.newton_max_iter)
    plan = StepPlan.make(cfg.final_time, disc.mesh, solver.mat, cfg.order, cfg.dt, cfg.cfl_safety, cfg.c_inv)
    state0 = solver.initial_state(scenario)
    if cfg.integrator == "leapfrog":
        if cfg.start == "exact" and scenario.exact is None:
            raise ConfigError("start", f"scenario {scenario.name!r} has no exact solution")
        traj = run_leapfrog(solver, state0, plan, cfg.start, scenario.exact, on_step)
        fields = leapfrog_final_fields(traj, solver, plan.dt) if plan.n_steps else traj.final
        bound = source_energy_bound(traj.totals("fully"), traj.j_norms_sq, plan.dt, plan.T, "fully_discrete")
        if scenario.source is None:
            bound = (bound[0], 3.0 * traj.energies[0].total_fullydiscrete)
    else:
        traj = integrate_semidiscrete_rk4(solver, state0, plan.dt, plan.n_steps, on_step)
        fields = traj.final
        bound = source_energy_bound(traj.totals("semi"), traj.j_norms_sq, plan.dt, plan.T, "semi_discrete")
    return Outcome(traj, plan, fields, disc, solver, bound)


def _write_energy(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENERGY_HEADER)
        for n, (t, e) in enumerate(zip(traj.times, traj.energies)):
            w.writerow([repr(v) if isinstance(v, float) else v for v in e.row(n, float(t))])


def _echo_config(cfg: RunConfig, out_dir: str) -> None:
    text = cfg.render()
    sys.stdout.write(text)
    with open(os.path.join(out_dir, "effective_config.txt"), "w") as fh:
        fh.write(text)


def cmd_run(cfg: RunConfig) -> int:
    os.makedirs(cfg.output_dir, exist_ok=True)
    _echo_config(cfg, cfg.output_dir)
    prefix = os.path.join(cfg.output_dir, cfg.output_snapshots)
    stride = cfg.output_stride

    def on_step(n, s):
        step = n + 1
        if stride and step % stride == 0:
            hz = s.H_half if isinstance(s, LeapfrogState) else s.Hz
            write_snapshot(f"{prefix}_{step:06d}.csv", FieldState(s.Ex, s.Ey, hz))

    scenario = make_scenario(cfg)
    try:
        out = simulate(cfg, scenario, on_step)
    except StepFailure as exc:
        print(f"error: step {exc.step} failed: {exc.cause}", file=sys.stderr)
        return EXIT_FAILURE
    traj = out.trajectory
    _write_energy(os.path.join(cfg.output_dir, cfg.output_energy), traj)
    write_snapshot(f"{prefix}_final.csv", traj.final)
    kind = "fully" if cfg.integrator == "leapfrog" else "semi"
    totals = traj.totals(kind)
    e0, eN = float(totals[0]), float(totals[-1])
    ratio = eN / e0 if e0 > 0 else float("nan")
    lhs, rhs = out.bound
    status = EXIT_OK
    if not (math.isfinite(lhs) and lhs <= rhs * (1 + 1e-12)):
        print(f"error: energy bound violated: max energy {lhs!r} > bound {rhs!r}", file=sys.stderr)
        status = EXIT_ENERGY
    print(f"steps={out.plan.n_steps} dt={out.plan.dt!r} newton_max_iter={traj.newton_max_iterations}")
    print(f"E_h^0={e0!r} E_h^N={eN!r} ratio={ratio!r}")
    return status


def _level_config(cfg: RunConfig, axis: str, level: int) -> RunConfig:
    f = 2**level
    if axis == "space":
        return replace(cfg, nx=cfg.nx * f, ny=cfg.ny * f, dt=None if cfg.dt is None else cfg.dt / f)
    return replace(cfg, dt=_base_dt(cfg) / f)


def _base_dt(cfg: RunConfig) -> float:
    if cfg.dt is not None:
        return cfg.dt
    scenario = make_scenario(cfg)
    r, s, p, q = scenario.domain
    disc = Discretization.build(build_mesh(r, s, p, q, cfg.nx, cfg.ny), cfg.order, cfg.quadrature)
    mat = scenario.material.on(disc)
    return StepPlan.make(cfg.final_time, disc.mesh, mat, cfg.order, None, cfg.cfl_safety, cfg.c_inv).dt


def convergence_study(cfg: RunConfig, axis: str, levels: int, reference: str | None = None):
    """Rows (level, h or dt, err_Ex, err_Ey, err_Hz, order, newton_iters) of a refinement ladder.

    ``reference='exact'`` compares with the scenario's exact solution.
    ``reference='successive'`` (time axis) compares each level with the next
    finer one on the same mesh, which removes the fixed spatial error from the
    temporal rate; it costs one extra run.
    """
    if axis not in ("space", "time"):
        raise ValueError(f"axis must be space or time, got {axis!r}")
    if levels < 2:
        raise ValueError("need at least two levels")
    reference = reference or ("exact" if axis == "space" else "successive")
    if reference not in ("exact", "successive"):
        raise ValueError(f"unknown reference {reference!r}")
    if reference == "successive" and axis != "time":
        raise ValueError("successive differences are only meaningful on the time axis")
    scenario = make_scenario(cfg)
    if reference == "exact" and scenario.exact is None:
        raise ConfigError("scenario", f"{scenario.name!r} has no exact solution")
    runs = levels + 1 if reference == "successive" else levels
    outs = [simulate(_level_config(cfg, axis, level), scenario) for level in range(runs)]
    rows = []
    for level in range(levels):
        out = outs[level]
        if reference == "exact":
            errs = l2_error_vs_reference(out.fields, scenario.exact, scenario.material, out.disc)
        else:
            errs = l2_difference(out.fields, outs[level + 1].fields, scenario.material, out.disc)
        size = out.disc.mesh.h_max if axis == "space" else out.plan.dt
        rows.append([level, size, *errs, out.trajectory.newton_max_iterations])
    totals = [(r[1], math.sqrt(sum(e * e for e in r[2:5]))) for r in rows]
    orders = [float("nan")] + convergence_rates(totals)
    return [r[:5] + [o] + [r[5]] for r, o in zip(rows, orders)]


def cmd_converge(cfg: RunConfig, axis: str, levels: int, reference: str) -> int:
    os.makedirs(cfg.output_dir, exist_ok=True)
    _echo_config(cfg, cfg.output_dir)
    try:
        rows = convergence_study(cfg, axis, levels, reference)
    except StepFailure as exc:
        print(f"error: step {exc.step} failed: {exc.cause}", file=sys.stderr)
        return EXIT_FAILURE
    header = ["level", "h" if axis == "space" else "dt", "err_Ex", "err_Ey", "err_Hz", "order"]
    path = os.path.join(cfg.output_dir, f"convergence_{axis}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:6]])
    print(",".join(header))
    for r in rows:
        print(f"{r[0]},{r[1]:.6g},{r[2]:.6e},{r[3]:.6e},{r[4]:.6e},{r[5]:.3f}")
    return EXIT_OK


def cmd_identities(samples: int, seed: int) -> int:
    """Check the quartic-energy and midpoint telescoping identities on random inputs."""
    rng = np.random.default_rng(seed)
    E = rng.standard_normal((2, samples))
    Ed = rng.standard_normal((2, samples))
    lhs, rhs = cubic_energy_identity_check(E, Ed)
    cubic = float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1e-300)))
    old, new = rng.standard_normal((2, 2, samples))
    eps_lin = rng.uniform(0.5, 3.0, samples)
    eps_nl = rng.uniform(0.0, 3.0, samples)
    fx, fy = midpoint_delta_pointwise(old[0], old[1], new[0], new[1], eps_lin, eps_nl)
    dot = fx * (new[0] + old[0]) + fy * (new[1] + old[1])
    n2, o2 = (new**2).sum(0), (old**2).sum(0)
    want = eps_lin * (n2 - o2) + 1.5 * eps_nl * (n2 * n2 - o2 * o2)
    scale = eps_lin * (n2 + o2) + 1.5 * eps_nl * (n2 * n2 + o2 * o2)
    tele = float(np.max(np.abs(dot - want) / scale))
    print(f"samples={samples} seed={seed}")
    print(f"cubic_identity_max_rel={cubic!r}")
    print(f"telescoping_max_rel={tele!r}")
    return EXIT_OK if max(cubic, tele) <= 1e-11 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kerrdg", description=__doc__)
    parser.add_argument("--threads", type=int, default=None, help="BLAS thread count (default: all cores)")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("config")
    p = sub.add_parser("converge", help="refinement study against a reference")
    p.add_argument("config")
    p.add_argument("--axis", choices=("space", "time"), default="space")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--reference", choices=("exact", "successive"), default=None,
                   help="error reference (default: exact for space, successive for time)")
    p = sub.add_parser("identities", help="randomized algebraic identity checks")
    p.add_argument("--samples", type=int, default=100_000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    with threadpool_limits(limits=args.threads):
        if args.command == "identities":
            return cmd_identities(args.samples, args.seed)
        try:
            cfg = load_config(args.config)
            if args.command == "run":
                return cmd_run(cfg)
            if args.levels < 2:
                raise ConfigError("--levels", "need at least 2 levels")
            return cmd_converge(cfg, args.axis, args.levels, args.reference)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
