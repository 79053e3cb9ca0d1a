"""Command-line front end.

Subcommands: check, equilibrium, modal, simulate, verify.  Exit status is 0 on
success, 2 for config errors, 3 for solver failures and 4 when verification
fails.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checks
from .config import SCENARIOS, Scenario, build, load, resolve, to_model  # noqa: F401
from .errors import ConfigError, IntegrationError, SolverError
from .shaft import torsional_frequencies
from .sim import FRAMES, METHODS, integrate, write_trajectory_csv
from .smallsignal import linearize, modal, verdict, write_eigen_csv, write_modal_vectors_csv
from .steady import terminal_quantities

log = logging.getLogger("lagrangian_ssr")

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lagrangian-ssr", description="Lagrangian SSR model: equilibrium, modes, transients.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help=f"config file, or a bundled scenario name {SCENARIOS}")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        return sp

    add("check", "parse and assemble; print matrix summaries")
    add("equilibrium", "solve the operating point; write equilibrium.csv")
    add("modal", "eigenanalysis; write eigen.csv and modal_vectors.csv")
    sim = add("simulate", "time-domain run; write trajectory.csv")
    sim.add_argument("--step", type=float, help="integration step (s)")
    sim.add_argument("--t-end", type=float, help="end time (s)")
    sim.add_argument("--frame", choices=FRAMES)
    sim.add_argument("--method", choices=METHODS)
    sim.add_argument("--decimation", type=int, help="keep every n-th step")
    sim.add_argument("--amplitude", type=float, help="perturbation amplitude (0 starts on the equilibrium)")
    ver = add("verify", "run the oracle suite")
    ver.add_argument("--full", action="store_true", help="longer runs for the time-domain checks")
    return p


def _scenario(path: str) -> Scenario:
    return build(load(resolve(path)))


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_check(args) -> int:
    cfg = load(resolve(args.config))
    m = to_model(cfg)
    em = m.em
    print(f"coordinates: {m.n_e} electrical, {m.n_m} mechanical, {m.n} states")
    print(f"regularized coordinates: {int(em.parasitic.sum())} (eps_c = {cfg.network.eps_c:g} F)")
    print(f"cond(K_C) = {m.mass_condition:.3e}")
    kl_rank = np.linalg.matrix_rank(em.KL)
    print(f"rank(K_L) = {kl_rank} of {m.n_e}")
    if m.machine is not None:
        print(f"cond(L_dq) = {np.linalg.cond(cfg.machine.inductance_dq()):.3e}")
        freqs, _ = torsional_frequencies(m.shaft)
        if freqs.size:
            print("shaft natural frequencies (Hz): " + ", ".join(f"{f:.2f}" for f in freqs))
    return 0


def cmd_equilibrium(args) -> int:
    sc = _scenario(args.config)
    m, eq = sc.model, sc.equilibrium
    labels = m.state_labels("xy")
    names = labels[m.sl_p] + labels[m.sl_t]
    values = np.concatenate([eq.phi, eq.delta])
    print(f"equilibrium: residual {eq.residual_norm:.3e} after {eq.iterations} iterations")
    for n, v in zip(names, values):
        print(f"  {n:>10s} {v: .6g}")
    if m.machine is not None:
        tq = terminal_quantities(m, eq)
        print(f"terminal: |u| = {tq.voltage:.6g} V, |i| = {tq.current:.6g} A, P = {tq.p:.6g} W, Q = {tq.q:.6g} var")
        print(f"source u_s = {m.spec.source.u_s:.6g} V, excitation u_f = {m.spec.u_f:.6g} V")
        print("torques (N m): " + ", ".join(f"{t:.6g}" for t in eq.torque))
    path = _out_dir(args.out) / "equilibrium.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "value"])
        for n, v in zip(names, values):
            w.writerow([n, f"{v:.15g}"])
        for k, t in enumerate(eq.torque):
            w.writerow([f"torque_{k + 1}", f"{t:.15g}"])
    return 0


def cmd_modal(args) -> int:
    sc = _scenario(args.config)
    mr = modal(linearize(sc.model, sc.equilibrium))
    out = _out_dir(args.out)
    write_eigen_csv(mr, out / "eigen.csv")
    write_modal_vectors_csv(mr, out / "modal_vectors.csv")
    print(f"{mr.physical().size} physical and {int(mr.parasitic.sum())} parasitic eigenvalues")
    print(verdict(mr).describe(mr))
    return 0


def cmd_simulate(args) -> int:
    sc = _scenario(args.config)
    s = sc.config.simulation
    s = replace(
        s,
        h=args.step if args.step is not None else s.h,
        t_end=args.t_end if args.t_end is not None else s.t_end,
        frame=args.frame or s.frame,
        method=args.method or s.method,
        decimation=args.decimation or s.decimation,
        amplitude=args.amplitude if args.amplitude is not None else s.amplitude,
    )
    m = sc.model
    x0 = checks.initial_state(sc, s)
    traj = integrate(m, x0, s.frame, s.method, s.h, s.t_end, decimation=s.decimation)
    path = _out_dir(args.out) / "trajectory.csv"
    write_trajectory_csv(traj, m, path)
    print(f"{len(traj)} samples in the {s.frame} frame ({s.method}, h = {s.h:g} s) written to {path}")
    if traj.divergent:
        log.warning("state became non-finite after step %d; output truncated", traj.last_good)
    return 0


def cmd_verify(args) -> int:
    sc = _scenario(args.config)
    results = checks.run_verify(sc, quick=not args.full)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed: " + "; ".join(failed))
        return EXIT_VERIFY
    return 0


COMMANDS = {
    "check": cmd_check,
    "equilibrium": cmd_equilibrium,
    "modal": cmd_modal,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        detail = ""
        if exc.residual is not None:
            detail = f" [residual {exc.residual:.3e}, {exc.iterations} iterations]"
        print(f"solver error: {exc}{detail}", file=sys.stderr)
        return EXIT_SOLVER
    except IntegrationError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
