"""Command line interface.

Subcommands: simulate, optimize, gradcheck, taylor, verify, kernel-info.
Every command exits 0 on success and nonzero on any failing check or
error, with failures enumerated on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import control as ctl
from . import forward as fwd
from . import linearized as lin
from .config import build_problem, load_config, realize_field
from .errors import NonFinite, ParseError, ValidationError
from .fieldio import write_csv, write_snapshot
from .grid import h1, l2
from .kernel import kernel_report
from .verify import gradient_check_table, run_verify


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "out_dir", None) is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out_dir)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args)
    problem = build_problem(cfg)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    try:
        traj = fwd.solve_state(problem.init, problem.theta, problem.params)
    except NonFinite as exc:
        print(f"simulate failed: {exc}", file=sys.stderr)
        return 1

    g = problem.grid
    rows = []
    for n in range(problem.params.nt + 1):
        m, phi = traj.m[n], traj.phi[n]
        rows.append((
            n,
            float(traj.times[n]),
            float(np.sum(m)) * g.cell_area,
            float(np.sum(phi)) * g.cell_area,
            l2(g, m),
            l2(g, phi),
            h1(g, m),
            h1(g, phi),
            max(float(np.max(np.abs(m) - np.abs(phi))), 0.0),
            max(float(np.max(np.abs(phi) - 1.0)), 0.0),
        ))
    write_csv(
        os.path.join(out, "series.csv"),
        "n,t,mass_m,mass_phi,l2_m,l2_phi,h1_m,h1_phi,viol_m,viol_phi",
        rows,
    )
    stride = cfg.snapshot_stride
    if stride > 0:
        for n in range(0, problem.params.nt + 1, stride):
            write_snapshot(os.path.join(out, f"m_{n:06d}.mcf"), g, float(traj.times[n]), traj.m[n])
            write_snapshot(os.path.join(out, f"phi_{n:06d}.mcf"), g, float(traj.times[n]), traj.phi[n])
        if problem.params.nt % stride != 0:
            n = problem.params.nt
            write_snapshot(os.path.join(out, f"m_{n:06d}.mcf"), g, float(traj.times[n]), traj.m[n])
            write_snapshot(os.path.join(out, f"phi_{n:06d}.mcf"), g, float(traj.times[n]), traj.phi[n])
    print(f"simulate: {problem.params.nt} steps written to {out}")
    return 0


def cmd_optimize(args) -> int:
    cfg = _load(args)
    problem = build_problem(cfg, need_target=True)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    opt = ctl.OptConfig(
        max_iters=cfg.max_iters, step0=cfg.step0, shrink=cfg.shrink,
        c1=cfg.c1, tol=cfg.tol,
    )
    res = ctl.pgd_optimize(
        problem.init, problem.control(), problem.phi_d, problem.params, cfg.delta, opt
    )
    steps = res.step_history + [float("nan")]
    write_csv(
        os.path.join(out, "opt_history.csv"),
        "iter,cost,misfit,reg,stationarity,step",
        [
            (i, res.cost_history[i], res.misfit_history[i], res.reg_history[i],
             res.stationarity_history[i], steps[i] if i < len(steps) else float("nan"))
            for i in range(len(res.cost_history))
        ],
    )
    for n in range(problem.params.nt):
        write_snapshot(
            os.path.join(out, f"theta_{n:06d}.mcf"),
            problem.grid, n * problem.params.dt, res.theta_opt[n],
        )
    with open(os.path.join(out, "result.txt"), "w", encoding="ascii") as fh:
        fh.write(f"termination: {res.termination}\n")
        fh.write(f"iterations: {res.iterations}\n")
        fh.write(f"final_cost: {res.cost_history[-1]!r}\n")
        fh.write(f"final_misfit: {res.misfit_history[-1]!r}\n")
        fh.write(f"final_stationarity: {res.stationarity_history[-1]!r}\n")
    print(
        f"optimize: {res.termination} after {res.iterations} iterations, "
        f"cost {res.cost_history[0]:.6e} -> {res.cost_history[-1]:.6e}"
    )
    if res.termination == "line_search_failed":
        print("optimize: line search failed before reaching tolerance", file=sys.stderr)
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _load(args)
    problem = build_problem(cfg)
    table = gradient_check_table(problem, n_directions=5, eps=1e-5)
    print("direction,fd,adjoint,rel_error")
    for i, fd_val, adj_val, rel in table:
        print(f"{i},{fd_val!r},{adj_val!r},{rel!r}")
    worst = max(row[3] for row in table)
    if worst > 1e-6:
        print(f"gradcheck failed: worst relative error {worst:.3e} > 1e-06", file=sys.stderr)
        return 1
    return 0


def cmd_taylor(args) -> int:
    cfg = _load(args)
    problem = build_problem(cfg)
    h0 = realize_field(problem.grid, args.direction, cfg.seed, "control.theta")
    h = np.broadcast_to(h0, (problem.params.nt, *problem.grid.shape)).copy()
    out = lin.taylor_test(problem.init, problem.theta, h, problem.params)
    print("eps,remainder,first_order_quotient")
    for e, r, q in zip(out["eps"], out["remainders"], out["first_order_quotients"]):
        print(f"{e!r},{r!r},{q!r}")
    print("orders," + ",".join(repr(o) for o in out["orders"]))
    worst = max(abs(o - 2.0) for o in out["orders"])
    if worst > 0.1:
        print(f"taylor failed: orders deviate from 2 by {worst:.3f}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args)
    report = run_verify(cfg)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    report.to_csv(os.path.join(out, "verify_report.csv"))
    for line in report.lines():
        print(line)
    if not report.all_passed:
        for r in report.rows:
            if not r.passed:
                print(f"verify failed: {r.name} ({r.note})" if r.note
                      else f"verify failed: {r.name}", file=sys.stderr)
        return 1
    return 0


def cmd_kernel_info(args) -> int:
    cfg = _load(args)
    problem = build_problem(cfg)
    for key, value in kernel_report(problem.kernel).items():
        print(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="morphoctl",
        description="Nonlocal two-phase/solvent solver with adjoint optimal control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **extra):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--seed", type=int, default=None)
        for flag, kw in extra.items():
            p.add_argument(flag, **kw)
        p.set_defaults(fn=fn)

    add("simulate", cmd_simulate)
    add("optimize", cmd_optimize)
    add("gradcheck", cmd_gradcheck)
    add("taylor", cmd_taylor, **{"--direction": {"default": "cosine:1,1,1"}})
    add("verify", cmd_verify)
    add("kernel-info", cmd_kernel_info)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonFinite as exc:
        print(f"solver blow-up: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
