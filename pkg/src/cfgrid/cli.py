"""Command-line entry point: ``cfgrid powerflow|simulate|analyze|plot``."""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .errors import (CfGridError, ColumnNotFound, EmptyData, EventTargetMissing, SchemaError,
                     SolverError, TopologyError, UnitError)

log = logging.getLogger("cfgrid")

EXIT_USAGE, EXIT_IO, EXIT_SOLVER = 2, 3, 4
FMT = "{:.12g}"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _num(x):
    return FMT.format(float(x))


def _writer(path):
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _close(fh):
    if fh is not sys.stdout:
        fh.close()
    else:
        fh.flush()


def _solver_kwargs(args):
    kw = {}
    if args.tol is not None:
        kw["tol"] = args.tol
    if args.max_iter is not None:
        kw["max_iter"] = args.max_iter
    return kw


def cmd_powerflow(args):
    from .analysis import steady_coefficients
    from .network import parse_case
    from .powerflow import solve_powerflow

    case = parse_case(args.case)
    sol = solve_powerflow(case, **_solver_kwargs(args))
    fh, w = _writer(args.out)
    w.writerow(["bus", "v_mag", "v_ang_deg", "p_inj", "q_inj"])
    S = np.zeros(case.n_bus, dtype=complex)
    for dev in case.devices:
        S[case.bus_index(dev.bus)] += sol.device_power[dev.id]
    for k, b in enumerate(case.buses):
        v = sol.V[k]
        w.writerow([b.id, _num(abs(v)), _num(np.degrees(np.angle(v))), _num(S[k].real), _num(S[k].imag)])
    _close(fh)
    if args.coeffs:
        table = steady_coefficients(sol)
        with open(args.coeffs, "w", newline="") as out:
            cw = csv.writer(out, lineterminator="\n")
            cw.writerow(["bus", "kind", "counterpart", "re", "im"])
            for bus_id, row in table.items():
                for nb, c in row.c_eta.items():
                    cw.writerow([bus_id, "c_eta", nb, _num(c.real), _num(c.imag)])
                cw.writerow([bus_id, "c_xi", bus_id, _num(row.c_xi.real), _num(row.c_xi.imag)])
                for el, c in row.c_chi.items():
                    cw.writerow([bus_id, "c_chi", el, _num(c.real), _num(c.imag)])
    log.info("power flow converged in %d iterations (mismatch %.2e)", sol.iterations, sol.max_mismatch)
    return 0


def cmd_simulate(args):
    from .dynamics import simulate
    from .network import parse_case

    case = parse_case(args.case)
    traj = simulate(case, args.tstop, args.dt, **_solver_kwargs(args))
    if args.out in (None, "-"):
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(traj.header())
        for row in traj.table():
            w.writerow([FMT.format(x) for x in row])
        sys.stdout.flush()
    else:
        traj.to_csv(args.out)
    for e in traj.events:
        log.info("event at t=%.4f s: %s %s, voltage jump %.3e", e.t, e.action, e.target, e.jump)
    return 0


def cmd_analyze(args):
    from .analysis import audit_trajectory, decompose_trajectory, decomposition_rows
    from .dynamics import Trajectory
    from .network import parse_case

    case = parse_case(args.case)
    traj = Trajectory.from_csv(args.traj, case)
    kw = {} if args.eps_sing is None else {"eps_sing": args.eps_sing}
    try:
        dec = decompose_trajectory(traj, args.bus or None, **kw)
    except KeyError as exc:
        raise UsageError(f"unknown bus {exc}") from None
    fh, w = _writer(args.out)
    w.writerow(["time", "bus", "kind", "counterpart", "coef_re", "coef_im", "cf_re", "cf_im"])
    for t, b, kind, other, c, cf in decomposition_rows(dec):
        c, cf = complex(c), complex(cf)
        w.writerow([_num(t), b, kind, other, _num(c.real), _num(c.imag), _num(cf.real), _num(cf.imag)])
    _close(fh)
    if args.report:
        report = audit_trajectory(traj, case, decomposition=dec)
        with open(args.report, "w") as out:
            out.write(report.to_text())
    return 0


def cmd_plot(args):
    from .plot import PlotSpec, render_plot

    where = {}
    for item in args.where or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--where expects column=value, got {item!r}")
        where[key] = value
    spec = PlotSpec(args.csv, args.columns, args.out, title=args.title or "", x=args.x,
                    xlabel=args.xlabel, ylabel=args.ylabel or "", where=where, group=args.group)
    render_plot(spec)
    return 0


def build_parser():
    p = _Parser(prog="cfgrid", description="Power flow, dynamic simulation and complex-frequency "
                                           "decomposition of hybrid AC/DC grids.")
    p.add_argument("--tol", type=float, default=None, help="solver convergence tolerance")
    p.add_argument("--max-iter", type=int, default=None, help="Newton iteration limit")
    p.add_argument("--eps-sing", type=float, default=None, help="admittance singularity threshold")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("powerflow", help="steady state and coefficient table")
    s.add_argument("case")
    s.add_argument("--out", help="bus voltage csv (default stdout)")
    s.add_argument("--coeffs", help="write the steady coefficient table to this csv")
    s.set_defaults(func=cmd_powerflow)

    s = sub.add_parser("simulate", help="time-domain simulation")
    s.add_argument("case")
    s.add_argument("--tstop", type=float, required=True)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--out", help="trajectory csv (default stdout)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", help="decompose a simulated trajectory")
    s.add_argument("case")
    s.add_argument("--traj", required=True)
    s.add_argument("--bus", action="append", help="bus id (repeatable, default all)")
    s.add_argument("--out", help="decomposition csv (default stdout)")
    s.add_argument("--report", help="write the audit report to this file")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("plot", help="render csv columns as an SVG line chart")
    s.add_argument("csv")
    s.add_argument("--columns", nargs="+", required=True, help="column names or glob patterns")
    s.add_argument("--out", required=True)
    s.add_argument("--title")
    s.add_argument("--x", help="x column (default first column)")
    s.add_argument("--xlabel")
    s.add_argument("--ylabel")
    s.add_argument("--where", action="append", help="row filter column=value (repeatable)")
    s.add_argument("--group", help="split series by the values of this column")
    s.set_defaults(func=cmd_plot)
    return p


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message), "exit": code}) + "\n")
    return code


def run(argv=None):
    level = os.environ.get("CFGRID_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.command == "simulate" and not (args.tstop > 0 and args.dt > 0):
            raise UsageError("--tstop and --dt must be positive")
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except (OSError, SchemaError, TopologyError, UnitError, ColumnNotFound, EmptyData,
            EventTargetMissing) as exc:
        return _fail(EXIT_IO, type(exc).__name__, exc)
    except SolverError as exc:
        return _fail(EXIT_SOLVER, type(exc).__name__, exc)
    except CfGridError as exc:
        return _fail(EXIT_SOLVER, type(exc).__name__, exc)


def main():
    sys.exit(run())
