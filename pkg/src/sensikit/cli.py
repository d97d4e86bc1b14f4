"""Command-line front end emitting JSON reports."""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .barrier import barrier_kkt_sensitivity, barrier_sensitivity, find_interior, sumt_solve
from .conic import conic_sensitivity, load_conic, residual_map, HSDPoint, solve_polyhedral
from .data import fixture_path
from .directional import degenerate_directional, directional_qp
from .errors import RegimeError, RegularityError, SensikitError
from .kkt import check_cq, classify_active, kkt_residual
from .oracle import fd_directional, fd_jacobian, fd_value, solve_nlp
from .parse import parse_problem
from .path import HomotopySchedule, follow_path
from .report import COMMANDS, dumps, make_report, validate_report
from .sensitivity import fiacco_jacobian
from .value import dini_bounds, value_directional, value_gradient_hessian

EXIT_OK, EXIT_INPUT, EXIT_REGULARITY = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def parse_vector(text, name=None):
    """'p=[0, 1]', '[0, 1]', '0,1' or 'p=0' as a float array."""
    s = text.strip()
    if "=" in s:
        key, s = (part.strip() for part in s.split("=", 1))
        if name is not None and key != name:
            raise InputError(f"expected '{name}=[...]', got '{text}'")
    try:
        val = json.loads(s) if s.startswith("[") else [float(v) for v in s.split(",") if v.strip()]
        arr = np.asarray(val, dtype=float)
    except (ValueError, TypeError) as exc:
        raise InputError(f"cannot read a numeric vector from '{text}'") from exc
    if arr.ndim > 1 or arr.size == 0:
        raise InputError(f"'{text}' is not a non-empty vector")
    return arr.reshape(-1)


def parse_matrix(text):
    try:
        arr = np.asarray(json.loads(text), dtype=float)
    except (ValueError, TypeError) as exc:
        raise InputError(f"cannot read a numeric matrix from '{text}'") from exc
    if arr.ndim != 2:
        raise InputError(f"'{text}' is not a nested list matrix")
    return arr


def _read_source(path):
    p = Path(path)
    if p.exists():
        return p.read_text()
    fx = fixture_path(path)
    if fx.is_file():
        return fx.read_text()
    raise InputError(f"no such problem file or fixture: {path}")


def _load_nlp(args):
    nlp = parse_problem(_read_source(args.problem))
    p = nlp.p_default() if args.at is None else parse_vector(args.at, "p")
    if p.size != nlp.ell:
        raise InputError(f"--at has {p.size} entries, problem has {nlp.ell} parameters")
    return nlp, p


def _direction(args, nlp):
    if args.direction is None:
        return None
    h = parse_vector(args.direction, "h")
    if h.size != nlp.ell:
        raise InputError(f"--direction has {h.size} entries, problem has {nlp.ell} parameters")
    return h


def _solution_section(sol):
    pt = sol.point
    return {"x": pt.x, "y": pt.y, "z": pt.z, "value": sol.value}


def _active_section(nlp, pt):
    info = classify_active(nlp, pt, check=False)
    return {"active": list(info.active), "strongly_active": list(info.strongly_active),
            "weakly_active": list(info.weakly_active)}


def _base(nlp, p):
    sol = solve_nlp(nlp, p)
    pt = sol.point
    return sol, {"parameters": p, "solution": _solution_section(sol),
                 "kkt_residual": kkt_residual(nlp, pt).as_dict(), "active": _active_section(nlp, pt)}


def _schedule(args):
    return None if args.r_schedule is None else [float(r) for r in parse_vector(args.r_schedule)]


def _max_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b), initial=0.0))


# -- commands --------------------------------------------------------------------

def cmd_solve(args):
    nlp, p = _load_nlp(args)
    sol, out = _base(nlp, p)
    sched = _schedule(args)
    if sched is not None:
        _, trail = sumt_solve(nlp, p, find_interior(nlp, p), r_schedule=sched)
        out["barrier"] = {"stages": [dict(s.as_dict(), x=s.x) for s in trail]}
    return nlp.name, out


def cmd_analyze(args):
    nlp, p = _load_nlp(args)
    sol, out = _base(nlp, p)
    out["cq"] = check_cq(nlp, sol.point).as_dict()
    return nlp.name, out


def cmd_diff(args):
    nlp, p = _load_nlp(args)
    sol, out = _base(nlp, p)
    pt = sol.point
    cq = check_cq(nlp, pt)
    out["cq"] = cq.as_dict()
    if args.degenerate:
        h = _direction(args, nlp)
        dirs = [h] if h is not None else list(np.eye(nlp.ell))
        res = [degenerate_directional(nlp, pt, d, cq=cq) for d in dirs]
        out["directional"] = {"regime": "degenerate", "results": [r.as_dict() for r in res]}
        if args.oracle:
            est = [fd_directional(nlp, p, d, base=sol).estimate for d in dirs]
            out["oracle"] = {"dx_fd": est, "max_error": max(_max_err(r.dx, e) for r, e in zip(res, est))}
    else:
        sens = fiacco_jacobian(nlp, pt, cq=cq)
        out["sensitivity"] = sens.as_dict()
        if args.oracle:
            Jx, Jy, Jz = fd_jacobian(nlp, p, base=sol)
            out["oracle"] = {"J_x": Jx, "J_y": Jy, "J_z": Jz,
                             "max_error": max(_max_err(sens.J_x, Jx), _max_err(sens.J_y, Jy),
                                              _max_err(sens.J_z, Jz))}
    barrier = {}
    if args.mu is not None:
        barrier["kkt_form"] = barrier_kkt_sensitivity(nlp, pt, args.mu).as_dict()
    sched = _schedule(args)
    if sched is not None:
        _, trail = sumt_solve(nlp, p, find_interior(nlp, p), r_schedule=sched)
        barrier["path"] = [barrier_sensitivity(nlp, s, p).as_dict() for s in trail]
    if barrier:
        out["barrier"] = barrier
    return nlp.name, out


def cmd_directional(args):
    nlp, p = _load_nlp(args)
    h = _direction(args, nlp)
    if h is None:
        raise InputError("directional needs --direction h=[...]")
    sol, out = _base(nlp, p)
    cq = check_cq(nlp, sol.point)
    out["cq"] = cq.as_dict()
    fn = degenerate_directional if args.degenerate else directional_qp
    res = fn(nlp, sol.point, h, cq=cq)
    out["directional"] = res.as_dict()
    if args.oracle:
        est = fd_directional(nlp, p, h, base=sol)
        out["oracle"] = {"dx_fd": est.estimate, "quotients": est.quotients, "monotone": est.monotone,
                         "max_error": _max_err(res.dx, est.estimate)}
    return nlp.name, out


def cmd_value(args):
    nlp, p = _load_nlp(args)
    h = _direction(args, nlp)
    sol, out = _base(nlp, p)
    cq = check_cq(nlp, sol.point)
    out["cq"] = cq.as_dict()
    section = None
    try:
        rep = value_gradient_hessian(nlp, sol.point, fiacco_jacobian(nlp, sol.point, cq=cq))
        section = rep.as_dict()
    except (RegularityError, RegimeError):
        if h is None:
            raise
    if h is not None:
        if section is None:
            section = {"regime": "directional", "phi": sol.value}
        section["directional"] = {"h": h, "derivative": value_directional(nlp, [sol.point], h)}
        section["dini"] = list(dini_bounds(nlp, [sol.point], h))
    out["value"] = section
    if args.oracle:
        orc = {}
        if section.get("gradient") is not None:
            g, H = fd_value(nlp, p, base=sol)
            orc.update(gradient=g, hessian=H, max_error=max(_max_err(section["gradient"], g),
                                                            _max_err(section["hessian"], H)))
        if h is not None:
            est = fd_directional(nlp, p, h, base=sol)
            orc["value_quotients"] = est.value_quotients
        out["oracle"] = orc
    return nlp.name, out


def cmd_path(args):
    nlp, p = _load_nlp(args)
    if args.to is None:
        raise InputError("path needs --to p=[...]")
    p_end = parse_vector(args.to, "p")
    if p_end.size != nlp.ell:
        raise InputError(f"--to has {p_end.size} entries, problem has {nlp.ell} parameters")
    sol, out = _base(nlp, p)
    trace = follow_path(nlp, sol.point, HomotopySchedule.uniform(p, p_end, args.steps))
    out["path"] = trace.as_dict()
    out["path"]["active_changes"] = [{"p_before": a, "p_after": b, "added": list(ad), "dropped": list(dr)}
                                     for a, b, ad, dr in trace.active_changes()]
    if args.oracle:
        cold = solve_nlp(nlp, p_end)
        out["oracle"] = {"x_cold": cold.point.x, "max_error": _max_err(trace.final.x, cold.point.x)}
    return nlp.name, out


def cmd_conic_diff(args):
    try:
        prob, sol = load_conic(json.loads(args.problem) if args.problem.lstrip().startswith("{")
                               else args.problem)
    except FileNotFoundError as exc:
        raise InputError(f"no such conic file or fixture: {args.problem}") from exc
    if sol is None:
        sol = solve_polyhedral(prob)
    m, n = prob.m, prob.n
    db = None if args.db is None else parse_vector(args.db, "db")
    dc = None if args.dc is None else parse_vector(args.dc, "dc")
    dA = None if args.dA is None else parse_matrix(args.dA)
    for label, v, size in (("--db", db, m), ("--dc", dc, n)):
        if v is not None and v.size != size:
            raise InputError(f"{label} has {v.size} entries, expected {size}")
    if dA is not None and dA.shape != (m, n):
        raise InputError(f"--dA has shape {dA.shape}, expected {(m, n)}")
    res = conic_sensitivity(prob, sol, dA, db, dc)
    hsd = HSDPoint.from_solution(prob, sol["x"], sol["y"], sol["s"])
    section = res.as_dict()
    section["hsd_residual"] = float(np.linalg.norm(residual_map(prob, hsd.z).R))
    section["invariants"] = hsd.invariants()
    return prob.name, {"solution": {"x": sol["x"], "y": sol["y"], "z": sol["s"], "value": float(prob.c @ sol["x"])},
                       "conic": section}


def cmd_oracle(args):
    nlp, p = _load_nlp(args)
    h = _direction(args, nlp)
    sol, out = _base(nlp, p)
    if h is None:
        Jx, Jy, Jz = fd_jacobian(nlp, p, base=sol)
        out["oracle"] = {"J_x": Jx, "J_y": Jy, "J_z": Jz}
    else:
        est = fd_directional(nlp, p, h, base=sol)
        out["oracle"] = {"h": h, "steps": list(est.steps), "quotients": est.quotients,
                         "value_quotients": est.value_quotients, "dx_fd": est.estimate,
                         "monotone": est.monotone}
    return nlp.name, out


HANDLERS = {"solve": cmd_solve, "analyze": cmd_analyze, "diff": cmd_diff, "directional": cmd_directional,
            "value": cmd_value, "path": cmd_path, "conic-diff": cmd_conic_diff, "oracle": cmd_oracle}


def build_parser():
    parser = _Parser(prog="sensikit", description="Post-optimal sensitivity analysis.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("problem", help="problem file, fixture name or (conic-diff) JSON file")
        sp.add_argument("--json", action=argparse.BooleanOptionalAction, default=True,
                        help="emit the JSON report (default) or a short text summary")
        if name == "conic-diff":
            sp.add_argument("--db")
            sp.add_argument("--dc")
            sp.add_argument("--dA")
            continue
        sp.add_argument("--at", help="parameter value, e.g. p=[0, 1]")
        if name in ("diff", "directional", "value", "oracle"):
            sp.add_argument("--direction", help="parameter direction, e.g. h=[1]")
        if name in ("diff", "directional"):
            sp.add_argument("--degenerate", action="store_true",
                            help="allow the MFCQ/CRCQ pipeline when LICQ fails")
        if name == "diff":
            sp.add_argument("--mu", type=float, help="also differentiate the barrier KKT system at mu")
        if name in ("solve", "diff"):
            sp.add_argument("--r-schedule", help="decreasing barrier weights, e.g. 1e-2,1e-3")
        if name == "path":
            sp.add_argument("--to", help="end parameter, e.g. p=[1.5]")
            sp.add_argument("--steps", type=int, default=10)
        if name in ("diff", "directional", "value", "path"):
            sp.add_argument("--oracle", action="store_true", help="attach a finite-difference comparison")
    return parser


def _summary(report):
    lines = [f"{report['command']} {report['problem']}: {report['status']}"]
    if report.get("failed"):
        lines.append("failed: " + ", ".join(report["failed"]))
    for key in ("solution", "cq", "sensitivity", "directional", "value", "path", "conic", "oracle"):
        if key in report:
            lines.append(f"{key}: {json.dumps(report[key], sort_keys=True)}")
    return "\n".join(lines)


def run(argv=None, stdout=None, stderr=None):
    """Execute one command; returns (exit code, report or None)."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "steps", 1) < 1:
            raise InputError("--steps must be at least 1")
        if getattr(args, "mu", None) is not None and args.mu <= 0:
            raise InputError("--mu must be positive")
    except InputError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INPUT, None
    partial = {}
    code, status, extra = EXIT_OK, "ok", {}
    try:
        name, sections = HANDLERS[args.command](args)
    except RegularityError as exc:
        # diagnostic report with the CQ verdicts that failed
        name = Path(args.problem).stem
        try:
            nlp, p = _load_nlp(args)
            name = nlp.name
            sol, partial = _base(nlp, p)
            partial["cq"] = check_cq(nlp, sol.point).as_dict()
        except (SensikitError, InputError):
            partial = {}
        sections = partial
        code, status = EXIT_REGULARITY, "regularity_not_certified"
        extra = {"failed": list(exc.failed), "message": str(exc)}
    except (InputError, SensikitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INPUT, None
    report = make_report(args.command, name, status, time.perf_counter() - t0, **extra, **sections)
    validate_report(report)
    print(dumps(report) if args.json else _summary(report), file=stdout)
    return code, report


def main(argv=None):
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
