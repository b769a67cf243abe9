"""Command-line front end.

    python3 -m sibvp solve --problem troesch --param lambda=10 --out run.json
    python3 -m sibvp convergence --problem bvpt21 --param xi=1e-2 --h 4e-3 2e-3 1e-3 5e-4
    python3 -m sibvp benchmark --table troesch --format md --jobs 4

Exit codes: 0 success, 1 usage error, 2 solver failure.  ``SIBVP_LOG``
(error, warning, info, debug) sets the diagnostic verbosity on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .hybrid import NewtonConfig, SolveError, solve
from .problems import PROBLEMS, InvalidParameterError, make_problem
from .shooting import ShootConfig
from .verification import (
    Bvpt21Reference,
    MeshReference,
    TroeschReference,
    convergence_order,
    kappa_profiles,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2

log = logging.getLogger("sibvp")

BENCHMARK_ROWS = {
    "troesch": [1.0, 5.0, 10.0, 15.0, 20.0, 30.0],
    "bvpt21": [7.5e-2, 1e-2, 1e-3, 1e-4, 1e-5],
    "bvpt30": [5e-2, 1e-2, 5e-3],
}
# Newton stalls in double precision for these rows; reported, not run
OUT_OF_REACH = {"bvpt30": lambda xi: xi <= 5e-3}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# artifacts


@dataclass
class RunArtifact:
    metadata: dict
    straight_branch: list
    inverse_branch: list
    tail_branch: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def to_json(self) -> str:
        # json writes floats with repr, the shortest round-trip decimal
        return json.dumps({"schema_version": SCHEMA_VERSION, **asdict(self)}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "RunArtifact":
        d = json.loads(text)
        version = d.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {version!r}")
        return cls(**d)

    def write_csv(self, stem: Path):
        """One file per branch: ``<stem>_straight.csv``, ``<stem>_inverse.csv``
        (and ``<stem>_tail.csv`` for interior layers)."""
        paths = []
        for name, header, rows in (("straight", ("x", "u", "du"), self.straight_branch),
                                   ("inverse", ("u", "x", "dx"), self.inverse_branch),
                                   ("tail", ("x", "u", "du"), self.tail_branch)):
            if not rows:
                continue
            p = stem.with_name(f"{stem.stem}_{name}.csv")
            p.write_text(_csv_text(header, rows))
            paths.append(p)
        return paths


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _rows(arr):
    return [[float(v) for v in r] for r in np.asarray(arr)]


def build_artifact(mesh, instance, shoot_cfg, newton_cfg, wall_ms, seed=None) -> RunArtifact:
    crit = mesh.critical
    crit = [float(c) for c in (crit if isinstance(crit, tuple) else (crit,))]
    meta = dict(
        problem=instance.name,
        params={k: float(v) for k, v in instance.params.items()},
        h=shoot_cfg.h,
        u_crit=shoot_cfg.u_crit,
        tolerances=dict(tol_boundary=shoot_cfg.tol_boundary, tol_residual=newton_cfg.tol_residual,
                        tol_step=newton_cfg.tol_step, series_tol=newton_cfg.series_tol),
        wall_time_ms=wall_ms,
        n_straight=mesh.n_straight,
        n_inverse=mesh.n_inverse,
        critical=crit,
        joint=[float(v) for v in mesh.joint],
        newton_iterations=len(mesh.history) - 1,
        seed=seed,
    )
    return RunArtifact(meta, _rows(mesh.straight), _rows(mesh.inverse), _rows(mesh.tail),
                       [{k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in h.items()}
                        for h in mesh.history])


# ---------------------------------------------------------------------------
# argument handling


def _parse_params(items):
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--param {name}: not a number: {value!r}") from None
    return out


def _instance(args):
    try:
        return make_problem(args.problem, _parse_params(args.param))
    except InvalidParameterError as e:
        raise UsageError(str(e)) from None


def _configs(args, h=None, problem=None):
    ucrit = args.ucrit
    if ucrit is None:
        ucrit = 2.0 if (problem or args.problem) == "bvpt30" else 1.0
    try:
        shoot_cfg = ShootConfig(h=args.h if h is None else h, u_crit=ucrit, tol_boundary=args.tol_boundary)
        newton_cfg = NewtonConfig(tol_residual=args.tol_residual, max_iters=args.max_newton)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return shoot_cfg, newton_cfg


def _common(p):
    p.add_argument("--ucrit", type=float, default=None, help="critical |u'| (default 1, bvpt30: 2)")
    p.add_argument("--tol-boundary", type=float, default=1e-8)
    p.add_argument("--tol-residual", type=float, default=1e-10)
    p.add_argument("--max-newton", type=int, default=50)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--seed", type=int, default=None, help="recorded in artifacts; seeds numpy's RNG")


def build_parser():
    parser = _Parser(prog="sibvp", description="Straight-inverse solver for stiff two-point BVPs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    registry = ", ".join(f"{k} ({v[1]})" for k, v in PROBLEMS.items())

    s = sub.add_parser("solve", help="solve one problem instance")
    s.add_argument("--problem", required=True, help=f"one of: {registry}")
    s.add_argument("--param", action="append", metavar="NAME=VALUE")
    s.add_argument("--h", type=float, default=1e-4)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    _common(s)

    c = sub.add_parser("convergence", help="observed order over a ladder of step sizes")
    c.add_argument("--problem", required=True, help=f"one of: {registry}")
    c.add_argument("--param", action="append", metavar="NAME=VALUE")
    c.add_argument("--h", type=float, nargs="+", default=[4e-3, 2e-3, 1e-3, 5e-4])
    c.add_argument("--reference", choices=("auto", "exact", "self"), default="auto",
                   help="exact solution (bvpt21, troesch) or a finer SI solve")
    c.add_argument("--ref-h", type=float, default=1e-4)
    c.add_argument("--jobs", type=int, default=1)
    _common(c)

    b = sub.add_parser("benchmark", help="reproduce a results table")
    b.add_argument("--table", required=True, choices=sorted(BENCHMARK_ROWS))
    b.add_argument("--rows", type=float, nargs="+", default=None, help="parameter values (default: all)")
    b.add_argument("--h", type=float, default=1e-4)
    b.add_argument("--format", choices=("csv", "md"), default="md")
    b.add_argument("--jobs", type=int, default=1)
    _common(b)
    return parser


# ---------------------------------------------------------------------------
# commands


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_solve(args):
    instance = _instance(args)
    shoot_cfg, newton_cfg = _configs(args)
    t0 = time.perf_counter()
    try:
        mesh, _ = solve(instance, shoot_cfg, newton_cfg)
    except SolveError as e:
        log.error("%s", e)
        return EXIT_SOLVER
    art = build_artifact(mesh, instance, shoot_cfg, newton_cfg, 1e3 * (time.perf_counter() - t0), args.seed)
    if args.format == "json":
        _emit(art.to_json() + "\n", args.out)
    else:
        if args.out is None:
            raise UsageError("--format csv needs --out (a file stem)")
        for p in art.write_csv(Path(args.out)):
            log.info("wrote %s", p)
    return EXIT_OK


def _reference(args, instance, shoot_cfg, newton_cfg):
    kind = args.reference
    if kind == "auto":
        kind = "exact" if instance.name in ("bvpt21", "troesch") else "self"
    if kind == "exact":
        if instance.name == "bvpt21":
            return Bvpt21Reference(instance.params["xi"])
        if instance.name == "troesch":
            return TroeschReference(instance.params["lambda"])
        raise UsageError(f"no exact reference for {instance.name}")
    ref_cfg = ShootConfig(args.ref_h, shoot_cfg.u_crit, shoot_cfg.tol_boundary)
    mesh, _ = solve(instance, ref_cfg, newton_cfg)
    return MeshReference(mesh)


def cmd_convergence(args):
    if len(args.h) < 3:
        raise UsageError("convergence needs at least three --h values")
    instance = _instance(args)
    shoot_cfg, newton_cfg = _configs(args, h=max(args.h))
    try:
        ref = _reference(args, instance, shoot_cfg, newton_cfg)
    except SolveError as e:
        log.error("reference solve failed: %s", e)
        return EXIT_SOLVER
    rep = convergence_order(instance, args.h, ref, shoot_cfg, newton_cfg, jobs=args.jobs)
    rows = [[h, es, ei] for h, es, ei in rep.rows]
    rows.append(["order", rep.order_straight, rep.order_inverse])
    _emit(_csv_text(("h", "sup_error_straight", "sup_error_inverse"), rows), args.out)
    if not rep.complete:
        for h, msg in rep.failures:
            log.error("h=%g: %s", h, msg)
        return EXIT_SOLVER
    return EXIT_OK


BENCH_COLUMNS = ("param", "c", "c2", "u_c", "du_c", "N_S", "N_I", "kappa0_S", "kappa1_S",
                 "kappa0_I", "kappa1_I", "time_s", "status")


def benchmark_row(table, value, h, u_crit, tol_boundary, tol_residual, max_newton):
    """One benchmark row as a dict (runs in a worker process)."""
    row = dict.fromkeys(BENCH_COLUMNS, math.nan)
    row["param"] = value
    if table in OUT_OF_REACH and OUT_OF_REACH[table](value):
        row["status"] = "skipped: beyond double precision"
        return row
    pname = PROBLEMS[table][1]
    instance = make_problem(table, {pname: value})
    shoot_cfg = ShootConfig(h=h, u_crit=u_crit, tol_boundary=tol_boundary)
    newton_cfg = NewtonConfig(tol_residual=tol_residual, max_iters=max_newton)
    t0 = time.perf_counter()
    try:
        mesh, _ = solve(instance, shoot_cfg, newton_cfg)
        elapsed = time.perf_counter() - t0
        if table == "troesch":
            ref = TroeschReference(value)
        elif table == "bvpt21":
            ref = Bvpt21Reference(value)
        else:
            # Richardson-style: the error of the h solve is about 4/3 of its
            # distance to the h/2 solve
            fine, _ = solve(instance, ShootConfig(h=h / 2, u_crit=u_crit, tol_boundary=tol_boundary),
                            newton_cfg)
            ref = MeshReference(fine)
        kap = kappa_profiles(mesh, ref)
    except Exception as e:
        row["status"] = f"failed: {e}"
        row["time_s"] = time.perf_counter() - t0
        return row
    scale = 4.0 / 3.0 if table == "bvpt30" else 1.0
    crit = mesh.critical
    c1, c2 = crit if isinstance(crit, tuple) else (crit, math.nan)
    _, uc, duc = mesh.joint
    row.update(c=float(c1), c2=float(c2), u_c=float(uc), du_c=float(duc), N_S=mesh.n_straight,
               N_I=mesh.n_inverse, kappa0_S=scale * kap.straight.kappa0_sup,
               kappa1_S=scale * kap.straight.kappa1_sup, kappa0_I=scale * kap.inverse.kappa0_sup,
               kappa1_I=scale * kap.inverse.kappa1_sup, time_s=elapsed, status="ok")
    return row


def run_benchmark(table, values, h, u_crit, tol_boundary, tol_residual, max_newton, jobs=1):
    job = (h, u_crit, tol_boundary, tol_residual, max_newton)
    if jobs <= 1:
        return [benchmark_row(table, v, *job) for v in values]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futures = [ex.submit(benchmark_row, table, v, *job) for v in values]
        return [f.result() for f in futures]


def _markdown(rows):
    lines = ["| " + " | ".join(BENCH_COLUMNS) + " |", "|" + "---|" * len(BENCH_COLUMNS)]
    for r in rows:
        cells = []
        for k in BENCH_COLUMNS:
            v = r[k]
            if isinstance(v, float):
                cells.append("" if math.isnan(v) else f"{v:.6g}")
            else:
                cells.append(str(v))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def cmd_benchmark(args):
    values = args.rows or BENCHMARK_ROWS[args.table]
    shoot_cfg, newton_cfg = _configs(args, problem=args.table)
    rows = run_benchmark(args.table, values, shoot_cfg.h, shoot_cfg.u_crit, shoot_cfg.tol_boundary,
                         newton_cfg.tol_residual, newton_cfg.max_iters, args.jobs)
    if args.format == "md":
        text = _markdown(rows)
    else:
        text = _csv_text(BENCH_COLUMNS, [[r[k] for k in BENCH_COLUMNS] for r in rows])
    _emit(text, args.out)
    failed = [r for r in rows if str(r["status"]).startswith("failed")]
    for r in failed:
        log.error("row %g %s", r["param"], r["status"])
    return EXIT_SOLVER if failed else EXIT_OK


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "benchmark": cmd_benchmark}


def _setup_logging():
    level = os.environ.get("SIBVP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.seed is not None:
            np.random.seed(args.seed)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"sibvp: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    except BrokenPipeError:  # e.g. piped into head
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
