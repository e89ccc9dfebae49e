"""Command line entry point: ``mageo {geodesic,oracle-compare,selftest,solve-ma}``.

Exit codes: 0 ok, 1 configuration error, 2 solver failure, 3 verdict failure,
4 selftest failure, 5 data not x-only.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from .config import RunConfig, load_config
from .diagnostics import DiagnosticsReport, QFieldConfig, Verdict, diagnose
from .errors import AdmissibilityError, ConfigError, FieldFormatError, GridError, SolverError
from .fieldio import read_field, write_field
from .geodesic import PotentialPair, build_problem, builtin_pair, default_schedule, solve_geodesic
from .grid import make_grid
from .oracle import ManufacturedSolution, compare_fields, oracle_field
from .selftest import FAULTS, format_table, run_selftest
from .solver import newton_solve

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERDICT, EXIT_SELFTEST, EXIT_NOT_XONLY = range(6)
ORACLE_C0_TOL = 5e-3

log = logging.getLogger("mageo")


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# run directory


class RunDir:
    """Output directory whose files are listed with SHA-256 hashes in ``manifest.json``."""

    def __init__(self, path: Path):
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise _Exit(EXIT_CONFIG, f"cannot create output directory {path}: {exc}")
        self.path = path
        self.files: list[str] = []

    def write_bytes(self, name: str, data: bytes):
        target = self.path / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        self.files.append(name)

    def write_text(self, name: str, text: str):
        self.write_bytes(name, text.encode("utf-8"))

    def write_json(self, name: str, obj):
        self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_field(self, name: str, f):
        target = self.path / name
        target.parent.mkdir(parents=True, exist_ok=True)
        write_field(f, target)
        self.files.append(name)

    def finish(self):
        entries = {name: hashlib.sha256((self.path / name).read_bytes()).hexdigest()
                   for name in sorted(self.files)}
        self.write_json("manifest.json", {"files": entries})


def version_stamp() -> str:
    return f"mageo {__version__}\nnumpy {np.__version__}\nscipy {scipy.__version__}\n"


def _start_run(cfg: RunConfig, out: Path | None, required: bool) -> RunDir | None:
    out = out or cfg.output
    if out is None:
        if required:
            raise _Exit(EXIT_CONFIG, "no output directory: use --out or [output] directory")
        return None
    run = RunDir(Path(out))
    run.write_bytes("config.ini", cfg.raw)
    run.write_text("VERSION", version_stamp())
    return run


# ---------------------------------------------------------------------------
# shared setup


def _grid(cfg: RunConfig):
    try:
        return make_grid(1, cfg.nx, cfg.ny, cfg.nt)
    except GridError as exc:
        raise _Exit(EXIT_CONFIG, f"[grid] {exc}")


def load_pair(cfg: RunConfig, grid) -> PotentialPair:
    if cfg.builtin:
        try:
            return builtin_pair(cfg.builtin, grid, **cfg.data_params)
        except KeyError as exc:
            raise _Exit(EXIT_CONFIG, f"[data] builtin: {exc.args[0]}")
    slices = []
    for key, path in (("phi0", cfg.phi0_path), ("phi1", cfg.phi1_path)):
        try:
            f = read_field(path)
        except (OSError, FieldFormatError) as exc:
            raise _Exit(EXIT_CONFIG, f"[data] {key}: {exc}")
        if (f.grid.nx, f.grid.ny) != (grid.nx, grid.ny):
            raise _Exit(EXIT_CONFIG, f"[data] {key}: torus size {f.grid.nx}x{f.grid.ny} "
                                     f"does not match [grid] {grid.nx}x{grid.ny}")
        slices.append(f.values[0])
    return PotentialPair(grid, *slices)


def _problem(cfg: RunConfig, pair, grid):
    try:
        schedule = default_schedule(cfg.eps_start, cfg.eps_end, cfg.ratio)
        return build_problem(pair, grid, schedule)
    except (ValueError, AdmissibilityError) as exc:
        raise _Exit(EXIT_CONFIG, f"[data] {exc}")


def _solve(problem, cfg: RunConfig, on_solution=None):
    """Run the sweep; returns ``(results, failure message or None)``."""
    try:
        results = solve_geodesic(problem, cfg.newton, on_solution)
    except SolverError as exc:
        return [], str(exc)
    return results, (str(results.failure) if results.failure else None)


def _oracle_tables(results, pair, grid):
    """Per-eps convergence rows and the per-t table at the final eps."""
    ref = oracle_field(grid, pair.phi0[0], pair.phi1[0])
    conv, last = [], None
    for eps, psi, _ in results:
        last = compare_fields(psi, ref)
        conv.append({"eps": eps, "c0": last.sup, "c1": last.c1, "l2": last.l2})
    per_t = [{"t": float(t), "c0": float(a), "c1": float(b)}
             for t, a, b in zip(grid.t_nodes(), last.slice_sup, last.slice_c1)] if last else []
    monotone = all(b["c0"] < a["c0"] for a, b in zip(conv, conv[1:]))
    return {"convergence": conv, "per_t": per_t, "monotone_decreasing": monotone,
            "final_c0": conv[-1]["c0"] if conv else float("nan")}


def _table_csv(rows, keys) -> str:
    lines = [",".join(keys)]
    lines += [",".join(repr(float(r[k])) for k in keys) for r in rows]
    return "\n".join(lines) + "\n"


def _print_table(title, rows, keys):
    print(title)
    print("  " + "  ".join(f"{k:>12}" for k in keys))
    for r in rows:
        print("  " + "  ".join(f"{float(r[k]):>12.4e}" for k in keys))


# ---------------------------------------------------------------------------
# commands


def cmd_geodesic(args) -> int:
    cfg = load_config(args.config)
    grid = _grid(cfg)
    pair = load_pair(cfg, grid)
    problem = _problem(cfg, pair, grid)
    run = _start_run(cfg, args.out, required=True)
    qcfg = QFieldConfig(A=cfg.A)
    rows, solves = [], []

    def on_solution(eps, psi, report):
        idx = len(rows)
        run.write_field(f"fields/psi_{idx:02d}.mafld", psi)
        rows.append(diagnose(eps, psi, qcfg, cfg.alpha))
        solves.append({"eps": eps, "field": f"fields/psi_{idx:02d}.mafld",
                       "outer_iters": report.outer_iters,
                       "final_residual": report.residual_history[-1],
                       "min_det": report.min_admissibility,
                       "q_argmax": rows[-1].q_argmax,
                       "q_argmax_interior": rows[-1].q_argmax_interior,
                       "q_excluded": rows[-1].q_excluded})
        log.info("eps=%.3e solved in %d Newton steps", eps, report.outer_iters)

    results, failure = _solve(problem, cfg, on_solution)
    report = DiagnosticsReport(rows)
    if len(rows) >= 3:
        report.evaluate()
    else:
        report.verdicts = [Verdict("enough_rows", len(rows), 3, False)]
    run.write_text("diagnostics.csv", report.to_csv())
    run.write_text("verdicts.json", report.verdicts_json())

    summary = {"schedule": problem.schedule, "k_init": problem.k_init, "solves": solves,
               "failure": failure, "report_header": report.HEADER,
               "data": {"builtin": cfg.builtin, "m0": pair.m0, "m1": pair.m1,
                        "x_only": pair.is_x_only()}}
    if pair.is_x_only() and results:
        oracle = _oracle_tables(results, pair, grid)
        summary["oracle"] = oracle
        run.write_text("oracle_convergence.csv",
                       _table_csv(oracle["convergence"], ("eps", "c0", "c1", "l2")))
        run.write_text("oracle_per_t.csv", _table_csv(oracle["per_t"], ("t", "c0", "c1")))
    run.write_json("summary.json", summary)
    run.finish()

    print(report.HEADER)
    print(report.to_csv(), end="")
    for v in report.verdicts:
        print(f"{v.check}: {'PASS' if v.passed else 'FAIL'} (value {v.value:.4g}, "
              f"threshold {v.threshold:.4g})")
    if "oracle" in summary:
        print(f"oracle: final C0 error {summary['oracle']['final_c0']:.3e}")
    if failure:
        print(f"solver failure: {failure}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_oracle_compare(args) -> int:
    cfg = load_config(args.config)
    grid = _grid(cfg)
    pair = load_pair(cfg, grid)
    if not pair.is_x_only():
        raise _Exit(EXIT_NOT_XONLY, "oracle-compare needs data independent of y "
                                    "(y-variation exceeds 1e-12)")
    problem = _problem(cfg, pair, grid)
    run = _start_run(cfg, args.out, required=False)
    results, failure = _solve(problem, cfg)
    if not results:
        print(f"solver failure: {failure}", file=sys.stderr)
        return EXIT_SOLVER
    oracle = _oracle_tables(results, pair, grid)
    verdict = Verdict("oracle_c0_final", oracle["final_c0"], ORACLE_C0_TOL,
                      bool(oracle["final_c0"] <= ORACLE_C0_TOL))
    _print_table("per-t error at final eps", oracle["per_t"], ("t", "c0", "c1"))
    _print_table("convergence across eps", oracle["convergence"], ("eps", "c0", "c1", "l2"))
    print(f"monotone decrease: {oracle['monotone_decreasing']}")
    print(f"{verdict.check}: {'PASS' if verdict.passed else 'FAIL'} "
          f"({verdict.value:.3e} vs {verdict.threshold:.1e})")
    if run:
        run.write_text("oracle_convergence.csv",
                       _table_csv(oracle["convergence"], ("eps", "c0", "c1", "l2")))
        run.write_text("oracle_per_t.csv", _table_csv(oracle["per_t"], ("t", "c0", "c1")))
        run.write_json("verdicts.json", [verdict.as_json()])
        run.finish()
    if failure:
        print(f"solver failure: {failure}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK if verdict.passed else EXIT_VERDICT


def cmd_selftest(args) -> int:
    results = run_selftest(args.inject_fault)
    print(format_table(results), end="")
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST


def cmd_solve_ma(args) -> int:
    """Nondegenerate solve against a manufactured solution with analytic density."""
    if args.config:
        cfg = load_config(args.config)
    else:
        from .config import parse_config
        cfg = parse_config("[grid]\nnx = 32\nny = 8\nnt = 33\n")
    grid = _grid(cfg)
    params = dict(cfg.manufactured)
    k = params.pop("k", 0.5)
    try:
        ms = ManufacturedSolution(**params)
    except TypeError as exc:
        raise _Exit(EXIT_CONFIG, f"[manufactured] {exc}")
    truth = ms.field(grid)
    try:
        psi, report = newton_solve(ms.start(grid, k), ms.density, cfg.newton)
    except (SolverError, AdmissibilityError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    err = compare_fields(psi, truth)
    summary = {"grid": [grid.nx, grid.ny, grid.nt], "alpha": ms.alpha, "beta": ms.beta, "k": k,
               "outer_iters": report.outer_iters, "residual_history": report.residual_history,
               "sup_error": err.sup, "l2_error": err.l2, "c1_error": err.c1}
    print(f"grid {grid.nx}x{grid.ny}x{grid.nt}: {report.outer_iters} Newton steps")
    for i, r in enumerate(report.residual_history):
        print(f"  |r_{i}| = {r:.3e}")
    print(f"sup error {err.sup:.3e}  L2 error {err.l2:.3e}  C1 error {err.c1:.3e}")
    run = _start_run(cfg, args.out, required=False)
    if run:
        run.write_field("psi.mafld", psi)
        run.write_json("summary.json", summary)
        run.finish()
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, metavar="N",
                        help="cap on BLAS/OpenMP worker threads")
    common.add_argument("--out", type=Path, default=None, metavar="DIR",
                        help="run directory (overrides [output] directory)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mageo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mageo {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("geodesic", parents=[common], help="eps-geodesic sweep with diagnostics")
    g.add_argument("--config", required=True, type=Path, metavar="PATH")
    g.set_defaults(func=cmd_geodesic)
    o = sub.add_parser("oracle-compare", parents=[common],
                       help="compare an x-only sweep with the Legendre oracle")
    o.add_argument("--config", required=True, type=Path, metavar="PATH")
    o.set_defaults(func=cmd_oracle_compare)
    s = sub.add_parser("selftest", parents=[common], help="seeded property checks")
    s.add_argument("--inject-fault", choices=FAULTS, default=None, help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_selftest)
    m = sub.add_parser("solve-ma", parents=[common], help="manufactured-solution solve")
    m.add_argument("--config", type=Path, default=None, metavar="PATH")
    m.set_defaults(func=cmd_solve_ma)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    limits = threadpool_limits(args.threads) if args.threads else nullcontext()
    try:
        with limits:
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
