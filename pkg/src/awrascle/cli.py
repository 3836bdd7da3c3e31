"""Command-line entry point.

    awrascle run <config>
    awrascle verify <suite>
    awrascle inspect <snapshot>
    awrascle export-heatmap <snapshot> <axis> <index> <out.pgm>

Exit status: 0 success, 1 audit or check failure, 2 invalid input (config,
snapshot, arguments), 3 solver abort.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import picard, verify
from .config import ConfigError, RunConfig, dump_config, initial_fields
from .snapshot import SnapshotError, heatmap_slice, read_snapshot, write_pgm, write_snapshot

__all__ = ["main", "run", "ITERATION_COLUMNS", "LEVEL_COLUMNS"]

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

CSV_VERSION = "v1"
ITERATION_COLUMNS = ("slab", "iter", "delta_w", "delta_rho", "kappa", "bound_M", "min_rho", "max_rho",
                     "mass", "converged")
LEVEL_COLUMNS = ("slab", "level", "time", "min_rho", "max_rho", "mass", "maxmin_lower_bound",
                 "maxmin_upper_bound", "violated")
AUDIT_COLUMNS = ("slab", "t_start", "mass_drift", "min_rho", "positive", "maxmin_violations", "barrier_ok",
                 "potential_residual", "jacobian_min", "passed")

log = logging.getLogger("awrascle")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class _CsvSink:
    def __init__(self, path, kind, columns):
        self.fh = open(path, "w", newline="")
        self.fh.write(f"# awrascle-diagnostics {kind} {CSV_VERSION}\n")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(columns)

    def row(self, values):
        self.writer.writerow([_fmt(v) for v in values])

    def close(self):
        self.fh.close()


def _write_level_outputs(cfg, torus, k, t, rho, w, u):
    stem = os.path.join(cfg.out_dir, f"{{}}_{k:06d}")
    write_snapshot(stem.format("rho") + ".awrs", torus, rho, t)
    write_snapshot(stem.format("w") + ".awrs", torus, w, t)
    write_snapshot(stem.format("u") + ".awrs", torus, u, t)
    if torus.dim >= 2:
        snap = read_snapshot(stem.format("rho") + ".awrs")
        write_pgm(stem.format("rho") + ".pgm", heatmap_slice(snap, cfg.heatmap_axis, cfg.heatmap_index))


def run(cfg, out=None, err=None):
    """Execute a validated :class:`RunConfig`; returns the exit status."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    torus, model = cfg.torus, cfg.model
    rho0, u0 = initial_fields(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "config.toml"), "w") as fh:
        fh.write(dump_config(cfg.source))
    iters = _CsvSink(os.path.join(cfg.out_dir, "iterations.csv"), "iterations", ITERATION_COLUMNS)
    levels = _CsvSink(os.path.join(cfg.out_dir, "levels.csv"), "levels", LEVEL_COLUMNS)
    audits = _CsvSink(os.path.join(cfg.out_dir, "audit.csv"), "audit", AUDIT_COLUMNS)
    per_slab = cfg.M_levels

    def on_slab(s, state, reports, audit):
        for r in reports:
            iters.row([s, r.iter, r.delta_w, r.delta_rho, r.kappa, r.bound_M, r.min_rho, r.max_rho,
                       r.mass, r.converged])
        for rep in state.parabolic_reports[(0 if s == 0 else 1):]:
            levels.row([s, s * per_slab + rep.level, rep.time, rep.min_rho, rep.max_rho, rep.mass,
                        rep.maxmin_lower_bound, rep.maxmin_upper_bound, rep.violated])
        audits.row([s, state.times[0], audit.mass_drift, audit.min_rho, audit.positive,
                    audit.maxmin_violations, audit.barrier_ok, audit.potential_residual,
                    audit.jacobian_min, audit.passed])
        if cfg.snapshot_stride:
            for j in range(0 if s == 0 else 1, state.n_levels):
                k = s * per_slab + j
                if k % cfg.snapshot_stride == 0:
                    _write_level_outputs(cfg, torus, k, state.times[j], state.rho[j], state.w[j], state.u[j])
        print(f"slab {s}: t=[{state.times[0]:g}, {state.times[-1]:g}] {len(reports)} iterations, "
              f"audit {'passed' if audit.passed else 'FAILED'}", file=out)

    try:
        result = picard.march(rho0, u0, model, torus, cfg.T_total, cfg.slab_T, cfg.M_levels,
                              tol_fix=cfg.tol_fix, max_iter=cfg.max_iter, substeps=cfg.substeps,
                              method=cfg.method, scheme=cfg.scheme, on_slab=on_slab, tol_mp=cfg.tol_mp)
    except picard.SlabError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_SOLVER
    finally:
        for sink in (iters, levels, audits):
            sink.close()
    ok = all(a.passed for a in result.audits)
    print(f"march complete to t={result.times[-1]:g}; audits {'passed' if ok else 'FAILED'}", file=out)
    return EXIT_OK if ok else EXIT_AUDIT


def _cmd_run(args):
    try:
        cfg = RunConfig.load(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out is not None:
        cfg.out_dir = args.out
    return run(cfg)


def _cmd_verify(args):
    results = verify.run_suite(args.suite, echo=lambda line: print(line, flush=True))
    n = sum(r.passed for r in results)
    print(f"{n}/{len(results)} checks passed")
    return EXIT_OK if n == len(results) else EXIT_AUDIT


def _cmd_inspect(args):
    try:
        snap = read_snapshot(args.snapshot)
    except (OSError, SnapshotError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for k, v in snap.header().items():
        print(f"{k}: {v}")
    t = snap.torus
    comps = [snap.field] if snap.components == 1 else list(snap.field)
    print("component  min  max  mean  H0  H1  H2")
    for i, c in enumerate(comps):
        norms = "  ".join(f"{t.sobolev_norm(c, k):.12g}" for k in range(3))
        print(f"{i}  {c.min():.12g}  {c.max():.12g}  {t.mean(c):.12g}  {norms}")
    return EXIT_OK


def _cmd_heatmap(args):
    try:
        snap = read_snapshot(args.snapshot)
        write_pgm(args.out, heatmap_slice(snap, args.axis, args.index))
    except (OSError, SnapshotError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="awrascle", description="Picard slab solver for the dissipative Aw-Rascle system")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="march a configured run")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="override output.dir")
    r.set_defaults(func=_cmd_run)
    v = sub.add_parser("verify", help="run an acceptance suite")
    v.add_argument("suite", choices=sorted(verify.SUITES))
    v.set_defaults(func=_cmd_verify)
    i = sub.add_parser("inspect", help="print a snapshot header and norms")
    i.add_argument("snapshot")
    i.set_defaults(func=_cmd_inspect)
    h = sub.add_parser("export-heatmap", help="write a PGM slice of a snapshot")
    h.add_argument("snapshot")
    h.add_argument("axis", type=int)
    h.add_argument("index", type=int)
    h.add_argument("out")
    h.set_defaults(func=_cmd_heatmap)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
