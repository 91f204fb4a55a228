"""Command line entry point: ``csaga {run,grid,suite,sweep,verify,parse-check}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench as B
from . import data as D
from . import diagnostics as G
from .solvers import ALIASES, METHODS, SCHEDULER_KINDS
from .verify import verify_all

log = logging.getLogger("csaga")

METHOD_CHOICES = sorted(set(METHODS) | set(ALIASES))


def _problem_flags(ap: argparse.ArgumentParser):
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="LIBSVM file, or - for stdin")
    src.add_argument("--synthetic", choices=B.SYNTHETIC_KINDS, help="built-in problem instead of --data")
    ap.add_argument("--loss", choices=("logistic", "ridge"), default="logistic")
    ap.add_argument("--lambda", dest="lam", type=float, default=1e-2, help="L2 weight (default 1e-2)")
    ap.add_argument("--subsample", type=float, default=1.0, help="fraction of rows in (0, 1]")
    ap.add_argument("--seed", type=int, default=0, help="scheduler and subsampling seed")
    ap.add_argument("--data-seed", type=int, default=0, help="synthetic problem seed")
    ap.add_argument("--dim", type=int, help="override the feature dimension")
    ap.add_argument("--scale", action="store_true", help="per-feature max-abs scaling")
    ap.add_argument("--n", type=int, help="synthetic: rows/components (500 sparse, 10 quadratic)")
    ap.add_argument("--d", type=int, help="synthetic: dimension (2000 sparse, 4 quadratic)")
    ap.add_argument("--nnz", type=int, default=10, help="synthetic sparse: nonzeros per row")
    ap.add_argument("--kappa", type=float, default=10.0, help="synthetic quadratic: L/mu")


def _run_flags(ap: argparse.ArgumentParser, grid: bool):
    ap.add_argument("--method", default="csaga", choices=METHOD_CHOICES)
    ap.add_argument("--scheduler", choices=SCHEDULER_KINDS, help="override the method's index order")
    if grid:
        ap.add_argument("--gamma-grid", default="default",
                        help="'default' (2^13 .. 2^-14), 'a,b,c' or 'geom:lo:hi:count'")
    else:
        g = ap.add_mutually_exclusive_group(required=True)
        g.add_argument("--gamma", type=float)
        g.add_argument("--gamma-grid")
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--jit", action="store_true", help="lagged sparse updates (SAG/SAGA family only)")
    ap.add_argument("--diagnostics", action="store_true", help="record the Lyapunov function (dense path)")
    ap.add_argument("--out", help="output directory (default: print to stdout)")
    ap.add_argument("--no-timing", dest="timing", action="store_false", help="leave wall_seconds empty")
    ap.add_argument("--cache-dir", help=f"reference-solution cache (default ${B.CACHE_ENV} or ~/.cache/csaga)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="csaga", description="Cyclic SAGA and incremental gradient benchmarks")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run, one trace CSV")
    _problem_flags(p)
    _run_flags(p, grid=False)

    p = sub.add_parser("grid", help="stepsize grid search")
    _problem_flags(p)
    _run_flags(p, grid=True)

    p = sub.add_parser("suite", help="grid search several methods and seeds, with a summary CSV")
    _problem_flags(p)
    _run_flags(p, grid=True)
    p.add_argument("--methods", default="csaga,iag", help="comma separated")
    p.add_argument("--seeds", default=None, help="comma separated (default: --seed)")

    p = sub.add_parser("sweep", help="empirical rates of C-SAGA and IAG on quadratics")
    p.add_argument("--kappas", default="1,10", help="comma separated condition numbers")
    p.add_argument("--ns", default="5,10", help="comma separated component counts")
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("verify", help="run the synthetic theory checks")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("parse-check", help="validate a LIBSVM file and print its statistics")
    p.add_argument("data", help="LIBSVM file, or - for stdin")
    p.add_argument("--no-binary-labels", dest="binary", action="store_false")
    p.add_argument("--dim", type=int)
    return ap


def _config(args, **overrides) -> B.RunConfig:
    grid = getattr(args, "gamma_grid", None)
    n0, d0 = (10, 4) if args.synthetic == "quadratic" else (500, 2000)
    kw = dict(
        data=args.data, synthetic=args.synthetic, loss=args.loss, lam=args.lam, subsample=args.subsample,
        seed=args.seed, method=args.method, scheduler=args.scheduler, gamma=getattr(args, "gamma", None),
        gamma_grid=B.parse_gamma_grid(grid) if grid else None, epochs=args.epochs, jit=args.jit,
        diagnostics=args.diagnostics, out=args.out, n=args.n or n0, d=args.d or d0, nnz=args.nnz,
        kappa=args.kappa, data_seed=args.data_seed,
        dim=args.dim, scale=args.scale, timing=args.timing, cache_dir=args.cache_dir,
    )
    kw.update(overrides)
    return B.RunConfig(**kw)


def _emit(text: str, out: Path | None, name: str):
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    log.info("wrote %s", out / name)


def cmd_run(args, ap) -> int:
    cfg = _config(args)
    p, name = B.load_problem(cfg)
    x_star, f_star = B.cached_reference(p, cfg.cache_dir)
    out = Path(cfg.out) if cfg.out else None
    stem = f"{name}_{cfg.method}_seed{cfg.seed}"
    if cfg.gamma_grid is not None:
        return _grid(cfg, p, f_star, x_star, out, stem)
    tr = B.run_config(cfg, cfg.gamma, p, f_star, x_star)
    _emit(B.trace_csv(tr, cfg.timing), out, f"{stem}.csv")
    if tr.diverged:
        print(f"diverged at step {tr.diverged_at} (gamma={cfg.gamma:g})", file=sys.stderr)
    return 0


def _grid(cfg, p, f_star, x_star, out, stem) -> int:
    try:
        res = B.grid_search(cfg, p, f_star, x_star)
        traces = res.traces
    except B.AllDivergedError as exc:
        res, traces = None, exc.traces
    _emit(B.grid_csv(traces), out, f"grid_{stem}.csv")
    diverged = [t.gamma for t in traces if t.diverged]
    if diverged:
        print(f"diverged: {len(diverged)} of {len(traces)} stepsizes "
              f"({', '.join(f'{g:g}' for g in diverged)})", file=sys.stderr)
    if res is None:
        print("no convergent stepsize in the grid", file=sys.stderr)
        return 0
    print(f"best gamma {res.best_gamma:g}: final suboptimality {res.best_trace.final.suboptimality:.3e}",
          file=sys.stderr)
    if out is not None:
        _emit(B.trace_csv(res.best_trace, cfg.timing), out, f"{stem}.csv")
    return 0


def cmd_grid(args, ap) -> int:
    cfg = _config(args)
    p, name = B.load_problem(cfg)
    x_star, f_star = B.cached_reference(p, cfg.cache_dir)
    out = Path(cfg.out) if cfg.out else None
    return _grid(cfg, p, f_star, x_star, out, f"{name}_{cfg.method}_seed{cfg.seed}")


def cmd_suite(args, ap) -> int:
    if not args.out:
        ap.error("suite needs --out")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    configs = [_config(args, method=m.strip(), seed=s) for s in seeds for m in args.methods.split(",")]
    entries = B.run_suite(configs, args.out)
    print(f"wrote {len(entries)} traces and summary.csv to {args.out}", file=sys.stderr)
    return 0


def cmd_sweep(args, ap) -> int:
    kappas = [float(k) for k in args.kappas.split(",")]
    ns = [int(n) for n in args.ns.split(",")]
    rows = G.rate_sweep(kappas, ns, d=args.d, epochs=args.epochs, seed=args.seed)
    text = G.sweep_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify(args, ap) -> int:
    checks = verify_all(args.seed)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def cmd_parse_check(args, ap) -> int:
    if args.data == "-":
        ds = D.parse_libsvm(sys.stdin, binary_labels=args.binary, d=args.dim)
    else:
        ds = D.load_libsvm(args.data, binary_labels=args.binary, d=args.dim)
    st = D.stats(ds)
    labels = ", ".join(f"{v:g}" for v in np.unique(ds.labels))
    print(f"n={st.n} d={st.d} max_row_sq_norm={st.max_row_sq_norm:g} mean_nnz={st.mean_nnz:g} labels={{{labels}}}")
    return 0


COMMANDS = {
    "run": cmd_run, "grid": cmd_grid, "suite": cmd_suite, "sweep": cmd_sweep,
    "verify": cmd_verify, "parse-check": cmd_parse_check,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args, ap)
    except B.ConfigError as exc:
        ap.exit(2, f"{ap.format_usage()}csaga: error: {exc}\n")
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"csaga: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
