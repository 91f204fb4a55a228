"""Stepsize grid search, benchmark suites and CSV output."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import data as D
from .objectives import LOGISTIC, QUADRATIC, FiniteSumProblem, glm_problem, random_quadratic_family, solve_reference
from .solvers import ENGINE, SUBOPT_FLOOR, StepsizeError, Trace, canonical_method, run

log = logging.getLogger(__name__)

TRACE_HEADER = ("epoch", "grad_evals", "gamma", "suboptimality", "lyapunov", "wall_seconds")
SUMMARY_HEADER = ("dataset", "method", "scheduler", "seed", "gamma", "final_epoch", "grad_evals",
                  "final_suboptimality", "diverged")
GRID_HEADER = ("gamma", "final_suboptimality", "diverged")
CACHE_ENV = "CSAGA_CACHE_DIR"
SYNTHETIC_KINDS = ("quadratic", "sparse", "binary")


class ConfigError(ValueError):
    """Invalid combination of run options."""


class AllDivergedError(RuntimeError):
    def __init__(self, traces):
        super().__init__("every stepsize in the grid diverged")
        self.traces = traces


def default_gamma_grid() -> np.ndarray:
    """Powers of two from 2^13 = 8192 down to 2^-14."""
    return 2.0 ** np.arange(13, -15, -1)


def parse_gamma_grid(text: str) -> np.ndarray:
    """``default``, ``a,b,c`` or ``geom:lo:hi:count`` (descending output)."""
    text = text.strip()
    if text == "default":
        return default_gamma_grid()
    if text.startswith("geom:"):
        _, lo, hi, count = text.split(":")
        grid = np.geomspace(float(lo), float(hi), int(count))
    else:
        grid = np.array([float(v) for v in text.split(",") if v.strip()])
    if grid.size == 0 or not np.all(grid > 0):
        raise ValueError(f"bad gamma grid {text!r}")
    return np.sort(grid)[::-1]


@dataclass
class RunConfig:
    data: str | None = None
    synthetic: str | None = None
    loss: str = LOGISTIC
    lam: float = 1e-2
    subsample: float = 1.0
    seed: int = 0
    method: str = "csaga"
    scheduler: str | None = None
    gamma: float | None = None
    gamma_grid: np.ndarray | None = None
    epochs: int = 20
    jit: bool = False
    diagnostics: bool = False
    out: str | None = None
    # synthetic-problem and ingestion knobs
    n: int = 500
    d: int = 2000
    nnz: int = 10
    kappa: float = 10.0
    data_seed: int = 0  # synthetic generators; ``seed`` drives scheduling and subsampling
    dim: int | None = None
    scale: bool = False
    timing: bool = True
    cache_dir: str | None = None

    def __post_init__(self):
        try:
            self.method = canonical_method(self.method)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if (self.gamma is None) == (self.gamma_grid is None):
            raise ConfigError("exactly one of gamma / gamma_grid must be given")
        if not 0 < self.subsample <= 1:
            raise ConfigError("subsample fraction must lie in (0, 1]")
        if (self.data is None) == (self.synthetic is None):
            raise ConfigError("exactly one of data / synthetic must be given")
        if self.synthetic is not None and self.synthetic not in SYNTHETIC_KINDS:
            raise ConfigError(f"unknown synthetic problem {self.synthetic!r}")
        if self.jit and ENGINE[self.method] == "finito":
            raise ConfigError("no just-in-time path for Finito/DIAG: Finito is not recommended when gradients are sparse")
        if self.jit and ENGINE[self.method] == "gd":
            raise ConfigError("--jit needs a table method")
        if self.jit and self.synthetic == "quadratic":
            raise ConfigError("--jit needs a sparse logistic/ridge problem")
        if self.jit and self.diagnostics:
            raise ConfigError("--diagnostics runs on the dense path; drop --jit")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")

    @property
    def gammas(self) -> np.ndarray:
        return np.array([self.gamma]) if self.gamma is not None else np.asarray(self.gamma_grid)


# -- problem loading and reference cache ---------------------------------------


def load_dataset(cfg: RunConfig) -> D.Dataset:
    if cfg.synthetic == "sparse":
        ds = D.make_sparse_classification(cfg.n, cfg.d, cfg.nnz, seed=cfg.data_seed)
    elif cfg.synthetic == "binary":
        ds = D.make_binary_features(cfg.n, seed=cfg.data_seed)
    elif cfg.data == "-":
        ds = D.parse_libsvm(sys.stdin, d=cfg.dim, name="stdin")
    else:
        ds = D.load_libsvm(cfg.data, d=cfg.dim)
    if cfg.scale:
        ds = D.maxabs_scale(ds)
    return D.subsample(ds, cfg.subsample, cfg.seed)


def load_problem(cfg: RunConfig) -> tuple[FiniteSumProblem, str]:
    if cfg.synthetic == "quadratic":
        p = random_quadratic_family(cfg.n, cfg.d, 1.0, cfg.kappa, seed=cfg.data_seed)
        return p, f"quadratic_n{cfg.n}_d{cfg.d}_k{cfg.kappa:g}"
    ds = load_dataset(cfg)
    name = ds.name or "data"
    if cfg.subsample < 1:
        name = f"{name}_{cfg.subsample:g}"
    return glm_problem(ds, cfg.loss, cfg.lam), name


def cache_dir(cfg_dir: str | None = None) -> Path:
    if cfg_dir:
        return Path(cfg_dir)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "csaga"


def problem_key(p: FiniteSumProblem) -> str:
    h = hashlib.sha256()
    h.update(f"{p.loss_kind}|{p.lam!r}|{p.n}|{p.d}".encode())
    if p.loss_kind == QUADRATIC:
        arrays = (p.A, p.b, p.c)
    else:
        ds = p.dataset
        arrays = (ds.indptr, ds.indices, ds.data, ds.labels)
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def cached_reference(p: FiniteSumProblem, directory: str | None = None, tol: float = 1e-10):
    """``solve_reference`` with an on-disk cache keyed by the problem's content hash."""
    root = cache_dir(directory)
    path = root / f"{problem_key(p)}.npz"
    if path.exists():
        with np.load(path) as z:
            log.info("reference cache hit: %s", path)
            return z["x_star"], float(z["f_star"])
    x_star, f_star = solve_reference(p, tol=tol)
    try:
        root.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=root, suffix=".npz.tmp")
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, x_star=x_star, f_star=f_star)
        os.replace(tmp, path)
        log.info("reference cached: %s", path)
    except OSError as exc:
        raise OSError(f"cannot write reference cache {path}: {exc}") from exc
    return x_star, f_star


# -- running -------------------------------------------------------------------


def run_config(cfg: RunConfig, gamma: float, p: FiniteSumProblem, f_star: float, x_star=None) -> Trace:
    try:
        return run(p, cfg.method, gamma, cfg.epochs, seed=cfg.seed, scheduler_kind=cfg.scheduler,
                   jit=cfg.jit, diagnostics=cfg.diagnostics, f_star=f_star, x_star=x_star)
    except StepsizeError as exc:
        # lagged path refuses gamma*lam >= 1; the dense map would blow up anyway
        log.info("gamma=%g rejected: %s", gamma, exc)
        return Trace(cfg.method, cfg.scheduler or "", float(gamma), "jit", diverged=True, diverged_at=0)


@dataclass
class GridResult:
    best_gamma: float
    best_trace: Trace
    traces: list[Trace] = field(default_factory=list)


def _final(tr: Trace) -> float:
    if tr.diverged or not tr.records:
        return math.inf
    return tr.final.suboptimality


def grid_search(cfg: RunConfig, problem: FiniteSumProblem | None = None, f_star: float | None = None,
                x_star=None) -> GridResult:
    """Run every grid stepsize with the same seed and keep the best.

    Best means smallest final-epoch suboptimality among non-divergent runs;
    ties go to the larger stepsize.
    """
    if cfg.gamma_grid is None:
        raise ValueError("grid_search needs a gamma grid")
    p = problem if problem is not None else load_problem(cfg)[0]
    if f_star is None:
        x_star, f_star = cached_reference(p, cfg.cache_dir)
    traces = [run_config(cfg, float(g), p, f_star, x_star) for g in np.sort(cfg.gamma_grid)[::-1]]
    best = None
    for tr in traces:
        val = _final(tr)
        if math.isfinite(val) and (best is None or val < _final(best)):
            best = tr
    if best is None:
        raise AllDivergedError(traces)
    return GridResult(best.gamma, best, traces)


# -- CSV -----------------------------------------------------------------------


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def trace_csv(tr: Trace, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in tr.records:
        w.writerow([r.epoch, r.grad_evals, _num(r.gamma), _num(max(r.suboptimality, SUBOPT_FLOOR)),
                    _num(r.lyapunov), _num(r.wall_seconds) if timing else ""])
    return buf.getvalue()


def grid_csv(result_traces) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRID_HEADER)
    for tr in result_traces:
        val = _final(tr)
        w.writerow([_num(tr.gamma), _num(val) if math.isfinite(val) else "", int(tr.diverged)])
    return buf.getvalue()


def read_trace_csv(path) -> list[dict]:
    """Parse a trace CSV, validating the header and nonnegative suboptimality."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for line in reader:
            row = dict(zip(header, line))
            rec = {
                "epoch": int(row["epoch"]),
                "grad_evals": int(row["grad_evals"]),
                "gamma": float(row["gamma"]),
                "suboptimality": float(row["suboptimality"]),
                "lyapunov": float(row["lyapunov"]) if row["lyapunov"] else None,
                "wall_seconds": float(row["wall_seconds"]) if row["wall_seconds"] else None,
            }
            if rec["suboptimality"] < 0:
                raise ValueError(f"{path}: negative suboptimality at epoch {rec['epoch']}")
            rows.append(rec)
    return rows


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


@dataclass
class SuiteEntry:
    dataset: str
    method: str
    scheduler: str
    seed: int
    gamma: float
    trace: Trace
    path: Path


def run_suite(configs, out_dir) -> list[SuiteEntry]:
    """Run each config and write one trace CSV per (dataset, method, seed) plus ``summary.csv``.

    Grid configs additionally write ``grid_<dataset>_<method>_seed<seed>.csv``.
    The summary is grouped by dataset and sorted by final suboptimality.
    """
    out = Path(out_dir)
    refs: dict[str, tuple] = {}
    entries = []
    for cfg in configs:
        p, name = load_problem(cfg)
        key = problem_key(p)
        if key not in refs:
            refs[key] = cached_reference(p, cfg.cache_dir)
        x_star, f_star = refs[key]
        stem = f"{name}_{cfg.method}_seed{cfg.seed}"
        if cfg.gamma_grid is not None:
            try:
                res = grid_search(cfg, p, f_star, x_star)
                tr, traces = res.best_trace, res.traces
            except AllDivergedError as exc:
                traces = exc.traces
                tr = traces[0]
            _write(out / f"grid_{stem}.csv", grid_csv(traces))
        else:
            tr = run_config(cfg, cfg.gamma, p, f_star, x_star)
        path = out / f"{stem}.csv"
        _write(path, trace_csv(tr, cfg.timing))
        entries.append(SuiteEntry(name, cfg.method, tr.scheduler, cfg.seed, tr.gamma, tr, path))
    _write(out / "summary.csv", summary_csv(entries))
    return entries


def summary_csv(entries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    order = sorted(entries, key=lambda e: (e.dataset, _final(e.trace), e.method, e.seed))
    for e in order:
        tr = e.trace
        last = tr.records[-1] if tr.records else None
        w.writerow([e.dataset, e.method, e.scheduler, e.seed, _num(e.gamma),
                    last.epoch if last else "", last.grad_evals if last else "",
                    _num(last.suboptimality) if last and not tr.diverged else "", int(tr.diverged)])
    return buf.getvalue()


def config_for(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes)
