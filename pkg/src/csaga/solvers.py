"""Incremental gradient engine.

Every method is an update rule (``saga``, ``sag``, ``finito`` or plain
``gd``) paired with an index scheduler::

    csaga   = saga   + cyclic            iag  = sag    + cyclic
    saga    = saga   + iid_uniform       sag  = sag    + iid_uniform
    rp_saga = saga   + random_permutation
    diag    = finito + cyclic            finito = finito + iid_uniform

Three execution paths exist:

``literal``
    Dense stored-gradient table; every ``f_i`` includes its regularizer.
    With the cyclic scheduler this reproduces the C-SAGA recursion
    ``x+ = x - gamma (grad f_[k](x^k) - grad f_[k](x^{k-n}) + mean of the n
    most recent gradients)`` exactly, starting from ``x^{-j} = x^0``.
``composite``
    GLM losses only. The table stores one scalar derivative per row and the
    ``lam * x`` term is evaluated at the current iterate.
``jit``
    Same iterates as ``composite`` but each coordinate is updated lazily, in
    closed form, only when the scheduled row touches it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .data import STREAM_SCHEDULER
from .objectives import LOGISTIC, LOSS_CODES, QUADRATIC, FiniteSumProblem, sigmoid, solve_reference

CYCLIC = "cyclic"
IID = "iid_uniform"
PERMUTATION = "random_permutation"
SCHEDULER_KINDS = (CYCLIC, IID, PERMUTATION)

LITERAL, COMPOSITE, JIT = "literal", "composite", "jit"

ENGINE = {
    "gd": "gd",
    "csaga": "saga", "saga": "saga", "rp_saga": "saga",
    "sag": "sag", "iag": "sag",
    "finito": "finito", "diag": "finito",
}
DEFAULT_SCHEDULER = {
    "gd": CYCLIC,
    "csaga": CYCLIC, "saga": IID, "rp_saga": PERMUTATION,
    "sag": IID, "iag": CYCLIC,
    "finito": IID, "diag": CYCLIC,
}
METHODS = tuple(ENGINE)
ALIASES = {"rpsaga": "rp_saga", "rp-saga": "rp_saga", "c-saga": "csaga"}

SUBOPT_FLOOR = 1e-16
MAX_DIAGNOSTIC_SIZE = 10**7


class StepsizeError(ValueError):
    pass


class DivergenceError(ArithmeticError):
    def __init__(self, k: int):
        super().__init__(f"iterate diverged at step {k}")
        self.k = k


def canonical_method(name: str) -> str:
    name = ALIASES.get(name.lower(), name.lower())
    if name not in ENGINE:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return name


class Scheduler:
    """Index stream over ``0..n-1``.

    ``cyclic`` emits ``k mod n`` at step ``k``; ``random_permutation`` emits a
    fresh permutation every ``n`` draws; ``iid_uniform`` draws with
    replacement. Random kinds draw from ``default_rng([seed, STREAM_SCHEDULER])``.
    """

    def __init__(self, kind: str, n: int, seed: int = 0):
        if kind not in SCHEDULER_KINDS:
            raise ValueError(f"unknown scheduler {kind!r}")
        if n < 1:
            raise ValueError("n must be positive")
        self.kind = kind
        self.n = n
        self.seed = seed
        self.position = 0
        self._rng = np.random.default_rng([seed, STREAM_SCHEDULER])
        self._buffer = np.empty(0, dtype=np.int64)

    def _refill(self):
        if self.kind == CYCLIC:
            block = np.arange(self.n, dtype=np.int64)
            start = (self.position + self._buffer.size) % self.n
            block = np.roll(block, -start)
        elif self.kind == PERMUTATION:
            block = self._rng.permutation(self.n).astype(np.int64)
        else:
            block = self._rng.integers(0, self.n, size=self.n, dtype=np.int64)
        self._buffer = np.concatenate([self._buffer, block])

    def take(self, m: int) -> np.ndarray:
        while self._buffer.size < m:
            self._refill()
        out, self._buffer = self._buffer[:m], self._buffer[m:]
        self.position += m
        return out

    def next(self) -> int:
        return int(self.take(1)[0])

    def epoch(self) -> np.ndarray:
        return self.take(self.n)


@dataclass
class SolverState:
    method: str
    path: str
    x: np.ndarray
    gamma: float
    n: int
    k: int = 0
    grad_evals: int = 0
    table: np.ndarray | None = None  # (n, d) gradients or (n,) scalar derivatives
    g_bar: np.ndarray | None = None
    lag: np.ndarray | None = None
    phi: np.ndarray | None = None
    sum_phi: np.ndarray | None = None
    sum_g: np.ndarray | None = None

    @property
    def engine(self) -> str:
        return ENGINE[self.method]

    @property
    def jit(self) -> bool:
        return self.path == JIT


class HistoryWindow:
    """The last ``n + 1`` iterates; slot ``j`` holds ``x^{k-j}``."""

    def __init__(self, n: int, d: int):
        self.n = n
        self._ring = np.zeros((n + 1, d))
        self._head = -1
        self._count = 0

    @classmethod
    def filled(cls, n: int, x0: np.ndarray) -> "HistoryWindow":
        w = cls(n, x0.shape[0])
        for _ in range(n + 1):
            w.push(x0)
        return w

    @property
    def warm(self) -> bool:
        return self._count >= self.n + 1

    def push(self, x):
        self._head = (self._head + 1) % (self.n + 1)
        self._ring[self._head] = x
        self._count += 1

    def __len__(self):
        return min(self._count, self.n + 1)

    def __getitem__(self, j: int) -> np.ndarray:
        if not 0 <= j < len(self):
            raise IndexError(j)
        return self._ring[(self._head - j) % (self.n + 1)]

    def as_array(self) -> np.ndarray:
        """Rows ``x^k, x^{k-1}, ..., x^{k-n}``."""
        order = (self._head - np.arange(len(self))) % (self.n + 1)
        return self._ring[order].copy()


# -- problem plumbing ------------------------------------------------------

_EMPTY3 = np.zeros((0, 0, 0))
_EMPTY2 = np.zeros((0, 0))
_EMPTY_I = np.zeros(1, dtype=np.int64)
_EMPTY_F = np.zeros(0)


def _problem_args(p: FiniteSumProblem):
    kind = LOSS_CODES[p.loss_kind]
    if p.loss_kind == QUADRATIC:
        return kind, p.A, p.b, _EMPTY_I, _EMPTY_I[:0], _EMPTY_F, _EMPTY_F, 0.0
    ds = p.dataset
    return kind, _EMPTY3, _EMPTY2, ds.indptr, ds.indices, ds.data, ds.labels, p.lam


def _glm_args(p: FiniteSumProblem):
    ds = p.dataset
    return LOSS_CODES[p.loss_kind], ds.indptr, ds.indices, ds.data, ds.labels, p.lam


def _scalar_derivs(p: FiniteSumProblem, x: np.ndarray) -> np.ndarray:
    t = p.dataset.csr() @ x
    y = p.dataset.labels
    if p.loss_kind == LOGISTIC:
        return -y * sigmoid(-y * t)
    return t - y


def _loss_mean(p: FiniteSumProblem, derivs: np.ndarray) -> np.ndarray:
    return p.dataset.csr().T @ derivs / p.n


def _check_path(p: FiniteSumProblem, method: str, path: str, gamma: float):
    if path not in (LITERAL, COMPOSITE, JIT):
        raise ValueError(f"unknown path {path!r}")
    if path == LITERAL:
        return
    if not p.is_glm:
        raise ValueError(f"path {path!r} needs a logistic or ridge problem")
    if ENGINE[method] == "finito":
        raise ValueError("lagged/composite updates do not apply to Finito/DIAG")
    if ENGINE[method] == "gd":
        raise ValueError("gd has no table to run lazily")
    if gamma * p.lam >= 1.0:
        raise StepsizeError(f"gamma * lambda = {gamma * p.lam:g} >= 1: lagged contraction factor is not positive")


def init(p: FiniteSumProblem, x0, method: str, gamma: float, path: str = LITERAL) -> SolverState:
    """Set up the tables with ``x^{-j} = x^0`` (one counted pass over all components)."""
    method = canonical_method(method)
    if not gamma > 0:
        raise StepsizeError("gamma must be positive")
    x = np.array(x0, dtype=np.float64)
    if x.shape != (p.d,):
        raise ValueError(f"x0 must have length {p.d}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 has non-finite entries")
    _check_path(p, method, path, gamma)
    st = SolverState(method, path, x, float(gamma), p.n)
    engine = ENGINE[method]
    if engine == "gd":
        return st
    st.grad_evals = p.n
    if path == LITERAL:
        st.table = np.stack([p.component_gradient(i, x) for i in range(p.n)])
        if engine == "finito":
            st.phi = np.tile(x, (p.n, 1))
            st.sum_phi = st.phi.sum(axis=0)
            st.sum_g = st.table.sum(axis=0)
        else:
            st.g_bar = st.table.mean(axis=0)
    else:
        st.table = _scalar_derivs(p, x)
        st.g_bar = _loss_mean(p, st.table)
        if path == JIT:
            st.lag = np.zeros(p.d, dtype=np.int64)
    return st


def resync(st: SolverState, p: FiniteSumProblem):
    """Recompute running sums exactly from the stored tables."""
    if st.engine == "gd":
        return
    if st.path == JIT:
        K.jit_finalize(st.x, st.g_bar, st.lag, st.k, st.gamma, p.lam)
    if st.engine == "finito":
        st.sum_phi = st.phi.sum(axis=0)
        st.sum_g = st.table.sum(axis=0)
    elif st.path == LITERAL:
        st.g_bar = st.table.mean(axis=0)
    else:
        st.g_bar = _loss_mean(p, st.table)


def finalize(st: SolverState, p: FiniteSumProblem) -> np.ndarray:
    """Bring every lagged coordinate up to step ``k``; returns the iterate."""
    if st.path == JIT:
        K.jit_finalize(st.x, st.g_bar, st.lag, st.k, st.gamma, p.lam)
    return st.x


def advance(st: SolverState, p: FiniteSumProblem, seq, record=None, touches=None) -> int:
    """Run one step per entry of ``seq``; returns the offending step or -1.

    When ``record`` (shape ``(len(seq), d)``) is given, the iterate after every
    step is written into it. A full resync happens whenever ``k`` crosses a
    multiple of ``n``.
    """
    seq = np.ascontiguousarray(seq, dtype=np.int64)
    if record is None:
        record = _EMPTY2
    engine = st.engine
    if engine == "gd":
        raise ValueError("gd advances by full gradient steps; use gd_step")
    start = 0
    while start < seq.size:
        stop = min(seq.size, start + st.n - st.k % st.n)
        chunk = seq[start:stop]
        rec = record[start:stop] if record.shape[0] else record
        if st.path == LITERAL:
            if engine == "finito":
                bad = K.finito_steps(*_problem_args(p), st.x, st.phi, st.table, st.sum_phi, st.sum_g,
                                     chunk, st.gamma, rec)
            else:
                bad = K.table_steps(*_problem_args(p), st.x, st.table, st.g_bar, chunk, st.gamma,
                                    engine == "sag", rec)
        elif st.path == COMPOSITE:
            bad = K.composite_steps(*_glm_args(p), st.x, st.table, st.g_bar, chunk, st.gamma,
                                    engine == "sag", rec)
        else:
            tch = np.zeros(chunk.size, dtype=np.int64)
            bad = K.jit_steps(*_glm_args(p), st.x, st.table, st.g_bar, st.lag, st.k, chunk, st.gamma,
                              engine == "sag", tch)
            if touches is not None:
                touches[start:stop] = tch
        done = chunk.size if bad < 0 else bad + 1
        st.k += done
        st.grad_evals += done
        if bad >= 0:
            return start + bad
        if st.k % st.n == 0:
            resync(st, p)
            if st.path == JIT and not np.all(np.abs(st.x) <= 1e100):
                return stop - 1
        start = stop
    return -1


def _step(st, p, scheduler, engine_names):
    if st.engine not in engine_names:
        raise ValueError(f"{st.method} is not a {'/'.join(engine_names)} method")
    if scheduler.n != p.n:
        raise ValueError("scheduler size does not match the problem")
    bad = advance(st, p, [scheduler.next()])
    if bad >= 0:
        raise DivergenceError(st.k)
    return st


def step_csaga(st: SolverState, p: FiniteSumProblem, scheduler: Scheduler) -> SolverState:
    """One SAGA-rule step (C-SAGA under the cyclic scheduler)."""
    return _step(st, p, scheduler, ("saga",))


def step_sag_iag(st: SolverState, p: FiniteSumProblem, scheduler: Scheduler) -> SolverState:
    return _step(st, p, scheduler, ("sag",))


def step_finito_diag(st: SolverState, p: FiniteSumProblem, scheduler: Scheduler) -> SolverState:
    return _step(st, p, scheduler, ("finito",))


def step_jit(st: SolverState, p: FiniteSumProblem, scheduler: Scheduler) -> SolverState:
    if st.path != JIT:
        raise ValueError("state was not initialized on the jit path")
    return _step(st, p, scheduler, ("saga", "sag"))


def step(st: SolverState, p: FiniteSumProblem, scheduler: Scheduler) -> SolverState:
    if st.engine == "gd":
        return gd_step(st, p)
    return _step(st, p, scheduler, (st.engine,))


def gd_step(st: SolverState, p: FiniteSumProblem) -> SolverState:
    st.x = st.x - st.gamma * p.full_gradient(st.x)
    st.k += 1
    st.grad_evals += p.n
    if not np.all(np.isfinite(st.x)) or not np.linalg.norm(st.x) <= 1e100:
        raise DivergenceError(st.k)
    return st


def literal_csaga(p: FiniteSumProblem, x0, gamma: float, steps: int) -> np.ndarray:
    """C-SAGA transcribed term by term, without a gradient table.

    Every step re-evaluates ``grad f_[k-i](x^{k-i})`` for ``i = 1..n`` and
    ``grad f_[k](x^{k-n})`` from the stored iterates, taking ``x^{-j} = x^0``.
    Returns the iterates ``x^0 .. x^steps`` as rows.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    n = p.n
    xs = np.empty((steps + 1, p.d))
    xs[0] = np.asarray(x0, dtype=np.float64)

    def it(k):
        return xs[max(k, 0)]

    for k in range(steps):
        fresh = p.component_gradient(k % n, xs[k])
        stale = p.component_gradient(k % n, it(k - n))
        avg = np.mean([p.component_gradient((k - i) % n, it(k - i)) for i in range(1, n + 1)], axis=0)
        xs[k + 1] = xs[k] - gamma * (fresh - stale + avg)
        if not np.all(np.isfinite(xs[k + 1])) or not np.linalg.norm(xs[k + 1]) <= 1e100:
            raise DivergenceError(k + 1)
    return xs


# -- traces ----------------------------------------------------------------


@dataclass
class TraceRecord:
    epoch: int
    grad_evals: int
    gamma: float
    suboptimality: float
    lyapunov: float | None
    wall_seconds: float


@dataclass
class Trace:
    method: str
    scheduler: str
    gamma: float
    path: str
    records: list[TraceRecord] = field(default_factory=list)
    diverged: bool = False
    diverged_at: int | None = None
    x: np.ndarray | None = None
    lyapunov_steps: np.ndarray | None = None  # V^k for every step k (diagnostics only)
    suboptimality_raw: np.ndarray | None = None  # f(x^{kn}) - f*, unclamped

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def lyapunov_block(prev: np.ndarray, block: np.ndarray, x_star: np.ndarray) -> np.ndarray:
    """``V`` for each row of ``block`` given the ``n`` iterates preceding it.

    ``prev`` holds ``x^{k-n}, ..., x^{k-1}`` (oldest first) and ``block`` holds
    ``x^k, x^{k+1}, ...``.
    """
    n = prev.shape[0]
    allx = np.concatenate([prev, block])
    m = block.shape[0]
    cur = allx[n:]
    v = np.einsum("ij,ij->i", cur - x_star, cur - x_star)
    hist = np.zeros(m)
    for j in range(1, n + 1):
        diff = cur - allx[n - j:n - j + m]
        hist += np.einsum("ij,ij->i", diff, diff)
    return v + hist / n


def run(p: FiniteSumProblem, method: str, gamma: float, epochs: int, seed: int = 0,
        scheduler_kind: str | None = None, jit: bool = False, diagnostics: bool = False,
        x0=None, f_star: float | None = None, x_star=None, path: str | None = None) -> Trace:
    """Run ``epochs`` passes of ``n`` steps and record one row per epoch.

    Epoch 0 is the state right after initialization. Divergence truncates the
    trace and sets ``diverged``; it never raises.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    method = canonical_method(method)
    sched_kind = scheduler_kind or DEFAULT_SCHEDULER[method]
    if path is None:
        path = JIT if jit else LITERAL
    elif jit and path != JIT:
        raise ValueError("jit=True conflicts with path")
    if diagnostics and path != LITERAL:
        raise ValueError("diagnostics need the literal dense path")
    if diagnostics and p.n * p.d > MAX_DIAGNOSTIC_SIZE:
        raise ValueError(f"diagnostics limited to n*d <= {MAX_DIAGNOSTIC_SIZE}")
    if f_star is None or (diagnostics and x_star is None):
        xs, fs = solve_reference(p)
        f_star = fs if f_star is None else f_star
        x_star = xs if x_star is None else x_star
    x0 = np.zeros(p.d) if x0 is None else np.asarray(x0, dtype=np.float64)

    t0 = time.perf_counter()
    st = init(p, x0, method, gamma, path=path)
    sched = Scheduler(sched_kind, p.n, seed)
    trace = Trace(method, sched_kind, float(gamma), path)
    raw = []
    vsteps = [] if diagnostics else None
    prev = np.tile(x0, (p.n, 1)) if diagnostics else None
    if diagnostics:
        vsteps.append(lyapunov_block(prev, x0[None, :], x_star))

    def record(epoch):
        sub = p.value(finalize(st, p)) - f_star
        raw.append(sub)
        lyap = float(vsteps[-1][-1]) if diagnostics else None
        trace.records.append(TraceRecord(epoch, st.grad_evals, float(gamma), max(sub, SUBOPT_FLOOR), lyap,
                                         time.perf_counter() - t0))

    record(0)
    for epoch in range(1, epochs + 1):
        if st.engine == "gd":
            try:
                gd_step(st, p)
                bad = -1
            except DivergenceError:
                bad = 0
            block = st.x[None, :] if diagnostics else None
        else:
            block = np.empty((p.n, p.d)) if diagnostics else None
            bad = advance(st, p, sched.epoch(), record=block)
        if bad >= 0:
            trace.diverged = True
            trace.diverged_at = st.k
            break
        if diagnostics:
            hist = np.concatenate([prev, block])
            vsteps.append(lyapunov_block(prev, block, x_star))
            prev = hist[-p.n:]
        record(epoch)
    trace.x = finalize(st, p).copy()
    trace.suboptimality_raw = np.array(raw)
    if diagnostics:
        trace.lyapunov_steps = np.concatenate(vsteps)
    return trace
