"""Numerical checks of the C-SAGA linear-rate guarantees.

The Lyapunov function is

    V^k = |x^k - x*|^2 + (1/n) sum_{j=1..n} |x^k - x^{k-j}|^2

and for ``gamma = mu / (130 sqrt(n(n+1)) L^2)`` it contracts every epoch by
at least ``1 - 1/(368 kappa^2)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .objectives import FiniteSumProblem, random_quadratic_family, solve_reference
from .solvers import HistoryWindow, run
from .vecmath import DimensionError, sq_dist

RATE_FLOOR = 1e-13
SWEEP_HEADER = ("kappa", "n", "method", "gamma", "empirical_rate", "theoretical_rate", "converged")


@dataclass(frozen=True)
class TheoryConstants:
    n: int
    mu: float
    L: float

    @property
    def kappa(self) -> float:
        return self.L / self.mu

    @property
    def gamma_max(self) -> float:
        return self.mu / (65.0 * math.sqrt(self.n * (self.n + 1)) * self.L**2)

    @property
    def gamma_thm(self) -> float:
        return self.mu / (130.0 * math.sqrt(self.n * (self.n + 1)) * self.L**2)

    @property
    def rho_thm(self) -> float:
        return 1.0 - 1.0 / (368.0 * self.kappa**2)

    @classmethod
    def of(cls, p: FiniteSumProblem) -> "TheoryConstants":
        mu, L, _ = p.constants()
        return cls(p.n, mu, L)


def lyapunov(window: HistoryWindow, x_star) -> float:
    if not window.warm:
        raise ValueError("history window holds fewer than n + 1 iterates")
    xs = window.as_array()
    xk = xs[0]
    hist = sum(sq_dist(xk, xs[j]) for j in range(1, window.n + 1))
    return sq_dist(xk, x_star) + hist / window.n


@dataclass
class ContractionReport:
    rho: float
    slack: float
    checked: int
    violations: list[tuple[int, float, float]] = field(default_factory=list)  # (k, V^k, V^{k+n})
    max_ratio: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations


def check_contraction(trace, n: int, rho: float, slack: float = 1e-12) -> ContractionReport:
    """Check ``V^{k+n} <= rho V^k + slack V^0`` for every recorded ``k``.

    ``trace`` is the per-step Lyapunov sequence ``V^0, V^1, ...``.
    """
    v = np.asarray(trace, dtype=float)
    rep = ContractionReport(rho, slack, max(v.size - n, 0))
    if v.size <= n:
        return rep
    allow = slack * v[0]
    head, tail = v[:-n], v[n:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(head > 0, tail / head, np.where(tail > 0, np.inf, 0.0))
    bad = ~(tail <= rho * head + allow)
    rep.violations = [(int(k), float(head[k]), float(tail[k])) for k in np.flatnonzero(bad)]
    finite = ratio[np.isfinite(ratio)]
    rep.max_ratio = float(np.max(ratio)) if ratio.size else 0.0
    if finite.size < ratio.size:
        rep.max_ratio = math.inf
    return rep


@dataclass
class CorollaryReport:
    checked: int
    violations: list[tuple[int, float, float]] = field(default_factory=list)  # (k, gap, bound)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_corollary(suboptimality, L: float, rho: float, V0: float, slack: float = 1e-12) -> CorollaryReport:
    """Check ``f(x^{kn}) - f* <= (L/2) rho^k V^0 + slack`` for each epoch ``k``."""
    gap = np.asarray(suboptimality, dtype=float)
    k = np.arange(gap.size)
    bound = 0.5 * L * rho**k * V0
    bad = ~(gap <= bound + slack)
    rep = CorollaryReport(int(gap.size))
    rep.violations = [(int(i), float(gap[i]), float(bound[i])) for i in np.flatnonzero(bad)]
    return rep


def delta_residual(x_k, x_k_plus_n, grad_at_xk, n: int, gamma: float) -> float:
    """Squared norm of the deviation of an n-step segment from one full-gradient step."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    a, b, g = (np.asarray(v, dtype=float) for v in (x_k, x_k_plus_n, grad_at_xk))
    if not a.shape == b.shape == g.shape:
        raise DimensionError("x_k, x_k_plus_n and the gradient differ in shape")
    r = (b - a + n * gamma * g) / (n * gamma)
    return float(r @ r)


def delta_bound(x_k, history, x_star, n: int, gamma: float, L: float) -> float:
    """Upper bound on :func:`delta_residual` in terms of the iterate window.

    ``history`` holds ``x^{k-1}, ..., x^{k-n}``; ``c = gamma L sqrt(n(n+1))``.
    """
    c = gamma * L * math.sqrt(n * (n + 1))
    e = math.exp(8 * c * c)
    hist = float(np.sum((np.asarray(history) - x_k) ** 2))
    return 50 * c * c * e * L**2 * sq_dist(x_k, x_star) + (4 + 200 * c * c * e) * L**2 / n * hist


def delta_trace(p: FiniteSumProblem, iterates, x_star, gamma: float, L: float | None = None):
    """Residual and bound for every ``k`` along a recorded trajectory.

    ``iterates`` are ``x^0, x^1, ...`` with ``x^{-j} = x^0``. Returns two
    arrays ``(residual, bound)`` indexed by ``k``.
    """
    xs = np.asarray(iterates, dtype=float)
    n = p.n
    L = p.L if L is None else L
    padded = np.concatenate([np.tile(xs[0], (n, 1)), xs])
    res, bnd = [], []
    for k in range(xs.shape[0] - n):
        xk = xs[k]
        res.append(delta_residual(xk, xs[k + n], p.full_gradient(xk), n, gamma))
        history = padded[k:k + n][::-1]  # x^{k-1}, ..., x^{k-n}
        bnd.append(delta_bound(xk, history, x_star, n, gamma, L))
    return np.array(res), np.array(bnd)


# -- eigenvalue recurrence ---------------------------------------------------


@dataclass
class RecurrenceReport:
    c1: float
    c2: float
    kmax: int
    lam1: float
    failures: list[tuple[int, str, float, float]] = field(default_factory=list)  # (k, which, value, bound)

    @property
    def passed(self) -> bool:
        return not self.failures


def recurrence_bounds(c1, c2, k):
    """Bound on ``(sigma_k, tau_k)`` from the dominant eigenpair; arrays broadcast."""
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    s = np.sqrt(c1 * c1 + 4 * c2)
    lam1 = 1 + (c1 + s) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(s > 0, c1 / (2 * s), 0.0)
        b = np.where(s > 0, 2 * c2 / (2 * s), 0.0)
    pk = lam1**k
    return lam1, pk * (1 + a), pk * b


def recurrence_bound_check(c1: float, c2: float, kmax: int, rtol: float = 1e-9) -> RecurrenceReport:
    """Iterate ``(sigma, tau) <- [[1+c1, 1], [c2, 1]] (sigma, tau)`` from ``(1, 0)``
    and compare against the eigenvalue bound for ``k = 0..kmax``."""
    if c1 < 0 or c2 < 0 or 1 + c1 < c2:
        raise ValueError("need c1, c2 >= 0 and 1 + c1 >= c2")
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    lam1, _, _ = recurrence_bounds(c1, c2, 0)
    rep = RecurrenceReport(c1, c2, kmax, float(lam1))
    sigma, tau = 1.0, 0.0
    for k in range(kmax + 1):
        _, sb, tb = recurrence_bounds(c1, c2, k)
        for which, val, bnd in (("sigma", sigma, float(sb)), ("tau", tau, float(tb))):
            if val > bnd + rtol * abs(bnd):
                rep.failures.append((k, which, val, bnd))
        if c2 == 0:
            closed = (1 + c1) ** k
            if abs(sigma - closed) > rtol * closed or tau != 0.0:
                rep.failures.append((k, "closed_form", sigma, closed))
        sigma, tau = (1 + c1) * sigma + tau, c2 * sigma + tau
    return rep


def recurrence_property_sweep(count: int = 1000, kmax: int = 60, seed: int = 0, hi: float = 10.0, rtol: float = 1e-9):
    """Vectorized recurrence check over random admissible ``(c1, c2)`` in ``[0, hi]^2``.

    Returns ``(pairs, failures)`` with ``failures`` the number of pairs having
    any component above its bound by more than ``rtol`` relative.
    """
    rng = np.random.default_rng(seed)
    pairs = np.empty((0, 2))
    while pairs.shape[0] < count:
        cand = rng.uniform(0, hi, size=(2 * count, 2))
        pairs = np.concatenate([pairs, cand[1 + cand[:, 0] >= cand[:, 1]]])
    pairs = pairs[:count]
    c1, c2 = pairs[:, 0], pairs[:, 1]
    sigma = np.ones(count)
    tau = np.zeros(count)
    bad = np.zeros(count, dtype=bool)
    for k in range(kmax + 1):
        _, sb, tb = recurrence_bounds(c1, c2, k)
        bad |= sigma > sb * (1 + rtol)
        bad |= tau > tb * (1 + rtol)
        sigma, tau = (1 + c1) * sigma + tau, c2 * sigma + tau
    return pairs, int(bad.sum())


# -- rates ---------------------------------------------------------------------


def fit_rate(values, floor: float = RATE_FLOOR) -> float:
    """Per-sample geometric rate from a least-squares fit of ``log(values)``.

    The sequence is cut where it first drops below ``floor`` (or stops being
    finite) and the fit uses the last half of what remains. Returns ``nan``
    when fewer than two points are usable.
    """
    v = np.asarray(values, dtype=float)
    low = np.flatnonzero(~(np.isfinite(v) & (v >= floor)))
    v = v[:low[0]] if low.size else v
    idx = np.arange(v.size)
    half = v.size // 2
    idx, v = idx[half:], v[half:]
    if v.size < 2:
        return math.nan
    slope = np.polyfit(idx, np.log(v), 1)[0]
    return float(math.exp(slope))


@dataclass
class SweepRow:
    kappa: float
    n: int
    method: str
    gamma: float
    empirical_rate: float
    theoretical_rate: float
    converged: bool


def rate_sweep(kappas, ns, d: int = 4, epochs: int = 200, seed: int = 0, grid=None, family=None) -> list[SweepRow]:
    """Empirical per-epoch rates of C-SAGA and IAG over a quadratic family.

    Each ``(kappa, n)`` cell runs C-SAGA at the theoretical stepsize and both
    methods at their grid-best stepsize. ``family(n, d, kappa, seed)`` builds
    the problem (defaults to :func:`random_quadratic_family` with ``mu = 1``).
    """
    if family is None:
        def family(n, d, kappa, seed):
            return random_quadratic_family(n, d, 1.0, float(kappa), seed=seed)
    if grid is None:
        grid = 2.0 ** np.arange(0, -15, -1)
    rows = []
    for kappa in kappas:
        for n in ns:
            p = family(n, d, kappa, seed)
            tc = TheoryConstants.of(p)
            x_star, f_star = solve_reference(p)
            x0 = x_star + _unit(p.d, seed)
            cells = [("csaga", tc.gamma_thm, tc.rho_thm)]
            for method in ("csaga", "iag"):
                best = None
                for g in grid:
                    gamma = float(g) / p.L
                    tr = run(p, method, gamma, epochs, seed=seed, x0=x0, f_star=f_star)
                    if tr.diverged:
                        continue
                    final = tr.suboptimality_raw[-1]
                    if best is None or final < best[1]:
                        best = (gamma, final)
                if best is not None:
                    cells.append((method, best[0], math.nan))
            for method, gamma, theory in cells:
                tr = run(p, method, gamma, epochs, seed=seed, x0=x0, f_star=f_star)
                rate = math.nan if tr.diverged else fit_rate(np.maximum(tr.suboptimality_raw, 0.0))
                converged = (not tr.diverged) and (rate < 1 or tr.suboptimality_raw[-1] < RATE_FLOOR)
                rows.append(SweepRow(float(kappa), int(n), method, float(gamma), rate, theory, bool(converged)))
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([r.kappa, r.n, r.method, repr(r.gamma), _fmt(r.empirical_rate), _fmt(r.theoretical_rate),
                    int(r.converged)])
    return buf.getvalue()


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def _unit(d: int, seed: int) -> np.ndarray:
    u = np.random.default_rng([seed, 7]).standard_normal(d)
    return u / np.linalg.norm(u)
