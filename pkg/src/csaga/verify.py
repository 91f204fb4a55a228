"""Self-contained theory checks on synthetic quadratics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diagnostics as G
from .objectives import random_quadratic_family, solve_reference
from .solvers import Scheduler, init, literal_csaga, run, step

THEOREM_N, THEOREM_D, THEOREM_MU, THEOREM_L = 10, 4, 1.0, 10.0
EPOCHS = 200
RANGE_POINTS = 20
RANGE_SPAN = 10.0  # stepsizes log-spaced on [gamma_max / RANGE_SPAN, gamma_max]


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def theorem_problem(seed: int = 0):
    """The n=10, d=4, mu=1, L=10 family plus its solution and a unit-distance start."""
    p = random_quadratic_family(THEOREM_N, THEOREM_D, THEOREM_MU, THEOREM_L, seed=seed)
    x_star, f_star = solve_reference(p, tol=1e-12)
    u = np.random.default_rng([seed, 11]).standard_normal(p.d)
    x0 = x_star + u / np.linalg.norm(u)
    return p, x_star, f_star, x0


def stepsize_range(tc: G.TheoryConstants, points: int = RANGE_POINTS, span: float = RANGE_SPAN) -> np.ndarray:
    return np.geomspace(tc.gamma_max / span, tc.gamma_max, points)


def check_theorem(seed: int = 0, epochs: int = EPOCHS) -> list[Check]:
    p, x_star, f_star, x0 = theorem_problem(seed)
    tc = G.TheoryConstants.of(p)
    tr = run(p, "csaga", tc.gamma_thm, epochs, x0=x0, f_star=f_star, x_star=x_star, diagnostics=True)
    V = tr.lyapunov_steps
    con = G.check_contraction(V, p.n, tc.rho_thm, slack=1e-12)
    cor = G.check_corollary(tr.suboptimality_raw, p.L, tc.rho_thm, V[0], slack=1e-12)
    out = [
        Check("contraction at the theoretical stepsize", con.passed and not tr.diverged,
              f"{len(con.violations)} violations over {con.checked} windows, max V^(k+n)/V^k = "
              f"{con.max_ratio:.6f} <= rho = {tc.rho_thm:.6f}"),
        Check("function-value bound", cor.passed,
              f"{len(cor.violations)} violations over {cor.checked} epochs"),
    ]
    fails = []
    for g in stepsize_range(tc):
        t = run(p, "csaga", g, epochs, x0=x0, f_star=f_star, x_star=x_star, diagnostics=True)
        rate = G.fit_rate(t.suboptimality_raw)
        rep = G.check_contraction(t.lyapunov_steps, p.n, tc.rho_thm)
        if t.diverged or not rate < 1 or not rep.passed:
            fails.append(g)
    out.append(Check("stepsize range up to gamma_max", not fails,
                     f"{RANGE_POINTS - len(fails)}/{RANGE_POINTS} stepsizes contract at rho"))
    return out


def check_recurrence(count: int = 1000, kmax: int = 60, seed: int = 0) -> Check:
    _, failures = G.recurrence_property_sweep(count, kmax, seed)
    return Check("eigenvalue recurrence bound", failures == 0, f"{failures} failures in {count} random (c1, c2)")


def check_oracle(problems: int = 20, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(problems):
        n = int(rng.integers(1, 9))
        d = int(rng.integers(2, 5))
        p = random_quadratic_family(n, d, 1.0, float(rng.uniform(1, 10)), seed=seed * 1000 + t)
        x0 = rng.standard_normal(d)
        gamma = 1.0 / (4 * p.L)
        ref = literal_csaga(p, x0, gamma, 10 * n)
        st = init(p, x0, "csaga", gamma)
        sched = Scheduler("cyclic", n)
        for k in range(10 * n):
            step(st, p, sched)
            worst = max(worst, float(np.abs(st.x - ref[k + 1]).max()))
    return Check("table engine vs literal recursion", worst <= 1e-12, f"max deviation {worst:.2e}")


def check_single_component(steps: int = 100, seed: int = 0) -> Check:
    p = random_quadratic_family(1, 3, 1.0, 5.0, seed=seed)
    x0 = np.random.default_rng(seed).standard_normal(3)
    gamma = 1.0 / p.L
    gd = [x0]
    for _ in range(steps):
        gd.append(gd[-1] - gamma * p.full_gradient(gd[-1]))
    worst = 0.0
    for method in ("csaga", "iag", "sag"):
        st = init(p, x0, method, gamma)
        sched = Scheduler("cyclic", 1)
        for k in range(steps):
            step(st, p, sched)
            worst = max(worst, float(np.abs(st.x - gd[k + 1]).max()))
    return Check("n = 1 reduces to gradient descent", worst <= 1e-14, f"max deviation {worst:.2e}")


def check_delta(seed: int = 0, epochs: int = 20) -> Check:
    p, x_star, f_star, x0 = theorem_problem(seed)
    tc = G.TheoryConstants.of(p)
    st = init(p, x0, "csaga", tc.gamma_thm)
    sched = Scheduler("cyclic", p.n)
    xs = [x0]
    for _ in range(epochs * p.n):
        step(st, p, sched)
        xs.append(st.x.copy())
    res, bound = G.delta_trace(p, np.array(xs), x_star, tc.gamma_thm)
    bad = int(np.sum(res > bound))
    return Check("n-step residual bound", bad == 0, f"{bad} of {res.size} windows exceed the bound")


def verify_all(seed: int = 0) -> list[Check]:
    return [
        *check_theorem(seed),
        check_recurrence(seed=seed),
        check_oracle(seed=seed),
        check_single_component(seed=seed),
        check_delta(seed=seed),
    ]
