import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csaga import diagnostics as G
from csaga import objectives as O
from csaga import solvers as S


def test_theory_constants():
    tc = G.TheoryConstants(10, 1.0, 10.0)
    assert tc.kappa == 10.0
    assert tc.gamma_max == pytest.approx(1.0 / (65 * math.sqrt(110) * 100))
    assert tc.gamma_thm == pytest.approx(tc.gamma_max / 2)
    assert tc.rho_thm == pytest.approx(1 - 1 / 36800)
    assert 0 < tc.gamma_thm < tc.gamma_max and 0 < tc.rho_thm < 1
    p = O.random_quadratic_family(10, 4, 1.0, 10.0)
    assert G.TheoryConstants.of(p) == tc


def test_lyapunov_examples():
    x_star = np.array([1.0, 2.0])
    w = S.HistoryWindow.filled(3, x_star)
    assert G.lyapunov(w, x_star) == 0.0
    w = S.HistoryWindow.filled(3, x_star + np.array([1.0, 0.0]))
    assert G.lyapunov(w, x_star) == 1.0
    w = S.HistoryWindow.filled(2, np.array([1.0]))
    assert G.lyapunov(w, np.array([0.0])) == 1.0


def test_lyapunov_history_term():
    w = S.HistoryWindow(2, 1)
    for v in (3.0, 1.0, 0.0):
        w.push(np.array([v]))
    # x^k = 0, history 1 and 3: (1 + 9) / 2
    assert G.lyapunov(w, np.array([0.0])) == 5.0


def test_lyapunov_cold_window():
    w = S.HistoryWindow(3, 1)
    w.push(np.zeros(1))
    with pytest.raises(ValueError):
        G.lyapunov(w, np.zeros(1))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6))
def test_lyapunov_permutation_insensitive(n, seed):
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((n + 1, 3))
    x_star = rng.standard_normal(3)
    perm = np.concatenate([rng.permutation(n), [n]])  # keep x^k (pushed last) in place
    vals = []
    for order in (np.arange(n + 1), perm):
        w = S.HistoryWindow(n, 3)
        for row in xs[order]:
            w.push(row)
        vals.append(G.lyapunov(w, x_star))
    assert vals[0] == pytest.approx(vals[1], rel=1e-12)


def test_lyapunov_block_agrees_with_window():
    rng = np.random.default_rng(1)
    n, d = 3, 2
    xs = rng.standard_normal((10, d))
    x_star = rng.standard_normal(d)
    prev = np.tile(xs[0], (n, 1))
    block = S.lyapunov_block(prev, xs, x_star)
    w = S.HistoryWindow.filled(n, xs[0])
    for k in range(10):
        if k:
            w.push(xs[k])
        assert block[k] == pytest.approx(G.lyapunov(w, x_star), rel=1e-12)


def test_contraction_reports():
    assert G.check_contraction(np.zeros(50), 5, 0.9).passed
    good = 0.5 ** np.arange(40)
    rep = G.check_contraction(good, 2, 0.25 + 1e-12)
    assert rep.passed and rep.max_ratio == pytest.approx(0.25)
    bad = G.check_contraction(2.0 ** np.arange(20), 3, 0.9)
    assert not bad.passed and len(bad.violations) == 17


def test_contraction_on_divergent_run():
    p = O.random_quadratic_family(5, 3, seed=0)
    x_star, f_star = O.solve_reference(p)
    tr = S.run(p, "csaga", 100.0, 20, x0=x_star + 1, x_star=x_star, f_star=f_star, diagnostics=True)
    rep = G.check_contraction(tr.lyapunov_steps, p.n, 0.99)
    assert not rep.passed


def test_corollary_reports():
    assert G.check_corollary([0.0, 0.0, 0.0], 10.0, 0.5, 0.0).passed
    rep = G.check_corollary([5.0, 2.5, 2.0], 10.0, 0.5, 1.0)
    assert [v[0] for v in rep.violations] == [2]


def test_corollary_epoch_zero_from_smoothness():
    p = O.random_quadratic_family(4, 3, 1.0, 10.0, seed=2)
    x_star, f_star = O.solve_reference(p)
    x0 = x_star + np.array([0.3, -0.5, 0.2])
    V0 = float(np.sum((x0 - x_star) ** 2))
    assert G.check_corollary([p.value(x0) - f_star], p.L, 0.9, V0).passed


def test_delta_residual_examples():
    p = O.random_quadratic_family(3, 2, seed=0)
    x = np.array([1.0, -1.0])
    g = p.full_gradient(x)
    gamma = 0.01
    assert G.delta_residual(x, x - 3 * gamma * g, g, 3, gamma) <= 1e-12
    x_star, _ = O.solve_reference(p)
    assert G.delta_residual(x_star, x_star, p.full_gradient(x_star), 3, gamma) <= 1e-12
    assert G.delta_residual(np.zeros(2), np.ones(2), np.zeros(2), 2, 0.5) == 2.0
    with pytest.raises(ValueError):
        G.delta_residual(np.zeros(2), np.zeros(3), np.zeros(2), 2, 0.5)


def test_delta_bound_on_trajectory():
    p = O.random_quadratic_family(10, 4, 1.0, 10.0, seed=0)
    tc = G.TheoryConstants.of(p)
    x_star, _ = O.solve_reference(p)
    xs = S.literal_csaga(p, x_star + 0.5, tc.gamma_thm, 200)
    res, bound = G.delta_trace(p, xs, x_star, tc.gamma_thm)
    assert res.size == 191
    assert np.all(res <= bound)


def test_recurrence_examples():
    rep = G.recurrence_bound_check(0.0, 0.0, 10)
    assert rep.passed and rep.lam1 == 1.0
    rep = G.recurrence_bound_check(3.0, 4.0, 1)
    assert rep.lam1 == 5.0
    lam1, sb, tb = G.recurrence_bounds(3.0, 4.0, 1)
    assert float(sb) == pytest.approx(6.5) and float(tb) == pytest.approx(4.0)
    assert rep.passed  # sigma_1 = 4 <= 6.5, tau_1 = 4 <= 4 (equality)


def test_recurrence_c2_zero_closed_form():
    assert G.recurrence_bound_check(2.5, 0.0, 40).passed


def test_recurrence_matrix_power_oracle():
    c1, c2 = 1.7, 2.2
    M = np.array([[1 + c1, 1.0], [c2, 1.0]])
    for k in range(1, 25):
        sigma, tau = np.linalg.matrix_power(M, k) @ np.array([1.0, 0.0])
        _, sb, tb = G.recurrence_bounds(c1, c2, k)
        assert sigma <= sb * (1 + 1e-9) and tau <= tb * (1 + 1e-9)


def test_recurrence_preconditions():
    for c1, c2 in ((-1.0, 0.0), (0.0, -1.0), (1.0, 3.0)):
        with pytest.raises(ValueError):
            G.recurrence_bound_check(c1, c2, 5)
    with pytest.raises(ValueError):
        G.recurrence_bound_check(1.0, 1.0, 0)


def test_recurrence_sweep_agrees_with_scalar_check():
    pairs, failures = G.recurrence_property_sweep(50, 30, seed=4)
    assert failures == 0
    assert all(G.recurrence_bound_check(c1, c2, 30).passed for c1, c2 in pairs)
    assert np.all(1 + pairs[:, 0] >= pairs[:, 1])


def test_fit_rate():
    v = 0.8 ** np.arange(40)
    assert G.fit_rate(v) == pytest.approx(0.8, rel=1e-10)
    assert math.isnan(G.fit_rate([1.0, 1e-20, 1e-20, 1e-20]))


def test_rate_sweep_kappa_one():
    rows = G.rate_sweep([1.0], [5], d=3, epochs=200)
    theorem = [r for r in rows if not math.isnan(r.theoretical_rate)]
    assert len(theorem) == 1
    r = theorem[0]
    assert r.theoretical_rate == pytest.approx(1 - 1 / 368)
    assert r.empirical_rate <= 1 - 1 / 368
    assert all(r.converged for r in rows)
    text = G.sweep_csv(rows)
    assert text.splitlines()[0] == "kappa,n,method,gamma,empirical_rate,theoretical_rate,converged"
    assert len(text.splitlines()) == len(rows) + 1


def test_fit_rate_cuts_at_floor():
    v = np.concatenate([0.5 ** np.arange(30), np.full(30, 1e-17)])
    assert G.fit_rate(v) == pytest.approx(0.5, rel=1e-10)
