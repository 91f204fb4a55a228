import numpy as np
import pytest
from scipy.optimize import minimize

from csaga import data as D
from csaga import objectives as O


def _tiny_glm(loss, lam, a=(1.0, 0.0), y=1.0):
    ds = D.Dataset.from_dense(np.array([a]), np.array([y]))
    return O.glm_problem(ds, loss, lam)


def _problems():
    rng = np.random.default_rng(0)
    ds = D.make_sparse_classification(12, 6, 3, seed=2)
    Xr = rng.standard_normal((9, 5))
    ridge = O.glm_problem(D.Dataset.from_dense(Xr, rng.standard_normal(9)), O.RIDGE, 0.3)
    return [O.glm_problem(ds, O.LOGISTIC, 0.1), ridge, O.random_quadratic_family(5, 4, 1.0, 8.0, seed=1)]


def test_gradient_examples():
    p = _tiny_glm(O.LOGISTIC, 0.0)
    np.testing.assert_array_equal(p.component_gradient(0, np.zeros(2)), [-0.5, 0.0])
    q = O.quadratic_problem(np.eye(3)[None], np.zeros((1, 3)))
    x = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(q.component_gradient(0, x), x)
    r = _tiny_glm(O.RIDGE, 0.0)
    np.testing.assert_array_equal(r.component_gradient(0, np.array([1.0, 0.0])), [0.0, 0.0])


def test_loss_scalar_examples():
    p = _tiny_glm(O.LOGISTIC, 0.0)
    assert p.component_loss_scalar(0, np.zeros(2)) == (0.0, -0.5)
    r = _tiny_glm(O.RIDGE, 0.0, y=2.0)
    assert r.component_loss_scalar(0, np.array([2.0, 0.0]))[1] == 0.0
    _, deriv = p.component_loss_scalar(0, np.array([800.0, 0.0]))
    assert deriv == pytest.approx(0.0, abs=1e-300)
    q = O.random_quadratic_family(2, 2, seed=0)
    with pytest.raises(TypeError):
        q.component_loss_scalar(0, np.zeros(2))


def test_sigmoid_stable():
    t = np.array([-1000.0, -30.0, 0.0, 30.0, 1000.0])
    with np.errstate(over="raise"):
        s = O.sigmoid(t)
    assert np.all(np.isfinite(s))
    assert s[2] == 0.5 and s[0] == 0.0 and s[-1] == 1.0


def test_index_and_dimension_errors():
    p = _problems()[0]
    with pytest.raises(IndexError):
        p.component_gradient(p.n, np.zeros(p.d))
    with pytest.raises(ValueError):
        p.component_gradient(0, np.zeros(p.d + 1))


@pytest.mark.parametrize("which", [0, 1, 2])
def test_gradient_finite_differences(which):
    p = _problems()[which]
    rng = np.random.default_rng(which)
    h = 1e-6
    for _ in range(5):
        i = int(rng.integers(p.n))
        x = rng.standard_normal(p.d)
        g = p.component_gradient(i, x)
        fd = np.array([(p.component_value(i, x + h * e) - p.component_value(i, x - h * e)) / (2 * h)
                       for e in np.eye(p.d)])
        assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("which", [0, 1, 2])
def test_strong_convexity_and_lipschitz(which):
    p = _problems()[which]
    rng = np.random.default_rng(10 + which)
    for _ in range(50):
        i = int(rng.integers(p.n))
        x, y = rng.standard_normal((2, p.d)) * 3
        gx, gy = p.component_gradient(i, x), p.component_gradient(i, y)
        assert (x - y) @ (gx - gy) >= p.mu * np.sum((x - y) ** 2) - 1e-10
        assert np.linalg.norm(gx - gy) <= p.L * np.linalg.norm(x - y) + 1e-10


@pytest.mark.parametrize("which", [0, 1])
def test_loss_part_reconstruction(which):
    p = _problems()[which]
    rng = np.random.default_rng(3)
    for i in range(p.n):
        x = rng.standard_normal(p.d)
        _, deriv = p.component_loss_scalar(i, x)
        want = p.lam * x
        row = p.dataset.row(i)
        want[row.indices] += deriv * row.values
        np.testing.assert_array_equal(p.component_gradient(i, x), want)


def test_full_gradient_is_mean():
    for p in _problems():
        x = np.random.default_rng(0).standard_normal(p.d)
        mean = np.mean([p.component_gradient(i, x) for i in range(p.n)], axis=0)
        np.testing.assert_allclose(p.full_gradient(x), mean, rtol=1e-12, atol=1e-14)
        assert p.value(x) == pytest.approx(np.mean([p.component_value(i, x) for i in range(p.n)]), rel=1e-12)


def test_full_gradient_identity_centers():
    b = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    p = O.quadratic_problem(np.tile(np.eye(2), (3, 1, 1)), b)
    x = np.array([0.3, -0.7])
    np.testing.assert_allclose(p.full_gradient(x), x - b.mean(axis=0), atol=1e-15)
    one = O.random_quadratic_family(1, 3, seed=4)
    np.testing.assert_array_equal(one.full_gradient(x[:1].repeat(3)), one.component_gradient(0, x[:1].repeat(3)))


def test_constants_logistic():
    X = np.array([[2.0, 0.0], [0.0, 2.0], [np.sqrt(2), np.sqrt(2)]])
    p = O.glm_problem(D.Dataset.from_dense(X, np.array([1.0, -1.0, 1.0])), O.LOGISTIC, 0.1)
    mu, L, kappa = p.constants()
    assert (mu, L) == (0.1, pytest.approx(1.1))
    assert kappa == pytest.approx(11.0)


def test_constants_isotropic_and_eigensolve_oracle():
    iso = O.quadratic_problem(np.tile(3.0 * np.eye(3), (2, 1, 1)), np.zeros((2, 3)))
    assert iso.constants() == (3.0, 3.0, 1.0)
    rng = np.random.default_rng(5)
    A = []
    for _ in range(4):
        M = rng.standard_normal((3, 3))
        A.append(M @ M.T + 0.1 * np.eye(3))
    p = O.quadratic_problem(np.array(A), np.zeros((4, 3)))
    # brute force: Rayleigh quotient extremes via numpy's general eigensolver
    ev = np.concatenate([np.real(np.linalg.eig(a)[0]) for a in A])
    assert p.mu == pytest.approx(ev.min(), rel=1e-10)
    assert p.L == pytest.approx(ev.max(), rel=1e-10)


def test_not_strongly_convex():
    p = _tiny_glm(O.LOGISTIC, 0.0)
    with pytest.raises(O.NotStronglyConvexError):
        p.constants()


def test_quadratic_validation():
    with pytest.raises(ValueError):
        O.quadratic_problem(np.array([[[1.0, 2.0], [0.0, 1.0]]]), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        O.quadratic_problem(np.tile(np.eye(65), (1, 1, 1)), np.zeros((1, 65)))


def test_family_constants_exact():
    p = O.random_quadratic_family(10, 4, 1.0, 10.0, seed=0)
    assert (p.mu, p.L) == (1.0, 10.0)
    ev = np.linalg.eigvalsh(p.A)
    assert ev.min() == pytest.approx(1.0, abs=1e-12) and ev.max() == pytest.approx(10.0, abs=1e-12)


def test_solve_reference_1d():
    p = O.quadratic_from_centers(np.ones((2, 1, 1)), np.array([[1.0], [-1.0]]))
    x, f = O.solve_reference(p)
    assert abs(x[0]) < 1e-15 and f == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("which", [0, 1, 2])
def test_solve_reference_gradient_tol(which):
    p = _problems()[which]
    x, f = O.solve_reference(p, tol=1e-9)
    assert np.linalg.norm(p.full_gradient(x)) <= 1e-9
    assert f == p.value(x)


def test_solve_reference_matches_lbfgs():
    ds = D.subsample(D.make_sparse_classification(200, 30, 5, seed=7), 0.05, seed=1)
    p = O.glm_problem(ds, O.LOGISTIC, 0.05)
    _, f = O.solve_reference(p, tol=1e-10)
    res = minimize(p.value, np.ones(p.d), jac=p.full_gradient, method="L-BFGS-B",
                   options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 10000})
    assert abs(f - res.fun) <= 1e-8


def test_solve_reference_cap():
    p = _problems()[0]
    with pytest.raises(O.ConvergenceError) as ei:
        O.solve_reference(p, tol=1e-14, max_iter=3)
    assert ei.value.grad_norm > 1e-14
