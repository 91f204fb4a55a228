"""Finite-sum objectives ``f(x) = (1/n) sum_i f_i(x)``.

Three component families are supported:

* ``logistic``: ``log(1 + exp(-y_i a_i.x)) + (lam/2)|x|^2``
* ``ridge``: ``0.5 (a_i.x - y_i)^2 + (lam/2)|x|^2``
* ``quadratic_explicit``: ``0.5 x'A_i x - b_i'x + c_i`` with dense symmetric ``A_i``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .vecmath import DimensionError

LOGISTIC = "logistic"
RIDGE = "ridge"
QUADRATIC = "quadratic_explicit"
GLM_KINDS = (LOGISTIC, RIDGE)
LOSS_CODES = {LOGISTIC: 0, RIDGE: 1, QUADRATIC: 2}

MAX_EIG_DIM = 64


class NotStronglyConvexError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, grad_norm: float):
        super().__init__(f"{msg} (last gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


def sigmoid(t):
    """Numerically stable logistic sigmoid."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def _scalar_deriv(kind: str, inner, y):
    """Derivative of the unregularized scalar loss at ``inner = a.x``."""
    if kind == LOGISTIC:
        return -y * sigmoid(-y * inner)
    return inner - y


@dataclass(eq=False)
class FiniteSumProblem:
    """Immutable finite-sum problem with cached constants.

    ``mu`` may be 0 for GLM losses with ``lam == 0``; :meth:`constants` then
    raises, but benchmarking still works.
    """

    loss_kind: str
    n: int
    d: int
    lam: float
    mu: float
    L: float
    dataset: Dataset | None = None
    A: np.ndarray | None = field(default=None, repr=False)
    b: np.ndarray | None = field(default=None, repr=False)
    c: np.ndarray | None = field(default=None, repr=False)

    @property
    def kappa(self) -> float:
        return self.L / self.mu if self.mu > 0 else math.inf

    @property
    def is_glm(self) -> bool:
        return self.loss_kind in GLM_KINDS

    def _check(self, i: int | None = None, x=None):
        if i is not None and not 0 <= i < self.n:
            raise IndexError(f"component index {i} outside [0, {self.n})")
        if x is not None:
            x = np.asarray(x, dtype=np.float64)
            if x.shape != (self.d,):
                raise DimensionError(f"expected length {self.d}, got shape {x.shape}")
            return x

    # -- per-component ------------------------------------------------------

    def inner(self, i: int, x: np.ndarray) -> float:
        ds = self.dataset
        lo, hi = ds.indptr[i], ds.indptr[i + 1]
        return float(ds.data[lo:hi] @ x[ds.indices[lo:hi]])

    def component_value(self, i: int, x) -> float:
        x = self._check(i, x)
        if self.loss_kind == QUADRATIC:
            return float(0.5 * x @ self.A[i] @ x - self.b[i] @ x + self.c[i])
        t = self.inner(i, x)
        y = self.dataset.labels[i]
        if self.loss_kind == LOGISTIC:
            loss = float(np.logaddexp(0.0, -y * t))
        else:
            loss = 0.5 * (t - y) ** 2
        return loss + 0.5 * self.lam * float(x @ x)

    def component_gradient(self, i: int, x) -> np.ndarray:
        x = self._check(i, x)
        if self.loss_kind == QUADRATIC:
            return self.A[i] @ x - self.b[i]
        _, deriv = self.component_loss_scalar(i, x)
        g = self.lam * x
        ds = self.dataset
        lo, hi = ds.indptr[i], ds.indptr[i + 1]
        g[ds.indices[lo:hi]] += deriv * ds.data[lo:hi]
        return g

    def component_loss_scalar(self, i: int, x) -> tuple[float, float]:
        """Return ``(a_i.x, l'(a_i.x))`` for GLM losses."""
        if not self.is_glm:
            raise TypeError(f"scalar loss derivative undefined for {self.loss_kind}")
        x = self._check(i, x)
        t = self.inner(i, x)
        return t, float(_scalar_deriv(self.loss_kind, t, self.dataset.labels[i]))

    # -- full objective -----------------------------------------------------

    def value(self, x) -> float:
        x = self._check(x=x)
        if self.loss_kind == QUADRATIC:
            quad = np.einsum("j,ijk,k->", x, self.A, x) / self.n
            return float(0.5 * quad - self.b.mean(axis=0) @ x + self.c.mean())
        t = self.dataset.csr() @ x
        y = self.dataset.labels
        if self.loss_kind == LOGISTIC:
            loss = np.logaddexp(0.0, -y * t).mean()
        else:
            loss = 0.5 * np.mean((t - y) ** 2)
        return float(loss + 0.5 * self.lam * (x @ x))

    def full_gradient(self, x) -> np.ndarray:
        x = self._check(x=x)
        if self.loss_kind == QUADRATIC:
            return self.A.mean(axis=0) @ x - self.b.mean(axis=0)
        X = self.dataset.csr()
        deriv = _scalar_deriv(self.loss_kind, X @ x, self.dataset.labels)
        return X.T @ deriv / self.n + self.lam * x

    def constants(self) -> tuple[float, float, float]:
        """``(mu, L, kappa)``; raises if not strongly convex."""
        if not self.mu > 0:
            raise NotStronglyConvexError(f"mu = {self.mu} (lambda = {self.lam}): not strongly convex")
        return self.mu, self.L, self.kappa


def glm_problem(ds: Dataset, loss: str = LOGISTIC, lam: float = 0.0) -> FiniteSumProblem:
    """Logistic or ridge problem over the rows of ``ds``.

    Smoothness uses the per-row bound ``L_i = c |a_i|^2 + lam`` with
    ``c = 1/4`` (logistic) or ``1`` (ridge); ``L = max_i L_i``.
    """
    if loss not in GLM_KINDS:
        raise ValueError(f"unknown GLM loss {loss!r}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if ds.n == 0:
        raise ValueError("empty dataset")
    if loss == LOGISTIC and not np.all(np.isin(ds.labels, (-1.0, 1.0))):
        raise ValueError("logistic loss needs labels in {-1, +1}")
    curv = 0.25 if loss == LOGISTIC else 1.0
    L = curv * float(ds.row_sq_norms().max()) + lam
    return FiniteSumProblem(loss, ds.n, ds.d, float(lam), float(lam), L, dataset=ds)


def quadratic_problem(A, b, c=None) -> FiniteSumProblem:
    """Explicit quadratic components ``0.5 x'A_i x - b_i'x + c_i``.

    ``mu`` and ``L`` are the extreme eigenvalues over all ``A_i``, found by a
    dense symmetric eigensolve (``d <= 64``).
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise ValueError("A must have shape (n, d, d)")
    n, d, _ = A.shape
    if b.shape != (n, d):
        raise ValueError(f"b must have shape {(n, d)}")
    if d > MAX_EIG_DIM:
        raise ValueError(f"explicit quadratics limited to d <= {MAX_EIG_DIM}")
    if not np.allclose(A, A.transpose(0, 2, 1), rtol=0, atol=1e-12):
        raise ValueError("A_i must be symmetric")
    A = 0.5 * (A + A.transpose(0, 2, 1))
    c = np.zeros(n) if c is None else np.asarray(c, dtype=np.float64)
    eig = np.linalg.eigvalsh(A)
    mu, L = float(eig.min()), float(eig.max())
    return FiniteSumProblem(QUADRATIC, n, d, 0.0, mu, L, A=A, b=b, c=c)


def quadratic_from_centers(A, centers) -> FiniteSumProblem:
    """Components ``0.5 (x - z_i)'A_i (x - z_i)``."""
    A = np.asarray(A, dtype=np.float64)
    z = np.asarray(centers, dtype=np.float64)
    b = np.einsum("ijk,ik->ij", A, z)
    c = 0.5 * np.einsum("ij,ij->i", z, b)
    return quadratic_problem(A, b, c)


def random_quadratic_family(n: int, d: int, mu: float = 1.0, L: float = 10.0, seed: int = 0) -> FiniteSumProblem:
    """Random rotated quadratics whose spectra jointly span exactly ``[mu, L]``.

    Each ``A_i`` has eigenvalues drawn from ``[mu, L]``; component 0 carries
    both endpoints so the problem constants are ``mu`` and ``L``.
    """
    if d < 2 and mu != L:
        raise ValueError("need d >= 2 to realize mu < L")
    rng = np.random.default_rng(seed)
    A = np.empty((n, d, d))
    for i in range(n):
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        ev = rng.uniform(mu, L, size=d)
        if i == 0 or d == 1:
            ev[0] = mu
            ev[-1] = L
        A[i] = (q * ev) @ q.T
    centers = rng.standard_normal((n, d))
    p = quadratic_from_centers(A, centers)
    # eigensolve reproduces mu, L up to rounding; pin the exact values
    return replace(p, mu=float(mu), L=float(L))


def solve_reference(p: FiniteSumProblem, tol: float = 1e-10, max_iter: int = 1_000_000) -> tuple[np.ndarray, float]:
    """Minimizer and optimal value.

    Quadratics are solved directly; GLM problems run gradient descent with
    stepsize ``1/L`` until ``|grad f| <= tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if p.loss_kind == QUADRATIC:
        x = np.linalg.solve(p.A.mean(axis=0), p.b.mean(axis=0))
        # one refinement step keeps |grad| near machine precision
        x -= np.linalg.solve(p.A.mean(axis=0), p.full_gradient(x))
        gnorm = float(np.linalg.norm(p.full_gradient(x)))
        if gnorm > tol:
            raise ConvergenceError(f"direct solve missed tol={tol}", gnorm)
        return x, p.value(x)
    x = np.zeros(p.d)
    step = 1.0 / p.L
    gnorm = math.inf
    for _ in range(max_iter):
        g = p.full_gradient(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return x, p.value(x)
        x = x - step * g
        if not np.all(np.isfinite(x)):
            break
    raise ConvergenceError(f"gradient descent did not reach tol={tol} in {max_iter} iterations", gnorm)
