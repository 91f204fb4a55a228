"""Compiled inner loops.

Every kernel consumes a precomputed index sequence (one entry per step) and
mutates the state arrays in place. Kernels return the position of the step
at which the iterate diverged, or -1.
"""

import math

import numpy as np
from numba import njit

LOGISTIC, RIDGE, QUADRATIC = 0, 1, 2
DIVERGENCE_SQ_NORM = 1e200  # |x| > 1e100


@njit(cache=True)
def scalar_deriv(kind, t, y):
    if kind == LOGISTIC:
        z = -y * t
        if z >= 0.0:
            s = 1.0 / (1.0 + math.exp(-z))
        else:
            e = math.exp(z)
            s = e / (1.0 + e)
        return -y * s
    return t - y


@njit(cache=True)
def row_inner(i, x, indptr, indices, data):
    t = 0.0
    for p in range(indptr[i], indptr[i + 1]):
        t += data[p] * x[indices[p]]
    return t


@njit(cache=True)
def grad_into(kind, i, x, out, A, b, indptr, indices, data, y, lam):
    d = x.shape[0]
    if kind == QUADRATIC:
        for r in range(d):
            acc = 0.0
            for c in range(d):
                acc += A[i, r, c] * x[c]
            out[r] = acc - b[i, r]
        return
    deriv = scalar_deriv(kind, row_inner(i, x, indptr, indices, data), y[i])
    for r in range(d):
        out[r] = lam * x[r]
    for p in range(indptr[i], indptr[i + 1]):
        out[indices[p]] += deriv * data[p]


@njit(cache=True)
def _diverged(x):
    s = 0.0
    for v in x:
        s += v * v
    return not (s <= DIVERGENCE_SQ_NORM)


@njit(cache=True)
def table_steps(kind, A, b, indptr, indices, data, y, lam,
                x, table, gbar, seq, gamma, refresh_first, record):
    """SAGA (``refresh_first=False``) or SAG (``True``) with a dense table."""
    n = table.shape[0]
    d = x.shape[0]
    gnew = np.empty(d)
    keep = record.shape[0] > 0
    for s in range(seq.shape[0]):
        i = seq[s]
        grad_into(kind, i, x, gnew, A, b, indptr, indices, data, y, lam)
        for j in range(d):
            diff = gnew[j] - table[i, j]
            if refresh_first:
                gbar[j] += diff / n
                x[j] -= gamma * gbar[j]
            else:
                x[j] -= gamma * (gnew[j] - table[i, j] + gbar[j])
                gbar[j] += diff / n
            table[i, j] = gnew[j]
        if keep:
            record[s, :] = x
        if _diverged(x):
            return s
    return -1


@njit(cache=True)
def finito_steps(kind, A, b, indptr, indices, data, y, lam,
                 x, phi, table, sum_phi, sum_g, seq, gamma, record):
    """Finito/DIAG: step from the mean stored iterate, then refresh one slot."""
    n = table.shape[0]
    d = x.shape[0]
    gnew = np.empty(d)
    keep = record.shape[0] > 0
    for s in range(seq.shape[0]):
        for j in range(d):
            x[j] = sum_phi[j] / n - gamma * (sum_g[j] / n)
        i = seq[s]
        grad_into(kind, i, x, gnew, A, b, indptr, indices, data, y, lam)
        for j in range(d):
            sum_phi[j] += x[j] - phi[i, j]
            sum_g[j] += gnew[j] - table[i, j]
            phi[i, j] = x[j]
            table[i, j] = gnew[j]
        if keep:
            record[s, :] = x
        if _diverged(x):
            return s
    return -1


@njit(cache=True)
def composite_steps(kind, indptr, indices, data, y, lam,
                    x, derivs, gbar, seq, gamma, refresh_first, record):
    """Dense reference for the lagged path: regularizer taken at the current iterate."""
    n = derivs.shape[0]
    d = x.shape[0]
    rho = 1.0 - gamma * lam
    direction = np.empty(d)
    keep = record.shape[0] > 0
    for s in range(seq.shape[0]):
        i = seq[s]
        lo, hi = indptr[i], indptr[i + 1]
        dnew = scalar_deriv(kind, row_inner(i, x, indptr, indices, data), y[i])
        diff = dnew - derivs[i]
        if refresh_first:
            for p in range(lo, hi):
                gbar[indices[p]] += diff * data[p] / n
            for j in range(d):
                direction[j] = gbar[j]
        else:
            for j in range(d):
                direction[j] = gbar[j]
            for p in range(lo, hi):
                direction[indices[p]] = diff * data[p] + gbar[indices[p]]
                gbar[indices[p]] += diff * data[p] / n
        for j in range(d):
            x[j] = rho * x[j] - gamma * direction[j]
        derivs[i] = dnew
        if keep:
            record[s, :] = x
        if _diverged(x):
            return s
    return -1


@njit(cache=True)
def catch_up(x, gbar, lag, j, k, gamma, rho, lam):
    m = k - lag[j]
    if m > 0:
        if lam == 0.0:
            x[j] -= gamma * m * gbar[j]
        else:
            rm = rho ** m
            x[j] = rm * x[j] - gamma * gbar[j] * ((1.0 - rm) / (1.0 - rho))
        lag[j] = k


@njit(cache=True)
def jit_steps(kind, indptr, indices, data, y, lam,
              x, derivs, gbar, lag, k0, seq, gamma, refresh_first, touches):
    """Lagged sparse updates; each step touches only the scheduled row's support."""
    n = derivs.shape[0]
    rho = 1.0 - gamma * lam
    for s in range(seq.shape[0]):
        k = k0 + s
        i = seq[s]
        lo, hi = indptr[i], indptr[i + 1]
        for p in range(lo, hi):
            catch_up(x, gbar, lag, indices[p], k, gamma, rho, lam)
        dnew = scalar_deriv(kind, row_inner(i, x, indptr, indices, data), y[i])
        diff = dnew - derivs[i]
        bad = False
        for p in range(lo, hi):
            j = indices[p]
            if refresh_first:
                gbar[j] += diff * data[p] / n
                x[j] = rho * x[j] - gamma * gbar[j]
            else:
                x[j] = rho * x[j] - gamma * (diff * data[p] + gbar[j])
                gbar[j] += diff * data[p] / n
            lag[j] = k + 1
            if not (abs(x[j]) <= 1e100):
                bad = True
        derivs[i] = dnew
        touches[s] = 2 * (hi - lo)
        if bad:
            return s
    return -1


@njit(cache=True)
def jit_finalize(x, gbar, lag, k, gamma, lam):
    rho = 1.0 - gamma * lam
    for j in range(x.shape[0]):
        catch_up(x, gbar, lag, j, k, gamma, rho, lam)
