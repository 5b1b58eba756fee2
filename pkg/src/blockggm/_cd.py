"""Compiled inner loops of the graphical lasso (block coordinate descent)."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True, nogil=True)
def _column_lasso(w, s, beta, j, rho, inner_tol, inner_max_iter):
    """Solve min_b 1/2 b'W11 b - s12'b + rho |b|_1 for column ``j`` in place.

    ``beta`` is the full-length column (entry ``j`` ignored). Returns the
    number of coordinate passes used.
    """
    p = w.shape[0]
    wb = np.zeros(p)
    for k in range(p):
        if k != j and beta[k] != 0.0:
            for i in range(p):
                wb[i] += w[i, k] * beta[k]
    passes = 0
    for it in range(inner_max_iter):
        passes += 1
        max_delta = 0.0
        for k in range(p):
            if k == j:
                continue
            wkk = w[k, k]
            old = beta[k]
            r = s[k, j] - (wb[k] - wkk * old)
            new = _soft(r, rho) / wkk
            delta = new - old
            if delta != 0.0:
                beta[k] = new
                for i in range(p):
                    wb[i] += w[i, k] * delta
                ad = abs(delta) * wkk
                if ad > max_delta:
                    max_delta = ad
        if max_delta < inner_tol:
            break
    return passes, wb


@njit(cache=True, nogil=True)
def glasso_sweeps(s, w, beta, rho, tol, max_iter, inner_tol, inner_max_iter):
    """Run BCD sweeps on ``w`` (covariance iterate) and ``beta`` (columns).

    Convergence: mean absolute change of the off-diagonal of ``w`` over one
    sweep falls below ``tol * mean |s_ij|`` (off-diagonal). Returns the number
    of sweeps, a convergence flag and the per-sweep log det of ``w``.
    """
    p = s.shape[0]
    n_off = p * (p - 1)
    scale = 0.0
    for i in range(p):
        for k in range(p):
            if i != k:
                scale += abs(s[i, k])
    scale = scale / n_off if n_off > 0 else 0.0
    threshold = tol * scale
    logdets = np.full(max_iter, np.nan)
    w_old = np.empty_like(w)
    for sweep in range(max_iter):
        w_old[:, :] = w
        for j in range(p):
            col = beta[:, j]
            _, wb = _column_lasso(w, s, col, j, rho, inner_tol, inner_max_iter)
            beta[:, j] = col
            for i in range(p):
                if i != j:
                    w[i, j] = wb[i]
                    w[j, i] = wb[i]
        change = 0.0
        for i in range(p):
            for k in range(p):
                if i != k:
                    change += abs(w[i, k] - w_old[i, k])
        change = change / n_off if n_off > 0 else 0.0
        if not np.isfinite(change):
            return sweep + 1, False, logdets[: sweep + 1]
        sign, ld = np.linalg.slogdet(w)
        logdets[sweep] = ld if sign > 0 else -np.inf
        if change <= threshold:
            return sweep + 1, True, logdets[: sweep + 1]
    return max_iter, False, logdets
