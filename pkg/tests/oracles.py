"""Independent reference computations used only by the tests."""

import numpy as np


def random_standardized_cov(rng, p, n=None):
    """Sample correlation matrix of ``n`` Gaussian draws with random mixing."""
    n = n or p + 10
    mix = rng.standard_normal((p, p)) * (rng.random((p, p)) < 0.4) + np.eye(p)
    x = rng.standard_normal((n, p)) @ mix
    x = (x - x.mean(0)) / x.std(0)
    s = x.T @ x / n
    return (s + s.T) / 2


def dual_projected_gradient(s, rho, max_iter=100_000, tol=1e-13):
    """Maximize log det W over |W_ij - s_ij| <= rho (i != j), W_ii = s_ii.

    Plain projected gradient ascent with backtracking. Returns ``(W, value)``
    where ``value = -log det W - p`` equals the optimal glasso objective.
    """
    p = s.shape[0]
    off = ~np.eye(p, dtype=bool)
    lo, hi = s - rho, s + rho

    def project(w):
        w = np.where(off, np.clip(w, lo, hi), s)
        return (w + w.T) / 2

    def logdet(w):
        sign, ld = np.linalg.slogdet(w)
        return ld if sign > 0 else -np.inf

    # strictly feasible positive definite start
    w = np.where(off, s * 0.5, s)
    w = project(w)
    f = logdet(w)
    step = 1.0
    stalled = 0
    for _ in range(max_iter):
        grad = np.linalg.inv(w)
        while True:
            cand = project(w + step * grad)
            fc = logdet(cand)
            if fc >= f + 1e-4 * np.sum(grad * (cand - w)) and np.isfinite(fc):
                break
            step *= 0.5
            if step < 1e-20:
                return w, -f - p
        moved = np.max(np.abs(cand - w))
        stalled = stalled + 1 if fc - f < 1e-15 else 0
        w, f = cand, fc
        step *= 2.0
        if moved < tol or stalled >= 100:
            break
    return w, -f - p


def glasso_2x2(s, rho):
    """Closed form for p = 2: soft-threshold the covariance, then invert."""
    s12 = s[0, 1]
    w12 = np.sign(s12) * max(abs(s12) - rho, 0.0)
    w = np.array([[s[0, 0], w12], [w12, s[1, 1]]])
    return np.linalg.inv(w)


def dense_grid_dimensions(points, kappas):
    """Brute-force argmin of -loglik + kappa*D at every kappa (ties -> smaller D)."""
    ll = np.array([m.loglik for m in points])
    dims = np.array([m.dimension for m in points])
    out = []
    for kappa in kappas:
        crit = -ll + kappa * dims
        best = crit.min()
        out.append(int(dims[crit == best].min()))
    return np.array(out)


def partition_with_dimension(d, p):
    """A Partition of ``p`` variables with ``dimension() == d`` (greedy blocks)."""
    from blockggm import Partition

    blocks, start = [], 0
    while d > 0:
        m = 2
        while (m + 1) * m // 2 <= d:
            m += 1
        blocks.append(tuple(range(start, start + m)))
        start += m
        d -= m * (m - 1) // 2
    blocks += [(i,) for i in range(start, p)]
    if start > p:
        raise ValueError("p too small for requested dimension")
    return Partition(tuple(blocks))


def model_points(dims, logliks, p=None):
    from blockggm import ModelPoint

    p = p or 2 * int(np.sqrt(2 * max(dims))) + 40
    return [
        ModelPoint(float(i), partition_with_dimension(int(d), p), int(d), float(ll))
        for i, (d, ll) in enumerate(zip(dims, logliks))
    ]
