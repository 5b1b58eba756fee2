"""Graphical lasso, BIC^net regularization choice and the CGL rule.

The penalty never touches the diagonal: the problem solved is

    max_Theta  log det Theta - tr(S Theta) - rho * sum_{i != j} |Theta_ij|

so at ``rho >= max |s_ij|`` the solution is exactly ``diag(1 / s_ii)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ._cd import glasso_sweeps
from .covariance import CovMatrix, DataMatrix, sample_covariance
from .errors import InputError, NotConverged, SingularInput

logger = logging.getLogger(__name__)

EDGE_RTOL = 1e-8


@dataclass(frozen=True)
class PrecisionEstimate:
    theta: np.ndarray
    w: np.ndarray
    rho: float
    n_iter: int = 0
    converged: bool = True
    logdet_history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    _beta: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    @property
    def edges(self) -> frozenset:
        """Pairs ``(i, j)``, ``i < j``, with a nonzero precision entry."""
        return frozenset(edge_support(self.theta))

    @property
    def df(self) -> int:
        return len(self.edges)


def edge_support(theta, rtol: float = EDGE_RTOL) -> list:
    theta = np.asarray(theta)
    cut = rtol * np.abs(theta).max() if theta.size else 0.0
    rows, cols = np.nonzero(np.triu(np.abs(theta) > cut, k=1))
    return list(zip(rows.tolist(), cols.tolist()))


def objective(theta, s, rho: float) -> float:
    """Penalized log-likelihood maximized by :func:`graphical_lasso`."""
    s = _as_array(s)
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return -np.inf
    off = np.abs(theta).sum() - np.abs(np.diag(theta)).sum()
    return float(logdet - np.sum(s * theta) - rho * off)


def kkt_residual(est: PrecisionEstimate, s) -> float:
    """Largest violation of the stationarity conditions at ``est``.

    Off the support ``|w_ij - s_ij| <= rho``; on it
    ``w_ij - s_ij = rho * sign(theta_ij)``.
    """
    s = _as_array(s)
    p = s.shape[0]
    if p < 2:
        return 0.0
    diff = est.w - s
    off = ~np.eye(p, dtype=bool)
    active = np.zeros((p, p), dtype=bool)
    for i, j in est.edges:
        active[i, j] = active[j, i] = True
    inactive = off & ~active
    viol = 0.0
    if inactive.any():
        viol = max(viol, float(np.max(np.abs(diff[inactive]) - est.rho)))
    if active.any():
        target = est.rho * np.sign(est.theta[active])
        viol = max(viol, float(np.max(np.abs(diff[active] - target))))
    return max(viol, 0.0)


def _as_array(s) -> np.ndarray:
    return s.values if isinstance(s, CovMatrix) else np.asarray(s, dtype=float)


def _max_offdiag(s: np.ndarray) -> float:
    p = s.shape[0]
    if p < 2:
        return 0.0
    return float(np.max(np.abs(s[~np.eye(p, dtype=bool)])))


def _diagonal_estimate(s: np.ndarray, rho: float) -> PrecisionEstimate:
    d = np.diag(s)
    return PrecisionEstimate(
        theta=np.diag(1.0 / d),
        w=np.diag(d),
        rho=float(rho),
        _beta=np.zeros_like(s),
    )


def graphical_lasso(
    s,
    rho: float,
    tol: float = 1e-4,
    max_iter: int = 10_000,
    *,
    warm_start: PrecisionEstimate | None = None,
    inner_max_iter: int = 1000,
) -> PrecisionEstimate:
    """Sparse precision matrix by block coordinate descent (Friedman et al.).

    Parameters
    ----------
    s : CovMatrix or array, shape (p, p)
        Symmetric matrix with a positive diagonal.
    rho : float
        Off-diagonal l1 penalty, ``rho >= 0``.
    tol : float
        Relative convergence threshold on the mean absolute change of the
        off-diagonal covariance iterate per sweep.
    max_iter : int
        Maximum number of full sweeps.
    warm_start : PrecisionEstimate, optional
        Estimate at a nearby ``rho`` whose lasso coefficients seed the
        inner solves.

    Raises
    ------
    SingularInput
        ``rho == 0`` and ``s`` is singular.
    NotConverged
        After ``max_iter`` sweeps; the last iterate is attached.
    """
    s = _as_array(s)
    if rho < 0:
        raise ValueError("rho must be non-negative")
    p = s.shape[0]
    if s.shape != (p, p) or not np.all(np.diag(s) > 0):
        raise InputError("s must be square with a positive diagonal")
    if p == 1 or rho >= _max_offdiag(s):
        return _diagonal_estimate(s, rho)
    if rho == 0:
        try:
            chol = np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            raise SingularInput("rho = 0 requires a nonsingular covariance") from None
        if np.min(np.diag(chol)) ** 2 <= 1e-12 * np.max(np.diag(s)):
            raise SingularInput("rho = 0 requires a nonsingular covariance")
        theta = np.linalg.inv(s)
        theta = (theta + theta.T) / 2
        return PrecisionEstimate(theta=theta, w=s.copy(), rho=0.0, _beta=None)

    s = np.ascontiguousarray(s, dtype=float)
    # W starts at S (feasible for every rho); only the lasso columns are warm
    w = s.copy()
    if warm_start is not None and warm_start._beta is not None and warm_start.p == p:
        beta = np.ascontiguousarray(warm_start._beta, dtype=float).copy()
    else:
        beta = np.zeros((p, p))
    scale = np.abs(s[~np.eye(p, dtype=bool)]).mean()
    inner_tol = max(tol * 1e-2 * scale, 1e-14)
    n_iter, converged, logdets = glasso_sweeps(
        s, w, beta, float(rho), float(tol), int(max_iter), inner_tol, int(inner_max_iter)
    )
    theta = _precision_from_columns(w, beta)
    est = PrecisionEstimate(
        theta=theta,
        w=(w + w.T) / 2,
        rho=float(rho),
        n_iter=int(n_iter),
        converged=bool(converged),
        logdet_history=np.asarray(logdets),
        _beta=beta,
    )
    if not converged:
        if not np.all(np.isfinite(w)):
            est = replace(est, theta=np.full((p, p), np.nan))
        raise NotConverged(max_iter, est)
    return est


def _precision_from_columns(w: np.ndarray, beta: np.ndarray) -> np.ndarray:
    p = w.shape[0]
    theta = np.zeros((p, p))
    for j in range(p):
        b = beta[:, j].copy()
        b[j] = 0.0
        t_jj = 1.0 / (w[j, j] - w[:, j] @ b)
        theta[:, j] = -b * t_jj
        theta[j, j] = t_jj
    return (theta + theta.T) / 2


def bic_net(est: PrecisionEstimate, s, n: int) -> float:
    """``n/2 (log det Theta - tr(S Theta)) - log(n)/2 * df``; larger is better.

    ``df`` counts the nonzero upper-triangular off-diagonal entries.
    """
    s = _as_array(s)
    if s.shape != est.theta.shape:
        raise InputError("estimate and covariance dimensions differ")
    sign, logdet = np.linalg.slogdet(est.theta)
    if sign <= 0:
        raise InputError("precision estimate is not positive definite")
    loglik = n / 2 * (logdet - float(np.sum(s * est.theta)))
    return float(loglik - np.log(n) / 2 * est.df)


def default_grid(s, size: int = 50, ratio: float = 1e-2) -> np.ndarray:
    """``size`` log-spaced values from ``max |s_ij|`` down to ``ratio`` of it."""
    top = _max_offdiag(_as_array(s))
    if top == 0:
        return np.array([0.0])
    return np.geomspace(top, top * ratio, size)


def select_rho_cov(
    s,
    n: int,
    grid=None,
    tol: float = 1e-4,
    max_iter: int = 10_000,
):
    """BIC^net choice of ``rho`` for one block, given its covariance.

    Returns ``(rho_star, estimate, bic_values)`` where ``bic_values`` maps
    each grid point that solved successfully to its criterion.
    """
    s = _as_array(s)
    if s.shape[0] < 2:
        raise InputError("rho selection needs a block of at least two variables")
    grid = default_grid(s) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InputError("empty rho grid")
    best = None
    scores = {}
    warm = None
    for rho in sorted(set(grid.tolist()), reverse=True):
        try:
            est = graphical_lasso(s, rho, tol=tol, max_iter=max_iter, warm_start=warm)
        except (NotConverged, SingularInput) as exc:
            warnings.warn(f"skipping rho={rho:.6g}: {exc}", RuntimeWarning, stacklevel=2)
            continue
        warm = est
        score = bic_net(est, s, n)
        scores[rho] = score
        if best is None or score > best[0]:
            best = (score, rho, est)
    if best is None:
        raise NotConverged(max_iter)
    return best[1], best[2], scores


def select_rho(x_block: DataMatrix, grid=None, tol: float = 1e-4, max_iter: int = 10_000):
    """BIC^net choice of ``rho`` on a block of (standardized) observations.

    Returns ``(rho_star, estimate)``. Grid points are solved by decreasing
    ``rho`` with warm starts; ties go to the larger ``rho``.
    """
    s = sample_covariance(x_block)
    rho, est, _ = select_rho_cov(s, x_block.n, grid, tol=tol, max_iter=max_iter)
    return rho, est


def connectivity_threshold(s) -> float:
    """Largest ``t`` such that the graph ``|s_ij| >= t`` is connected.

    Equals the smallest edge weight of a maximum spanning tree of ``|s|``;
    0 when the graph is disconnected even with every nonzero entry.
    """
    from .partition import _UnionFind

    a = np.abs(_as_array(s))
    p = a.shape[0]
    if p < 2:
        return 0.0
    iu, ju = np.triu_indices(p, k=1)
    w = a[iu, ju]
    order = np.argsort(-w, kind="stable")
    uf = _UnionFind(p)
    merged = 0
    for idx in order:
        if w[idx] <= 0:
            break
        if uf.union(int(iu[idx]), int(ju[idx])):
            merged += 1
            if merged == p - 1:
                return float(w[idx])
    return 0.0


def cgl_rho(s_block, margin: float = 1e-3) -> float:
    """Sparsest ``rho`` keeping the block's glasso graph a single component.

    Relies on the thresholding equivalence: the glasso support at ``rho`` is
    connected iff ``|s_ij| > rho`` is. With connectivity threshold ``t`` the
    admissible values are ``rho < t``; the result is the larger of the next
    distinct ``|s_ij|`` level below ``t`` and ``(1 - margin) * t``, so the
    weakest bridge stays numerically resolvable.
    """
    s = _as_array(s_block)
    if s.shape[0] < 2:
        raise InputError("CGL needs a block of at least two variables")
    t = connectivity_threshold(s)
    if t == 0:
        return 0.0
    p = s.shape[0]
    levels = np.unique(np.abs(s[np.triu_indices(p, k=1)]))
    below = levels[levels < t]
    lower = float(below[-1]) if below.size else 0.0
    return max(lower, (1 - margin) * t)
