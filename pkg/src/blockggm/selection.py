"""Penalized-likelihood choice of a block structure, calibrated by slope heuristics.

Every candidate partition is scored by its maximized Gaussian log-likelihood;
the chosen model minimizes ``-loglik/n + kappa * D/n`` where ``kappa`` is
twice a minimal constant read either from the largest jump of the selected
dimension as a function of ``kappa`` (dimension jump, SHDJ) or from a robust
regression slope of loglik on dimension over complex models (SHRR).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import siegelslopes

from .covariance import CovMatrix, DataMatrix, sample_covariance
from .errors import (
    DegeneratePath,
    EmptyCandidateSet,
    InsufficientComplexModels,
    SingularBlock,
)
from .partition import Partition

logger = logging.getLogger(__name__)

HUBER_C = 1.345


@dataclass(frozen=True)
class ModelPoint:
    lam: float
    partition: Partition
    dimension: int
    loglik: float


@dataclass
class SelectionDiagnostics:
    method: str
    step_function: list
    kappa_min: float
    kappa_opt: float
    selected: ModelPoint
    regression_slope: float | None = None
    regression_intercept: float | None = None
    regression_subset: list = field(default_factory=list)
    jump_tie: bool = False
    hull_ties: int = 0
    excluded: int = 0

    def to_dict(self) -> dict:
        sel = self.selected
        return {
            "method": self.method,
            "step_function": [[float(k), int(d)] for k, d in self.step_function],
            "kappa_min": self.kappa_min,
            "kappa_opt": self.kappa_opt,
            "regression_slope": self.regression_slope,
            "regression_intercept": self.regression_intercept,
            "regression_subset": [int(d) for d in self.regression_subset],
            "jump_tie": self.jump_tie,
            "hull_ties": self.hull_ties,
            "excluded_candidates": self.excluded,
            "selected": {
                "lambda": sel.lam,
                "dimension": sel.dimension,
                "loglik": sel.loglik,
                "n_blocks": sel.partition.k,
                "partition": sel.partition.to_dict(),
            },
        }


class ScoredPath(list):
    """List of :class:`ModelPoint` that remembers how many steps were dropped."""

    def __init__(self, points=(), excluded: int = 0):
        super().__init__(points)
        self.excluded = excluded


def _block_logdet(s_block: np.ndarray, k: int, n: int) -> float:
    size = s_block.shape[0]
    if size >= n:
        raise SingularBlock(k, size, n)
    try:
        chol = np.linalg.cholesky(s_block)
    except np.linalg.LinAlgError:
        raise SingularBlock(k, size, n) from None
    diag = np.diag(chol)
    if np.min(diag) ** 2 <= 1e-12 * np.max(np.diag(s_block)):
        raise SingularBlock(k, size, n)
    return 2.0 * float(np.sum(np.log(diag)))


def block_loglik(x: DataMatrix, b: Partition, s: CovMatrix | None = None) -> float:
    """Maximized log-likelihood of the block-diagonal Gaussian model ``b``.

    Computed in closed form as
    ``-(n/2) [p log(2 pi) + sum_k (log det S_k + p_k)]`` with ``S_k`` the MLE
    covariance of block ``k``.

    Raises
    ------
    SingularBlock
        When a block's covariance is singular (``p_k >= n`` or rank deficient).
    """
    if b.p != x.p:
        raise ValueError(f"partition covers {b.p} variables, data has {x.p}")
    s = sample_covariance(x) if s is None else s
    return _loglik_from_cov(s.values, b, x.n, {})


def _loglik_from_cov(s: np.ndarray, b: Partition, n: int, cache: dict) -> float:
    total = 0.0
    for k, block in enumerate(b.blocks):
        if len(block) == 1:
            ld = math.log(s[block[0], block[0]])
        elif block in cache:
            ld = cache[block]
        else:
            idx = np.asarray(block)
            ld = _block_logdet(s[np.ix_(idx, idx)], k, n)
            cache[block] = ld
        total += ld + len(block)
    return -0.5 * n * (b.p * math.log(2 * math.pi) + total)


def score_path(x: DataMatrix, path, s: CovMatrix | None = None) -> ScoredPath:
    """Score each threshold step; singular candidates are dropped and counted."""
    if not path:
        raise ValueError("empty threshold path")
    s = sample_covariance(x) if s is None else s
    cache: dict = {}
    points = []
    excluded = 0
    for step in path:
        try:
            ll = _loglik_from_cov(s.values, step.partition, x.n, cache)
        except SingularBlock as exc:
            logger.debug("dropping lambda=%g: %s", step.lam, exc)
            excluded += 1
            continue
        if not math.isfinite(ll):
            excluded += 1
            continue
        points.append(ModelPoint(step.lam, step.partition, step.partition.dimension(), ll))
    if not points:
        raise EmptyCandidateSet("no feasible candidate partition")
    if excluded:
        logger.info("%d candidate partitions excluded as singular", excluded)
    return ScoredPath(points, excluded)


def criterion(m: ModelPoint, kappa: float, n: int, shape=None) -> float:
    """``-loglik/n + kappa * shape(D)/n``; ``shape`` defaults to the identity."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    x = m.dimension if shape is None else shape(m.dimension)
    return -m.loglik / n + kappa * x / n


def pen_full(d: int, n: int, p: int, c: float) -> float:
    """Penalty shape ``(d/n) [2c^2 + log(p^4 / (d * min(d c^2/n, 1)))]``."""
    if d < 1 or c <= 0:
        raise ValueError("pen_full needs d >= 1 and c > 0")
    return d / n * (2 * c * c + math.log(p ** 4 / (d * min(d * c * c / n, 1.0))))


def full_shape(n: int, p: int, c: float):
    """Penalty shape for :func:`pen_full` in dimension units (``n * pen``)."""

    def shape(d):
        return 0.0 if d == 0 else n * pen_full(d, n, p, c)

    return shape


def _coords(points, shape):
    """Best loglik per distinct complexity, sorted by complexity."""
    best: dict = {}
    for m in points:
        x = float(m.dimension if shape is None else shape(m.dimension))
        if x not in best or m.loglik > best[x].loglik:
            best[x] = m
    xs = sorted(best)
    return xs, [best[x] for x in xs]


def _upper_hull(points, shape=None):
    """Concave majorant of (complexity, loglik) from smallest complexity to argmax loglik.

    Returns hull vertices (ModelPoints) by increasing complexity and the
    number of candidates lying exactly on a hull edge (ties).
    """
    xs, ms = _coords(points, shape)
    ys = [m.loglik for m in ms]
    # models beyond the first loglik maximum are never selected for kappa >= 0
    top = int(np.argmax(ys))
    xs, ms, ys = xs[: top + 1], ms[: top + 1], ys[: top + 1]
    hull: list = []
    ties = 0
    for x, m, y in zip(xs, ms, ys):
        while len(hull) >= 2:
            (x1, m1, y1), (x2, m2, y2) = hull[-2], hull[-1]
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            if cross >= 0:
                if cross == 0:
                    ties += 1
                hull.pop()
            else:
                break
        hull.append((x, m, y))
    return hull, ties


def selection_step_function(points, shape=None) -> list:
    """Exact ``kappa -> dimension`` step function of the penalized criterion.

    Returns ``[(kappa_0=0, D_0), (kappa_1, D_1), ...]`` with increasing
    ``kappa`` and decreasing dimension: for ``kappa_i <= kappa < kappa_{i+1}``
    the criterion selects dimension ``D_i`` (ties go to the smaller model).
    """
    steps, _ = _step_function(points, shape)
    return steps


def _step_function(points, shape):
    if len({m.dimension for m in points}) < 2:
        raise DegeneratePath("all candidate models share one dimension")
    hull, ties = _upper_hull(points, shape)
    steps = [(0.0, hull[-1][1].dimension)]
    for (x1, m1, y1), (x2, m2, y2) in zip(reversed(hull[:-1]), reversed(hull[1:])):
        steps.append(((y2 - y1) / (x2 - x1), m1.dimension))
    return steps, ties


def select_at(points, kappa: float, n: int = 1, shape=None) -> ModelPoint:
    """Argmin of the criterion at ``kappa``; ties go to the smaller dimension."""
    return min(points, key=lambda m: (criterion(m, kappa, n, shape), m.dimension))


def select_shdj(points, shape=None) -> SelectionDiagnostics:
    """Dimension-jump calibration: ``kappa_min`` sits at the largest drop.

    Among equally large drops the largest ``kappa`` wins and ``jump_tie`` is
    set in the diagnostics. When the smallest model already has the best
    likelihood the step function is flat, there is no jump, and that model is
    returned with ``kappa_min = 0``.
    """
    steps, ties = _step_function(points, shape)
    drops = [(steps[i - 1][1] - steps[i][1], steps[i][0]) for i in range(1, len(steps))]
    largest = max((d for d, _ in drops), default=0)
    winners = [k for d, k in drops if d == largest] or [0.0]
    kappa_min = max(winners)
    kappa_opt = 2 * kappa_min
    return SelectionDiagnostics(
        method="shdj",
        step_function=steps,
        kappa_min=kappa_min,
        kappa_opt=kappa_opt,
        selected=select_at(points, kappa_opt, shape=shape),
        jump_tie=len(winners) > 1,
        hull_ties=ties,
        excluded=getattr(points, "excluded", 0),
    )


def huber_regression(x, y, c: float = HUBER_C, max_iter: int = 100, tol: float = 1e-10):
    """Huber M-estimate of ``y = a + b x`` by IRLS with MAD scale.

    IRLS starts from the repeated-median line, which keeps a single
    high-leverage outlier (e.g. the largest model) from capturing the fit.
    Returns ``(intercept, slope)``. Iteration stops once the slope moves by
    less than ``tol`` (relative to ``max(1, |slope|)``).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    start = siegelslopes(y, x)
    coef = np.array([start.intercept, start.slope])
    for _ in range(max_iter):
        resid = y - design @ coef
        sigma = np.median(np.abs(resid - np.median(resid))) / 0.6745
        absr = np.abs(resid)
        weights = np.ones_like(resid)
        big = absr > c * sigma
        weights[big] = c * sigma / absr[big]
        sw = np.sqrt(weights)
        new, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
        if not np.all(np.isfinite(new)):
            break
        done = abs(new[1] - coef[1]) <= tol * max(1.0, abs(coef[1]))
        coef = new
        if done:
            break
    return float(coef[0]), float(coef[1])


def complex_subset(points, quantile: float = 0.5, shape=None):
    """Candidates whose complexity reaches the given quantile of the set."""
    xs = np.array([m.dimension if shape is None else shape(m.dimension) for m in points], dtype=float)
    cut = np.quantile(xs, quantile)
    return [m for m, x in zip(points, xs) if x >= cut]


def select_shrr(points, quantile: float = 0.5, shape=None) -> SelectionDiagnostics:
    """Robust-regression calibration: ``kappa_min`` is the Huber slope of
    loglik on complexity over the complex models (complexity at or above the
    ``quantile`` of the candidate set).
    """
    if len(points) < 4:
        raise InsufficientComplexModels(f"need at least 4 candidates, got {len(points)}")
    subset = complex_subset(points, quantile, shape)
    xs = [m.dimension if shape is None else shape(m.dimension) for m in subset]
    if len(set(xs)) < 2:
        raise InsufficientComplexModels("complex models span a single dimension")
    intercept, slope = huber_regression(xs, [m.loglik for m in subset])
    kappa_min = max(slope, 0.0)
    kappa_opt = 2 * kappa_min
    try:
        steps, ties = _step_function(points, shape)
    except DegeneratePath:
        steps, ties = [], 0
    return SelectionDiagnostics(
        method="shrr",
        step_function=steps,
        kappa_min=kappa_min,
        kappa_opt=kappa_opt,
        selected=select_at(points, kappa_opt, shape=shape),
        regression_slope=slope,
        regression_intercept=intercept,
        regression_subset=sorted({m.dimension for m in subset}),
        hull_ties=ties,
        excluded=getattr(points, "excluded", 0),
    )
