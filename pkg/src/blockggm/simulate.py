"""Synthetic block-diagonal Gaussian data and the strategy benchmark."""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage
from scipy.spatial.distance import squareform

from .covariance import CovMatrix, DataMatrix, sample_covariance, standardize
from .errors import BlockGGMError, InputError
from .glasso import cgl_rho, default_grid, graphical_lasso, select_rho_cov
from .partition import Partition, adjusted_rand_index, threshold_path
from .selection import score_path, select_shdj, select_shrr

STRATEGIES = ("glasso", "cgl", "shrr", "shdj", "truepart")
CSV_COLUMNS = (
    "replicate",
    "strategy",
    "ari",
    "sensitivity",
    "specificity",
    "fdr",
    "k_selected",
    "d_selected",
    "seconds",
)


@dataclass(frozen=True)
class SimConfig:
    p: int = 100
    n: int = 70
    k: int = 15
    seed: int = 0
    eigen_floor: float = 0.1
    design: str = "random"
    within: float = 0.5

    def __post_init__(self):
        if self.design not in ("random", "equicorrelated"):
            raise InputError(f"unknown design {self.design!r}")
        if not -1 < self.within < 1:
            raise InputError("within must lie in (-1, 1)")
        if not (self.p >= self.k >= 1):
            raise InputError("need p >= k >= 1")
        if self.n < 2:
            raise InputError("need n >= 2")
        if self.eigen_floor <= 0:
            raise InputError("eigen_floor must be positive")


@dataclass(frozen=True)
class GroundTruth:
    sigma: np.ndarray
    partition: Partition
    edges: frozenset


@dataclass(frozen=True)
class EdgeMetrics:
    tp: int
    tn: int
    fp: int
    fn: int

    @staticmethod
    def _ratio(num, den):
        return num / den if den else None

    @property
    def sensitivity(self):
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def specificity(self):
        return self._ratio(self.tn, self.tn + self.fp)

    @property
    def fdr(self):
        return self._ratio(self.fp, self.tp + self.fp)


def make_generator(seed) -> np.random.Generator:
    """Counter-based (Philox) generator for a seed or ``SeedSequence``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(p: int, k: int) -> list:
    base, extra = divmod(p, k)
    return [base + 1 if i < extra else base for i in range(k)]


def make_block_cov(cfg: SimConfig, rng: np.random.Generator | None = None) -> GroundTruth:
    """Block-diagonal correlation matrix with ``Sigma_k = T T' + delta_k I``.

    ``T`` is lower triangular with U(-1, 1) entries and ``delta_k`` lifts the
    smallest eigenvalue to ``eigen_floor``; the assembled matrix is then
    rescaled to unit diagonal. Edges are the off-diagonal support of its
    inverse, which is computed block by block so that cross-block entries are
    exact zeros.

    With ``design="equicorrelated"`` every block instead has constant
    correlation ``within``, giving well separated groups.
    """
    rng = make_generator(cfg.seed) if rng is None else rng
    sizes = block_sizes(cfg.p, cfg.k)
    sigma = np.zeros((cfg.p, cfg.p))
    theta = np.zeros((cfg.p, cfg.p))
    blocks = []
    start = 0
    for size in sizes:
        if cfg.design == "equicorrelated":
            sk = np.full((size, size), cfg.within)
            np.fill_diagonal(sk, 1.0)
        else:
            sk = unscaled_block(size, cfg.eigen_floor, rng)
        d = 1.0 / np.sqrt(np.diag(sk))
        sk = sk * np.outer(d, d)
        np.fill_diagonal(sk, 1.0)
        idx = slice(start, start + size)
        sigma[idx, idx] = sk
        theta[idx, idx] = np.linalg.inv(sk)
        blocks.append(tuple(range(start, start + size)))
        start += size
    sigma = (sigma + sigma.T) / 2
    cut = 1e-10 * np.abs(theta).max()
    rows, cols = np.nonzero(np.triu(np.abs(theta) > cut, k=1))
    edges = frozenset(zip(rows.tolist(), cols.tolist()))
    return GroundTruth(sigma, Partition(tuple(blocks)), edges)


def unscaled_block(size: int, eigen_floor: float, rng: np.random.Generator) -> np.ndarray:
    """One ``T T' + delta I`` block before correlation rescaling."""
    t = np.tril(rng.uniform(-1.0, 1.0, size=(size, size)))
    a = t @ t.T
    return a + max(0.0, eigen_floor - float(np.linalg.eigvalsh(a)[0])) * np.eye(size)


def sample_mvn(truth: GroundTruth, n: int, seed) -> DataMatrix:
    """``n`` draws from ``N(0, Sigma)`` as ``Z L'`` with ``L = chol(Sigma)``."""
    rng = seed if isinstance(seed, np.random.Generator) else make_generator(seed)
    chol = np.linalg.cholesky(truth.sigma)
    z = rng.standard_normal((n, truth.sigma.shape[0]))
    return DataMatrix(z @ chol.T)


def _hac(s, k: int, method: str) -> Partition:
    a = s.values if isinstance(s, CovMatrix) else np.asarray(s, dtype=float)
    p = a.shape[0]
    if not 1 <= k <= p:
        raise InputError(f"k must lie in [1, {p}]")
    if p == 1:
        return Partition.singletons(1)
    dist = 1.0 - np.abs(a)
    np.fill_diagonal(dist, 0.0)
    dist = np.clip((dist + dist.T) / 2, 0.0, None)
    tree = linkage(squareform(dist, checks=False), method=method)
    return Partition.from_labels(cut_tree(tree, n_clusters=k).ravel())


def hac_average(s, k: int) -> Partition:
    """Average-linkage clustering on ``1 - |s_ij|`` cut at ``k`` clusters."""
    return _hac(s, k, "average")


def hac_single(s, k: int) -> Partition:
    return _hac(s, k, "single")


def edge_metrics(est, truth, p: int) -> EdgeMetrics:
    """Confusion counts over the ``p(p-1)/2`` unordered variable pairs."""
    est = {tuple(sorted(e)) for e in est}
    truth = {tuple(sorted(e)) for e in truth}
    total = p * (p - 1) // 2
    tp = len(est & truth)
    fp = len(est - truth)
    fn = len(truth - est)
    return EdgeMetrics(tp=tp, tn=total - tp - fp - fn, fp=fp, fn=fn)


def infer_network(s: np.ndarray, n: int, partition: Partition, grid_size=50, tol=1e-4, max_iter=10_000):
    """Per-block BIC^net glasso; returns the merged edge set (global indices)."""
    edges = set()
    for block in partition.blocks:
        if len(block) < 2:
            continue
        idx = np.asarray(block)
        sb = s[np.ix_(idx, idx)]
        _, est, _ = select_rho_cov(sb, n, default_grid(sb, grid_size), tol=tol, max_iter=max_iter)
        edges.update((block[i], block[j]) for i, j in est.edges)
    return edges


def _cgl_network(s: np.ndarray, partition: Partition, tol, max_iter):
    edges = set()
    for block in partition.blocks:
        if len(block) < 2:
            continue
        idx = np.asarray(block)
        sb = s[np.ix_(idx, idx)]
        est = graphical_lasso(sb, cgl_rho(sb), tol=tol, max_iter=max_iter)
        edges.update((block[i], block[j]) for i, j in est.edges)
    return edges


def _components_of_edges(edges, p: int) -> Partition:
    from .partition import _UnionFind

    uf = _UnionFind(p)
    for i, j in edges:
        uf.union(i, j)
    return uf.partition()


def run_replicate(cfg: SimConfig, replicate: int, seed_seq, strategies=STRATEGIES,
                  grid_size=50, tol=1e-4, max_iter=10_000, shrr_quantile=0.5,
                  timing=False) -> list:
    """All requested strategies on one simulated dataset; one row per strategy."""
    rng = make_generator(seed_seq)
    truth = make_block_cov(cfg, rng)
    x = standardize(sample_mvn(truth, cfg.n, rng))
    s = sample_covariance(x)
    sv = s.values
    rows = []

    path = points = None

    def run(name):
        nonlocal path, points
        if name == "truepart":
            part = truth.partition
            return part, infer_network(sv, cfg.n, part, grid_size, tol, max_iter)
        if name == "glasso":
            edges = infer_network(sv, cfg.n, Partition.one_block(cfg.p), grid_size, tol, max_iter)
            return _components_of_edges(edges, cfg.p), edges
        if name == "cgl":
            part = hac_average(s, cfg.k)
            return part, _cgl_network(sv, part, tol, max_iter)
        if points is None:
            path = threshold_path(s)
            points = score_path(x, path, s)
        diag = select_shdj(points) if name == "shdj" else select_shrr(points, shrr_quantile)
        part = diag.selected.partition
        return part, infer_network(sv, cfg.n, part, grid_size, tol, max_iter)

    for name in strategies:
        t0 = time.perf_counter()
        row = {"replicate": replicate, "strategy": name}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                part, edges = run(name)
        except BlockGGMError as exc:
            row.update(error=f"{type(exc).__name__}: {exc}")
            part = edges = None
        if part is not None:
            m = edge_metrics(edges, truth.edges, cfg.p)
            row.update(
                ari=adjusted_rand_index(part, truth.partition),
                sensitivity=m.sensitivity,
                specificity=m.specificity,
                fdr=m.fdr,
                k_selected=part.k,
                d_selected=part.dimension(),
            )
        row["seconds"] = time.perf_counter() - t0 if timing else None
        rows.append(row)
    return rows


def run_benchmark(cfg: SimConfig, reps: int, strategies=STRATEGIES, threads: int = 1,
                  grid_size=50, tol=1e-4, max_iter=10_000, shrr_quantile=0.5,
                  timing=False) -> list:
    """Run ``reps`` seeded replicates; rows ordered by (replicate, strategy).

    Replicate ``r`` draws from the ``r``-th child of ``SeedSequence(cfg.seed)``,
    so results do not depend on ``threads``.
    """
    if reps < 1:
        raise InputError("reps must be at least 1")
    unknown = set(strategies) - set(STRATEGIES)
    if unknown:
        raise InputError(f"unknown strategies: {sorted(unknown)}")
    children = np.random.SeedSequence(cfg.seed).spawn(reps)
    kwargs = dict(strategies=tuple(strategies), grid_size=grid_size, tol=tol,
                  max_iter=max_iter, shrr_quantile=shrr_quantile, timing=timing)
    if threads <= 1:
        results = [run_replicate(cfg, r, children[r], **kwargs) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_replicate, cfg, r, children[r], **kwargs) for r in range(reps)]
            results = [f.result() for f in futures]
    return [row for rows in results for row in rows]


def _fmt(value):
    if value is None:
        return "nan"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def benchmark_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        out = []
        for col in CSV_COLUMNS:
            value = row.get(col)
            if col == "seconds" and value is None:
                out.append("")
            else:
                out.append(_fmt(value))
        writer.writerow(out)
    return buf.getvalue()


def summarize(rows) -> dict:
    """Mean and standard deviation per strategy and metric (NaN-aware)."""
    metrics = ("ari", "sensitivity", "specificity", "fdr", "k_selected", "d_selected", "seconds")
    summary = {}
    for name in dict.fromkeys(r["strategy"] for r in rows):
        sub = [r for r in rows if r["strategy"] == name]
        entry = {"replicates": len(sub), "failures": sum("error" in r for r in sub)}
        for metric in metrics:
            vals = np.array([r.get(metric) if r.get(metric) is not None else np.nan for r in sub],
                            dtype=float)
            ok = vals[~np.isnan(vals)]
            entry[metric] = {
                "mean": float(ok.mean()) if ok.size else None,
                "sd": float(ok.std(ddof=1)) if ok.size > 1 else None,
                "count": int(ok.size),
            }
        summary[name] = entry
    return summary


def summary_json(rows) -> str:
    return json.dumps(summarize(rows), indent=2, sort_keys=True)
