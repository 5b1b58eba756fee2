"""Two-step procedure: detect a block structure, then infer each block's network."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .covariance import DataMatrix, sample_covariance, standardize
from .errors import (
    DegeneratePath,
    InputError,
    InsufficientComplexModels,
    NotConverged,
)
from .glasso import bic_net, default_grid, select_rho_cov
from .partition import Partition, threshold_path
from .selection import (
    SelectionDiagnostics,
    full_shape,
    score_path,
    select_shdj,
    select_shrr,
)

logger = logging.getLogger(__name__)

THREADS_ENV = "BLOCKGGM_THREADS"


@dataclass
class RunConfig:
    input: str | None = None
    standardize: bool = True
    method: str = "shdj"
    penalty: str = "simple"
    c: float = 1.0
    shrr_quantile: float = 0.5
    tol: float = 1e-4
    max_iter: int = 10_000
    grid_size: int = 50
    out: str = "."
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.method not in ("shdj", "shrr"):
            raise InputError(f"method must be 'shdj' or 'shrr', got {self.method!r}")
        if self.penalty not in ("simple", "full"):
            raise InputError(f"penalty must be 'simple' or 'full', got {self.penalty!r}")
        if not self.c > 0:
            raise InputError("c must be positive")
        if not 0 <= self.shrr_quantile < 1:
            raise InputError("shrr_quantile must lie in [0, 1)")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if self.max_iter < 1 or self.grid_size < 1 or self.threads < 1:
            raise InputError("max_iter, grid_size and threads must be >= 1")

    @classmethod
    def from_mapping(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise InputError(f"unknown configuration keys: {unknown}")
        return cls(**doc)

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "RunConfig":
        doc = {}
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            if not isinstance(doc, dict) or any(isinstance(v, (dict, list)) for v in doc.values()):
                raise InputError("configuration must be a flat JSON object")
        if "threads" not in doc and os.environ.get(THREADS_ENV):
            doc["threads"] = int(os.environ[THREADS_ENV])
        doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(doc)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StructureReport:
    selected: SelectionDiagnostics
    diagnostics: dict
    points: list
    excluded: int


def prepare(x: DataMatrix, config: RunConfig) -> DataMatrix:
    return standardize(x) if config.standardize else x


def detect_structure(x: DataMatrix, config: RunConfig) -> StructureReport:
    """Threshold path, likelihood scores and both slope-heuristic calibrations.

    ``x`` is used as given (standardize beforehand if wanted). The calibration
    named by ``config.method`` decides the returned partition; the other one is
    reported alongside when it can be computed.
    """
    s = sample_covariance(x)
    path = threshold_path(s)
    points = score_path(x, path, s)
    shape = full_shape(x.n, x.p, config.c) if config.penalty == "full" else None
    results = {}
    errors = {}
    for method in ("shdj", "shrr"):
        try:
            if method == "shdj":
                results[method] = select_shdj(points, shape=shape)
            else:
                results[method] = select_shrr(points, config.shrr_quantile, shape=shape)
        except (DegeneratePath, InsufficientComplexModels) as exc:
            errors[method] = f"{type(exc).__name__}: {exc}"
    if config.method in results:
        chosen = results[config.method]
    elif len({m.dimension for m in points}) == 1:
        # a single feasible dimension leaves nothing to calibrate
        only = max(points, key=lambda m: m.loglik)
        chosen = SelectionDiagnostics(
            method="trivial",
            step_function=[(0.0, only.dimension)],
            kappa_min=0.0,
            kappa_opt=0.0,
            selected=only,
            excluded=points.excluded,
        )
    else:
        raise InsufficientComplexModels(errors[config.method])
    diagnostics = {
        "method": config.method,
        "penalty": config.penalty,
        "n": x.n,
        "p": x.p,
        "candidates": len(points),
        "excluded_candidates": points.excluded,
        "selected": chosen.to_dict(),
        "calibrations": {m: d.to_dict() for m, d in results.items()},
        "calibration_errors": errors,
    }
    return StructureReport(chosen, diagnostics, list(points), points.excluded)


@dataclass
class BlockNetwork:
    index: int
    variables: tuple
    rho: float | None = None
    bic: float | None = None
    theta: np.ndarray | None = None
    edges: list = None
    error: str | None = None

    def to_dict(self, names=None) -> dict:
        doc = {
            "block": self.index,
            "variables": list(self.variables),
            "rho": self.rho,
            "bic": self.bic,
            "edges": [[i, j, float(t)] for i, j, t in (self.edges or [])],
            "complete": self.error is None,
        }
        if names is not None:
            doc["names"] = [names[v] for v in self.variables]
        if self.error is not None:
            doc["error"] = self.error
        return doc


def _infer_block(k, block, s, n, config) -> BlockNetwork:
    net = BlockNetwork(k, tuple(block), edges=[])
    if len(block) < 2:
        return net
    idx = np.asarray(block)
    sb = s[np.ix_(idx, idx)]
    try:
        rho, est, _ = select_rho_cov(
            sb, n, default_grid(sb, config.grid_size), tol=config.tol, max_iter=config.max_iter
        )
    except NotConverged as exc:
        net.error = str(exc)
        if exc.estimate is not None:
            net.theta = exc.estimate.theta
        return net
    net.rho = rho
    net.bic = bic_net(est, sb, n)
    net.theta = est.theta
    net.edges = [(block[i], block[j], est.theta[i, j]) for i, j in sorted(est.edges)]
    return net


def infer_networks(x: DataMatrix, partition: Partition, config: RunConfig) -> list:
    """BIC^net graphical lasso in every block of ``partition`` (blocks run concurrently)."""
    if partition.p != x.p:
        raise InputError(f"partition covers {partition.p} variables, data has {x.p}")
    s = sample_covariance(x).values
    jobs = list(enumerate(partition.blocks))
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(lambda kb: _infer_block(kb[0], kb[1], s, x.n, config), jobs))
    return [_infer_block(k, b, s, x.n, config) for k, b in jobs]


def network_document(networks, partition: Partition, names=None) -> dict:
    return {
        "n_blocks": partition.k,
        "n_edges": sum(len(b.edges or []) for b in networks),
        "complete": all(b.error is None for b in networks),
        "partition": partition.to_dict(),
        "blocks": [b.to_dict(names) for b in networks],
    }


def write_json(doc, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_rows(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_structure(report: StructureReport, out: Path) -> None:
    """Partition, diagnostics and the two plot tables for one selection run."""
    write_json(report.selected.selected.partition.to_dict(), out / "partition.json")
    write_json(report.diagnostics, out / "diagnostics.json")
    write_rows(out / "kappa_dimension.csv", ["kappa", "dimension"],
               [[repr(float(k)), d] for k, d in report.selected.step_function])
    write_rows(out / "dimension_loglik.csv", ["lambda", "dimension", "n_blocks", "loglik"],
               [[repr(m.lam), m.dimension, m.partition.k, repr(m.loglik)] for m in report.points])


def write_network(networks, partition: Partition, out: Path, names=None) -> None:
    write_json(network_document(networks, partition, names), out / "network.json")
    rows = [[b.index, i, j, repr(float(t))] for b in networks for i, j, t in (b.edges or [])]
    write_rows(out / "edges.csv", ["block", "i", "j", "theta_ij"], rows)
