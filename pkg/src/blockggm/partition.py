"""Variable partitions, the thresholded-covariance partition path, and ARI."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .covariance import CovMatrix
from .errors import InputError


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks of variable indices covering ``0..p-1``.

    Blocks are stored in canonical form (sorted members, blocks ordered by
    their smallest member), so equality and hashing ignore labelling.
    """

    blocks: tuple

    def __post_init__(self):
        blocks = [tuple(sorted(int(i) for i in b)) for b in self.blocks]
        if any(len(b) == 0 for b in blocks):
            raise InputError("partition blocks must be non-empty")
        blocks.sort(key=lambda b: b[0])
        flat = [i for b in blocks for i in b]
        if sorted(flat) != list(range(len(flat))):
            raise InputError("blocks must form an exact cover of 0..p-1")
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(tuple(groups.values()))

    @classmethod
    def singletons(cls, p: int) -> "Partition":
        return cls(tuple((i,) for i in range(p)))

    @classmethod
    def one_block(cls, p: int) -> "Partition":
        return cls((tuple(range(p)),))

    @property
    def p(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple:
        return tuple(len(b) for b in self.blocks)

    def dimension(self) -> int:
        """Number of free off-diagonal covariance parameters, sum p_k(p_k-1)/2."""
        return sum(s * (s - 1) // 2 for s in self.sizes)

    def labels(self) -> np.ndarray:
        out = np.empty(self.p, dtype=int)
        for k, block in enumerate(self.blocks):
            out[list(block)] = k
        return out

    def refines(self, other: "Partition") -> bool:
        """True when every block of ``self`` lies inside a block of ``other``."""
        lab = other.labels()
        return all(len({lab[i] for i in b}) == 1 for b in self.blocks)

    def to_dict(self) -> dict:
        return {"blocks": [list(b) for b in self.blocks]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Partition":
        try:
            return cls(tuple(tuple(b) for b in doc["blocks"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"invalid partition document: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ThresholdStep:
    lam: float
    partition: Partition


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i):
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(self, i, j) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]
        return True

    def partition(self) -> Partition:
        return Partition.from_labels([self.find(i) for i in range(len(self.parent))])


def _as_array(s) -> np.ndarray:
    return s.values if isinstance(s, CovMatrix) else np.asarray(s, dtype=float)


def components_at(s, lam: float) -> Partition:
    """Connected components of the graph ``|s_ij| > lam`` (i != j)."""
    if lam < 0:
        raise ValueError("threshold must be non-negative")
    a = np.abs(_as_array(s))
    p = a.shape[0]
    uf = _UnionFind(p)
    rows, cols = np.nonzero(np.triu(a > lam, k=1))
    for i, j in zip(rows.tolist(), cols.tolist()):
        uf.union(i, j)
    return uf.partition()


def threshold_path(s) -> list:
    """All distinct partitions reachable by thresholding ``|s|``.

    Returned by increasing threshold: the first step is the partition at
    ``lam = 0`` (coarsest), the last one is all singletons. Each step carries
    the smallest threshold in ``{0} U {|s_ij|}`` that yields its partition.
    """
    a = np.abs(_as_array(s))
    p = a.shape[0]
    iu, ju = np.triu_indices(p, k=1)
    w = a[iu, ju]
    keep = w > 0
    iu, ju, w = iu[keep], ju[keep], w[keep]
    order = np.argsort(-w, kind="stable")
    iu, ju, w = iu[order], ju[order], w[order]

    uf = _UnionFind(p)
    levels = np.unique(w)[::-1]
    # (lower threshold, partition) from finest to coarsest
    steps = [[float(levels[0]) if len(levels) else 0.0, uf.partition()]]
    pos = 0
    for idx, level in enumerate(levels):
        changed = False
        while pos < len(w) and w[pos] >= level:
            changed |= uf.union(int(iu[pos]), int(ju[pos]))
            pos += 1
        lower = float(levels[idx + 1]) if idx + 1 < len(levels) else 0.0
        if changed:
            steps.append([lower, uf.partition()])
        else:
            steps[-1][0] = lower
    return [ThresholdStep(lam, part) for lam, part in reversed(steps)]


def adjusted_rand_index(a: Partition, b: Partition) -> float:
    """Hubert-Arabie adjusted Rand index between two partitions."""
    if a.p != b.p:
        raise InputError(f"partitions cover different index sets ({a.p} vs {b.p})")
    la, lb = a.labels(), b.labels()
    table = np.zeros((a.k, b.k), dtype=np.int64)
    np.add.at(table, (la, lb), 1)

    def pairs(x):
        x = np.asarray(x, dtype=float)
        return float((x * (x - 1) / 2).sum())

    index = pairs(table)
    sum_a = pairs(table.sum(axis=1))
    sum_b = pairs(table.sum(axis=0))
    total = a.p * (a.p - 1) / 2
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        # both partitions trivial (all singletons or one block) in the same way
        return 1.0 if a == b else 0.0
    return (index - expected) / (max_index - expected)
