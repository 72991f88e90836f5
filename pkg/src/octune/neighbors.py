"""Exact Manhattan k-nearest-neighbour queries.

Tables are sorted by distance with ties broken by reference index, so a
table for ``k_max`` contains the table for every smaller ``k`` as a prefix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NeighborIndex", "NeighborTable", "build_index", "query", "query_loo", "manhattan"]

# rows of queries processed per block; bounds the m x block distance buffer
_BLOCK = 256


def manhattan(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Manhattan distances between the rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros((a.shape[0], b.shape[0]))
    for f in range(a.shape[1]):
        out += np.abs(a[:, f, None] - b[None, :, f])
    return out


@dataclass(frozen=True)
class NeighborIndex:
    points: np.ndarray
    metric: str = "manhattan"

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class NeighborTable:
    distances: np.ndarray
    indices: np.ndarray
    self_excluded: bool = False

    @property
    def k_max(self) -> int:
        return self.distances.shape[1]

    def prefix(self, k: int) -> "NeighborTable":
        return NeighborTable(self.distances[:, :k], self.indices[:, :k], self.self_excluded)


def build_index(points) -> NeighborIndex:
    x = np.array(points, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("cannot index an empty point set")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    x.flags.writeable = False
    return NeighborIndex(x)


def _sorted_block(index: NeighborIndex, queries: np.ndarray, width: int):
    dist = manhattan(queries, index.points)
    # stable sort keeps lower reference indices first among equal distances
    order = np.argsort(dist, axis=1, kind="stable")[:, :width]
    return np.take_along_axis(dist, order, axis=1), order


def query(index: NeighborIndex, queries, k_max: int) -> NeighborTable:
    q = np.asarray(queries, dtype=float)
    if q.ndim != 2 or q.shape[1] != index.points.shape[1]:
        raise ValueError("query width does not match the index")
    if not 1 <= k_max <= index.size:
        raise ValueError(f"k_max={k_max} outside [1, {index.size}]")
    dists = np.empty((q.shape[0], k_max))
    idx = np.empty((q.shape[0], k_max), dtype=np.intp)
    for start in range(0, q.shape[0], _BLOCK):
        stop = start + _BLOCK
        dists[start:stop], idx[start:stop] = _sorted_block(index, q[start:stop], k_max)
    return NeighborTable(dists, idx, False)


def query_loo(index: NeighborIndex, k_max: int) -> NeighborTable:
    """Neighbours of every indexed point among the other indexed points.

    Queries ``k_max + 1`` neighbours and drops the entry carrying the point's
    own row index. With many exact duplicates of lower index the own row may
    fall outside the first ``k_max + 1``; the last entry is dropped instead,
    which is what a rebuild without the point would return.
    """
    m = index.size
    if not 1 <= k_max <= m - 1:
        raise ValueError(f"k_max={k_max} outside [1, {m - 1}]")
    full = query(index, index.points, k_max + 1)
    own = full.indices == np.arange(m)[:, None]
    missing = ~own.any(axis=1)
    own[missing, -1] = True
    keep = ~own
    dists = full.distances[keep].reshape(m, k_max)
    idx = full.indices[keep].reshape(m, k_max)
    return NeighborTable(dists, idx, True)
