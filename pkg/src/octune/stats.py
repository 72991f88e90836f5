"""Dataset-weighted summaries and paired significance tests."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

__all__ = [
    "ProblemWeight",
    "PairedSample",
    "problem_weights",
    "weighted_mean",
    "clustered_wilcoxon",
    "holm_bonferroni",
    "weighted_kendall_tau",
]


@dataclass(frozen=True)
class ProblemWeight:
    problem: str
    dataset: str
    weight: float


@dataclass(frozen=True)
class PairedSample:
    difference: float
    cluster: str


def problem_weights(problems, datasets) -> list[ProblemWeight]:
    """Weights giving every dataset the same total: 1 / (problems in dataset * datasets)."""
    counts = Counter(datasets)
    n_sets = len(counts)
    return [ProblemWeight(p, d, 1.0 / (counts[d] * n_sets)) for p, d in zip(problems, datasets)]


def _weights(weights):
    return np.array([w.weight if isinstance(w, ProblemWeight) else float(w) for w in weights])


def weighted_mean(values, weights) -> float:
    v = np.asarray(values, dtype=float)
    w = _weights(weights)
    if v.size == 0:
        raise ValueError("weighted_mean of empty input")
    if v.shape != w.shape:
        raise ValueError("values and weights are not aligned")
    return float((w * v).sum() / w.sum())


def clustered_wilcoxon(sample, alternative: str = "greater") -> float:
    """One-sided clustered signed-rank test of paired differences.

    Absolute non-zero differences are ranked over all observations (average
    ranks on ties), signed ranks are summed per cluster, and the statistic is
    the total over clusters with variance estimated by the sum of squared
    cluster totals. ``alternative="greater"`` gives a small p when the
    differences tend to be positive (first member of each pair better).
    All-zero differences give p = 0.5.
    """
    if alternative not in ("greater", "less"):
        raise ValueError("alternative must be 'greater' or 'less'")
    d = np.array([s.difference for s in sample], dtype=float)
    clusters = np.array([s.cluster for s in sample], dtype=object)
    keep = d != 0
    d, clusters = d[keep], clusters[keep]
    if d.size == 0:
        return 0.5
    signed = np.sign(d) * rankdata(np.abs(d))
    totals = {}
    for c, r in zip(clusters, signed):
        totals[c] = totals.get(c, 0.0) + r
    t = np.array(list(totals.values()))
    var = float((t ** 2).sum())
    if var == 0:
        return 0.5
    z = float(t.sum()) / math.sqrt(var)
    return float(norm.sf(z) if alternative == "greater" else norm.cdf(z))


def holm_bonferroni(pvalues) -> list[float]:
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    if m == 0:
        return []
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    order = np.argsort(p, kind="stable")
    scaled = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adjusted = np.maximum.accumulate(scaled)
    out = np.empty(m)
    out[order] = adjusted
    return out.tolist()


def weighted_kendall_tau(a, b, weights) -> float:
    """Kendall's tau with pair (i, j) weighted by w_i * w_j; tied pairs left out.

    Returns NaN when every pair is tied in ``a`` or ``b``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = _weights(weights)
    if not (a.shape == b.shape == w.shape) or a.size < 2:
        raise ValueError("need aligned inputs of length >= 2")
    iu = np.triu_indices(a.size, 1)
    sa = np.sign(a[:, None] - a[None, :])[iu]
    sb = np.sign(b[:, None] - b[None, :])[iu]
    pw = (w[:, None] * w[None, :])[iu]
    untied = (sa != 0) & (sb != 0)
    den = pw[untied].sum()
    if den == 0:
        return float("nan")
    return float((pw * sa * sb)[untied].sum() / den)
