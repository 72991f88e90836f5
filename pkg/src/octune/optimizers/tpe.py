"""Tree-structured Parzen estimator search on the unit box.

After a random warm-up the history is split at a quantile of the observed
values. Each part gets a per-dimension Parzen estimator built from truncated
normals; candidates are drawn from the good-part estimator and the one with
the largest good/bad density ratio is evaluated.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, ndtri

from .base import Budget, SearchResult, run

GAMMA = 0.25
N_STARTUP = 10
N_CANDIDATES = 24
MIN_BANDWIDTH = 1e-3
BANDWIDTH_SCALE = 0.2


def split_good_bad(values, gamma: float = GAMMA):
    """Indices of the ceil(gamma * t) best values and of the rest (stable on ties)."""
    values = np.asarray(values, dtype=float)
    n_good = math.ceil(gamma * len(values))
    order = np.argsort(-values, kind="stable")
    return order[:n_good], order[n_good:]


class Parzen1D:
    """Mixture of truncated normals on [0, 1] plus a uniform prior component.

    Each sample's bandwidth is the larger gap to its sorted neighbours, with
    the box ends standing in for missing neighbours. It is floored at
    max(1e-3, 0.2 / (N + 1)) so that clustered samples keep exploring.
    """

    def __init__(self, samples):
        s = np.sort(np.asarray(samples, dtype=float))
        padded = np.r_[0.0, s, 1.0]
        gaps = np.maximum(padded[1:-1] - padded[:-2], padded[2:] - padded[1:-1])
        self.mu = s
        floor = max(MIN_BANDWIDTH, BANDWIDTH_SCALE / (len(s) + 1))
        self.sigma = np.clip(gaps, floor, 1.0)
        self.lo = ndtr((0.0 - self.mu) / self.sigma)
        self.hi = ndtr((1.0 - self.mu) / self.sigma)
        self.weight = 1.0 / (len(s) + 1)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)[:, None]
        z = (x - self.mu) / self.sigma
        comp = np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.sigma * (self.hi - self.lo))
        return self.weight * (comp.sum(axis=1) + 1.0)

    def sample(self, rng, size):
        which = rng.integers(0, len(self.mu) + 1, size=size)
        r = rng.random(size)
        out = r.copy()  # the prior component draws uniformly
        comp = which < len(self.mu)
        j = which[comp]
        p = self.lo[j] + r[comp] * (self.hi[j] - self.lo[j])
        out[comp] = self.mu[j] + self.sigma[j] * ndtri(np.clip(p, 1e-300, 1 - 1e-16))
        return np.clip(out, 0.0, 1.0)


def propose(history_x, history_y, rng, gamma=GAMMA, n_candidates=N_CANDIDATES):
    """Next point given the history, or ``None`` when the values carry no split."""
    x = np.asarray(history_x, dtype=float)
    y = np.asarray(history_y, dtype=float)
    if np.all(y == y[0]):
        return None
    good, bad = split_good_bad(y, gamma)
    if len(bad) == 0:
        return None
    m = x.shape[1]
    cands = np.empty((n_candidates, m))
    score = np.zeros(n_candidates)
    for d in range(m):
        lg, lb = Parzen1D(x[good, d]), Parzen1D(x[bad, d])
        cands[:, d] = lg.sample(rng, n_candidates)
        score += np.log(lg.pdf(cands[:, d])) - np.log(lb.pdf(cands[:, d]))
    return cands[int(np.argmax(score))]


def _search(search, rng, gamma, n_candidates, n_startup):
    xs, ys = [], []
    while True:
        u = None
        if len(xs) >= n_startup:
            u = propose(xs, ys, rng, gamma, n_candidates)
        if u is None:
            u = rng.random(search.m)
        ys.append(search.evaluate(u))
        xs.append(search.trials[-1].coords)


def tpe(objective, budget: Budget = Budget(), gamma: float = GAMMA,
        n_candidates: int = N_CANDIDATES, n_startup: int = N_STARTUP) -> SearchResult:
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    constants = {"gamma": gamma, "n_candidates": n_candidates, "n_startup": n_startup,
                 "min_bandwidth": MIN_BANDWIDTH, "bandwidth_scale": BANDWIDTH_SCALE}
    return run("tpe", _search, objective, budget, constants,
               gamma=gamma, n_candidates=n_candidates, n_startup=n_startup)
