"""MaxLIPO global search alternated with a quadratic trust-region step.

Global steps maximise a Lipschitz upper bound with one slope per dimension
over a pool of random candidates and only evaluate a candidate whose bound
beats the incumbent. Local steps fit a least-squares quadratic around the
incumbent and maximise it inside a trust region.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .base import Budget, SearchResult, run

NOISE = 1e-3
N_CANDIDATES = 500
INITIAL_RADIUS = 0.1
MAX_RADIUS = 0.5
MIN_RADIUS = 1e-4
GRID = 21


@dataclass
class LipschitzState:
    """Per-dimension slopes k_d and the noise allowance added to the bound."""

    k: np.ndarray
    eps: float = NOISE
    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)

    @classmethod
    def empty(cls, m: int, eps: float = NOISE) -> "LipschitzState":
        return cls(np.zeros(m), eps)

    def add(self, x, y):
        """Record a point and raise slopes until every pair satisfies the bound.

        For a violating pair each k_d is raised to |df| |dx_d| / ||dx||^2, which
        alone makes sum_d k_d |dx_d| >= |df| and stays bounded for pairs that
        are nearly aligned with an axis.
        """
        x = np.asarray(x, dtype=float)
        if self.xs:
            X = np.array(self.xs)
            dx = np.abs(X - x)
            df = np.abs(np.array(self.ys) - y)
            sq = (dx ** 2).sum(axis=1)
            violated = (df > dx @ self.k + self.eps) & (sq > 0)
            if violated.any():
                quot = df[violated, None] * dx[violated] / sq[violated, None]
                self.k = np.maximum(self.k, quot.max(axis=0))
        self.xs.append(x)
        self.ys.append(float(y))

    def upper_bound(self, points) -> np.ndarray:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        X = np.array(self.xs)
        dist = np.abs(P[:, None, :] - X[None, :, :]) @ self.k
        return (np.array(self.ys)[None, :] + dist).min(axis=1) + self.eps


def _quadratic_features(dx):
    m = dx.shape[1]
    cols = [np.ones(len(dx))] + [dx[:, d] for d in range(m)]
    cols += [dx[:, i] * dx[:, j] * (0.5 if i == j else 1.0)
             for i, j in combinations_with_replacement(range(m), 2)]
    return np.column_stack(cols)


def fit_quadratic(xs, ys, center):
    """Least-squares quadratic around ``center``; ``None`` if under-determined."""
    xs = np.asarray(xs, dtype=float)
    m = xs.shape[1]
    p = (m + 1) * (m + 2) // 2
    if len(xs) < p:
        return None
    A = _quadratic_features(xs - center)
    coef, _, rank, _ = np.linalg.lstsq(A, np.asarray(ys, dtype=float), rcond=None)
    if rank < p:
        return None
    return coef


def _model_value(coef, dx):
    return _quadratic_features(np.atleast_2d(dx)) @ coef


def _maximise_model(coef, center, radius, m):
    lo = np.maximum(center - radius, 0.0)
    hi = np.minimum(center + radius, 1.0)
    axes = [np.linspace(lo[d], hi[d], GRID) for d in range(m)]
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(m, -1).T
    # stationary point of the model, clipped into the trust box, as an extra candidate
    g = coef[1:m + 1]
    H = np.zeros((m, m))
    for c, (i, j) in zip(coef[m + 1:], combinations_with_replacement(range(m), 2)):
        H[i, j] = H[j, i] = c
    try:
        s = np.linalg.solve(H, -g)
        grid = np.vstack([grid, np.clip(center + s, lo, hi)])
    except np.linalg.LinAlgError:
        pass
    vals = _model_value(coef, grid - center)
    best = int(np.argmax(vals))
    return grid[best], float(vals[best])


class _Local:
    def __init__(self, m):
        self.m = m
        self.radius = INITIAL_RADIUS
        self.center = None

    def step(self, search, lip):
        best = search.best
        center = np.array(best.coords)
        if self.center is None or not np.array_equal(center, self.center):
            self.center = center
            self.radius = INITIAL_RADIUS
        if self.radius < MIN_RADIUS:
            return False
        X = np.array(lip.xs)
        Y = np.array(lip.ys)
        p = (self.m + 1) * (self.m + 2) // 2
        near = np.argsort(((X - center) ** 2).sum(axis=1), kind="stable")[: 2 * p]
        coef = fit_quadratic(X[near], Y[near], center)
        if coef is None:
            return False
        x_new, predicted = _maximise_model(coef, center, self.radius, self.m)
        gain = predicted - float(_model_value(coef, np.zeros(self.m))[0])
        if gain <= 1e-12 or np.array_equal(x_new, center):
            self.radius *= 0.5
            return False
        f_new = _evaluate(search, lip, x_new)
        ratio = (f_new - best.value) / gain
        if ratio > 0.75 and np.max(np.abs(x_new - center)) >= 0.99 * self.radius:
            self.radius = min(2 * self.radius, MAX_RADIUS)
        elif ratio < 0.25:
            self.radius *= 0.5
        if f_new > best.value:
            self.center = np.array(search.trials[-1].coords)
        return True


def _evaluate(search, lip, x):
    f = search.evaluate(x)
    trial = search.trials[-1]
    if not trial.hit:
        lip.add(trial.coords, f)
    return f


def _global_step(search, lip, rng, n_candidates):
    cands = rng.random((n_candidates, search.m))
    ub = lip.upper_bound(cands)
    i = int(np.argmax(ub))
    if ub[i] <= search.best.value:
        return False
    _evaluate(search, lip, cands[i])
    return True


def _search(search, rng, eps, n_candidates, state_out):
    lip = LipschitzState.empty(search.m, eps)
    state_out.append(lip)
    _evaluate(search, lip, rng.random(search.m))
    local = _Local(search.m)
    while True:
        moved = _global_step(search, lip, rng, n_candidates)
        moved = local.step(search, lip) or moved
        if not moved:
            _evaluate(search, lip, rng.random(search.m))


def malherbe_powell(objective, budget: Budget = Budget(), eps: float = NOISE,
                    n_candidates: int = N_CANDIDATES, state_out: list | None = None) -> SearchResult:
    """``state_out``, if given, receives the final :class:`LipschitzState`."""
    constants = {"eps": eps, "n_candidates": n_candidates, "initial_radius": INITIAL_RADIUS,
                 "max_radius": MAX_RADIUS, "min_radius": MIN_RADIUS, "grid": GRID}
    return run("malherbe_powell", _search, objective, budget, constants,
               eps=eps, n_candidates=n_candidates,
               state_out=state_out if state_out is not None else [])
