"""Hooke-Jeeves pattern search (maximising)."""
from __future__ import annotations

import numpy as np

from .base import Budget, SearchResult, run

INITIAL_STEP = 0.1
SHRINK = 0.5
MIN_STEP = 1e-6


def _explore(search, x, fx, step):
    """Try +/- step along each axis in turn, keeping every improvement."""
    x = x.copy()
    for d in range(search.m):
        for sign in (1.0, -1.0):
            trial = x.copy()
            trial[d] = np.clip(trial[d] + sign * step, 0.0, 1.0)
            if trial[d] == x[d]:
                continue
            ft = search.evaluate(trial)
            if ft > fx:
                x, fx = trial, ft
                break
    return x, fx


def _search(search, rng, start, step):
    base = np.clip(np.asarray(start, dtype=float), 0.0, 1.0)
    fbase = search.evaluate(base)
    while step >= MIN_STEP:
        x, fx = _explore(search, base, fbase, step)
        if fx > fbase:
            # pattern moves: keep jumping along the last successful direction
            while True:
                prev, base, fbase = base, x, fx
                pattern = np.clip(base + (base - prev), 0.0, 1.0)
                fp = search.evaluate(pattern)
                x, fx = _explore(search, pattern, fp, step)
                if not fx > fbase:
                    break
        else:
            step *= SHRINK


def hooke_jeeves(objective, budget: Budget = Budget(), start=None,
                 initial_step: float = INITIAL_STEP) -> SearchResult:
    m = objective.space.m
    start = np.full(m, 0.5) if start is None else start
    constants = {"initial_step": initial_step, "shrink": SHRINK, "min_step": MIN_STEP}
    return run("hooke_jeeves", _search, objective, budget, constants,
               start=start, step=initial_step)
