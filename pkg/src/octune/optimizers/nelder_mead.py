"""Nelder-Mead simplex search (maximising) inside the unit box."""
from __future__ import annotations

import numpy as np

from .base import Budget, SearchResult, run

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5
MIN_DIAMETER = 1e-6


def initial_simplex(start, scale):
    """``start`` plus one vertex per axis offset by ``scale``, mirrored if it leaves the box."""
    start = np.clip(np.asarray(start, dtype=float), 0.0, 1.0)
    verts = [start]
    for d in range(len(start)):
        v = start.copy()
        v[d] = v[d] + scale if v[d] + scale <= 1.0 else v[d] - scale
        verts.append(np.clip(v, 0.0, 1.0))
    return np.array(verts)


def _diameter(simplex):
    diff = simplex[:, None, :] - simplex[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).max())


def _search(search, rng, start, scale):
    # work with g = -f so the textbook minimisation rules read unchanged
    g = lambda x: -search.evaluate(np.clip(x, 0.0, 1.0))
    simplex = initial_simplex(start, scale)
    vals = np.array([g(v) for v in simplex])
    while _diameter(simplex) >= MIN_DIAMETER:
        order = np.argsort(vals, kind="stable")
        simplex, vals = simplex[order], vals[order]
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = np.clip(centroid + REFLECT * (centroid - worst), 0.0, 1.0)
        gr = g(xr)
        if vals[0] <= gr < vals[-2]:
            simplex[-1], vals[-1] = xr, gr
            continue
        if gr < vals[0]:
            xe = np.clip(centroid + EXPAND * (xr - centroid), 0.0, 1.0)
            ge = g(xe)
            simplex[-1], vals[-1] = (xe, ge) if ge < gr else (xr, gr)
            continue
        if gr < vals[-1]:
            xc = np.clip(centroid + CONTRACT * (xr - centroid), 0.0, 1.0)
            gc = g(xc)
            if gc <= gr:
                simplex[-1], vals[-1] = xc, gc
                continue
        else:
            xc = np.clip(centroid + CONTRACT * (worst - centroid), 0.0, 1.0)
            gc = g(xc)
            if gc < vals[-1]:
                simplex[-1], vals[-1] = xc, gc
                continue
        # shrink towards the best vertex
        for i in range(1, len(simplex)):
            simplex[i] = simplex[0] + SHRINK * (simplex[i] - simplex[0])
            vals[i] = g(simplex[i])


def nelder_mead(objective, budget: Budget = Budget(), start=None,
                simplex_scale: float = 0.1) -> SearchResult:
    m = objective.space.m
    start = np.full(m, 0.5) if start is None else start
    constants = {"simplex_scale": simplex_scale, "reflect": REFLECT, "expand": EXPAND,
                 "contract": CONTRACT, "shrink": SHRINK, "min_diameter": MIN_DIAMETER}
    return run("nelder_mead", _search, objective, budget, constants,
               start=start, scale=simplex_scale)
