"""Uniform random search over the unit box."""
from __future__ import annotations

from .base import Budget, SearchResult, run


def _search(search, rng):
    while True:
        search.evaluate(rng.random(search.m))


def random_search(objective, budget: Budget = Budget()) -> SearchResult:
    return run("random", _search, objective, budget, {})
