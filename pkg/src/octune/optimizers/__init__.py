"""Budget-limited maximisers over the unit box."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Budget, BudgetExhausted, Search, SearchResult, Trial
from .hooke_jeeves import hooke_jeeves
from .maxlipo import LipschitzState, malherbe_powell
from .nelder_mead import nelder_mead
from .random_search import random_search
from .tpe import tpe

OPTIMISERS = ("random", "hooke_jeeves", "nelder_mead", "tpe", "malherbe_powell")
LOCAL = ("hooke_jeeves", "nelder_mead")

__all__ = [
    "OPTIMISERS",
    "Budget",
    "BudgetExhausted",
    "LipschitzState",
    "Search",
    "SearchResult",
    "Trial",
    "hooke_jeeves",
    "malherbe_powell",
    "nelder_mead",
    "random_search",
    "tpe",
    "run_search",
]


def run_search(kind: str, handle, budget: Budget = Budget(), start=None) -> SearchResult:
    """Run optimiser ``kind`` on ``handle``.

    Local optimisers start from ``start``, else from the handle's default
    hyperparameters when it has them, else from the box centre.
    """
    if kind not in OPTIMISERS:
        raise ValueError(f"unknown optimiser {kind!r}; choose from {OPTIMISERS}")
    if kind in LOCAL and start is None:
        if hasattr(handle, "default_coordinates"):
            start = handle.default_coordinates()
        else:
            start = np.full(handle.space.m, 0.5)
    if kind == "random":
        return random_search(handle, budget)
    if kind == "hooke_jeeves":
        return hooke_jeeves(handle, budget, start)
    if kind == "nelder_mead":
        return nelder_mead(handle, budget, start)
    if kind == "tpe":
        return tpe(handle, budget)
    return malherbe_powell(handle, budget)
