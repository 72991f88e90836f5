"""Validation AUROC for hyperparameter values, and the cached search objective.

NND, LNND and ALP are validated with leave-one-out over the training targets,
using one shared neighbour table plus the corrections needed to pretend the
held-out target was never in the target set. LOF and SVM use stratified
five-fold validation.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import descriptors as ds
from . import neighbors as nb
from .dataset import stratified_kfold

__all__ = [
    "auroc",
    "Dimension",
    "SearchSpace",
    "ValidationPlan",
    "EvaluationCache",
    "CachedObjective",
    "ObjectiveHandle",
    "LOOState",
    "loo_validate_nnd",
    "loo_validate_lnnd",
    "loo_validate_alp",
    "cv5_validate",
    "objective",
    "search_space",
]

log = logging.getLogger(__name__)

LOO_KINDS = ("NND", "LNND", "ALP")
CV_KINDS = ("LOF", "SVM")


def auroc(target_scores, other_scores) -> float:
    """Probability that a target outscores a non-target, ties counting 1/2."""
    t = np.asarray(target_scores, dtype=float).ravel()
    o = np.asarray(other_scores, dtype=float).ravel()
    if t.size == 0 or o.size == 0:
        raise ValueError("auroc needs at least one score in each group")
    if np.isnan(t).any() or np.isnan(o).any():
        raise ValueError("scores must not be NaN")
    ranks = rankdata(np.concatenate([t, o]))
    # rank sums are exact half-integers, so this equals pair counting
    u = ranks[: t.size].sum() - t.size * (t.size + 1) / 2.0
    return float(u / (t.size * o.size))


# --- search space -------------------------------------------------------------

@dataclass(frozen=True)
class Dimension:
    name: str
    low: float
    high: float
    log: bool = False
    integer: bool = False

    def value(self, u: float):
        u = min(1.0, max(0.0, float(u)))
        if self.log:
            x = math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))
        else:
            x = self.low + u * (self.high - self.low)
        if self.integer:
            return int(min(self.high, max(self.low, math.floor(x + 0.5))))
        return min(self.high, max(self.low, x))

    def coordinate(self, value) -> float:
        if self.high == self.low:
            return 0.0
        if self.log:
            u = (math.log(value) - math.log(self.low)) / (math.log(self.high) - math.log(self.low))
        else:
            u = (value - self.low) / (self.high - self.low)
        return min(1.0, max(0.0, u))


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple

    @property
    def m(self) -> int:
        return len(self.dims)

    def clamp(self, u) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float).reshape(self.m), 0.0, 1.0)

    def values(self, u) -> dict:
        u = self.clamp(u)
        return {d.name: d.value(x) for d, x in zip(self.dims, u)}

    def coordinates(self, values: dict) -> np.ndarray:
        return np.array([d.coordinate(values[d.name]) for d in self.dims])

    def to_dict(self) -> dict:
        return {"dims": [vars(d) for d in self.dims]}


def unit_space(m: int) -> SearchSpace:
    return SearchSpace(tuple(Dimension(f"x{i}", 0.0, 1.0) for i in range(m)))


def search_space(kind: str, n: int, k_max: int | None = None) -> SearchSpace:
    """Hyperparameter space of ``kind`` for ``n`` training targets.

    ``k_max`` overrides the upper end of ``k`` for the single-k descriptors.
    """
    if kind in ("NND", "LNND", "LOF"):
        hi = k_max if k_max is not None else ds.k_cap(n)
        return SearchSpace((Dimension("k", 1, max(1, hi), log=True, integer=True),))
    if kind == "ALP":
        return SearchSpace((Dimension("k", 1, 5 * n, log=True, integer=True),
                            Dimension("l", 1, 5 * n, log=True, integer=True)))
    if kind == "SVM":
        return SearchSpace((Dimension("nu", *ds.NU_RANGE), Dimension("c_prime", *ds.C_PRIME_RANGE)))
    raise ValueError(kind)


# --- leave-one-out ------------------------------------------------------------

class LOOState:
    """Neighbour tables shared by every leave-one-out evaluation of a problem.

    ``targets`` and ``others`` are the training-set rows of the target class and
    of the pooled other classes. The target-set table excludes each target's own
    row and is wide enough for the corrections of the largest admissible k.
    """

    def __init__(self, targets, others, width: int):
        self.targets = np.asarray(targets, dtype=float)
        self.others = np.asarray(others, dtype=float)
        self.n = self.targets.shape[0]
        if self.n < 2:
            raise ValueError("leave-one-out needs at least two targets")
        self.index = nb.build_index(self.targets)
        width = max(1, min(width, self.n - 1))
        self.width = width
        self.own = nb.query_loo(self.index, width)
        self.other = nb.query(self.index, self.others, min(width, self.n))
        self._positions = None

    def held_out_positions(self) -> np.ndarray:
        """[y, j]: position of target y in the list of its j-th neighbour (``width`` if absent)."""
        if self._positions is None:
            rows = self.own.indices
            nbr_lists = rows[rows]  # (n, width, width)
            hit = nbr_lists == np.arange(self.n)[:, None, None]
            pos = np.where(hit.any(axis=2), hit.argmax(axis=2), self.width)
            self._positions = pos
        return self._positions


def _nnd_k_max(n):
    return max(1, min(n - 1, ds.k_cap(n)))


def _lnnd_k_max(n):
    return max(1, min(n - 2, ds.k_cap(n)))


def _check_k(k, hi, what):
    if not 1 <= k <= hi:
        raise ValueError(f"{what}: k={k} outside [1, {hi}]")


def loo_validate_nnd(state: LOOState, k: int) -> float:
    _check_k(k, min(_nnd_k_max(state.n), state.width), "NND leave-one-out")
    t = ds.nnd_from_table(state.own.distances, k)
    o = ds.nnd_from_table(state.other.distances, k)
    return auroc(t, o)


def _lnnd_loo_scores(state: LOOState, k: int) -> np.ndarray:
    D, I = state.own.distances, state.own.indices
    nbr = I[:, k - 1]
    # is the held-out target among the k nearest neighbours of its k-th neighbour?
    among = (I[nbr, :k] == np.arange(state.n)[:, None]).any(axis=1)
    den = np.where(among, D[nbr, k], D[nbr, k - 1])
    return -ds.safe_ratio(D[:, k - 1], den)


def loo_validate_lnnd(state: LOOState, k: int) -> float:
    _check_k(k, min(_lnnd_k_max(state.n), state.width - 1), "LNND leave-one-out")
    t = _lnnd_loo_scores(state, k)
    o = ds.lnnd_from_table(state.other.distances, state.other.indices,
                           state.own.distances[:, k - 1], k)
    return auroc(t, o)


def _alp_loo_scores(state: LOOState, k: int, l: int) -> np.ndarray:
    trunc = ds.truncation_length(state.n - 1)
    kk, ll = min(k, trunc), min(l, trunc)
    wk, wl = ds.linear_weights(k, trunc), ds.linear_weights(l, trunc)
    D, I = state.own.distances, state.own.indices
    rows = I[:, :ll]
    base = D[rows, : kk + 1]  # (n, l', k'+1)
    pos = state.held_out_positions()[:, :ll, None]
    i = np.arange(kk)[None, None, :]
    # dropping the held-out target shifts the later entries of a neighbour's list up by one
    nbr = np.where(i >= pos, base[..., 1:], base[..., :kk])
    return ds.alp_from_tables(D[:, :kk], nbr, wk, wl)


def _alp_full_scores(state: LOOState, k: int, l: int) -> np.ndarray:
    trunc = ds.truncation_length(state.n)
    kk, ll = min(k, trunc), min(l, trunc)
    wk, wl = ds.linear_weights(k, trunc), ds.linear_weights(l, trunc)
    nbr = state.own.distances[state.other.indices[:, :ll], :kk]
    return ds.alp_from_tables(state.other.distances[:, :kk], nbr, wk, wl)


def alp_loo_width(n: int) -> int:
    return min(n - 1, max(ds.truncation_length(n), ds.truncation_length(n - 1) + 1))


def loo_validate_alp(state: LOOState, k: int, l: int) -> float:
    if state.n < 3:
        raise ValueError("ALP leave-one-out needs at least three targets")
    for name, v in (("k", k), ("l", l)):
        if not 1 <= v <= 5 * state.n:
            raise ValueError(f"ALP leave-one-out: {name}={v} outside [1, {5 * state.n}]")
    if state.width < alp_loo_width(state.n):
        raise ValueError("neighbour table too narrow for ALP leave-one-out")
    return auroc(_alp_loo_scores(state, k, l), _alp_full_scores(state, k, l))


# --- five-fold ------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationPlan:
    strategy: str
    folds: int = 5
    seed: int = 0

    @classmethod
    def for_kind(cls, kind: str, seed: int = 0) -> "ValidationPlan":
        return cls("loo" if kind in LOO_KINDS else "cv5", 5, seed)


class CVState:
    """Inner stratified folds; for LOF also per-fold neighbour tables at ``k_max``."""

    def __init__(self, targets, others, seed: int, folds: int = 5):
        targets = np.asarray(targets, dtype=float)
        others = np.asarray(others, dtype=float)
        x = np.vstack([targets, others])
        y = np.r_[np.ones(len(targets), bool), np.zeros(len(others), bool)]
        self.n = len(targets)
        self.folds = []
        for f, (tr, te) in enumerate(stratified_kfold(y, folds, seed, name="inner validation")):
            t_val, o_val = te[y[te]], te[~y[te]]
            if len(t_val) == 0 or len(o_val) == 0:
                log.warning("inner fold %d has no %s; skipped", f,
                            "targets" if len(t_val) == 0 else "non-targets")
                continue
            self.folds.append((x[tr[y[tr]]], x[t_val], x[o_val]))
        if not self.folds:
            raise ValueError("no inner fold has both targets and non-targets")
        self.min_fold_targets = min(len(f[0]) for f in self.folds)
        self._lof = None

    def lof_k_max(self) -> int:
        return max(1, min(self.min_fold_targets - 1, ds.k_cap(self.n)))

    def lof_tables(self, k_max: int):
        if self._lof is None or self._lof[0] < k_max:
            tables = []
            for fit_t, t_val, o_val in self.folds:
                index = nb.build_index(fit_t)
                own = nb.query_loo(index, k_max)
                query = nb.query(index, np.vstack([t_val, o_val]), k_max)
                tables.append((own, query, len(t_val)))
            self._lof = (k_max, tables)
        return self._lof[1]

    def fold_scores(self, spec: ds.DescriptorSpec):
        """Yield (target scores, other scores) per retained fold."""
        if spec.kind == "LOF":
            k = spec.params["k"]
            for own, query, n_t in self.lof_tables(self.lof_k_max()):
                s = ds.lof_from_tables(query.distances, query.indices,
                                       own.distances, own.indices, k)
                yield s[:n_t], s[n_t:]
        else:
            for fit_t, t_val, o_val in self.folds:
                model = ds.fit(spec, fit_t)
                yield model.score_samples(t_val), model.score_samples(o_val)


def cv5_validate(state: CVState, spec: ds.DescriptorSpec) -> float:
    if spec.kind not in CV_KINDS:
        raise ValueError(f"{spec.kind} is validated with leave-one-out")
    if spec.kind == "LOF":
        _check_k(spec.params["k"], state.lof_k_max(), "LOF five-fold")
    return float(np.mean([auroc(t, o) for t, o in state.fold_scores(spec)]))


# --- cached objective -----------------------------------------------------------

@dataclass
class EvaluationCache:
    values: dict = field(default_factory=dict)
    proposals: int = 0
    evaluations: int = 0


class CachedObjective:
    """Objective over the unit box that evaluates each discretised key once.

    Subclasses provide ``key(u)`` and ``compute(key)``. Calling the object
    returns ``(value, hit)``.
    """

    def __init__(self, space: SearchSpace):
        self.space = space
        self.cache = EvaluationCache()
        self.log = []

    def key(self, u):
        return tuple(float(x) for x in u)

    def compute(self, key) -> float:
        raise NotImplementedError

    def describe(self, key):
        return list(key)

    def __call__(self, u):
        u = self.space.clamp(u)
        key = self.key(u)
        self.cache.proposals += 1
        hit = key in self.cache.values
        if not hit:
            value = float(self.compute(key))
            if not math.isfinite(value):
                raise ValueError(f"objective returned {value} at {key}")
            self.cache.values[key] = value
            self.cache.evaluations += 1
        value = self.cache.values[key]
        best = max(value, self.log[-1]["best"]) if self.log else value
        self.log.append({"proposal": self.cache.proposals, "coords": u.tolist(),
                         "params": self.describe(key), "hit": hit, "value": value,
                         "best": best})
        return value, hit

    def write_log(self, path):
        with open(path, "w") as fh:
            for rec in self.log:
                fh.write(json.dumps(rec) + "\n")


class FunctionObjective(CachedObjective):
    """Plain function of unit-box coordinates, cached on exact coordinates."""

    def __init__(self, fn, m: int):
        super().__init__(unit_space(m))
        self.fn = fn

    def compute(self, key):
        return self.fn(np.array(key))


class ObjectiveHandle(CachedObjective):
    """Validation AUROC of one descriptor on one training set, over the unit box."""

    def __init__(self, kind: str, targets, others, seed: int = 0):
        self.kind = kind
        self.plan = ValidationPlan.for_kind(kind, seed)
        targets = np.asarray(targets, dtype=float)
        others = np.asarray(others, dtype=float)
        n = len(targets)
        self.n = n
        self.n_features = targets.shape[1]
        if kind == "NND":
            k_max = _nnd_k_max(n)
            self.state = LOOState(targets, others, k_max)
            space = search_space(kind, n, k_max)
        elif kind == "LNND":
            k_max = _lnnd_k_max(n)
            self.state = LOOState(targets, others, k_max + 1)
            space = search_space(kind, n, k_max)
        elif kind == "ALP":
            self.state = LOOState(targets, others, alp_loo_width(n))
            space = search_space(kind, n)
        elif kind == "LOF":
            self.state = CVState(targets, others, seed)
            space = search_space(kind, n, self.state.lof_k_max())
        elif kind == "SVM":
            self.state = CVState(targets, others, seed)
            space = search_space(kind, n)
        else:
            raise ValueError(kind)
        super().__init__(space)

    def key(self, u):
        return tuple(sorted(self.space.values(u).items()))

    def describe(self, key):
        return dict(key)

    def spec(self, u) -> ds.DescriptorSpec:
        return ds.DescriptorSpec(self.kind, self.space.values(u))

    def default_coordinates(self) -> np.ndarray:
        spec = ds.default_spec(self.kind, self.n, self.n_features)
        return self.space.coordinates(spec.params)

    def validate(self, spec: ds.DescriptorSpec) -> float:
        p = spec.params
        if self.kind == "NND":
            return loo_validate_nnd(self.state, p["k"])
        if self.kind == "LNND":
            return loo_validate_lnnd(self.state, p["k"])
        if self.kind == "ALP":
            return loo_validate_alp(self.state, p["k"], p["l"])
        return cv5_validate(self.state, spec)

    def compute(self, key):
        return self.validate(ds.DescriptorSpec(self.kind, dict(key)))


def objective(handle: CachedObjective, point) -> float:
    return handle(point)[0]
