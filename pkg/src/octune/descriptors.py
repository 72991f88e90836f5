"""The five data descriptors: NND, LNND, LOF, ALP and the one-class SVM.

Every fitted model scores queries so that larger means more target-like.
The neighbour-based scores are written against precomputed neighbour tables
so the validation code can feed them corrected leave-one-out tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import neighbors as nb
from .svm import gaussian_kernel, solve_dual

__all__ = [
    "KINDS",
    "DescriptorSpec",
    "linear_weights",
    "truncation_length",
    "k_cap",
    "default_spec",
    "fit",
    "NNDModel",
    "LNNDModel",
    "LOFModel",
    "ALPModel",
    "SVMModel",
    "nnd_score",
    "lnnd_score",
    "lof_score",
    "alp_score",
    "svm_fit",
    "svm_score",
    "safe_ratio",
    "nnd_from_table",
    "lnnd_from_table",
    "lof_from_tables",
    "alp_from_tables",
]

KINDS = ("NND", "LNND", "LOF", "ALP", "SVM")
NU_RANGE = (1e-6, 1.0)
C_PRIME_RANGE = (1e-6, 1.0 - 1e-6)


@dataclass(frozen=True)
class DescriptorSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown descriptor {self.kind!r}")
        params = dict(self.params)
        for name in ("k", "l"):
            if name in params:
                params[name] = int(params[name])
                if params[name] < 1:
                    raise ValueError(f"{name} must be a positive integer")
        if self.kind == "SVM":
            nu, cp = float(params["nu"]), float(params["c_prime"])
            if not NU_RANGE[0] <= nu <= NU_RANGE[1]:
                raise ValueError(f"nu={nu} outside {NU_RANGE}")
            if not C_PRIME_RANGE[0] <= cp <= C_PRIME_RANGE[1]:
                raise ValueError(f"c_prime={cp} outside {C_PRIME_RANGE}")
            params = {"nu": nu, "c_prime": cp}
        object.__setattr__(self, "params", params)

    def key(self) -> tuple:
        return (self.kind,) + tuple(sorted(self.params.items()))

    def __hash__(self):
        return hash(self.key())


def k_cap(n: int) -> int:
    """Upper end of the k range for NND, LNND and LOF: min(n, ceil(100 ln n))."""
    return max(1, min(n, math.ceil(100 * math.log(n)))) if n > 1 else 1


def truncation_length(n: int) -> int:
    """Neighbour-table and weight-vector length used by ALP on ``n`` targets.

    ``min(n - 1, ceil(20 ln n))``: a training point has only ``n - 1`` other
    targets to be its neighbours.
    """
    if n < 2:
        raise ValueError("ALP needs at least two target instances")
    return max(1, min(n - 1, math.ceil(20 * math.log(n))))


def default_spec(kind: str, n: int, d: int) -> DescriptorSpec:
    """Starting values for local optimisers and the untuned baseline."""
    if kind == "NND":
        return DescriptorSpec("NND", {"k": 1})
    if kind == "LNND":
        return DescriptorSpec("LNND", {"k": 1})
    if kind == "LOF":
        return DescriptorSpec("LOF", {"k": max(1, min(n - 1, math.ceil(2.5 * math.log(n))))})
    if kind == "ALP":
        return DescriptorSpec("ALP", {"k": max(1, math.ceil(5.5 * math.log(n))),
                                      "l": max(1, math.ceil(6 * math.log(n)))})
    if kind == "SVM":
        # c = d, i.e. gamma = 1/d; c' = c / (1 + c)
        return DescriptorSpec("SVM", {"nu": 0.1, "c_prime": d / (1.0 + d)})
    raise ValueError(kind)


def linear_weights(p: int, truncate_at: int | None = None) -> np.ndarray:
    """Linearly decreasing weights p, p-1, ..., 1 over p(p+1)/2.

    Only the first ``truncate_at`` entries are kept and rescaled to sum to 1.
    """
    if p < 1:
        raise ValueError("p must be positive")
    t = p if truncate_at is None else max(1, min(p, truncate_at))
    raw = np.arange(p, p - t, -1, dtype=float)
    return raw / raw.sum()


def safe_ratio(num, den):
    """num / den with 0/0 -> 1 and x/0 -> inf for x > 0."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    zero = den == 0
    out = np.where(zero & (num == 0), 1.0, out)
    return np.where(zero & (num > 0), np.inf, out)


# --- score kernels on neighbour tables --------------------------------------

def nnd_from_table(q_dist, k):
    return -q_dist[:, k - 1]


def lnnd_from_table(q_dist, q_idx, train_kdist, k):
    """``train_kdist[x]`` is the k-th neighbour distance of target ``x``."""
    num = q_dist[:, k - 1]
    den = train_kdist[q_idx[:, k - 1]]
    return -safe_ratio(num, den)


def _row_means(a):
    # column-by-column so a row's value never depends on the other rows or strides
    total = np.zeros(a.shape[0])
    for col in range(a.shape[1]):
        total += a[:, col]
    return total / a.shape[1]


def _reach_means(dist, idx, train_kdist):
    return _row_means(np.maximum(train_kdist[idx], dist))


def lof_from_tables(q_dist, q_idx, train_dist, train_idx, k):
    """-LOF_k of each query, all neighbour-of-neighbour terms within the targets.

    LOF_k(y) = mean_x lrd(x) / lrd(y) = mean_x r(y) / r(x) with r the mean
    reachability distance; each term uses the zero rule of ``safe_ratio``.
    """
    kd = train_dist[:, k - 1]
    r_train = _reach_means(train_dist[:, :k], train_idx[:, :k], kd)
    r_query = _reach_means(q_dist[:, :k], q_idx[:, :k], kd)
    terms = safe_ratio(r_query[:, None], r_train[q_idx[:, :k]])
    return -_row_means(terms)


def alp_from_tables(q_dist, nbr_dist, wk, wl):
    """ALP from truncated tables.

    ``q_dist``: (q, k') own neighbour distances d_i(y);
    ``nbr_dist``: (q, l', k') with entry [y, j, i] = d_i(NN_j(y)).
    """
    # sequential sums: results must not depend on the number of query rows
    local = np.zeros(q_dist.shape)
    for j, w in enumerate(wl):
        local += w * nbr_dist[:, j, :]
    total = local + q_dist
    lp = np.where(total > 0, local / np.where(total > 0, total, 1.0), 1.0)
    lp = -np.sort(-lp, axis=1)
    out = np.zeros(q_dist.shape[0])
    for i, w in enumerate(wk):
        out += w * lp[:, i]
    return out


# --- fitted models ------------------------------------------------------------

class _NeighbourModel:
    kind = ""

    def __init__(self, spec: DescriptorSpec, targets):
        self.spec = spec
        self.index = nb.build_index(targets)

    @property
    def n(self) -> int:
        return self.index.size

    def score(self, y) -> float:
        return float(self.score_samples(np.atleast_2d(np.asarray(y, dtype=float)))[0])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.spec.params), "n_train": self.n,
                "metric": self.index.metric, "table_width": self.table_width}


class NNDModel(_NeighbourModel):
    kind = "NND"

    def __init__(self, spec, targets):
        super().__init__(spec, targets)
        self.k = spec.params["k"]
        if self.k > self.n:
            raise ValueError(f"NND k={self.k} exceeds the {self.n} target instances")
        self.table_width = self.k

    def score_samples(self, Y):
        table = nb.query(self.index, Y, self.k)
        return nnd_from_table(table.distances, self.k)


class LNNDModel(_NeighbourModel):
    kind = "LNND"

    def __init__(self, spec, targets):
        super().__init__(spec, targets)
        self.k = spec.params["k"]
        if self.n < self.k + 1:
            raise ValueError(f"LNND k={self.k} needs at least {self.k + 1} targets")
        self.table_width = self.k
        self.train_kdist = nb.query_loo(self.index, self.k).distances[:, -1]

    def score_samples(self, Y):
        table = nb.query(self.index, Y, self.k)
        return lnnd_from_table(table.distances, table.indices, self.train_kdist, self.k)


class LOFModel(_NeighbourModel):
    kind = "LOF"

    def __init__(self, spec, targets):
        super().__init__(spec, targets)
        self.k = spec.params["k"]
        if self.n < self.k + 1:
            raise ValueError(f"LOF k={self.k} needs at least {self.k + 1} targets")
        self.table_width = self.k
        self.train_table = nb.query_loo(self.index, self.k)

    def score_samples(self, Y):
        table = nb.query(self.index, Y, self.k)
        return lof_from_tables(table.distances, table.indices,
                               self.train_table.distances, self.train_table.indices, self.k)


class ALPModel(_NeighbourModel):
    kind = "ALP"

    def __init__(self, spec, targets):
        super().__init__(spec, targets)
        self.trunc = truncation_length(self.n)
        self.k = min(spec.params["k"], self.trunc)
        self.l = min(spec.params["l"], self.trunc)
        self.wk = linear_weights(spec.params["k"], self.trunc)
        self.wl = linear_weights(spec.params["l"], self.trunc)
        self.table_width = max(self.k, self.l)
        self.train_dist = nb.query_loo(self.index, self.k).distances

    def score_samples(self, Y):
        table = nb.query(self.index, Y, self.table_width)
        nbr = self.train_dist[table.indices[:, :self.l]]
        return alp_from_tables(table.distances[:, :self.k], nbr, self.wk, self.wl)


class SVMModel:
    kind = "SVM"

    def __init__(self, spec: DescriptorSpec, targets, tol=1e-3):
        x = np.asarray(targets, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("SVM needs at least one target instance")
        self.spec = spec
        self.nu = spec.params["nu"]
        cp = spec.params["c_prime"]
        self.c = cp / (1.0 - cp)
        K = gaussian_kernel(x, x, self.c)
        alpha, self.rho, self.n_iter = solve_dual(K, self.nu, tol=tol)
        self.C = 1.0 / (self.nu * x.shape[0])
        self.n_train = x.shape[0]
        self.alpha_full = alpha
        sv = alpha > 0
        self.support = np.flatnonzero(sv)
        self.alpha = alpha[sv]
        self.support_vectors = x[sv]
        self.dual_objective = 0.5 * float(alpha @ K @ alpha)

    def score_samples(self, Y):
        K = gaussian_kernel(self.support_vectors, np.asarray(Y, dtype=float), self.c)
        return self.alpha @ K - self.rho

    def score(self, y) -> float:
        return float(self.score_samples(np.atleast_2d(np.asarray(y, dtype=float)))[0])

    def to_dict(self) -> dict:
        return {"kind": "SVM", "params": dict(self.spec.params), "n_train": self.n_train,
                "c": self.c, "rho": self.rho, "support": self.support.tolist(),
                "dual_coef": self.alpha.tolist()}


_MODELS = {"NND": NNDModel, "LNND": LNNDModel, "LOF": LOFModel, "ALP": ALPModel, "SVM": SVMModel}


def fit(spec: DescriptorSpec, targets):
    return _MODELS[spec.kind](spec, targets)


def _check(model, kind):
    if model.kind != kind:
        raise TypeError(f"expected a fitted {kind} model, got {model.kind}")
    return model


def nnd_score(model, y) -> float:
    return _check(model, "NND").score(y)


def lnnd_score(model, y) -> float:
    return _check(model, "LNND").score(y)


def lof_score(model, y) -> float:
    return _check(model, "LOF").score(y)


def alp_score(model, y) -> float:
    return _check(model, "ALP").score(y)


def svm_fit(target, nu, c_prime, tol=1e-3) -> SVMModel:
    return SVMModel(DescriptorSpec("SVM", {"nu": nu, "c_prime": c_prime}), target, tol=tol)


def svm_score(model, y) -> float:
    return _check(model, "SVM").score(y)
