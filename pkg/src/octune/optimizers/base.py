"""Budget bookkeeping shared by all optimisers."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class Budget:
    max_evals: int = 50
    max_proposals: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.max_evals < 1 or self.max_proposals < 1:
            raise ValueError("budget caps must be positive")


@dataclass
class Trial:
    coords: list
    value: float
    proposal: int
    evaluation: int | None  # None marks a cache hit
    params: object = None

    @property
    def hit(self) -> bool:
        return self.evaluation is None


class BudgetExhausted(Exception):
    pass


class Search:
    """Wraps a cached objective, enforcing the evaluation and proposal caps.

    ``evaluate`` raises :class:`BudgetExhausted` once either cap is reached,
    which the optimiser lets propagate to :func:`run`.
    """

    def __init__(self, objective, budget: Budget):
        self.objective = objective
        self.budget = budget
        self.m = objective.space.m
        self.trials: list[Trial] = []
        self.n_evals = 0
        self.best: Trial | None = None

    @property
    def exhausted(self) -> bool:
        return (self.n_evals >= self.budget.max_evals
                or len(self.trials) >= self.budget.max_proposals)

    def evaluate(self, u) -> float:
        if self.exhausted:
            raise BudgetExhausted
        u = np.clip(np.asarray(u, dtype=float).reshape(self.m), 0.0, 1.0)
        value, hit = self.objective(u)
        if not hit:
            self.n_evals += 1
        params = self.objective.log[-1]["params"] if getattr(self.objective, "log", None) else None
        trial = Trial(u.tolist(), value, len(self.trials) + 1, None if hit else self.n_evals, params)
        self.trials.append(trial)
        if self.best is None or value > self.best.value:
            self.best = trial
        return value


@dataclass
class SearchResult:
    optimiser: str
    trials: list
    constants: dict = field(default_factory=dict)
    max_evals: int = 50

    @property
    def best(self) -> Trial:
        return max(self.trials, key=lambda t: t.value)  # first maximum wins

    @property
    def n_evals(self) -> int:
        return sum(1 for t in self.trials if not t.hit)

    def incumbents(self, max_evals: int | None = None) -> list[Trial]:
        """Best trial after each evaluation count 1..max_evals, forward-filled.

        Cache hits never change the incumbent: they repeat an evaluated value.
        """
        max_evals = self.max_evals if max_evals is None else max_evals
        out, best = [], None
        for t in self.trials:
            if t.hit:
                continue
            if best is None or t.value > best.value:
                best = t
            out.append(best)
            if len(out) == max_evals:
                break
        if out:
            out += [out[-1]] * (max_evals - len(out))
        return out

    def to_jsonl(self) -> str:
        lines = [json.dumps({"summary": {"optimiser": self.optimiser, "constants": self.constants,
                                         "max_evals": self.max_evals,
                                         "n_trials": len(self.trials), "n_evals": self.n_evals}})]
        lines += [json.dumps(asdict(t)) for t in self.trials]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SearchResult":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        summary = rows[0]["summary"]
        trials = [Trial(**r) for r in rows[1:]]
        return cls(summary["optimiser"], trials, summary["constants"], summary["max_evals"])


def run(name: str, fn, objective, budget: Budget, constants: dict, **kwargs) -> SearchResult:
    search = Search(objective, budget)
    try:
        fn(search, np.random.default_rng(budget.seed), **kwargs)
    except BudgetExhausted:
        pass
    return SearchResult(name, search.trials, constants, budget.max_evals)
