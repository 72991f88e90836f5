"""Experiment orchestration: run searches over a problem grid and analyse them.

Outputs live in one directory:

``records.jsonl``   one line per (problem, fold, descriptor, optimiser) unit
``timings.jsonl``   wall-clock per evaluation, kept apart so records stay reproducible
``failures.jsonl``  units that raised
``searches/``       optional per-unit search logs
"""
from __future__ import annotations

import json
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import descriptors as ds
from . import stats
from .dataset import derive_problems, fit_iqr_scaling, load_csv, stratified_kfold
from .optimizers import Budget, OPTIMISERS, run_search
from .validation import ObjectiveHandle, auroc

log = logging.getLogger(__name__)

KEY_FIELDS = ("problem", "fold", "descriptor", "optimiser")


@dataclass
class ExperimentConfig:
    data_dir: str = "data"
    descriptors: list = field(default_factory=lambda: list(ds.KINDS))
    optimisers: list = field(default_factory=lambda: ["malherbe_powell"])
    budget: int = 50
    proposal_cap: int = 100
    folds: int = 5
    seed: int = 0
    min_class_size: int = 10
    label_column: str = "class"
    missing: str = "reject"
    weighting: bool = True
    out: str = "results"
    jobs: int = 1
    search_logs: bool = False

    def __post_init__(self):
        unknown = set(self.descriptors) - set(ds.KINDS)
        if unknown:
            raise ValueError(f"unknown descriptors {sorted(unknown)}")
        unknown = set(self.optimisers) - set(OPTIMISERS) - {"default"}
        if unknown:
            raise ValueError(f"unknown optimisers {sorted(unknown)}")

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python 3.10
                import tomli as tomllib
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
        known = {f.name for f in fields(cls)}
        bad = set(data) - known
        if bad:
            raise ValueError(f"unknown config keys {sorted(bad)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from ints and strings (independent of PYTHONHASHSEED)."""
    words = [p if isinstance(p, int) else zlib.crc32(str(p).encode()) for p in parts]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


@lru_cache(maxsize=None)
def _load(path: str, label_column: str, missing: str):
    return load_csv(path, label_column, missing)


def dataset_paths(config: ExperimentConfig) -> list[Path]:
    paths = sorted(Path(config.data_dir).glob("*.csv"))
    if not paths:
        raise FileNotFoundError(f"no CSV files in {config.data_dir}")
    return paths


def problem_grid(config: ExperimentConfig):
    """Valid problems as ``(csv path, problem)`` pairs in a fixed order."""
    out = []
    for path in dataset_paths(config):
        data = _load(str(path), config.label_column, config.missing)
        for problem in derive_problems(data, config.min_class_size):
            if problem.valid and problem.n_target >= config.folds:
                out.append((str(path), problem))
    return out


def unit_key(rec) -> tuple:
    return tuple(rec[f] for f in KEY_FIELDS)


def _split(problem, config, fold):
    folds = stratified_kfold(problem.is_target, config.folds,
                             derive_seed(config.seed, problem.problem_id), problem.problem_id)
    train, test = folds[fold]
    y_train, y_test = problem.is_target[train], problem.is_target[test]
    if not y_test.any() or y_test.all():
        raise ValueError(f"{problem.problem_id} fold {fold}: test set lacks one of the classes")
    scaling = fit_iqr_scaling(problem.features[train][y_train])
    x_train = scaling.apply(problem.features[train])
    x_test = scaling.apply(problem.features[test])
    return x_train[y_train], x_train[~y_train], x_test, y_test


def _test_auroc(spec, targets, x_test, y_test):
    scores = ds.fit(spec, targets).score_samples(x_test)
    return auroc(scores[y_test], scores[~y_test])


class _TimedHandle(ObjectiveHandle):
    """Records seconds since ``t0`` after every fresh evaluation."""

    def __init__(self, *args, t0, **kwargs):
        self.t0 = t0
        self.stamps = []
        super().__init__(*args, **kwargs)

    def compute(self, key):
        value = super().compute(key)
        self.stamps.append(time.perf_counter() - self.t0)
        return value


def run_unit(config: ExperimentConfig, path: str, target: str, fold: int,
             descriptor: str, optimiser: str):
    """Run one search and score its incumbents on the test split.

    Returns ``(record, timing, search_log)``.
    """
    data = _load(path, config.label_column, config.missing)
    problem = next(p for p in derive_problems(data, config.min_class_size) if p.target == target)
    t0 = time.perf_counter()
    targets, others, x_test, y_test = _split(problem, config, fold)
    n, d = targets.shape
    key = {"problem": problem.problem_id, "fold": fold, "descriptor": descriptor,
           "optimiser": optimiser}
    default = ds.default_spec(descriptor, n, d)
    record = dict(key, dataset=problem.dataset, n_target_train=n,
                  default_params=default.params,
                  default_test_auroc=_test_auroc(default, targets, x_test, y_test))
    if optimiser == "default":
        handle = ObjectiveHandle(descriptor, targets, others,
                                 seed=derive_seed(config.seed, problem.problem_id, fold, "inner"))
        record["default_validation_auroc"] = handle.validate(default)
        return record, None, None
    handle = _TimedHandle(descriptor, targets, others, t0=t0,
                          seed=derive_seed(config.seed, problem.problem_id, fold, "inner"))
    budget = Budget(config.budget, config.proposal_cap,
                    derive_seed(config.seed, problem.problem_id, fold, optimiser))
    result = run_search(optimiser, handle, budget)
    incumbents = result.incumbents(config.budget)
    test_cache = {}
    tests = []
    for trial in incumbents:
        spec = ds.DescriptorSpec(descriptor, trial.params)
        # refit only when the incumbent changes
        if spec.key() not in test_cache:
            test_cache[spec.key()] = _test_auroc(spec, targets, x_test, y_test)
        tests.append(test_cache[spec.key()])
    record.update(
        n_evals=result.n_evals,
        n_proposals=len(result.trials),
        incumbent_params=[t.params for t in incumbents],
        validation_auroc=[t.value for t in incumbents],
        test_auroc=tests,
    )
    timing = dict(key, seconds=handle.stamps)
    return record, timing, result.to_jsonl()


def _run_unit_safe(args):
    config, path, target, fold, descriptor, optimiser = args
    try:
        return ("ok",) + run_unit(config, path, target, fold, descriptor, optimiser)
    except Exception as exc:  # a failed unit must not abort the batch
        key = {"problem": f"{Path(path).stem}:{target}", "fold": fold,
               "descriptor": descriptor, "optimiser": optimiser}
        return ("failed", dict(key, error=f"{type(exc).__name__}: {exc}"), None, None)


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    out = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if line:
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError:
                log.warning("ignoring truncated line in %s", path)
    return out


def _rewrite_sorted(path: Path, rows: list[dict]):
    rows = sorted(rows, key=lambda r: (r["problem"], r["fold"], r["descriptor"], r["optimiser"]))
    with path.open("w") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def run_experiment(config: ExperimentConfig) -> dict:
    """Run every missing unit of the grid; returns a summary with failure count.

    Completed units found in ``records.jsonl`` are skipped, so an interrupted
    or partially deleted run is finished by running it again.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rec_path, time_path, fail_path = out / "records.jsonl", out / "timings.jsonl", out / "failures.jsonl"
    records = {unit_key(r): r for r in _read_jsonl(rec_path)}
    timings = {unit_key(t): t for t in _read_jsonl(time_path)}
    (out / "config.json").write_text(json.dumps(asdict(config), indent=2, sort_keys=True) + "\n")
    units = []
    for path, problem in problem_grid(config):
        for fold in range(config.folds):
            for descriptor in config.descriptors:
                for optimiser in config.optimisers:
                    key = (problem.problem_id, fold, descriptor, optimiser)
                    if key not in records:
                        units.append((config, path, problem.target, fold, descriptor, optimiser))
    log.info("%d units to run, %d already complete", len(units), len(records))
    if config.search_logs:
        (out / "searches").mkdir(exist_ok=True)
    failures = []
    if config.jobs > 1 and len(units) > 1:
        pool = ProcessPoolExecutor(config.jobs)
        results = pool.map(_run_unit_safe, units, chunksize=1)
    else:
        pool = None
        results = map(_run_unit_safe, units)
    with rec_path.open("a") as rec_fh, time_path.open("a") as time_fh:
        for status, record, timing, search_log in results:
            if status == "failed":
                failures.append(record)
                log.error("unit %s failed: %s", unit_key(record), record["error"])
                continue
            rec_fh.write(json.dumps(record, sort_keys=True) + "\n")
            rec_fh.flush()
            records[unit_key(record)] = record
            if timing is not None:
                time_fh.write(json.dumps(timing, sort_keys=True) + "\n")
                time_fh.flush()
                timings[unit_key(timing)] = timing
            if search_log is not None and config.search_logs:
                name = "__".join(str(p) for p in unit_key(record)).replace(":", "-").replace("/", "_")
                (out / "searches" / f"{name}.jsonl").write_text(search_log)
    if pool is not None:
        pool.shutdown()
    _rewrite_sorted(rec_path, list(records.values()))
    _rewrite_sorted(time_path, list(timings.values()))
    if failures:
        _rewrite_sorted(fail_path, failures)
    elif fail_path.exists():
        fail_path.unlink()
    return {"units": len(records), "ran": len(units), "failed": len(failures)}


def load_records(path) -> list[dict]:
    return _read_jsonl(Path(path))


# --- analysis -------------------------------------------------------------------

class GridMismatch(ValueError):
    pass


def _grid(records, optimiser, descriptors):
    """problem -> dataset, and (descriptor, problem) -> {fold: record}."""
    cells = {}
    datasets = {}
    for r in records:
        if r["optimiser"] != optimiser or r["descriptor"] not in descriptors:
            continue
        cells.setdefault((r["descriptor"], r["problem"]), {})[r["fold"]] = r
        datasets[r["problem"]] = r["dataset"]
    problems = sorted(datasets)
    folds = sorted({f for c in cells.values() for f in c})
    missing = [(p, f, d, optimiser) for d in descriptors for p in problems for f in folds
               if f not in cells.get((d, p), {})]
    if missing:
        shown = ", ".join(map(str, missing[:20]))
        raise GridMismatch(f"{len(missing)} missing units: {shown}")
    return problems, datasets, folds, cells


def _per_problem(cells, descriptor, problems, folds, field_name, e=None):
    """Mean over folds per problem of a record field (at evaluation count ``e``)."""
    out = []
    for p in problems:
        vals = []
        for f in folds:
            v = cells[(descriptor, p)][f][field_name]
            if e is not None:
                v = v[min(e, len(v)) - 1]
            vals.append(v)
        out.append(float(np.mean(vals)))
    return np.array(out)


def _pair_p(a, b, problems, datasets):
    sample = [stats.PairedSample(float(x - y), datasets[p]) for x, y, p in zip(a, b, problems)]
    return stats.clustered_wilcoxon(sample, "greater")


def analyze(records, baseline=None, optimiser: str = "malherbe_powell", weighting: bool = True) -> dict:
    """Summaries over a complete (problem, fold, descriptor) grid for ``optimiser``.

    ``baseline`` holds records made with optimiser ``"default"``; without it
    the default-value test AUROC stored in each search record is used.
    """
    present = sorted({r["descriptor"] for r in records if r["optimiser"] == optimiser},
                     key=ds.KINDS.index)
    if not present:
        raise GridMismatch(f"no records for optimiser {optimiser!r}")
    problems, datasets, folds, cells = _grid(records, optimiser, present)
    E = max(len(c[f]["test_auroc"]) for c in cells.values() for f in c)
    if weighting:
        weights = stats.problem_weights(problems, [datasets[p] for p in problems])
    else:
        weights = [stats.ProblemWeight(p, datasets[p], 1.0 / len(problems)) for p in problems]
    wm = lambda v: stats.weighted_mean(v, weights)

    report = {"optimiser": optimiser, "descriptors": present, "n_problems": len(problems),
              "n_datasets": len(set(datasets.values())), "folds": folds, "evaluations": E}

    # (a, b) curves for every optimiser with a complete grid
    curves = []
    for opt in sorted({r["optimiser"] for r in records} - {"default"}):
        try:
            probs_o, ds_o, folds_o, cells_o = _grid(records, opt, present)
        except GridMismatch:
            continue
        w_o = stats.problem_weights(probs_o, [ds_o[p] for p in probs_o])
        for d in present:
            for e in range(1, E + 1):
                val = _per_problem(cells_o, d, probs_o, folds_o, "validation_auroc", e)
                test = _per_problem(cells_o, d, probs_o, folds_o, "test_auroc", e)
                curves.append({"optimiser": opt, "descriptor": d, "evaluations": e,
                               "validation_auroc": stats.weighted_mean(val, w_o),
                               "test_auroc": stats.weighted_mean(test, w_o),
                               "overfitting": stats.weighted_mean(val - test, w_o)})
    report["curves"] = curves

    # (c) pairwise one-sided tests per evaluation count, Holm per row at the end
    tests = {d: [_per_problem(cells, d, problems, folds, "test_auroc", e) for e in range(1, E + 1)]
             for d in present}
    pairwise = []
    for e in range(1, E + 1):
        for a in present:
            for b in present:
                if a != b:
                    pairwise.append({"evaluations": e, "row": a, "column": b,
                                     "p": _pair_p(tests[a][e - 1], tests[b][e - 1], problems, datasets)})
    report["pairwise"] = pairwise
    final = {(r["row"], r["column"]): r["p"] for r in pairwise if r["evaluations"] == E}
    table = {}
    for a in present:
        cols = [b for b in present if b != a]
        adjusted = stats.holm_bonferroni([final[(a, b)] for b in cols])
        table[a] = dict(zip(cols, adjusted))
    report["final_pvalues_holm"] = table

    # (d) optimised against default values
    if baseline:
        base_cells = {}
        for r in baseline:
            base_cells[(r["descriptor"], r["problem"], r["fold"])] = r["default_test_auroc"]
        missing = [(p, f, d) for d in present for p in problems for f in folds
                   if (d, p, f) not in base_cells]
        if missing:
            raise GridMismatch(f"baseline lacks {len(missing)} units: {missing[:20]}")
        default = {d: np.array([np.mean([base_cells[(d, p, f)] for f in folds]) for p in problems])
                   for d in present}
    else:
        default = {d: _per_problem(cells, d, problems, folds, "default_test_auroc") for d in present}
    versus = []
    for d in present:
        for e in range(1, E + 1):
            opt = tests[d][e - 1]
            versus.append({"descriptor": d, "evaluations": e, "optimised": wm(opt),
                           "default": wm(default[d]), "difference": wm(opt - default[d]),
                           "p_optimised_better": _pair_p(opt, default[d], problems, datasets)})
    report["optimised_vs_default"] = versus

    # (e) weighted rank correlations after the last evaluation
    overfit = {d: _per_problem(cells, d, problems, folds, "validation_auroc", E) - tests[d][-1]
               for d in present}
    report["kendall_tau_test"] = {a: {b: stats.weighted_kendall_tau(tests[a][-1], tests[b][-1], weights)
                                      for b in present} for a in present}
    report["kendall_tau_overfitting"] = {a: {b: stats.weighted_kendall_tau(overfit[a], overfit[b], weights)
                                             for b in present} for a in present}

    # (f) pick ALP or SVM by validation AUROC
    if "ALP" in present and "SVM" in present:
        report["alp_svm"] = _alp_svm(cells, problems, datasets, folds, weights, E)
    return report


def _alp_svm(cells, problems, datasets, folds, weights, E):
    def at(d, p, f, name):
        return cells[(d, p)][f][name][E - 1]

    per_fold, per_mean = [], []
    for p in problems:
        chosen = []
        for f in folds:
            pick = "SVM" if at("SVM", p, f, "validation_auroc") > at("ALP", p, f, "validation_auroc") else "ALP"
            chosen.append(at(pick, p, f, "test_auroc"))
        per_fold.append(np.mean(chosen))
        mv = {d: np.mean([at(d, p, f, "validation_auroc") for f in folds]) for d in ("ALP", "SVM")}
        pick = "SVM" if mv["SVM"] > mv["ALP"] else "ALP"
        per_mean.append(np.mean([at(pick, p, f, "test_auroc") for f in folds]))
    per_fold, per_mean = np.array(per_fold), np.array(per_mean)
    alp = _per_problem(cells, "ALP", problems, folds, "test_auroc", E)
    svm = _per_problem(cells, "SVM", problems, folds, "test_auroc", E)
    alp_v = _per_problem(cells, "ALP", problems, folds, "validation_auroc", E)
    svm_v = _per_problem(cells, "SVM", problems, folds, "validation_auroc", E)
    w = np.array([x.weight for x in weights])
    w = w / w.sum()
    labels = ("ALP < SVM", "ALP = SVM", "ALP > SVM")
    cmp = lambda a, b: np.sign(a - b).astype(int) + 1
    table = np.zeros((3, 3))
    for vi, ti, wi in zip(cmp(alp_v, svm_v), cmp(alp, svm), w):
        table[vi, ti] += wi
    return {
        "per_fold_selection": stats.weighted_mean(per_fold, weights),
        "mean_selection": stats.weighted_mean(per_mean, weights),
        "alp": stats.weighted_mean(alp, weights),
        "svm": stats.weighted_mean(svm, weights),
        "p_per_fold_over_alp": _pair_p(per_fold, alp, problems, datasets),
        "p_per_fold_over_svm": _pair_p(per_fold, svm, problems, datasets),
        "p_mean_over_alp": _pair_p(per_mean, alp, problems, datasets),
        "p_mean_over_svm": _pair_p(per_mean, svm, problems, datasets),
        "win_loss": {"rows_validation": list(labels), "columns_test": list(labels),
                     "fractions": table.tolist()},
    }


def write_report(report: dict, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_csv(out / "curves.csv", report["curves"])
    _write_csv(out / "pairwise_pvalues.csv", report["pairwise"])
    _write_csv(out / "optimised_vs_default.csv", report["optimised_vs_default"])
    (out / "report.md").write_text(render_markdown(report))


def _write_csv(path, rows):
    import csv
    if not rows:
        path.write_text("")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def _fmt(p):
    if p != p:
        return "nan"
    if p < 1e-4:
        return "< 0.0001"
    if p >= 1:
        return ">= 1"
    return f"{p:.2g}"


def render_markdown(report: dict) -> str:
    present = report["descriptors"]
    lines = [f"# Analysis ({report['optimiser']}, {report['n_problems']} problems, "
             f"{report['n_datasets']} datasets, {report['evaluations']} evaluations)", "",
             "One-sided clustered Wilcoxon p-values, row > column, Holm-corrected per row.", "",
             "| | " + " | ".join(present) + " |",
             "|---" * (len(present) + 1) + "|"]
    for a in present:
        cells = ["" if a == b else _fmt(report["final_pvalues_holm"][a][b]) for b in present]
        lines.append(f"| {a} | " + " | ".join(cells) + " |")
    E = report["evaluations"]
    lines += ["", "| descriptor | default | optimised | p |", "|---|---|---|---|"]
    for row in report["optimised_vs_default"]:
        if row["evaluations"] == E:
            lines.append(f"| {row['descriptor']} | {row['default']:.4f} | {row['optimised']:.4f} "
                         f"| {_fmt(row['p_optimised_better'])} |")
    if "alp_svm" in report:
        c = report["alp_svm"]
        lines += ["", "ALP/SVM chosen by validation AUROC: "
                  f"per fold {c['per_fold_selection']:.4f}, by mean {c['mean_selection']:.4f} "
                  f"(ALP {c['alp']:.4f}, SVM {c['svm']:.4f})"]
    return "\n".join(lines) + "\n"


def report_runtime(timings) -> list[dict]:
    """Mean cumulative seconds per descriptor and evaluation count.

    Only searches that reached ``e`` evaluations contribute to row ``e``.
    """
    by_desc = {}
    for t in timings:
        by_desc.setdefault(t["descriptor"], []).append(t["seconds"])
    rows = []
    for d in sorted(by_desc, key=lambda k: ds.KINDS.index(k) if k in ds.KINDS else 99):
        runs = by_desc[d]
        for e in range(1, max(len(r) for r in runs) + 1):
            vals = [r[e - 1] for r in runs if len(r) >= e]
            rows.append({"descriptor": d, "evaluations": e, "mean_seconds": float(np.mean(vals)),
                         "runs": len(vals)})
    return rows


def write_runtime_csv(rows, path):
    _write_csv(Path(path), rows)
