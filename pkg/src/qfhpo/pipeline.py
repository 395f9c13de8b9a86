"""End-to-end hyperparameter search driven by the quantum surrogate.

The flow: sample hyperparameter assignments, score each with k-fold CV,
encode and normalize the results into a :class:`SampleTable`, fit the
surrogate, search its inputs for the optimum, decode back to native
hyperparameters and retrain the model there. Classical grid/random search
baselines share the same scorer so their timings and scores are comparable.
"""
from __future__ import annotations

import csv
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import toy_models as tm
from .encoding import (
    Assignment,
    SearchSpace,
    counts_for_budget,
    encode,
    grid_assignments,
    normalize_score,
    sample_uniform,
)
from .errors import ConfigError, QfhpoError
from .report import RunReport, seconds
from .search import SearchConfig, SearchResult, decode_result, search
from .surrogate import SampleTable, SurrogateModel, TrainConfig, init_model, train

log = logging.getLogger(__name__)

DIRECTIONS = ("maximize", "minimize")
STRATEGIES = ("uniform-random", "lattice")


class PipelineError(QfhpoError):
    """A pipeline stage failed; ``report`` carries everything measured so far."""

    def __init__(self, message: str, report: RunReport):
        super().__init__(message)
        self.report = report


class Objective:
    """Hyperparameter scorer: k-fold CV of a toy model, or a plain function.

    With a toy model, the dataset from ``loader`` is split once into a
    development part (used for CV) and a held-out test part (used only when
    retraining at a chosen assignment).
    """

    def __init__(self, model_kind: Optional[str] = None,
                 loader: Optional[Callable[[], tm.Dataset]] = None,
                 metric: str = "r2", direction: Optional[str] = None, cv_folds: int = 3,
                 seed: int = 0, fixed: Optional[Mapping[str, Any]] = None,
                 test_fraction: float = 0.25,
                 function: Optional[Callable[[Assignment], float]] = None,
                 name: Optional[str] = None):
        if (model_kind is None) == (function is None):
            raise ValueError("give exactly one of model_kind or function")
        if model_kind is not None and loader is None:
            raise ValueError("a toy-model objective needs a dataset loader")
        if metric not in tm.METRICS:
            raise ValueError(f"unknown metric {metric!r}")
        if direction is None:
            direction = "minimize" if metric == "mse" else "maximize"
        if direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        self.model_kind = model_kind
        self.loader = loader
        self.metric = metric
        self.direction = direction
        self.cv_folds = cv_folds
        self.seed = seed
        self.fixed = dict(fixed or {})
        self.test_fraction = test_fraction
        self.function = function
        self.name = name or model_kind or getattr(function, "__name__", "function")
        self.calls = 0
        self._lock = threading.Lock()
        self._splits: Optional[Tuple[tm.Dataset, tm.Dataset]] = None

    @classmethod
    def from_function(cls, function: Callable[[Assignment], float],
                      direction: str = "maximize", name: Optional[str] = None) -> "Objective":
        return cls(function=function, direction=direction, name=name)

    def load(self, reload: bool = False) -> None:
        if self.function is not None or (self._splits is not None and not reload):
            return
        data = self.loader()
        if len(data) < 3 * self.cv_folds / (1 - self.test_fraction):
            raise ConfigError(f"dataset of {len(data)} rows is too small for "
                              f"{self.cv_folds}-fold CV plus a test split")
        self._splits = tm.train_test_split(data, self.test_fraction, self.seed)

    def spec(self, assignment: Assignment) -> tm.ToyModelSpec:
        return tm.ToyModelSpec(self.model_kind, {**self.fixed, **assignment})

    def cv_score(self, assignment: Assignment) -> float:
        """Mean k-fold validation score on the development split."""
        with self._lock:
            self.calls += 1
        if self.function is not None:
            return float(self.function(assignment))
        self.load()
        dev, _ = self._splits
        return tm.kfold_cv_score(self.spec(assignment), dev, self.cv_folds, self.metric,
                                 self.seed)

    def holdout_scores(self, assignment: Assignment) -> Tuple[float, float]:
        """(train, test) scores after fitting on the whole development split."""
        if self.function is not None:
            v = float(self.function(assignment))
            return v, v
        self.load()
        dev, test = self._splits
        model = tm.make_model(self.spec(assignment)).fit(dev.X, dev.y)
        return (tm.score(self.metric, dev.y, model.predict(dev.X)),
                tm.score(self.metric, test.y, model.predict(test.X)))

    def better(self, a: float, b: float) -> bool:
        return a > b if self.direction == "maximize" else a < b


@dataclass(frozen=True)
class SamplingPlan:
    n_samples: int
    strategy: str = "uniform-random"
    rng_seed: int = 0
    lattice_counts: Optional[Mapping[str, int]] = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")

    def assignments(self, space: SearchSpace) -> List[Assignment]:
        if self.strategy == "uniform-random":
            return sample_uniform(space, self.n_samples, np.random.default_rng(self.rng_seed))
        counts = dict(self.lattice_counts or counts_for_budget(space, self.n_samples))
        points = grid_assignments(space, counts)
        if len(points) != self.n_samples:
            raise ConfigError(f"lattice counts give {len(points)} points, "
                              f"plan asks for {self.n_samples}")
        return points


def default_n_samples(space: SearchSpace) -> int:
    return max(2, 10 * space.width)


def _evaluate(objective: Objective, assignments: Sequence[Assignment],
              threads: int = 1) -> Tuple[List[float], List[int]]:
    """Scores in input order; failed evaluations get the worst successful score."""
    def one(a):
        try:
            return objective.cv_score(a)
        except Exception as exc:  # a broken sample must not abort the table
            log.warning("objective failed on %s: %s", a, exc)
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(one, assignments))
    else:
        raw = [one(a) for a in assignments]
    failed = [i for i, v in enumerate(raw) if v is None or not np.isfinite(v)]
    ok = [v for i, v in enumerate(raw) if i not in failed]
    if not ok:
        raise RuntimeError("every objective evaluation failed")
    worst = min(ok) if objective.direction == "maximize" else max(ok)
    return [worst if i in failed else float(v) for i, v in enumerate(raw)], failed


def build_table(space: SearchSpace, assignments: Sequence[Assignment],
                raw: Sequence[float], metadata: Optional[Dict[str, Any]] = None
                ) -> SampleTable:
    raw = np.asarray(raw, dtype=float)
    X = np.array([encode(space, a) for a in assignments]).reshape(len(assignments), space.width)
    lo, hi = float(raw.min()), float(raw.max())
    meta = dict(metadata or {})
    if hi > lo:
        y = normalize_score(raw, lo, hi)
        meta["degenerate_scores"] = False
    else:
        y = np.zeros_like(raw)
        meta["degenerate_scores"] = True
    return SampleTable(X, raw, y, (lo, hi), [dict(a) for a in assignments], meta)


def generate_sample_table(objective: Objective, space: SearchSpace, plan: SamplingPlan,
                          threads: int = 1) -> SampleTable:
    t0 = time.perf_counter()
    assignments = plan.assignments(space)
    raw, failed = _evaluate(objective, assignments, threads)
    table = build_table(space, assignments, raw, {
        "model": objective.name,
        "metric": objective.metric,
        "direction": objective.direction,
        "cv_folds": objective.cv_folds,
        "failed_rows": failed,
        "space_hash": space.hash(),
    })
    table.metadata["generation_time_s"] = seconds(time.perf_counter() - t0)
    return table


def write_sample_table(table: SampleTable, space: SearchSpace, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(space.column_names() + ["raw_score", "norm_score"])
        for x, r, y in zip(table.X, table.raw, table.y):
            w.writerow([repr(float(v)) for v in x] + [repr(float(r)), repr(float(y))])


def read_sample_table(space: SearchSpace, path: Union[str, Path]) -> SampleTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, r)) for r in reader if r]
    expected = space.column_names() + ["raw_score", "norm_score"]
    if header != expected:
        raise ConfigError(f"{path}: header {header} does not match the search space")
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    raw = arr[:, -2]
    lo, hi = float(raw.min()), float(raw.max())
    return SampleTable(arr[:, :-2], raw, arr[:, -1], (lo, hi),
                       metadata={"degenerate_scores": not hi > lo})


@dataclass
class BaselineResult:
    method: str
    best_assignment: Assignment
    best_score: float
    n_evaluations: int
    elapsed_s: float
    assignments: List[Assignment] = field(default_factory=list)
    scores: List[float] = field(default_factory=list)
    failed: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "best_assignment": self.best_assignment,
            "best_score": self.best_score,
            "n_evaluations": self.n_evaluations,
            "elapsed_s": self.elapsed_s,
            "evaluations": [{"assignment": a, "score": s}
                            for a, s in zip(self.assignments, self.scores)],
            "failed": self.failed,
        }


def run_classical_baseline(objective: Objective, space: SearchSpace, method: str = "grid",
                           budget: int = 100, seed: int = 0,
                           resolution: Optional[Mapping[str, int]] = None,
                           threads: int = 1) -> BaselineResult:
    """Grid or random search with the objective's CV scorer.

    Grid resolution comes from ``resolution`` when given, otherwise from the
    largest uniform per-axis count that fits in ``budget``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    t0 = time.perf_counter()
    if method == "grid":
        points = grid_assignments(space, resolution or counts_for_budget(space, budget))
    elif method == "random":
        points = sample_uniform(space, budget, np.random.default_rng(seed))
    else:
        raise ValueError(f"unknown baseline method {method!r}")
    scores, failed = _evaluate(objective, points, threads)
    best = 0
    for i, s in enumerate(scores):
        if objective.better(s, scores[best]):
            best = i
    return BaselineResult(method, dict(points[best]), scores[best], len(points),
                          seconds(time.perf_counter() - t0), points, scores, failed)


@dataclass
class HPOResult:
    report: RunReport
    best_assignment: Assignment
    table: Optional[SampleTable] = None
    model: Optional[SurrogateModel] = None
    search_result: Optional[SearchResult] = None
    baseline: Optional[BaselineResult] = None


def run_quantum_hpo(objective: Objective, space: SearchSpace,
                    plan: Optional[SamplingPlan] = None,
                    train_cfg: TrainConfig = TrainConfig(),
                    search_cfg: Optional[SearchConfig] = None,
                    n_layers: int = 1,
                    baseline: Optional[BaselineResult] = None,
                    baseline_method: str = "grid",
                    baseline_budget: int = 100,
                    threads: int = 1,
                    warm_start: Optional[Sequence[float]] = None) -> HPOResult:
    """Run the whole surrogate-based search and return a timed report.

    ``search_cfg.mode`` is overridden by the objective's direction. When no
    ``baseline`` is passed, one is run first so the report can compare
    against it. ``warm_start`` is an encoded point handed to :func:`search`
    (used only when ``search_cfg.load_opt_bh`` is set). Raises :class:`PipelineError` (with the partial report) if a
    stage fails.
    """
    plan = plan or SamplingPlan(default_n_samples(space))
    search_cfg = search_cfg or SearchConfig()
    mode = "maximize" if objective.direction == "maximize" else "minimize"
    search_cfg = replace(search_cfg, mode=mode)
    report = RunReport(model=objective.name, metric=objective.metric,
                       direction=objective.direction, n_hps=len(space.dims),
                       n_qubits=space.width, n_layers=n_layers, n_samples=plan.n_samples,
                       parallelism=threads)
    result = HPOResult(report=report, best_assignment={})
    stage = "baseline"
    try:
        objective.load()
        if baseline is None:
            baseline = run_classical_baseline(objective, space, baseline_method,
                                              baseline_budget, plan.rng_seed, threads=threads)
        result.baseline = baseline
        report.classical_method = baseline.method
        report.classical_baseline_time_s = baseline.elapsed_s
        report.baseline_best_assignment = baseline.best_assignment

        stage = "sample generation"
        table = generate_sample_table(objective, space, plan, threads)
        result.table = table
        report.sample_generation_time_s = table.metadata["generation_time_s"]
        if table.metadata["degenerate_scores"]:
            report.flags.append("degenerate_scores")
        if table.metadata["failed_rows"]:
            report.flags.append(f"failed_rows:{len(table.metadata['failed_rows'])}")

        stage = "load data"
        t0 = time.perf_counter()
        X = np.ascontiguousarray(table.X, dtype=float)
        y = np.ascontiguousarray(table.y, dtype=float)
        report.load_data_time_s = seconds(time.perf_counter() - t0)

        stage = "surrogate training"
        t0 = time.perf_counter()
        model = init_model(space.width, n_layers, train_cfg.rng_seed)
        model, history = train(model, (X, y), train_cfg)
        model.score_bounds = table.score_bounds
        model.space_hash = space.hash()
        report.vqa_time_s = seconds(time.perf_counter() - t0)
        report.surrogate_loss = min(history)
        result.model = model

        stage = "surrogate search"
        t0 = time.perf_counter()
        found = search(model, None, search_cfg, warm_start=warm_start)
        report.finding_best_hps_time_s = seconds(time.perf_counter() - t0)
        result.search_result = found

        stage = "decoding"
        t0 = time.perf_counter()
        best, predicted = decode_result(found, space, model.score_bounds)
        report.quantum_to_classic_mapping_time_s = seconds(time.perf_counter() - t0)
        found.best_native, found.best_raw = best, predicted
        report.predicted_raw_score = predicted if predicted is not None else float(table.raw[0])
        report.best_assignment = best
        result.best_assignment = best

        stage = "dataset reload"
        t0 = time.perf_counter()
        objective.load(reload=True)
        report.original_dataset_load_time_s = seconds(time.perf_counter() - t0)

        stage = "retraining"
        t0 = time.perf_counter()
        report.proposed_train_score, report.proposed_test_score = \
            objective.holdout_scores(best)
        report.model_training_time_s = seconds(time.perf_counter() - t0)

        stage = "baseline retraining"
        report.original_train_score, report.original_test_score = \
            objective.holdout_scores(baseline.best_assignment)
    except Exception as exc:
        report.error = f"{stage}: {type(exc).__name__}: {exc}"
        report.finalize()
        raise PipelineError(report.error, report) from exc
    report.finalize()
    return result
