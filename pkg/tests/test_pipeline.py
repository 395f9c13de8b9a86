import numpy as np
import pytest

from qfhpo import toy_models as tm
from qfhpo.encoding import DimensionSpec, SearchSpace
from qfhpo.errors import ConfigError
from qfhpo.pipeline import (
    Objective,
    PipelineError,
    SamplingPlan,
    build_table,
    default_n_samples,
    generate_sample_table,
    read_sample_table,
    run_classical_baseline,
    run_quantum_hpo,
    write_sample_table,
)
from qfhpo.report import content_view, validate_report
from qfhpo.search import SearchConfig

V_SPACE = SearchSpace((DimensionSpec("v", "continuous", 0.0, 1.0),))


def quadratic(a):
    return -(a["v"] - 0.3) ** 2


class TestSampleTable:
    def test_single_sample_is_degenerate(self):
        t = generate_sample_table(Objective.from_function(quadratic), V_SPACE, SamplingPlan(1))
        assert t.y.tolist() == [0.0]
        assert t.metadata["degenerate_scores"]

    def test_normalized_range(self):
        t = generate_sample_table(Objective.from_function(quadratic), V_SPACE, SamplingPlan(20))
        assert t.y.min() == -1.0 and t.y.max() == 1.0
        assert t.score_bounds == (t.raw.min(), t.raw.max())
        assert np.all((t.X >= 0) & (t.X <= np.pi))

    def test_deterministic(self, stumps_space, stumps_objective):
        plan = SamplingPlan(12, rng_seed=4)
        a = generate_sample_table(stumps_objective, stumps_space, plan)
        b = generate_sample_table(stumps_objective, stumps_space, plan)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.raw, b.raw)

    def test_threads_do_not_change_scores(self, stumps_space, stumps_objective):
        plan = SamplingPlan(8, rng_seed=1)
        a = generate_sample_table(stumps_objective, stumps_space, plan, threads=1)
        b = generate_sample_table(stumps_objective, stumps_space, plan, threads=4)
        np.testing.assert_array_equal(a.raw, b.raw)

    def test_raw_is_mean_cv_score(self, stumps_space, stumps_objective):
        t = generate_sample_table(stumps_objective, stumps_space, SamplingPlan(3))
        stumps_objective.load()
        dev, _ = stumps_objective._splits
        for a, r in zip(t.assignments, t.raw):
            folds = tm.kfold_cv_scores(tm.ToyModelSpec("boosted_stumps", a), dev, 3, "r2", 0)
            assert r == pytest.approx(sum(folds) / 3, abs=1e-12)

    def test_failed_rows_get_worst_score(self):
        def flaky(a):
            if a["v"] > 0.8:
                raise RuntimeError("boom")
            return a["v"]
        t = generate_sample_table(Objective.from_function(flaky), V_SPACE, SamplingPlan(30))
        failed = t.metadata["failed_rows"]
        assert failed
        ok = [r for i, r in enumerate(t.raw) if i not in failed]
        assert all(t.raw[i] == min(ok) for i in failed)

    def test_csv_round_trip(self, tmp_path, stumps_space):
        t = generate_sample_table(Objective.from_function(lambda a: a["learning_rate"]),
                                  stumps_space, SamplingPlan(6))
        write_sample_table(t, stumps_space, tmp_path / "s.csv")
        back = read_sample_table(stumps_space, tmp_path / "s.csv")
        np.testing.assert_array_equal(back.X, t.X)
        np.testing.assert_array_equal(back.y, t.y)

    def test_csv_header_mismatch(self, tmp_path, stumps_space):
        t = build_table(V_SPACE, [{"v": 0.1}, {"v": 0.2}], [1.0, 2.0])
        write_sample_table(t, V_SPACE, tmp_path / "s.csv")
        with pytest.raises(ConfigError):
            read_sample_table(stumps_space, tmp_path / "s.csv")

    def test_lattice_plan_size(self, stumps_space):
        with pytest.raises(ConfigError):
            SamplingPlan(7, "lattice").assignments(stumps_space)
        pts = SamplingPlan(8, "lattice", lattice_counts={"learning_rate": 2, "max_iter": 2, "loss": 2}
                           ).assignments(stumps_space)
        assert len({tuple(sorted(p.items())) for p in pts}) == 8

    def test_default_size(self, stumps_space):
        assert default_n_samples(stumps_space) == 30
        with pytest.raises(ValueError):
            SamplingPlan(0)


class TestBaseline:
    def test_grid_evaluation_count(self):
        space = SearchSpace((DimensionSpec("a", "continuous", 0, 1), DimensionSpec("b", "continuous", 0, 1)))
        obj = Objective.from_function(lambda a: a["a"] + a["b"])
        r = run_classical_baseline(obj, space, "grid", resolution={"a": 5, "b": 5})
        assert r.n_evaluations == 25 and obj.calls == 25
        assert r.best_assignment == {"a": 1.0, "b": 1.0}

    def test_random_reproducible(self):
        obj = Objective.from_function(quadratic)
        a = run_classical_baseline(obj, V_SPACE, "random", 10, seed=3)
        b = run_classical_baseline(obj, V_SPACE, "random", 10, seed=3)
        assert a.assignments == b.assignments and a.best_score == b.best_score

    def test_grid_covers_lattice(self, stumps_space):
        obj = Objective.from_function(lambda a: -abs(a["learning_rate"] - 0.35) - abs(a["max_iter"] - 30))
        grid = run_classical_baseline(obj, stumps_space, "grid", 100)
        rand = run_classical_baseline(obj, stumps_space, "random", 100, seed=0)
        assert grid.best_score >= rand.best_score
        assert grid.best_score == pytest.approx(0.0)

    def test_minimize_direction(self):
        obj = Objective.from_function(lambda a: (a["v"] - 0.5) ** 2, direction="minimize")
        r = run_classical_baseline(obj, V_SPACE, "grid", 11)
        assert r.best_assignment["v"] == pytest.approx(0.5)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            run_classical_baseline(Objective.from_function(quadratic), V_SPACE, "bayes")


class TestQuantumHPO:
    def test_quadratic_objective(self):
        obj = Objective.from_function(quadratic)
        res = run_quantum_hpo(obj, V_SPACE, SamplingPlan(15), n_layers=2,
                              search_cfg=SearchConfig(learning_rate=0.05, max_epochs=300),
                              baseline_budget=11)
        assert abs(res.best_assignment["v"] - 0.3) < 0.05

    def test_calls_are_fair(self):
        obj = Objective.from_function(quadratic)
        res = run_quantum_hpo(obj, V_SPACE, SamplingPlan(15), baseline_budget=11)
        # baseline budget plus sample table; holdout scoring does not call the CV scorer
        assert obj.calls == 11 + 15
        assert res.baseline.n_evaluations == 11

    def test_report_complete_and_valid(self, stumps_space, stumps_objective):
        res = run_quantum_hpo(stumps_objective, stumps_space, SamplingPlan(10), baseline_budget=8)
        d = res.report.to_dict()
        assert res.report.missing_fields() == []
        validate_report(d)
        assert res.report.dev_score == pytest.approx(
            res.report.proposed_test_score - res.report.original_test_score)
        assert set(res.best_assignment) == set(stumps_space.names)

    def test_deterministic(self, stumps_space):
        def run():
            obj = Objective("boosted_stumps", lambda: tm.friedman_dataset(150, seed=0), seed=0)
            return content_view(run_quantum_hpo(obj, stumps_space, SamplingPlan(8),
                                                baseline_budget=8).report.to_dict())
        assert run() == run()

    def test_minimize_metric(self, stumps_space):
        obj = Objective("boosted_stumps", lambda: tm.friedman_dataset(150, seed=0), metric="mse")
        res = run_quantum_hpo(obj, stumps_space, SamplingPlan(8), baseline_budget=8)
        assert res.search_result.mode == "minimize"
        assert res.report.direction == "minimize"

    def test_failure_carries_partial_report(self, stumps_space):
        def missing():
            raise FileNotFoundError("no such dataset")
        obj = Objective("boosted_stumps", missing)
        with pytest.raises(PipelineError) as info:
            run_quantum_hpo(obj, stumps_space, SamplingPlan(4), baseline_budget=4)
        assert "no such dataset" in info.value.report.error

    def test_too_small_dataset(self, stumps_space):
        obj = Objective("boosted_stumps", lambda: tm.friedman_dataset(8, seed=0))
        with pytest.raises(PipelineError):
            run_quantum_hpo(obj, stumps_space, SamplingPlan(4), baseline_budget=4)


class TestObjective:
    def test_requires_one_source(self):
        with pytest.raises(ValueError):
            Objective()
        with pytest.raises(ValueError):
            Objective("ridge")

    def test_default_direction(self):
        assert Objective("ridge", lambda: None, metric="mse").direction == "minimize"
        assert Objective("ridge", lambda: None).direction == "maximize"
