"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected in ``RESULTS`` and echoed in the pytest terminal
summary (see ``conftest.py``), so they show up without ``-s``.
"""
import json
import time
from pathlib import Path

import numpy as np
import yaml

from qfhpo import simulator as sim
from qfhpo import surrogate as sg
from qfhpo import toy_models as tm
from qfhpo.cli import main
from qfhpo.encoding import DimensionSpec, SearchSpace, decode, encode
from qfhpo.pipeline import Objective, SamplingPlan, run_classical_baseline, run_quantum_hpo
from qfhpo.report import TIMING_FIELDS, check_arithmetic, validate_report
from qfhpo.search import SearchConfig, grid_best, search
from qfhpo.surrogate import TrainConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
RESULTS = []


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_circuit(rng, n, n_gates):
    gates = []
    for _ in range(n_gates):
        kind = rng.choice(["RX", "RY", "RZ", "CNOT"]) if n > 1 else rng.choice(["RX", "RY", "RZ"])
        if kind == "CNOT":
            c, t = rng.choice(n, 2, replace=False)
            gates.append(sim.CNOT(int(c), int(t)))
        else:
            gates.append(sim.GateOp(str(kind), int(rng.integers(n)), None, float(rng.uniform(-np.pi, np.pi))))
    return gates


def random_model(rng, n, L):
    return sg.SurrogateModel(n, L, rng.uniform(0.2, 2.0, (L, n)), rng.uniform(-np.pi, np.pi, (L, n, 3)))


def test_criterion_1_simulator():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_norm = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 7))
        state = sim.init_zero(n)
        for g in random_circuit(rng, n, int(rng.integers(1, 201))):
            state = sim.apply_gate(state, g)
        worst_norm = max(worst_norm, abs(state.norm - 1.0))
    worst_cos = 0.0
    for x in np.linspace(-2 * np.pi, 2 * np.pi, 101):
        worst_cos = max(worst_cos, abs(sim.run_circuit([sim.RX(0, x)], 1) - np.cos(x)))
    elapsed = time.perf_counter() - t0
    record(1, worst_norm <= 1e-8 and worst_cos <= 1e-10 and elapsed < 5,
           f"norm err {worst_norm:.1e}, cos err {worst_cos:.1e}, {elapsed:.2f}s")


def test_criterion_2_gradients():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    h = 1e-5
    worst = 0.0
    for _ in range(60):
        n, L = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        m = random_model(rng, n, L)
        x = rng.uniform(0, np.pi, n)
        _, jac = sg.param_gradients(m, x[None])
        p = m.params()
        for i in range(p.size):
            e = np.zeros_like(p)
            e[i] = h
            fd = (sg.evaluate(m.with_params(p + e), x) - sg.evaluate(m.with_params(p - e), x)) / (2 * h)
            worst = max(worst, abs(jac[0, i] - fd))
        _, gx = sg.input_gradient(m, x[None])
        for q in range(n):
            e = np.zeros(n)
            e[q] = h
            fd = (sg.evaluate(m, x + e) - sg.evaluate(m, x - e)) / (2 * h)
            worst = max(worst, abs(gx[0, q] - fd))
    elapsed = time.perf_counter() - t0
    record(2, worst <= 1e-6 and elapsed < 30, f"60 instances, max abs err {worst:.1e}, {elapsed:.2f}s")


def test_criterion_3_fourier_fit():
    t0 = time.perf_counter()
    x = np.linspace(0, np.pi, 30)[:, None]
    y = 0.5 * np.cos(x[:, 0]) + 0.3 * np.cos(2 * x[:, 0])
    cfg = TrainConfig(learning_rate=0.15, max_epochs=70)
    losses = []
    for seed in range(5):
        model, _ = sg.train(sg.init_model(1, 3, seed), (x, y), cfg)
        losses.append(sg.loss(model, (x, y)))
    hits = sum(v <= 1e-2 for v in losses)
    elapsed = time.perf_counter() - t0
    record(3, hits >= 4 and elapsed < 60,
           f"{hits}/5 seeds with MSE <= 1e-2, max MSE {max(losses):.1e}, {elapsed:.2f}s")


def test_criterion_4_encoder():
    spaces = [
        SearchSpace.load(CONFIGS / "space_boosted_stumps.yaml"),
        SearchSpace((DimensionSpec("depth", "discrete", 1, 9, 2),
                     DimensionSpec("act", "categorical", categories=("relu", "tanh", "gelu", "elu", "selu")),
                     DimensionSpec("lr", "discrete", 0.001, 0.01, 0.001))),
        SearchSpace((DimensionSpec("k", "categorical", categories=tuple("abcdefghi")),
                     DimensionSpec("n", "discrete", -3, 3, 1))),
    ]
    failures, checked = 0, 0
    for space in spaces:
        assert space.lattice_size() <= 1000
        for a in space.iter_lattice():
            checked += 1
            failures += decode(space, encode(space, a)) != a
    rng = np.random.default_rng(4)
    mixed = SearchSpace.load(CONFIGS / "space_ridge.yaml")
    for space in spaces + [mixed]:
        for p in rng.uniform(0, np.pi, (10_000, space.width)):
            try:
                a = decode(space, p)
                encode(space, a)
            except Exception:
                failures += 1
    record(4, failures == 0, f"{checked} lattice round trips, 40000 random decodes, {failures} failures")


def test_criterion_5_argmin():
    t0 = time.perf_counter()
    cfg = dict(learning_rate=0.05, max_epochs=500, n_restarts=8)
    hits = default_hits = 0
    for i in range(20):
        rng = np.random.default_rng(100 + i)
        n, L = 1 + i % 2, 1 + (i // 2) % 3
        X = rng.uniform(0, np.pi, (25, n))
        a = rng.normal(size=(3, n))
        y = np.tanh(np.sum(a[0] * np.cos(X * a[1].round() + a[2]), axis=1))
        model, _ = sg.train(sg.init_model(n, L, i), (X, y))
        _, grid_value = grid_best(model, 201)
        hits += search(model, config=SearchConfig(rng_seed=i, **cfg)).best_value <= grid_value + 1e-3
        default_hits += search(model, config=SearchConfig(rng_seed=i)).best_value <= grid_value + 1e-3
    elapsed = time.perf_counter() - t0
    print(f"  (default search config, lr 0.0005 x 1500 epochs: {default_hits}/20, informational)")
    record(5, hits >= 18 and elapsed < 120,
           f"{hits}/20 within 1e-3 of the 201-point grid, lr 0.05 x 500 epochs x 8 restarts, {elapsed:.1f}s")


def test_criterion_6_end_to_end(stumps_space):
    t0 = time.perf_counter()
    obj = Objective("boosted_stumps", lambda: tm.friedman_dataset(300, seed=0), seed=0)
    truth = {tuple(sorted(a.items())): obj.cv_score(a) for a in stumps_space.iter_lattice()}
    best = max(truth.values())
    baseline = run_classical_baseline(obj, stumps_space, "grid", 100)
    assert baseline.best_score == best
    hits = 0
    for seed in range(10):
        res = run_quantum_hpo(obj, stumps_space, SamplingPlan(30, rng_seed=seed),
                              TrainConfig(rng_seed=seed), SearchConfig(rng_seed=seed),
                              n_layers=2, baseline=baseline)
        found = truth[tuple(sorted(res.best_assignment.items()))]
        hits += found >= best - 0.05 * abs(best)
    elapsed = time.perf_counter() - t0
    record(6, hits >= 8 and elapsed < 600,
           f"{hits}/10 runs within 5% of grid optimum {best:.4f}, {elapsed:.1f}s")


def small_config(tmp_path, space_file="space_boosted_stumps.yaml", model="boosted_stumps"):
    (tmp_path / "space.yaml").write_text((CONFIGS / space_file).read_text())
    cfg = yaml.safe_load((CONFIGS / "optimize.yaml").read_text())
    cfg.update(space="space.yaml")
    cfg["objective"]["model"] = model
    cfg["objective"]["dataset"] = {"synthetic": {"n_samples": 150}}
    cfg["plan"]["n_samples"] = 12
    cfg["baseline"]["budget"] = 20
    path = tmp_path / f"{model}.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_criterion_7_report_arithmetic(tmp_path):
    reports = []
    for space_file, model in (("space_boosted_stumps.yaml", "boosted_stumps"), ("space_ridge.yaml", "ridge")):
        d = tmp_path / model
        d.mkdir()
        assert main(["optimize", "-c", str(small_config(d, space_file, model)), "-o", str(d / "out")]) == 0
        reports.append(json.loads((d / "out" / "report.json").read_text()))
    obj = Objective.from_function(lambda a: -(a["v"] - 0.3) ** 2)
    space = SearchSpace((DimensionSpec("v", "continuous", 0.0, 1.0),))
    reports.append(run_quantum_hpo(obj, space, SamplingPlan(10), baseline_budget=10).report.to_dict())
    bad = 0
    for r in reports:
        exact = (r["time_saving_s"] == r["classical_baseline_time_s"] - r["total_proposed_time_s"]
                 and r["time_saving_percent"] == 100 * r["time_saving_s"] / r["classical_baseline_time_s"])
        try:
            validate_report(r)
        except ValueError:
            exact = False
        bad += not exact or bool(check_arithmetic(r))
    record(7, bad == 0, f"{len(reports)} reports, {bad} violations")


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items()
                if k not in TIMING_FIELDS and k not in ("elapsed_s", "generation_time_s")}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def content_bytes(path):
    if path.suffix == ".json":
        return json.dumps(strip_timing(json.loads(path.read_text())), sort_keys=True).encode()
    if path.name == "report.txt":
        # the text table carries timing rows
        return b""
    return path.read_bytes()


def test_criterion_8_determinism(tmp_path):
    config = small_config(tmp_path)
    mismatches, compared = [], 0
    for command in ("generate", "optimize", "baseline"):
        runs = []
        for rep in ("a", "b"):
            out = tmp_path / command / rep
            assert main([command, "-c", str(config), "-o", str(out)]) == 0
            runs.append({p.name: content_bytes(p) for p in sorted(out.iterdir())})
        assert runs[0].keys() == runs[1].keys()
        for name in runs[0]:
            compared += 1
            if runs[0][name] != runs[1][name]:
                mismatches.append(f"{command}/{name}")
    record(8, not mismatches, f"{compared} output files compared, mismatches: {mismatches or 'none'}")
