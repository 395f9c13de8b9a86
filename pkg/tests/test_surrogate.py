import math

import numpy as np
import pytest

from qfhpo import simulator as sim
from qfhpo import surrogate as sg
from qfhpo.errors import ConfigError, DomainError, ShapeError


def fixed_model(n, L, beta=1.0, theta=0.0):
    return sg.SurrogateModel(n, L, np.full((L, n), beta), np.full((L, n, 3), theta))


def random_model(rng, n, L):
    return sg.SurrogateModel(n, L, rng.uniform(0.2, 2.0, (L, n)), rng.uniform(-np.pi, np.pi, (L, n, 3)))


def fourier_target(x):
    return 0.5 * np.cos(x) + 0.3 * np.cos(2 * x)


class TestBuildCircuit:
    def test_single_qubit_structure(self):
        gates = sg.build_circuit(fixed_model(1, 1), [0.3])
        assert [g.kind for g in gates] == ["RX", "RZ", "RY", "RZ"]
        assert gates[0].angle == pytest.approx(0.3)

    def test_gate_count(self):
        gates = sg.build_circuit(fixed_model(3, 2), [0.1, 0.2, 0.3])
        assert len(gates) == 30
        assert sum(g.kind == "CNOT" for g in gates) == 6
        assert [(g.control, g.target) for g in gates if g.kind == "CNOT"][:3] == [(0, 1), (1, 2), (2, 0)]

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            sg.build_circuit(fixed_model(2, 1), [0.1])

    def test_identity_block_gives_cosine(self):
        for x in np.linspace(0, np.pi, 7):
            assert sg.evaluate(fixed_model(1, 1), [x]) == pytest.approx(math.cos(x), abs=1e-12)


class TestEvaluate:
    def test_zero_parameters(self, rng):
        m = fixed_model(3, 2, beta=0.0)
        for x in rng.uniform(0, np.pi, (5, 3)):
            assert sg.evaluate(m, x) == pytest.approx(1.0, abs=1e-12)

    def test_cos_pi(self):
        assert sg.evaluate(fixed_model(1, 1), [np.pi]) == pytest.approx(-1.0, abs=1e-12)

    def test_reuploading_adds_angles(self):
        assert sg.evaluate(fixed_model(1, 2), [0.4]) == pytest.approx(math.cos(0.8), abs=1e-12)

    def test_batch_matches_single(self, rng):
        m = random_model(rng, 3, 2)
        X = rng.uniform(0, np.pi, (6, 3))
        np.testing.assert_allclose(sg.evaluate_batch(m, X), [sg.evaluate(m, x) for x in X], atol=1e-13)

    def test_bounded(self, rng):
        for _ in range(100):
            n, L = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            m = random_model(rng, n, L)
            v = sg.evaluate_batch(m, rng.uniform(0, np.pi, (10, n)))
            assert np.all(np.abs(v) <= 1 + 1e-12)

    def test_negated(self, rng):
        m = random_model(rng, 2, 2)
        x = rng.uniform(0, np.pi, 2)
        assert sg.evaluate(m.negated(), x) == -sg.evaluate(m, x)


class TestLoss:
    def test_perfect_fit(self, rng):
        m = random_model(rng, 2, 1)
        X = rng.uniform(0, np.pi, (5, 2))
        assert sg.loss(m, (X, sg.evaluate_batch(m, X))) == pytest.approx(0.0, abs=1e-24)

    def test_single_row(self):
        m = fixed_model(1, 1, beta=0.0)
        assert sg.loss(m, ([[0.5]], [-1.0])) == pytest.approx(4.0)

    def test_matches_brute_force(self, rng):
        m = random_model(rng, 2, 2)
        X = rng.uniform(0, np.pi, (10, 2))
        y = rng.uniform(-1, 1, 10)
        brute = sum((sim.run_circuit(sg.build_circuit(m, x), 2) - t) ** 2 for x, t in zip(X, y)) / 10
        assert sg.loss(m, (X, y)) == pytest.approx(brute, abs=1e-13)

    def test_empty(self):
        with pytest.raises(DomainError):
            sg.loss(fixed_model(1, 1), (np.zeros((0, 1)), np.zeros(0)))


class TestGradients:
    def test_param_gradient_matches_finite_differences(self, rng):
        h = 1e-5
        for _ in range(10):
            n, L, N = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 9))
            m = random_model(rng, n, L)
            X = rng.uniform(0, np.pi, (N, n))
            y = rng.uniform(-1, 1, N)
            _, grad = sg.loss_and_grad(m, (X, y))
            p = m.params()
            for i in range(p.size):
                e = np.zeros_like(p)
                e[i] = h
                fd = (sg.loss(m.with_params(p + e), (X, y)) - sg.loss(m.with_params(p - e), (X, y))) / (2 * h)
                assert abs(grad[i] - fd) < 1e-5

    def test_input_gradient_of_cosine(self):
        m = fixed_model(1, 1)
        _, g = sg.input_gradient(m, [[0.7], [np.pi]])
        assert g[0, 0] == pytest.approx(-math.sin(0.7), abs=1e-12)
        assert abs(g[1, 0]) < 1e-9


class TestTrain:
    def test_fourier_target(self):
        x = np.linspace(0, np.pi, 30)[:, None]
        model, history = sg.train(sg.init_model(1, 3, 0), (x, fourier_target(x[:, 0])))
        assert min(history) <= 1e-2
        assert sg.loss(model, (x, fourier_target(x[:, 0]))) == pytest.approx(min(history))

    def test_constant_target(self):
        x = np.linspace(0, np.pi, 20)[:, None]
        _, history = sg.train(sg.init_model(1, 1, 0), (x, np.ones(20)),
                              sg.TrainConfig(max_epochs=150))
        assert min(history) <= 1e-4

    def test_zero_epochs(self):
        m = sg.init_model(2, 2, 3)
        trained, history = sg.train(m, (np.full((3, 2), 0.5), np.zeros(3)), sg.TrainConfig(max_epochs=0))
        np.testing.assert_array_equal(trained.params(), m.params())
        assert len(history) == 1

    def test_deterministic(self):
        x = np.linspace(0, np.pi, 12)[:, None]
        runs = [sg.train(sg.init_model(1, 2, 5), (x, fourier_target(x[:, 0])))[1] for _ in range(2)]
        assert runs[0] == runs[1]

    def test_running_minimum(self):
        x = np.linspace(0, np.pi, 12)[:, None]
        _, h = sg.train(sg.init_model(1, 2, 1), (x, fourier_target(x[:, 0])))
        running = np.minimum.accumulate(h)
        assert np.all(np.diff(running) <= 0)

    def test_more_layers_fit_better(self):
        x = np.linspace(0, np.pi, 30)[:, None]
        y = fourier_target(x[:, 0])
        med = {L: np.median([min(sg.train(sg.init_model(1, L, s), (x, y))[1]) for s in range(5)])
               for L in (1, 3)}
        assert med[3] <= med[1]

    def test_init(self):
        m = sg.init_model(3, 2, 9)
        np.testing.assert_array_equal(m.beta, 1.0)
        assert np.all(np.abs(m.theta) <= 0.1)
        assert m.beta.size == 6 and m.theta.size == 18


class TestCheckpoint:
    def test_round_trip(self, tmp_path, rng):
        m = random_model(rng, 2, 3)
        m.score_bounds = (0.1, 0.9)
        m.space_hash = "abc"
        m.save(tmp_path / "m.json")
        back = sg.SurrogateModel.load(tmp_path / "m.json")
        np.testing.assert_array_equal(back.params(), m.params())
        assert back.score_bounds == (0.1, 0.9) and back.space_hash == "abc"

    def test_rejects_other_files(self, tmp_path):
        (tmp_path / "x.json").write_text('{"format": "other"}')
        with pytest.raises(ConfigError):
            sg.SurrogateModel.load(tmp_path / "x.json")


def test_sample_table_validates():
    with pytest.raises(DomainError):
        sg.SampleTable(np.array([[4.0]]), [0.0], [0.0], (0.0, 1.0))
    with pytest.raises(DomainError):
        sg.SampleTable(np.array([[1.0]]), [0.0], [1.5], (0.0, 1.0))
