"""Data-reuploading circuit used as a Fourier-series regressor, and its training.

Each of the ``L`` layers applies a feature map (``RX(beta[l, q] * x[q])`` on every
qubit) followed by a trainable block (``RZ RY RZ`` per qubit with angles
``theta[l, q, :]``) and a ring of CNOTs ``q -> q+1 mod n``. The model output is
the mean Pauli-Z expectation, so it always lies in ``[-1, 1]``.

Every trainable quantity enters exactly one rotation gate, so all gradients
(with respect to ``beta``, ``theta`` or the input ``x``) are assembled from the
parameter-shift derivatives of individual gate angles; see
:func:`angle_gradients`.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import simulator as sim
from .errors import ConfigError, DomainError, NumericalError, ShapeError
from .optim import Adam

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "qfhpo-surrogate"
CHECKPOINT_VERSION = 1
# cap on batch * 2**n complex amplitudes held at once
_MAX_BATCH_AMPLITUDES = 1 << 21


@dataclass
class SurrogateModel:
    n_qubits: int
    n_layers: int
    beta: np.ndarray  # (L, n)
    theta: np.ndarray  # (L, n, 3)
    score_bounds: Optional[Tuple[float, float]] = None
    space_hash: Optional[str] = None
    sign: float = 1.0  # -1 negates the observable

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        self.beta = np.asarray(self.beta, dtype=float).reshape(self.n_layers, self.n_qubits)
        self.theta = np.asarray(self.theta, dtype=float).reshape(
            self.n_layers, self.n_qubits, 3)
        if self.sign not in (1.0, -1.0):
            raise ValueError("sign must be +1 or -1")

    @property
    def n_params(self) -> int:
        return self.beta.size + self.theta.size

    def params(self) -> np.ndarray:
        """Flat parameter vector: beta (layer-major) followed by theta."""
        return np.concatenate([self.beta.ravel(), self.theta.ravel()])

    def with_params(self, flat: np.ndarray) -> "SurrogateModel":
        nb = self.beta.size
        return replace(self, beta=flat[:nb].reshape(self.beta.shape).copy(),
                       theta=flat[nb:].reshape(self.theta.shape).copy())

    def negated(self) -> "SurrogateModel":
        return replace(self, sign=-self.sign)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "n_qubits": self.n_qubits,
            "n_layers": self.n_layers,
            "beta": self.beta.tolist(),
            "theta": self.theta.tolist(),
            "score_bounds": None if self.score_bounds is None else list(self.score_bounds),
            "space_hash": self.space_hash,
            "sign": self.sign,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SurrogateModel":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ConfigError("not a surrogate checkpoint")
        if d.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {d.get('version')}")
        bounds = d.get("score_bounds")
        return cls(
            n_qubits=int(d["n_qubits"]),
            n_layers=int(d["n_layers"]),
            beta=np.array(d["beta"], dtype=float),
            theta=np.array(d["theta"], dtype=float),
            score_bounds=None if bounds is None else (float(bounds[0]), float(bounds[1])),
            space_hash=d.get("space_hash"),
            sign=float(d.get("sign", 1.0)),
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SurrogateModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed checkpoint {path}: {exc}") from exc


def init_model(n_qubits: int, n_layers: int, seed: int = 0) -> SurrogateModel:
    """``beta = 1``, ``theta ~ U[-0.1, 0.1]`` from ``seed``."""
    sim._check_capacity(n_qubits)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-0.1, 0.1, size=(n_layers, n_qubits, 3))
    return SurrogateModel(n_qubits, n_layers, np.ones((n_layers, n_qubits)), theta)


@dataclass
class SampleTable:
    """Encoded hyperparameter points with raw and normalized scores."""

    X: np.ndarray  # (N, d), entries in [0, pi]
    raw: np.ndarray  # (N,)
    y: np.ndarray  # (N,), entries in [-1, 1]
    score_bounds: Tuple[float, float]
    assignments: List[Dict[str, Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.raw = np.asarray(self.raw, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if len(self.X) != len(self.y) or len(self.raw) != len(self.y):
            raise ShapeError("X, raw and y must have the same number of rows")
        if np.any(self.X < 0) or np.any(self.X > np.pi):
            raise DomainError("encoded inputs must lie in [0, pi]")
        if np.any(np.abs(self.y) > 1.0):
            raise DomainError("normalized scores must lie in [-1, 1]")

    def __len__(self) -> int:
        return len(self.y)


# --- circuit layout ---------------------------------------------------------

@lru_cache(maxsize=None)
def _layout(n_qubits: int, n_layers: int):
    """Gate skeleton plus, for each rotation, which parameter feeds it.

    Returns ``(ops, enc_idx, theta_idx)`` where ``ops`` is a tuple of
    ``(kind, target, control, rotation_slot)``, ``enc_idx[l, q]`` is the
    rotation slot of the encoding gate and ``theta_idx[l, q, k]`` that of
    ``theta[l, q, k]``.
    """
    ops = []
    enc_idx = np.zeros((n_layers, n_qubits), dtype=int)
    theta_idx = np.zeros((n_layers, n_qubits, 3), dtype=int)
    slot = 0
    for l in range(n_layers):
        for q in range(n_qubits):
            ops.append(("RX", q, None, slot))
            enc_idx[l, q] = slot
            slot += 1
        for q in range(n_qubits):
            for k, kind in enumerate(("RZ", "RY", "RZ")):
                ops.append((kind, q, None, slot))
                theta_idx[l, q, k] = slot
                slot += 1
        if n_qubits > 1:
            for q in range(n_qubits):
                ops.append(("CNOT", (q + 1) % n_qubits, q, None))
    return tuple(ops), enc_idx, theta_idx


def _check_x(model: SurrogateModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_qubits:
        raise ShapeError(f"expected inputs of width {model.n_qubits}, got shape {X.shape}")
    return X


def _rotation_angles(model: SurrogateModel, X: np.ndarray) -> np.ndarray:
    """(N, G) angles of every rotation gate for each input row."""
    _, enc_idx, theta_idx = _layout(model.n_qubits, model.n_layers)
    n_rot = enc_idx.size + theta_idx.size
    angles = np.empty((len(X), n_rot))
    angles[:, enc_idx.ravel()] = (model.beta[None, :, :] * X[:, None, :]).reshape(len(X), -1)
    angles[:, theta_idx.ravel()] = model.theta.ravel()[None, :]
    return angles


def _run_angles(n_qubits: int, n_layers: int, angles: np.ndarray) -> np.ndarray:
    ops, _, _ = _layout(n_qubits, n_layers)
    chunk = max(1, _MAX_BATCH_AMPLITUDES >> n_qubits)
    out = np.empty(len(angles))
    for start in range(0, len(angles), chunk):
        a = angles[start:start + chunk]
        gates = [sim.GateOp(kind, target, control,
                            0.0 if slot is None else a[:, slot])
                 for kind, target, control, slot in ops]
        out[start:start + chunk] = sim.run_batch(gates, n_qubits, len(a))
    return out


def build_circuit(model: SurrogateModel, x: Sequence[float]) -> List[sim.GateOp]:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_qubits,):
        raise ShapeError(f"expected input of length {model.n_qubits}, got shape {x.shape}")
    angles = _rotation_angles(model, x[None, :])[0]
    ops, _, _ = _layout(model.n_qubits, model.n_layers)
    return [sim.GateOp(kind, target, control, 0.0 if slot is None else float(angles[slot]))
            for kind, target, control, slot in ops]


def evaluate(model: SurrogateModel, x: Sequence[float]) -> float:
    """Model output for one encoded point (single-state simulator path)."""
    return model.sign * sim.run_circuit(build_circuit(model, x), model.n_qubits)


def evaluate_batch(model: SurrogateModel, X: np.ndarray) -> np.ndarray:
    X = _check_x(model, X)
    return model.sign * _run_angles(model.n_qubits, model.n_layers, _rotation_angles(model, X))


def angle_gradients(model: SurrogateModel, X: np.ndarray,
                    slots: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Model values and their derivatives w.r.t. rotation angles.

    Returns ``(values, grads)`` with ``values`` of shape (N,) and ``grads`` of
    shape (N, len(slots)); ``slots`` defaults to every rotation gate. Each
    derivative is ``[f(a + pi/2) - f(a - pi/2)] / 2`` for that gate's angle.
    """
    X = _check_x(model, X)
    base = _rotation_angles(model, X)
    n_rot = base.shape[1]
    slots = np.arange(n_rot) if slots is None else np.asarray(slots, dtype=int)
    k = len(slots)
    # batch layout: [unshifted (N) | plus shifts (k*N) | minus shifts (k*N)]
    shifted = np.broadcast_to(base, (k,) + base.shape).copy()
    shifted[np.arange(k), :, slots] += np.pi / 2
    minus = np.broadcast_to(base, (k,) + base.shape).copy()
    minus[np.arange(k), :, slots] -= np.pi / 2
    batch = np.concatenate([base, shifted.reshape(-1, n_rot), minus.reshape(-1, n_rot)])
    out = model.sign * _run_angles(model.n_qubits, model.n_layers, batch)
    n = len(X)
    values = out[:n]
    plus_v = out[n:n + k * n].reshape(k, n)
    minus_v = out[n + k * n:].reshape(k, n)
    return values, ((plus_v - minus_v) / 2).T


def param_gradients(model: SurrogateModel, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values (N,) and Jacobian (N, n_params) w.r.t. ``model.params()``."""
    X = _check_x(model, X)
    _, enc_idx, theta_idx = _layout(model.n_qubits, model.n_layers)
    values, g = angle_gradients(model, X)
    d_beta = g[:, enc_idx] * X[:, None, :]  # chain rule through beta * x
    d_theta = g[:, theta_idx]
    return values, np.concatenate([d_beta.reshape(len(X), -1), d_theta.reshape(len(X), -1)],
                                  axis=1)


def input_gradient(model: SurrogateModel, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values (N,) and gradient (N, d) w.r.t. the encoded input.

    Only the encoding gates are shifted; ``d f / d x[q] = sum_l beta[l, q] *
    d f / d a[l, q]``.
    """
    X = _check_x(model, X)
    _, enc_idx, _ = _layout(model.n_qubits, model.n_layers)
    values, g = angle_gradients(model, X, enc_idx.ravel())
    g = g.reshape(len(X), model.n_layers, model.n_qubits)
    return values, np.einsum("nlq,lq->nq", g, model.beta)


# --- training ---------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.15
    max_epochs: int = 70
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")


def _as_arrays(table) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(table, SampleTable):
        return table.X, table.y
    X, y = table
    return np.atleast_2d(np.asarray(X, dtype=float)), np.asarray(y, dtype=float)


def loss(model: SurrogateModel, table) -> float:
    """Mean squared error over a :class:`SampleTable` or an ``(X, y)`` pair."""
    X, y = _as_arrays(table)
    if len(y) == 0:
        raise DomainError("cannot compute the loss of an empty table")
    return float(np.mean((evaluate_batch(model, X) - y) ** 2))


def loss_and_grad(model: SurrogateModel, table) -> Tuple[float, np.ndarray]:
    X, y = _as_arrays(table)
    if len(y) == 0:
        raise DomainError("cannot compute the loss of an empty table")
    values, jac = param_gradients(model, X)
    resid = values - y
    return float(np.mean(resid**2)), 2.0 * resid @ jac / len(y)


def train(model: SurrogateModel, table, config: TrainConfig = TrainConfig()
          ) -> Tuple[SurrogateModel, List[float]]:
    """Full-batch Adam on ``(beta, theta)``.

    The history holds the loss before each update plus the loss after the
    last one (``max_epochs + 1`` entries). The returned model is the one with
    the lowest recorded loss.
    """
    opt = Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    params = model.params()
    history: List[float] = []
    best_loss, best_params = np.inf, params
    for epoch in range(config.max_epochs + 1):
        current = model.with_params(params)
        if epoch < config.max_epochs:
            value, grad = loss_and_grad(current, table)
        else:
            value, grad = loss(current, table), None
        if not np.isfinite(value):
            raise NumericalError(f"non-finite loss at epoch {epoch}")
        history.append(value)
        if value < best_loss:
            best_loss, best_params = value, params
        if grad is not None:
            params = opt.step(params, grad)
        log.debug("epoch %d loss %.6g", epoch, value)
    return model.with_params(best_params), history
