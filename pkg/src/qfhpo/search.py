"""Gradient search over the inputs of a trained surrogate.

The surrogate's parameters are frozen and Adam descends over the encoded
input ``x`` itself, projecting back onto the box ``[0, pi]^d`` after every
step. Several seeded restarts run side by side as one batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .encoding import SearchSpace, decode, denormalize_score
from .optim import Adam
from .surrogate import SurrogateModel, evaluate, evaluate_batch, input_gradient

MODES = ("minimize", "maximize")


@dataclass(frozen=True)
class SearchConfig:
    learning_rate: float = 0.0005
    max_epochs: int = 1500
    n_restarts: int = 8
    mode: str = "minimize"
    rng_seed: int = 0
    load_opt_bh: bool = False  # start restart 0 from a cached optimum when one is given

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class RestartSummary:
    start: List[float]
    final: List[float]
    final_value: float
    best: List[float]
    best_value: float


@dataclass
class SearchResult:
    best_encoded: np.ndarray
    best_value: float
    restart: int
    mode: str
    restarts: List[RestartSummary] = field(default_factory=list)
    best_native: Optional[Dict[str, Any]] = None
    best_raw: Optional[float] = None
    path: Optional[np.ndarray] = None  # (epochs + 1, restarts, d) when recorded


def search(model: SurrogateModel, space: Optional[SearchSpace] = None,
           config: SearchConfig = SearchConfig(), record_path: bool = False,
           warm_start: Optional[Sequence[float]] = None) -> SearchResult:
    """Multi-restart projected Adam over the encoded input.

    Each restart keeps the best point it visits; the restart with the best
    value wins, ties going to the lowest restart index. ``best_value`` is
    recomputed with the single-state :func:`evaluate`. With
    ``config.load_opt_bh`` set, ``warm_start`` (clipped to the box) replaces
    the first random start; otherwise it is ignored.
    """
    d = model.n_qubits
    if space is not None and space.width != d:
        raise ValueError(f"space has width {space.width} but the model has {d} qubits")
    rng = np.random.default_rng(config.rng_seed)
    x = rng.uniform(0.0, np.pi, size=(config.n_restarts, d))
    if config.load_opt_bh and warm_start is not None:
        w = np.asarray(warm_start, dtype=float)
        if w.shape != (d,):
            raise ValueError(f"warm start has shape {w.shape}, expected ({d},)")
        x[0] = np.clip(w, 0.0, np.pi)
    starts = x.copy()
    direction = 1.0 if config.mode == "minimize" else -1.0
    opt = Adam(config.learning_rate)
    path = [x.copy()] if record_path else None

    best_x = x.copy()
    best_v = np.full(config.n_restarts, np.inf)
    values = None
    for epoch in range(config.max_epochs + 1):
        if epoch < config.max_epochs:
            values, grad = input_gradient(model, x)
        else:
            values, grad = evaluate_batch(model, x), None
        score = direction * values
        improved = score < best_v
        best_v[improved] = score[improved]
        best_x[improved] = x[improved]
        if grad is None:
            break
        x = np.clip(opt.step(x, direction * grad), 0.0, np.pi)
        if record_path:
            path.append(x.copy())

    winner = int(np.argmin(best_v))
    summaries = [
        RestartSummary(start=starts[r].tolist(), final=x[r].tolist(),
                       final_value=float(values[r]), best=best_x[r].tolist(),
                       best_value=float(direction * best_v[r]))
        for r in range(config.n_restarts)
    ]
    best_encoded = best_x[winner].copy()
    result = SearchResult(
        best_encoded=best_encoded,
        best_value=evaluate(model, best_encoded),
        restart=winner,
        mode=config.mode,
        restarts=summaries,
        path=None if path is None else np.stack(path),
    )
    if space is not None:
        result.best_native, result.best_raw = decode_result(result, space, model.score_bounds)
    return result


def decode_result(result: SearchResult, space: SearchSpace,
                  score_bounds: Optional[Tuple[float, float]]
                  ) -> Tuple[Dict[str, Any], Optional[float]]:
    """Native assignment for the best point and its predicted raw score."""
    native = decode(space, result.best_encoded)
    raw = None
    if score_bounds is not None and score_bounds[1] > score_bounds[0]:
        raw = float(denormalize_score(result.best_value, *score_bounds))
    return native, raw


def grid_best(model: SurrogateModel, resolution: int = 201, mode: str = "minimize"
              ) -> Tuple[np.ndarray, float]:
    """Best surrogate value on a dense ``resolution^d`` grid (reference oracle)."""
    axes = [np.linspace(0.0, np.pi, resolution)] * model.n_qubits
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.n_qubits)
    vals = evaluate_batch(model, pts)
    i = int(np.argmin(vals) if mode == "minimize" else np.argmax(vals))
    return pts[i], float(vals[i])
