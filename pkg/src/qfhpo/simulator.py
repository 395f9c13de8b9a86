"""Dense statevector simulator for small parameterized circuits.

Qubit 0 is the most significant bit of the basis index, so ``|q0 q1 ... q_{n-1}>``
maps to index ``q0 * 2**(n-1) + ... + q_{n-1}``.

Rotations follow ``R_A(phi) = exp(-i phi A / 2)``, which makes the two-term
parameter-shift rule with shifts of ``+-pi/2`` exact.

Besides the single-state API (:func:`init_zero`, :func:`apply_gate`, ...), the
module exposes :func:`run_batch`, which evolves a whole batch of circuits that
share one gate layout but differ in their rotation angles. Gradient code relies
on it to evaluate all shifted circuits in one pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import CapacityError, GateIndexError

MAX_QUBITS = 12
ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("CNOT",)

Angle = Union[float, np.ndarray]


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


@dataclass(frozen=True)
class GateOp:
    """One gate. ``angle`` may be a 1-D array when used with :func:`run_batch`."""

    kind: str
    target: int
    control: Optional[int] = None
    angle: Angle = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CNOT" and self.control is None:
            raise ValueError("CNOT requires a control qubit")
        if self.kind != "CNOT" and self.control is not None:
            raise ValueError(f"{self.kind} takes no control qubit")

    def validate(self, n_qubits: int) -> None:
        if not 0 <= self.target < n_qubits:
            raise GateIndexError(f"target {self.target} out of range for {n_qubits} qubits")
        if self.control is not None:
            if not 0 <= self.control < n_qubits:
                raise GateIndexError(
                    f"control {self.control} out of range for {n_qubits} qubits"
                )
            if self.control == self.target:
                raise GateIndexError("control and target must differ")


def RX(target: int, angle: Angle) -> GateOp:
    return GateOp("RX", target, angle=angle)


def RY(target: int, angle: Angle) -> GateOp:
    return GateOp("RY", target, angle=angle)


def RZ(target: int, angle: Angle) -> GateOp:
    return GateOp("RZ", target, angle=angle)


def CNOT(control: int, target: int) -> GateOp:
    return GateOp("CNOT", target, control=control)


def rotation_matrix(kind: str, angle: Angle) -> np.ndarray:
    """Return the 2x2 rotation matrix, or a stack of shape (B, 2, 2) for array angles."""
    a = np.asarray(angle, dtype=float)
    c = np.cos(a / 2)
    s = np.sin(a / 2)
    m = np.empty(a.shape + (2, 2), dtype=complex)
    if kind == "RX":
        m[..., 0, 0] = c
        m[..., 0, 1] = -1j * s
        m[..., 1, 0] = -1j * s
        m[..., 1, 1] = c
    elif kind == "RY":
        m[..., 0, 0] = c
        m[..., 0, 1] = -s
        m[..., 1, 0] = s
        m[..., 1, 1] = c
    elif kind == "RZ":
        m[..., 0, 0] = c - 1j * s
        m[..., 0, 1] = 0.0
        m[..., 1, 0] = 0.0
        m[..., 1, 1] = c + 1j * s
    else:
        raise ValueError(f"{kind} is not a rotation")
    return m


def _check_capacity(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")


@lru_cache(maxsize=None)
def _cnot_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    cbit = (idx >> (n_qubits - 1 - control)) & 1
    return idx ^ (cbit << (n_qubits - 1 - target))


@lru_cache(maxsize=None)
def _z_mean_weights(n_qubits: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    bits = (idx[:, None] >> (n_qubits - 1 - np.arange(n_qubits))[None, :]) & 1
    return (1.0 - 2.0 * bits).mean(axis=1)


def _apply_rotation(states: np.ndarray, kind: str, target: int, angle: Angle,
                    n_qubits: int) -> np.ndarray:
    # states: (B, 2**n)
    b = states.shape[0]
    view = states.reshape(b, 2**target, 2, 2 ** (n_qubits - target - 1))
    m = rotation_matrix(kind, angle)
    if m.ndim == 2:
        m = np.broadcast_to(m, (b, 2, 2))
    m = m[:, :, :, None, None]
    s0 = view[:, :, 0, :]
    s1 = view[:, :, 1, :]
    out = np.empty_like(view)
    out[:, :, 0, :] = m[:, 0, 0] * s0 + m[:, 0, 1] * s1
    out[:, :, 1, :] = m[:, 1, 0] * s0 + m[:, 1, 1] * s1
    return out.reshape(b, -1)


def _apply(states: np.ndarray, gate: GateOp, n_qubits: int) -> np.ndarray:
    if gate.kind == "CNOT":
        return states[:, _cnot_permutation(n_qubits, gate.control, gate.target)]
    return _apply_rotation(states, gate.kind, gate.target, gate.angle, n_qubits)


def init_zero(n_qubits: int) -> StateVector:
    _check_capacity(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Return a new state with ``gate`` applied; the input is left untouched."""
    gate.validate(state.n_qubits)
    if np.ndim(gate.angle) != 0:
        raise ValueError("apply_gate takes scalar angles; use run_batch for batches")
    out = _apply(state.amplitudes[None, :], gate, state.n_qubits)
    return StateVector(state.n_qubits, out[0])


def expect_z_mean(state: StateVector) -> float:
    """Exact expectation of ``(1/n) sum_q Z_q``."""
    probs = np.abs(state.amplitudes) ** 2
    return float(probs @ _z_mean_weights(state.n_qubits))


def run_circuit(gates: Sequence[GateOp], n_qubits: int) -> float:
    state = init_zero(n_qubits)
    for gate in gates:
        state = apply_gate(state, gate)
    return expect_z_mean(state)


def run_batch(gates: Sequence[GateOp], n_qubits: int, batch: int) -> np.ndarray:
    """Evaluate ``batch`` circuits sharing one layout; returns shape (batch,).

    Each rotation angle is either a scalar (shared by the whole batch) or an
    array of length ``batch``.
    """
    _check_capacity(n_qubits)
    states = np.zeros((batch, 2**n_qubits), dtype=complex)
    states[:, 0] = 1.0
    for gate in gates:
        gate.validate(n_qubits)
        if np.ndim(gate.angle) not in (0, 1) or (
            np.ndim(gate.angle) == 1 and len(gate.angle) != batch
        ):
            raise ValueError(f"angle of {gate.kind} does not match batch size {batch}")
        states = _apply(states, gate, n_qubits)
    probs = states.real**2 + states.imag**2
    return probs @ _z_mean_weights(n_qubits)


def param_shift_grad(circuit_builder: Callable[[np.ndarray], Sequence[GateOp]],
                     params: Sequence[float], index: int,
                     n_qubits: Optional[int] = None) -> float:
    """Derivative of the circuit expectation with respect to ``params[index]``.

    Exact when the parameter enters the circuit only as a rotation angle with
    unit coefficient. ``n_qubits`` defaults to the highest qubit the built
    circuit touches.
    """
    params = np.asarray(params, dtype=float)
    if not 0 <= index < params.size:
        raise IndexError(f"parameter index {index} out of range for {params.size} parameters")
    shift = np.zeros_like(params)
    shift[index] = np.pi / 2
    plus_gates = list(circuit_builder(params + shift))
    minus_gates = list(circuit_builder(params - shift))
    if n_qubits is None:
        n_qubits = _infer_width(plus_gates + minus_gates)
    plus = run_circuit(plus_gates, n_qubits)
    minus = run_circuit(minus_gates, n_qubits)
    return (plus - minus) / 2


def _infer_width(gates: Sequence[GateOp]) -> int:
    touched = [g.target for g in gates] + [g.control for g in gates if g.control is not None]
    return max(touched, default=0) + 1
