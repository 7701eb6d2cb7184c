"""Dense statevector simulation of the Ry + CNOT feature-map circuit.

Bit convention: qubit ``i`` is bit ``i`` of the basis index, so qubit 0 is
the least significant bit.  For two qubits the amplitude order is
|q1 q0> = |00>, |01>, |10>, |11>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ENTANGLERS = ("linear_chain", "ring")


@dataclass(frozen=True)
class QuantumState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        size = amps.size
        if amps.ndim != 1 or size < 2 or size & (size - 1):
            raise ValueError("amplitude count must be a power of two >= 2")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalised (norm^2 = {norm})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def __len__(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class FeatureMapConfig:
    n_qubits: int = 5
    repetitions: int = 2
    entangler: str = "linear_chain"
    angle_scale: float = math.pi / 16

    def __post_init__(self):
        if self.n_qubits < 1 or self.repetitions < 1:
            raise ValueError("n_qubits and repetitions must be >= 1")
        if self.entangler not in ENTANGLERS:
            raise ValueError(f"entangler must be one of {ENTANGLERS}")

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "repetitions": self.repetitions,
                "entangler": self.entangler, "angle_scale": self.angle_scale}

    def with_qubits(self, n: int) -> "FeatureMapConfig":
        return FeatureMapConfig(n, self.repetitions, self.entangler, self.angle_scale)


def _raw(state) -> np.ndarray:
    return state.amplitudes if isinstance(state, QuantumState) else np.asarray(state, dtype=complex)


def _n_qubits(amps: np.ndarray) -> int:
    return amps.size.bit_length() - 1


def _check_qubit(q: int, n: int) -> None:
    if not 0 <= q < n:
        raise IndexError(f"qubit {q} out of range for {n} qubits")


def zero_state(n_qubits: int) -> QuantumState:
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return QuantumState(amps)


def ry_amplitudes(amps: np.ndarray, qubit: int, theta: float) -> np.ndarray:
    """Apply Ry(theta) to a raw amplitude vector (no normalisation check)."""
    n = _n_qubits(amps)
    _check_qubit(qubit, n)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    view = amps.reshape(-1, 2, 2**qubit)
    out = np.empty_like(view)
    out[:, 0, :] = c * view[:, 0, :] - s * view[:, 1, :]
    out[:, 1, :] = s * view[:, 0, :] + c * view[:, 1, :]
    return out.reshape(-1)


def cnot_amplitudes(amps: np.ndarray, control: int, target: int) -> np.ndarray:
    n = _n_qubits(amps)
    _check_qubit(control, n)
    _check_qubit(target, n)
    if control == target:
        raise ValueError("control and target must differ")
    idx = np.arange(amps.size)
    # output[i] = input[i with target flipped] wherever the control bit is set
    src = np.where((idx >> control) & 1, idx ^ (1 << target), idx)
    return amps[src]


def apply_ry(state, qubit: int, theta: float) -> QuantumState:
    return QuantumState(ry_amplitudes(_raw(state), qubit, theta))


def apply_cnot(state, control: int, target: int) -> QuantumState:
    return QuantumState(cnot_amplitudes(_raw(state), control, target))


def entangler_pairs(cfg: FeatureMapConfig) -> list[tuple[int, int]]:
    n = cfg.n_qubits
    pairs = [(i, i + 1) for i in range(n - 1)]
    if cfg.entangler == "ring" and n > 2:
        pairs.append((n - 1, 0))
    return pairs


def feature_map_amplitudes(x, cfg: FeatureMapConfig) -> np.ndarray:
    x = np.asarray(getattr(x, "values", x), dtype=float)
    if x.shape != (cfg.n_qubits,):
        raise ValueError(f"expected {cfg.n_qubits} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    amps = zero_state(cfg.n_qubits).amplitudes
    pairs = entangler_pairs(cfg)
    for _ in range(cfg.repetitions):
        for q, value in enumerate(x):
            amps = ry_amplitudes(amps, q, cfg.angle_scale * value)
        for control, target in pairs:
            amps = cnot_amplitudes(amps, control, target)
    return amps


def feature_map_state(x, cfg: FeatureMapConfig | None = None) -> QuantumState:
    """Encode a feature vector: per repetition, Ry(scale * x_i) on qubit i,
    then the CNOT entangler."""
    cfg = FeatureMapConfig() if cfg is None else cfg
    return QuantumState(feature_map_amplitudes(x, cfg))


def fidelity(a, b) -> float:
    """Squared overlap |<b|a>|^2."""
    a, b = _raw(a), _raw(b)
    if a.shape != b.shape:
        raise ValueError("states have different dimensions")
    return float(abs(np.vdot(b, a)) ** 2)
