# channels/canales.py
"""
Canales cuánticos (mapas CPTP en forma de Kraus) sobre el par compartido:

- Canal de desfase en la base computacional: modela el interruptor H_dec que
  el verificador puede encender o apagar.
- Estados de Werner.
- Portador genérico de canales, reutilizado por el solver de CTC.

La "intensidad" intermedia del desfase es una interpolación propia
(off-diagonales escaladas por 1 - s); solo los extremos 0 y 1 tienen
lectura operacional directa.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qmath.densidad import (
    DensityMatrix,
    DimensionError,
    bell_state,
    chequear_limite,
    maximally_mixed,
)
from utils import SimuladorError

logger = logging.getLogger(__name__)

TOL_TP = 1e-10


class CanalInvalidoError(SimuladorError):
    """Canal no preservador de traza o parámetros fuera de rango."""


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    dim_in: int
    dim_out: int
    kraus_ops: tuple

    def __post_init__(self):
        ops = []
        for k in self.kraus_ops:
            k = np.array(k, dtype=complex)
            if k.shape != (self.dim_out, self.dim_in):
                raise CanalInvalidoError(
                    f"Operador de Kraus {k.shape}, se esperaba {(self.dim_out, self.dim_in)}."
                )
            k.setflags(write=False)
            ops.append(k)
        if not ops:
            raise CanalInvalidoError("Un canal necesita al menos un operador de Kraus.")

        suma = sum(k.conj().T @ k for k in ops)
        defecto = float(np.max(np.abs(suma - np.eye(self.dim_in))))
        if defecto > TOL_TP:
            raise CanalInvalidoError(f"Σ K†K ≠ I (defecto {defecto:.3e}).")
        object.__setattr__(self, "kraus_ops", tuple(ops))

    @property
    def kraus_stack(self) -> np.ndarray:
        return np.stack(self.kraus_ops)


def apply_to_matrix(ch: QuantumChannel, m: np.ndarray) -> np.ndarray:
    """Σ K m K† sin validar el resultado (uso interno en bucles)."""
    k = ch.kraus_stack
    return np.einsum("aij,jk,alk->il", k, m, k.conj())


def apply(ch: QuantumChannel, state: DensityMatrix) -> DensityMatrix:
    if state.dim != ch.dim_in:
        raise DimensionError(f"El canal espera dim {ch.dim_in}, el estado tiene {state.dim}.")
    return DensityMatrix(apply_to_matrix(ch, state.matrix))


def identity_channel(dim: int) -> QuantumChannel:
    return QuantumChannel(dim, dim, (np.eye(dim, dtype=complex),))


def compose(primero: QuantumChannel, segundo: QuantumChannel) -> QuantumChannel:
    """Aplica ``primero`` y luego ``segundo``."""
    if primero.dim_out != segundo.dim_in:
        raise DimensionError("Dimensiones incompatibles al componer canales.")
    ops = tuple(b @ a for b in segundo.kraus_ops for a in primero.kraus_ops)
    return QuantumChannel(primero.dim_in, segundo.dim_out, ops)


def _chequear_intensidad(strength: float) -> float:
    s = float(strength)
    if not 0.0 <= s <= 1.0:
        raise CanalInvalidoError(f"La intensidad debe estar en [0, 1] (llegó {strength}).")
    return s


def dephasing_channel(
    n_qubits: int, strength: float, qubits: Sequence[int] | None = None
) -> QuantumChannel:
    """
    ρ ↦ (1 - s) ρ + s Σ_k P_k ρ P_k, con P_k los proyectores de la base
    computacional de ``qubits`` (por defecto todos). Las coherencias entre
    índices que difieren en esos qubits quedan multiplicadas por (1 - s).
    """
    s = _chequear_intensidad(strength)
    dim = 2**n_qubits
    chequear_limite(dim)
    objetivo = list(range(n_qubits)) if qubits is None else list(qubits)
    if any(not 0 <= q < n_qubits for q in objetivo) or len(set(objetivo)) != len(objetivo):
        raise DimensionError(f"Qubits {objetivo} inválidos para un registro de {n_qubits}.")

    ops = []
    if s < 1.0:
        ops.append(np.sqrt(1.0 - s) * np.eye(dim, dtype=complex))
    if s > 0.0:
        indices = np.arange(dim)
        # bits de los qubits objetivo (qubit 0 = bit más significativo)
        bits = [(indices >> (n_qubits - 1 - q)) & 1 for q in objetivo]
        etiqueta = np.zeros(dim, dtype=int)
        for b in bits:
            etiqueta = (etiqueta << 1) | b
        for k in range(2 ** len(objetivo)):
            ops.append(np.sqrt(s) * np.diag((etiqueta == k).astype(complex)))
    return QuantumChannel(dim, dim, tuple(ops))


@dataclass(frozen=True)
class DecoherenceSwitch:
    on: bool = False
    strength: float = 1.0

    def __post_init__(self):
        _chequear_intensidad(self.strength)

    def channel(self, n_qubits: int = 2, qubits: Sequence[int] | None = None) -> QuantumChannel:
        if not self.on or self.strength == 0.0:
            return identity_channel(2**n_qubits)
        return dephasing_channel(n_qubits, self.strength, qubits)

    def apply(self, state: DensityMatrix, qubits: Sequence[int] | None = (0, 1)) -> DensityMatrix:
        """Aplica el interruptor al par (qubits 0 y 1) de ``state``."""
        if not self.on or self.strength == 0.0:
            return state
        return apply(self.channel(state.n_qubits, qubits), state)


def werner_state(p: float) -> DensityMatrix:
    """p |Φ+⟩⟨Φ+| + (1 - p) I/4, p en [0, 1]."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise CanalInvalidoError(f"El parámetro de Werner debe estar en [0, 1] (llegó {p}).")
    return DensityMatrix(p * bell_state().matrix + (1.0 - p) * maximally_mixed(4).matrix)
