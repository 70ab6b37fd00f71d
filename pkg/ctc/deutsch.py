# ctc/deutsch.py
"""
Modelo de Deutsch para curvas temporales cerradas (CTC).

H = H_ch ⊗ H_tv: el factor cronológico (ch) es el índice izquierdo/lento,
el que recorre la CTC (tv) el derecho.

- Consistencia:  ρ = Tr_ch[U (ρ_in ⊗ ρ) U†]   (punto fijo del mapa inducido)
- Salida:        ρ_out = Tr_tv[U (ρ_in ⊗ ρ) U†]

Selección ante puntos fijos no únicos: se parte del estado maximalmente
mixto I/d. fixed_subspace_dim permite detectar la degeneración.
El modelo con postselección y la variante con compuerta quedan fuera.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from channels.canales import QuantumChannel, apply_to_matrix
from qmath.densidad import (
    DensityMatrix,
    DimensionError,
    Side,
    dump_matrix,
    parse_matrix,
    traza_parcial_matriz,
)
from utils import SimuladorError

logger = logging.getLogger(__name__)

TOL_UNITARIA = 1e-10
TOL_RESIDUO = 1e-10
TOL_AUTOVALOR = 1e-8
TOL_KRAUS = 1e-15
MAX_ITERACIONES = 100_000
CADA_CESARO = 100
DIM_MAXIMA = 256
FORMATO_CIRCUITO = "qsim-circuit v1"


class CircuitoInvalidoError(SimuladorError):
    """Circuito no unitario o con dimensiones incoherentes."""


class ConvergenciaError(SimuladorError):
    def __init__(self, mensaje: str, mejor_residuo: float):
        super().__init__(mensaje)
        self.mejor_residuo = mejor_residuo


class Method(Enum):
    CESARO_ITERATION = "cesaro"
    EIGEN_PROJECTION = "eigen"


@dataclass(frozen=True, eq=False)
class CtcCircuit:
    dim_ch: int
    dim_tv: int
    unitary: np.ndarray

    def __post_init__(self):
        if int(self.dim_ch) < 1 or int(self.dim_tv) < 2:
            raise CircuitoInvalidoError(f"Dimensiones inválidas: ch={self.dim_ch}, tv={self.dim_tv}.")
        dim = self.dim_ch * self.dim_tv
        if dim > DIM_MAXIMA:
            raise CircuitoInvalidoError(f"dim_ch·dim_tv = {dim} supera el máximo {DIM_MAXIMA}.")
        u = np.array(self.unitary, dtype=complex)
        if u.shape != (dim, dim):
            raise CircuitoInvalidoError(f"La unitaria es {u.shape}, se esperaba {(dim, dim)}.")
        defecto = float(np.max(np.abs(u.conj().T @ u - np.eye(dim))))
        if defecto > TOL_UNITARIA:
            raise CircuitoInvalidoError(f"U no es unitaria (‖U†U - I‖ = {defecto:.3e}).")
        u.setflags(write=False)
        object.__setattr__(self, "unitary", u)

    @property
    def dim(self) -> int:
        return self.dim_ch * self.dim_tv


@dataclass(frozen=True)
class FixedPointResult:
    rho: DensityMatrix
    residual: float
    fixed_subspace_dim: int
    method: Method
    iterations: int


def _chequear_entrada(circuit: CtcCircuit, rho_in: DensityMatrix) -> None:
    if rho_in.dim != circuit.dim_ch:
        raise DimensionError(f"rho_in tiene dim {rho_in.dim}, el factor ch tiene {circuit.dim_ch}.")


def _norma_traza(m: np.ndarray) -> float:
    h = (m + m.conj().T) / 2
    return float(np.sum(np.abs(np.linalg.eigvalsh(h))))


def induced_map(circuit: CtcCircuit, rho_in: DensityMatrix) -> QuantumChannel:
    """
    ρ ↦ Tr_ch[U (ρ_in ⊗ ρ) U†] en forma de Kraus.

    Con ρ_in = Σ λ_i |v_i⟩⟨v_i|:  K_ij[t, s] = √λ_i Σ_b ⟨j, t| U |b, s⟩ v_i[b].
    """
    _chequear_entrada(circuit, rho_in)
    dch, dtv = circuit.dim_ch, circuit.dim_tv
    u = circuit.unitary.reshape(dch, dtv, dch, dtv)
    valores, vectores = np.linalg.eigh(rho_in.matrix)

    ops = []
    for lam, v in zip(valores, vectores.T):
        if lam <= TOL_KRAUS:
            continue
        # bloque[j, t, s] = Σ_b U[j, t, b, s] v[b]
        bloque = np.sqrt(lam) * np.einsum("jtbs,b->jts", u, v)
        ops.extend(bloque[j] for j in range(dch))

    # renormaliza los pesos descartados por el recorte de λ
    suma = sum(k.conj().T @ k for k in ops)
    escala = float(np.real(np.trace(suma))) / dtv
    return QuantumChannel(dtv, dtv, tuple(k / np.sqrt(escala) for k in ops))


def superoperator(ch: QuantumChannel) -> np.ndarray:
    """Matriz S con vec(Φ(ρ)) = S vec(ρ), vec por filas: S = Σ K ⊗ conj(K)."""
    return sum(np.kron(k, k.conj()) for k in ch.kraus_ops)


def fixed_subspace_dimension(ch: QuantumChannel, tolerancia: float = TOL_AUTOVALOR) -> int:
    valores = scipy.linalg.eigvals(superoperator(ch))
    return max(1, int(np.count_nonzero(np.abs(valores - 1.0) <= tolerancia)))


def _residuo(ch: QuantumChannel, m: np.ndarray) -> float:
    return _norma_traza(apply_to_matrix(ch, m) - m)


def _como_densidad(m: np.ndarray) -> DensityMatrix:
    """Hermitiza, recorta autovalores negativos pequeños y renormaliza."""
    h = (m + m.conj().T) / 2
    valores, vectores = np.linalg.eigh(h)
    valores = np.clip(valores, 0.0, None)
    h = (vectores * valores) @ vectores.conj().T
    return DensityMatrix(h / np.real(np.trace(h)))


def _iterar(ch: QuantumChannel, max_iter: int, tolerancia: float) -> tuple[np.ndarray, float, int]:
    d = ch.dim_in
    rho = np.eye(d, dtype=complex) / d
    acumulado = np.zeros_like(rho)
    mejor, mejor_rho = np.inf, rho

    for k in range(max_iter + 1):
        siguiente = apply_to_matrix(ch, rho)
        residuo = _norma_traza(siguiente - rho)
        if residuo < mejor:
            mejor, mejor_rho = residuo, rho
        if residuo <= tolerancia / 100:
            return rho, residuo, k

        acumulado += rho
        if (k + 1) % CADA_CESARO == 0:
            promedio = acumulado / (k + 1)
            r_prom = _residuo(ch, promedio)
            if r_prom < mejor:
                mejor, mejor_rho = r_prom, promedio
            if r_prom <= tolerancia:
                return promedio, r_prom, k + 1
        rho = siguiente

    return mejor_rho, mejor, max_iter


def _proyectar(ch: QuantumChannel) -> np.ndarray:
    """Proyector espectral de I/d sobre el autoespacio de autovalor 1."""
    d = ch.dim_in
    s = superoperator(ch)
    valores, izquierdos, derechos = scipy.linalg.eig(s, left=True, right=True)
    indices = np.flatnonzero(np.abs(valores - 1.0) <= TOL_AUTOVALOR)
    if indices.size == 0:
        indices = np.array([int(np.argmin(np.abs(valores - 1.0)))])
    v1, w1 = derechos[:, indices], izquierdos[:, indices]
    proyector = v1 @ np.linalg.solve(w1.conj().T @ v1, w1.conj().T)
    semilla = (np.eye(d, dtype=complex) / d).reshape(-1)
    return (proyector @ semilla).reshape(d, d)


def solve_fixed_point(
    circuit: CtcCircuit,
    rho_in: DensityMatrix,
    *,
    metodo: Method | None = None,
    max_iter: int = MAX_ITERACIONES,
    tolerancia: float = TOL_RESIDUO,
) -> FixedPointResult:
    """
    Punto fijo de Deutsch. Por defecto itera (Cesàro desde I/d) y, si no llega
    al residuo pedido, cae a la proyección sobre el autoespacio de autovalor 1.
    """
    ch = induced_map(circuit, rho_in)
    multiplicidad = fixed_subspace_dimension(ch)
    mejor = np.inf

    if metodo in (None, Method.CESARO_ITERATION):
        m, residuo, iteraciones = _iterar(ch, max_iter, tolerancia)
        rho = _como_densidad(m)
        residuo = _residuo(ch, rho.matrix)
        mejor = min(mejor, residuo)
        if residuo <= tolerancia:
            logger.info("Punto fijo por iteración: %d pasos, residuo %.3e", iteraciones, residuo)
            return FixedPointResult(rho, residuo, multiplicidad, Method.CESARO_ITERATION, iteraciones)
        logger.warning("La iteración no convergió (residuo %.3e); se intenta la proyección.", residuo)

    if metodo in (None, Method.EIGEN_PROJECTION):
        rho = _como_densidad(_proyectar(ch))
        residuo = _residuo(ch, rho.matrix)
        mejor = min(mejor, residuo)
        if residuo <= tolerancia:
            logger.info("Punto fijo por proyección, residuo %.3e", residuo)
            return FixedPointResult(rho, residuo, multiplicidad, Method.EIGEN_PROJECTION, 0)

    raise ConvergenciaError(f"Ningún método alcanzó residuo ≤ {tolerancia:g} (mejor {mejor:.3e}).", mejor)


def circuit_output(circuit: CtcCircuit, rho_in: DensityMatrix, fp: FixedPointResult) -> DensityMatrix:
    _chequear_entrada(circuit, rho_in)
    if fp.rho.dim != circuit.dim_tv:
        raise DimensionError(f"El punto fijo tiene dim {fp.rho.dim}, el factor tv tiene {circuit.dim_tv}.")
    u = circuit.unitary
    total = u @ np.kron(rho_in.matrix, fp.rho.matrix) @ u.conj().T
    return _como_densidad(traza_parcial_matriz(total, circuit.dim_ch, circuit.dim_tv, Side.RIGHT))


def gauge_transform(circuit: CtcCircuit, v: np.ndarray) -> CtcCircuit:
    """U' = (I ⊗ V†) U (I ⊗ V); su punto fijo es V† ρ V."""
    w = np.kron(np.eye(circuit.dim_ch), np.asarray(v, dtype=complex))
    return CtcCircuit(circuit.dim_ch, circuit.dim_tv, w.conj().T @ circuit.unitary @ w)


# ---------------------------------------------------------------------------
# ARCHIVO DE CIRCUITO
#
#   # qsim-circuit v1
#   dim_ch 1
#   dim_tv 2
#   unitary
#   0+0i 1+0i
#   1+0i 0+0i
#   rho_in
#   1+0i
# ---------------------------------------------------------------------------


def parse_circuit_file(ruta: str) -> tuple[CtcCircuit, DensityMatrix]:
    dims: dict[str, int] = {}
    bloques: dict[str, list[str]] = {"unitary": [], "rho_in": []}
    actual = None
    with open(ruta, encoding="utf-8") as f:
        for linea in f:
            linea = linea.strip()
            if not linea or linea.startswith("#"):
                continue
            clave, *resto = linea.split()
            if clave in ("dim_ch", "dim_tv"):
                if len(resto) != 1:
                    raise CircuitoInvalidoError(f"Línea mal formada: {linea!r}")
                try:
                    dims[clave] = int(resto[0])
                except ValueError:
                    raise CircuitoInvalidoError(f"{clave} debe ser entero: {linea!r}")
                actual = None
            elif clave in bloques and not resto:
                actual = clave
            elif actual is not None:
                bloques[actual].append(linea)
            else:
                raise CircuitoInvalidoError(f"Línea inesperada en {os.path.basename(ruta)}: {linea!r}")

    faltan = [c for c in ("dim_ch", "dim_tv") if c not in dims] + [b for b, v in bloques.items() if not v]
    if faltan:
        raise CircuitoInvalidoError(f"Faltan secciones en el circuito: {', '.join(faltan)}.")

    circuito = CtcCircuit(dims["dim_ch"], dims["dim_tv"], parse_matrix(bloques["unitary"]))
    rho_in = DensityMatrix(parse_matrix(bloques["rho_in"]))
    _chequear_entrada(circuito, rho_in)
    return circuito, rho_in


def write_circuit_file(ruta: str, circuit: CtcCircuit, rho_in: DensityMatrix) -> None:
    with open(ruta, "w", encoding="utf-8", newline="") as f:
        f.write(f"# {FORMATO_CIRCUITO}\n")
        f.write(f"dim_ch {circuit.dim_ch}\n")
        f.write(f"dim_tv {circuit.dim_tv}\n")
        f.write("unitary\n")
        f.write(dump_matrix(circuit.unitary))
        f.write("rho_in\n")
        f.write(dump_matrix(rho_in.matrix))
