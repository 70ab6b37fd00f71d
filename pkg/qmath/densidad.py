# qmath/densidad.py
"""
Álgebra lineal densa y estados cuánticos de dimensión finita.

Convenciones (se fijan una sola vez, aquí):

- Las matrices complejas son ``numpy.ndarray`` de ``complex`` (fila mayor).
- Qubit 0 es el índice más significativo: en ``a ⊗ b`` el factor ``a``
  indexa el lado izquierdo (lento) del producto de Kronecker.
- Todas las entropías se devuelven en NATS (logaritmo natural), no en bits.
- Autovalores en [-1e-10, 0) se tratan como 0; por debajo es un error.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

from utils import SimuladorError, leer_ajuste_int

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# TOLERANCIAS Y LÍMITES
# ---------------------------------------------------------------------------

TOL_HERMITICA = 1e-12
TOL_TRAZA = 1e-12
TOL_NORMA = 1e-12
TOL_POSITIVIDAD = 1e-10
TOL_PUREZA = 1e-10
TOL_PPT = 1e-10

MAX_QUBITS_POR_DEFECTO = 12


class DimensionError(SimuladorError):
    """Dimensiones incompatibles o no soportadas."""


class LimiteRegistroError(SimuladorError):
    """El registro supera QSIM_MAX_QUBITS."""


class EstadoInvalidoError(SimuladorError):
    """La matriz no cumple los invariantes de estado cuántico."""


class PurezaError(SimuladorError):
    """Se pidió una medida de estados puros sobre un estado mezcla."""


def max_qubits() -> int:
    return leer_ajuste_int("QSIM_MAX_QUBITS", MAX_QUBITS_POR_DEFECTO)


def max_dim() -> int:
    return 2 ** max_qubits()


def chequear_limite(dim: int) -> None:
    if dim > max_dim():
        raise LimiteRegistroError(
            f"Dimensión {dim} supera el máximo configurado 2^{max_qubits()} = {max_dim()}."
        )


def _qubits_de(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise DimensionError(f"La dimensión {dim} no corresponde a un registro de qubits.")
    return n


# ---------------------------------------------------------------------------
# TIPOS
# ---------------------------------------------------------------------------


class Side(Enum):
    """Factor que se traza (se descarta) en una traza parcial."""

    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class Bipartition:
    dim_left: int
    dim_right: int

    def __post_init__(self):
        if int(self.dim_left) < 1 or int(self.dim_right) < 1:
            raise DimensionError(
                f"Bipartición inválida: {self.dim_left} x {self.dim_right}."
            )

    @property
    def dim(self) -> int:
        return self.dim_left * self.dim_right

    @property
    def trivial(self) -> bool:
        return self.dim_left < 2 or self.dim_right < 2

    @classmethod
    def qubits(cls, n_left: int, n_right: int) -> "Bipartition":
        return cls(2**n_left, 2**n_right)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if v.size < 1:
            raise EstadoInvalidoError("Vector de estado vacío.")
        chequear_limite(v.size)
        norma = np.linalg.norm(v)
        if abs(norma - 1.0) > TOL_NORMA:
            raise EstadoInvalidoError(f"Norma {norma!r} distinta de 1.")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def normalizado(cls, vector: Iterable[complex]) -> "PureState":
        v = np.array(list(vector) if not isinstance(vector, np.ndarray) else vector, dtype=complex)
        return cls(v / np.linalg.norm(v))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Operador positivo de traza 1. Inmutable: la matriz queda de solo lectura."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise EstadoInvalidoError(f"Se esperaba una matriz cuadrada, llegó {m.shape}.")
        chequear_limite(m.shape[0])

        defecto_herm = float(np.max(np.abs(m - m.conj().T)))
        if defecto_herm > TOL_HERMITICA:
            raise EstadoInvalidoError(f"Matriz no hermítica (defecto {defecto_herm:.3e}).")
        traza = np.trace(m)
        if abs(traza - 1.0) > TOL_TRAZA:
            raise EstadoInvalidoError(f"Traza {traza!r} distinta de 1.")

        m = (m + m.conj().T) / 2
        minimo = float(np.linalg.eigvalsh(m)[0])
        if minimo < -TOL_POSITIVIDAD:
            raise EstadoInvalidoError(f"Autovalor negativo {minimo:.3e}.")

        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return _qubits_de(self.dim)

    def allclose(self, otro: "DensityMatrix", atol: float = 1e-12) -> bool:
        return self.dim == otro.dim and bool(np.allclose(self.matrix, otro.matrix, atol=atol, rtol=0))


def como_matriz(estado) -> np.ndarray:
    if isinstance(estado, DensityMatrix):
        return estado.matrix
    if isinstance(estado, PureState):
        return np.outer(estado.amplitudes, estado.amplitudes.conj())
    return np.asarray(estado, dtype=complex)


# ---------------------------------------------------------------------------
# CONSTRUCTORES
# ---------------------------------------------------------------------------


def basis_state(indice: int, dim: int) -> DensityMatrix:
    if not 0 <= indice < dim:
        raise DimensionError(f"Índice {indice} fuera de la base de dimensión {dim}.")
    m = np.zeros((dim, dim), dtype=complex)
    m[indice, indice] = 1.0
    return DensityMatrix(m)


def maximally_mixed(dim: int) -> DensityMatrix:
    return DensityMatrix(np.eye(dim, dtype=complex) / dim)


def bell_vector() -> PureState:
    """|Φ+⟩ = (|00⟩ + |11⟩)/√2."""
    return PureState(np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2))


def bell_state() -> DensityMatrix:
    return bell_vector().density()


def ghz_vector(n_qubits: int) -> PureState:
    if n_qubits < 1:
        raise DimensionError("GHZ necesita al menos un qubit.")
    v = np.zeros(2**n_qubits, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return PureState(v)


def ghz_state(n_qubits: int) -> DensityMatrix:
    return ghz_vector(n_qubits).density()


def plus_state() -> DensityMatrix:
    return PureState(np.array([1, 1], dtype=complex) / np.sqrt(2)).density()


def product_state(*factores: DensityMatrix) -> DensityMatrix:
    if not factores:
        raise DimensionError("product_state necesita al menos un factor.")
    out = factores[0]
    for f in factores[1:]:
        out = tensor_product(out, f)
    return out


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(dim, random_state=rng)


def random_pure_state(dim: int, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState.normalizado(v)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre: G G† / Tr(G G†)."""
    k = rank or dim
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


# ---------------------------------------------------------------------------
# OPERACIONES
# ---------------------------------------------------------------------------


def tensor_product(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    chequear_limite(a.dim * b.dim)
    return DensityMatrix(np.kron(a.matrix, b.matrix))


def traza_parcial_matriz(m: np.ndarray, dim_left: int, dim_right: int, side: Side) -> np.ndarray:
    """Traza parcial sobre una matriz cruda; ``side`` indica el factor que se traza."""
    t = np.asarray(m).reshape(dim_left, dim_right, dim_left, dim_right)
    if side is Side.RIGHT:
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def partial_trace(state: DensityMatrix, part: Bipartition, side: Side) -> DensityMatrix:
    """Traza el factor ``side``; devuelve el estado del factor restante."""
    if part.dim != state.dim:
        raise DimensionError(
            f"Bipartición {part.dim_left}x{part.dim_right} incompatible con dim {state.dim}."
        )
    return DensityMatrix(traza_parcial_matriz(state.matrix, part.dim_left, part.dim_right, side))


def partial_transpose(state: DensityMatrix, part: Bipartition) -> np.ndarray:
    """Transpuesta parcial sobre el factor derecho."""
    if part.dim != state.dim:
        raise DimensionError("Bipartición incompatible con el estado.")
    dl, dr = part.dim_left, part.dim_right
    t = state.matrix.reshape(dl, dr, dl, dr).transpose(0, 3, 2, 1)
    return t.reshape(state.dim, state.dim)


def _recortar_espectro(valores: np.ndarray) -> np.ndarray:
    valores = np.asarray(valores, dtype=float)
    if valores.size and valores.min() < -TOL_POSITIVIDAD:
        raise EstadoInvalidoError(f"Autovalor negativo {valores.min():.3e} en el espectro.")
    return np.clip(valores, 0.0, None)


def _entropia_espectro(valores: np.ndarray) -> float:
    p = _recortar_espectro(valores)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(state: DensityMatrix) -> float:
    """S(ρ) = -Tr ρ ln ρ, en nats."""
    s = _entropia_espectro(np.linalg.eigvalsh(state.matrix))
    return min(max(s, 0.0), float(np.log(state.dim)))


def purity(state: DensityMatrix) -> float:
    return float(np.real(np.trace(state.matrix @ state.matrix)))


def _exigir_puro(state: DensityMatrix) -> None:
    p = purity(state)
    if p < 1.0 - TOL_PUREZA:
        raise PurezaError(
            f"El estado no es puro: Tr(ρ²) = {p:.12f} (defecto {1.0 - p:.3e} > {TOL_PUREZA:g})."
        )


def entanglement_entropy(state: DensityMatrix, part: Bipartition, side: Side = Side.RIGHT) -> float:
    _exigir_puro(state)
    return von_neumann_entropy(partial_trace(state, part, side))


def _vector_principal(state: DensityMatrix) -> np.ndarray:
    valores, vectores = np.linalg.eigh(state.matrix)
    return vectores[:, int(np.argmax(valores))]


def permute_qubits(psi: np.ndarray, orden: Sequence[int]) -> np.ndarray:
    """Reordena los qubits de un vector: el nuevo qubit k es el antiguo orden[k]."""
    n = len(orden)
    return np.asarray(psi).reshape([2] * n).transpose(list(orden)).reshape(-1)


def _entropia_corte(psi: np.ndarray, n: int, subconjunto: tuple[int, ...]) -> float:
    resto = [q for q in range(n) if q not in subconjunto]
    v = permute_qubits(psi, list(subconjunto) + resto)
    schmidt = np.linalg.svd(v.reshape(2 ** len(subconjunto), 2 ** len(resto)), compute_uv=False)
    return _entropia_espectro(schmidt**2)


def best_bipartition(state: DensityMatrix) -> tuple[float, tuple[int, ...]]:
    """
    Máximo de la entropía de entrelazamiento sobre particiones por subconjuntos
    de qubits. Solo se recorren los subconjuntos que contienen el qubit 0
    (2^(n-1) - 1 cortes no triviales); el complemento da el mismo valor.
    """
    n = state.n_qubits
    _exigir_puro(state)
    if n < 2:
        return 0.0, ()
    psi = _vector_principal(state)
    mejor, corte = -1.0, ()
    for k in range(0, n - 1):
        for otros in itertools.combinations(range(1, n), k):
            sub = (0,) + otros
            s = _entropia_corte(psi, n, sub)
            if s > mejor:
                mejor, corte = s, sub
    logger.debug("Mejor corte %s con S = %.6f nats", corte, mejor)
    return max(mejor, 0.0), corte


def max_entanglement_entropy(state: DensityMatrix) -> float:
    return best_bipartition(state)[0]


def is_entangled_2q(state: DensityMatrix) -> bool:
    """Criterio PPT (exacto para 2x2)."""
    if state.dim != 4:
        raise DimensionError(f"is_entangled_2q solo admite dim 4 (llegó {state.dim}).")
    pt = partial_transpose(state, Bipartition(2, 2))
    return bool(np.linalg.eigvalsh(pt)[0] < -TOL_PPT)


def purify(rho: DensityMatrix) -> PureState:
    """|ψ⟩ = Σ √λ_i |v_i⟩ ⊗ |i⟩; Tr_derecha |ψ⟩⟨ψ| = ρ."""
    chequear_limite(rho.dim * rho.dim)
    valores, vectores = np.linalg.eigh(rho.matrix)
    valores = _recortar_espectro(valores)
    psi = np.zeros(rho.dim * rho.dim, dtype=complex)
    for i, lam in enumerate(valores):
        if lam > 0:
            psi += np.sqrt(lam) * np.kron(vectores[:, i], np.eye(rho.dim)[i])
    return PureState.normalizado(psi)


def trace_distance(a, b) -> float:
    d = como_matriz(a) - como_matriz(b)
    d = (d + d.conj().T) / 2
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(d))))


# ---------------------------------------------------------------------------
# VOLCADO TEXTUAL (golden files, formato de circuitos)
# ---------------------------------------------------------------------------


def _fmt_entrada(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}i"


def _leer_entrada(token: str) -> complex:
    t = token.strip()
    if t.endswith("i"):
        t = t[:-1] + "j"
    try:
        return complex(t)
    except ValueError:
        raise DimensionError(f"Entrada compleja ilegible: {token!r}")


def dump_matrix(m) -> str:
    """Una fila por línea, entradas 're±im i' con 17 cifras significativas."""
    arr = como_matriz(m)
    if arr.ndim != 2:
        raise DimensionError("dump_matrix espera una matriz.")
    return "\n".join(" ".join(_fmt_entrada(complex(z)) for z in fila) for fila in arr) + "\n"


def parse_matrix(texto: str | Sequence[str]) -> np.ndarray:
    lineas = texto.splitlines() if isinstance(texto, str) else list(texto)
    filas = []
    for linea in lineas:
        linea = linea.strip()
        if not linea or linea.startswith("#"):
            continue
        filas.append([_leer_entrada(tok) for tok in linea.split()])
    if not filas:
        raise DimensionError("Matriz vacía.")
    ancho = len(filas[0])
    if any(len(f) != ancho for f in filas):
        raise DimensionError("Filas de distinta longitud en la matriz.")
    return np.array(filas, dtype=complex)
