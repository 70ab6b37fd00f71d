# games/chsh.py
"""
Observables dicotómicos, muestreo de resultados y estimación CHSH.

EXP = |<A1,B1> + <A1,B2> + <A2,B1> - <A2,B2>|

- Observables en el plano Z-X: O(θ) = cos θ Z + sin θ X.
- Rondas: el mismo número por par de ajustes, ajustes ciclados en orden fijo.
- Cada par de ajustes k usa su propio substream derivado de (semilla, k);
  la ejecución secuencial y la paralela dan exactamente lo mismo.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from qmath.densidad import (
    DensityMatrix,
    DimensionError,
    EstadoInvalidoError,
    Side,
    traza_parcial_matriz,
)
from utils import leer_ajuste_int

logger = logging.getLogger(__name__)

Z = np.array([[1, 0], [0, -1]], dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)

OUTCOMES = (1, -1)
TOL_PROB = 1e-12
TSIRELSON = 2 * math.sqrt(2)
COTA_CLASICA = 2.0


# ---------------------------------------------------------------------------
# TIPOS
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DichotomicObservable:
    angle: float

    @property
    def matrix(self) -> np.ndarray:
        return math.cos(self.angle) * Z + math.sin(self.angle) * X

    def projector(self, outcome: int) -> np.ndarray:
        return (I2 + outcome * self.matrix) / 2


@dataclass(frozen=True)
class SettingPair:
    a_index: int
    b_index: int

    def __post_init__(self):
        if self.a_index not in (1, 2) or self.b_index not in (1, 2):
            raise DimensionError(f"Índices de ajuste fuera de rango: {self.a_index}, {self.b_index}.")

    @property
    def sign(self) -> int:
        return -1 if (self.a_index, self.b_index) == (2, 2) else 1


# orden canónico de los pares; la ronda i usa PAIRS[i % 4]
PAIRS = tuple(SettingPair(a, b) for a, b in ((1, 1), (1, 2), (2, 1), (2, 2)))


@dataclass(frozen=True)
class ChshSettings:
    angles_a: tuple[float, float]
    angles_b: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "angles_a", tuple(float(t) for t in self.angles_a))
        object.__setattr__(self, "angles_b", tuple(float(t) for t in self.angles_b))
        if len(self.angles_a) != 2 or len(self.angles_b) != 2:
            raise DimensionError("Se necesitan exactamente dos ángulos por parte.")

    @property
    def observables_a(self) -> tuple[DichotomicObservable, DichotomicObservable]:
        return tuple(DichotomicObservable(t) for t in self.angles_a)

    @property
    def observables_b(self) -> tuple[DichotomicObservable, DichotomicObservable]:
        return tuple(DichotomicObservable(t) for t in self.angles_b)

    def pair(self, par: SettingPair) -> tuple[DichotomicObservable, DichotomicObservable]:
        return (
            DichotomicObservable(self.angles_a[par.a_index - 1]),
            DichotomicObservable(self.angles_b[par.b_index - 1]),
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.angles_a + self.angles_b


def canonical_settings() -> ChshSettings:
    """θ_A ∈ {0, π/2}, θ_B ∈ {π/4, -π/4}: saturan 2√2 con |Φ+⟩."""
    return ChshSettings((0.0, math.pi / 2), (math.pi / 4, -math.pi / 4))


def _como_ajustes(settings_a, settings_b=None) -> ChshSettings:
    if isinstance(settings_a, ChshSettings):
        return settings_a

    def angulo(o):
        return o.angle if isinstance(o, DichotomicObservable) else float(o)

    return ChshSettings(tuple(angulo(o) for o in settings_a), tuple(angulo(o) for o in settings_b))


@dataclass(frozen=True)
class ChshEstimate:
    exp: float
    stderr: float
    counts_per_pair: tuple[int, int, int, int]
    per_pair_means: tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.per_pair_means) != 4 or len(self.counts_per_pair) != 4:
            raise EstadoInvalidoError("ChshEstimate necesita 4 medias y 4 conteos.")
        if any(not -1.0 <= m <= 1.0 for m in self.per_pair_means):
            raise EstadoInvalidoError(f"Medias fuera de [-1, 1]: {self.per_pair_means}.")
        if abs(self.exp - chsh_from_means(self.per_pair_means)) > 1e-12:
            raise EstadoInvalidoError("exp no coincide con las medias por par.")

    @classmethod
    def from_products(cls, productos: Sequence[np.ndarray]) -> "ChshEstimate":
        """
        Construye la estimación a partir de los productos x·y (±1) de cada par.

        La varianza de cada par nunca baja de la binomial con un acierto y un
        fallo ficticios, 1 - (Σxy / (n + 2))²: con pocas rondas que coinciden
        todas, el error estándar no se anula.
        """
        medias, varianzas, conteos = [], [], []
        for xy in productos:
            xy = np.asarray(xy, dtype=float)
            n = int(xy.size)
            if n == 0:
                raise EstadoInvalidoError("Un par de ajustes no tiene rondas.")
            muestral = float(xy.var(ddof=1)) if n > 1 else 0.0
            cota = 1.0 - (float(xy.sum()) / (n + 2)) ** 2
            medias.append(float(xy.mean()))
            varianzas.append(max(muestral, cota))
            conteos.append(n)
        stderr = math.sqrt(sum(v / n for v, n in zip(varianzas, conteos)))
        return cls(chsh_from_means(medias), stderr, tuple(conteos), tuple(medias))

    @property
    def violates(self) -> bool:
        return self.exp > COTA_CLASICA


def chsh_from_means(medias: Sequence[float]) -> float:
    return abs(sum(par.sign * m for par, m in zip(PAIRS, medias)))


# ---------------------------------------------------------------------------
# SUBSTREAMS Y PARALELISMO
# ---------------------------------------------------------------------------


def derive_stream(seed: int, index: int) -> np.random.Generator:
    """Substream ``index`` de la semilla maestra (spawn key de SeedSequence)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),)))


def derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),)).generate_state(1, np.uint64)[0])


def workers_por_defecto() -> int:
    return max(1, leer_ajuste_int("QSIM_WORKERS", 1))


def map_ordered(funcion: Callable, tareas: Iterable, workers: int | None = None) -> list:
    """map que preserva el orden; paraleliza con hilos si workers > 1."""
    tareas = list(tareas)
    workers = workers or workers_por_defecto()
    if workers <= 1 or len(tareas) <= 1:
        return [funcion(t) for t in tareas]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(funcion, tareas))


# ---------------------------------------------------------------------------
# DISTRIBUCIONES EXACTAS
# ---------------------------------------------------------------------------


def _reducir_a_par(m: np.ndarray) -> np.ndarray:
    """Estado de los qubits 0 y 1 (A, B) de un registro mayor."""
    dim = m.shape[0]
    if dim == 4:
        return m
    if dim % 4 != 0:
        raise DimensionError(f"dim {dim} no contiene un par de qubits.")
    return traza_parcial_matriz(m, 4, dim // 4, Side.RIGHT)


def _limpiar_probabilidades(p: np.ndarray) -> np.ndarray:
    if p.min() < -TOL_PROB:
        raise EstadoInvalidoError(f"Probabilidad negativa {p.min():.3e}.")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def pair_distribution(m: np.ndarray, a: DichotomicObservable, b: DichotomicObservable) -> np.ndarray:
    """p[x, y] = Tr[ρ (P_x ⊗ P_y ⊗ I)], índice 0 = +1, 1 = -1; ρ puede ser mayor que el par."""
    par = _reducir_a_par(np.asarray(m))
    p = np.empty((2, 2))
    for i, x in enumerate(OUTCOMES):
        for j, y in enumerate(OUTCOMES):
            p[i, j] = np.real(np.trace(par @ np.kron(a.projector(x), b.projector(y))))
    return _limpiar_probabilidades(p)


def joint_outcome_distribution(
    state: DensityMatrix, a: DichotomicObservable, b: DichotomicObservable
) -> np.ndarray:
    if state.dim != 4:
        raise DimensionError(f"Se esperaba un estado de dos qubits (dim 4), llegó {state.dim}.")
    return pair_distribution(state.matrix, a, b)


def correlation(state: DensityMatrix, a: DichotomicObservable, b: DichotomicObservable) -> float:
    if state.dim != 4:
        raise DimensionError(f"Se esperaba dim 4, llegó {state.dim}.")
    return float(np.real(np.trace(state.matrix @ np.kron(a.matrix, b.matrix))))


def chsh_operator(settings_a, settings_b=None) -> np.ndarray:
    ajustes = _como_ajustes(settings_a, settings_b)
    op = np.zeros((4, 4), dtype=complex)
    for par in PAIRS:
        a, b = ajustes.pair(par)
        op += par.sign * np.kron(a.matrix, b.matrix)
    return op


def exact_chsh(state: DensityMatrix, settings_a, settings_b=None) -> float:
    if state.dim != 4:
        raise DimensionError(f"Se esperaba dim 4, llegó {state.dim}.")
    ajustes = _como_ajustes(settings_a, settings_b)
    return abs(sum(par.sign * correlation(state, *ajustes.pair(par)) for par in PAIRS))


# ---------------------------------------------------------------------------
# MUESTREO
# ---------------------------------------------------------------------------


def cells_from_uniforms(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Celda (0..n-1) por inversión de la acumulada."""
    acumulada = np.cumsum(np.ravel(probs))
    celdas = np.searchsorted(acumulada, u, side="right")
    return np.minimum(celdas, acumulada.size - 1)


def _signos(celdas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xs = np.where(celdas // 2 == 0, 1, -1).astype(np.int8)
    ys = np.where(celdas % 2 == 0, 1, -1).astype(np.int8)
    return xs, ys


def sample_round(
    state: DensityMatrix, a: DichotomicObservable, b: DichotomicObservable, rng: np.random.Generator
) -> tuple[int, int]:
    probs = joint_outcome_distribution(state, a, b)
    celda = int(cells_from_uniforms(probs, np.array([rng.random()]))[0])
    xs, ys = _signos(np.array([celda]))
    return int(xs[0]), int(ys[0])


def sample_rounds(
    state: DensityMatrix, a: DichotomicObservable, b: DichotomicObservable, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    probs = joint_outcome_distribution(state, a, b)
    return _signos(cells_from_uniforms(probs, rng.random(int(n))))


def estimate_chsh(
    state: DensityMatrix,
    settings_a,
    settings_b,
    rounds_per_pair: int,
    seed: int,
    workers: int | None = None,
) -> ChshEstimate:
    if int(rounds_per_pair) < 1:
        raise DimensionError("rounds_per_pair debe ser ≥ 1.")
    ajustes = _como_ajustes(settings_a, settings_b)

    def muestrear(k: int) -> np.ndarray:
        a, b = ajustes.pair(PAIRS[k])
        xs, ys = sample_rounds(state, a, b, rounds_per_pair, derive_stream(seed, k))
        return xs.astype(float) * ys

    productos = map_ordered(muestrear, range(len(PAIRS)), workers)
    estimacion = ChshEstimate.from_products(productos)
    logger.debug("EXP estimado %.6f ± %.6f", estimacion.exp, estimacion.stderr)
    return estimacion


# ---------------------------------------------------------------------------
# ESTRATEGIAS CLÁSICAS
# ---------------------------------------------------------------------------


def strategy_value(a1: int, a2: int, b1: int, b2: int) -> int:
    return abs(a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2)


def classical_maximizers() -> list[tuple[int, int, int, int]]:
    estrategias = list(itertools.product(OUTCOMES, repeat=4))
    mejor = max(strategy_value(*e) for e in estrategias)
    return [e for e in estrategias if strategy_value(*e) == mejor]


def classical_strategy_max() -> float:
    """Máximo sobre las 16 estrategias deterministas (a1, a2, b1, b2)."""
    return float(max(strategy_value(*e) for e in itertools.product(OUTCOMES, repeat=4)))
