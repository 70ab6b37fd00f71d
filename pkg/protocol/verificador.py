# protocol/verificador.py
"""
Simulación LOCC verificador / probadores.

El verificador C plantea preguntas (1 o 2) a A y B por canal clásico, recibe
respuestas ±1, puede encender el interruptor de decoherencia y guarda todo en
una transcripción. Tres máquinas bajo prueba:

- SEPARABLE_PROVERS: A mide solo su qubit; B mide el suyo ya condicionado.
- MONOLITHIC: las respuestas salen de la distribución conjunta del estado
  completo (opcionalmente un |AB⟩ global cuya reducción al par es ρ).
- CLASSICAL_CORRELATED: tabla de estrategias deterministas, quizá mezcladas.

Todas comparten el mismo motor de Born en proceso; no hay procesos ni red
separados. La indecidibilidad se ILUSTRA con la identidad de distribuciones,
no se re-demuestra; solo el predicado CHSH está en alcance.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import chi2, chi2_contingency

from channels.canales import DecoherenceSwitch
from games.chsh import (
    OUTCOMES,
    PAIRS,
    ChshEstimate,
    ChshSettings,
    DichotomicObservable,
    cells_from_uniforms,
    classical_maximizers,
    derive_stream,
    map_ordered,
    pair_distribution,
)
from qmath.densidad import (
    DensityMatrix,
    DimensionError,
    Side,
    purify,
    traza_parcial_matriz,
)
from utils import SimuladorError

logger = logging.getLogger(__name__)

ALPHA_POR_DEFECTO = 0.01
MINIMO_ESPERADO = 5.0
Z_CERTIFICACION = 5.0
FORMATO_TRANSCRIPCION = "qsim-transcript v1"

COLUMNAS_TRANSCRIPCION = [
    "round_index",
    "question_a",
    "question_b",
    "answer_a",
    "answer_b",
    "hdec_on",
]


class MaquinaInvalidaError(SimuladorError):
    """Combinación máquina / estado no válida."""


class TranscripcionIncomparableError(SimuladorError):
    """Las transcripciones no comparten ajustes o esquema del interruptor."""


class FormatoTranscripcionError(SimuladorError):
    """Archivo de transcripción mal formado."""


# ---------------------------------------------------------------------------
# TIPOS
# ---------------------------------------------------------------------------


class MachineKind(Enum):
    SEPARABLE_PROVERS = "separable"
    MONOLITHIC = "monolithic"
    CLASSICAL_CORRELATED = "classical"


class Decision(Enum):
    INDISTINGUISHABLE = "indistinguishable"
    DISTINGUISHED = "distinguished"


class SeparabilityClaim(Enum):
    """Lo único que C puede afirmar. No existe variante 'separable certificado'."""

    CANNOT_CERTIFY = "cannot_certify"
    CHANNEL_CERTIFIED = "channel_certified"


@dataclass(frozen=True, eq=False)
class MachineSpec:
    kind: MachineKind
    shared_state: DensityMatrix | None = None
    strategies: tuple = ()
    weights: tuple = ()
    global_state: DensityMatrix | None = None

    def __post_init__(self):
        if self.kind is MachineKind.CLASSICAL_CORRELATED:
            self._validar_clasica()
            return
        if self.shared_state is None or self.shared_state.dim != 4:
            raise MaquinaInvalidaError("Las máquinas cuánticas necesitan un estado de dos qubits.")
        if self.global_state is not None:
            if self.kind is not MachineKind.MONOLITHIC:
                raise MaquinaInvalidaError("Solo la máquina monolítica admite un estado global.")
            g = self.global_state
            if g.dim % 4 != 0 or g.dim == 4:
                raise MaquinaInvalidaError("El estado global debe contener el par y un entorno.")
            reducido = traza_parcial_matriz(g.matrix, 4, g.dim // 4, Side.RIGHT)
            if not np.allclose(reducido, self.shared_state.matrix, atol=1e-10, rtol=0):
                raise MaquinaInvalidaError("La reducción del estado global no coincide con el par.")

    def _validar_clasica(self) -> None:
        if not self.strategies:
            raise MaquinaInvalidaError("La máquina clásica necesita al menos una estrategia.")
        estrategias = tuple(tuple(int(s) for s in e) for e in self.strategies)
        for e in estrategias:
            if len(e) != 4 or any(s not in OUTCOMES for s in e):
                raise MaquinaInvalidaError(f"Estrategia inválida {e}: se esperan 4 signos ±1.")
        pesos = self.weights or tuple([1.0 / len(estrategias)] * len(estrategias))
        pesos = tuple(float(w) for w in pesos)
        if len(pesos) != len(estrategias) or min(pesos) < 0 or abs(sum(pesos) - 1.0) > 1e-12:
            raise MaquinaInvalidaError("Los pesos deben ser no negativos y sumar 1.")
        object.__setattr__(self, "strategies", estrategias)
        object.__setattr__(self, "weights", pesos)

    # -- constructores ------------------------------------------------------

    @classmethod
    def separable(cls, rho: DensityMatrix) -> "MachineSpec":
        return cls(MachineKind.SEPARABLE_PROVERS, shared_state=rho)

    @classmethod
    def monolithic(cls, rho: DensityMatrix) -> "MachineSpec":
        return cls(MachineKind.MONOLITHIC, shared_state=rho)

    @classmethod
    def monolithic_purified(cls, rho: DensityMatrix) -> "MachineSpec":
        """'Conspiración': A y B son componentes de un |AB⟩ global puro."""
        return cls(MachineKind.MONOLITHIC, shared_state=rho, global_state=purify(rho).density())

    @classmethod
    def classical(cls, strategies: Sequence[Sequence[int]], weights: Sequence[float] = ()) -> "MachineSpec":
        return cls(MachineKind.CLASSICAL_CORRELATED, strategies=tuple(strategies), weights=tuple(weights))

    @property
    def is_quantum(self) -> bool:
        return self.kind is not MachineKind.CLASSICAL_CORRELATED

    @property
    def opaque_id(self) -> str:
        h = hashlib.sha256(self.kind.value.encode())
        for estado in (self.shared_state, self.global_state):
            if estado is not None:
                h.update(np.ascontiguousarray(estado.matrix).tobytes())
        h.update(repr((self.strategies, self.weights)).encode())
        return h.hexdigest()[:16]


def imitacion_clasica() -> MachineSpec:
    """Mezcla uniforme de las estrategias deterministas con suma CHSH = +2."""
    positivas = [e for e in classical_maximizers() if e[0] * (e[2] + e[3]) + e[1] * (e[2] - e[3]) == 2]
    return MachineSpec.classical(positivas)


@dataclass(frozen=True)
class RoundRecord:
    question_a: int
    question_b: int
    answer_a: int
    answer_b: int
    hdec_on: bool
    round_index: int


@dataclass(frozen=True, eq=False)
class Transcript:
    machine_label_hidden: str
    master_seed: int
    settings: ChshSettings
    question_a: np.ndarray
    question_b: np.ndarray
    answer_a: np.ndarray
    answer_b: np.ndarray
    hdec_on: np.ndarray

    def __post_init__(self):
        cols = {}
        for nombre, dtype in (
            ("question_a", np.int8),
            ("question_b", np.int8),
            ("answer_a", np.int8),
            ("answer_b", np.int8),
            ("hdec_on", bool),
        ):
            arr = np.array(getattr(self, nombre), dtype=dtype).reshape(-1)
            arr.setflags(write=False)
            cols[nombre] = arr
        n = cols["question_a"].size
        if n == 0:
            raise FormatoTranscripcionError("Una transcripción necesita al menos una ronda.")
        if any(c.size != n for c in cols.values()):
            raise FormatoTranscripcionError("Columnas de distinta longitud.")
        for nombre in ("question_a", "question_b"):
            if not np.isin(cols[nombre], (1, 2)).all():
                raise FormatoTranscripcionError(f"{nombre} fuera de {{1, 2}}.")
        for nombre in ("answer_a", "answer_b"):
            if not np.isin(cols[nombre], OUTCOMES).all():
                raise FormatoTranscripcionError(f"{nombre} fuera de {{+1, -1}}.")
        for nombre, arr in cols.items():
            object.__setattr__(self, nombre, arr)

    def __len__(self) -> int:
        return int(self.question_a.size)

    @property
    def rounds(self) -> tuple[RoundRecord, ...]:
        return tuple(
            RoundRecord(int(qa), int(qb), int(xa), int(yb), bool(h), i)
            for i, (qa, qb, xa, yb, h) in enumerate(
                zip(self.question_a, self.question_b, self.answer_a, self.answer_b, self.hdec_on)
            )
        )

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "round_index": np.arange(len(self)),
                "question_a": self.question_a.astype(int),
                "question_b": self.question_b.astype(int),
                "answer_a": self.answer_a.astype(int),
                "answer_b": self.answer_b.astype(int),
                "hdec_on": self.hdec_on.astype(int),
            },
            columns=COLUMNAS_TRANSCRIPCION,
        )

    def same_content(self, otra: "Transcript") -> bool:
        return (
            self.machine_label_hidden == otra.machine_label_hidden
            and self.master_seed == otra.master_seed
            and self.settings == otra.settings
            and all(
                np.array_equal(getattr(self, c), getattr(otra, c))
                for c in ("question_a", "question_b", "answer_a", "answer_b", "hdec_on")
            )
        )


@dataclass(frozen=True)
class DiscriminationVerdict:
    chi_square: float
    degrees_of_freedom: int
    p_value: float
    decision: Decision
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise SimuladorError(f"p-valor fuera de [0, 1]: {self.p_value}.")
        esperado = Decision.DISTINGUISHED if self.p_value < self.alpha else Decision.INDISTINGUISHABLE
        if self.decision is not esperado:
            raise SimuladorError("La decisión no corresponde a p-valor y alpha.")


# ---------------------------------------------------------------------------
# MOTOR DE BORN
# ---------------------------------------------------------------------------


def sequential_distribution(
    m: np.ndarray, a: DichotomicObservable, b: DichotomicObservable
) -> tuple[np.ndarray, np.ndarray]:
    """
    Camino de probadores separados: A mide su qubit (p_A(x)); B mide el suyo
    en el estado condicionado (p(y | x)). Devuelve (p_a[2], p_cond[2, 2]).
    """
    rho_a = traza_parcial_matriz(m, 2, 2, Side.RIGHT)
    p_a = np.array([np.real(np.trace(rho_a @ a.projector(x))) for x in OUTCOMES])
    p_a = np.clip(p_a, 0.0, None)
    p_a = p_a / p_a.sum()

    p_cond = np.full((2, 2), 0.5)
    for i, x in enumerate(OUTCOMES):
        if p_a[i] <= 0.0:
            continue
        proy = np.kron(a.projector(x), np.eye(2))
        sigma_b = traza_parcial_matriz(proy @ m @ proy, 2, 2, Side.LEFT)
        fila = np.array([np.real(np.trace(sigma_b @ b.projector(y))) for y in OUTCOMES])
        fila = np.clip(fila, 0.0, None)
        if fila.sum() > 0:
            p_cond[i] = fila / fila.sum()
    return p_a, p_cond


def _estado_efectivo(machine: MachineSpec, switch: DecoherenceSwitch) -> np.ndarray:
    if machine.kind is MachineKind.MONOLITHIC and machine.global_state is not None:
        return switch.apply(machine.global_state, qubits=(0, 1)).matrix
    return switch.apply(machine.shared_state).matrix


def _responder(
    machine: MachineSpec, m: np.ndarray | None, settings: ChshSettings, k: int, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    par = PAIRS[k]
    if machine.kind is MachineKind.CLASSICAL_CORRELATED:
        tabla = np.array(machine.strategies, dtype=np.int8)
        elegidas = rng.choice(len(tabla), size=n, p=np.array(machine.weights))
        return tabla[elegidas, par.a_index - 1], tabla[elegidas, 2 + par.b_index - 1]

    a, b = settings.pair(par)
    if machine.kind is MachineKind.SEPARABLE_PROVERS:
        p_a, p_cond = sequential_distribution(m, a, b)
        u = rng.random((n, 2))
        x_idx = cells_from_uniforms(p_a, u[:, 0])
        y_idx = np.where(u[:, 1] < p_cond[x_idx, 0], 0, 1)
    else:
        celdas = cells_from_uniforms(pair_distribution(m, a, b), rng.random(n))
        x_idx, y_idx = celdas // 2, celdas % 2
    signos = np.array(OUTCOMES, dtype=np.int8)
    return signos[x_idx], signos[y_idx]


# ---------------------------------------------------------------------------
# OPERACIONES
# ---------------------------------------------------------------------------


def run_protocol(
    machine: MachineSpec,
    switch: DecoherenceSwitch,
    settings: ChshSettings,
    rounds: int,
    seed: int,
    workers: int | None = None,
) -> Transcript:
    """La ronda i usa el par PAIRS[i % 4]; el par k muestrea con el substream (seed, k)."""
    if int(rounds) < 1:
        raise DimensionError("rounds debe ser ≥ 1.")
    rounds = int(rounds)
    m = _estado_efectivo(machine, switch) if machine.is_quantum else None

    indices_par = np.arange(rounds) % len(PAIRS)
    qa = np.array([p.a_index for p in PAIRS], dtype=np.int8)[indices_par]
    qb = np.array([p.b_index for p in PAIRS], dtype=np.int8)[indices_par]

    def muestrear(k: int):
        n = int(np.count_nonzero(indices_par == k))
        return _responder(machine, m, settings, k, n, derive_stream(seed, k))

    respuestas = map_ordered(muestrear, range(len(PAIRS)), workers)
    xa = np.empty(rounds, dtype=np.int8)
    yb = np.empty(rounds, dtype=np.int8)
    for k, (xs, ys) in enumerate(respuestas):
        xa[indices_par == k] = xs
        yb[indices_par == k] = ys

    logger.info(
        "Protocolo %s: %d rondas, interruptor %s (s=%.3f), semilla %d",
        machine.kind.value,
        rounds,
        "ON" if switch.on else "OFF",
        switch.strength,
        seed,
    )
    return Transcript(
        machine_label_hidden=machine.opaque_id,
        master_seed=int(seed),
        settings=settings,
        question_a=qa,
        question_b=qb,
        answer_a=xa,
        answer_b=yb,
        hdec_on=np.full(rounds, bool(switch.on)),
    )


def marginal_equivalence_check(spec: MachineSpec, settings: ChshSettings) -> float:
    """Máxima diferencia de celda entre el camino separable y el monolítico."""
    if not spec.is_quantum:
        raise MaquinaInvalidaError("La comparación de marginales solo aplica a máquinas cuánticas.")
    m_par = spec.shared_state.matrix
    m_mono = spec.global_state.matrix if spec.global_state is not None else m_par
    desvio = 0.0
    for par in PAIRS:
        a, b = settings.pair(par)
        p_a, p_cond = sequential_distribution(m_par, a, b)
        separable = p_a[:, None] * p_cond
        monolitica = pair_distribution(m_mono, a, b)
        desvio = max(desvio, float(np.max(np.abs(separable - monolitica))))
    return desvio


def no_signaling_deviation(state: DensityMatrix, settings: ChshSettings) -> float:
    """Cuánto cambia la marginal de A con la pregunta de B (y viceversa)."""
    dist = {par: pair_distribution(state.matrix, *settings.pair(par)) for par in PAIRS}
    desvio = 0.0
    for i in (1, 2):
        m1 = dist[PAIRS[2 * (i - 1)]].sum(axis=1)
        m2 = dist[PAIRS[2 * (i - 1) + 1]].sum(axis=1)
        desvio = max(desvio, float(np.max(np.abs(m1 - m2))))
    for j in (1, 2):
        m1 = dist[PAIRS[j - 1]].sum(axis=0)
        m2 = dist[PAIRS[j + 1]].sum(axis=0)
        desvio = max(desvio, float(np.max(np.abs(m1 - m2))))
    return desvio


def contingency_tables(t: Transcript) -> np.ndarray:
    """Conteos [par, celda] con celda = 2·idx(x) + idx(y), idx(+1) = 0."""
    par_idx = (t.question_a.astype(int) - 1) * 2 + (t.question_b.astype(int) - 1)
    celda = np.where(t.answer_a > 0, 0, 2) + np.where(t.answer_b > 0, 0, 1)
    tablas = np.zeros((len(PAIRS), 4), dtype=np.int64)
    np.add.at(tablas, (par_idx, celda), 1)
    return tablas


def transcript_estimate(t: Transcript) -> ChshEstimate:
    par_idx = (t.question_a.astype(int) - 1) * 2 + (t.question_b.astype(int) - 1)
    productos = t.answer_a.astype(float) * t.answer_b
    return ChshEstimate.from_products([productos[par_idx == k] for k in range(len(PAIRS))])


def _fusionar_celdas(tabla: np.ndarray, minimo: float = MINIMO_ESPERADO) -> np.ndarray:
    """Fusiona columnas con conteo esperado < minimo (siempre con la de menor total)."""
    tabla = tabla[:, tabla.sum(axis=0) > 0]
    while tabla.shape[1] > 1:
        esperado = np.outer(tabla.sum(axis=1), tabla.sum(axis=0)) / tabla.sum()
        minimos = esperado.min(axis=0)
        j = int(np.argmin(minimos))
        if minimos[j] >= minimo:
            break
        resto = [c for c in range(tabla.shape[1]) if c != j]
        k = min(resto, key=lambda c: (tabla[:, c].sum(), c))
        fusion = tabla[:, j] + tabla[:, k]
        tabla = np.column_stack([tabla[:, c] for c in resto if c != k] + [fusion])
    return tabla


def _chequear_comparables(t1: Transcript, t2: Transcript) -> None:
    if t1.settings != t2.settings:
        raise TranscripcionIncomparableError(
            f"Ajustes distintos: {t1.settings.as_tuple()} vs {t2.settings.as_tuple()}."
        )
    if set(np.unique(t1.hdec_on).tolist()) != set(np.unique(t2.hdec_on).tolist()):
        raise TranscripcionIncomparableError("Esquemas distintos del interruptor de decoherencia.")


def discriminate(t1: Transcript, t2: Transcript, alpha: float = ALPHA_POR_DEFECTO) -> DiscriminationVerdict:
    """Chi-cuadrado de dos muestras sumado sobre los 4 pares de ajustes."""
    _chequear_comparables(t1, t2)
    c1, c2 = contingency_tables(t1), contingency_tables(t2)
    estadistico, grados = 0.0, 0
    for k in range(len(PAIRS)):
        tabla = np.vstack([c1[k], c2[k]])
        if (tabla.sum(axis=1) == 0).any():
            continue
        tabla = _fusionar_celdas(tabla)
        if tabla.shape[1] < 2:
            continue
        stat, _, dof, _ = chi2_contingency(tabla, correction=False)
        estadistico += float(stat)
        grados += int(dof)

    p_valor = 1.0 if grados == 0 else float(min(max(chi2.sf(estadistico, grados), 0.0), 1.0))
    decision = Decision.DISTINGUISHED if p_valor < alpha else Decision.INDISTINGUISHABLE
    logger.info("Discriminación: χ² = %.4f, gl = %d, p = %.4g → %s", estadistico, grados, p_valor, decision.value)
    return DiscriminationVerdict(estadistico, grados, p_valor, decision, float(alpha))


def claim_from_estimate(estimacion: ChshEstimate, z: float = Z_CERTIFICACION) -> SeparabilityClaim:
    if estimacion.exp - z * estimacion.stderr > 2.0:
        return SeparabilityClaim.CHANNEL_CERTIFIED
    return SeparabilityClaim.CANNOT_CERTIFY


def verifier_separability_claim(t: Transcript) -> SeparabilityClaim:
    """Como mucho certifica un canal cuántico; nunca separabilidad."""
    try:
        estimacion = transcript_estimate(t)
    except SimuladorError:
        return SeparabilityClaim.CANNOT_CERTIFY
    return claim_from_estimate(estimacion)


# ---------------------------------------------------------------------------
# SERIALIZACIÓN
# ---------------------------------------------------------------------------


def write_transcript(t: Transcript, ruta: str) -> None:
    angulos = ",".join(repr(a) for a in t.settings.as_tuple())
    with open(ruta, "w", encoding="utf-8", newline="") as f:
        f.write(f"# {FORMATO_TRANSCRIPCION}\n")
        f.write(f"# machine={t.machine_label_hidden}\n")
        f.write(f"# seed={t.master_seed}\n")
        f.write(f"# settings={angulos}\n")
        t.table().to_csv(f, index=False, lineterminator="\n")


def read_transcript(ruta: str) -> Transcript:
    cabecera = {}
    with open(ruta, encoding="utf-8") as f:
        primera = f.readline().strip()
        if primera != f"# {FORMATO_TRANSCRIPCION}":
            raise FormatoTranscripcionError(f"Cabecera desconocida: {primera!r}")
        saltar = 1
        for linea in f:
            if not linea.startswith("#"):
                break
            clave, _, valor = linea[1:].strip().partition("=")
            cabecera[clave.strip()] = valor.strip()
            saltar += 1

    try:
        angulos = [float(a) for a in cabecera["settings"].split(",")]
        seed = int(cabecera["seed"])
        etiqueta = cabecera["machine"]
    except (KeyError, ValueError) as e:
        raise FormatoTranscripcionError(f"Cabecera incompleta: {e}")
    if len(angulos) != 4:
        raise FormatoTranscripcionError("settings necesita cuatro ángulos.")

    try:
        df = pd.read_csv(ruta, skiprows=saltar, dtype=int)
    except ValueError as e:
        raise FormatoTranscripcionError(f"Filas no enteras en la transcripción: {e}")
    if list(df.columns) != COLUMNAS_TRANSCRIPCION:
        raise FormatoTranscripcionError(f"Columnas inesperadas: {list(df.columns)}")
    if not np.array_equal(df["round_index"].to_numpy(), np.arange(len(df))):
        raise FormatoTranscripcionError("round_index debe ser 0, 1, 2, ... sin huecos.")

    return Transcript(
        machine_label_hidden=etiqueta,
        master_seed=seed,
        settings=ChshSettings(tuple(angulos[:2]), tuple(angulos[2:])),
        question_a=df["question_a"].to_numpy(),
        question_b=df["question_b"].to_numpy(),
        answer_a=df["answer_a"].to_numpy(),
        answer_b=df["answer_b"].to_numpy(),
        hdec_on=df["hdec_on"].to_numpy().astype(bool),
    )
