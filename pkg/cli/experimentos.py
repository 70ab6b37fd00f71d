# cli/experimentos.py
"""
Ejecución de experimentos y persistencia de resultados.

- Una configuración (ExperimentConfig) = un experimento: chsh, discriminate,
  ctc o entropy. ``contrast`` y ``sweep`` componen varias ejecuciones.
- La semilla maestra deriva todos los substreams. Si falta, se toma de la
  entropía del sistema y queda registrada en el archivo.
- Archivo de resultados: texto delimitado por comas con cabecera versionada
  (``# qsim-results v1``) y las columnas de COLUMNAS_RESULTADO. Los reales
  se escriben con repr: misma configuración + semilla ⇒ mismos bytes.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from channels.canales import DecoherenceSwitch, werner_state
from ctc.deutsch import circuit_output, parse_circuit_file, solve_fixed_point
from games.chsh import (
    COTA_CLASICA,
    ChshSettings,
    canonical_settings,
    derive_seed,
    estimate_chsh,
    exact_chsh,
)
from protocol.verificador import (
    ALPHA_POR_DEFECTO,
    MachineSpec,
    claim_from_estimate,
    discriminate,
    imitacion_clasica,
    run_protocol,
    transcript_estimate,
    verifier_separability_claim,
    write_transcript,
)
from qmath.densidad import (
    DensityMatrix,
    basis_state,
    bell_state,
    best_bipartition,
    dump_matrix,
    ghz_state,
    is_entangled_2q,
    max_qubits,
    parse_matrix,
    plus_state,
    product_state,
    von_neumann_entropy,
)
from utils import SimuladorError, asegurar_dirs, carpeta_salidas, ruta_hermana

logger = logging.getLogger(__name__)

FORMATO_RESULTADOS = "qsim-results v1"

EXPERIMENTOS = ("chsh", "discriminate", "ctc", "entropy")
ESTADOS = ("bell", "werner", "product", "custom", "ghz")
RIVALES = ("monolithic", "classical", "separable")
TOL_VIOLACION = 1e-12

# parámetro barrible -> conversión
BARRIBLES = {
    "werner_p": float,
    "switch_strength": float,
    "alpha": float,
    "rounds": int,
    "seed": int,
    "qubits": int,
}


class ConfigError(SimuladorError):
    """Configuración de experimento inválida."""


# ---------------------------------------------------------------------------
# COLUMNAS
# ---------------------------------------------------------------------------

COLUMNAS_CONFIG: List[str] = [
    "experiment",
    "seed",
    "rounds",
    "alpha",
    "state",
    "werner_p",
    "qubits",
    "state_file",
    "switch_on",
    "switch_strength",
    "angle_a1",
    "angle_a2",
    "angle_b1",
    "angle_b2",
    "rival",
    "conspiracy",
    "circuit",
]

COLUMNAS_METRICAS: List[str] = [
    "exp",
    "stderr",
    "exact_exp",
    "violation",
    "entangled",
    "claim",
    "chi_square",
    "dof",
    "p_value",
    "decision",
    "residual",
    "fixed_subspace_dim",
    "method",
    "iterations",
    "entropy",
    "best_cut",
]

COLUMNAS_RESULTADO: List[str] = COLUMNAS_CONFIG + COLUMNAS_METRICAS

# métricas que cada experimento debe reportar; el resto queda vacío
METRICAS_POR_EXPERIMENTO: Dict[str, tuple] = {
    "chsh": ("exp", "stderr", "exact_exp", "violation", "entangled", "claim"),
    "discriminate": ("exp", "stderr", "claim", "chi_square", "dof", "p_value", "decision"),
    "ctc": ("residual", "fixed_subspace_dim", "method", "iterations", "entropy"),
    "entropy": ("entropy", "best_cut"),
}


# ---------------------------------------------------------------------------
# TIPOS
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "chsh"
    seed: int | None = None
    rounds: int = 100_000
    alpha: float = ALPHA_POR_DEFECTO
    state: str = "bell"
    werner_p: float = 1.0
    qubits: int = 3
    state_file: str = ""
    switch_on: bool = False
    switch_strength: float = 1.0
    angles_a: tuple = field(default_factory=lambda: canonical_settings().angles_a)
    angles_b: tuple = field(default_factory=lambda: canonical_settings().angles_b)
    rival: str = "monolithic"
    conspiracy: bool = False
    circuit: str = ""
    output_path: str = ""
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "angles_a", tuple(float(t) for t in self.angles_a))
        object.__setattr__(self, "angles_b", tuple(float(t) for t in self.angles_b))
        if self.experiment not in EXPERIMENTOS:
            raise ConfigError(f"Experimento desconocido {self.experiment!r} (válidos: {', '.join(EXPERIMENTOS)}).")
        if self.state not in ESTADOS:
            raise ConfigError(f"Estado desconocido {self.state!r} (válidos: {', '.join(ESTADOS)}).")
        if self.rival not in RIVALES:
            raise ConfigError(f"Rival desconocido {self.rival!r} (válidos: {', '.join(RIVALES)}).")
        if int(self.rounds) < 1:
            raise ConfigError("rounds debe ser ≥ 1.")
        if not 0.0 < float(self.alpha) < 1.0:
            raise ConfigError("alpha debe estar en (0, 1).")
        if not 0.0 <= float(self.werner_p) <= 1.0:
            raise ConfigError("werner_p debe estar en [0, 1].")
        if not 0.0 <= float(self.switch_strength) <= 1.0:
            raise ConfigError("switch_strength debe estar en [0, 1].")
        if not 2 <= int(self.qubits) <= max_qubits():
            raise ConfigError(f"qubits debe estar en [2, {max_qubits()}].")
        if int(self.workers) < 1:
            raise ConfigError("workers debe ser ≥ 1.")
        if len(self.angles_a) != 2 or len(self.angles_b) != 2:
            raise ConfigError("Se necesitan dos ángulos para A y dos para B.")
        if not all(math.isfinite(t) for t in self.angles_a + self.angles_b):
            raise ConfigError("Los ángulos deben ser finitos.")
        if self.seed is not None and int(self.seed) < 0:
            raise ConfigError("seed debe ser un entero no negativo.")

        if self.state == "custom" and not self.state_file:
            raise ConfigError("El estado 'custom' necesita state_file.")
        if self.state == "ghz" and self.experiment != "entropy":
            raise ConfigError("El estado 'ghz' solo aplica al experimento entropy.")
        if self.experiment == "ctc" and not self.circuit:
            raise ConfigError("El experimento ctc necesita circuit.")

    @property
    def settings(self) -> ChshSettings:
        return ChshSettings(self.angles_a, self.angles_b)

    @property
    def switch(self) -> DecoherenceSwitch:
        return DecoherenceSwitch(on=bool(self.switch_on), strength=float(self.switch_strength))

    @property
    def destino(self) -> str:
        return self.output_path or os.path.join(carpeta_salidas(), f"{self.experiment}.csv")

    def con_semilla(self) -> "ExperimentConfig":
        if self.seed is not None:
            return self
        semilla = int(np.random.SeedSequence().entropy)
        logger.info("Semilla no indicada; se usa %d (entropía del sistema)", semilla)
        return replace(self, seed=semilla)


@dataclass(frozen=True)
class ResultRow:
    config: ExperimentConfig
    metrics: Dict[str, Any]
    wall_time: float = 0.0

    @property
    def experiment(self) -> str:
        return self.config.experiment

    def as_record(self) -> Dict[str, Any]:
        c = self.config
        registro = {
            "experiment": c.experiment,
            "seed": c.seed,
            "rounds": int(c.rounds),
            "alpha": float(c.alpha),
            "state": c.state,
            "werner_p": float(c.werner_p),
            "qubits": int(c.qubits),
            "state_file": c.state_file,
            "switch_on": bool(c.switch_on),
            "switch_strength": float(c.switch_strength),
            "angle_a1": c.angles_a[0],
            "angle_a2": c.angles_a[1],
            "angle_b1": c.angles_b[0],
            "angle_b2": c.angles_b[1],
            "rival": c.rival,
            "conspiracy": bool(c.conspiracy),
            "circuit": c.circuit,
        }
        for col in COLUMNAS_METRICAS:
            registro[col] = self.metrics.get(col)
        return registro


# ---------------------------------------------------------------------------
# CARGA DE CONFIGURACIÓN
# ---------------------------------------------------------------------------


def cargar_config(ruta: str | None = None, **overrides) -> ExperimentConfig:
    """JSON con nombres de campo como claves; los overrides no nulos ganan."""
    datos: Dict[str, Any] = {}
    if ruta:
        with open(ruta, encoding="utf-8") as f:
            try:
                datos = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"JSON inválido en {ruta}: {e}")
        if not isinstance(datos, dict):
            raise ConfigError("El archivo de configuración debe ser un objeto JSON.")

    validos = {f.name for f in fields(ExperimentConfig)}
    desconocidos = sorted(set(datos) - validos)
    if desconocidos:
        raise ConfigError(f"Claves desconocidas en la configuración: {', '.join(desconocidos)}.")

    datos.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**datos)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Configuración inválida: {e}")


# ---------------------------------------------------------------------------
# ESTADOS
# ---------------------------------------------------------------------------


def construir_estado(config: ExperimentConfig) -> DensityMatrix:
    if config.state == "bell":
        return bell_state()
    if config.state == "werner":
        return werner_state(config.werner_p)
    if config.state == "product":
        return product_state(basis_state(0, 2), plus_state())
    if config.state == "ghz":
        return ghz_state(int(config.qubits))
    with open(config.state_file, encoding="utf-8") as f:
        return DensityMatrix(parse_matrix(f.read()))


def _estado_de_par(config: ExperimentConfig) -> DensityMatrix:
    estado = construir_estado(config)
    if estado.dim != 4:
        raise ConfigError(f"El experimento {config.experiment} necesita un estado de dos qubits (dim {estado.dim}).")
    return estado


# ---------------------------------------------------------------------------
# EXPERIMENTOS
# ---------------------------------------------------------------------------


def _experimento_chsh(config: ExperimentConfig, artefactos: bool) -> Dict[str, Any]:
    estado = config.switch.apply(_estado_de_par(config))
    estimacion = estimate_chsh(
        estado, config.settings, None, int(config.rounds), int(config.seed), int(config.workers)
    )
    exacto = exact_chsh(estado, config.settings)
    return {
        "exp": estimacion.exp,
        "stderr": estimacion.stderr,
        "exact_exp": exacto,
        "violation": exacto > COTA_CLASICA + TOL_VIOLACION,
        "entangled": is_entangled_2q(estado),
        "claim": claim_from_estimate(estimacion).value,
    }


def _rival(config: ExperimentConfig, rho: DensityMatrix) -> MachineSpec:
    if config.rival == "classical":
        return imitacion_clasica()
    if config.rival == "separable":
        return MachineSpec.separable(rho)
    if config.conspiracy:
        return MachineSpec.monolithic_purified(rho)
    return MachineSpec.monolithic(rho)


def _experimento_discriminate(config: ExperimentConfig, artefactos: bool) -> Dict[str, Any]:
    rho = _estado_de_par(config)
    seed, workers = int(config.seed), int(config.workers)
    t1 = run_protocol(MachineSpec.separable(rho), config.switch, config.settings,
                      int(config.rounds), derive_seed(seed, 0), workers)
    t2 = run_protocol(_rival(config, rho), config.switch, config.settings,
                      int(config.rounds), derive_seed(seed, 1), workers)
    veredicto = discriminate(t1, t2, float(config.alpha))

    if artefactos:
        write_transcript(t1, ruta_hermana(config.destino, "transcript_a", ".csv"))
        write_transcript(t2, ruta_hermana(config.destino, "transcript_b", ".csv"))

    estimacion = transcript_estimate(t1)
    return {
        "exp": estimacion.exp,
        "stderr": estimacion.stderr,
        "claim": verifier_separability_claim(t1).value,
        "chi_square": veredicto.chi_square,
        "dof": veredicto.degrees_of_freedom,
        "p_value": veredicto.p_value,
        "decision": veredicto.decision.value,
    }


def _experimento_ctc(config: ExperimentConfig, artefactos: bool) -> Dict[str, Any]:
    circuito, rho_in = parse_circuit_file(config.circuit)
    resultado = solve_fixed_point(circuito, rho_in)
    rho_out = circuit_output(circuito, rho_in, resultado)

    if artefactos:
        with open(ruta_hermana(config.destino, "rho"), "w", encoding="utf-8", newline="") as f:
            f.write(dump_matrix(resultado.rho))
        with open(ruta_hermana(config.destino, "rho_out"), "w", encoding="utf-8", newline="") as f:
            f.write(dump_matrix(rho_out))

    return {
        "residual": resultado.residual,
        "fixed_subspace_dim": resultado.fixed_subspace_dim,
        "method": resultado.method.value,
        "iterations": resultado.iterations,
        "entropy": von_neumann_entropy(resultado.rho),
    }


def _experimento_entropy(config: ExperimentConfig, artefactos: bool) -> Dict[str, Any]:
    estado = construir_estado(config)
    entropia, corte = best_bipartition(estado)
    return {"entropy": entropia, "best_cut": ";".join(str(q) for q in corte)}


_DESPACHO = {
    "chsh": _experimento_chsh,
    "discriminate": _experimento_discriminate,
    "ctc": _experimento_ctc,
    "entropy": _experimento_entropy,
}


def _ejecutar(config: ExperimentConfig, artefactos: bool = True) -> ResultRow:
    config = config.con_semilla()
    inicio = time.perf_counter()
    metricas = _DESPACHO[config.experiment](config, artefactos)
    fila = ResultRow(config, metricas, time.perf_counter() - inicio)
    logger.info("Experimento %s (semilla %d) en %.3f s", config.experiment, config.seed, fila.wall_time)
    return fila


def _preparar_destino(ruta: str) -> None:
    asegurar_dirs(os.path.dirname(ruta))


def run(config: ExperimentConfig) -> ResultRow:
    """Ejecuta un experimento y escribe su fila (y artefactos) en config.destino."""
    _preparar_destino(config.destino)
    fila = _ejecutar(config)
    escribir_resultados([fila], config.destino)
    return fila


def contrast(config: ExperimentConfig) -> pd.DataFrame:
    """CHSH con el interruptor apagado y encendido, semillas derivadas de la maestra."""
    if config.experiment != "chsh":
        raise ConfigError("contrast solo aplica al experimento chsh.")
    config = config.con_semilla()
    _preparar_destino(config.destino)
    filas = [
        _ejecutar(replace(config, switch_on=encendido, seed=derive_seed(int(config.seed), i)))
        for i, encendido in enumerate((False, True))
    ]
    escribir_resultados(filas, config.destino)
    return tabla_resultados(filas)


def sweep(plantilla: ExperimentConfig, parametro: str, valores: Sequence) -> pd.DataFrame:
    """Una fila por valor, en el orden dado, misma semilla maestra, un solo archivo."""
    if parametro not in BARRIBLES:
        raise ConfigError(f"Parámetro no barrible {parametro!r} (válidos: {', '.join(BARRIBLES)}).")
    plantilla = plantilla.con_semilla()
    convertir = BARRIBLES[parametro]
    _preparar_destino(plantilla.destino)

    filas = []
    for valor in valores:
        try:
            config = replace(plantilla, **{parametro: convertir(valor)})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Valor inválido para {parametro}: {valor!r} ({e})")
        filas.append(_ejecutar(config, artefactos=False))

    escribir_resultados(filas, plantilla.destino)
    return tabla_resultados(filas)


# ---------------------------------------------------------------------------
# PERSISTENCIA
# ---------------------------------------------------------------------------


def _fmt_valor(valor) -> str:
    if valor is None:
        return ""
    if isinstance(valor, (bool, np.bool_)):
        return "true" if valor else "false"
    if isinstance(valor, (float, np.floating)):
        return repr(float(valor))
    return str(valor)


def tabla_resultados(filas: Sequence[ResultRow]) -> pd.DataFrame:
    registros = [{col: _fmt_valor(v) for col, v in f.as_record().items()} for f in filas]
    return pd.DataFrame(registros, columns=COLUMNAS_RESULTADO)


def escribir_resultados(filas: Sequence[ResultRow], ruta: str) -> None:
    df = tabla_resultados(filas)
    with open(ruta, "w", encoding="utf-8", newline="") as f:
        f.write(f"# {FORMATO_RESULTADOS}\n")
        df.to_csv(f, index=False, lineterminator="\n")


def leer_resultados(ruta: str) -> pd.DataFrame:
    with open(ruta, encoding="utf-8") as f:
        cabecera = f.readline().strip()
        if cabecera != f"# {FORMATO_RESULTADOS}":
            raise ConfigError(f"Cabecera de resultados desconocida: {cabecera!r}")
        df = pd.read_csv(f, dtype=str, keep_default_na=False)
    if list(df.columns) != COLUMNAS_RESULTADO:
        raise ConfigError(f"Columnas de resultados inesperadas: {list(df.columns)}")
    for _, registro in df.iterrows():
        experimento = registro["experiment"]
        for col in COLUMNAS_METRICAS:
            presente = registro[col] != ""
            if presente != (col in METRICAS_POR_EXPERIMENTO.get(experimento, ())):
                raise ConfigError(f"Métrica {col} mal informada para {experimento}.")
    return df


def _leer_bool(texto: str) -> bool:
    if texto not in ("true", "false"):
        raise ConfigError(f"Booleano inválido: {texto!r}")
    return texto == "true"


def config_desde_registro(registro: Dict[str, str], output_path: str = "") -> ExperimentConfig:
    """Reconstruye la configuración a partir del eco de una fila de resultados."""
    try:
        return ExperimentConfig(
            experiment=registro["experiment"],
            seed=int(registro["seed"]),
            rounds=int(registro["rounds"]),
            alpha=float(registro["alpha"]),
            state=registro["state"],
            werner_p=float(registro["werner_p"]),
            qubits=int(registro["qubits"]),
            state_file=registro["state_file"],
            switch_on=_leer_bool(registro["switch_on"]),
            switch_strength=float(registro["switch_strength"]),
            angles_a=(float(registro["angle_a1"]), float(registro["angle_a2"])),
            angles_b=(float(registro["angle_b1"]), float(registro["angle_b2"])),
            rival=registro["rival"],
            conspiracy=_leer_bool(registro["conspiracy"]),
            circuit=registro["circuit"],
            output_path=output_path,
        )
    except (KeyError, ValueError) as e:
        raise ConfigError(f"Fila de resultados incompleta: {e}")
