# cli/__main__.py
"""
python -m cli <subcomando> [opciones]

Subcomandos: chsh, discriminate, ctc, entropy, contrast, sweep.
Las opciones pisan las claves del archivo --config (JSON).

Códigos de salida: 0 éxito, 2 configuración, 3 convergencia, 4 E/S.
"""

from __future__ import annotations

import argparse
import logging
import sys

from cli.experimentos import (
    BARRIBLES,
    EXPERIMENTOS,
    ConfigError,
    cargar_config,
    contrast,
    run,
    sweep,
)
from ctc.deutsch import ConvergenciaError
from utils import SimuladorError, configurar_logging

logger = logging.getLogger("cli")

SALIDA_CONFIG = 2
SALIDA_CONVERGENCIA = 3
SALIDA_IO = 4


class ParserExperimentos(argparse.ArgumentParser):
    """Los errores de argumentos salen como ConfigError (código 2, línea error=)."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def _interruptor(texto: str) -> bool:
    t = texto.strip().lower()
    if t in ("on", "true", "1"):
        return True
    if t in ("off", "false", "0"):
        return False
    raise argparse.ArgumentTypeError(f"se esperaba on/off, llegó {texto!r}")


def _opciones_comunes() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="Archivo JSON con los campos del experimento.")
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--state", choices=["bell", "werner", "product", "custom", "ghz"])
    p.add_argument("--werner-p", type=float)
    p.add_argument("--qubits", type=int)
    p.add_argument("--state-file")
    p.add_argument("--switch", type=_interruptor, metavar="on|off")
    p.add_argument("--strength", type=float)
    p.add_argument("--angles-a", type=float, nargs=2, metavar=("A1", "A2"))
    p.add_argument("--angles-b", type=float, nargs=2, metavar=("B1", "B2"))
    p.add_argument("--rival", choices=["monolithic", "classical", "separable"])
    p.add_argument("--conspiracy", action="store_const", const=True)
    p.add_argument("--circuit")
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.add_argument("--log-level")
    return p


def construir_parser() -> argparse.ArgumentParser:
    comunes = _opciones_comunes()
    parser = ParserExperimentos(prog="python -m cli", description="Experimentos CHSH / LOCC / CTC.")
    sub = parser.add_subparsers(dest="comando", required=True)
    for nombre in EXPERIMENTOS:
        sub.add_parser(nombre, parents=[comunes])
    sub.add_parser("contrast", parents=[comunes], help="CHSH con el interruptor apagado y encendido.")
    barrido = sub.add_parser("sweep", parents=[comunes], help="Barre un parámetro numérico.")
    barrido.add_argument("--experiment", choices=list(EXPERIMENTOS))
    barrido.add_argument("--parameter", required=True, choices=list(BARRIBLES))
    barrido.add_argument("--values", nargs="*", default=[], help="Se convierten según el tipo del parámetro.")
    return parser


def _config_desde_args(args: argparse.Namespace):
    experimento = getattr(args, "experiment", None)
    if args.comando in EXPERIMENTOS:
        experimento = args.comando
    elif args.comando == "contrast":
        experimento = "chsh"
    return cargar_config(
        args.config,
        experiment=experimento,
        seed=args.seed,
        rounds=args.rounds,
        alpha=args.alpha,
        state=args.state,
        werner_p=args.werner_p,
        qubits=args.qubits,
        state_file=args.state_file,
        switch_on=args.switch,
        switch_strength=args.strength,
        angles_a=args.angles_a,
        angles_b=args.angles_b,
        rival=args.rival,
        conspiracy=args.conspiracy,
        circuit=args.circuit,
        output_path=args.output,
        workers=args.workers,
    )


def _reportar(codigo: int, error: BaseException) -> int:
    mensaje = " ".join(str(error).split())
    print(f"error={codigo} kind={type(error).__name__} message={mensaje}", file=sys.stderr)
    return codigo


def main(argv: list[str] | None = None) -> int:
    try:
        args = construir_parser().parse_args(argv)
    except ConfigError as e:
        return _reportar(SALIDA_CONFIG, e)
    configurar_logging(args.log_level)
    try:
        config = _config_desde_args(args)
        if args.comando == "sweep":
            tabla = sweep(config, args.parameter, args.values)
            logger.info("Barrido de %s: %d filas", args.parameter, len(tabla))
        elif args.comando == "contrast":
            contrast(config)
        else:
            run(config)
        print(f"ok output={config.destino}")
        return 0
    except ConvergenciaError as e:
        return _reportar(SALIDA_CONVERGENCIA, e)
    except (ConfigError, SimuladorError) as e:
        return _reportar(SALIDA_CONFIG, e)
    except OSError as e:
        return _reportar(SALIDA_IO, e)


if __name__ == "__main__":
    sys.exit(main())
