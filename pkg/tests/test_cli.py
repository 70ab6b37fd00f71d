import json
import math
import os
import tempfile
from dataclasses import replace

import numpy as np
import pytest

from cli.__main__ import main
from cli.experimentos import (
    COLUMNAS_RESULTADO,
    FORMATO_RESULTADOS,
    ConfigError,
    ExperimentConfig,
    cargar_config,
    config_desde_registro,
    contrast,
    leer_resultados,
    run,
    sweep,
)
from ctc.deutsch import ConvergenciaError
from games.chsh import derive_seed
from protocol.verificador import read_transcript
from qmath.densidad import bell_state, dump_matrix, parse_matrix

CIRCUITOS = os.path.join(os.path.dirname(__file__), "..", "circuitos")
RAIZ2 = math.sqrt(2)
LN2 = math.log(2)


def _leer(ruta):
    return leer_resultados(str(ruta))


# ---------------------------------------------------------------------------
# ExperimentConfig / cargar_config
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "campos",
    [
        {"experiment": "otro"},
        {"rounds": 0},
        {"alpha": 1.0},
        {"werner_p": 1.5},
        {"switch_strength": -0.1},
        {"state": "ghz"},
        {"state": "custom"},
        {"experiment": "ctc"},
        {"angles_a": (0.0,)},
        {"angles_b": (0.0, float("nan"))},
        {"seed": -1},
    ],
)
def test_config_invalida(campos):
    with pytest.raises(ConfigError):
        ExperimentConfig(**campos)


def test_destino_por_defecto(monkeypatch, tmp_path):
    monkeypatch.setenv("QSIM_SALIDAS", str(tmp_path))
    assert ExperimentConfig(experiment="entropy").destino == os.path.join(str(tmp_path), "entropy.csv")


def test_cargar_config_json_con_overrides(tmp_path):
    ruta = tmp_path / "config.json"
    ruta.write_text(json.dumps({"experiment": "entropy", "state": "ghz", "qubits": 4, "seed": 9}), encoding="utf-8")
    config = cargar_config(str(ruta), qubits=5, seed=None)
    assert (config.experiment, config.state, config.qubits, config.seed) == ("entropy", "ghz", 5, 9)


def test_cargar_config_clave_desconocida(tmp_path):
    ruta = tmp_path / "config.json"
    ruta.write_text(json.dumps({"semilla": 1}), encoding="utf-8")
    with pytest.raises(ConfigError, match="semilla"):
        cargar_config(str(ruta))


def test_cargar_config_json_invalido(tmp_path):
    ruta = tmp_path / "config.json"
    ruta.write_text("{experiment: chsh", encoding="utf-8")
    with pytest.raises(ConfigError):
        cargar_config(str(ruta))


# ---------------------------------------------------------------------------
# Experimentos
# ---------------------------------------------------------------------------


def test_chsh_interruptor_apagado_y_encendido(tmp_path):
    apagado = run(ExperimentConfig(seed=1, rounds=20_000, output_path=str(tmp_path / "off.csv")))
    encendido = run(ExperimentConfig(seed=1, rounds=20_000, switch_on=True, output_path=str(tmp_path / "on.csv")))

    assert apagado.metrics["exact_exp"] == pytest.approx(2 * RAIZ2, abs=1e-12)
    assert apagado.metrics["violation"] and apagado.metrics["entangled"]
    assert abs(apagado.metrics["exp"] - 2 * RAIZ2) <= 5 * apagado.metrics["stderr"]

    assert encendido.metrics["exact_exp"] == pytest.approx(RAIZ2, abs=1e-12)
    assert not encendido.metrics["violation"]
    assert not encendido.metrics["entangled"]
    assert encendido.metrics["claim"] == "cannot_certify"

    df = _leer(tmp_path / "on.csv")
    assert list(df.columns) == COLUMNAS_RESULTADO
    assert df.loc[0, "switch_on"] == "true"
    assert df.loc[0, "violation"] == "false"
    assert df.loc[0, "residual"] == ""


def test_chsh_estado_desde_archivo(tmp_path):
    estado = tmp_path / "bell.txt"
    estado.write_text(dump_matrix(bell_state()), encoding="utf-8")
    fila = run(
        ExperimentConfig(
            seed=2, rounds=1000, state="custom", state_file=str(estado), output_path=str(tmp_path / "r.csv")
        )
    )
    assert fila.metrics["exact_exp"] == pytest.approx(2 * RAIZ2, abs=1e-12)


def test_chsh_rechaza_estado_de_tres_qubits(tmp_path):
    estado = tmp_path / "tres.txt"
    estado.write_text(dump_matrix(np.eye(8) / 8), encoding="utf-8")
    config = ExperimentConfig(seed=2, state="custom", state_file=str(estado), output_path=str(tmp_path / "r.csv"))
    with pytest.raises(ConfigError):
        run(config)


def test_ctc_abuelo_vuelca_matrices(tmp_path):
    salida = tmp_path / "ctc.csv"
    fila = run(
        ExperimentConfig(
            experiment="ctc", seed=0, circuit=os.path.join(CIRCUITOS, "grandfather.txt"), output_path=str(salida)
        )
    )
    assert fila.metrics["fixed_subspace_dim"] == 2
    assert fila.metrics["residual"] <= 1e-12
    assert fila.metrics["entropy"] == pytest.approx(LN2, abs=1e-12)

    rho = parse_matrix((tmp_path / "ctc_rho.txt").read_text(encoding="utf-8"))
    np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-12)
    assert (tmp_path / "ctc_rho_out.txt").exists()

    df = _leer(salida)
    assert df.loc[0, "method"] == "cesaro"
    assert df.loc[0, "exp"] == ""


def test_entropy_ghz(tmp_path):
    fila = run(ExperimentConfig(experiment="entropy", state="ghz", qubits=4, seed=0,
                                output_path=str(tmp_path / "e.csv")))
    assert fila.metrics["entropy"] == pytest.approx(LN2, abs=1e-12)
    assert fila.metrics["best_cut"].split(";")[0] == "0"


def test_semilla_ausente_queda_registrada(tmp_path):
    salida = tmp_path / "e.csv"
    fila = run(ExperimentConfig(experiment="entropy", output_path=str(salida)))
    assert fila.config.seed is not None
    df = _leer(salida)
    assert df.loc[0, "seed"] == str(fila.config.seed)


def test_discriminate_contra_clasico(tmp_path):
    salida = tmp_path / "d.csv"
    fila = run(
        ExperimentConfig(experiment="discriminate", rival="classical", rounds=20_000, seed=2, output_path=str(salida))
    )
    assert fila.metrics["decision"] == "distinguished"
    assert fila.metrics["p_value"] < 1e-6

    a = read_transcript(str(tmp_path / "d_transcript_a.csv"))
    b = read_transcript(str(tmp_path / "d_transcript_b.csv"))
    assert len(a) == len(b) == 20_000
    assert a.master_seed == derive_seed(2, 0)
    assert b.master_seed == derive_seed(2, 1)
    assert a.machine_label_hidden != b.machine_label_hidden


def test_discriminate_conspiracion_con_interruptor(tmp_path):
    fila = run(
        ExperimentConfig(
            experiment="discriminate",
            conspiracy=True,
            switch_on=True,
            rounds=4000,
            seed=3,
            output_path=str(tmp_path / "d.csv"),
        )
    )
    assert 0.0 <= fila.metrics["p_value"] <= 1.0
    assert fila.metrics["claim"] in ("cannot_certify", "channel_certified")
    df = _leer(tmp_path / "d.csv")
    assert df.loc[0, "conspiracy"] == "true"


def test_contrast_dos_filas_con_semillas_derivadas(tmp_path):
    salida = tmp_path / "c.csv"
    df = contrast(ExperimentConfig(seed=5, rounds=5000, output_path=str(salida)))
    assert list(df["switch_on"]) == ["false", "true"]
    assert list(df["seed"]) == [str(derive_seed(5, 0)), str(derive_seed(5, 1))]
    assert float(df.loc[0, "exact_exp"]) > float(df.loc[1, "exact_exp"])
    assert _leer(salida).to_dict("records") == df.to_dict("records")


def test_contrast_solo_chsh(tmp_path):
    with pytest.raises(ConfigError):
        contrast(ExperimentConfig(experiment="entropy", output_path=str(tmp_path / "c.csv")))


# ---------------------------------------------------------------------------
# Barridos
# ---------------------------------------------------------------------------


def test_barrido_werner(tmp_path):
    plantilla = ExperimentConfig(state="werner", seed=4, rounds=5000, output_path=str(tmp_path / "w.csv"))
    df = sweep(plantilla, "werner_p", [0.0, 0.5, 0.8, 1.0])
    assert list(df["werner_p"]) == ["0.0", "0.5", "0.8", "1.0"]
    assert list(df["violation"]) == ["false", "false", "true", "true"]
    assert list(df["entangled"]) == ["false", "true", "true", "true"]
    assert set(df["seed"]) == {"4"}
    for p, exacto in zip([0.0, 0.5, 0.8, 1.0], df["exact_exp"]):
        assert float(exacto) == pytest.approx(2 * RAIZ2 * p, abs=1e-12)


def test_barrido_intensidad_monotono(tmp_path):
    plantilla = ExperimentConfig(switch_on=True, seed=6, rounds=2000, output_path=str(tmp_path / "s.csv"))
    valores = [0.0, 0.25, 0.5, 0.75, 1.0]
    df = sweep(plantilla, "switch_strength", valores)
    exactos = [float(v) for v in df["exact_exp"]]
    assert all(a > b for a, b in zip(exactos, exactos[1:]))
    for s, exacto in zip(valores, exactos):
        assert exacto == pytest.approx(RAIZ2 * (2 - s), abs=1e-12)


def test_barrido_vacio_escribe_solo_cabecera(tmp_path):
    salida = tmp_path / "vacio.csv"
    df = sweep(ExperimentConfig(seed=1, output_path=str(salida)), "werner_p", [])
    assert df.empty
    lineas = salida.read_text(encoding="utf-8").splitlines()
    assert lineas == [f"# {FORMATO_RESULTADOS}", ",".join(COLUMNAS_RESULTADO)]
    assert _leer(salida).empty


def test_barrido_parametro_desconocido(tmp_path):
    with pytest.raises(ConfigError, match="angle"):
        sweep(ExperimentConfig(seed=1, output_path=str(tmp_path / "x.csv")), "angle_a1", [0.1])


def test_barrido_valor_fuera_de_rango(tmp_path):
    with pytest.raises(ConfigError):
        sweep(ExperimentConfig(seed=1, rounds=100, output_path=str(tmp_path / "x.csv")), "werner_p", [0.5, 2.0])


# ---------------------------------------------------------------------------
# Reproducibilidad y archivo de resultados
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("experimento", ["chsh", "discriminate"])
def test_resultados_identicos_con_hilos(tmp_path, experimento):
    base = ExperimentConfig(experiment=experimento, seed=8, rounds=8000, rival="classical")
    run(replace(base, workers=1, output_path=str(tmp_path / "uno.csv")))
    run(replace(base, workers=4, output_path=str(tmp_path / "cuatro.csv")))
    assert (tmp_path / "uno.csv").read_bytes() == (tmp_path / "cuatro.csv").read_bytes()


def test_repetir_desde_el_eco_de_configuracion(tmp_path):
    original = tmp_path / "original.csv"
    run(ExperimentConfig(state="werner", werner_p=0.9, seed=11, rounds=3000, angles_a=(0.1, 1.3),
                         output_path=str(original)))
    registro = _leer(original).iloc[0].to_dict()
    repetido = tmp_path / "repetido.csv"
    run(config_desde_registro(registro, output_path=str(repetido)))
    assert original.read_bytes() == repetido.read_bytes()


def test_leer_resultados_rechaza_cabecera(tmp_path):
    ruta = tmp_path / "r.csv"
    ruta.write_text("# qsim-results v0\n" + ",".join(COLUMNAS_RESULTADO) + "\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="Cabecera"):
        leer_resultados(str(ruta))


def test_leer_resultados_rechaza_metrica_ausente(tmp_path):
    ruta = tmp_path / "r.csv"
    run(ExperimentConfig(experiment="entropy", seed=1, output_path=str(ruta)))
    df = _leer(ruta)
    df.loc[0, "entropy"] = ""
    with open(ruta, "w", encoding="utf-8", newline="") as f:
        f.write(f"# {FORMATO_RESULTADOS}\n")
        df.to_csv(f, index=False, lineterminator="\n")
    with pytest.raises(ConfigError, match="entropy"):
        leer_resultados(str(ruta))


def test_config_desde_registro_incompleto():
    with pytest.raises(ConfigError):
        config_desde_registro({"experiment": "chsh"})


# ---------------------------------------------------------------------------
# main()
# ---------------------------------------------------------------------------


def test_main_exito(tmp_path, capsys):
    salida = tmp_path / "e.csv"
    codigo = main(["entropy", "--state", "bell", "--seed", "3", "--output", str(salida)])
    assert codigo == 0
    assert f"ok output={salida}" in capsys.readouterr().out
    assert _leer(salida).loc[0, "seed"] == "3"


def test_main_barrido(tmp_path):
    salida = tmp_path / "s.csv"
    codigo = main(
        ["sweep", "--experiment", "chsh", "--parameter", "werner_p", "--values", "0.2", "0.9",
         "--state", "werner", "--rounds", "2000", "--seed", "1", "--output", str(salida)]
    )
    assert codigo == 0
    assert list(_leer(salida)["werner_p"]) == ["0.2", "0.9"]


def test_main_contrast(tmp_path):
    salida = tmp_path / "c.csv"
    assert main(["contrast", "--seed", "1", "--rounds", "1000", "--strength", "0.5", "--output", str(salida)]) == 0
    assert list(_leer(salida)["switch_strength"]) == ["0.5", "0.5"]


def test_main_error_de_configuracion(tmp_path, capsys):
    codigo = main(["chsh", "--rounds", "0", "--output", str(tmp_path / "x.csv")])
    assert codigo == 2
    assert "error=2 kind=ConfigError" in capsys.readouterr().err


@pytest.mark.parametrize(
    "opciones",
    [["--rounds", "abc"], ["--state", "ghost"], ["--switch", "maybe"]],
)
def test_main_argumentos_mal_formados(tmp_path, capsys, opciones):
    codigo = main(["chsh", *opciones, "--output", str(tmp_path / "x.csv")])
    assert codigo == 2
    ultima = capsys.readouterr().err.strip().splitlines()[-1]
    assert ultima.startswith("error=2 kind=ConfigError message=")
    assert opciones[0] in ultima
    assert not (tmp_path / "x.csv").exists()


def test_main_barrido_de_semillas_enteras_grandes(tmp_path):
    salida = tmp_path / "s.csv"
    semilla = 2**53 + 1
    codigo = main(
        ["sweep", "--experiment", "entropy", "--parameter", "seed", "--values", str(semilla), "7",
         "--state", "bell", "--output", str(salida)]
    )
    assert codigo == 0
    assert list(_leer(salida)["seed"]) == [str(semilla), "7"]


def test_main_barrido_entero_rechaza_decimales(tmp_path, capsys):
    codigo = main(
        ["sweep", "--experiment", "chsh", "--parameter", "rounds", "--values", "100.5",
         "--output", str(tmp_path / "s.csv")]
    )
    assert codigo == 2
    assert "error=2 kind=ConfigError" in capsys.readouterr().err


def test_main_circuito_invalido(tmp_path, capsys):
    circuito = tmp_path / "malo.txt"
    circuito.write_text("dim_ch 1\ndim_tv 2\nunitary\n1+0i 1+0i\n0+0i 1+0i\nrho_in\n1+0i\n", encoding="utf-8")
    codigo = main(["ctc", "--circuit", str(circuito), "--output", str(tmp_path / "x.csv")])
    assert codigo == 2
    assert "kind=CircuitoInvalidoError" in capsys.readouterr().err


def test_main_error_de_archivo(tmp_path, capsys):
    codigo = main(["ctc", "--circuit", str(tmp_path / "no_existe.txt"), "--output", str(tmp_path / "x.csv")])
    assert codigo == 4
    assert "error=4 kind=FileNotFoundError" in capsys.readouterr().err


def test_main_sin_convergencia(tmp_path, capsys, monkeypatch):
    def falla(*args, **kwargs):
        raise ConvergenciaError("sin convergencia", 0.5)

    monkeypatch.setattr("cli.experimentos.solve_fixed_point", falla)
    codigo = main(["ctc", "--circuit", os.path.join(CIRCUITOS, "swap.txt"), "--output", str(tmp_path / "x.csv")])
    assert codigo == 3
    assert "error=3 kind=ConvergenciaError message=sin convergencia" in capsys.readouterr().err


def test_barrido_de_la_pagina_no_deja_temporales(tmp_path, monkeypatch):
    from cli.app_barridos import ejecutar_barrido

    monkeypatch.setattr(tempfile, "tempdir", str(tmp_path))
    df = ejecutar_barrido("seed", [str(2**60), "3"], 500, 0)
    assert list(df["seed"]) == [str(2**60), "3"]
    assert list(tmp_path.iterdir()) == []
