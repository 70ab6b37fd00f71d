# cli/app_barridos.py
import os
import tempfile

import pandas as pd
import streamlit as st

from cli.experimentos import BARRIBLES, ExperimentConfig, leer_resultados, sweep
from utils import SimuladorError, tabla_a_csv, tabla_a_excel

ESCENARIOS = {
    "Werner: entrelazamiento vs violación (p)": ("werner_p", "0.2, 0.4, 0.6, 0.75, 1.0"),
    "Bell con desfase (intensidad)": ("switch_strength", "0, 0.5, 1"),
}


def _valores(texto: str) -> list[str]:
    return [v.strip() for v in texto.replace(";", ",").split(",") if v.strip()]


def ejecutar_barrido(parametro: str, valores: list[str], rondas: int, semilla: int) -> pd.DataFrame:
    """Barrido CHSH en un directorio temporal que se borra al terminar."""
    estado = "werner" if parametro == "werner_p" else "bell"
    with tempfile.TemporaryDirectory(prefix="qsim_") as carpeta:
        destino = os.path.join(carpeta, "barrido.csv")
        plantilla = ExperimentConfig(
            experiment="chsh",
            state=estado,
            switch_on=parametro == "switch_strength",
            rounds=int(rondas),
            seed=int(semilla),
            output_path=destino,
        )
        sweep(plantilla, parametro, valores)
        return leer_resultados(destino)


def run_modulo_barridos():
    st.title("📈 Barridos de parámetros")
    st.caption("Una fila por valor, misma semilla maestra. La tabla es la que escribe `python -m cli sweep`.")

    escenario = st.selectbox("Escenario", list(ESCENARIOS))
    parametro, defecto = ESCENARIOS[escenario]
    parametro = st.selectbox("Parámetro", list(BARRIBLES), index=list(BARRIBLES).index(parametro))
    texto = st.text_input("Valores (separados por comas)", value=defecto)
    c1, c2 = st.columns(2)
    with c1:
        rondas = st.number_input("Rondas por par", min_value=1, value=20_000, step=5_000)
    with c2:
        semilla = st.number_input("Semilla", min_value=0, value=11, step=1)

    if not st.button("▶️ Barrer", use_container_width=True):
        return

    try:
        with st.spinner("Ejecutando..."):
            df = ejecutar_barrido(parametro, _valores(texto), int(rondas), int(semilla))
    except (SimuladorError, ValueError) as e:
        st.error(str(e))
        return
    except Exception as e:
        st.error("Error inesperado")
        st.exception(e)
        return

    visibles = [parametro, "exp", "stderr", "exact_exp", "violation", "entangled", "claim"]
    st.dataframe(df[visibles], use_container_width=True, hide_index=True)
    st.success(f"{len(df)} filas.")

    d1, d2 = st.columns(2)
    with d1:
        st.download_button("⬇️ CSV", tabla_a_csv(df), file_name=f"barrido_{parametro}.csv", mime="text/csv")
    with d2:
        st.download_button(
            "⬇️ Excel",
            tabla_a_excel(df, "Barrido"),
            file_name=f"barrido_{parametro}.xlsx",
            mime="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
        )
