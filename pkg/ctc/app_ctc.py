# ctc/app_ctc.py
import os
import tempfile

import numpy as np
import pandas as pd
import streamlit as st

from ctc.deutsch import (
    ConvergenciaError,
    Method,
    circuit_output,
    parse_circuit_file,
    solve_fixed_point,
)
from qmath.densidad import von_neumann_entropy
from utils import SimuladorError, tabla_a_csv

CARPETA_CIRCUITOS = "circuitos"

METODOS = {
    "Automático (iteración y proyección)": None,
    "Solo iteración de Cesàro": Method.CESARO_ITERATION,
    "Solo proyección espectral": Method.EIGEN_PROJECTION,
}


def _circuitos_incluidos() -> list:
    if not os.path.isdir(CARPETA_CIRCUITOS):
        return []
    return sorted(f for f in os.listdir(CARPETA_CIRCUITOS) if f.endswith(".txt"))


def _matriz_df(m: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame([[f"{z.real:.6f}{z.imag:+.6f}i" for z in fila] for fila in np.asarray(m)])


def run_modulo_ctc():
    st.title("⏳ Curvas temporales cerradas (modelo de Deutsch)")
    st.caption("ρ = Tr_ch[U(ρ_in ⊗ ρ)U†]   y   ρ_out = Tr_tv[U(ρ_in ⊗ ρ)U†]")

    tab_incluido, tab_subir = st.tabs(["Circuitos incluidos", "Subir circuito"])
    ruta = None
    with tab_incluido:
        opciones = _circuitos_incluidos()
        if opciones:
            elegido = st.selectbox("Circuito", opciones)
            ruta = os.path.join(CARPETA_CIRCUITOS, elegido)
        else:
            st.info("No hay circuitos en la carpeta 'circuitos'.")
    with tab_subir:
        archivo = st.file_uploader("Archivo de circuito (.txt)", type=["txt"])
        if archivo is not None:
            tmp = tempfile.NamedTemporaryFile("wb", suffix=".txt", delete=False)
            tmp.write(archivo.getvalue())
            tmp.close()
            ruta = tmp.name

    metodo = METODOS[st.radio("Método", list(METODOS), horizontal=True)]

    if ruta is None or not st.button("▶️ Resolver punto fijo", use_container_width=True):
        return

    try:
        circuito, rho_in = parse_circuit_file(ruta)
        resultado = solve_fixed_point(circuito, rho_in, metodo=metodo)
        rho_out = circuit_output(circuito, rho_in, resultado)
    except ConvergenciaError as e:
        st.error(f"{e} (mejor residuo {e.mejor_residuo:.3e})")
        return
    except SimuladorError as e:
        st.error(str(e))
        return
    except Exception as e:
        st.error("Error inesperado")
        st.exception(e)
        return

    m1, m2, m3, m4 = st.columns(4)
    m1.metric("Residuo", f"{resultado.residual:.2e}")
    m2.metric("dim. subespacio fijo", resultado.fixed_subspace_dim)
    m3.metric("Método", resultado.method.value)
    m4.metric("S(ρ) [nats]", f"{von_neumann_entropy(resultado.rho):.6f}")

    if resultado.fixed_subspace_dim > 1:
        st.warning("Punto fijo no único: se devuelve el alcanzado desde el estado maximalmente mixto.")
    else:
        st.success("Punto fijo único.")

    c1, c2 = st.columns(2)
    with c1:
        st.markdown("**ρ (qubits en la CTC)**")
        df_rho = _matriz_df(resultado.rho.matrix)
        st.dataframe(df_rho, use_container_width=True)
        st.download_button("⬇️ ρ CSV", tabla_a_csv(df_rho), file_name="rho_ctc.csv", mime="text/csv")
    with c2:
        st.markdown("**ρ_out (qubits cronológicos)**")
        df_out = _matriz_df(rho_out.matrix)
        st.dataframe(df_out, use_container_width=True)
        st.download_button("⬇️ ρ_out CSV", tabla_a_csv(df_out), file_name="rho_out_ctc.csv", mime="text/csv")
