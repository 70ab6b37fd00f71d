# qmath/app_entropia.py
import numpy as np
import pandas as pd
import streamlit as st

from qmath.densidad import (
    DensityMatrix,
    best_bipartition,
    bell_state,
    ghz_state,
    max_qubits,
    parse_matrix,
    purity,
    random_pure_state,
    von_neumann_entropy,
)
from utils import SimuladorError, tabla_a_csv


def _estado(preset: str, n: int, semilla: int, texto: str) -> DensityMatrix:
    if preset == "Bell |Φ+⟩":
        return bell_state()
    if preset == "GHZ":
        return ghz_state(n)
    if preset == "Aleatorio puro":
        return random_pure_state(2**n, np.random.default_rng(semilla)).density()
    return DensityMatrix(parse_matrix(texto))


def run_modulo_entropia():
    st.title("🔗 Entropía de entrelazamiento")
    st.caption("Entropías en nats. La máxima se busca sobre los cortes por subconjuntos de qubits.")

    preset = st.selectbox("Estado", ["Bell |Φ+⟩", "GHZ", "Aleatorio puro", "Matriz propia"])
    c1, c2 = st.columns(2)
    with c1:
        n = st.number_input("Qubits", min_value=2, max_value=max_qubits(), value=3, disabled=preset in ("Bell |Φ+⟩", "Matriz propia"))
    with c2:
        semilla = st.number_input("Semilla", min_value=0, value=1, disabled=preset != "Aleatorio puro")
    texto = ""
    if preset == "Matriz propia":
        texto = st.text_area("Matriz densidad (una fila por línea, entradas re±im i)", height=160)

    if not st.button("▶️ Calcular", use_container_width=True):
        return

    try:
        estado = _estado(preset, int(n), int(semilla), texto)
        s_total = von_neumann_entropy(estado)
        s_max, corte = best_bipartition(estado)
    except SimuladorError as e:
        st.error(str(e))
        return
    except Exception as e:
        st.error("Error inesperado")
        st.exception(e)
        return

    m1, m2, m3 = st.columns(3)
    m1.metric("Pureza Tr ρ²", f"{purity(estado):.6f}")
    m2.metric("S(ρ)", f"{s_total:.6f}")
    m3.metric("S máx. de corte", f"{s_max:.6f}")
    st.write(f"Mejor corte: qubits **{list(corte)}** frente al resto (ln 2 = {np.log(2):.6f}).")

    df = pd.DataFrame([{"estado": preset, "qubits": estado.n_qubits, "entropia_max": s_max, "corte": str(list(corte))}])
    st.download_button("⬇️ CSV", tabla_a_csv(df), file_name="entropia.csv", mime="text/csv")
