# games/app_chsh.py
import math

import pandas as pd
import streamlit as st

from channels.canales import DecoherenceSwitch, werner_state
from games.chsh import (
    PAIRS,
    TSIRELSON,
    ChshEstimate,
    ChshSettings,
    canonical_settings,
    estimate_chsh,
    exact_chsh,
    workers_por_defecto,
)
from protocol.verificador import SeparabilityClaim, claim_from_estimate
from qmath.densidad import bell_state, basis_state, is_entangled_2q, plus_state, product_state
from utils import SimuladorError, slugify, tabla_a_csv, tabla_a_excel


def _estado(preset: str, p: float):
    if preset == "Bell |Φ+⟩":
        return bell_state()
    if preset == "Werner":
        return werner_state(p)
    return product_state(basis_state(0, 2), plus_state())


def _angulos(clave: str, defecto: tuple) -> tuple:
    c1, c2 = st.columns(2)
    with c1:
        t1 = st.number_input(f"θ {clave}1 (rad)", value=float(defecto[0]), format="%.6f", key=f"ang_{clave}1")
    with c2:
        t2 = st.number_input(f"θ {clave}2 (rad)", value=float(defecto[1]), format="%.6f", key=f"ang_{clave}2")
    return (t1, t2)


def veredicto_chsh(est: ChshEstimate) -> tuple[str, str]:
    """(función de aviso de Streamlit, texto) según la afirmación del verificador."""
    afirmacion = claim_from_estimate(est)
    if afirmacion is SeparabilityClaim.CHANNEL_CERTIFIED:
        return "success", f"Violación CHSH: canal cuántico certificado ({afirmacion.value})."
    if est.violates:
        return "info", (
            f"EXP estimado > 2 pero dentro de 5 errores estándar ({afirmacion.value}): "
            "hacen falta más rondas para certificar."
        )
    return "warning", "Sin violación: los datos son compatibles con un modelo clásico."


def run_modulo_chsh():
    st.title("🎲 Juego CHSH con interruptor de decoherencia")
    st.caption(
        "EXP = |⟨A1B1⟩ + ⟨A1B2⟩ + ⟨A2B1⟩ − ⟨A2B2⟩|. Cota clásica 2, cota de Tsirelson 2√2 ≈ 2.8284."
    )

    c1, c2 = st.columns([2, 1])
    with c1:
        preset = st.selectbox("Estado compartido", ["Bell |Φ+⟩", "Werner", "Producto |0⟩|+⟩"])
    with c2:
        p = st.slider("p (Werner)", 0.0, 1.0, 0.8, 0.01, disabled=preset != "Werner")

    c3, c4 = st.columns(2)
    with c3:
        encendido = st.toggle("Interruptor H_dec encendido", value=False)
    with c4:
        intensidad = st.slider("Intensidad del desfase", 0.0, 1.0, 1.0, 0.05, disabled=not encendido)

    canon = canonical_settings()
    with st.expander("Ángulos de medición (plano Z-X)"):
        angulos_a = _angulos("A", canon.angles_a)
        angulos_b = _angulos("B", canon.angles_b)

    c5, c6 = st.columns(2)
    with c5:
        rondas = st.number_input("Rondas por par de ajustes", min_value=1, value=100_000, step=10_000)
    with c6:
        semilla = st.number_input("Semilla", min_value=0, value=20240101, step=1)

    if not st.button("▶️ Ejecutar", use_container_width=True):
        return

    try:
        estado = DecoherenceSwitch(on=encendido, strength=intensidad).apply(_estado(preset, p))
        ajustes = ChshSettings(angulos_a, angulos_b)
        with st.spinner("Muestreando..."):
            est = estimate_chsh(estado, ajustes, None, int(rondas), int(semilla), workers_por_defecto())
        exacto = exact_chsh(estado, ajustes)
    except SimuladorError as e:
        st.error(str(e))
        return
    except Exception as e:
        st.error("Error inesperado")
        st.exception(e)
        return

    m1, m2, m3 = st.columns(3)
    m1.metric("EXP estimado", f"{est.exp:.4f}", f"± {est.stderr:.4f}")
    m2.metric("EXP exacto", f"{exacto:.6f}")
    m3.metric("Entrelazado (PPT)", "Sí" if is_entangled_2q(estado) else "No")

    nivel, texto = veredicto_chsh(est)
    getattr(st, nivel)(texto)
    if exacto > TSIRELSON + 1e-9:
        st.error("EXP exacto por encima de 2√2: revisar el estado.")

    df = pd.DataFrame(
        {
            "par": [f"A{par.a_index}B{par.b_index}" for par in PAIRS],
            "signo": [par.sign for par in PAIRS],
            "rondas": list(est.counts_per_pair),
            "media": list(est.per_pair_means),
        }
    )
    st.dataframe(df, use_container_width=True, hide_index=True)

    nombre = slugify(f"chsh_{preset}_{'on' if encendido else 'off'}_{semilla}")
    d1, d2 = st.columns(2)
    with d1:
        st.download_button("⬇️ CSV", tabla_a_csv(df), file_name=f"{nombre}.csv", mime="text/csv")
    with d2:
        st.download_button(
            "⬇️ Excel",
            tabla_a_excel(df, "CHSH"),
            file_name=f"{nombre}.xlsx",
            mime="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
        )
    st.caption(f"Ángulos usados: A = {angulos_a}, B = {angulos_b}; π/4 = {math.pi / 4:.6f}")
