# protocol/app_discriminacion.py
import pandas as pd
import streamlit as st

from channels.canales import DecoherenceSwitch, werner_state
from games.chsh import canonical_settings, derive_seed, workers_por_defecto
from protocol.verificador import (
    MachineSpec,
    Decision,
    contingency_tables,
    discriminate,
    imitacion_clasica,
    marginal_equivalence_check,
    run_protocol,
    verifier_separability_claim,
)
from qmath.densidad import bell_state
from utils import SimuladorError, tabla_a_csv, tabla_a_excel

RIVALES = {
    "Computador monolítico (mismo ρ)": "monolithic",
    "Monolítico con |AB⟩ global (conspiración)": "conspiracy",
    "Correlación clásica": "classical",
}


def _rival(clave: str, rho):
    if clave == "classical":
        return imitacion_clasica()
    if clave == "conspiracy":
        return MachineSpec.monolithic_purified(rho)
    return MachineSpec.monolithic(rho)


def _tabla_conteos(t, etiqueta: str) -> pd.DataFrame:
    conteos = contingency_tables(t)
    df = pd.DataFrame(conteos, columns=["(+,+)", "(+,-)", "(-,+)", "(-,-)"])
    df.insert(0, "par", ["A1B1", "A1B2", "A2B1", "A2B2"])
    df.insert(0, "maquina", etiqueta)
    return df


def run_modulo_discriminacion():
    st.title("🕵️ Verificador LOCC: ¿probadores separados o monolítico?")
    st.caption(
        "C solo ve preguntas y respuestas clásicas. La prueba chi-cuadrado compara dos transcripciones; "
        "la indecidibilidad se ilustra con la identidad de distribuciones, no se demuestra aquí."
    )

    c1, c2 = st.columns(2)
    with c1:
        p = st.slider("p del estado de Werner compartido (1 = Bell)", 0.0, 1.0, 1.0, 0.01)
        rival = RIVALES[st.selectbox("Máquina rival", list(RIVALES))]
    with c2:
        rondas = st.number_input("Rondas por transcripción", min_value=4, value=100_000, step=10_000)
        semilla = st.number_input("Semilla maestra", min_value=0, value=7, step=1)
    c3, c4 = st.columns(2)
    with c3:
        encendido = st.toggle("Interruptor H_dec encendido", value=False)
    with c4:
        alpha = st.number_input("alpha", min_value=0.0001, max_value=0.5, value=0.01, format="%.4f")

    if not st.button("▶️ Ejecutar protocolo", use_container_width=True):
        return

    try:
        rho = bell_state() if p == 1.0 else werner_state(p)
        ajustes = canonical_settings()
        switch = DecoherenceSwitch(on=encendido)
        workers = workers_por_defecto()
        maquina_b = _rival(rival, rho)
        with st.spinner("Generando transcripciones..."):
            t1 = run_protocol(MachineSpec.separable(rho), switch, ajustes, int(rondas), derive_seed(int(semilla), 0), workers)
            t2 = run_protocol(maquina_b, switch, ajustes, int(rondas), derive_seed(int(semilla), 1), workers)
        veredicto = discriminate(t1, t2, float(alpha))
    except SimuladorError as e:
        st.error(str(e))
        return
    except Exception as e:
        st.error("Error inesperado")
        st.exception(e)
        return

    m1, m2, m3 = st.columns(3)
    m1.metric("χ²", f"{veredicto.chi_square:.3f}")
    m2.metric("Grados de libertad", veredicto.degrees_of_freedom)
    m3.metric("p-valor", f"{veredicto.p_value:.4g}")

    if veredicto.decision is Decision.DISTINGUISHED:
        st.warning("C distingue las transcripciones.")
    else:
        st.success("C no distingue las transcripciones.")

    if maquina_b.is_quantum:
        st.info(f"Desviación exacta entre caminos de muestreo: {marginal_equivalence_check(maquina_b, ajustes):.2e}")
    st.write(f"Afirmación del verificador sobre la máquina separable: **{verifier_separability_claim(t1).value}**")

    df = pd.concat([_tabla_conteos(t1, "separable"), _tabla_conteos(t2, rival)], ignore_index=True)
    st.dataframe(df, use_container_width=True, hide_index=True)

    d1, d2 = st.columns(2)
    with d1:
        st.download_button("⬇️ Conteos CSV", tabla_a_csv(df), file_name=f"conteos_{semilla}.csv", mime="text/csv")
    with d2:
        st.download_button(
            "⬇️ Transcripción A (Excel)",
            tabla_a_excel(t1.table(), "Transcripcion"),
            file_name=f"transcripcion_a_{semilla}.xlsx",
            mime="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
        )
