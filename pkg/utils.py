from __future__ import annotations

import logging
import os
import re
from io import BytesIO

import pandas as pd
from unidecode import unidecode

SALIDAS_POR_DEFECTO = "salidas"


class SimuladorError(Exception):
    """Base de los errores del simulador (validación, dimensiones, convergencia)."""


def leer_ajuste(nombre: str, defecto=None):
    """
    Streamlit (solo con la app en marcha): usa st.secrets[nombre].
    Fallback: variable de entorno con el mismo nombre y luego el defecto.
    """
    valor = None
    try:
        import streamlit as st

        if st.runtime.exists():
            valor = st.secrets.get(nombre)
    except Exception:
        valor = None

    if valor is None or valor == "":
        valor = os.getenv(nombre)

    if valor is None or valor == "":
        return defecto
    return valor


def leer_ajuste_int(nombre: str, defecto: int) -> int:
    valor = leer_ajuste(nombre, defecto)
    try:
        return int(valor)
    except (TypeError, ValueError):
        raise SimuladorError(f"{nombre} debe ser entero (recibido: {valor!r}).")


def configurar_logging(nivel: str | None = None) -> None:
    nivel = (nivel or leer_ajuste("QSIM_LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(
        level=getattr(logging, nivel, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def carpeta_salidas() -> str:
    return str(leer_ajuste("QSIM_SALIDAS", SALIDAS_POR_DEFECTO))


def asegurar_dirs(*rutas: str) -> None:
    for ruta in rutas or (carpeta_salidas(),):
        if ruta:
            os.makedirs(ruta, exist_ok=True)


def slugify(texto: str) -> str:
    t = unidecode(str(texto)).lower().strip()
    t = re.sub(r"[^a-z0-9\-_. ]+", "", t)
    t = re.sub(r"\s+", "_", t)
    return t[:100] or "resultado"


def ruta_hermana(ruta: str, sufijo: str, extension: str = ".txt") -> str:
    """'salidas/chsh.csv' + 'rho' -> 'salidas/chsh_rho.txt'."""
    base, _ = os.path.splitext(ruta)
    return f"{base}_{slugify(sufijo)}{extension}"


def tabla_a_excel(df: pd.DataFrame, hoja: str = "Resultados") -> bytes:
    buffer = BytesIO()
    with pd.ExcelWriter(buffer, engine="openpyxl") as writer:
        df.to_excel(writer, sheet_name=hoja[:31], index=False)
    return buffer.getvalue()


def tabla_a_csv(df: pd.DataFrame) -> bytes:
    return df.to_csv(index=False, lineterminator="\n").encode("utf-8")
