import itertools
import math

import numpy as np
import pytest

from channels.canales import DecoherenceSwitch, werner_state
from games.chsh import (
    PAIRS,
    TSIRELSON,
    ChshEstimate,
    ChshSettings,
    DichotomicObservable,
    canonical_settings,
    chsh_operator,
    classical_maximizers,
    classical_strategy_max,
    correlation,
    derive_stream,
    estimate_chsh,
    exact_chsh,
    joint_outcome_distribution,
    sample_round,
    sample_rounds,
    strategy_value,
)
from qmath.densidad import (
    DimensionError,
    EstadoInvalidoError,
    bell_state,
    maximally_mixed,
    product_state,
    random_density_matrix,
)

Z0 = DichotomicObservable(0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


# ---------------------------------------------------------------------------
# Observables y tipos
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("theta", [0.0, 0.3, math.pi / 4, -1.2, math.pi])
def test_observable_dicotomico(theta):
    o = DichotomicObservable(theta).matrix
    np.testing.assert_allclose(o, o.conj().T, atol=1e-15)
    np.testing.assert_allclose(o @ o, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(o), [-1, 1], atol=1e-12)


def test_pares_en_orden_canonico():
    assert [(p.a_index, p.b_index) for p in PAIRS] == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert [p.sign for p in PAIRS] == [1, 1, 1, -1]


def test_estimacion_valida_invariantes():
    with pytest.raises(EstadoInvalidoError):
        ChshEstimate(2.5, 0.0, (1, 1, 1, 1), (1.0, 1.0, 1.0, 1.0))
    with pytest.raises(EstadoInvalidoError):
        ChshEstimate(2.2, 0.0, (1, 1, 1, 1), (1.1, 1.0, 0.0, 0.1))


def test_error_estandar_no_se_anula_con_rondas_unanimes():
    unos = np.ones(2)
    est = ChshEstimate.from_products([unos, unos, unos, -unos])
    assert est.exp == 4.0
    assert est.stderr == pytest.approx(math.sqrt(4 * 0.75 / 2))
    assert est.exp - 5 * est.stderr < 2.0


def test_error_estandar_usa_varianza_muestral_con_muchas_rondas():
    mitad = np.array([1.0, -1.0] * 500)
    est = ChshEstimate.from_products([mitad] * 4)
    assert est.exp == 0.0
    assert est.stderr == pytest.approx(math.sqrt(4 * (1000 / 999) / 1000))


def test_ajustes_necesitan_dos_angulos():
    with pytest.raises(DimensionError):
        ChshSettings((0.0,), (0.0, 1.0))


# ---------------------------------------------------------------------------
# Distribuciones exactas
# ---------------------------------------------------------------------------


def test_bell_zz_perfectamente_correlacionado():
    p = joint_outcome_distribution(bell_state(), Z0, Z0)
    np.testing.assert_allclose(p, [[0.5, 0.0], [0.0, 0.5]], atol=1e-12)


def test_producto_factoriza(rng):
    a, b = random_density_matrix(2, rng), random_density_matrix(2, rng)
    oa, ob = DichotomicObservable(0.7), DichotomicObservable(-0.4)
    p = joint_outcome_distribution(product_state(a, b), oa, ob)
    np.testing.assert_allclose(p, np.outer(p.sum(axis=1), p.sum(axis=0)), atol=1e-12)


def test_mixto_uniforme():
    p = joint_outcome_distribution(maximally_mixed(4), DichotomicObservable(0.2), DichotomicObservable(1.1))
    np.testing.assert_allclose(p, np.full((2, 2), 0.25), atol=1e-12)


def test_distribucion_solo_dos_qubits():
    with pytest.raises(DimensionError):
        joint_outcome_distribution(maximally_mixed(8), Z0, Z0)


def test_correlacion_bell_es_coseno(rng):
    for ta, tb in rng.uniform(-math.pi, math.pi, size=(100, 2)):
        c = correlation(bell_state(), DichotomicObservable(ta), DichotomicObservable(tb))
        assert c == pytest.approx(math.cos(ta - tb), abs=1e-12)


def test_exact_chsh_bell_canonico():
    assert exact_chsh(bell_state(), canonical_settings()) == pytest.approx(TSIRELSON, abs=1e-12)


def test_exact_chsh_acepta_observables():
    a = [DichotomicObservable(0.0), DichotomicObservable(math.pi / 2)]
    b = [DichotomicObservable(math.pi / 4), DichotomicObservable(-math.pi / 4)]
    assert exact_chsh(bell_state(), a, b) == pytest.approx(TSIRELSON, abs=1e-12)


def test_exact_chsh_mixto_es_cero():
    assert exact_chsh(maximally_mixed(4), canonical_settings()) == pytest.approx(0.0, abs=1e-15)


def test_exact_chsh_coincide_con_operador(rng):
    for _ in range(20):
        rho = random_density_matrix(4, rng)
        ajustes = ChshSettings(tuple(rng.uniform(-3, 3, 2)), tuple(rng.uniform(-3, 3, 2)))
        traza = abs(np.real(np.trace(rho.matrix @ chsh_operator(ajustes))))
        assert exact_chsh(rho, ajustes) == pytest.approx(traza, abs=1e-12)


def test_cota_de_tsirelson(rng):
    for _ in range(2000):
        rho = random_density_matrix(4, rng, rank=int(rng.integers(1, 5)))
        ajustes = ChshSettings(tuple(rng.uniform(-math.pi, math.pi, 2)), tuple(rng.uniform(-math.pi, math.pi, 2)))
        assert exact_chsh(rho, ajustes) <= TSIRELSON + 1e-9


def test_productos_respetan_cota_clasica(rng):
    for _ in range(2000):
        rho = product_state(random_density_matrix(2, rng), random_density_matrix(2, rng))
        ajustes = ChshSettings(tuple(rng.uniform(-math.pi, math.pi, 2)), tuple(rng.uniform(-math.pi, math.pi, 2)))
        assert exact_chsh(rho, ajustes) <= 2 + 1e-9


# ---------------------------------------------------------------------------
# Muestreo
# ---------------------------------------------------------------------------


def test_muestreo_reproducible():
    a, b = DichotomicObservable(0.3), DichotomicObservable(1.0)
    x1, y1 = sample_rounds(bell_state(), a, b, 1000, derive_stream(5, 0))
    x2, y2 = sample_rounds(bell_state(), a, b, 1000, derive_stream(5, 0))
    np.testing.assert_array_equal(x1, x2)
    np.testing.assert_array_equal(y1, y2)


def test_ronda_individual_reproducible():
    a, b = DichotomicObservable(0.3), DichotomicObservable(1.0)
    g1, g2 = np.random.default_rng(3), np.random.default_rng(3)
    r1 = [sample_round(bell_state(), a, b, g1) for _ in range(50)]
    r2 = [sample_round(bell_state(), a, b, g2) for _ in range(50)]
    assert r1 == r2
    assert all(x in (1, -1) and y in (1, -1) for x, y in r1)


def test_bell_zz_nunca_anticorrelaciona():
    x, y = sample_rounds(bell_state(), Z0, Z0, 100_000, np.random.default_rng(0))
    assert np.all(x == y)


def test_frecuencias_cerca_de_la_distribucion(rng):
    rho = random_density_matrix(4, rng)
    a, b = DichotomicObservable(0.4), DichotomicObservable(2.1)
    p = joint_outcome_distribution(rho, a, b)
    n = 1_000_000
    x, y = sample_rounds(rho, a, b, n, np.random.default_rng(17))
    for i, sx in enumerate((1, -1)):
        for j, sy in enumerate((1, -1)):
            frecuencia = np.mean((x == sx) & (y == sy))
            sigma = math.sqrt(p[i, j] * (1 - p[i, j]) / n)
            assert abs(frecuencia - p[i, j]) <= 4 * sigma + 1e-12


def test_substreams_distintos():
    u0 = derive_stream(10, 0).random(8)
    u1 = derive_stream(10, 1).random(8)
    assert not np.array_equal(u0, u1)


# ---------------------------------------------------------------------------
# Estimación CHSH
# ---------------------------------------------------------------------------


def test_estimacion_bell_satura_tsirelson():
    est = estimate_chsh(bell_state(), canonical_settings(), None, 100_000, seed=1)
    assert est.counts_per_pair == (100_000,) * 4
    assert abs(est.exp - TSIRELSON) <= 5 * est.stderr
    assert est.violates


def test_estimacion_bell_desfasado_angulos_cero():
    rho = DecoherenceSwitch(on=True, strength=1.0).apply(bell_state())
    est = estimate_chsh(rho, (0.0, 0.0), (0.0, 0.0), 1000, seed=3)
    assert est.per_pair_means == (1.0, 1.0, 1.0, 1.0)
    assert est.exp == 2.0


def test_estimacion_werner_medio():
    est = estimate_chsh(werner_state(0.5), canonical_settings(), None, 100_000, seed=4)
    assert abs(est.exp - math.sqrt(2)) <= 5 * est.stderr


def test_estimacion_paralela_identica_a_secuencial():
    secuencial = estimate_chsh(bell_state(), canonical_settings(), None, 20_000, seed=8, workers=1)
    paralela = estimate_chsh(bell_state(), canonical_settings(), None, 20_000, seed=8, workers=4)
    assert secuencial == paralela


def test_estimacion_converge_a_exacto():
    rho = werner_state(0.9)
    exacto = exact_chsh(rho, canonical_settings())
    estimaciones = [estimate_chsh(rho, canonical_settings(), None, 10_000, seed=s) for s in range(200)]
    dentro = sum(abs(e.exp - exacto) <= 5 * e.stderr for e in estimaciones)
    assert dentro >= 198


def test_estimacion_rondas_invalidas():
    with pytest.raises(DimensionError):
        estimate_chsh(bell_state(), canonical_settings(), None, 0, seed=1)


# ---------------------------------------------------------------------------
# Estrategias clásicas
# ---------------------------------------------------------------------------


def test_maximo_clasico_es_dos():
    assert classical_strategy_max() == 2.0


def test_maximizadores_alcanzan_dos():
    maximos = classical_maximizers()
    assert maximos
    assert all(strategy_value(*e) == 2 for e in maximos)
    assert (1, 1, 1, 1) in maximos


def test_mezclas_clasicas_no_superan_dos(rng):
    todas = list(itertools.product((1, -1), repeat=4))
    for _ in range(1000):
        w = rng.dirichlet(np.ones(len(todas)))
        medias = [
            sum(wi * e[par.a_index - 1] * e[2 + par.b_index - 1] for wi, e in zip(w, todas)) for par in PAIRS
        ]
        assert abs(sum(par.sign * m for par, m in zip(PAIRS, medias))) <= 2 + 1e-12


def test_veredicto_de_la_pagina_sigue_la_afirmacion():
    from games.app_chsh import veredicto_chsh

    certificada = ChshEstimate(2.82, 0.01, (1, 1, 1, 1), (0.705, 0.705, 0.705, -0.705))
    ruidosa = ChshEstimate(2.4, 0.2, (10, 10, 10, 10), (0.6, 0.6, 0.6, -0.6))
    clasica = ChshEstimate(1.9, 0.01, (1, 1, 1, 1), (0.475, 0.475, 0.475, -0.475))

    assert veredicto_chsh(certificada)[0] == "success"
    nivel, texto = veredicto_chsh(ruidosa)
    assert ruidosa.violates and nivel == "info"
    assert "cannot_certify" in texto
    assert veredicto_chsh(clasica)[0] == "warning"
