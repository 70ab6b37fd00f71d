import math

import numpy as np
import pytest

from channels.canales import (
    CanalInvalidoError,
    DecoherenceSwitch,
    QuantumChannel,
    apply,
    compose,
    dephasing_channel,
    identity_channel,
    werner_state,
)
from games.chsh import canonical_settings, chsh_operator, exact_chsh
from qmath.densidad import (
    DimensionError,
    bell_state,
    is_entangled_2q,
    maximally_mixed,
    plus_state,
    purify,
    random_density_matrix,
)

RAIZ2 = math.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(99)


def test_canal_exige_preservar_traza():
    with pytest.raises(CanalInvalidoError):
        QuantumChannel(2, 2, (0.5 * np.eye(2),))


def test_canal_exige_forma_de_kraus():
    with pytest.raises(CanalInvalidoError):
        QuantumChannel(2, 2, (np.eye(3),))


def test_identidad_no_cambia_estados(rng):
    rho = random_density_matrix(4, rng)
    np.testing.assert_allclose(apply(identity_channel(4), rho).matrix, rho.matrix, atol=1e-15)


def test_apply_dimension_incompatible():
    with pytest.raises(DimensionError):
        apply(identity_channel(2), bell_state())


def test_desfase_total_de_plus_es_mixto():
    out = apply(dephasing_channel(1, 1.0), plus_state())
    np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-15)


def test_desfase_cero_es_identidad(rng):
    rho = random_density_matrix(4, rng)
    np.testing.assert_allclose(apply(dephasing_channel(2, 0.0), rho).matrix, rho.matrix, atol=1e-15)


def test_desfase_total_de_bell():
    out = apply(dephasing_channel(2, 1.0), bell_state())
    np.testing.assert_allclose(out.matrix, np.diag([0.5, 0, 0, 0.5]), atol=1e-15)


def test_desfase_escala_coherencias(rng):
    rho = random_density_matrix(4, rng)
    s = 0.3
    out = apply(dephasing_channel(2, s), rho).matrix
    fuera = ~np.eye(4, dtype=bool)
    np.testing.assert_allclose(out[fuera], (1 - s) * rho.matrix[fuera], atol=1e-14)
    np.testing.assert_allclose(np.diag(out), np.diag(rho.matrix), atol=1e-15)


@pytest.mark.parametrize("s", [-0.1, 1.5])
def test_desfase_intensidad_fuera_de_rango(s):
    with pytest.raises(CanalInvalidoError):
        dephasing_channel(2, s)


def test_canales_preservan_traza(rng):
    for s in np.linspace(0, 1, 11):
        ch = dephasing_channel(2, float(s))
        for _ in range(10):
            out = apply(ch, random_density_matrix(4, rng))
            assert abs(np.trace(out.matrix) - 1) <= 1e-12


@pytest.mark.parametrize("s", [0.1, 0.4, 0.75, 1.0])
def test_desfase_semigrupo(rng, s):
    doble = compose(dephasing_channel(2, s), dephasing_channel(2, s))
    equivalente = dephasing_channel(2, 1 - (1 - s) ** 2)
    for _ in range(10):
        rho = random_density_matrix(4, rng)
        np.testing.assert_allclose(apply(doble, rho).matrix, apply(equivalente, rho).matrix, atol=1e-12)


def test_desfase_sobre_subconjunto_de_qubits():
    # solo el par (0, 1) de un registro de 4 qubits; la reducción al par coincide
    global_ = purify(bell_state()).density()
    out = apply(dephasing_channel(4, 1.0, qubits=(0, 1)), global_)
    par = np.einsum("ijkj->ik", out.matrix.reshape(4, 4, 4, 4))
    np.testing.assert_allclose(par, np.diag([0.5, 0, 0, 0.5]), atol=1e-12)


def test_desfase_qubits_invalidos():
    with pytest.raises(DimensionError):
        dephasing_channel(2, 1.0, qubits=(0, 2))


def test_interruptor_apagado_es_identidad(rng):
    rho = random_density_matrix(4, rng)
    assert DecoherenceSwitch(on=False, strength=1.0).apply(rho) is rho
    assert len(DecoherenceSwitch(on=False).channel().kraus_ops) == 1


def test_interruptor_intensidad_invalida():
    with pytest.raises(CanalInvalidoError):
        DecoherenceSwitch(on=True, strength=2.0)


def test_werner_extremos():
    np.testing.assert_allclose(werner_state(0.0).matrix, maximally_mixed(4).matrix, atol=1e-15)
    np.testing.assert_allclose(werner_state(1.0).matrix, bell_state().matrix, atol=1e-15)


def test_werner_fuera_de_rango():
    with pytest.raises(CanalInvalidoError):
        werner_state(-0.1)


def test_werner_medio_entrelazado_sin_violacion():
    rho = werner_state(0.5)
    assert is_entangled_2q(rho)
    assert exact_chsh(rho, canonical_settings()) == pytest.approx(RAIZ2, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 1 / RAIZ2, 1.0])
def test_werner_valor_chsh_exacto(p):
    op = chsh_operator(canonical_settings())
    valor = float(np.real(np.trace(werner_state(p).matrix @ op)))
    assert valor == pytest.approx(2 * RAIZ2 * p, abs=1e-12)


@pytest.mark.parametrize("p", [0.34, 0.5, 0.6, 0.7, 1 / RAIZ2])
def test_werner_ambiguo_entrelazado_y_clasico(p):
    rho = werner_state(p)
    assert is_entangled_2q(rho)
    assert exact_chsh(rho, canonical_settings()) <= 2 + 1e-12
