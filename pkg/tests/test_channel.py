import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backscatter_game.channel import (
    LinkGains,
    PhyConfig,
    backscatter_tx_power,
    backscattered_bits,
    dbm_to_watts,
    friis_gain,
    harvested_energy,
    received_power,
    sinr,
    thermal_noise,
    watts_to_dbm,
)
from backscatter_game.errors import DomainError
from backscatter_game.stackelberg import GameParams

# Regression constants evaluated once with plain `math` on the closed formulas.
FRIIS_REF = 2.646309789218491e-06
RECEIVED_POWER_REF = 6.943631754751217e-05
SINR_HALF_1W_REF = 186.5982075868707
BITS_ARGMAX_PHI = 0.953953953953954  # index 953 of linspace(0, 1, 1000)
BITS_MAX = 30183867.647086147


@pytest.fixture
def reference():
    return LinkGains.from_phy(PhyConfig()), GameParams()


def test_friis_unit_factors_cancel():
    assert friis_gain(1, 1, 4 * math.pi, 1) == pytest.approx(1.0, rel=1e-15)


def test_friis_regression():
    assert friis_gain(3.981, 1.514, 0.1249, 15) == pytest.approx(FRIIS_REF, rel=1e-12)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(1e-3, 1), st.floats(0.1, 1e3))
def test_friis_inverse_square(gt, gr, lam, d):
    assert friis_gain(gt, gr, lam, 2 * d) == pytest.approx(friis_gain(gt, gr, lam, d) / 4, rel=1e-14)


@pytest.mark.parametrize("bad", [(0, 1, 1, 1), (1, -1, 1, 1), (1, 1, 0, 1), (1, 1, 1, 0)])
def test_friis_rejects_non_positive(bad):
    with pytest.raises(DomainError):
        friis_gain(*bad)


def test_received_power():
    unit = PhyConfig(p_hap=1.0, delta=1.0, g_t=1.0, g_r=1.0, lambda_hap=4 * math.pi, d_hap=1.0)
    assert received_power(unit) == pytest.approx(1.0, rel=1e-15)
    assert received_power(PhyConfig()) == pytest.approx(RECEIVED_POWER_REF, rel=1e-12)
    assert received_power(PhyConfig(delta=0.0)) == 0.0


def test_harvested_energy():
    assert harvested_energy(0, 5) == 5
    assert harvested_energy(1, 5) == 0
    assert harvested_energy(0.25, 2.0) == 1.5
    with pytest.raises(DomainError):
        harvested_energy(1.5, 1.0)
    with pytest.raises(DomainError):
        harvested_energy(-0.1, 1.0)


def test_backscatter_tx_power():
    assert backscatter_tx_power(0.5, 1.0) == 2.0
    assert backscatter_tx_power(1.0, 0.0) == 0.0
    p_r = 1.0
    assert backscatter_tx_power(1e-6, harvested_energy(1e-6, p_r)) > 1e5
    with pytest.raises(DomainError):
        backscatter_tx_power(0.0, 1.0)


def test_sinr_special_points(reference):
    gains, _ = reference
    assert sinr(0.5, 0.0, gains) == pytest.approx(gains.h * gains.refl / gains.n0, rel=1e-15)
    assert sinr(1.0, 0.3, gains) == 0.0
    assert math.isinf(sinr(0.0, 0.3, gains))
    assert sinr(0.5, 1.0, gains) == pytest.approx(SINR_HALF_1W_REF, rel=1e-12)
    with pytest.raises(DomainError):
        sinr(0.5, -1.0, gains)


@given(st.floats(0.01, 0.99), st.floats(0, 5), st.floats(1e-3, 1e3))
def test_sinr_homogeneous(phi, p_j, c):
    g = LinkGains(h=0.3, g=0.7, refl=4.0, n0=0.02)
    scaled = LinkGains(h=g.h * c, g=g.g * c, refl=g.refl, n0=g.n0 * c)
    assert sinr(phi, p_j, scaled) == pytest.approx(sinr(phi, p_j, g), rel=1e-12)


def test_bits_vanish_at_the_ends(reference):
    gains, params = reference
    assert backscattered_bits(0.0, 0.5, gains, params) == 0.0
    assert backscattered_bits(1.0, 0.5, gains, params) == 0.0


def test_bits_grid_argmax_is_interior(reference):
    gains, params = reference
    phi = np.linspace(0, 1, 1000)
    bits = backscattered_bits(phi, 0.0, gains, params)
    i = int(np.argmax(bits))
    assert 0 < phi[i] < 1
    assert phi[i] == pytest.approx(BITS_ARGMAX_PHI, abs=1e-15)
    assert bits[i] == pytest.approx(BITS_MAX, rel=1e-12)


def test_bits_decrease_with_jamming():
    rng = np.random.default_rng(7)
    params = GameParams()
    for _ in range(50):
        gains = LinkGains(h=rng.uniform(0.1, 2), g=rng.uniform(0.1, 2), refl=4.0, n0=rng.uniform(0.01, 0.1))
        phi = rng.uniform(0.01, 0.99)
        p = np.sort(rng.uniform(0, 5, 20))
        bits = backscattered_bits(phi, p, gains, params)
        assert np.all(np.diff(bits) < 0)
        assert np.all(bits > 0)


@settings(max_examples=200)
@given(st.floats(-60, 60))
def test_dbm_round_trip(x):
    assert watts_to_dbm(dbm_to_watts(x)) == pytest.approx(x, rel=1e-12, abs=1e-12)


def test_dbm_values():
    assert dbm_to_watts(30) == 1.0
    assert dbm_to_watts(0) == pytest.approx(1e-3, rel=1e-15)
    assert dbm_to_watts(43) == pytest.approx(19.952623149688797, rel=1e-15)
    with pytest.raises(DomainError):
        watts_to_dbm(0.0)


def test_phy_config_validation():
    with pytest.raises(DomainError) as exc:
        PhyConfig(d_hap=-1.0)
    assert exc.value.field == "d_hap"
    with pytest.raises(DomainError):
        PhyConfig(gamma0=0.5, gamma1=0.5)
    with pytest.raises(DomainError):
        PhyConfig(delta=1.5)


def test_default_noise_is_thermal():
    assert PhyConfig().n0 == pytest.approx(thermal_noise(1e6))
    assert watts_to_dbm(PhyConfig().n0) == pytest.approx(-114.0, abs=0.1)
