from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpo3.circuit import (
    CircuitParams, derive_coefficients, eta_coefficient, fit_to_measured, kerr_from_normal_ordering,
    normal_order_expansion, normal_ordered_matrix, pump_terms_from_normal_ordering,
    squid_modulation, table_one_device, table_one_template, taylor_coefficients,
)
from kpo3.errors import ConfigError, FitError


def toy(**kw):
    base = dict(N1=2, N2=4, EJ1a=50e9, EJ1b=70e9, EJ2=80e9, CJ1a=10e-15, CJ1b=14e-15,
                CJ2=16e-15, Cs=120e-15, phi_dc=0.9, phi_ac_amp=0.01)
    base.update(kw)
    return CircuitParams(**base)


circuits = st.builds(
    toy,
    N1=st.integers(1, 4), N2=st.integers(1, 8),
    EJ1a=st.floats(20e9, 150e9), EJ1b=st.floats(20e9, 150e9), EJ2=st.floats(20e9, 200e9),
    Cs=st.floats(50e-15, 400e-15), phi_dc=st.floats(0.0, 2.5), phi_ac_amp=st.floats(0, 0.05),
)


def test_squid_modulation_examples():
    assert squid_modulation(3.0, 5.0, 0.0) == pytest.approx((8.0, 0.0))
    ej, _ = squid_modulation(3.0, 5.0, np.pi)
    assert ej == pytest.approx(2.0)
    for phi in np.linspace(-3, 3, 13):
        assert squid_modulation(4.0, 4.0, phi)[1] == pytest.approx(0.0, abs=1e-15)


def test_squid_phase_is_odd():
    for phi in (0.3, 1.1, 2.7):
        assert squid_modulation(3.0, 5.0, -phi)[1] == pytest.approx(-squid_modulation(3.0, 5.0, phi)[1])


def test_taylor_examples_and_finite_differences():
    a, b = 50e9, 70e9
    ej0, ej1, _ = taylor_coefficients(a, b, 0.0)
    assert ej0 == pytest.approx(a + b) and ej1 == 0
    ej0, ej1, _ = taylor_coefficients(a, b, np.pi / 2)
    assert ej1 == pytest.approx(-a * b / ej0)
    phi, h = 0.9, 1e-4
    f = lambda x: squid_modulation(a, b, x)[0]
    ej0, ej1, ej2 = taylor_coefficients(a, b, phi)
    assert ej1 == pytest.approx((f(phi + h) - f(phi - h)) / (2 * h), rel=1e-6)
    assert ej2 == pytest.approx((f(phi + h) - 2 * f(phi) + f(phi - h)) / (2 * h * h), rel=1e-5)


def test_taylor_singular():
    with pytest.raises(ConfigError, match="singular"):
        taylor_coefficients(5.0, 5.0, np.pi)


def test_irrotational_constraint():
    with pytest.raises(ConfigError, match="irrotational constraint"):
        toy(ra=0.3, rb=0.3)
    with pytest.raises(ConfigError):
        toy(Cs=-1e-15)


def test_symmetric_toy_ek():
    p = toy(N1=2, N2=2, EJ1a=40e9, EJ1b=60e9, EJ2=100e9, phi_dc=0.0, phi_ac_amp=0.0)
    d = derive_coefficients(p)
    assert d.xi == pytest.approx(1.0)
    assert d.EK == pytest.approx((100e9 / 2 + 100e9 / 2) / 4)


def test_eta_scales_with_n1_squared():
    assert eta_coefficient(1.3, 45e6, 27e9, 4) == pytest.approx(eta_coefficient(1.3, 45e6, 27e9, 2) / 4)


def test_table_one_device():
    d = derive_coefficients(table_one_device())
    assert d.omega_K == pytest.approx(3.112e9, rel=1e-6)
    assert d.kerr == pytest.approx(1.70e6, rel=1e-6)
    # of order 1e-3 and negative
    assert -5e-3 <= d.eta <= -5e-4


def test_fit_round_trip_and_failure():
    target = derive_coefficients(toy())
    fitted = fit_to_measured(target.omega_K, target.kerr, toy(Cs=200e-15, EJ1a=40e9, EJ1b=56e9,
                                                             EJ2=64e9))
    d = derive_coefficients(fitted)
    assert d.omega_K == pytest.approx(target.omega_K, rel=1e-6)
    assert d.kerr == pytest.approx(target.kerr, rel=1e-6)
    with pytest.raises(FitError):
        fit_to_measured(1e6, 2e6, table_one_template())


def test_normal_order_examples():
    assert normal_order_expansion(1) == {(1, 0): 1.0, (0, 1): 1.0}
    assert normal_order_expansion(2) == {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0, (0, 0): 1.0}
    assert normal_order_expansion(4)[(2, 2)] == pytest.approx(6.0)
    with pytest.raises(ConfigError):
        normal_order_expansion(7)


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("sign", [1, -1])
def test_normal_order_against_matrix_power(n, sign):
    # brute force at dim 12; rows/cols far from the edge are exact
    dim = 12
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    ref = np.linalg.matrix_power(a.T + sign * a, n)
    got = normal_ordered_matrix(normal_order_expansion(n, sign), dim)
    k = dim - n
    assert np.allclose(got[:k, :k], ref[:k, :k], atol=1e-9)


def test_pump_terms_match_closed_form():
    p = table_one_device()
    d = derive_coefficients(p)
    rate, eta = pump_terms_from_normal_ordering(p)
    assert rate == pytest.approx(d.pump_rate, rel=1e-9)
    assert eta == pytest.approx(d.eta, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(circuits)
def test_derived_invariants(p):
    d = derive_coefficients(p)
    assert d.omega_K0 == pytest.approx(np.sqrt(8 * d.EC * d.EK), rel=1e-10)
    assert d.omega_K == pytest.approx(d.omega_K0 - d.kerr, rel=1e-12)
    assert d.zpf_N * d.zpf_phi == pytest.approx(0.5, abs=1e-12)
    assert d.eta < 0


@settings(max_examples=40, deadline=None)
@given(circuits)
def test_kerr_from_normal_ordering(p):
    d = derive_coefficients(p)
    assert kerr_from_normal_ordering(p) == pytest.approx(d.kerr, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(circuits, st.floats(0.2, 5.0))
def test_energy_scaling(p, c):
    d = derive_coefficients(p)
    q = derive_coefficients(replace(p, EJ1a=c * p.EJ1a, EJ1b=c * p.EJ1b, EJ2=c * p.EJ2))
    assert q.xi == pytest.approx(d.xi, rel=1e-10)
    assert q.EC == pytest.approx(d.EC, rel=1e-10)
    assert q.EK == pytest.approx(c * d.EK, rel=1e-10)
    assert q.kerr == pytest.approx(d.kerr, rel=1e-10)
    assert q.omega_K0 == pytest.approx(np.sqrt(c) * d.omega_K0, rel=1e-10)
