import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cat_state
from kpo3 import fock
from kpo3.errors import ConfigError, DimensionError, TruncationError
from kpo3.model import KpoParams
from kpo3.spectrum import diagonalize
from kpo3.tomography import (
    ParityMeasurementSpec, WignerGrid, displaced_parity, effective_decay, fit_t1eff, kerr_unwind,
    kerr_wind, model_linecut, parity_oracle, reconstruct, wigner, wigner_laguerre, work_dim,
)

TWO_PI = 2 * np.pi
W0 = 2 / np.pi
CHI = TWO_PI * 0.79e6


def random_density(rng, dim, rank=2):
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def test_wigner_examples():
    xs = np.array([-0.5, 0.0, 0.5])
    assert wigner(fock.basis(8, 0), xs, xs).values[1, 1] == pytest.approx(W0)
    assert wigner(fock.basis(8, 1), xs, xs).values[1, 1] == pytest.approx(-W0)


def test_wigner_matches_laguerre_oracle():
    rho = random_density(np.random.default_rng(5), 10, rank=3)
    for alpha in (0.0, 0.7, -1.1 + 0.4j, 2.0j):
        got = W0 * displaced_parity(rho, [alpha])[0]
        assert got == pytest.approx(wigner_laguerre(rho, alpha), abs=1e-12)


def test_cat_wigner_symmetry_negativity_and_norm():
    q0 = diagonalize(KpoParams.from_ratios(0.66, 0.822, -0.04), dim=40).qutrit_states[0]
    rng = np.random.default_rng(2)
    pts = rng.uniform(-2.5, 2.5, 40) + 1j * rng.uniform(-2.5, 2.5, 40)
    rot = np.exp(2j * np.pi / 3)
    w = displaced_parity(q0, pts)
    assert np.max(np.abs(w - displaced_parity(q0, pts * rot))) < 1e-6
    xs = np.linspace(-3, 3, 61)
    grid = wigner(q0, xs, xs)
    assert grid.values.min() < -0.05
    assert grid.integral() == pytest.approx(1.0, abs=0.02)
    assert np.allclose(grid.unit_peak().values, grid.values / W0)


def test_grid_text_round_trip_and_shape_check():
    xs, ys = np.linspace(-1, 1, 5), np.linspace(-2, 2, 3)
    grid = wigner(fock.coherent(12, 0.3), xs, ys)
    back = WignerGrid.from_text(grid.to_text())
    assert np.array_equal(back.values, grid.values) and np.array_equal(back.ys, ys)
    with pytest.raises(DimensionError):
        WignerGrid(xs, ys, np.zeros((5, 3)))
    with pytest.raises(ConfigError):
        WignerGrid.from_text("1\t2\n")


def test_work_dim_guard():
    assert work_dim(10, 0.0) >= 10
    with pytest.raises(TruncationError, match="enlarge"):
        work_dim(40, 12.0, max_dim=60)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 1))
def test_wigner_is_linear(seed, lam):
    rng = np.random.default_rng(seed)
    a, b = random_density(rng, 8), random_density(rng, 8)
    pts = rng.normal(size=6) + 1j * rng.normal(size=6)
    mix = displaced_parity(lam * a + (1 - lam) * b, pts)
    assert np.allclose(mix, lam * displaced_parity(a, pts) + (1 - lam) * displaced_parity(b, pts),
                       atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_pi3_conjugation_rotates_phase_space(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 9)
    u = fock.generalized_parity(9)
    pts = rng.uniform(-1.5, 1.5, 8) + 1j * rng.uniform(-1.5, 1.5, 8)
    lhs = displaced_parity(u @ rho @ u.conj().T, pts)
    rhs = displaced_parity(rho, pts * np.exp(-2j * np.pi / 3))
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_lossless_oracle_is_displaced_parity():
    rng = np.random.default_rng(11)
    spec = ParityMeasurementSpec(chi=CHI)
    assert spec.ramsey_duration == pytest.approx(np.pi / CHI)
    for _ in range(10):
        rho = random_density(rng, 6)
        alpha = complex(*rng.uniform(-1.5, 1.5, 2))
        assert parity_oracle(rho, alpha, spec) == pytest.approx(displaced_parity(rho, [alpha])[0],
                                                                abs=1e-6)


def test_oracle_methods_agree_and_kerr_cancels():
    rho = fock.ket2dm(cat_state(10, 1.0, 3))
    lossy = ParityMeasurementSpec(chi=CHI, t1_kpo=4.5e-6)
    kerr = ParityMeasurementSpec(chi=CHI, t1_kpo=4.5e-6, include_kerr=True, kerr=TWO_PI * 1.46e6)
    for alpha in (0.0, 0.8, -0.5j):
        a = parity_oracle(rho, alpha, lossy)
        assert parity_oracle(rho, alpha, lossy, method="joint") == pytest.approx(a, abs=1e-9)
        assert parity_oracle(rho, alpha, kerr, method="joint") == pytest.approx(a, abs=1e-9)
    with pytest.raises(ConfigError):
        parity_oracle(rho, 0.0, lossy, method="magic")


def test_effective_decay_examples():
    rho = fock.ket2dm(fock.coherent(25, 1.2))
    assert np.array_equal(effective_decay(rho, 0.0, 1e-6), rho)
    out = effective_decay(rho, 0.6e-6, 9e-6)
    assert fock.mean_photon(out) == pytest.approx(1.44 * np.exp(-0.6 / 9), abs=1e-8)
    # the master-equation path with H = 0 reproduces the exact channel
    me = effective_decay(rho, 0.6e-6, 9e-6, hamiltonian=np.zeros((25, 25)))
    assert np.max(np.abs(me - out)) < 1e-9
    fock.check_density(out)


def test_fit_t1eff_recovers_model_ratio():
    rho = fock.ket2dm(cat_state(20, 1.2, 3))
    alphas = np.linspace(-2.5, 2.5, 21)
    measured = model_linecut(rho, alphas, 0.633e-6, 2.2 * 4.5e-6)
    ratio, dev = fit_t1eff(rho, alphas, measured, 0.633e-6, 4.5e-6)
    assert ratio == pytest.approx(2.2, rel=1e-3) and dev < 1e-5


def test_kerr_wind_examples():
    k = TWO_PI * 1.46e6
    rho = fock.ket2dm(fock.coherent(40, 2.0))
    assert np.array_equal(kerr_unwind(rho, 0.0, k), rho)
    assert np.max(np.abs(kerr_unwind(kerr_wind(rho, 0.3e-6, k), 0.3e-6, k) - rho)) < 1e-12
    wound = kerr_wind(rho, np.pi / k, k)
    # pi/K of Kerr splits the coherent state into a two-component cat with fringes
    xs = np.linspace(-3, 3, 41)
    assert wigner(wound, xs, xs).values.min() < -0.05
    assert fock.fidelity(kerr_unwind(wound, np.pi / k, k), fock.coherent(40, 2.0)) >= 1 - 1e-9


def test_reconstruct_small_state_and_report():
    rho = random_density(np.random.default_rng(4), 4)
    xs = np.linspace(-2, 2, 9)
    est, info = reconstruct(wigner(rho, xs, xs), 4, full_output=True)
    assert fock.fidelity(est, rho) >= 0.999
    assert info["residual"] < 1e-6 and info["iterations"] >= 1
    fock.check_density(est)


def test_reconstruct_edge_cases():
    xs = np.linspace(-2, 2, 5)
    zero = WignerGrid(xs, xs, np.zeros((5, 5)))
    assert np.allclose(reconstruct(zero, 4), np.eye(4) / 4)
    with pytest.raises(ConfigError, match="cannot determine"):
        reconstruct(zero, 6)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_reconstruct_inverts_wigner(seed):
    rho = random_density(np.random.default_rng(seed), 6, rank=2)
    xs = np.linspace(-2.5, 2.5, 13)
    assert fock.fidelity(reconstruct(wigner(rho, xs, xs), 6), rho) >= 1 - 1e-3
