import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpo3 import fock
from kpo3.errors import TruncationError
from kpo3.model import KpoParams, hamiltonian
from kpo3.spectrum import diagonalize, gap_curve, quasienergy_curves, sector_eigh

FIG1 = KpoParams.from_ratios(0.66, 0.822, -0.04)
FIG4 = KpoParams.from_ratios(0.40, 0.822, -0.04)


def test_zero_pump_labels_and_gap():
    res = diagonalize(KpoParams(delta=0.0, kerr=1.0, pump=0.0), dim=20)
    for s, ket in enumerate(res.qutrit_states):
        assert np.allclose(np.abs(ket), fock.basis(20, s))
    assert res.gap == pytest.approx(3.0)
    rows = gap_curve(KpoParams(delta=0.0, kerr=1.0, pump=0.0), [0.0], dim=20)
    assert rows[0, 1] == pytest.approx(3.0)


def test_cat_sector_support():
    q0 = diagonalize(FIG1, dim=40).qutrit_states[0]
    n = np.arange(40)
    assert np.sum(np.abs(q0[n % 3 != 0]) ** 2) < 1e-20


def test_fig4_photon_numbers():
    res = diagonalize(FIG4, dim=40)
    assert fock.mean_photon(res.qutrit_states[0]) == pytest.approx(1.37, abs=0.02)
    assert fock.mean_photon(res.excited_states[0]) == pytest.approx(2.04, abs=0.02)


def test_opposite_sign_on_3n():
    res = diagonalize(FIG4, dim=40)
    q, e = res.qutrit_states[0], res.excited_states[0]
    # fix the global sign on |0>, then compare |3n> amplitudes
    q = q * np.sign(q[0].real)
    e = e * np.sign(e[0].real)
    for k in (3, 6):
        assert np.sign(q[k].real) == -np.sign(e[k].real)


def test_excited_below_qutrit_in_fig4_regime():
    curves = quasienergy_curves(FIG4, FIG4.kerr * np.array([0.2, 0.4, 0.8]), dim=40)
    assert np.all(curves[:, 4:] < curves[:, 1:4])


def test_result_invariants():
    res = diagonalize(FIG1, dim=40)
    v = res.eigenstates
    assert np.max(np.abs(v.conj().T @ v - np.eye(40))) < 1e-9
    for j in range(40):
        pops = fock.sector_populations(v[:, j])
        assert pops.max() >= 1 - 1e-9
        assert pops.argmax() == res.sector[j]
    assert sorted(res.sector[list(res.qutrit_indices)]) == [0, 1, 2]


def test_block_diagonalisation_matches_full():
    h = hamiltonian(FIG1, 1.0, 40)
    blocks = np.sort(np.concatenate([w for _, w, _ in sector_eigh(h, 40)]))
    full = np.linalg.eigvalsh(h)
    assert np.max(np.abs(blocks - full)) <= 1e-10 * np.abs(full).max()


def test_truncation_guard():
    with pytest.raises(TruncationError):
        diagonalize(KpoParams.from_ratios(3.0, 1.5, 0.0), dim=9)


def test_no_triple_degeneracy_over_scan():
    p = KpoParams.from_ratios(0.0, 0.822, 0.0)
    deltas = p.kerr * np.linspace(-0.5, 1.5, 41)
    e = quasienergy_curves(p, deltas, dim=40)[:, 1:4]
    spread = e.max(axis=1) - e.min(axis=1)
    assert np.all(spread > 1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 1.5), st.floats(0.1, 1.0), st.floats(-0.05, 0.0))
def test_weyl_bound_along_pump_ramp(d, pk, eta):
    p = KpoParams(delta=d, kerr=1.0, pump=pk, eta=eta)
    scales = np.linspace(0, 1, 21)
    for s0, s1 in zip(scales[:-1], scales[1:]):
        h0, h1 = hamiltonian(p, s0, 30), hamiltonian(p, s1, 30)
        e0, e1 = np.linalg.eigvalsh(h0), np.linalg.eigvalsh(h1)
        assert np.max(np.abs(e1 - e0)) <= np.linalg.norm(h1 - h0, 2) + 1e-12
