"""Quasienergies and photon numbers of the three-photon-pumped oscillator.

Run with ``python3 demos/01_qutrit_spectrum.py``.
"""
import numpy as np

from kpo3 import fock
from kpo3.model import KpoParams
from kpo3.spectrum import diagonalize

# Operating point: detuning 0.4 K, pump 0.822 K, small negative eta.
params = KpoParams.from_ratios(0.40, 0.822, -0.04)
res = diagonalize(params, dim=40)

print("qutrit manifold (energies in units of K):")
for s, (i, ket) in enumerate(zip(res.qutrit_indices, res.qutrit_states)):
    print(f"  |{s}_C>  E = {res.eigenvalues[i]:+.4f}  <n> = {fock.mean_photon(ket):.3f}")
print("first excited manifold:")
for s, (i, ket) in enumerate(zip(res.excited_indices, res.excited_states)):
    print(f"  |{s}_C^ex>  E = {res.eigenvalues[i]:+.4f}  <n> = {fock.mean_photon(ket):.3f}")

# The breathing superpositions swing <n> above and below the eigenstate value.
q, e = res.qutrit_states[0], res.excited_states[0]
for c in (0.2, -0.2):
    s = q + c * e
    print(f"<n> of |0_C> {c:+.1f}|0_C^ex>: {fock.mean_photon(s / np.linalg.norm(s)):.3f}")
