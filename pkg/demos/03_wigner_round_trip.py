"""Wigner function of a three-legged cat and density-matrix recovery from it."""
import numpy as np

from kpo3 import fock
from kpo3.tomography import WignerGrid, reconstruct, wigner

dim, alpha = 25, 1.6
legs = sum(fock.coherent(dim, alpha * np.exp(2j * np.pi * k / 3)) for k in range(3))
rho = fock.ket2dm(legs / np.linalg.norm(legs))

xs = np.linspace(-3, 3, 61)
grid = wigner(rho, xs, xs)
print(f"W min {grid.values.min():+.3f}, max {grid.values.max():+.3f}")

noisy = grid.values + np.random.default_rng(1).normal(0, 0.02 * 2 / np.pi, grid.values.shape)
for label, values in (("clean", grid.values), ("noisy", noisy)):
    est = reconstruct(WignerGrid(xs, xs, values), dim)
    print(f"{label} reconstruction fidelity {fock.fidelity(est, rho):.4f}")
