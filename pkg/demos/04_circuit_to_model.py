"""From junction energies to the oscillator model.

The fitted reference device gives the Kerr rate and the small eta
correction that enters the pump term.
"""
from kpo3.circuit import derive_coefficients, kerr_from_normal_ordering, table_one_device

dev = table_one_device()
d = derive_coefficients(dev)
print(f"omega_K / 2pi = {d.omega_K / 1e9:.3f} GHz")
print(f"K / 2pi       = {d.kerr / 1e6:.3f} MHz")
print(f"eta           = {d.eta:.3e}")
print(f"K from explicit normal ordering: {kerr_from_normal_ordering(dev) / 1e6:.6f} MHz")
