"""Circuit parameters to rotating-frame KPO coefficients.

The device is N1 DC SQUIDs in series with an N2-junction array, shunted by
a large capacitor.  After reducing to one phase variable and taking the
rotating-wave approximation at one third of the pump frequency, the
Hamiltonian has the Kerr/three-photon/quintic form used in :mod:`kpo3.model`.

All energies are in Hz (E/h), capacitances in farads, fluxes in radians
(2 pi Phi / Phi_0).
"""
from dataclasses import dataclass, replace, fields
from math import factorial

import numpy as np
from scipy import constants

from .errors import ConfigError, FitError

E_CHARGE = constants.e
PLANCK = constants.h


@dataclass(frozen=True)
class CircuitParams:
    N1: int
    N2: int
    EJ1a: float
    EJ1b: float
    EJ2: float
    CJ1a: float
    CJ1b: float
    CJ2: float
    Cs: float
    phi_dc: float
    phi_ac_amp: float = 0.0
    ra: float = 0.5
    rb: float = 0.5

    def __post_init__(self):
        if int(self.N1) != self.N1 or int(self.N2) != self.N2 or self.N1 < 1 or self.N2 < 1:
            raise ConfigError("N1 and N2 must be integers >= 1")
        for name in ("EJ1a", "EJ1b", "EJ2", "CJ1a", "CJ1b", "CJ2", "Cs"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive")
        if abs(self.ra + self.rb - 1.0) > 1e-12:
            raise ConfigError(
                f"ra + rb = {self.ra + self.rb:g} violates the irrotational constraint ra + rb = 1"
            )
        if self.phi_ac_amp < 0:
            raise ConfigError("phi_ac_amp must be non-negative")

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DerivedCoefficients:
    EC: float
    EK: float
    xi: float
    omega_K0: float
    omega_K: float
    kerr: float
    pump_rate: float
    eta: float
    zpf_N: float
    zpf_phi: float
    EJ1: float = 0.0
    lambda_ac: float = 0.0
    pump: float = 0.0
    linear_drive: float = 0.0

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def squid_modulation(EJ1a, EJ1b, phi_ex, ra=0.5, rb=0.5):
    """Effective SQUID Josephson energy and phase offset at external flux ``phi_ex``.

    Returns ``(EJmod, lambda)``; the offset uses a two-argument arctangent so a
    vanishing denominator is not an error.
    """
    if EJ1a <= 0 or EJ1b <= 0:
        raise ConfigError("Josephson energies must be positive")
    ej_mod = np.sqrt(EJ1a**2 + EJ1b**2 + 2 * EJ1a * EJ1b * np.cos(phi_ex))
    num = EJ1a * np.sin(ra * phi_ex) - EJ1b * np.sin(rb * phi_ex)
    den = EJ1a * np.cos(ra * phi_ex) + EJ1b * np.cos(rb * phi_ex)
    return ej_mod, np.arctan2(num, den)


def squid_phase_slope(EJ1a, EJ1b, phi_ex, ra=0.5, rb=0.5):
    """d lambda / d phi_ex, the first-order conversion from flux pump to phase pump."""
    num = EJ1a * np.sin(ra * phi_ex) - EJ1b * np.sin(rb * phi_ex)
    den = EJ1a * np.cos(ra * phi_ex) + EJ1b * np.cos(rb * phi_ex)
    dnum = EJ1a * ra * np.cos(ra * phi_ex) - EJ1b * rb * np.cos(rb * phi_ex)
    dden = -EJ1a * ra * np.sin(ra * phi_ex) - EJ1b * rb * np.sin(rb * phi_ex)
    return (dnum * den - num * dden) / (num**2 + den**2)


def taylor_coefficients(EJ1a, EJ1b, phi_dc):
    """Zeroth, first and second order coefficients of EJmod around ``phi_dc``."""
    ej0 = np.sqrt(EJ1a**2 + EJ1b**2 + 2 * EJ1a * EJ1b * np.cos(phi_dc))
    if ej0 <= 1e-12 * (EJ1a + EJ1b):
        raise ConfigError("E_J1^(0) vanishes (destructive SQUID interference); expansion is singular")
    ej1 = -EJ1a * EJ1b * np.sin(phi_dc) / ej0
    ej2 = -(
        EJ1a * EJ1b * (EJ1a**2 + EJ1b**2) * np.cos(phi_dc)
        + (EJ1a * EJ1b) ** 2 * (np.cos(phi_dc) ** 2 + 1)
    ) / (2 * ej0**3)
    return ej0, ej1, ej2


def charging_energy(p: CircuitParams, xi):
    """E_C in Hz of the single phase variable phi = phi1 + phi2."""
    c1 = p.Cs + (p.CJ1a + p.CJ1b) / p.N1
    c2 = p.Cs + p.CJ2 / p.N2
    if c1 * c2 - p.Cs**2 <= 0:
        raise ConfigError("capacitance matrix is singular (C1*C2 - Cs^2 <= 0)")
    c_eff = (c1 + c2 * xi**2 + 2 * p.Cs * xi) / (1 + xi) ** 2
    return E_CHARGE**2 / (2 * c_eff) / PLANCK


def eta_coefficient(xi, EC, EK, N1):
    return -np.sqrt(2 * EC / EK) / (4 * (1 + xi) ** 2 * N1**2)


def derive_coefficients(p: CircuitParams) -> DerivedCoefficients:
    """Closed-form RWA coefficients for circuit ``p``."""
    ej0, ej1_lin, ej2_quad = taylor_coefficients(p.EJ1a, p.EJ1b, p.phi_dc)
    # AC-Stark-like shift: <phi_ac^2> = 2 (phi_ac^(0))^2 absorbed into E_J1
    ej1 = ej0 + 2 * ej2_quad * p.phi_ac_amp**2
    if ej1 <= 0:
        raise ConfigError("pump amplitude too large: effective E_J1 is not positive")
    xi = p.N2 * p.EJ2 / (p.N1 * ej1)
    ec = charging_energy(p, xi)
    ek = (ej1 / p.N1 + xi**2 * p.EJ2 / p.N2) / (1 + xi) ** 2
    kerr = (ej1 / p.N1**3 + xi**4 * p.EJ2 / p.N2**3) / (1 + xi) ** 4 * ec / ek
    omega0 = np.sqrt(8 * ec * ek)
    pump_rate = -ej0 / (3 * (1 + xi) ** 3 * p.N1**2) * (2 * ec / ek) ** 0.75
    lam_ac = squid_phase_slope(p.EJ1a, p.EJ1b, p.phi_dc, p.ra, p.rb) * p.phi_ac_amp
    return DerivedCoefficients(
        EC=ec,
        EK=ek,
        xi=xi,
        omega_K0=omega0,
        omega_K=omega0 - kerr,
        kerr=kerr,
        pump_rate=pump_rate,
        eta=eta_coefficient(xi, ec, ek, p.N1),
        zpf_N=(ek / (32 * ec)) ** 0.25,
        zpf_phi=(2 * ec / ek) ** 0.25,
        EJ1=ej1,
        lambda_ac=lam_ac,
        pump=pump_rate * lam_ac,
        # E_J1^(1) phi_ac drive averages out under the RWA; kept for diagnostics only
        linear_drive=ej1_lin * p.phi_ac_amp,
    )


def normal_order_expansion(n, sign=1):
    """Normal-ordered form of ``(a^dag + sign * a)**n``.

    Returns ``{(p, q): c}`` meaning ``c * (a^dag)**p a**q``.
    """
    if not 1 <= n <= 6:
        raise ConfigError(f"expansion order must be in [1, 6], got {n}")
    if sign not in (1, -1):
        raise ConfigError("sign must be +1 or -1")
    terms = {}
    for k in range(n + 1):
        for m in range(k // 2 + 1):
            c = factorial(n) / (factorial(n - k) * factorial(k - 2 * m) * factorial(m) * 2**m)
            # each surviving a and each contraction carries one factor of sign
            c *= sign ** ((n - k) + m)
            key = (k - 2 * m, n - k)
            terms[key] = terms.get(key, 0.0) + c
    return terms


def normal_ordered_matrix(terms, dim):
    """Dense matrix of a normal-ordered polynomial at truncation ``dim``."""
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)
    ad = a.T
    out = np.zeros((dim, dim))
    for (p, q), c in terms.items():
        out += c * np.linalg.matrix_power(ad, p) @ np.linalg.matrix_power(a, q)
    return out


def rwa_filter(terms, photons):
    """Keep terms that create exactly ``photons`` net quanta (p - q == photons)."""
    return {k: v for k, v in terms.items() if k[0] - k[1] == photons}


def _phase_scale(p, d):
    return 1.0 / ((1 + d.xi) * p.N1), d.xi / ((1 + d.xi) * p.N2)


def kerr_from_normal_ordering(p: CircuitParams, dim=12):
    """Recompute K by building the RWA-filtered phi^4 term as a matrix.

    The diagonal of ``c22 a^dag^2 a^2 + c11 a^dag a + c00`` fixes
    ``c22 = (E2 - 2 E1 + E0) / 2`` and ``K = -2 c22``.
    """
    d = derive_coefficients(p)
    s1, s2 = _phase_scale(p, d)
    quartic = (p.N1 * d.EJ1 * s1**4 + p.N2 * p.EJ2 * s2**4) / 24
    phi4 = d.zpf_phi**4 * normal_ordered_matrix(rwa_filter(normal_order_expansion(4), 0), dim)
    h4 = -quartic * phi4
    e = np.diag(h4)
    return -(e[2] - 2 * e[1] + e[0])


def pump_terms_from_normal_ordering(p: CircuitParams):
    """``(P, eta)`` from the cubic and quintic pump terms via normal ordering.

    The cos(w_p t) drive keeps one rotating component (factor 1/2); the
    three-photon term is read off the a^dag^3 coefficient of phi^3 and the
    quintic correction off the a^dag^4 a coefficient of phi^5.
    """
    d = derive_coefficients(p)
    gamma = p.N1 * taylor_coefficients(p.EJ1a, p.EJ1b, p.phi_dc)[0]
    x = 1.0 / ((1 + d.xi) * p.N1)
    cubic = -2 * gamma / 6 * x**3 * d.zpf_phi**3
    quintic = 2 * gamma / 120 * x**5 * d.zpf_phi**5
    c3 = rwa_filter(normal_order_expansion(3), 3)[(3, 0)]
    c5 = rwa_filter(normal_order_expansion(5), 3)[(4, 1)]
    half_p = 0.5 * cubic * c3
    return 2 * half_p, 0.5 * quintic * c5 / half_p


def fit_to_measured(omega_K_meas, K_meas, template: CircuitParams, tol=1e-12, max_iter=60):
    """Adjust ``Cs`` and the overall Josephson scale of ``template`` so the
    derived (omega_K, K) match the targets (Hz).

    Newton iteration in log-parameters with a finite-difference Jacobian;
    junction-energy ratios are held fixed.
    """
    if omega_K_meas <= 0 or K_meas <= 0:
        raise FitError("fit targets must be positive")
    if K_meas >= omega_K_meas:
        raise FitError("K >= omega_K is unphysical for a weakly anharmonic oscillator")
    target = np.log([omega_K_meas, K_meas])

    def build(x):
        s = np.exp(x[1])
        return replace(
            template, Cs=float(np.exp(x[0])), EJ1a=template.EJ1a * s,
            EJ1b=template.EJ1b * s, EJ2=template.EJ2 * s,
        )

    def resid(x):
        d = derive_coefficients(build(x))
        if d.omega_K <= 0:
            raise FitError("iterate left the physical region (omega_K <= 0)")
        return np.log([d.omega_K, d.kerr]) - target

    x = np.array([np.log(template.Cs), 0.0])
    r = resid(x)
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol:
            return build(x)
        jac = np.empty((2, 2))
        h = 1e-6
        for j in range(2):
            dx = np.zeros(2)
            dx[j] = h
            jac[:, j] = (resid(x + dx) - resid(x - dx)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise FitError("singular Jacobian in circuit fit", residual=r) from exc
        # damped step keeps log-parameters from jumping out of range
        step *= min(1.0, 2.0 / max(np.max(np.abs(step)), 1e-300))
        x = x + step
        r = resid(x)
    if np.max(np.abs(r)) < tol:
        return build(x)
    raise FitError(f"circuit fit did not converge; log-residual {r}", residual=r)


def table_one_template(EJ1a=60e9, Cs=150e-15, phi_ac_amp=0.02, cap_per_hz=2.0e-25):
    """Starting point shaped like the reference device.

    Junction ratios EJ1b/EJ1a = 1.4, EJ1b/EJ2 = 1.0, N1 = 2, N2 = 4 and a
    static flux of 0.149 flux quanta.  Junction capacitances scale with the
    Josephson energy (``cap_per_hz`` F per Hz) and the flux split follows the
    capacitive (irrotational) allocation ``ra = CJ1b / (CJ1a + CJ1b)``.
    """
    ej1b = 1.4 * EJ1a
    cj1a, cj1b = cap_per_hz * EJ1a, cap_per_hz * ej1b
    ra = cj1b / (cj1a + cj1b)
    return CircuitParams(
        N1=2, N2=4, EJ1a=EJ1a, EJ1b=ej1b, EJ2=ej1b,
        CJ1a=cj1a, CJ1b=cj1b, CJ2=cap_per_hz * ej1b, Cs=Cs,
        phi_dc=2 * np.pi * 0.149, phi_ac_amp=phi_ac_amp, ra=ra, rb=1 - ra,
    )


def table_one_device():
    """Template fitted to omega_K/2pi = 3.112 GHz and K/2pi = 1.70 MHz."""
    return fit_to_measured(3.112e9, 1.70e6, table_one_template())

