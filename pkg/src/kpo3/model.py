"""Rotating-frame three-photon KPO Hamiltonian, pump envelopes and loss model.

Angular frequencies (rad/s) and seconds throughout.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fock
from .errors import ConfigError, DimensionError

TWO_PI = 2 * np.pi
ETA_GUARD = 0.5
RAMP_SHAPES = ("sin2", "linear", "none")


@dataclass(frozen=True)
class KpoParams:
    """Coefficients of the rotating-frame Hamiltonian.

    ``delta``, ``kerr`` and ``pump`` are angular frequencies; ``eta`` is the
    dimensionless strength of the quintic pump correction.
    """

    delta: float
    kerr: float
    pump: float
    eta: float = 0.0
    eta_guard: float = ETA_GUARD

    def __post_init__(self):
        if not self.kerr > 0:
            raise ConfigError("kerr must be positive")
        if abs(self.eta) >= self.eta_guard:
            raise ConfigError(f"|eta| = {abs(self.eta):g} outside trusted range (< {self.eta_guard:g})")

    @classmethod
    def from_ratios(cls, delta_over_k, pump_over_k, eta=0.0, kerr_hz=1.46e6):
        """Build from dimensionless ratios with K/2pi = ``kerr_hz``."""
        k = TWO_PI * kerr_hz
        return cls(delta=delta_over_k * k, kerr=k, pump=pump_over_k * k, eta=eta)

    @property
    def delta_over_k(self):
        return self.delta / self.kerr

    @property
    def pump_over_k(self):
        return self.pump / self.kerr

    def with_(self, **changes):
        vals = dict(delta=self.delta, kerr=self.kerr, pump=self.pump, eta=self.eta,
                    eta_guard=self.eta_guard)
        vals.update(changes)
        return KpoParams(**vals)


@dataclass(frozen=True)
class PumpSchedule:
    """Pump envelope: ramp of length ``tau_ramp`` followed by a ``tau_hold`` plateau.

    ``p_peak`` (rad/s) overrides ``KpoParams.pump`` when given.  The
    counterdiabatic component is a derivative-shaped pulse on the quadrature
    pump, only defined for the smooth ``sin2`` ramp.
    """

    p_peak: float = None
    cd_fraction: float = 0.0
    tau_ramp: float = 0.0
    tau_hold: float = 0.0
    ramp_shape: str = "sin2"

    def __post_init__(self):
        if self.tau_ramp < 0 or self.tau_hold < 0:
            raise ConfigError("tau_ramp and tau_hold must be non-negative")
        if not 0.0 <= self.cd_fraction <= 1.0:
            raise ConfigError("cd_fraction must lie in [0, 1]")
        if self.ramp_shape not in RAMP_SHAPES:
            raise ConfigError(f"ramp_shape must be one of {RAMP_SHAPES}")
        if self.cd_fraction > 0 and self.ramp_shape != "sin2":
            raise ConfigError("a counterdiabatic component needs the sin2 ramp")

    @property
    def duration(self):
        return self.tau_ramp + self.tau_hold


@dataclass(frozen=True)
class DissipationSpec:
    t1: float
    n_th: float = 0.0
    t_phi: float = np.inf

    def __post_init__(self):
        if not self.t1 > 0:
            raise ConfigError("t1 must be positive (use inf for a closed system)")
        if self.n_th < 0:
            raise ConfigError("n_th must be non-negative")
        if not self.t_phi > 0:
            raise ConfigError("t_phi must be positive or inf")


@lru_cache(maxsize=32)
def operator_terms(dim):
    """Read-only building blocks of the Hamiltonian at truncation ``dim``."""
    a = fock.annihilation(dim)
    ad = a.conj().T
    a3 = a @ a @ a
    a4 = a3 @ a
    quint = ad @ a4  # a^dag a^4
    terms = {
        "n": ad @ a,
        "kerr": ad @ ad @ a @ a,
        "pump3": a3.conj().T + a3,
        "pump5": quint.conj().T + quint,
        "pump3_q": 1j * (a3.conj().T - a3),
        "pump5_q": 1j * (quint.conj().T - quint),
    }
    for v in terms.values():
        v.setflags(write=False)
    return terms


def _check_model_dim(dim):
    if int(dim) != dim or dim < 6:
        raise DimensionError(f"dim={dim} violates the Hamiltonian precondition dim >= 6 (quintic pump term)")
    return int(dim)


def hamiltonian_parts(params: KpoParams, dim, pump=None):
    """``(H_static, H_pump, H_cd)`` with ``H = H_static + s H_pump + c H_cd``."""
    dim = _check_model_dim(dim)
    t = operator_terms(dim)
    p = params.pump if pump is None else pump
    static = params.delta * t["n"] - 0.5 * params.kerr * t["kerr"]
    drive = 0.5 * p * (t["pump3"] + params.eta * t["pump5"])
    cd = 0.5 * p * (t["pump3_q"] + params.eta * t["pump5_q"])
    return static, drive, cd


def hamiltonian(params: KpoParams, pump_scale=1.0, dim=30, cd_scale=0.0):
    """Rotating-frame Hamiltonian (rad/s) at instantaneous pump amplitude
    ``pump_scale * P``; ``cd_scale`` adds the quadrature (counterdiabatic) pump."""
    static, drive, cd = hamiltonian_parts(params, dim)
    h = static + pump_scale * drive
    if cd_scale:
        h = h + cd_scale * cd
    return h


def classical_energy(params: KpoParams, x, y):
    """Classical energy landscape in units of K at ``alpha = x + i y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = x**2 + y**2
    cubic = x**3 - 3 * x * y**2
    quintic = x**5 - 2 * x**3 * y**2 - 3 * x * y**4
    return (params.delta_over_k * r2 - 0.5 * r2**2
            + params.pump_over_k * (cubic + params.eta * quintic))


def envelope(sched: PumpSchedule, t):
    """Return ``(main, cd)`` pump scales at time ``t``.

    ``main`` rises as sin^2(pi t / 2 tau_ramp) (or linearly) to 1; ``cd`` is
    ``cd_fraction`` times the unit-peak derivative of ``main`` and vanishes on
    the plateau.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    tau = sched.tau_ramp
    if sched.ramp_shape == "none" or t >= tau:
        return 1.0, 0.0
    if sched.ramp_shape == "linear":
        return t / tau, 0.0
    main = np.sin(np.pi * t / (2 * tau)) ** 2
    return float(main), float(sched.cd_fraction * np.sin(np.pi * t / tau))


def collapse_operators(spec: DissipationSpec, dim):
    """Jump operators with rates: ``[(a, (1+n_th)/T1), (a^dag, n_th/T1), (n, 2/T_phi)]``.

    Entries with zero rate are dropped; the effective collapse operator is
    ``sqrt(rate) * op``.
    """
    a = fock.annihilation(dim)
    out = []
    gamma = 0.0 if np.isinf(spec.t1) else 1.0 / spec.t1
    if gamma > 0:
        out.append((a, (1 + spec.n_th) * gamma))
        if spec.n_th > 0:
            out.append((a.conj().T, spec.n_th * gamma))
    if np.isfinite(spec.t_phi):
        out.append((fock.number_operator(dim), 2.0 / spec.t_phi))
    return out


def table_one_dissipation():
    """T1 = 4.5 us and n_th = 0.04."""
    return DissipationSpec(t1=4.5e-6, n_th=0.04)
