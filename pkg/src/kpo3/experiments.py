"""Experiment sweeps: Rabi chevrons, breathing, steady-state scans, relaxation.

Each run returns plain arrays or column dictionaries ready for
:mod:`kpo3.tables`.  Sweeps can be spread over a process pool; results are
always merged in sweep order.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import fock
from .dynamics import evolve_lindblad, evolve_unitary, fft_gap, steady_state
from .errors import ConfigError
from .model import DissipationSpec, KpoParams, PumpSchedule, hamiltonian
from .spectrum import diagonalize, sector_eigh
from .tomography import effective_decay

TWO_PI = 2 * np.pi
# device dispersive shift; the parity window is pi / chi
CHI_TABLE_ONE = TWO_PI * 0.79e6
PARITY_WINDOW = np.pi / CHI_TABLE_ONE
T1EFF_RATIO = 2.0


def pool_map(fn, jobs, workers=1):
    """``[fn(j) for j in jobs]``, optionally in worker processes, in job order."""
    jobs = list(jobs)
    if workers is None or workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def pump_axis_hz(delta):
    """Pump detuning ``(w_p - 3 w_K) / 2 pi`` for rotating-frame detuning ``delta``."""
    return -3.0 * np.asarray(delta) / TWO_PI


def delta_from_pump_axis(detuning_hz):
    return -TWO_PI * np.asarray(detuning_hz, dtype=float) / 3.0


@dataclass
class ChevronGrid:
    detunings: np.ndarray  # pump axis, Hz
    durations: np.ndarray  # s
    p0: np.ndarray  # p0[i, j]: detuning i, duration j

    def __post_init__(self):
        if np.any(self.p0 < -1e-9) or np.any(self.p0 > 1 + 1e-9):
            raise ValueError("chevron populations outside [0, 1]")

    @property
    def deltas(self):
        return delta_from_pump_axis(self.detunings)


def _vacuum_weights(params, dim):
    # sector-0 eigenpairs and the weight of |0> in each
    idx, w, v = sector_eigh(hamiltonian(params, 1.0, dim), dim)[0]
    return w, np.abs(v[0, :]) ** 2


def vacuum_population(params, durations, dim=20):
    """|<0| exp(-i H t) |0>|^2 by exact diagonalisation of the sector-0 block."""
    w, c = _vacuum_weights(params, dim)
    amp = np.exp(-1j * np.outer(np.asarray(durations, dtype=float), w)) @ c
    p0 = np.abs(amp) ** 2
    p0[np.asarray(durations) == 0] = 1.0
    return np.clip(p0, 0.0, 1.0)


def mean_vacuum_population(params, dim=20):
    """Infinite-time average of |<0|psi(t)>|^2 starting from |0>."""
    _, c = _vacuum_weights(params, dim)
    return float(np.sum(c ** 2))


def _chevron_column(job):
    params, durations, dim = job
    return vacuum_population(params, durations, dim)


def rabi_chevron(params: KpoParams, detunings_hz, durations, dim=20, workers=1):
    """Population of |0> after a constant pump of each duration and detuning.

    ``detunings_hz`` is the pump axis ``(w_p - 3 w_K) / 2 pi``; each maps to
    ``delta = -2 pi f / 3`` in the rotating frame.
    """
    detunings_hz = np.asarray(detunings_hz, dtype=float)
    durations = np.asarray(durations, dtype=float)
    if detunings_hz.size == 0 or durations.size == 0:
        raise ConfigError("chevron ranges must be non-empty")
    jobs = [(params.with_(delta=d), durations, dim) for d in delta_from_pump_axis(detunings_hz)]
    return ChevronGrid(detunings_hz, durations, np.array(pool_map(_chevron_column, jobs, workers)))


def locate_resonances(params: KpoParams, delta_lo, delta_hi, dim=20, points=400, depth=1e-4):
    """Detunings (rad/s) where the time-averaged |0> population has a dip.

    Local minima on a uniform grid are refined by a bounded scalar search;
    dips shallower than ``depth`` are ignored.
    """
    grid = np.linspace(delta_lo, delta_hi, points)
    avg = np.array([mean_vacuum_population(params.with_(delta=d), dim) for d in grid])
    found = []
    for i in range(1, points - 1):
        if avg[i] <= avg[i - 1] and avg[i] < avg[i + 1] and 1 - avg[i] > depth:
            res = minimize_scalar(lambda d: mean_vacuum_population(params.with_(delta=d), dim),
                                  bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                  options={"xatol": 1e-9 * params.kerr})
            found.append((float(res.x), float(res.fun)))
    return found


def rabi_frequency(params: KpoParams, dim=20, periods=12, samples=600):
    """Fitted oscillation frequency (Hz) of the |0> population at ``params``."""
    w, c = _vacuum_weights(params, dim)
    top = np.argsort(c)[-2:]
    guess = abs(w[top[0]] - w[top[1]]) / TWO_PI
    t = np.linspace(0, periods / guess, samples)
    f, _ = fft_gap(t, vacuum_population(params, t, dim))
    return f


def _targets(params, dim):
    res = diagonalize(params, dim)
    q = res.qutrit_states
    return res, {"q0": q[0], "q1": q[1], "q2": q[2], "ex0": res.excited_states[0]}


def breathing_run(params: KpoParams, sched: PumpSchedule, spec: DissipationSpec, holds, dim=30,
                  t1eff_ratio=T1EFF_RATIO, parity_window=PARITY_WINDOW, dt_max=None):
    """Hold-time sweep after a short ramp, observed through the parity surrogate.

    One master-equation run covers every hold time; each sampled state is
    decayed for ``parity_window`` with ``T1eff = t1eff_ratio * T1`` before the
    observables are taken.  ``spec=None`` runs lossless.  Returns columns
    ``hold, n, n_raw, F_q0, F_q1, F_q2, F_ex0, F_sum``.
    """
    holds = np.asarray(holds, dtype=float)
    if holds.size == 0 or np.any(holds < 0) or np.any(np.diff(holds) <= 0):
        raise ConfigError("hold times must be non-negative and increasing")
    sched = PumpSchedule(sched.p_peak, sched.cd_fraction, sched.tau_ramp, float(holds[-1]),
                         sched.ramp_shape)
    _, targets = _targets(params if sched.p_peak is None else params.with_(pump=sched.p_peak), dim)
    times = sched.tau_ramp + holds
    if times[0] > 0:
        times = np.concatenate([[0.0], times])
    psi0 = fock.basis(dim, 0)
    if spec is None:
        run = evolve_unitary(params, sched, psi0, times=times, dt_max=dt_max)
        t1 = np.inf
    else:
        run = evolve_lindblad(params, sched, spec, psi0, times=times, dt_max=dt_max)
        t1 = spec.t1
    states = run.states[len(times) - len(holds):]
    out = {"hold": holds, "n_raw": np.array([fock.mean_photon(s) for s in states])}
    decayed = [effective_decay(fock.as_density(s), parity_window, t1eff_ratio * t1) for s in states]
    out["n"] = np.array([fock.mean_photon(r) for r in decayed])
    for name, ket in targets.items():
        out[f"F_{name}"] = np.array([fock.fidelity(r, ket) for r in decayed])
    out["F_sum"] = out["F_q0"] + out["F_q1"] + out["F_q2"]
    return out


def breathing_frequency(table):
    """Breathing frequency (Hz) and decay time (s) of the ``n`` column."""
    return fft_gap(table["hold"], table["n"])


def steady_scan(pump_over_k, deltas_over_k, spec: DissipationSpec, dim=40, eta=-0.04,
                kerr_hz=1.46e6, t1eff_ratio=T1EFF_RATIO, parity_window=PARITY_WINDOW, workers=1):
    """Steady-state mean photon number against detuning.

    Columns: ``delta_over_k``, ``n_ideal`` (eta = 0), ``n_eta`` and
    ``n_eta_loss`` (eta state decayed over the parity window).
    """
    deltas_over_k = np.asarray(deltas_over_k, dtype=float)
    jobs = []
    for e in (0.0, eta):
        for d in deltas_over_k:
            jobs.append((KpoParams.from_ratios(d, pump_over_k, e, kerr_hz), spec, dim))
    rhos = pool_map(_steady_rho, jobs, workers)
    m = len(deltas_over_k)
    t1eff = t1eff_ratio * spec.t1
    return {
        "delta_over_k": deltas_over_k,
        "n_ideal": np.array([fock.mean_photon(r) for r in rhos[:m]]),
        "n_eta": np.array([fock.mean_photon(r) for r in rhos[m:]]),
        "n_eta_loss": np.array([fock.mean_photon(effective_decay(r, parity_window, t1eff))
                                for r in rhos[m:]]),
    }


def _steady_rho(job):
    params, spec, dim = job
    return steady_state(params, spec, dim).rho


def relaxation_run(params: KpoParams, sched: PumpSchedule, spec: DissipationSpec, holds, dim=30,
                   start="prepared", dt_max=None):
    """Qutrit fidelities during a lossy hold.

    ``start="prepared"`` ramps the pump losslessly with ``sched`` (a long ramp
    gives a clean |0_C>); ``start="ideal"`` begins in the |0_C> eigenstate.
    Returns columns ``hold, F_q0, F_q1, F_q2, F_sum, n``.
    """
    holds = np.asarray(holds, dtype=float)
    _, targets = _targets(params, dim)
    if start == "ideal":
        rho0 = fock.ket2dm(targets["q0"])
    elif start == "prepared":
        if not sched.tau_ramp > 0:
            raise ConfigError("prepared start needs tau_ramp > 0")
        ramp = PumpSchedule(sched.p_peak, sched.cd_fraction, sched.tau_ramp, 0.0, sched.ramp_shape)
        psi = evolve_unitary(params, ramp, fock.basis(dim, 0), times=[0.0, ramp.tau_ramp],
                             dt_max=dt_max, store_states=False).states[-1]
        rho0 = fock.ket2dm(psi)
    else:
        raise ConfigError(f"unknown start {start!r}")
    hold_sched = PumpSchedule(sched.p_peak, 0.0, 0.0, float(holds[-1]), "none")
    run = evolve_lindblad(params, hold_sched, spec, rho0, times=holds, dt_max=dt_max,
                          targets={k: targets[k] for k in ("q0", "q1", "q2")}, store_states=False)
    out = {"hold": holds}
    for k in ("q0", "q1", "q2"):
        out[f"F_{k}"] = run.observables[f"F_{k}"]
    out["F_sum"] = out["F_q0"] + out["F_q1"] + out["F_q2"]
    out["n"] = run.observables["n"]
    return out


def first_peak_time(t, y):
    """Time of the first interior local maximum of ``y`` (inf if none)."""
    y = np.asarray(y)
    for i in range(1, len(y) - 1):
        if y[i] > y[i - 1] and y[i] >= y[i + 1]:
            return float(t[i])
    return np.inf


def first_crossing_time(t, y, level):
    """First time ``y`` reaches ``level`` (inf if never)."""
    idx = np.nonzero(np.asarray(y) >= level)[0]
    return float(t[idx[0]]) if idx.size else np.inf


def prepared_photon_numbers(params: KpoParams, sched: PumpSchedule, spec: DissipationSpec,
                            deltas_over_k, dim=30, t1eff_ratio=T1EFF_RATIO,
                            parity_window=PARITY_WINDOW, workers=1):
    """Mean photon number after lossy preparation and the parity-window decay."""
    jobs = [(params.with_(delta=d * params.kerr), sched, spec, dim, t1eff_ratio, parity_window)
            for d in deltas_over_k]
    return np.array(pool_map(_prepared_point, jobs, workers))


def _prepared_point(job):
    params, sched, spec, dim, ratio, window = job
    rho = evolve_lindblad(params, sched, spec, fock.basis(dim, 0), times=[0.0, sched.duration],
                          store_states=False).states[-1]
    return fock.mean_photon(effective_decay(rho, window, ratio * spec.t1))
