"""Unitary and Lindblad time evolution, steady states and breathing-frequency fits."""
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import curve_fit
from scipy.sparse.linalg import eigs, ArpackNoConvergence

from . import fock
from .errors import FitError, IntegratorError, NumericsError, SteadyStateError, ConfigError
from .model import (DissipationSpec, KpoParams, PumpSchedule, collapse_operators, envelope,
                    hamiltonian, hamiltonian_parts)

RTOL = 1e-10
ATOL = 1e-12
NORM_DRIFT_TOL = 1e-8
TRACE_DRIFT_TOL = 1e-8
POSITIVITY_TOL = 1e-7


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: list
    observables: dict = field(default_factory=dict)
    drift: float = 0.0
    max_tail: float = 0.0
    min_eigenvalue: float = 0.0

    def __getitem__(self, name):
        return self.observables[name]


@dataclass
class SteadyState:
    rho: np.ndarray
    residual: float
    method: str
    rate_scale: float = 0.0


def _observables(states, targets):
    obs = {"n": np.array([fock.mean_photon(s) for s in states])}
    sec = np.array([fock.sector_populations(s) for s in states])
    for s in range(3):
        obs[f"sector{s}"] = sec[:, s]
    for name, ket in (targets or {}).items():
        obs[f"F_{name}"] = np.array([fock.fidelity(fock.as_density(s), ket) for s in states])
    return obs


def _stable_step(*ops):
    # explicit RK steps far beyond the spectral radius overflow before the
    # error control can reject them
    radius = sum(np.linalg.norm(op, 2) for op in ops)
    return 3.0 / radius if radius > 0 else np.inf


def _solve(rhs, y0, times, rtol, atol, max_step):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1 or np.any(np.diff(times) <= 0):
        raise ConfigError("sample times must be strictly increasing")
    if len(times) == 1 or times[-1] == times[0]:
        return np.asarray(y0)[:, None].repeat(len(times), axis=1)
    sol = solve_ivp(rhs, (times[0], times[-1]), y0, method="DOP853", t_eval=times,
                    rtol=rtol, atol=atol, max_step=max_step if max_step else np.inf)
    if not sol.success:
        raise IntegratorError(f"integration failed: {sol.message}")
    return sol.y


def _pump_parts(params, sched, dim):
    p = params.pump if sched is None or sched.p_peak is None else sched.p_peak
    return hamiltonian_parts(params, dim, pump=p)


def _coefficients(sched, t):
    if sched is None:
        return 1.0, 0.0
    return envelope(sched, max(t, 0.0))


def sesolve(h_static, h_terms, psi0, times, rtol=RTOL, atol=ATOL, max_step=None):
    """Integrate ``i d psi/dt = (H0 + sum_k f_k(t) H_k) psi``.

    ``h_terms`` is a list of ``(H_k, f_k)``; returns an array of kets, one
    column per sample time.
    """
    max_step = min(max_step or np.inf, _stable_step(h_static, *(h for h, _ in h_terms)))

    def rhs(t, y):
        out = h_static @ y
        for h, f in h_terms:
            c = f(t)
            if c:
                out = out + c * (h @ y)
        return -1j * out

    return _solve(rhs, np.asarray(psi0, dtype=complex), times, rtol, atol, max_step)


def mesolve(h_static, h_terms, c_ops, rho0, times, rtol=RTOL, atol=ATOL, max_step=None):
    """Integrate the Lindblad equation on the flattened density matrix.

    ``c_ops`` is a list of ``(L, rate)``.  Returns an array of shape
    ``(len(times), dim, dim)``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    dim = rho0.shape[0]
    damp = sum((0.5 * r * (L.conj().T @ L) for L, r in c_ops), np.zeros((dim, dim), complex))
    jumps = [(np.sqrt(r) * L) for L, r in c_ops]
    h_eff0 = h_static - 1j * damp
    max_step = min(max_step or np.inf, _stable_step(h_eff0, *(h for h, _ in h_terms)))

    def rhs(t, y):
        rho = y.reshape(dim, dim)
        h = h_eff0
        for hk, f in h_terms:
            c = f(t)
            if c:
                h = h + c * hk
        b = h @ rho
        out = -1j * (b - b.conj().T)
        for L in jumps:
            out += L @ rho @ L.conj().T
        return out.ravel()

    y = _solve(rhs, rho0.ravel(), times, rtol, atol, max_step)
    return y.T.reshape(len(times), dim, dim)


def _schedule_terms(params, sched, dim):
    static, drive, cd = _pump_parts(params, sched, dim)
    terms = [(drive, lambda t: _coefficients(sched, t)[0])]
    if sched is not None and sched.cd_fraction > 0:
        terms.append((cd, lambda t: _coefficients(sched, t)[1]))
    return static, terms


def _default_times(t_final, times, n=201):
    if times is None:
        if t_final is None or t_final <= 0:
            return np.array([0.0])
        return np.linspace(0.0, t_final, n)
    return np.asarray(times, dtype=float)


def evolve_unitary(params: KpoParams, sched: PumpSchedule, psi0, t_final=None, dt_max=None,
                   times=None, targets=None, store_states=True, rtol=RTOL, atol=ATOL,
                   drift_tol=NORM_DRIFT_TOL, tail_tol=fock.TAIL_TOL):
    """Schrodinger evolution under the scheduled pump.

    The state is never renormalised: the norm drift is reported and must stay
    below ``drift_tol``.
    """
    psi0 = fock.check_ket(psi0)
    dim = psi0.size
    if t_final is None and sched is not None:
        t_final = sched.duration
    times = _default_times(t_final, times)
    static, terms = _schedule_terms(params, sched, dim)
    y = sesolve(static, terms, psi0, times, rtol, atol, dt_max)
    states = [y[:, i] for i in range(y.shape[1])]
    drift = float(np.max(np.abs(np.linalg.norm(y, axis=0) - 1.0)))
    if drift > drift_tol:
        raise IntegratorError(f"norm drift {drift:.2e} exceeds {drift_tol:.0e}; tighten rtol or dt_max")
    tails = [fock.tail_population(s) for s in states]
    if max(tails) > tail_tol:
        fock.check_tail(states[int(np.argmax(tails))], tail_tol, what="evolved state")
    obs = _observables(states, targets)
    return EvolutionResult(times, states if store_states else [states[-1]], obs, drift, max(tails))


def evolve_lindblad(params: KpoParams, sched: PumpSchedule, spec: DissipationSpec, rho0,
                    t_final=None, dt_max=None, times=None, targets=None, store_states=True,
                    rtol=RTOL, atol=ATOL, drift_tol=TRACE_DRIFT_TOL, tail_tol=fock.TAIL_TOL):
    """Master-equation evolution with the jump operators of ``spec``.

    Trace drift must stay below ``drift_tol`` and the smallest eigenvalue of
    every stored state above ``-1e-7``.
    """
    rho0 = fock.check_density(fock.as_density(rho0))
    dim = rho0.shape[0]
    if t_final is None and sched is not None:
        t_final = sched.duration
    times = _default_times(t_final, times)
    static, terms = _schedule_terms(params, sched, dim)
    rhos = mesolve(static, terms, collapse_operators(spec, dim), rho0, times, rtol, atol, dt_max)
    return _wrap_density(times, rhos, targets, store_states, drift_tol, tail_tol)


def _wrap_density(times, rhos, targets, store_states, drift_tol, tail_tol):
    drift = float(np.max(np.abs(np.trace(rhos, axis1=1, axis2=2).real - 1.0)))
    if drift > drift_tol:
        raise IntegratorError(f"trace drift {drift:.2e} exceeds {drift_tol:.0e}")
    lmin = min(np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() for r in rhos)
    if lmin < -POSITIVITY_TOL:
        raise IntegratorError(
            f"density matrix lost positivity (eigenvalue {lmin:.2e}); use a smaller dt_max")
    states = [0.5 * (r + r.conj().T) for r in rhos]
    tails = [fock.tail_population(s) for s in states]
    if max(tails) > tail_tol:
        fock.check_tail(states[int(np.argmax(tails))], tail_tol, what="evolved state")
    obs = _observables(states, targets)
    return EvolutionResult(np.asarray(times), states if store_states else [states[-1]], obs,
                           drift, max(tails), float(lmin))


def liouvillian(h, c_ops):
    """Dense Liouvillian acting on row-major ``rho.ravel()``."""
    dim = h.shape[0]
    eye = np.eye(dim)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for L, r in c_ops:
        ld = L.conj().T @ L
        lv += r * (np.kron(L, L.conj()) - 0.5 * np.kron(ld, eye) - 0.5 * np.kron(eye, ld.T))
    return lv


def _rate_scale(c_ops):
    return float(sum(r for _, r in c_ops))


def _null_space(lv, dim, scale, seed_rho):
    shift = -1e-6 * scale
    v0 = seed_rho.ravel().astype(complex)
    try:
        vals, vecs = eigs(lv, k=2, sigma=shift, v0=v0, which="LM", tol=1e-14)
    except ArpackNoConvergence as exc:
        raise NumericsError("shift-invert iteration for the Liouvillian kernel did not converge") from exc
    zero = np.abs(vals) < 1e-7 * scale
    if zero.sum() > 1:
        k = min(12, lv.shape[0] - 2)
        more = eigs(lv, k=k, sigma=shift, which="LM", return_eigenvectors=False)
        nz = int((np.abs(more) < 1e-7 * scale).sum())
        raise SteadyStateError(f"steady state is not unique: kernel dimension {nz}"
                               f"{'+' if nz == k else ''}", kernel_dim=nz)
    j = int(np.argmin(np.abs(vals)))
    rho = vecs[:, j].reshape(dim, dim)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def steady_state(params: KpoParams, spec: DissipationSpec, dim=40, method="null_space",
                 pump_scale=1.0, long_time_tol=1e-6, long_time_chunk=None, max_time=None):
    """Steady state of the master equation at constant pump.

    ``null_space`` solves for the Liouvillian kernel by shift-invert
    iteration; ``long_time`` integrates from vacuum until the mean photon
    number drifts less than ``long_time_tol`` per microsecond.
    """
    c_ops = collapse_operators(spec, dim)
    if not c_ops:
        raise SteadyStateError("no collapse operators: steady state is not unique")
    scale = _rate_scale(c_ops)
    h = hamiltonian(params, pump_scale, dim)
    if method == "null_space":
        seed = fock.thermal_state(dim, max(spec.n_th, 1e-3))
        rho = _null_space(liouvillian(h, c_ops), dim, scale, seed)
    elif method == "long_time":
        rho = _long_time(h, c_ops, dim, scale, long_time_tol, long_time_chunk, max_time)
    else:
        raise ConfigError(f"unknown steady-state method {method!r}")
    resid = float(np.linalg.norm(_apply_liouvillian(h, c_ops, rho)))
    if resid > 1e-8 * scale:
        raise NumericsError(f"steady-state residual {resid:.2e} above {1e-8 * scale:.2e}")
    fock.check_tail(rho, what="steady state")
    return SteadyState(rho, resid, method, scale)


def _apply_liouvillian(h, c_ops, rho):
    out = -1j * (h @ rho - rho @ h)
    for L, r in c_ops:
        ld = L.conj().T @ L
        out += r * (L @ rho @ L.conj().T - 0.5 * (ld @ rho + rho @ ld))
    return out


def _long_time(h, c_ops, dim, scale, tol, chunk, max_time):
    # exact propagation over fixed chunks with the matrix exponential of the
    # Liouvillian; once <n> drifts less than tol per microsecond the chunk is
    # doubled (propagator squared) until the Liouvillian residual is small
    chunk = chunk or 1e-6
    max_time = max_time or 400.0 / scale
    lv = liouvillian(h, c_ops)
    prop = expm(lv * chunk)
    vec = fock.ket2dm(fock.basis(dim, 0)).ravel()
    n_diag = np.arange(dim) * (dim + 1)
    n_prev = float(np.arange(dim) @ vec[n_diag].real)
    t, settled = 0.0, False
    while t < max_time:
        vec = prop @ vec
        t += chunk
        n_now = float(np.arange(dim) @ vec[n_diag].real)
        settled = settled or abs(n_now - n_prev) / (chunk / 1e-6) < tol
        if settled:
            vec = vec / vec[n_diag].sum()
            if np.linalg.norm(lv @ vec) <= 1e-9 * scale:
                rho = vec.reshape(dim, dim)
                return 0.5 * (rho + rho.conj().T)
            prop = prop @ prop
            chunk *= 2
        n_prev = n_now
    raise NumericsError(f"long-time integration did not settle within {max_time:.2e} s")


def _damped_cosine(t, amp, gamma, freq, phase, offset):
    return amp * np.exp(-gamma * t) * np.cos(2 * np.pi * freq * t + phase) + offset


def fft_gap(times, series, min_periods=8, min_points_per_period=8):
    """Fit ``A exp(-t/tau) cos(2 pi f t + phi) + C`` to a sampled series.

    The FFT peak seeds a Levenberg-Marquardt fit.  Returns ``(f, tau)`` in Hz
    and seconds (``tau = inf`` for a non-decaying signal).
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(series, dtype=float)
    if t.size < 16:
        raise ConfigError("need at least 16 samples for a frequency fit")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt.mean())) > 1e-6 * dt.mean():
        raise ConfigError("fft_gap needs uniformly spaced samples")
    dt = dt.mean()
    t_rel = t - t[0]
    span = t_rel[-1]
    yc = y - y.mean()
    nfft = 16 * len(yc)
    spec = np.fft.rfft(yc * np.hanning(len(yc)), nfft)
    freqs = np.fft.rfftfreq(nfft, dt)
    k = int(np.argmax(np.abs(spec[1:]))) + 1
    f0 = freqs[k]
    if f0 * span < min_periods:
        raise ConfigError(f"only {f0 * span:.1f} periods sampled; need >= {min_periods}")
    if 1.0 / (f0 * dt) < min_points_per_period:
        raise ConfigError(f"only {1 / (f0 * dt):.1f} samples per period; need >= {min_points_per_period}")
    # phase and amplitude seed from a linear least-squares fit at f0
    basis = np.column_stack([np.cos(2 * np.pi * f0 * t_rel), np.sin(2 * np.pi * f0 * t_rel)])
    (c, s), *_ = np.linalg.lstsq(basis, yc, rcond=None)
    p0 = [np.hypot(c, s), 1.0 / span, f0, np.arctan2(-s, c), y.mean()]
    try:
        popt, _ = curve_fit(_damped_cosine, t_rel, y, p0=p0, method="lm", maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"decaying-cosine fit did not converge: {exc}") from exc
    amp, gamma, freq, _, _ = popt
    if not np.all(np.isfinite(popt)):
        raise FitError("decaying-cosine fit returned non-finite parameters")
    freq = abs(freq)
    tau = np.inf if gamma <= 0 else 1.0 / gamma
    return float(freq), float(tau)


def prepare_cat(params: KpoParams, sched: PumpSchedule, spec: DissipationSpec = None, dim=30,
                dt_max=None):
    """Ramp the pump from vacuum and hold; return the end-of-hold state.

    A ket for lossless runs, a density matrix when ``spec`` is given.
    """
    psi0 = fock.basis(dim, 0)
    t_final = sched.duration
    times = np.array([0.0]) if t_final == 0 else np.array([0.0, t_final])
    if spec is None:
        return evolve_unitary(params, sched, psi0, times=times, dt_max=dt_max,
                              store_states=False).states[-1]
    return evolve_lindblad(params, sched, spec, fock.ket2dm(psi0), times=times, dt_max=dt_max,
                           store_states=False).states[-1]


def eigenbasis_evolution(h, psi0, times):
    """Exact propagation under a constant Hamiltonian by diagonalisation."""
    w, v = np.linalg.eigh(h)
    c = v.conj().T @ psi0
    phases = np.exp(-1j * np.outer(w, times))
    return v @ (c[:, None] * phases)
