"""Dense linear algebra on a truncated single-mode Fock space.

States and operators are plain numpy arrays: a ket is a complex vector of
length ``dim`` (amplitude of |n> at index n), a density matrix or operator is
a complex ``dim x dim`` array.  The ``check_*`` helpers enforce the
invariants where a function promises them.
"""
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import DimensionError, TruncationError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-8
PSD_TOL = 1e-8
TAIL_LEVELS = 3
TAIL_TOL = 1e-6


def _check_dim(dim, minimum=2):
    if int(dim) != dim or dim < minimum:
        raise DimensionError(f"dim must be an integer >= {minimum}, got {dim}")
    return int(dim)


def _frozen(arr):
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=64)
def _annihilation(dim):
    return _frozen(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex))


def annihilation(dim):
    """Lowering operator with ``a[n-1, n] = sqrt(n)``."""
    return _annihilation(_check_dim(dim)).copy()


def creation(dim):
    return annihilation(dim).T.copy()


def number_operator(dim):
    return np.diag(np.arange(_check_dim(dim), dtype=float)).astype(complex)


def basis(dim, n):
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise DimensionError(f"Fock level {n} outside truncation {dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def ket2dm(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def as_density(state):
    """Promote a ket to a density matrix; pass matrices through."""
    state = np.asarray(state, dtype=complex)
    return ket2dm(state) if state.ndim == 1 else state


def coherent(dim, alpha):
    """Coherent state from the Poisson series, renormalised after truncation."""
    dim = _check_dim(dim)
    n = np.arange(dim)
    if alpha == 0:
        return basis(dim, 0)
    log_mag = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
    psi = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    return psi / np.linalg.norm(psi)


def thermal_state(dim, n_th):
    dim = _check_dim(dim)
    if n_th == 0:
        return ket2dm(basis(dim, 0))
    w = (n_th / (1.0 + n_th)) ** np.arange(dim)
    return np.diag(w / w.sum()).astype(complex)


def maximally_mixed(dim):
    dim = _check_dim(dim)
    return np.eye(dim, dtype=complex) / dim


def parity(dim):
    """Photon-number parity exp(i pi n)."""
    return np.diag((-1.0) ** np.arange(_check_dim(dim))).astype(complex)


def generalized_parity(dim):
    """Three-fold symmetry operator exp(2 pi i n / 3)."""
    n = np.arange(_check_dim(dim))
    return np.diag(np.exp(2j * np.pi * n / 3))


def mod3_sector_projectors(dim):
    """Diagonal projectors onto Fock states with n = s (mod 3), s = 0, 1, 2."""
    n = np.arange(_check_dim(dim, 3))
    return tuple(np.diag((n % 3 == s).astype(complex)) for s in range(3))


def sector_indices(dim, s):
    return np.arange(s, dim, 3)


def sector_populations(state):
    """Weight of ``state`` in each mod-3 sector."""
    state = np.asarray(state)
    probs = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diag(state))
    n = np.arange(len(probs))
    return np.array([probs[n % 3 == s].sum() for s in range(3)])


def tail_population(state, levels=TAIL_LEVELS):
    """Population of the top ``levels`` Fock states (truncation indicator)."""
    state = np.asarray(state)
    probs = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diag(state))
    return float(probs[-levels:].sum())


def check_tail(state, tol=TAIL_TOL, what="state"):
    tail = tail_population(state)
    if tail > tol:
        raise TruncationError(
            f"{what} has population {tail:.2e} in the top {TAIL_LEVELS} Fock levels "
            f"(limit {tol:.0e}); increase dim"
        )
    return tail


def check_ket(psi, tol=1e-10):
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.size < 2:
        raise DimensionError("ket must be a vector of length >= 2")
    if abs(np.linalg.norm(psi) - 1.0) > tol:
        raise ValueError(f"ket norm deviates from 1 by {abs(np.linalg.norm(psi) - 1):.2e}")
    return psi


def check_density(rho, herm_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, psd_tol=PSD_TOL):
    """Validate Hermiticity, unit trace and positivity; return ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 2:
        raise DimensionError(f"density matrix must be square with dim >= 2, got {rho.shape}")
    dev = np.max(np.abs(rho - rho.conj().T))
    if dev > herm_tol:
        raise ValueError(f"density matrix not Hermitian (max deviation {dev:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace is {tr:.10f}")
    lmin = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lmin < -psd_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lmin:.2e}")
    return rho


def _match(op, state):
    op = np.asarray(op)
    state = np.asarray(state)
    if op.shape[0] != state.shape[0]:
        raise DimensionError(f"operator dim {op.shape[0]} != state dim {state.shape[0]}")


def expectation(op, state):
    """<psi|O|psi> for kets, Tr(O rho) for density matrices (complex)."""
    _match(op, state)
    state = np.asarray(state)
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.einsum("ij,ji->", op, state))


def mean_photon(state):
    state = np.asarray(state)
    probs = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diag(state))
    return float(np.arange(len(probs)) @ probs)


def _psd_sqrt(rho):
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    if w.min() < -PSD_TOL:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.2e})")
    # eigenvalues at round-off level would contribute sqrt(1e-16) = 1e-8 otherwise
    w = np.where(w > 1e-14 * max(w.max(), 1.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho, target):
    """State fidelity in [0, 1].

    ``<psi|rho|psi>`` for a ket target, Uhlmann ``(Tr sqrt(sqrt(rho) s sqrt(rho)))**2``
    for a density-matrix target.
    """
    rho = as_density(rho)
    target = np.asarray(target, dtype=complex)
    _match(rho, target)
    if target.ndim == 1:
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -PSD_TOL:
            raise ValueError("rho is not positive semidefinite")
        return float(np.clip(np.vdot(target, rho @ target).real, 0.0, 1.0))
    # Tr sqrt(sqrt(rho) s sqrt(rho)) is the nuclear norm of sqrt(rho) sqrt(s)
    sv = np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(target), compute_uv=False)
    return float(np.clip(sv.sum() ** 2, 0.0, 1.0))


def trace_distance(rho, sigma):
    diff = as_density(rho) - as_density(sigma)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


@lru_cache(maxsize=32)
def _quadrature_eig(dim):
    # a^dag - a = -i Y with Y Hermitian; exp(r (a^dag - a)) = V exp(-i r y) V^dag
    a = _annihilation(dim)
    y_op = 1j * (a.conj().T - a)
    w, v = np.linalg.eigh(y_op)
    return _frozen(w), _frozen(v)


def displacement(dim, alpha):
    """Displacement operator ``expm(alpha a^dag - conj(alpha) a)`` at truncation ``dim``.

    Evaluated through a cached eigendecomposition of the quadrature, so the
    result is unitary to machine precision for any ``alpha``.  Use
    :func:`displacement_defect` to judge whether ``dim`` is large enough.
    """
    dim = _check_dim(dim)
    r, theta = abs(alpha), np.angle(alpha)
    y, v = _quadrature_eig(dim)
    rv = np.exp(1j * theta * np.arange(dim))[:, None] * v
    return (rv * np.exp(-1j * r * y)) @ rv.conj().T


def displacement_batch(dim, alphas):
    """Stack of displacement operators, shape ``(len(alphas), dim, dim)``."""
    alphas = np.asarray(alphas, dtype=complex).ravel()
    y, v = _quadrature_eig(_check_dim(dim))
    phase = np.exp(1j * np.angle(alphas)[:, None] * np.arange(dim)[None, :])
    rv = phase[:, :, None] * v[None, :, :]
    mid = np.exp(-1j * np.abs(alphas)[:, None] * y[None, :])
    return (rv * mid[:, None, :]) @ np.conj(np.swapaxes(rv, 1, 2))


def displacement_elements(rows, cols, alpha):
    """Exact matrix elements <m|D(alpha)|n> of the untruncated operator.

    Uses the associated-Laguerre closed form; independent of any truncation.
    """
    from scipy.special import eval_genlaguerre

    out = np.zeros((rows, cols), dtype=complex)
    x = abs(alpha) ** 2
    for m in range(rows):
        for n in range(cols):
            lo, hi = min(m, n), max(m, n)
            k = hi - lo
            lag = eval_genlaguerre(lo, k, x)
            if alpha == 0:
                out[m, n] = 1.0 if m == n else 0.0
                continue
            mag = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) + k * np.log(abs(alpha)) - x / 2
            val = np.exp(mag) * lag
            if m >= n:
                val *= np.exp(1j * k * np.angle(alpha))
            else:
                val *= (-1) ** k * np.exp(-1j * k * np.angle(alpha))
            out[m, n] = val
    return out


def displacement_defect(dim, alpha, support=None):
    """Unitarity defect ``max|D^dag D - I|`` of the exact displacement restricted
    to ``dim`` rows and the first ``support`` columns.

    Small values mean the truncation ``dim`` holds the displaced images of
    every state supported on ``support`` levels.
    """
    support = dim if support is None else support
    d = displacement_elements(dim, support, alpha)
    return float(np.max(np.abs(d.conj().T @ d - np.eye(support))))


def commutator(a, b):
    return a @ b - b @ a


def pad(state, dim):
    """Embed a ket or matrix into a larger truncation."""
    state = np.asarray(state, dtype=complex)
    d = state.shape[0]
    if dim < d:
        raise DimensionError(f"cannot pad dim {d} down to {dim}")
    if state.ndim == 1:
        out = np.zeros(dim, dtype=complex)
        out[:d] = state
    else:
        out = np.zeros((dim, dim), dtype=complex)
        out[:d, :d] = state
    return out
