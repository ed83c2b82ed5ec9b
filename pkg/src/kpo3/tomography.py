"""Wigner functions, the Ramsey parity-measurement oracle and state reconstruction.

Wigner values use the displaced-parity convention
``W(alpha) = (2/pi) Tr[D(alpha)^dag rho D(alpha) Pi]`` so vacuum peaks at 2/pi.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from . import fock
from .dynamics import mesolve
from .errors import ConfigError, DimensionError, TruncationError

W_SCALE = 2.0 / np.pi
DEFECT_TOL = 1e-6
# extra levels beyond the displacement-defect estimate, so the truncated
# exponential agrees with the exact operator on the rows that matter
DISPLACEMENT_MARGIN = 12
MAX_WORK_DIM = 240


@dataclass
class WignerGrid:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # values[j, i] = W(xs[i] + 1j * ys[j])

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.ys), len(self.xs)):
            raise DimensionError(f"values shape {self.values.shape} does not match axes "
                                 f"({len(self.ys)}, {len(self.xs)})")

    @property
    def alphas(self):
        x, y = np.meshgrid(self.xs, self.ys)
        return x + 1j * y

    def integral(self):
        """Trapezoid integral over the plane (1 for a fully captured state)."""
        return float(np.trapezoid(np.trapezoid(self.values, self.xs, axis=1), self.ys))

    def unit_peak(self):
        """Grid rescaled by pi/2, i.e. the displaced parity itself."""
        return WignerGrid(self.xs, self.ys, self.values / W_SCALE)

    def to_text(self):
        head = ["# wigner grid, values[row j, col i] = W(x_i + i y_j)",
                "# xs " + " ".join(repr(float(v)) for v in self.xs),
                "# ys " + " ".join(repr(float(v)) for v in self.ys)]
        body = ["\t".join(repr(float(v)) for v in row) for row in self.values]
        return "\n".join(head + body) + "\n"

    @classmethod
    def from_text(cls, text):
        xs = ys = None
        rows = []
        for line in text.splitlines():
            if line.startswith("# xs"):
                xs = [float(v) for v in line[4:].split()]
            elif line.startswith("# ys"):
                ys = [float(v) for v in line[4:].split()]
            elif line.strip() and not line.startswith("#"):
                rows.append([float(v) for v in line.split()])
        if xs is None or ys is None:
            raise ConfigError("wigner grid file lacks '# xs' / '# ys' header lines")
        return cls(np.array(xs), np.array(ys), np.array(rows).reshape(len(ys), len(xs)))


def work_dim(support, alpha_max, tol=DEFECT_TOL, max_dim=MAX_WORK_DIM):
    """Smallest truncation holding D(alpha) applied to ``support`` levels.

    Grows until the exact-element unitarity defect at ``|alpha_max|`` drops
    below ``tol``; raises :class:`TruncationError` past ``max_dim``.
    """
    d = max(support, 2)
    r = abs(alpha_max)
    while d <= max_dim:
        if fock.displacement_defect(d, r, support) < tol:
            return min(d + DISPLACEMENT_MARGIN, max_dim)
        d += 4
    raise TruncationError(f"displacements up to |alpha|={r:.2f} on {support} levels need more "
                          f"than {max_dim} Fock levels; enlarge the dimension limit or shrink the grid")


def _corner(xs, ys):
    return max(abs(complex(x, y)) for x in (xs[0], xs[-1]) for y in (ys[0], ys[-1]))


def displaced_parity(rho, alphas, dw=None):
    """``Tr[D(a)^dag rho D(a) Pi]`` for each ``a`` in ``alphas``."""
    rho = fock.as_density(rho)
    d = rho.shape[0]
    alphas = np.asarray(alphas, dtype=complex).ravel()
    if dw is None:
        dw = work_dim(d, np.max(np.abs(alphas)) if alphas.size else 0.0)
    sign = (-1.0) ** np.arange(dw)
    out = np.empty(alphas.size)
    for start in range(0, alphas.size, 64):
        block = fock.displacement_batch(dw, alphas[start:start + 64])[:, :d, :]
        # diag(D^dag rho D) restricted to the support rows of rho
        diag = np.einsum("bjn,jk,bkn->bn", block.conj(), rho, block).real
        out[start:start + 64] = diag @ sign
    return out


def wigner(rho, xs, ys):
    """Wigner function on the grid ``xs x ys`` (``x + i y = alpha``)."""
    rho = fock.check_density(fock.as_density(rho))
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    dw = work_dim(rho.shape[0], _corner(xs, ys))
    x, y = np.meshgrid(xs, ys)
    vals = W_SCALE * displaced_parity(rho, (x + 1j * y).ravel(), dw)
    return WignerGrid(xs, ys, vals.reshape(len(ys), len(xs)))


def wigner_laguerre(rho, alpha):
    """Wigner value from the Laguerre series of the Fock-basis elements.

    Independent of displacement operators; slow, meant for cross-checks.
    """
    from scipy.special import eval_genlaguerre

    rho = fock.as_density(rho)
    d = rho.shape[0]
    x = 4 * abs(alpha) ** 2
    total = 0.0
    for m in range(d):
        for n in range(m, d):
            k = n - m
            c = ((-1) ** m * np.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
                 * (2 * alpha) ** k * np.exp(-x / 2) * eval_genlaguerre(m, k, x))
            term = rho[m, n] * c
            total += term.real if k == 0 else 2 * term.real
    return W_SCALE * total


@dataclass(frozen=True)
class ParityMeasurementSpec:
    """Ramsey parity readout through a dispersively coupled transmon.

    ``chi`` in rad/s; ``ramsey_duration`` defaults to ``pi / chi``.  ``kerr``
    (rad/s) is used only when ``include_kerr`` is set.
    """

    chi: float
    t1_kpo: float = np.inf
    ramsey_duration: float = None
    include_kerr: bool = False
    kerr: float = 0.0

    def __post_init__(self):
        if not self.chi > 0:
            raise ConfigError("chi must be positive")
        if self.ramsey_duration is None:
            object.__setattr__(self, "ramsey_duration", np.pi / self.chi)
        if not self.ramsey_duration > 0:
            raise ConfigError("ramsey_duration must be positive")
        if not self.t1_kpo > 0:
            raise ConfigError("t1_kpo must be positive")
        if self.include_kerr and not self.kerr > 0:
            raise ConfigError("include_kerr needs a positive kerr")


def _ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _block_hamiltonians(dw, spec):
    # transmon-conditioned KPO Hamiltonians, both diagonal in the Fock basis
    n = np.arange(dw, dtype=float)
    kerr = 0.5 * spec.kerr * n * (n - 1) if spec.include_kerr else np.zeros(dw)
    return (-kerr, spec.chi * n - kerr)


def _ramsey_propagators(dw, spec):
    """Propagators for the diagonals of the four transmon blocks ``rho_ij``.

    With diagonal conditional Hamiltonians and jump ``a``, the diagonal of
    each block obeys a closed bidiagonal linear equation.
    """
    from scipy.linalg import expm

    h = _block_hamiltonians(dw, spec)
    gamma = 0.0 if np.isinf(spec.t1_kpo) else 1.0 / spec.t1_kpo
    n = np.arange(dw, dtype=float)
    props = {}
    for i in range(2):
        for j in range(2):
            gen = np.diag(-1j * (h[i] - h[j]) - gamma * n) + np.diag(gamma * n[1:], 1)
            props[i, j] = expm(gen * spec.ramsey_duration)
    return props


def _ramsey_readout(kpo, props):
    opening = _ry(np.pi / 2)[:, 0]
    close = _ry(-np.pi / 2)
    m = close.conj().T @ np.diag([1.0, -1.0]) @ close
    diag = np.diag(kpo)
    total = 0.0
    for (i, j), prop in props.items():
        total += m[j, i] * opening[i] * np.conj(opening[j]) * np.sum(prop @ diag)
    return float(total.real)


def _ramsey_joint(kpo, spec):
    dw = kpo.shape[0]
    h = np.kron(np.diag([0.0, 1.0]), np.diag(_block_hamiltonians(dw, spec)[1]))
    h = h + np.kron(np.diag([1.0, 0.0]), np.diag(_block_hamiltonians(dw, spec)[0]))
    c_ops = []
    if np.isfinite(spec.t1_kpo):
        c_ops.append((np.kron(np.eye(2), fock.annihilation(dw)), 1.0 / spec.t1_kpo))
    open_ = np.kron(_ry(np.pi / 2), np.eye(dw))
    g = np.diag([1.0, 0.0]).astype(complex)
    joint = open_ @ np.kron(g, kpo) @ open_.conj().T
    joint = mesolve(h.astype(complex), [], c_ops, joint, [0.0, spec.ramsey_duration])[-1]
    close = np.kron(_ry(-np.pi / 2), np.eye(dw))
    joint = close @ joint @ close.conj().T
    sz = np.kron(np.diag([1.0, -1.0]), np.eye(dw))
    return float(np.einsum("ij,ji->", sz, joint).real)


def parity_oracle(rho, alpha, spec: ParityMeasurementSpec, dw=None, method="blocks", _props=None):
    """Displaced parity read out by the joint transmon-KPO Ramsey sequence.

    The KPO state is displaced by ``-alpha``, the transmon (``|g>``, ``|e>``)
    is opened with ``R_y(pi/2)``, both evolve under ``chi |e><e| (x) n`` with
    KPO loss, and ``<sigma_z>`` after the closing ``R_y(-pi/2)`` is returned.
    With no loss and ``duration = pi/chi`` this is ``(pi/2) W(alpha)``.

    ``method="joint"`` integrates the full 2*dw master equation;
    the default ``"blocks"`` propagates only what the readout needs, exactly.
    """
    rho = fock.check_density(fock.as_density(rho))
    d = rho.shape[0]
    dw = dw or work_dim(d, abs(alpha))
    disp = fock.displacement(dw, alpha)
    kpo = disp.conj().T @ fock.pad(rho, dw) @ disp
    kpo = 0.5 * (kpo + kpo.conj().T)
    fock.check_tail(kpo, what="displaced state")
    if method == "joint":
        return _ramsey_joint(kpo, spec)
    if method != "blocks":
        raise ConfigError(f"unknown parity-oracle method {method!r}")
    return _ramsey_readout(kpo, _props or _ramsey_propagators(dw, spec))


def parity_linecut(rho, alphas, spec: ParityMeasurementSpec):
    """Oracle parity values along ``alphas`` with a shared working dimension."""
    alphas = np.asarray(alphas, dtype=complex)
    dw = work_dim(fock.as_density(rho).shape[0], np.max(np.abs(alphas)))
    props = _ramsey_propagators(dw, spec)
    return np.array([parity_oracle(rho, a, spec, dw, _props=props) for a in alphas])


def amplitude_damping(rho, gamma_t):
    """Exact amplitude-damping channel with survival ``exp(-gamma_t)``."""
    rho = fock.as_density(rho)
    d = rho.shape[0]
    if gamma_t == 0:
        return rho.copy()
    surv = np.exp(-gamma_t)
    n = np.arange(d)
    out = np.zeros_like(rho)
    for k in range(d):
        m = n[k:]
        logc = 0.5 * (gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1))
        amp = np.exp(logc) * surv ** (0.5 * (m - k)) * (1 - surv) ** (0.5 * k)
        kraus = np.zeros((d, d))
        kraus[m - k, m] = amp
        out += kraus @ rho @ kraus.T
    return out


def effective_decay(rho, t, t1eff, hamiltonian=None):
    """Decay ``rho`` for time ``t`` at single-photon rate ``1/t1eff``.

    Without a Hamiltonian the exact amplitude-damping channel is applied; with
    one the master equation is integrated.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    rho = fock.as_density(rho)
    if t == 0 or np.isinf(t1eff):
        if hamiltonian is None or t == 0:
            return rho.copy()
    if hamiltonian is None:
        return amplitude_damping(rho, t / t1eff)
    c_ops = [] if np.isinf(t1eff) else [(fock.annihilation(rho.shape[0]), 1.0 / t1eff)]
    out = mesolve(np.asarray(hamiltonian, dtype=complex), [], c_ops, rho, [0.0, t])[-1]
    return 0.5 * (out + out.conj().T)


def model_linecut(rho, alphas, t, t1eff):
    """Parity along ``alphas`` of the state decayed with ``t1eff`` (surrogate model)."""
    return displaced_parity(effective_decay(rho, t, t1eff), alphas)


def fit_t1eff(rho, alphas, measured, t, t1, bounds=(0.5, 5.0)):
    """Least-squares fit of the ratio ``T1eff / T1`` to ``measured`` parity values.

    Returns ``(ratio, max_dev)`` where ``max_dev`` is the largest pointwise
    parity deviation at the fitted ratio.
    """
    measured = np.asarray(measured, dtype=float)
    alphas = np.asarray(alphas, dtype=complex)
    rho = fock.as_density(rho)
    dw = work_dim(rho.shape[0], np.max(np.abs(alphas)))

    def misfit(ratio):
        return displaced_parity(effective_decay(rho, t, ratio * t1), alphas, dw) - measured

    res = minimize_scalar(lambda r: float(np.sum(misfit(r) ** 2)), bounds=bounds,
                          method="bounded", options={"xatol": 1e-5})
    return float(res.x), float(np.max(np.abs(misfit(res.x))))


def kerr_wind(rho, duration, kerr):
    """Free Kerr drift ``U rho U^dag`` with ``U = exp(+i (K/2) a^dag^2 a^2 t)``."""
    rho = fock.as_density(rho)
    n = np.arange(rho.shape[0])
    u = np.exp(0.5j * kerr * duration * n * (n - 1))
    return (u[:, None] * rho) * u.conj()[None, :]


def kerr_unwind(rho, duration, kerr):
    """Undo :func:`kerr_wind` over ``duration``."""
    return kerr_wind(rho, -duration, kerr)


def _hermitian_basis(d):
    """Orthonormal real basis of d x d Hermitian matrices, shape ``(d*d, d, d)``."""
    out = []
    for j in range(d):
        m = np.zeros((d, d), complex)
        m[j, j] = 1.0
        out.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), complex)
            m[j, k] = m[k, j] = 1 / np.sqrt(2)
            out.append(m)
            m = np.zeros((d, d), complex)
            m[j, k], m[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            out.append(m)
    return np.array(out)


def measurement_operators(alphas, dim, dw=None):
    """``(2/pi) P D(a) Pi D(a)^dag P`` on the first ``dim`` levels for each ``a``."""
    alphas = np.asarray(alphas, dtype=complex).ravel()
    dw = dw or work_dim(dim, np.max(np.abs(alphas)))
    sign = (-1.0) ** np.arange(dw)
    ops = np.empty((alphas.size, dim, dim), complex)
    for start in range(0, alphas.size, 64):
        block = fock.displacement_batch(dw, alphas[start:start + 64])[:, :dim, :]
        ops[start:start + 64] = W_SCALE * np.einsum("bjn,n,bkn->bjk", block, sign, block.conj())
    return ops


def _project_density(h):
    """Closest unit-trace PSD matrix in Frobenius norm (eigenvalue simplex projection)."""
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.nonzero(u - css / np.arange(1, len(u) + 1) > 0)[0][-1]
    theta = css[k] / (k + 1)
    lam = np.clip(w - theta, 0, None)
    return (v * lam) @ v.conj().T


def reconstruct(grid: WignerGrid, dim, max_iter=2000, tol=1e-12, full_output=False):
    """Density matrix whose Wigner function best matches ``grid`` in least squares.

    Unconstrained least squares over Hermitian matrices gives the start point,
    then projected gradient descent enforces unit trace and positivity.  With
    ``full_output`` also returns ``{"residual", "iterations"}`` (residual is
    the RMS misfit of the Wigner values).
    """
    values = grid.values.ravel()
    if values.size < dim * dim:
        raise ConfigError(f"{values.size} samples cannot determine a {dim}x{dim} density "
                          f"matrix (need >= {dim * dim})")
    if not np.any(values):
        # no information: the least-norm estimate is the maximally mixed state
        rho = fock.maximally_mixed(dim)
        return (rho, {"residual": 0.0, "iterations": 0}) if full_output else rho
    ops = measurement_operators(grid.alphas.ravel(), dim)
    basis = _hermitian_basis(dim)
    a = np.einsum("ikj,mjk->im", ops, basis).real
    coef, *_ = np.linalg.lstsq(a, values, rcond=None)
    rho = _project_density(np.einsum("m,mjk->jk", coef, basis))
    x = np.array([np.einsum("jk,kj->", b, rho).real for b in basis])
    step = 1.0 / np.linalg.norm(a, 2) ** 2
    loss = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad = a.T @ (a @ x - values)
        h = np.einsum("m,mjk->jk", x - step * grad, basis)
        rho = _project_density(h)
        x = np.einsum("mjk,kj->m", basis, rho).real
        new = float(np.sum((a @ x - values) ** 2))
        if abs(loss - new) <= tol * max(new, 1e-30) or loss - new <= tol:
            loss = new
            break
        loss = new
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    if full_output:
        return rho, {"residual": float(np.sqrt(loss / values.size)), "iterations": it}
    return rho
