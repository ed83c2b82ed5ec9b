"""Quasienergy spectrum and qutrit/excited manifold labelling.

The Hamiltonian commutes with exp(2 pi i n / 3), so it is diagonalised one
mod-3 sector at a time.  Labels come from continuation: the qutrit state of
sector ``s`` is the eigenstate connected to Fock |s> at zero pump, the
excited state the one connected to |s+3>.
"""
from dataclasses import dataclass

import numpy as np

from . import fock
from .errors import TrackingError
from .model import KpoParams, hamiltonian

STATE_TAIL_TOL = 1e-8
DEFAULT_STEPS = 20
MAX_STEPS = 160
OVERLAP_MIN = 0.5
# detuning (units of K) at which the pump ramp of the continuation is taken;
# Fock |s> and |s+3> are degenerate at zero pump when delta = (s+1) K
REFERENCE_DELTA = 0.5


@dataclass
class SpectrumResult:
    """Eigen-decomposition in units of K, sorted by decreasing quasienergy."""

    eigenvalues: np.ndarray
    eigenstates: np.ndarray  # columns are kets
    sector: np.ndarray
    qutrit_indices: tuple
    excited_indices: tuple
    gap: float
    params: KpoParams = None

    def ket(self, i):
        return self.eigenstates[:, i].copy()

    @property
    def qutrit_states(self):
        return [self.ket(i) for i in self.qutrit_indices]

    @property
    def excited_states(self):
        return [self.ket(i) for i in self.excited_indices]

    @property
    def qutrit_energies(self):
        return self.eigenvalues[list(self.qutrit_indices)]

    @property
    def excited_energies(self):
        return self.eigenvalues[list(self.excited_indices)]


def _fix_phase(vecs):
    # real symmetric blocks: make the largest-magnitude low-n amplitude positive
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        k = np.argmax(np.abs(col) > 1e-8 * np.abs(col).max())
        if col[k].real < 0:
            vecs[:, j] = -col
    return vecs


def sector_eigh(h, dim):
    """Eigenpairs of each mod-3 block: list of ``(indices, values, vectors)``."""
    out = []
    for s in range(3):
        idx = fock.sector_indices(dim, s)
        w, v = np.linalg.eigh(h[np.ix_(idx, idx)])
        out.append((idx, w, v))
    return out


def _raw_spectrum(params, dim):
    h = hamiltonian(params, 1.0, dim)
    vals, vecs, sect = [], [], []
    for s, (idx, w, v) in enumerate(sector_eigh(h, dim)):
        full = np.zeros((dim, len(w)), dtype=complex)
        full[idx, :] = v
        vals.append(w)
        vecs.append(full)
        sect.append(np.full(len(w), s))
    vals = np.concatenate(vals) / params.kerr
    vecs = np.concatenate(vecs, axis=1)
    sect = np.concatenate(sect)
    order = np.argsort(-vals, kind="stable")
    return vals[order], _fix_phase(vecs[:, order]), sect[order]


def _path(params, steps):
    """Parameter path from zero pump to ``params``.

    Pump ramps geometrically at ``min(delta, REFERENCE_DELTA K)``; if the target
    detuning is larger it is then swept linearly at full pump.
    """
    k = params.kerr
    d_ref = min(params.delta, REFERENCE_DELTA * k)
    p = params.pump
    pumps = np.concatenate([[0.0], np.geomspace(abs(p) * 1e-3, abs(p), steps) * np.sign(p)])
    path = [params.with_(delta=d_ref, pump=x) for x in pumps]
    if params.delta > d_ref:
        for d in np.linspace(d_ref, params.delta, steps + 1)[1:]:
            path.append(params.with_(delta=d, pump=p))
    return path


def _track(params, dim, steps):
    """Continue Fock |s>, |s+3> (s = 0, 1, 2) along the path; return 6 kets."""
    tracked = []
    for s in range(3):
        idx = fock.sector_indices(dim, s)
        tracked.append([np.eye(len(idx))[:, 0], np.eye(len(idx))[:, 1]])
    path = _path(params, steps)
    for step, pt in enumerate(path[1:], start=1):
        h = hamiltonian(pt, 1.0, dim)
        for s, (idx, w, v) in enumerate(sector_eigh(h, dim)):
            used = set()
            for j, prev in enumerate(tracked[s]):
                ov = np.abs(v.conj().T @ prev)
                best = int(np.argmax(ov))
                if ov[best] < OVERLAP_MIN or best in used:
                    raise TrackingError(
                        f"continuation lost sector {s} state {j} at step {step} "
                        f"(max overlap {ov[best]:.3f})", step=step)
                used.add(best)
                new = v[:, best]
                tracked[s][j] = new * np.sign((new.conj() @ prev).real or 1.0)
    kets = []
    for s in range(3):
        idx = fock.sector_indices(dim, s)
        for vec in tracked[s]:
            full = np.zeros(dim, dtype=complex)
            full[idx] = vec
            kets.append(full)
    return kets  # order: q0, e0, q1, e1, q2, e2


def classify_manifolds(eigenstates, params: KpoParams, dim, steps=DEFAULT_STEPS):
    """Indices ``(qutrit, excited)`` into the columns of ``eigenstates``.

    Continuation uses ``steps`` points per leg, doubling up to 160 when the
    maximal successive overlap drops below 0.5.
    """
    if params.pump == 0:
        kets = [fock.basis(dim, n) for n in (0, 3, 1, 4, 2, 5)]
    else:
        n = steps
        while True:
            try:
                kets = _track(params, dim, n)
                break
            except TrackingError:
                if n * 2 > MAX_STEPS:
                    raise
                n *= 2
    ov = np.abs(eigenstates.conj().T @ np.array(kets).T)
    picks = [int(np.argmax(ov[:, j])) for j in range(6)]
    if len(set(picks)) != 6:
        raise TrackingError("continued states map onto the same eigenstate")
    return tuple(picks[0::2]), tuple(picks[1::2])


def diagonalize(params: KpoParams, dim=40, steps=DEFAULT_STEPS, tail_tol=STATE_TAIL_TOL):
    """Full spectrum with qutrit/excited labels and the protection gap.

    ``gap`` is the smallest |E_qutrit - E_excited| over the three sectors, in
    units of K.
    """
    vals, vecs, sect = _raw_spectrum(params, dim)
    q, e = classify_manifolds(vecs, params, dim, steps)
    for i in q + e:
        fock.check_tail(vecs[:, i], tail_tol, what=f"eigenstate {i}")
    gap = min(abs(vals[qi] - vals[ei]) for qi, ei in zip(q, e))
    return SpectrumResult(vals, vecs, sect, q, e, float(gap), params)


def gap_curve(params: KpoParams, deltas, dim=40, steps=DEFAULT_STEPS):
    """Signed sector-0 gap ``E_0c - E_0c^ex`` (units of K) for each detuning.

    Returns an array of rows ``(delta / K, gap / K)``.
    """
    rows = []
    for d in deltas:
        res = diagonalize(params.with_(delta=d), dim, steps)
        rows.append((d / params.kerr, res.eigenvalues[res.qutrit_indices[0]]
                     - res.eigenvalues[res.excited_indices[0]]))
    return np.array(rows)


def quasienergy_curves(params: KpoParams, deltas, dim=40, steps=DEFAULT_STEPS):
    """Qutrit and excited quasienergies (units of K) per detuning.

    Columns: delta/K, E_0c, E_1c, E_2c, E_0ex, E_1ex, E_2ex.
    """
    rows = []
    for d in deltas:
        res = diagonalize(params.with_(delta=d), dim, steps)
        rows.append([d / params.kerr, *res.qutrit_energies, *res.excited_energies])
    return np.array(rows)
