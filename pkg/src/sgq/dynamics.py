"""Krylov time evolution under static and scheduled Hamiltonians.

The propagator is Lanczos exp(-i dt H) applied column-block-wise, with
the Hamiltonian frozen at each step's midpoint.  Time-dependent
Hamiltonians are handled as a fixed list of (sparse term, coefficient
function) pairs whose sparsity patterns are merged once up front; each
step then only refreshes the merged data array, never the structure.

Steps satisfy ||H|| * dt <= m/5 (spectral norm estimated by a short
Lanczos run at sampled schedule points), which keeps the Krylov
truncation error per step near (e/10)^m, far below the fidelity
targets at the default basis size m = 20.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import models
from .hilbert import StateVector

try:
    from numba import njit, prange, set_num_threads, get_num_threads

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

if NUMBA_AVAILABLE:

    @njit(parallel=True, cache=True)
    def _csr_block_matvec(indptr, indices, data, X, out):
        # one thread owns one output row, nonzeros visited in stored
        # order, so results are bitwise independent of the thread count
        nrows = out.shape[0]
        ncol = X.shape[1]
        for r in prange(nrows):
            for c in range(ncol):
                out[r, c] = 0.0
            for p in range(indptr[r], indptr[r + 1]):
                a = data[p]
                k = indices[p]
                for c in range(ncol):
                    out[r, c] += a * X[k, c]


def set_thread_count(n):
    """Cap the matvec kernel's thread pool (no-op without numba)."""
    if NUMBA_AVAILABLE and n:
        import numba

        ceiling = numba.config.NUMBA_NUM_THREADS
        set_num_threads(max(1, min(int(n), ceiling)))


def smoothstep(u):
    return u * u * (3.0 - 2.0 * u)


_SHAPES = {
    "constant": lambda s, a, b: a,
    "linear": lambda s, a, b: a + (b - a) * s,
    "smoothstep": lambda s, a, b: a + (b - a) * smoothstep(s),
}


@dataclass(frozen=True)
class Segment:
    cls: str
    shape: str = "smoothstep"
    start: float = 0.0
    end: float = 0.0

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown ramp shape {self.shape!r}")
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValueError("ramp endpoints must be finite")

    def value(self, s):
        return _SHAPES[self.shape](s, self.start, self.end)


@dataclass
class Schedule:
    duration: float
    segments: list
    dt_max: float = math.inf
    krylov_dim: int = 20
    record_every: int = 0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("schedule duration must be positive")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if self.krylov_dim < 2:
            raise ValueError("krylov_dim must be at least 2")
        seen = set()
        for seg in self.segments:
            if seg.cls in seen:
                raise ValueError(f"duplicate segment for class {seg.cls!r}")
            seen.add(seg.cls)

    def reversed(self):
        segs = [Segment(s.cls, s.shape, s.end, s.start) for s in self.segments]
        return Schedule(self.duration, segs, self.dt_max, self.krylov_dim,
                        self.record_every)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    energies: np.ndarray
    norm_drift: float

    @property
    def final(self):
        return self.states[-1]


class TermSet:
    """A sum of sparse terms with time-dependent scalar coefficients.

    Patterns are merged once; update(coefs) refreshes the shared data
    array in place.  Row-major key order makes the merge reproducible.
    """

    def __init__(self, terms):
        if not terms:
            raise ValueError("need at least one term")
        self.coef_fns = [fn for _, fn in terms]
        mats = [m.tocsr() for m, _ in terms]
        for m in mats:
            m.sum_duplicates()
            m.sort_indices()
        shape = mats[0].shape
        pattern = sum((abs(m) for m in mats), sp.csr_matrix(shape))
        pattern.sum_duplicates()
        pattern.sort_indices()
        pattern.eliminate_zeros()
        self.matrix = sp.csr_matrix(
            (np.zeros(pattern.nnz, dtype=np.complex128), pattern.indices.copy(),
             pattern.indptr.copy()), shape=shape)
        n = shape[1]
        union_keys = (
            np.repeat(np.arange(shape[0], dtype=np.int64),
                      np.diff(self.matrix.indptr)) * n
            + self.matrix.indices
        )
        self.slots = []
        self.datas = []
        for m in mats:
            rows = np.repeat(np.arange(shape[0], dtype=np.int64), np.diff(m.indptr))
            keys = rows * n + m.indices
            pos = np.searchsorted(union_keys, keys)
            assert np.array_equal(union_keys[pos], keys)
            self.slots.append(pos)
            self.datas.append(m.data.astype(np.complex128))
        self._coefs = None

    def coefficients(self, s):
        return tuple(float(fn(s)) for fn in self.coef_fns)

    def update(self, coefs):
        if coefs == self._coefs:
            return
        data = self.matrix.data
        data[:] = 0.0
        for pos, vals, c in zip(self.slots, self.datas, coefs):
            if c != 0.0:
                data[pos] += c * vals
        self._coefs = coefs

    def matvec(self, X, out=None):
        if NUMBA_AVAILABLE:
            if out is None:
                out = np.empty_like(X)
            _csr_block_matvec(self.matrix.indptr, self.matrix.indices,
                              self.matrix.data, X, out)
            return out
        return self.matrix @ X

    def norm_estimate(self, samples=9, steps=15, seed=11):
        """Upper-ish bound on max_s ||H(s)||_2 by short Lanczos runs."""
        dim = self.matrix.shape[0]
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        worst = 0.0
        for s in np.linspace(0.0, 1.0, samples):
            self.update(self.coefficients(s))
            v = (v0 / np.linalg.norm(v0)).reshape(-1, 1)
            alphas, betas = [], []
            prev = None
            for _ in range(min(steps, dim - 1)):
                w = self.matvec(v)
                a = float(np.real(np.vdot(v, w)))
                w = w - a * v
                if prev is not None:
                    w = w - betas[-1] * prev
                alphas.append(a)
                b = float(np.linalg.norm(w))
                if b < 1e-12:
                    break
                betas.append(b)
                prev, v = v, w / b
            T = np.diag(alphas)
            if betas[: len(alphas) - 1]:
                off = np.asarray(betas[: len(alphas) - 1])
                T = T + np.diag(off, 1) + np.diag(off, -1)
            worst = max(worst, float(np.max(np.abs(np.linalg.eigvalsh(T)))))
        return 1.1 * worst + 1e-12


def _expm_block_step(termset, X, dt, m):
    """exp(-i dt H) applied to each column of X by m-step Lanczos."""
    dim, ncol = X.shape
    norms = np.linalg.norm(X, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    m = min(m, dim)
    V = np.zeros((m + 1, dim, ncol), dtype=np.complex128)
    V[0] = X / safe
    alphas = np.zeros((m, ncol))
    betas = np.zeros((m, ncol))
    scratch = np.empty_like(X)
    for j in range(m):
        W = termset.matvec(np.ascontiguousarray(V[j]), out=scratch)
        a = np.einsum("dc,dc->c", V[j].conj(), W).real
        W = W - a * V[j]
        if j > 0:
            W -= betas[j - 1] * V[j - 1]
        proj = np.einsum("kdc,dc->kc", V[: j + 1].conj(), W)
        W -= np.einsum("kdc,kc->dc", V[: j + 1], proj)
        alphas[j] = a
        b = np.linalg.norm(W, axis=0)
        betas[j] = b
        if j + 1 <= m:
            V[j + 1] = W / np.where(b > 1e-300, b, 1.0)
    U = np.zeros((m, ncol), dtype=np.complex128)
    for c in range(ncol):
        w, Q = sla.eigh_tridiagonal(alphas[:, c], betas[: m - 1, c])
        U[:, c] = Q @ (np.exp(-1j * dt * w) * Q[0])
    Y = np.einsum("kdc,kc->dc", V[:m], U)
    return Y * norms


def evolve_terms(terms, X, duration, m=20, dt_max=math.inf, record=None,
                 record_stride=0):
    """Propagate a column block through sum_k coef_k(s) * term_k.

    terms: list of (sparse matrix, coef_fn) with coef_fn over s in [0,1].
    record(t, s, X, termset) is called at t=0, at stride hits and at the
    end.  Returns (X_final, norm_drift).
    """
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    X = np.array(X, dtype=np.complex128, copy=True)
    if X.ndim == 1:
        X = X[:, None]
    ts = TermSet(terms)
    norms0 = np.linalg.norm(X, axis=0)
    if duration == 0:
        if record is not None:
            ts.update(ts.coefficients(0.0))
            record(0.0, 0.0, X, ts)
        return X, 0.0
    href = ts.norm_estimate()
    # Step budget u = ||H|| dt grows with the Krylov dimension; the
    # m-step Lanczos exp error per step is ~ (e*u/(2m))^m, so u = m/5
    # keeps it far below 1e-8 while cutting matvecs per unit time.
    u_budget = max(0.5, min(m, 30) / 5.0)
    dt_target = min(dt_max, u_budget / href)
    n_steps = max(1, math.ceil(duration / dt_target))
    dt = duration / n_steps
    if record is not None:
        ts.update(ts.coefficients(0.0))
        record(0.0, 0.0, X, ts)
    drift = 0.0
    for step in range(n_steps):
        s_mid = (step + 0.5) / n_steps
        ts.update(ts.coefficients(s_mid))
        X = _expm_block_step(ts, X, dt, m)
        last = step == n_steps - 1
        if record is not None and (last or (record_stride and (step + 1) % record_stride == 0)):
            s = (step + 1) / n_steps
            ts.update(ts.coefficients(s))
            record((step + 1) * dt, s, X, ts)
        if last:
            drift = float(np.max(np.abs(np.linalg.norm(X, axis=0) - norms0)))
    return X, drift


def evolve_static(H, psi, t, m=20, dt_max=math.inf):
    """psi(t) = exp(-i H t) psi for a Hermitian SparseOperator."""
    if not H.hermitian:
        raise ValueError("evolve_static needs a Hermitian operator")
    if psi.basis != H.basis_in:
        raise ValueError("state basis does not match operator")
    X, _ = evolve_terms([(H.matrix, lambda s: 1.0)], psi.amplitudes, t,
                        m=m, dt_max=dt_max)
    return StateVector(psi.basis, X[:, 0])


def evolve_schedule(layout, base, sched, psi):
    """Drive psi through a coupling-ramp schedule; returns a Trajectory.

    Classes without a segment are held at their value in `base`; every
    segment class must exist in the layout.
    """
    ops = models.class_operators(layout, psi.basis)
    seg_by_cls = {s.cls: s for s in sched.segments}
    unknown = sorted(set(seg_by_cls) - set(ops))
    if unknown:
        raise ValueError(f"schedule classes {unknown} not present in layout")
    terms = []
    for cls in sorted(ops):
        if cls in seg_by_cls:
            seg = seg_by_cls[cls]
            terms.append((ops[cls].matrix, seg.value))
        else:
            if cls not in base:
                raise KeyError(f"no base value for unscheduled class {cls!r}")
            val = float(base[cls])
            terms.append((ops[cls].matrix, lambda s, v=val: v))

    times, states, energies = [], [], []

    def record(t, s, X, ts):
        v = X[:, 0]
        times.append(t)
        states.append(StateVector(psi.basis, v.copy()))
        energies.append(float(np.real(np.vdot(v, ts.matvec(np.ascontiguousarray(X))[:, 0]))))

    X, drift = evolve_terms(
        terms, psi.amplitudes, sched.duration, m=sched.krylov_dim,
        dt_max=sched.dt_max, record=record, record_stride=sched.record_every)
    return Trajectory(np.asarray(times), states, np.asarray(energies), drift)


def adiabatic_metric(trajectory, H_final, target_space):
    """Leakage of the trajectory's final state out of span(target_space)."""
    psi = trajectory.final
    gram = np.array([[t.inner(s) for s in target_space] for t in target_space])
    if np.max(np.abs(gram - np.eye(len(target_space)))) > 1e-8:
        raise ValueError("target space is not orthonormal")
    weight = sum(abs(t.inner(psi)) ** 2 for t in target_space)
    return float(max(0.0, 1.0 - weight))


def trajectory_to_csv(traj, path, target_space=None):
    """Write time, energy, leakage columns (leakage is nan without targets)."""
    lines = ["time,energy,leakage"]
    for t, psi, e in zip(traj.times, traj.states, traj.energies):
        if target_space is None:
            leak = float("nan")
        else:
            leak = max(0.0, 1.0 - sum(abs(v.inner(psi)) ** 2 for v in target_space))
        lines.append(f"{t:.17g},{e:.17g},{leak:.17g}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
