"""Logical encodings on dimerized rings and ladders.

A logical code is a list of orthonormal codewords over the physical
basis.  Codewords built from singlet-covering product states are not
orthogonal at finite size (ring coverings overlap by 2^(1-L/2)), so
codes are fixed by symmetric (Loewdin) orthonormalization, which mixes
the candidates as little as possible and keeps their labels meaningful.

Sign conventions, chosen once so every downstream phase is reproducible:
a singlet pair written (i, j) is (|up_i down_j> - |down_i up_j>)/sqrt(2);
ring coverings order each pair along the traversal, so the covering that
crosses the seam carries its wrap pair as (last site, first site).  The
twist operator numbers sites n = 1..L from a designated origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import hilbert
from .hilbert import SparseOperator, StateVector, build_basis


def ring_covering(sites, start):
    """NN pairing of a ring's site list beginning at index `start`.

    start=0 gives the aligned covering [(s0,s1),(s2,s3),...]; start=1
    the shifted one, whose last pair wraps the seam as (s_{L-1}, s0).
    """
    L = len(sites)
    if L % 2:
        raise ValueError("ring coverings need an even number of sites")
    return [(sites[(start + 2 * k) % L], sites[(start + 2 * k + 1) % L])
            for k in range(L // 2)]


def dimer_state(basis, covering):
    """Normalized product of singlets over an explicit pair list.

    The pair order fixes signs: (i, j) contributes +1/sqrt(2) on
    |up_i down_j> and -1/sqrt(2) on |down_i up_j>.
    """
    sites = [s for pair in covering for s in pair]
    if sorted(sites) != list(range(basis.n_sites)):
        raise ValueError("covering is not a perfect matching of the sites")
    amps = np.ones(basis.dim, dtype=np.complex128)
    r = 1.0 / np.sqrt(2.0)
    for i, j in covering:
        bi = basis.bit(basis.states, i)
        bj = basis.bit(basis.states, j)
        amps = amps * np.where(bi == 1, np.where(bj == 0, r, 0.0),
                               np.where(bj == 1, -r, 0.0))
    return StateVector(basis, amps)


def twist_operator(basis, sites):
    """Diagonal unitary prod_n exp(i (2 pi / L) n S^z_n), n = 1..L along
    `sites`.  L is the length of the site list, which may be a single
    ring or a longer glued traversal."""
    L = len(sites)
    acc = np.zeros(basis.dim)
    for k, site in enumerate(sites):
        acc += (k + 1) * (basis.bit(basis.states, site) - 0.5)
    diag = np.exp(1j * (2.0 * np.pi / L) * acc)
    return hilbert.diagonal_operator(basis, diag, hermitian=False)


def plus_twist_operator(basis, rungs):
    """Twist over rung-summed spins: prod_n exp(i (2 pi/L) n (S^z_{n,1}+S^z_{n,2}))."""
    L = len(rungs)
    acc = np.zeros(basis.dim)
    for k, (i, j) in enumerate(rungs):
        acc += (k + 1) * (
            (basis.bit(basis.states, i) - 0.5)
            + (basis.bit(basis.states, j) - 0.5)
        )
    diag = np.exp(1j * (2.0 * np.pi / L) * acc)
    return hilbert.diagonal_operator(basis, diag, hermitian=False)


@dataclass
class LogicalCode:
    basis: object
    codewords: list
    labels: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.codewords)
        if n == 0 or n & (n - 1):
            raise ValueError("codeword count must be a power of two")
        if len(self.labels) != n:
            raise ValueError("one label per codeword")
        for a in range(n):
            for b in range(n):
                g = self.codewords[a].inner(self.codewords[b])
                if abs(g - (1.0 if a == b else 0.0)) > 1e-10:
                    raise ValueError("codewords are not orthonormal")

    @property
    def n_qubits(self):
        return int(np.log2(len(self.codewords)))


def code_from_states(states, labels, meta=None):
    """Loewdin-orthonormalize candidate codewords (labels preserved)."""
    n = len(states)
    gram = np.array([[states[a].inner(states[b]) for b in range(n)]
                     for a in range(n)])
    vals, vecs = np.linalg.eigh(gram)
    if vals[0] < 1e-10 * max(1.0, vals[-1]):
        raise ValueError("candidate codewords are (numerically) linearly dependent")
    half = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
    basis = states[0].basis
    words = []
    for j in range(n):
        amp = np.zeros(basis.dim, dtype=np.complex128)
        for k in range(n):
            amp += half[k, j] * states[k].amplitudes
        words.append(StateVector(basis, amp))
    return LogicalCode(basis, words, list(labels), dict(meta or {}))


def mg_ring_code(L, basis=None):
    """The two-covering code of an even ring: label "0" is the aligned
    covering, "1" the seam-wrapping one."""
    if basis is None:
        basis = build_basis(L, 0)
    sites = list(range(L))
    a = dimer_state(basis, ring_covering(sites, 0))
    b = dimer_state(basis, ring_covering(sites, 1))
    return code_from_states(
        [a, b], ["0", "1"],
        meta={"kind": "mg_ring", "L": L, "origin": 0, "sites": sites},
    )


@dataclass
class LogicalAction:
    matrix: np.ndarray
    leakage: float
    global_phase: float
    fidelity_to_unitary: float


def _apply_process(process, psi):
    if isinstance(process, SparseOperator):
        return hilbert.apply(process, psi)
    return process(psi)


def extract_action(code_in, code_out, process):
    """Logical matrix M_ij = <out_i| U |in_j> of a physical process.

    `process` is a SparseOperator, a callable StateVector -> StateVector,
    or a precomputed list of output states (one per input codeword).
    The returned matrix has its global phase fixed so the largest entry
    is real positive; the removed phase is recorded.
    """
    if code_in.basis != code_out.basis:
        raise ValueError("codes live on different physical bases")
    n = len(code_in.codewords)
    if isinstance(process, (list, tuple)):
        outs = list(process)
        if len(outs) != n:
            raise ValueError("need one evolved state per input codeword")
    else:
        outs = [_apply_process(process, w) for w in code_in.codewords]
    M = np.array([[code_out.codewords[i].inner(outs[j]) for j in range(n)]
                  for i in range(n)])
    leakage = float(min(1.0, max(0.0, 1.0 - np.trace(M.conj().T @ M).real / n)))
    idx = np.unravel_index(np.argmax(np.abs(M)), M.shape)
    phase = 0.0
    if abs(M[idx]) > 0:
        phase = float(np.angle(M[idx]))
        M = M * np.exp(-1j * phase)
    sv = np.linalg.svd(M, compute_uv=False)
    denom = n * float(np.sum(sv**2))
    fid_u = float(np.sum(sv) ** 2 / denom) if denom > 0 else 0.0
    return LogicalAction(M, leakage, phase, fid_u)


def gate_fidelity(M, target):
    """|tr(target^dag M)| / (2^n * rms column norm): phase-insensitive
    overlap of the normalized action with a target unitary."""
    n = M.shape[0]
    scale = np.sqrt(np.trace(M.conj().T @ M).real / n)
    if scale == 0:
        return 0.0
    return float(abs(np.trace(target.conj().T @ M)) / (n * scale))


def bloch_readout(state):
    """Bloch vector (<X>, <Y>, <Z>) of a single-qubit state or density."""
    state = np.asarray(state, dtype=np.complex128)
    if state.ndim == 1:
        rho = np.outer(state, state.conj())
    else:
        rho = state
    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    return np.array([np.trace(rho @ p).real for p in (sx, sy, sz)])


def ladder_codewords(layout, basis=None):
    """C-phase candidates |AA>, |BB>: aligned leg coverings on both legs."""
    L = layout.n_sites // 2
    if basis is None:
        basis = build_basis(layout.n_sites, 0)
    leg0 = list(range(L))
    leg1 = list(range(L, 2 * L))
    aa = dimer_state(basis, ring_covering(leg0, 0) + ring_covering(leg1, 0))
    bb = dimer_state(basis, ring_covering(leg0, 1) + ring_covering(leg1, 1))
    return aa, bb


def ladder_code(layout, basis=None):
    aa, bb = ladder_codewords(layout, basis)
    return code_from_states(
        [aa, bb], ["0", "1"],
        meta={"kind": "ladder_c", "L": layout.n_sites // 2},
    )


def ladder_translation(layout, basis, direction=1):
    """Whole-ladder translation by one rung (both legs together)."""
    L = layout.n_sites // 2
    perm = [0] * layout.n_sites
    for leg in (0, 1):
        for n in range(L):
            perm[leg * L + n] = leg * L + (n + direction) % L
    return hilbert.permutation_operator(basis, perm)


def leg_twist(layout, basis, leg):
    """Twist along one leg of a ladder (the single-leg phase readout)."""
    L = layout.n_sites // 2
    return twist_operator(basis, list(range(leg * L, (leg + 1) * L)))


def ladder_rungs(layout):
    L = layout.n_sites // 2
    return [(n, L + n) for n in range(L)]
