"""Spin-1/2 bases, sparse operators and state vectors.

Conventions used throughout the package:

* a configuration is an integer bitstring with site 0 at the least
  significant bit and an up spin stored as 1,
* a basis is either the full 2**n space or one total-S^z sector, kept in
  ascending configuration order (lexicographic in the bitstring),
* spin operators are S = sigma/2, so S_i.S_j on a singlet gives -3/4 and
  on a triplet +1/4.

Operators are thin wrappers around scipy CSR matrices that remember the
bases they act between; entries are kept canonical (sorted, duplicates
merged, explicit zeros dropped).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp

HERMITICITY_TOL = 1e-12


def _popcount(a):
    return np.bitwise_count(a.astype(np.uint64)).astype(np.int64)


@dataclass(frozen=True)
class SpinBasis:
    """Ordered configuration basis, optionally restricted to one S^z sector."""

    n_sites: int
    sector: float | None
    states: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return len(self.states)

    @property
    def full(self):
        return self.sector is None

    def index_of(self, config):
        """Position of a configuration; raises if it is not in the basis."""
        i = int(np.searchsorted(self.states, config))
        if i == self.dim or self.states[i] != config:
            raise KeyError(f"configuration {config:#x} not in basis")
        return i

    def index_of_array(self, configs):
        """Vectorized lookup; every entry must belong to the basis."""
        if self.full:
            return configs.astype(np.int64)
        idx = np.searchsorted(self.states, configs)
        if np.any(idx >= self.dim) or np.any(self.states[idx] != configs):
            raise KeyError("configuration outside basis")
        return idx

    def config_of(self, i):
        return int(self.states[i])

    def bit(self, configs, site):
        return (configs >> np.int64(site)) & np.int64(1)

    def __eq__(self, other):
        return (
            isinstance(other, SpinBasis)
            and self.n_sites == other.n_sites
            and self.sector == other.sector
        )

    def __hash__(self):
        return hash((self.n_sites, self.sector))


def build_basis(n_sites, sector=None):
    """Enumerate a spin-1/2 basis.

    Parameters
    ----------
    n_sites : int
        Number of sites (1 <= n_sites <= 24 supported).
    sector : float or None
        Total S^z to restrict to.  None keeps the full 2**n space.  The
        sector S^z = n_up - n_sites/2 must be reachable, i.e. n_up integral
        and 0 <= n_up <= n_sites, otherwise a ValueError is raised.
    """
    if not 1 <= n_sites <= 24:
        raise ValueError(f"n_sites={n_sites} outside supported range 1..24")
    if sector is None:
        states = np.arange(1 << n_sites, dtype=np.int64)
        return SpinBasis(n_sites, None, states)
    n_up = sector + n_sites / 2.0
    if abs(n_up - round(n_up)) > 1e-12 or not 0 <= round(n_up) <= n_sites:
        raise ValueError(f"sector S^z={sector} empty for {n_sites} sites")
    n_up = int(round(n_up))
    states = np.arange(1 << n_sites, dtype=np.int64)
    states = states[_popcount(states) == n_up]
    assert len(states) == comb(n_sites, n_up)
    return SpinBasis(n_sites, float(sector), states)


@dataclass
class StateVector:
    """Complex amplitudes over a SpinBasis."""

    basis: SpinBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.basis.dim,):
            raise ValueError("amplitude array does not match basis dimension")

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self):
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / n)

    def inner(self, other):
        """<self|other>; bases must match."""
        _check_same_basis(self.basis, other.basis)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def copy(self):
        return StateVector(self.basis, self.amplitudes.copy())


def _check_same_basis(a, b):
    if a != b:
        raise ValueError("bases do not match")


def _canonical_csr(matrix):
    m = matrix.tocsr()
    m.sum_duplicates()
    m.sort_indices()
    m.eliminate_zeros()
    return m


@dataclass
class SparseOperator:
    """CSR-backed operator between two bases (often the same one)."""

    basis_in: SpinBasis
    basis_out: SpinBasis
    matrix: sp.csr_matrix
    hermitian: bool = False

    def __post_init__(self):
        self.matrix = _canonical_csr(self.matrix)
        if self.matrix.shape != (self.basis_out.dim, self.basis_in.dim):
            raise ValueError("matrix shape does not match bases")
        if self.hermitian:
            if self.basis_in != self.basis_out:
                raise ValueError("hermitian operator needs equal bases")
            gap = abs(self.matrix - self.matrix.getH()).max()
            if gap > HERMITICITY_TOL:
                raise ValueError(f"hermitian flag violated by {gap:.2e}")

    @property
    def entries(self):
        """Canonical (row, col, value) triples, row-major sorted."""
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def to_dense(self):
        return self.matrix.toarray()

    def dagger(self):
        return SparseOperator(
            self.basis_out, self.basis_in, self.matrix.getH().tocsr(), self.hermitian
        )

    def expectation(self, psi):
        _check_same_basis(psi.basis, self.basis_in)
        val = complex(np.vdot(psi.amplitudes, self.matrix @ psi.amplitudes))
        return val.real if self.hermitian else val

    def __add__(self, other):
        _check_same_basis(self.basis_in, other.basis_in)
        _check_same_basis(self.basis_out, other.basis_out)
        return SparseOperator(
            self.basis_in,
            self.basis_out,
            self.matrix + other.matrix,
            self.hermitian and other.hermitian,
        )

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        scalar = complex(scalar)
        herm = self.hermitian and scalar.imag == 0.0
        return SparseOperator(self.basis_in, self.basis_out, self.matrix * scalar, herm)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return apply(self, other)
        _check_same_basis(other.basis_out, self.basis_in)
        return SparseOperator(
            other.basis_in, self.basis_out, self.matrix @ other.matrix, False
        )


def apply(op, psi):
    """Matrix-vector product; returns a StateVector over op.basis_out."""
    _check_same_basis(psi.basis, op.basis_in)
    return StateVector(op.basis_out, op.matrix @ psi.amplitudes)


def identity_operator(basis):
    return SparseOperator(basis, basis, sp.identity(basis.dim, format="csr"), True)


def diagonal_operator(basis, values, hermitian=None):
    values = np.asarray(values)
    if hermitian is None:
        hermitian = bool(np.all(np.abs(values.imag) <= HERMITICITY_TOL)) if np.iscomplexobj(values) else True
    return SparseOperator(basis, basis, sp.diags(values).tocsr(), hermitian)


def _pair_masks(basis, i, j):
    if not (0 <= i < basis.n_sites and 0 <= j < basis.n_sites) or i == j:
        raise ValueError(f"invalid bond ({i}, {j})")
    bi = basis.bit(basis.states, i)
    bj = basis.bit(basis.states, j)
    return bi, bj


def zz_bond(basis, i, j):
    """S^z_i S^z_j (diagonal)."""
    bi, bj = _pair_masks(basis, i, j)
    diag = np.where(bi == bj, 0.25, -0.25)
    return diagonal_operator(basis, diag)


def _flip_indices(basis, i, j):
    """Rows/cols of the spin-flip part: configs with anti-aligned (i, j)."""
    bi, bj = _pair_masks(basis, i, j)
    src = np.nonzero(bi != bj)[0]
    flipped = basis.states[src] ^ np.int64((1 << i) | (1 << j))
    dst = basis.index_of_array(flipped)
    return src, dst


def xy_exchange_bond(basis, i, j):
    """(1/2)(S+_i S-_j + S-_i S+_j): the spin flip-flop term."""
    src, dst = _flip_indices(basis, i, j)
    data = np.full(len(src), 0.5)
    m = sp.csr_matrix((data, (dst, src)), shape=(basis.dim, basis.dim))
    return SparseOperator(basis, basis, m, True)


def dm_z_bond(basis, i, j):
    """(i/2)(S+_i S-_j - S-_i S+_j): z-axis Dzyaloshinskii-Moriya term.

    Antisymmetric under i <-> j; together with xy_exchange_bond it spans
    arbitrary-phase hopping: cos(a)*xy + sin(a)*dm = (e^{ia} S+_i S-_j + h.c.)/2.
    """
    bi, bj = _pair_masks(basis, i, j)
    src = np.nonzero(bi != bj)[0]
    flipped = basis.states[src] ^ np.int64((1 << i) | (1 << j))
    dst = basis.index_of_array(flipped)
    # S+_i S-_j acts on configs with i down, j up (bi == 0 there)
    data = np.where(bi[src] == 0, 0.5j, -0.5j)
    m = sp.csr_matrix((data, (dst, src)), shape=(basis.dim, basis.dim))
    return SparseOperator(basis, basis, m, True)


def exchange_bond(basis, i, j):
    """Heisenberg exchange S_i . S_j on one bond."""
    src, dst = _flip_indices(basis, i, j)
    bi, bj = _pair_masks(basis, i, j)
    diag = np.where(bi == bj, 0.25, -0.25)
    rows = np.concatenate([np.arange(basis.dim), dst])
    cols = np.concatenate([np.arange(basis.dim), src])
    data = np.concatenate([diag, np.full(len(src), 0.5)])
    m = sp.csr_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim))
    return SparseOperator(basis, basis, m, True)


def pauli_x(basis, site):
    """Pauli X on one site (flips it); needs the full basis."""
    if not basis.full:
        raise ValueError("pauli_x does not preserve an S^z sector")
    src = np.arange(basis.dim)
    dst = basis.states ^ np.int64(1 << site)
    m = sp.csr_matrix((np.ones(basis.dim), (dst, src)), shape=(basis.dim,) * 2)
    return SparseOperator(basis, basis, m, True)


def pauli_z(basis, site):
    diag = np.where(basis.bit(basis.states, site) == 1, 1.0, -1.0)
    return diagonal_operator(basis, diag)


def pauli_zz(basis, i, j):
    return diagonal_operator(basis, 4.0 * zz_bond(basis, i, j).matrix.diagonal())


def permutation_operator(basis, perm):
    """Site relabeling k -> perm[k] as a permutation matrix.

    perm must be a bijection on range(n_sites); the image configuration
    carries the bit of site k at position perm[k].
    """
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(basis.n_sites)):
        raise ValueError("perm is not a bijection on the sites")
    new = np.zeros_like(basis.states)
    for k in range(basis.n_sites):
        new |= basis.bit(basis.states, k) << perm[k]
    dst = basis.index_of_array(new)
    m = sp.csr_matrix(
        (np.ones(basis.dim), (dst, np.arange(basis.dim))), shape=(basis.dim,) * 2
    )
    return SparseOperator(basis, basis, m, False)


def random_state(basis, seed):
    """Normalized complex Gaussian state; deterministic in the seed."""
    rng = np.random.default_rng(seed)
    amp = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    return StateVector(basis, amp).normalized()


def basis_state(basis, config):
    amp = np.zeros(basis.dim, dtype=np.complex128)
    amp[basis.index_of(config)] = 1.0
    return StateVector(basis, amp)


def embed_product(factors, basis):
    """Tensor product of states on disjoint site groups, in a joint basis.

    Parameters
    ----------
    factors : list of (StateVector, sites)
        Each state lives on len(sites) sites; ``sites`` maps its local site
        k (bit k) to a site id of the joint basis.  The site groups must
        tile the joint lattice exactly.
    basis : SpinBasis
        Joint basis receiving the product state.  Joint configurations whose
        per-factor S^z does not match a factor's support get amplitude zero.
    """
    covered = [s for _, sites in factors for s in sites]
    if sorted(covered) != list(range(basis.n_sites)):
        raise ValueError("factor site groups must partition the joint lattice")
    amps = np.ones(basis.dim, dtype=np.complex128)
    for psi, sites in factors:
        if psi.basis.n_sites != len(sites):
            raise ValueError("factor size does not match its site group")
        table = np.zeros(1 << len(sites), dtype=np.complex128)
        table[psi.basis.states] = psi.amplitudes
        sub = np.zeros(basis.dim, dtype=np.int64)
        for k, site in enumerate(sites):
            sub |= basis.bit(basis.states, site) << k
        amps *= table[sub]
    return StateVector(basis, amps)
