"""Order parameters on chains and ladders, and a phase-label decision tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hilbert, logical, models, spectral
from .hilbert import StateVector, build_basis


def _leg_sites(layout, leg):
    if layout.kind.startswith("chain"):
        sites = [s.id for s in sorted(layout.sites, key=lambda s: s.position)]
    else:
        sites = [s.id for s in sorted(layout.sites, key=lambda s: s.position)
                 if s.leg == leg]
    if not sites:
        raise ValueError(f"no sites on leg {leg!r}")
    return sites


def _has_ring_closure(layout, sites):
    pair = frozenset((sites[-1], sites[0]))
    nn = {"J_leg", "J_corner", "ising_lambda"}
    return any(frozenset((b.i, b.j)) == pair for b in layout.bonds if b.cls in nn)


def dimer_order(psi, layout, leg=0):
    """Staggered nearest-neighbor exchange along one leg, normalized so a
    pure covering gives -3/4 when it pairs (site0, site1), (site2, site3),
    ... and +3/4 for the shifted pairing."""
    sites = _leg_sites(layout, leg)
    L = len(sites)
    bonds = [(sites[n], sites[(n + 1) % L]) for n in range(L)]
    if not _has_ring_closure(layout, sites):
        bonds = bonds[:-1]
    total = 0.0
    for n, (i, j) in enumerate(bonds):
        op = hilbert.exchange_bond(psi.basis, i, j)
        total += (-1.0) ** n * op.expectation(psi)
    return float(2.0 / L * total)


def rung_singlet_density(psi, layout):
    """Average rung singlet weight, 1/4 - <S.S> per rung; 1 for a product
    of rung singlets, 0 for ferromagnetically locked rungs at 1/4 each."""
    rungs = logical.ladder_rungs(layout)
    total = 0.0
    for i, j in rungs:
        total += 0.25 - hilbert.exchange_bond(psi.basis, i, j).expectation(psi)
    return float(total / len(rungs))


def string_order(psi, layout, i, j):
    """den Nijs-Rossini style string along the ladder's composite spin-1
    rungs, -<M_i exp(i pi sum_{i<k<j} M_k) M_j> with M_k the rung's total
    Sz.  Diagonal in the configuration basis, so the sum is direct."""
    rungs = logical.ladder_rungs(layout)
    L = len(rungs)
    if not (0 <= i < j < L and j - i >= 2):
        raise ValueError("need rungs 0 <= i < j with at least one rung between")
    basis = psi.basis
    m = np.zeros((L, basis.dim))
    for k, (a, b) in enumerate(rungs):
        m[k] = (basis.bit(basis.states, a).astype(np.float64) - 0.5 +
                basis.bit(basis.states, b).astype(np.float64) - 0.5)
    phase = np.ones(basis.dim)
    for k in range(i + 1, j):
        phase *= np.cos(np.pi * m[k])
    diag = -m[i] * phase * m[j]
    return float(np.sum(np.abs(psi.amplitudes) ** 2 * diag))


def twist_expectation(psi, twist):
    return complex(np.vdot(psi.amplitudes, twist.matrix @ psi.amplitudes))


@dataclass
class PhasePoint:
    couplings: dict
    observables: dict
    label: str


def _projected_max(span, op_matrix, tie_tol=1e-6):
    """Orthonormal combos of `span` maximizing the quadratic form; returns
    (max value, columns attaining it within tie_tol)."""
    V = np.column_stack([v.amplitudes for v in span])
    P = V.conj().T @ (op_matrix @ V)
    P = 0.5 * (P + P.conj().T)
    w, u = np.linalg.eigh(P)
    top = w[-1]
    cols = u[:, w >= top - tie_tol]
    return top, V @ cols


def classify_phase(couplings, L, k=6, tol=1e-10):
    """Label the ladder point: C (columnar dimers, legs aligned), S
    (staggered dimers), R (rung singlets), H (string order without rung
    dominance), or unclassified.

    The ground space can be degenerate, so the decision observables are
    evaluated on the representative that maximizes the first leg's dimer
    form, breaking remaining ties toward an aligned second leg.
    """
    layout = models.ladder(L)
    missing = sorted(set(layout.coupling_classes()) - set(couplings))
    if missing:
        raise KeyError(f"couplings missing classes: {missing}")
    basis = build_basis(layout.n_sites, 0)
    H = models.assemble(layout, couplings, basis)
    sol = spectral.lowest_eigenpairs(H, k=min(k, basis.dim - 1), tol=tol)
    d = spectral.degeneracy(sol)
    span = sol.eigenvectors[:d]

    if d == 1:
        rep = span[0]
    else:
        d1_op = _dimer_form_matrix(layout, basis, leg=0)
        _, cols = _projected_max(span, d1_op)
        if cols.shape[1] == 1:
            amp = cols[:, 0]
        else:
            sub = [StateVector(basis, cols[:, c] / np.linalg.norm(cols[:, c]))
                   for c in range(cols.shape[1])]
            d2_op = _dimer_form_matrix(layout, basis, leg=1)
            _, cols2 = _projected_max(sub, d2_op)
            amp = cols2[:, 0]
        rep = StateVector(basis, amp / np.linalg.norm(amp))

    obs = {
        "dimer_leg0": dimer_order(rep, layout, 0),
        "dimer_leg1": dimer_order(rep, layout, 1),
        "rung_singlet": rung_singlet_density(rep, layout),
        "string": string_order(rep, layout, 0, L // 2),
        "plus_twist": float(np.real(twist_expectation(
            rep, logical.plus_twist_operator(basis, logical.ladder_rungs(layout))))),
        "e0": float(sol.e0),
        "degeneracy": int(d),
    }

    d1, d2 = obs["dimer_leg0"], obs["dimer_leg1"]
    if abs(d1) > 0.05 and abs(d2) > 0.05:
        label = "C" if d1 * d2 > 0 else "S"
    elif abs(d1) <= 0.05 and abs(d2) <= 0.05:
        if obs["rung_singlet"] > 0.5:
            label = "R"
        elif abs(obs["string"]) > 0.1:
            label = "H"
        else:
            label = "unclassified"
    else:
        label = "unclassified"
    return PhasePoint(dict(couplings), obs, label)


def _dimer_form_matrix(layout, basis, leg):
    sites = _leg_sites(layout, leg)
    L = len(sites)
    total = None
    for n in range(L):
        i, j = sites[n], sites[(n + 1) % L]
        term = (-1.0) ** n * (2.0 / L) * hilbert.exchange_bond(basis, i, j).matrix
        total = term if total is None else total + term
    return total
