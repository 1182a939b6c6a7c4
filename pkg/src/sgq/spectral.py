"""Lowest eigenpairs of sparse Hermitian operators.

Lanczos with full reorthogonalization, one eigenpair at a time with
explicit locking (deflation), restarting from the best Ritz vector.
Locking makes degenerate ground spaces unproblematic: after the first
member of a multiplet converges, the next run is constrained to its
orthogonal complement and finds the partner.  Start vectors come from a
seeded generator, so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .hilbert import StateVector


class ConvergenceError(RuntimeError):
    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class EigenSolution:
    eigenvalues: np.ndarray
    eigenvectors: list
    residuals: np.ndarray

    @property
    def e0(self):
        return float(self.eigenvalues[0])


def _gauge_fix(v):
    """Phase convention: largest-magnitude amplitude real and positive."""
    idx = int(np.argmax(np.abs(v)))
    ph = v[idx] / abs(v[idx]) if abs(v[idx]) > 0 else 1.0
    return v / ph


def _residual(A, v, theta):
    return float(np.linalg.norm(A @ v - theta * v))


def _dense_solution(H, k):
    A = H.matrix.toarray()
    vals, vecs = np.linalg.eigh(A)
    eigenvalues = vals[:k]
    vectors, residuals = [], []
    for idx in range(k):
        v = _gauge_fix(vecs[:, idx].astype(np.complex128))
        vectors.append(StateVector(H.basis_in, v))
        residuals.append(_residual(H.matrix, v, vals[idx]))
    return EigenSolution(np.asarray(eigenvalues), vectors, np.asarray(residuals))


def _orthogonalize(w, basis_list):
    """Project w out of the span of basis_list (done twice for safety)."""
    for _ in range(2):
        for q in basis_list:
            w = w - q * np.vdot(q, w)
    return w


def lowest_eigenpairs(H, k, tol=1e-10, seed=7, m=None, max_restarts=120):
    """The k lowest eigenpairs of a Hermitian SparseOperator.

    Residual targets are tol * max(1, |theta|).  Raises ConvergenceError
    (carrying the best residuals achieved) if a pair stalls.
    """
    if not H.hermitian:
        raise ValueError("lowest_eigenpairs needs a Hermitian operator")
    dim = H.basis_in.dim
    if k >= dim:
        raise ValueError(f"k={k} must be below dim={dim}")
    if dim <= max(16, 2 * k + 6):
        return _dense_solution(H, k)

    A = H.matrix
    rng = np.random.default_rng(seed)
    if m is None:
        m = min(dim - 1, max(40, 2 * k + 24))

    locked = []
    locked_vals = []
    best_residuals = []
    for _ in range(k):
        x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        x = _orthogonalize(x, locked)
        x /= np.linalg.norm(x)
        theta, res = np.inf, np.inf
        for _restart in range(max_restarts):
            V = [x]
            alphas, betas = [], []
            for j in range(m):
                w = A @ V[j]
                a = float(np.real(np.vdot(V[j], w)))
                alphas.append(a)
                w = w - a * V[j]
                if j > 0:
                    w = w - betas[-1] * V[j - 1]
                w = _orthogonalize(w, locked)
                w = _orthogonalize(w, V)
                b = float(np.linalg.norm(w))
                if b < 1e-13:
                    break
                betas.append(b)
                V.append(w / b)
            T = np.diag(alphas)
            if len(alphas) > 1:
                off = np.asarray(betas[: len(alphas) - 1])
                T = T + np.diag(off, 1) + np.diag(off, -1)
            tvals, tvecs = sla.eigh(T)
            y = tvecs[:, 0]
            theta = float(tvals[0])
            x = np.zeros(dim, dtype=np.complex128)
            for c, v in zip(y, V):
                x += c * v
            x = _orthogonalize(x, locked)
            nrm = np.linalg.norm(x)
            if nrm < 1e-13:
                x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
                x = _orthogonalize(x, locked)
                nrm = np.linalg.norm(x)
            x /= nrm
            res = _residual(A, x, theta)
            if res < tol * max(1.0, abs(theta)):
                break
        else:
            raise ConvergenceError(
                f"eigenpair {len(locked)} stalled at residual {res:.3e}",
                np.asarray(best_residuals + [res]),
            )
        locked.append(_gauge_fix(x))
        locked_vals.append(theta)
        best_residuals.append(res)

    order = np.argsort(locked_vals)
    eigenvalues = np.asarray([locked_vals[i] for i in order])
    vectors = [StateVector(H.basis_in, locked[i]) for i in order]
    residuals = np.asarray([best_residuals[i] for i in order])
    return EigenSolution(eigenvalues, vectors, residuals)


def degeneracy(sol, split_tol=None):
    """How many eigenvalues sit within split_tol of the lowest one."""
    if len(sol.eigenvalues) == 0:
        raise ValueError("empty EigenSolution")
    e0 = sol.eigenvalues[0]
    if split_tol is None:
        split_tol = 1e-8 * max(1.0, abs(e0))
    return int(np.sum(sol.eigenvalues <= e0 + split_tol))
