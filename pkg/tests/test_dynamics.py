"""Propagator checks against dense exponentials and analytic two-site motion."""

import math

import numpy as np
import pytest
import scipy.linalg as sla

from sgq import dynamics, hilbert, models
from sgq.dynamics import Schedule, Segment
from sgq.hilbert import build_basis


def test_two_site_exchange_analytic():
    basis = build_basis(2, 0)
    ex = hilbert.exchange_bond(basis, 0, 1)
    ud = hilbert.basis_state(basis, 0b01)
    for t in (0.3, 1.1, 2.7, 6.0):
        out = dynamics.evolve_static(ex, ud, t)
        assert abs(abs(ud.inner(out)) ** 2 - math.cos(t / 2) ** 2) < 1e-12


def test_constant_terms_match_expm():
    basis = build_basis(4)
    layout = models.tfim_chain(4, 1.0, pbc=False)
    ops = models.class_operators(layout, basis)
    A, B = ops["ising_field"].matrix, ops["ising_lambda"].matrix
    rng = np.random.default_rng(5)
    psi0 = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    psi0 /= np.linalg.norm(psi0)
    H = (0.3 * A + 1.7 * B).toarray()
    ref = sla.expm(-1j * 2.0 * H) @ psi0
    X, drift = dynamics.evolve_terms(
        [(A, lambda s: 0.3), (B, lambda s: 1.7)], psi0, 2.0, m=16)
    assert np.linalg.norm(X[:, 0] - ref) < 1e-11
    assert drift < 1e-12


def test_scheduled_terms_match_fine_stepper():
    basis = build_basis(4)
    layout = models.tfim_chain(4, 1.0, pbc=False)
    ops = models.class_operators(layout, basis)
    A, B = ops["ising_field"].matrix, ops["ising_lambda"].matrix
    f = lambda s: 1.0 - 0.7 * s
    g = lambda s: 2.0 * dynamics.smoothstep(s)
    rng = np.random.default_rng(5)
    psi0 = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    psi0 /= np.linalg.norm(psi0)

    n_ref = 2000
    dt = 2.0 / n_ref
    v = psi0.copy()
    Ad, Bd = A.toarray(), B.toarray()
    for k in range(n_ref):
        s = (k + 0.5) / n_ref
        v = sla.expm(-1j * dt * (f(s) * Ad + g(s) * Bd)) @ v

    diffs = {}
    for dtm in (0.05, 0.01):
        X, _ = dynamics.evolve_terms([(A, f), (B, g)], psi0, 2.0, m=12,
                                     dt_max=dtm)
        diffs[dtm] = np.linalg.norm(X[:, 0] - v)
    assert diffs[0.01] < 1e-4
    # midpoint freezing is second order in the step size
    assert diffs[0.05] / diffs[0.01] > 10.0


def test_record_callback_times_and_final_state():
    basis = build_basis(4)
    ops = models.class_operators(models.tfim_chain(4, 0.5, pbc=False), basis)
    terms = [(ops["ising_field"].matrix, lambda s: 1.0),
             (ops["ising_lambda"].matrix, lambda s: s)]
    psi0 = np.zeros(16, dtype=np.complex128)
    psi0[3] = 1.0
    seen = []

    def rec(t, s, X, ts):
        e = np.vdot(X[:, 0], ts.matvec(X)[:, 0]).real
        seen.append((t, s, e))

    X, _ = dynamics.evolve_terms(terms, psi0, 1.5, m=8, dt_max=0.1,
                                 record=rec, record_stride=5)
    assert seen[0][0] == 0.0 and seen[0][1] == 0.0
    assert seen[-1][0] == pytest.approx(1.5)
    assert seen[-1][1] == 1.0
    ts = [t for t, _, _ in seen]
    assert all(b > a for a, b in zip(ts, ts[1:]))


def test_zero_duration_is_identity():
    basis = build_basis(4)
    ops = models.class_operators(models.tfim_chain(4, 1.0), basis)
    psi0 = hilbert.random_state(basis, 9).amplitudes
    X, drift = dynamics.evolve_terms(
        [(ops["ising_field"].matrix, lambda s: 1.0)], psi0, 0.0)
    assert np.array_equal(X[:, 0], psi0)
    assert drift == 0.0
    with pytest.raises(ValueError):
        dynamics.evolve_terms(
            [(ops["ising_field"].matrix, lambda s: 1.0)], psi0, -1.0)


def test_bitwise_determinism():
    basis = build_basis(8, 0)
    layout = models.chain_j1j2(8, 1.0, 0.5, pbc=True)
    ops = models.class_operators(layout, basis)
    terms = [(op.matrix, (lambda s, c=cls: 1.0 if c == "J1" else 0.5 * s))
             for cls, op in sorted(ops.items())]
    psi0 = hilbert.random_state(basis, 2).amplitudes
    runs = []
    for threads in (1, 4):
        dynamics.set_thread_count(threads)
        X, _ = dynamics.evolve_terms(terms, psi0, 3.0, m=10)
        runs.append(X.copy())
    dynamics.set_thread_count(1)
    assert np.array_equal(runs[0], runs[1])


def test_segment_and_schedule_validation():
    with pytest.raises(ValueError):
        Segment("J1", "cubic", 0.0, 1.0)
    with pytest.raises(ValueError):
        Segment("J1", "linear", 0.0, math.inf)
    seg = Segment("J1", "smoothstep", 0.0, 2.0)
    assert seg.value(0.0) == 0.0
    assert seg.value(1.0) == 2.0
    assert seg.value(0.5) == 1.0
    with pytest.raises(ValueError):
        Schedule(duration=0.0, segments=[seg])
    with pytest.raises(ValueError):
        Schedule(duration=1.0, segments=[seg, Segment("J1", "linear")])
    with pytest.raises(ValueError):
        Schedule(duration=1.0, segments=[seg], krylov_dim=1)
    rev = Schedule(duration=1.0, segments=[seg]).reversed()
    assert rev.segments[0].start == 2.0 and rev.segments[0].end == 0.0


def test_evolve_schedule_trajectory_and_csv(tmp_path):
    layout = models.ladder(4)
    basis = build_basis(8, 0)
    base = {"J_leg": 1.0, "J_2nn": 0.5, "J_rung": 0.0, "J_diag": 0.0}
    psi = hilbert.random_state(basis, 17)
    sched = Schedule(duration=2.0,
                     segments=[Segment("J_rung", "smoothstep", 0.0, 3.0)],
                     dt_max=0.05, krylov_dim=10, record_every=10)
    traj = dynamics.evolve_schedule(layout, base, sched, psi)
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(2.0)
    assert traj.norm_drift < 1e-10
    H0 = models.assemble(layout, base, basis)
    assert traj.energies[0] == pytest.approx(H0.expectation(psi), abs=1e-10)
    for st in traj.states:
        assert abs(st.norm() - 1.0) < 1e-10

    end = dict(base, J_rung=3.0)
    H1 = models.assemble(layout, end, basis)
    import sgq.spectral as spectral
    sol = spectral.lowest_eigenpairs(H1, 2, tol=1e-10)
    leak = dynamics.adiabatic_metric(traj, H1, sol.eigenvectors[:1])
    assert 0.0 <= leak <= 1.0

    path = tmp_path / "traj.csv"
    dynamics.trajectory_to_csv(traj, path, target_space=sol.eigenvectors[:1])
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "time,energy,leakage"
    assert len(lines) == 1 + len(traj.times)
    cells = lines[1].split(",")
    assert float(cells[0]) == 0.0

    with pytest.raises(ValueError):
        dynamics.evolve_schedule(
            layout, base,
            Schedule(duration=1.0, segments=[Segment("nope", "linear", 0, 1)]),
            psi)


def test_norm_estimate_bounds_spectral_norm():
    basis = build_basis(8, 0)
    layout = models.chain_j1j2(8, 1.0, 0.5, pbc=True)
    ops = models.class_operators(layout, basis)
    terms = [(op.matrix, lambda s: 1.0) for _, op in sorted(ops.items())]
    ts = dynamics.TermSet(terms)
    est = ts.norm_estimate()
    ts.update(ts.coefficients(0.0))
    exact = np.max(np.abs(np.linalg.eigvalsh(ts.matrix.toarray())))
    assert est >= exact * 0.999
    assert est <= exact * 1.5


def test_property_random_static_blocks():
    # seeded loop: block evolution of random Hermitian terms vs dense expm
    rng = np.random.default_rng(77)
    basis = build_basis(5)
    d = basis.dim
    import scipy.sparse as sp
    for trial in range(4):
        A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        A = 0.5 * (A + A.conj().T)
        X0 = rng.standard_normal((d, 3)) + 1j * rng.standard_normal((d, 3))
        X0 /= np.linalg.norm(X0, axis=0)
        t = float(rng.uniform(0.2, 2.5))
        ref = sla.expm(-1j * t * A) @ X0
        X, drift = dynamics.evolve_terms([(sp.csr_matrix(A), lambda s: 1.0)],
                                         X0, t, m=18)
        assert np.linalg.norm(X - ref) < 1e-9
        assert drift < 1e-11
