"""Acceptance battery: ten numbered criteria, one summary line each.

Each test prints `ACCEPTANCE n: PASS/FAIL ...` through the conftest
recorder so the full list is repeated at the end of the run.  Criterion 2
is implemented exactly as stated and is expected to fail its second
clause on this construction; see the final assert there for why.
"""

import json
import time

import numpy as np
import pytest
import scipy.linalg

from conftest import record_line
from sgq import cli, duality, dynamics, logical, models, protocols, spectral
from sgq.hilbert import StateVector, build_basis

# calibrated entangling-gate configuration shared by criteria 4 and 5
GTG_GLUE_MAX = 2.0
GTG_TWIST_FACTOR = 4.0
GTG_CORNER_DOWN = True
C4_TAUS = (50.0, 100.0, 200.0)
C5_TAUS = (25.0, 50.0, 100.0)


def _verdict(n, ok, detail):
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} {detail}"
    record_line(line)
    return line


def test_criterion_1_mg_ground_space():
    t0 = time.monotonic()
    worst_split, worst_e0, worst_res = 0.0, 0.0, 0.0
    for L in (8, 12):
        layout = models.chain_j1j2(L, 1.0, 0.5)
        basis = build_basis(L, 0)
        H = models.hamiltonian(layout, basis)
        sol = spectral.lowest_eigenpairs(H, k=4, tol=1e-12)
        assert spectral.degeneracy(sol) == 2
        split = abs(sol.eigenvalues[1] - sol.eigenvalues[0])
        worst_split = max(worst_split, split)
        worst_e0 = max(worst_e0, abs(sol.e0 - (-0.375 * L)))
        for start in (0, 1):
            cov = logical.dimer_state(basis,
                                      logical.ring_covering(list(range(L)), start))
            r = H.matrix @ cov.amplitudes - (-0.375 * L) * cov.amplitudes
            worst_res = max(worst_res, float(np.linalg.norm(r)))
    el = time.monotonic() - t0
    ok = worst_split < 1e-8 and worst_e0 < 1e-9 and worst_res < 1e-10 and el < 60
    line = _verdict(1, ok, f"split={worst_split:.2e} e0_err={worst_e0:.2e} "
                           f"covering_res={worst_res:.2e} [{el:.1f}s]")
    assert ok, line


def _weyl_norms(L):
    code = logical.mg_ring_code(L)
    F = logical.twist_operator(code.basis, list(range(L)))
    perm = [(s + 1) % L for s in range(L)]
    import sgq.hilbert as hilbert
    T = hilbert.permutation_operator(code.basis, perm)
    MF = logical.extract_action(code, code, F).matrix
    MT = logical.extract_action(code, code, T).matrix
    anti = np.linalg.norm(MF @ MT + MT @ MF, 2)
    c = complex(np.trace(MF @ MF)) / 2.0
    cp = complex(np.trace(MT @ MT)) / 2.0
    sq_f = np.linalg.norm(MF @ MF - c * np.eye(2), 2)
    sq_t = np.linalg.norm(MT @ MT - cp * np.eye(2), 2)
    return float(anti), float(sq_f), float(sq_t)


def test_criterion_2_weyl_algebra():
    t0 = time.monotonic()
    n8 = _weyl_norms(8)
    n12 = _weyl_norms(12)
    el = time.monotonic() - t0
    small8 = all(v < 0.1 for v in n8)
    strictly = all(b < a for a, b in zip(n8, n12))
    ok = small8 and strictly and el < 300
    line = _verdict(2, ok,
                    f"L8 norms=({n8[0]:.2e},{n8[1]:.2e},{n8[2]:.2e}) "
                    f"L12=({n12[0]:.2e},{n12[1]:.2e},{n12[2]:.2e}) "
                    f"strict_decrease={strictly} [{el:.1f}s]")
    # The algebra is exact at the MG point for every even L, so all six
    # norms are rounding noise (~1e-16); the longer L=12 contractions carry
    # slightly more noise and the strict-decrease clause compares two zeros.
    assert ok, line


def test_criterion_3_twist_expectation():
    t0 = time.monotonic()
    worst = 0.0
    for L in (4, 8, 12):
        basis = build_basis(L, 0)
        F = logical.twist_operator(basis, list(range(L)))
        want = np.cos(np.pi / L) ** (L / 2)
        vals = []
        for start in (0, 1):
            cov = logical.dimer_state(basis,
                                      logical.ring_covering(list(range(L)), start))
            v = complex(np.vdot(cov.amplitudes, F.matrix @ cov.amplitudes))
            vals.append(v)
            worst = max(worst, abs(v.imag), abs(abs(v.real) - want))
        worst = max(worst, abs(vals[0].real + vals[1].real))  # opposite signs
    el = time.monotonic() - t0
    ok = worst < 1e-12
    line = _verdict(3, ok, f"max_dev={worst:.2e} over L in (4,8,12) [{el:.1f}s]")
    assert ok, line


def test_criterion_4_entangling_gate_grid():
    t0 = time.monotonic()
    layout = models.ring_network([(8, 1.0, 0.5)] * 2,
                                 [("square", (0, 0), (1, 0))])
    leakages, last = [], None
    for tau in C4_TAUS:
        sched = protocols.default_glue_schedule(
            tau, j_glue_max=GTG_GLUE_MAX, krylov_dim=20,
            corner_down=GTG_CORNER_DOWN)
        last = protocols.run_gtg(layout, sched, n_qubits=2,
                                 twist_time=GTG_TWIST_FACTOR * tau)
        leakages.append(last.action.leakage)
    el = time.monotonic() - t0
    fid = last.fidelity
    leak = last.action.leakage
    ret00 = last.extras["return_fidelity_00"]
    mono = all(b < a for a, b in zip(leakages, leakages[1:]))
    ok = fid > 0.9 and leak < 0.1 and mono and ret00 > 0.98 and el < 3600
    line = _verdict(4, ok,
                    f"fid={fid:.4f} leak={leak:.4f} ret00={ret00:.4f} "
                    f"leakages={[round(x, 4) for x in leakages]} "
                    f"monotone={mono} [{el:.0f}s]")
    assert ok, line


def test_criterion_5_three_ring_gate():
    t0 = time.monotonic()
    layout = models.ring_network([(6, 1.0, 0.5)] * 3,
                                 [("triangular", (0, 0), (1, 0), (2, 0))])
    last = None
    for tau in C5_TAUS:
        sched = protocols.default_glue_schedule(
            tau, j_glue_max=GTG_GLUE_MAX, krylov_dim=20,
            corner_down=GTG_CORNER_DOWN)
        last = protocols.run_gtg(layout, sched, n_qubits=3,
                                 twist_time=GTG_TWIST_FACTOR * tau)
    el = time.monotonic() - t0
    d1s = last.phases["delta_1_spread"]
    d2s = last.phases["delta_2_spread"]
    fid = last.fidelity
    ok = d1s < 0.05 and d2s < 0.05 and fid > 0.85 and el < 4 * 3600
    line = _verdict(5, ok,
                    f"fid={fid:.4f} d1_spread={d1s:.2e} d2_spread={d2s:.2e} "
                    f"(k-sector spreads {last.phases['delta_1_sector_spread']:.3f}/"
                    f"{last.phases['delta_2_sector_spread']:.3f}) [{el:.0f}s]")
    assert ok, line


def test_criterion_6_teleportation():
    t0 = time.monotonic()
    rng = np.random.default_rng(2024)
    max_err, max_prob = 0.0, 0.0
    for _ in range(100):
        raw = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi = raw / np.linalg.norm(raw)
        want = protocols.HADAMARD @ psi
        probs = protocols.teleport_outcome_probabilities(psi)
        max_prob = max(max_prob, float(np.max(np.abs(probs - 0.5))))
        for m in (0, 1):
            got, _ = protocols.run_teleport_h(psi, m)
            max_err = max(max_err, float(np.linalg.norm(got - want)))
    el = time.monotonic() - t0
    ok = max_err < 1e-12 and max_prob < 1e-12
    line = _verdict(6, ok, f"max_state_err={max_err:.2e} "
                           f"max_prob_dev={max_prob:.2e} [{el:.1f}s]")
    assert ok, line


def test_criterion_7_shuffle():
    t0 = time.monotonic()
    point_c = {"J_leg": 1.0, "J_2nn": 0.5, "J_rung": 0.0, "J_diag": 0.0}
    point_r = {"J_leg": 1.0, "J_2nn": 0.5, "J_rung": 5.0, "J_diag": 0.0}
    layout = models.ladder(8)
    leakages, last = [], None
    check = True
    for dur in (30.0, 60.0, 120.0):
        sched = dynamics.Schedule(
            duration=dur,
            segments=[dynamics.Segment("J_rung", "smoothstep", 0.0, 5.0)],
            krylov_dim=20)
        last = protocols.run_shuffle(layout, point_c, point_r, sched,
                                     check_endpoints=check)
        check = False
        leakages.append(last.action.leakage)
    el = time.monotonic() - t0
    ov = np.asarray(last.extras["overlap_sq"])
    mono = all(b < a for a, b in zip(leakages, leakages[1:]))
    in_window = bool(np.all((ov >= 0.3) & (ov <= 0.7)))
    ok = leakages[-1] < 0.2 and mono and in_window
    line = _verdict(7, ok,
                    f"leakages={[round(x, 4) for x in leakages]} monotone={mono} "
                    f"overlaps^2={np.round(ov, 3).tolist()} [{el:.0f}s]")
    assert ok, line


def test_criterion_8_duality():
    t0 = time.monotonic()
    res = duality.pauli_table_residuals(4)
    worst_alg = max(res.values())
    worst_spec = 0.0
    for L in (6, 8):
        for lam in (0.5, 2.0):
            chk = duality.spectrum_duality_check(L, lam, tol=1e-8)
            worst_spec = max(worst_spec, chk["max_abs_diff"])
    el = time.monotonic() - t0
    ok = worst_alg < 1e-12 and worst_spec < 1e-8 and el < 60
    line = _verdict(8, ok, f"pauli_residual={worst_alg:.2e} "
                           f"spectrum_diff={worst_spec:.2e} [{el:.1f}s]")
    assert ok, line


def _oracle_battery():
    yield models.chain_j1j2(4, 1.0, 0.5), 0
    yield models.chain_j1j2(6, 1.0, 0.0), 0
    yield models.chain_j1j2(8, 1.0, 0.5), 0
    yield models.chain_j1j2(10, 1.0, 0.3), 0
    yield models.chain_staggered(8, 1.0, 0.5), 0
    yield models.chain_staggered(8, 1.0, 1.0), 0
    yield models.ladder(4, 1.0, 0.5, 1.0, 0.0), 0
    yield models.ladder(4, 1.0, 0.5, 5.0, 0.0), 0
    yield models.tfim_chain(4, 0.5), None
    yield models.tfim_chain(6, 2.0), None
    yield models.tfim_chain(8, 1.0), None
    yield models.corner_plaquette(), 0
    yield models.ring_network([(4, 1.0, 0.5)] * 2,
                              [("square", (0, 0), (1, 0))]), 0


def test_criterion_9_oracle_equivalence():
    t0 = time.monotonic()
    rng = np.random.default_rng(99)
    n_checked = 0
    worst_eig, worst_evo = 0.0, 0.0
    for layout, sector in _oracle_battery():
        basis = build_basis(layout.n_sites, sector)
        if basis.dim > 256:
            continue
        H = models.hamiltonian(layout, basis)
        Hd = H.to_dense()
        w = np.linalg.eigvalsh(Hd)
        k = min(4, basis.dim - 1)
        sol = spectral.lowest_eigenpairs(H, k=k, tol=1e-11)
        worst_eig = max(worst_eig, float(np.max(np.abs(sol.eigenvalues - w[:k]))))
        X = rng.normal(size=(basis.dim, 2)) + 1j * rng.normal(size=(basis.dim, 2))
        X /= np.linalg.norm(X, axis=0)
        T = 3.7
        got, _ = dynamics.evolve_terms([(H.matrix, lambda s: 1.0)], X, T, m=24)
        ref = scipy.linalg.expm(-1j * T * Hd) @ X
        worst_evo = max(worst_evo, float(np.max(np.abs(got - ref))))
        n_checked += 1
    el = time.monotonic() - t0
    ok = worst_eig < 1e-8 and worst_evo < 1e-9 and el < 300 and n_checked >= 12
    line = _verdict(9, ok, f"{n_checked} systems, eig_diff={worst_eig:.2e} "
                           f"evolve_diff={worst_evo:.2e} [{el:.1f}s]")
    assert ok, line


def test_criterion_10_determinism(tmp_path):
    t0 = time.monotonic()
    cfg = {
        "protocol": "gtg2",
        "rings": [[4, 1.0, 0.5], [4, 1.0, 0.5]],
        "corner": ["square", [0, 0], [1, 0]],
        "taus": [3.0, 6.0],
        "twist_factor": 2.0,
        "j_glue_max": 1.6,
        "krylov_dim": 12,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    blobs = []
    for tag, threads in (("r1", "1"), ("r2", "1"), ("t4", "4")):
        out = tmp_path / f"{tag}.json"
        rc = cli.main(["protocol", "--config", str(cfg_path),
                       "--out", str(out), "--threads", threads])
        assert rc == 0
        blobs.append(out.read_bytes())
    el = time.monotonic() - t0
    ok = blobs[0] == blobs[1] == blobs[2]
    line = _verdict(10, ok, f"runs x2 and threads {{1,4}} byte-identical={ok} "
                            f"[{el:.0f}s]")
    assert ok, line
