"""Command-line driver.

Four tasks: `ground` (low eigenpairs of a layout), `protocol` (the
logical-gate drills), `phase-scan` (ladder phase labels over coupling
points), and `duality-check` (dual-operator algebra and spectra).  Each
takes a single JSON config and writes a deterministic JSON report, so a
given config and seed produce byte-identical output regardless of
thread count.

Exit codes: 0 success (including runs that only flag leakage), 2 bad
config, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from . import (_serialize, duality, dynamics, logical, models, observables,
               protocols, spectral)
from .dynamics import Schedule, Segment
from .hilbert import build_basis
from .spectral import ConvergenceError


class ConfigError(ValueError):
    pass


def _load_config(path, schema_name):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        import jsonschema
    except ImportError:
        return cfg
    schema = json.loads(
        resources.files("sgq.schemas").joinpath(schema_name).read_text(encoding="utf-8"))
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config rejected: {exc.message}")
    return cfg


def _corner_tuple(c):
    kind = c[0]
    return tuple([kind] + [tuple(int(v) for v in leg) for leg in c[1:]])


def layout_from_config(d):
    kind = d.get("kind")
    try:
        if kind == "chain_j1j2":
            return models.chain_j1j2(d["L"], d.get("J1", 1.0), d.get("J2", 0.0),
                                     d.get("pbc", True))
        if kind == "chain_staggered":
            return models.chain_staggered(d["L"], d.get("J", 1.0),
                                          d.get("delta", 0.0), d.get("pbc", True))
        if kind == "ladder":
            return models.ladder(d["L"], d.get("J_leg", 1.0), d.get("J_2nn", 0.0),
                                 d.get("J_rung", 1.0), d.get("J_diag", 0.0),
                                 d.get("pbc", True))
        if kind == "tfim_chain":
            return models.tfim_chain(d["L"], d.get("lambda", 1.0),
                                     d.get("pbc", False))
        if kind == "corner_plaquette":
            return models.corner_plaquette()
        if kind == "ring_network":
            rings = [tuple(r) for r in d["rings"]]
            corners = [_corner_tuple(c) for c in d.get("corners", [])]
            return models.ring_network(rings, corners)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad layout: {exc}")
    raise ConfigError(f"unknown layout kind {kind!r}")


def cmd_ground(cfg, out_path, csv_path=None, verbose=False):
    layout = layout_from_config(cfg["layout"])
    default_sector = None if layout.kind == "tfim_chain" else 0
    sector = cfg.get("sector", default_sector)
    basis = build_basis(layout.n_sites, sector)
    H = models.hamiltonian(layout, basis, cfg.get("couplings"))
    k = min(cfg.get("k", 4), basis.dim - 1)
    sol = spectral.lowest_eigenpairs(H, k=k, tol=cfg.get("tol", 1e-10))
    d = spectral.degeneracy(sol, cfg.get("split_tol"))
    report = {
        "task": "ground",
        "layout": layout.to_json_dict(),
        "sector": sector,
        "dim": basis.dim,
        "k": k,
        "eigenvalues": [float(e) for e in sol.eigenvalues],
        "residuals": [float(r) for r in sol.residuals],
        "degeneracy": d,
        "e0": float(sol.e0),
    }
    _serialize.dump_json(report, out_path)
    if verbose:
        print(f"e0={sol.e0:.12g} degeneracy={d}", file=sys.stderr)
    return 0


_POINT_C = {"J_leg": 1.0, "J_2nn": 0.5, "J_rung": 0.0, "J_diag": 0.0}
_POINT_R = {"J_leg": 1.0, "J_2nn": 0.5, "J_rung": 5.0, "J_diag": 0.0}


def _run_teleport(cfg):
    rng = np.random.default_rng(cfg.get("seed", 7))
    n = cfg.get("n_states", 100)
    had = protocols.HADAMARD
    max_err = 0.0
    max_prob_dev = 0.0
    for _ in range(n):
        raw = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi = raw / np.linalg.norm(raw)
        probs = protocols.teleport_outcome_probabilities(psi)
        max_prob_dev = max(max_prob_dev, float(np.max(np.abs(probs - 0.5))))
        want = had @ psi
        for m in (0, 1):
            got, corr = protocols.run_teleport_h(psi, m)
            max_err = max(max_err, float(np.linalg.norm(got - want)))
            assert corr == m
    return {"n_states": n, "seed": cfg.get("seed", 7),
            "max_state_error": max_err, "max_prob_deviation": max_prob_dev,
            "passed": bool(max_err < 1e-12 and max_prob_dev < 1e-12)}


def _monotone_decreasing(vals, slack=0.0):
    return all(b <= a + slack for a, b in zip(vals, vals[1:]))


def cmd_protocol(cfg, out_path, csv_path=None, verbose=False):
    name = cfg["protocol"]
    report = {"task": "protocol", "protocol": name}
    csv_rows = []
    csv_header = None

    if name in ("pump", "twist"):
        code = logical.mg_ring_code(cfg.get("L", 8))
        rep = (protocols.run_pump(code) if name == "pump"
               else protocols.run_twist(code))
        report["runs"] = [rep.to_json_dict()]
        report["flagged"] = rep.flagged
    elif name == "teleport-h":
        summary = _run_teleport(cfg)
        report["runs"] = [summary]
        report["flagged"] = not summary["passed"]
    elif name == "shuffle":
        point_c = dict(_POINT_C, **cfg.get("point_C", {}))
        point_r = dict(_POINT_R, **cfg.get("point_R", {}))
        L = cfg.get("L", 8)
        layout = models.ladder(L)
        runs = []
        leakages = []
        check = cfg.get("check_endpoints", True)
        for dur in cfg.get("durations", [30.0, 60.0, 120.0]):
            segs = [Segment(c, "smoothstep", point_c[c], point_r[c])
                    for c in sorted(set(point_c) | set(point_r))
                    if point_c.get(c, 0.0) != point_r.get(c, 0.0)]
            sched = Schedule(duration=float(dur), segments=segs,
                             dt_max=cfg.get("dt_max", np.inf),
                             krylov_dim=cfg.get("krylov_dim", 20))
            rep = protocols.run_shuffle(
                layout, point_c, point_r, sched,
                leakage_threshold=cfg.get("leakage_threshold", 0.2),
                check_endpoints=check)
            check = False  # endpoints do not change between durations
            runs.append(rep.to_json_dict())
            leakages.append(rep.action.leakage)
            if verbose:
                print(f"shuffle T={dur}: fidelity={rep.fidelity:.6f} "
                      f"leakage={rep.action.leakage:.6f}", file=sys.stderr)
        report["runs"] = runs
        report["trend"] = {"leakages": leakages,
                           "monotone_decreasing": _monotone_decreasing(leakages)}
        report["flagged"] = bool(runs and runs[-1]["flagged"])
        csv_header = ["duration", "fidelity", "leakage", "flagged"]
        csv_rows = [[r["params"]["duration"], r["fidelity"],
                     r["action"]["leakage"], r["flagged"]] for r in runs]
    elif name in ("gtg2", "gtg3"):
        n_q = 2 if name == "gtg2" else 3
        default_rings = ([[8, 1.0, 0.5]] * 2 if n_q == 2 else [[6, 1.0, 0.5]] * 3)
        rings = [tuple(r) for r in cfg.get("rings", default_rings)]
        default_corner = (["square", [0, 0], [1, 0]] if n_q == 2
                          else ["triangular", [0, 0], [1, 0], [2, 0]])
        corner = _corner_tuple(cfg.get("corner", default_corner))
        layout = models.ring_network(rings, [corner])
        runs = []
        leakages = []
        for tau in cfg.get("taus", [50.0, 100.0, 200.0]):
            sched = protocols.default_glue_schedule(
                tau, j_glue_max=cfg.get("j_glue_max", 2.0),
                krylov_dim=cfg.get("krylov_dim", 20),
                corner_down=cfg.get("corner_down", False),
                dt_max=cfg.get("dt_max", np.inf))
            rep = protocols.run_gtg(
                layout, sched, free_time=cfg.get("free_time", 0.0),
                n_qubits=n_q,
                twist_time=cfg.get("twist_factor", 2.0) * tau,
                leakage_threshold=cfg.get("leakage_threshold", 0.2))
            runs.append(rep.to_json_dict())
            leakages.append(rep.action.leakage)
            if verbose:
                print(f"{name} tau={tau}: fidelity={rep.fidelity:.6f} "
                      f"leakage={rep.action.leakage:.6f}", file=sys.stderr)
        report["runs"] = runs
        report["trend"] = {"leakages": leakages,
                           "monotone_decreasing": _monotone_decreasing(leakages)}
        report["flagged"] = bool(runs and runs[-1]["flagged"])
        csv_header = ["tau", "fidelity", "leakage", "return_fidelity_00", "flagged"]
        csv_rows = [[r["params"]["tau"], r["fidelity"], r["action"]["leakage"],
                     r["extras"]["return_fidelity_00"], r["flagged"]]
                    for r in runs]
    else:
        raise ConfigError(f"unknown protocol {name!r}")

    _serialize.dump_json(report, out_path)
    if csv_path and csv_header:
        _serialize.write_csv(csv_path, csv_header, csv_rows)
    return 0


def cmd_phase_scan(cfg, out_path, csv_path=None, verbose=False):
    L = cfg["L"]
    points = []
    if "points" in cfg:
        for p in cfg["points"]:
            points.append((p.get("name", ""), dict(p["couplings"])))
    if "axis" in cfg or "values" in cfg:
        if not ("axis" in cfg and "values" in cfg):
            raise ConfigError("axis and values must be given together")
        base = dict(cfg.get("base", _POINT_C))
        for v in cfg["values"]:
            pt = dict(base)
            pt[cfg["axis"]] = float(v)
            points.append((f"{cfg['axis']}={_serialize.format_cell(float(v))}", pt))
    if not points:
        raise ConfigError("no points to scan")
    rows = []
    for pname, coup in points:
        res = observables.classify_phase(coup, L, k=cfg.get("k", 6))
        rows.append({"name": pname, "couplings": res.couplings,
                     "label": res.label, "observables": res.observables})
        if verbose:
            print(f"{pname}: {res.label}", file=sys.stderr)
    report = {"task": "phase_scan", "L": L, "rows": rows}
    _serialize.dump_json(report, out_path)
    if csv_path:
        header = ["name", "label", "dimer_leg0", "dimer_leg1",
                  "rung_singlet", "string"]
        _serialize.write_csv(csv_path, header, [
            [r["name"], r["label"], r["observables"]["dimer_leg0"],
             r["observables"]["dimer_leg1"], r["observables"]["rung_singlet"],
             r["observables"]["string"]] for r in rows])
    return 0


def cmd_duality(cfg, out_path, csv_path=None, verbose=False):
    report = {"task": "duality_check"}
    ok = True
    pl = cfg.get("pauli_L", 4)
    res = duality.pauli_table_residuals(pl)
    report["pauli_L"] = pl
    report["pauli_residuals"] = res
    ok &= max(res.values()) < 1e-12
    rewrites = []
    for item in cfg.get("rewrite", [{"L": 4, "lambda": 0.7}]):
        r = duality.rewrite_residual(item["L"], item["lambda"])
        rewrites.append({"L": item["L"], "lambda": item["lambda"], "residual": r})
        ok &= r < 1e-12
    report["rewrite"] = rewrites
    spectra = []
    for item in cfg.get("spectra", [{"L": 6, "lambda": 0.5}, {"L": 6, "lambda": 2.0},
                                    {"L": 8, "lambda": 0.5}, {"L": 8, "lambda": 2.0}]):
        chk = duality.spectrum_duality_check(item["L"], item["lambda"],
                                             tol=item.get("tol", 1e-8))
        spectra.append(chk)
        ok &= chk["passed"]
    report["spectra"] = spectra
    report["parity"] = [duality.parity_split(i["L"], i["lambda"])
                        for i in cfg.get("parity", [])]
    report["order"] = [dict(duality.order_parameters(i["L"], i["lambda"]),
                            L=i["L"], **{"lambda": i["lambda"]})
                       for i in cfg.get("order", [])]
    report["passed"] = bool(ok)
    _serialize.dump_json(report, out_path)
    if verbose:
        print(f"duality passed={bool(ok)}", file=sys.stderr)
    return 0


_TASKS = {
    "ground": (cmd_ground, "ground.json"),
    "protocol": (cmd_protocol, "protocol.json"),
    "phase-scan": (cmd_phase_scan, "phase_scan.json"),
    "duality-check": (cmd_duality, "duality.json"),
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="sgq", description="dimerized-ring logical qubit toolbox")
    sub = parser.add_subparsers(dest="task", required=True)
    for task in _TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--csv", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        env = os.environ.get("SGQ_THREADS", "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError:
                print(f"sgq: ignoring bad SGQ_THREADS={env!r}", file=sys.stderr)
    if threads is not None and threads > 0:
        dynamics.set_thread_count(threads)

    fn, schema = _TASKS[args.task]
    try:
        cfg = _load_config(args.config, schema)
        code = fn(cfg, args.out, csv_path=args.csv, verbose=args.verbose)
    except ConfigError as exc:
        print(f"sgq: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, FloatingPointError) as exc:
        print(f"sgq: numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"sgq {args.task}: wrote {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
