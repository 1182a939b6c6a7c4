"""Order parameters on known product states and frozen phase points."""

import numpy as np
import pytest

from sgq import logical, models, observables
from sgq.hilbert import build_basis


def _ring_states(L):
    basis = build_basis(L, 0)
    sites = list(range(L))
    a = logical.dimer_state(basis, logical.ring_covering(sites, 0))
    b = logical.dimer_state(basis, logical.ring_covering(sites, 1))
    return basis, a, b


def test_dimer_order_pure_coverings():
    layout = models.chain_j1j2(8, 1.0, 0.5, pbc=True)
    _, a, b = _ring_states(8)
    assert observables.dimer_order(a, layout, 0) == pytest.approx(-0.75, abs=1e-12)
    assert observables.dimer_order(b, layout, 0) == pytest.approx(0.75, abs=1e-12)


def test_rung_singlet_density_extremes():
    layout = models.ladder(4)
    basis = build_basis(8, 0)
    rungs = logical.ladder_rungs(layout)
    rung_product = logical.dimer_state(basis, rungs)
    assert observables.rung_singlet_density(rung_product, layout) == \
        pytest.approx(1.0, abs=1e-12)
    aa, _ = logical.ladder_codewords(layout, basis)
    # decoupled-leg covering: <S.S> = 0 on every rung
    assert observables.rung_singlet_density(aa, layout) == \
        pytest.approx(0.25, abs=1e-12)


def test_dimer_order_vanishes_on_rung_product():
    layout = models.ladder(4)
    basis = build_basis(8, 0)
    rung_product = logical.dimer_state(basis, logical.ladder_rungs(layout))
    assert observables.dimer_order(rung_product, layout, 0) == \
        pytest.approx(0.0, abs=1e-12)
    assert observables.dimer_order(rung_product, layout, 1) == \
        pytest.approx(0.0, abs=1e-12)


def test_string_order_zero_on_rung_singlets():
    layout = models.ladder(8)
    basis = build_basis(16, 0)
    rung_product = logical.dimer_state(basis, logical.ladder_rungs(layout))
    assert observables.string_order(rung_product, layout, 0, 4) == \
        pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        observables.string_order(rung_product, layout, 3, 4)
    with pytest.raises(ValueError):
        observables.string_order(rung_product, layout, 5, 2)


def test_twist_expectation_matches_closed_form():
    basis, a, _ = _ring_states(8)
    F = logical.twist_operator(basis, list(range(8)))
    val = observables.twist_expectation(a, F)
    assert val.real == pytest.approx(np.cos(np.pi / 8) ** 4, abs=1e-12)
    assert val.imag == pytest.approx(0.0, abs=1e-12)


def test_classify_requires_all_classes():
    with pytest.raises(KeyError):
        observables.classify_phase({"J_leg": 1.0}, 4)


def test_classify_point_c():
    # frozen reference: decoupled dimerized legs
    point = {"J_leg": 1.0, "J_2nn": 0.5, "J_rung": 0.0, "J_diag": 0.0}
    res = observables.classify_phase(point, 8)
    assert res.label == "C"
    assert res.observables["e0"] == pytest.approx(-6.0, abs=1e-8)
    assert res.observables["degeneracy"] == 4
    assert res.observables["dimer_leg0"] == pytest.approx(0.7559, abs=2e-3)
    assert res.observables["dimer_leg1"] == pytest.approx(0.7559, abs=2e-3)
    assert res.observables["dimer_leg0"] * res.observables["dimer_leg1"] > 0


def test_classify_point_r():
    point = {"J_leg": 1.0, "J_2nn": 0.5, "J_rung": 5.0, "J_diag": 0.0}
    res = observables.classify_phase(point, 8)
    assert res.label == "R"
    assert res.observables["rung_singlet"] == pytest.approx(0.9832, abs=2e-3)
    assert res.observables["e0"] == pytest.approx(-30.716602, abs=1e-5)


def test_classify_point_h():
    # ferromagnetic rungs compose spin-1 sites; string order survives
    point = {"J_leg": 1.0, "J_2nn": 0.0, "J_rung": -5.0, "J_diag": 0.0}
    res = observables.classify_phase(point, 8)
    assert res.label == "H"
    assert res.observables["string"] == pytest.approx(0.3619, abs=2e-3)
    assert res.observables["rung_singlet"] <= 0.5
    assert abs(res.observables["dimer_leg0"]) <= 0.05
