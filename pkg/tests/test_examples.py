import numpy as np
import pytest

from lattice_semiconj.errors import ConjugatorNotCertifiedError
from lattice_semiconj.examples import (
    BumpSpec,
    BumpTerm,
    bump_field,
    conjugated_action,
    elementary_matrices,
    invert_conjugator,
    sanov_twist,
    standard_action,
)
from lattice_semiconj.semiconj import PsiLift, error_budget
from lattice_semiconj.spectral import eigen_data
from lattice_semiconj.torusmap import grid_points, word_lift
from lattice_semiconj.verify import equivariance_residual


def test_standard_sanov():
    spec = standard_action(2, "sl2_sanov")
    assert spec.names == ["a", "b"]
    for A in spec.matrices:
        assert A.det() == 1
        assert all(c == "neutral" for c in eigen_data(A).classes)


def test_standard_sln():
    spec = standard_action(3, "sln_elementary")
    assert len(spec.generators) == 6
    assert all(all(c == "neutral" for c in eigen_data(A).classes) for A in spec.matrices)
    # the recorded commutators hold exactly for the linear action
    x = np.random.default_rng(0).random((20, 3))
    for rel in spec.relations:
        assert np.allclose(word_lift(spec, rel, x), x, atol=1e-12)


def test_unknown_preset():
    with pytest.raises(ValueError):
        standard_action(3, "sl2_sanov")
    with pytest.raises(ValueError):
        standard_action(2, "nope")


def test_bump_fields():
    assert bump_field(BumpSpec.default(2, 0.0), 2, 8).sup_norm() == 0
    single = BumpSpec(2, (BumpTerm(0, 1.0, (1, 0)),))
    g = bump_field(single, 2, 4)
    assert g.data[:, 0, 0] == pytest.approx([0, 1, 0, -1], abs=1e-15)
    assert BumpSpec.default(2, 0.05).lipschitz_bound() == pytest.approx(0.2 * np.pi)


def test_bump_jacobian(rng):
    eta = BumpSpec(3, tuple(BumpSpec.default(3, 0.04).terms) + (BumpTerm(1, 0.02, (1, -2, 1), 0.3),))
    x = rng.random((5, 3))
    J = eta.jacobian(x)
    h = 1e-6
    for i in range(3):
        e = np.eye(3)[i] * h
        assert np.allclose(J[:, :, i], (eta(x + e) - eta(x - e)) / (2 * h), atol=1e-7)


def test_conjugator_inverse(rng):
    eta = BumpSpec.default(2)
    y = rng.random((100, 2)) * 4
    x = invert_conjugator(eta, y)
    assert np.abs(x + eta(x) - y).max() <= 1e-12


def test_zero_eta_returns_base(sanov):
    orc = conjugated_action(sanov, BumpSpec.default(2, 0.0), 8)
    assert orc.spec is sanov
    assert orc.ground_truth_phi2.sup_norm() == 0


def test_conjugator_must_be_certified(sanov):
    with pytest.raises(ConjugatorNotCertifiedError):
        conjugated_action(sanov, BumpSpec.default(2, 0.2), 8)


def test_ground_truth_self_test(oracle_small):
    spec = oracle_small.spec
    psi = PsiLift(oracle_small.ground_truth_phi2)
    pts = grid_points(oracle_small.ground_truth_phi2.res)
    budgets = {
        nm: error_budget(spec, oracle_small.ground_truth_phi2, 0.0, 1, g.matrix).total
        for nm, g in zip(spec.names, spec.generators)
    }
    assert equivariance_residual(spec, psi, pts, budgets).all_pass


def test_conjugated_sln_keeps_relations():
    base = standard_action(3, "sln_elementary")
    orc = conjugated_action(base, BumpSpec.default(3), 16)
    x = np.random.default_rng(2).random((50, 3))
    for rel in orc.spec.relations:
        d = word_lift(orc.spec, rel, x) - x
        assert np.abs(d).max() <= 0.01  # interpolation level, not exact


def test_twist_zero_is_bit_identical(sanov):
    tw = sanov_twist(BumpSpec.default(2, 0.0), 32)
    assert tw.names == sanov.names
    for g, h in zip(tw.generators, sanov.generators):
        assert g.A == h.A and g.delta is None and h.delta is None


def test_twist_only_touches_a(eta2):
    tw = sanov_twist(eta2, 16)
    assert not tw.generators[0].is_linear and tw.generators[1].is_linear


def test_elementary_names():
    names, mats = elementary_matrices(3)
    assert names == ["e12", "e13", "e21", "e23", "e31", "e32"]
    assert mats[0].entries == ((1, 1, 0), (0, 1, 0), (0, 0, 1))
