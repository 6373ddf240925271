import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lattice_semiconj.errors import NotUnimodularError, TailNotSummableError, WordOverflowError
from lattice_semiconj.examples import elementary_matrices, sanov_matrices
from lattice_semiconj.spectral import (
    IntMatrix,
    charpoly,
    eigen_data,
    first_hyperbolic_word,
    restricted_inverse_norms,
    splitting,
    squarefree_factors,
    weak_hyperbolicity_certificate,
    word_matrix,
)

CAT = IntMatrix.parse("2,1;1,1")
UNIP = IntMatrix.parse("1,1;0,1")
GOLD = (3 + math.sqrt(5)) / 2


def test_rejects_non_unimodular():
    with pytest.raises(NotUnimodularError):
        IntMatrix.parse("1,0;0,2")
    with pytest.raises(ValueError):
        IntMatrix.parse("1,2,3;4,5")


def test_parse_format_roundtrip():
    A = IntMatrix.parse("2, 1; 1, 1")
    assert A.format() == "2,1;1,1"
    assert IntMatrix.parse(A.format()) == A
    assert A.det() == 1


def test_inverse_is_exact():
    assert CAT.inverse() == IntMatrix.parse("1,-1;-1,2")
    assert CAT @ CAT.inverse() == IntMatrix.identity(2)


def test_overflow_detected():
    big = IntMatrix(((2**52, 1), (2**52 - 1, 1)))
    with pytest.raises(WordOverflowError):
        big @ big


def test_charpoly_and_squarefree():
    assert charpoly(CAT) == [1, -3, 1]
    facs = squarefree_factors([1, -3, 3, -1])
    assert [(list(map(float, p)), k) for p, k in facs] == [([1.0, -1.0], 3)]
    facs = squarefree_factors([1, 0, -2, 0, 1])
    assert [(list(map(float, p)), k) for p, k in facs] == [([1.0, 0.0, -1.0], 2)]


def test_eigen_identity_and_unipotent_neutral():
    for A in (IntMatrix.identity(3), UNIP):
        rep = eigen_data(A)
        assert all(c == "neutral" for c in rep.classes)
        assert np.allclose(rep.eigenvalues, 1.0)


def test_eigen_cat_map():
    rep = eigen_data(CAT)
    vals = sorted(rep.eigenvalues.real)
    assert vals == pytest.approx([1 / GOLD, GOLD], abs=1e-12)
    assert sorted(rep.classes) == ["contracting", "expanding"]


def test_parabolic_product_is_not_expanding():
    # aB has a double eigenvalue -1; floating roots would smear it off the circle
    a, b = sanov_matrices()
    rep = eigen_data(a @ b.inverse())
    assert rep.dim_expanding == 0


def test_splitting_cat_map():
    S = splitting(CAT)
    assert S.dim_e == 1
    e = S.e_basis[:, 0] / S.e_basis[0, 0]
    f = S.f_basis[:, 0] / S.f_basis[0, 0]
    assert e == pytest.approx([1, GOLD - 2], abs=1e-12)
    assert f == pytest.approx([1, 1 / GOLD - 2], abs=1e-12)
    assert S.modulus_gap == pytest.approx(GOLD)


def test_splitting_unipotent_trivial():
    S = splitting(UNIP)
    assert S.dim_e == 0
    assert np.all(S.proj_e == 0)


def test_splitting_of_inverse_swaps():
    S, T = splitting(CAT), splitting(CAT.inverse())
    e = S.e_basis[:, 0]
    ft = T.f_basis[:, 0]
    assert abs(abs(e @ ft) - np.linalg.norm(e) * np.linalg.norm(ft)) < 1e-12


def test_tail_bound_cat_map():
    norms = restricted_inverse_norms(splitting(CAT), 20)
    assert norms.norms[:3] == pytest.approx([GOLD**-1, GOLD**-2, GOLD**-3], rel=1e-10)
    exact = GOLD**-21 / (1 - 1 / GOLD)
    assert exact <= norms.tail_bound <= 3 * exact


def test_tail_bound_trivial_e():
    assert restricted_inverse_norms(splitting(UNIP), 10).tail_bound == 0.0


def _sl2_words():
    gens = sanov_matrices() + [m.inverse() for m in sanov_matrices()]
    return st.lists(st.sampled_from(gens), min_size=1, max_size=6)


@given(_sl2_words())
def test_splitting_invariants(ms):
    A = ms[0]
    for m in ms[1:]:
        A = A @ m
    S = splitting(A)
    P = S.proj_e
    assert S.invariance_residual() <= 1e-8 * max(1.0, np.abs(A.to_array()).max())
    assert np.abs(P @ P - P).max() <= 1e-8
    assert np.linalg.matrix_rank(np.hstack([S.e_basis, S.f_basis])) == 2
    if S.dim_e:
        assert np.abs(P @ S.e_basis - S.e_basis).max() <= 1e-8
        assert np.abs(P @ S.f_basis).max() <= 1e-8


@given(_sl2_words(), st.integers(1, 40))
def test_tail_bound_is_overestimate(ms, N):
    A = ms[0]
    for m in ms[1:]:
        A = A @ m
    S = splitting(A)
    if S.dim_e == 0:
        return
    try:
        norms = restricted_inverse_norms(S, N + 60)
    except TailNotSummableError:
        return
    # direct partial sum of the later terms is below the certified tail
    assert sum(norms.norms[N:]) <= norms.tail_after(N) + 1e-15


def test_certificate_sanov():
    cert = weak_hyperbolicity_certificate(sanov_matrices(), 2)
    assert cert.verdict == "Verified"
    assert cert.witness_words == [((0, 1), (1, 1)), ((1, 1), (0, 1))]
    assert cert.spanned_dim == 2


def test_certificate_single_hyperbolic():
    cert = weak_hyperbolicity_certificate([CAT], 1)
    assert cert.verified and len(cert.witness_words) == 2


def test_certificate_rotation_not_verified():
    rot = IntMatrix.parse("0,-1;1,0")
    cert = weak_hyperbolicity_certificate([rot], 6)
    assert cert.verdict == "NotVerifiedUpTo(6)"
    assert cert.spanned_dim == 0


def test_certificate_monotone_in_length():
    a = weak_hyperbolicity_certificate(sanov_matrices(), 2)
    b = weak_hyperbolicity_certificate(sanov_matrices(), 4)
    assert b.verified and b.witness_words == a.witness_words


def test_certificate_rejects_length_zero():
    with pytest.raises(ValueError):
        weak_hyperbolicity_certificate(sanov_matrices(), 0)


def test_sln_certificate_and_first_word():
    names, mats = elementary_matrices(3)
    cert = weak_hyperbolicity_certificate(mats, 3)
    assert cert.verified and cert.spanned_dim == 3
    w = first_hyperbolic_word(mats, 3)
    assert len(w) == 3
    S = splitting(word_matrix(mats, w))
    assert 0 < S.dim_e < 3
