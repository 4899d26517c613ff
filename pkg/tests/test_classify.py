import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brownlift.classify import (CLASS_ORDER, IMPLIES, BlockTriangular, check_brownian_type,
                                check_entrywise_extension, cohyponormality_blocks,
                                entry_class_predicates, shift_subnormality, two_isometry_report)
from brownlift.core import (BergerMeasure, BilateralShift, DenseMatrix, Diagonal, Fin, Identity, Int,
                            Nat, StructuralError, UnilateralShift, WeightSequence, ZeroOp,
                            scalar)
from brownlift.core.indexsets import IdentityMap, RankMap
from brownlift.core.operators import Inclusion
from brownlift.extension import basic_construction, build_mne
from brownlift.gallery import gallery, noistn, noistx, two_atom
from derived_constants import FROZEN


def _odd():
    return Inclusion(RankMap(Nat(), 2, 1))


def _even():
    return Inclusion(RankMap(Nat(), 2, 0))


def test_isometric_column_example():
    T = BlockTriangular(_odd(), scalar(2.0, _even()), UnilateralShift(1.0))
    rep = check_brownian_type(T)
    assert rep.passed and rep.gqb3b.passed and rep.reduction.passed
    assert {"I", "Q", "S", "H"} <= rep.entry_class
    assert "U" not in rep.entry_class


def test_zero_column_gives_normal_label():
    X = Diagonal(Nat(), {0: 1j, 1: -2.0}, 0.5)
    rep = check_brownian_type(BlockTriangular(UnilateralShift(1.0), ZeroOp(Nat()), X))
    assert rep.passed
    assert rep.label_letter == "N"


def test_gqb2_failure_has_basis_witness():
    rep = check_brownian_type(BlockTriangular(UnilateralShift(1.0), Identity(Nat()),
                                              UnilateralShift(1.0)))
    assert not rep.gqb2.passed
    w = rep.gqb2.witness
    # V* kills e0, so the first failing basis probe is e1
    assert w is not None and w.support() == [1]


def test_bilateral_shift_is_in_every_class():
    rep = entry_class_predicates(BilateralShift(1.0))
    assert rep.entry_class == set(CLASS_ORDER)


def test_weights_1_2_2_subnormal_not_quasinormal():
    X = UnilateralShift(WeightSequence.explicit([1.0], 2.0))
    rep = entry_class_predicates(X)
    assert rep.flags["H"] and rep.flags["S"] and rep.flags["Q"] is False
    assert rep.checks["Q"].witness.support() == [0]


def test_weights_1_2_2p5_not_subnormal():
    X = UnilateralShift(WeightSequence.explicit([1.0, 2.0], 2.5))
    rep = entry_class_predicates(X)
    assert rep.flags["H"] and rep.flags["S"] is False
    ev = shift_subnormality(X.weights, 3)
    assert ev["kind"] == "not_subnormal"
    assert ev["witness"]["size"] == 3
    assert ev["witness"]["determinant"] == pytest.approx(FROZEN["hankel3_weights_1_2_2p5"])


def test_explicit_1_2_2_hankel_psd():
    assert shift_subnormality(WeightSequence.explicit([1.0], 2.0), 3)["kind"] == "hankel_psd"


def test_zero_weight_rejected():
    with pytest.raises(StructuralError):
        shift_subnormality(WeightSequence.explicit([1.0, 0.0], 1.0), 3)


atoms = st.lists(st.tuples(st.floats(0.05, 6.0), st.floats(0.05, 1.0)), min_size=1,
                 max_size=4, unique_by=lambda a: round(a[0], 2))


@settings(max_examples=40, deadline=None)
@given(atoms, st.integers(1, 8))
def test_moment_weights_always_pass_hankel(raw, order):
    total = sum(w for _, w in raw)
    mu = BergerMeasure([(t, w / total) for t, w in raw])
    assert shift_subnormality(WeightSequence.moments(mu), order)["kind"] == "hankel_psd"


@pytest.mark.parametrize("name", sorted(gallery()))
def test_gallery_flags_are_monotone(name):
    flags = check_brownian_type(gallery()[name]).entry.flags
    for small, bigs in IMPLIES.items():
        for big in bigs:
            if flags[small] is True:
                assert flags[big] is True


@pytest.mark.parametrize("name", sorted(gallery()))
def test_gallery_is_brownian_type(name):
    rep = check_brownian_type(gallery()[name])
    assert rep.passed
    if rep.polar_supported:
        assert rep.reduction.passed


def test_noistn_covariance():
    rep = two_isometry_report(noistn(0.5, 0.6))
    assert rep.is_two_isometry.passed
    assert rep.covariance_bounds == pytest.approx((0.5, 0.5), abs=1e-12)


def test_noistx_covariance_and_brownian_isometry():
    rep = two_isometry_report(noistx(2.0, True))
    assert rep.is_brownian_isometry.passed
    assert rep.covariance_bounds == pytest.approx((2.0, 2.0), abs=1e-12)
    assert rep.delta_bounds.upper == pytest.approx(FROZEN["noistx_defect_top"], abs=1e-12)


@pytest.mark.parametrize("V", [UnilateralShift(1.0), _odd(), BilateralShift(1.0)], ids=str)
def test_isometries_have_zero_covariance(V):
    rep = two_isometry_report(V)
    assert rep.is_two_isometry.passed
    assert rep.covariance_bounds == (0.0, 0.0)


def test_alpha_one_not_cohyponormal():
    rep = cohyponormality_blocks(noistx(1.0, True))
    assert rep.formula_check.passed
    assert rep.T_star_hyponormal.passed is False
    assert rep.T_star_hyponormal.witness is not None


def test_normal_criterion_both_directions():
    X = Diagonal(Nat(), {0: 2.0}, 1.0)
    rep = cohyponormality_blocks(BlockTriangular(BilateralShift(1.0), ZeroOp(Int()),
                                                 BilateralShift(1.0)))
    assert rep.T_normal.passed and rep.normal_criterion.passed
    rep = cohyponormality_blocks(BlockTriangular(UnilateralShift(1.0), ZeroOp(Nat()), X))
    assert rep.T_normal.passed is False
    assert rep.normal_criterion.passed


def test_entrywise_extension_reflexive_and_scaled():
    T = two_atom(1.0)
    ident = IdentityMap(Nat())
    assert check_entrywise_extension(T, T, ident, ident).passed
    R = basic_construction(T, build_mne(T.X))
    assert check_entrywise_extension(T, R.block(), R.inj1, R.inj2, mod_R=R.lift_B).passed
    bad = BlockTriangular(R.V_t, scalar(1.1, R.E_t), R.N)
    chk = check_entrywise_extension(T, bad, R.inj1, R.inj2, mod_R=R.lift_B)
    assert chk.passed is False
    assert chk.witness.space == T.H2


def test_non_isometric_injection_rejected():
    T = two_atom(1.0)
    with pytest.raises(StructuralError):
        check_entrywise_extension(T, T, scalar(2.0, Identity(Nat())), IdentityMap(Nat()))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 31))
def test_finite_h1_forces_zero_column(n, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    V = DenseMatrix(q, Fin(n), Fin(n))
    E = DenseMatrix(np.zeros((n, 2)), Fin(2), Fin(n))
    T = BlockTriangular(V, E, DenseMatrix(np.eye(2), Fin(2), Fin(2)))
    rep = check_brownian_type(T)
    assert rep.gqb1.passed and rep.gqb2.passed
