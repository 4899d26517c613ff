import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brownlift.core import (DEFAULT, BergerMeasure, BilateralShift, DenseMatrix, Diagonal,
                            DirectSum, DisjointUnion, Fin, Identity, Int, Nat, Product,
                            StructuralError, SupportedVector, Tensor, UnilateralShift,
                            WeightSequence, ZeroOp, adjoint, compose, norm_bounds, probe_equal,
                            scalar, window_psd)
from brownlift.core.operators import add, power
from brownlift.core.serialize import operator_from_json, operator_to_json
from brownlift.core.simplify import simplify

MU = BergerMeasure([(1.0, 0.5), (4.0, 0.5)])

SPACES = [Nat(), Int(), Fin(5), DisjointUnion(Nat(), Fin(3)), DisjointUnion(Nat(), Nat()),
          Product(Nat(), Fin(3)), Product(Fin(2), Nat()), Product(Nat(), Nat())]


@pytest.mark.parametrize("space", SPACES, ids=str)
def test_rank_unrank_roundtrip(space):
    for r in range(60 if space.size is None else space.size):
        idx = space.unrank(r)
        assert space.contains(idx)
        assert space.rank(idx) == r


@pytest.mark.parametrize("space", SPACES, ids=str)
def test_window_has_no_repeats(space):
    w = space.window(40)
    assert len(set(w)) == len(w)


def test_moment_shift_first_weight():
    S = UnilateralShift(WeightSequence.moments(MU))
    out = S(SupportedVector.basis(Nat(), 0))
    assert set(out.entries) == {1}
    assert abs(out[1] - math.sqrt(2.5)) < 1e-12


def test_gram_element_of_moment_shift():
    S = UnilateralShift(WeightSequence.moments(MU))
    assert abs(compose(adjoint(S), S).matrix_element(1, 1) - 3.4) < 1e-12


def test_shift_adjoint_kills_e0():
    assert adjoint(UnilateralShift(1.0))(SupportedVector.basis(Nat(), 0)).norm() == 0


def test_apply_rejects_foreign_vector():
    with pytest.raises(StructuralError):
        UnilateralShift(1.0)(SupportedVector.basis(Int(), 0))


def test_compose_shape_mismatch():
    with pytest.raises(StructuralError):
        compose(UnilateralShift(1.0), BilateralShift(1.0))


# -- random operator trees on Nat ------------------------------------------

leaf = st.one_of(
    st.floats(0.2, 3.0).map(UnilateralShift),
    st.just(UnilateralShift(WeightSequence.moments(MU))),
    st.builds(lambda v, t: Diagonal(Nat(), {0: v[0], 1: v[1], 2: v[2]}, t),
              st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(-2, 2)),
    st.just(Identity(Nat())),
)


def _grow(children):
    return st.one_of(
        st.builds(compose, children, children),
        st.builds(add, children, children),
        st.builds(adjoint, children),
        st.builds(lambda c, op: scalar(c, op), st.complex_numbers(max_magnitude=2), children),
    )


nat_ops = st.recursive(leaf, _grow, max_leaves=4)


def _vec(rng_seed, space=Nat(), radius=8):
    rng = np.random.default_rng(rng_seed)
    return SupportedVector.random(space, radius, rng)


@settings(max_examples=60, deadline=None)
@given(nat_ops, st.integers(0, 2 ** 32 - 1))
def test_adjoint_pairing(op, seed):
    v, w = _vec(seed), _vec(seed + 1)
    lhs = op(v).inner(w)
    rhs = v.inner(op.apply_adjoint(w))
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@settings(max_examples=60, deadline=None)
@given(nat_ops)
def test_simplify_preserves_action(op):
    chk = probe_equal(op, simplify(op), DEFAULT.with_(probe_radius=12, random_probes=8))
    assert chk.passed, chk.residual


@settings(max_examples=60, deadline=None)
@given(nat_ops)
def test_json_roundtrip(op):
    data = json.loads(json.dumps(operator_to_json(op)))
    back = operator_from_json(data)
    assert probe_equal(op, back, DEFAULT.with_(probe_radius=12, random_probes=8)).passed


@settings(max_examples=40, deadline=None)
@given(nat_ops)
def test_norm_bounds_bracket_probe_norms(op):
    lo, hi = norm_bounds(op, DEFAULT.with_(probe_radius=12, random_probes=4))
    assert lo <= hi * (1 + 1e-9) + 1e-12
    for i in range(6):
        assert op(SupportedVector.basis(Nat(), i)).norm() <= hi * (1 + 1e-9) + 1e-12


@settings(max_examples=40, deadline=None)
@given(nat_ops)
def test_gram_is_positive(op):
    assert window_psd(compose(adjoint(op), op), DEFAULT.with_(probe_radius=10)).passed


# -- specific structural facts ----------------------------------------------

def test_norms_of_shifts():
    assert tuple(norm_bounds(UnilateralShift(WeightSequence.moments(MU)))) == \
        pytest.approx((2.0, 2.0), abs=1e-12)
    assert tuple(norm_bounds(BilateralShift(1.7))) == pytest.approx((1.7, 1.7), abs=1e-12)


def test_isometry_defect_identity():
    S = UnilateralShift(1.0)
    assert probe_equal(compose(adjoint(S), S), Identity(Nat())).passed
    assert not probe_equal(compose(S, adjoint(S)), Identity(Nat())).passed


def test_tensor_and_direct_sum_actions():
    T = Tensor(UnilateralShift(1.0), scalar(0.8, Identity(Nat())))
    v = SupportedVector.basis(T.domain, (0, 3))
    out = T(v)
    assert out.entries == {(1, 3): pytest.approx(0.8)}
    D = DirectSum(ZeroOp(Nat()), scalar(3.0, Identity(Nat())))
    w = D(SupportedVector.basis(D.domain, ("R", 2)))
    assert w[("R", 2)] == pytest.approx(3.0)


def test_power_matches_repeated_compose():
    S = UnilateralShift(WeightSequence.moments(MU))
    assert probe_equal(power(S, 3), compose(S, S, S)).passed


def test_dense_leaf():
    m = np.array([[1, 2], [3, 4]], dtype=complex)
    A = DenseMatrix(m, Fin(2), Fin(2))
    assert A.matrix_element(0, 1) == 2
    assert adjoint(A).matrix_element(0, 1) == 3
