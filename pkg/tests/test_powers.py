import pytest
from hypothesis import given, settings, strategies as st

from brownlift.classify import BlockTriangular, check_brownian_type
from brownlift.core import (DEFAULT, BergerMeasure, Identity, Nat, WeightSequence, ZeroOp,
                            adjoint, compose, probe_equal, scalar)
from brownlift.core.indexsets import RankMap
from brownlift.core.operators import Inclusion, add, power
from brownlift.extension import basic_construction, build_mne
from brownlift.gallery import gallery, quasinormal, two_atom
from brownlift.powers import (block_power, e_n, extension_power, gram_identity_check,
                              power_classS_condition, shift_power_criterion)
from derived_constants import FROZEN

FAST = DEFAULT.with_(probe_radius=24, random_probes=16)


def _odd():
    return Inclusion(RankMap(Nat(), 2, 1))


def _even():
    return Inclusion(RankMap(Nat(), 2, 0))


def test_power_one_is_unchanged():
    T = two_atom(1.0)
    pb = block_power(T, 1)
    assert pb.check.passed
    assert probe_equal(pb.En, T.E).passed and pb.Vn == T.V and pb.Xn == T.X


def test_power_zero_has_zero_corner():
    pb = block_power(two_atom(1.0), 0)
    assert isinstance(pb.En, ZeroOp) and pb.check is None


def test_identity_x_power_three():
    T = BlockTriangular(_odd(), _even(), Identity(Nat()))
    pb = block_power(T, 3)
    V = T.V
    want = compose(add(power(V, 2), V, Identity(Nat())), T.E)
    assert pb.check.passed and probe_equal(pb.En, want).passed


def test_square_of_two_atom_matches_formula():
    T = two_atom(1.0)
    want = add(compose(T.E, T.X), compose(T.V, T.E))
    assert probe_equal(e_n(T, 2), want).passed
    assert block_power(T, 2).check.passed


def test_gram_identity_with_identity_x():
    T = BlockTriangular(_odd(), _even(), Identity(Nat()))
    assert gram_identity_check(T, 4).passed
    E4 = e_n(T, 4)
    assert probe_equal(compose(adjoint(E4), E4), scalar(4.0, Identity(Nat()))).passed


def test_gram_entry_at_e0():
    T = two_atom(2.0)
    E2 = e_n(T, 2)
    assert compose(adjoint(E2), E2).matrix_element(0, 0).real == \
        pytest.approx(FROZEN["power2_gram_e0"], abs=1e-12)


@pytest.mark.parametrize("name", sorted(gallery()))
@pytest.mark.parametrize("n", [1, 2, 3])
def test_power_lemma_on_gallery(name, n):
    T = gallery()[name]
    assert block_power(T, n, FAST).check.passed
    assert gram_identity_check(T, n, FAST).passed


def test_scalar_identity_passes_class_condition():
    T = BlockTriangular(_odd(), _even(), scalar(1.5, Identity(Nat())))
    for n in (1, 2, 3):
        assert power_classS_condition(T, n).passed


def test_constant_shift_passes_class_condition():
    assert power_classS_condition(quasinormal(), 2).passed


def test_two_atom_square_fails_with_basis_witness():
    chk = power_classS_condition(two_atom(1.0), 2)
    assert chk.passed is False
    assert chk.witness is not None and len(chk.witness.support()) == 1


@pytest.mark.parametrize("theta", [1.0, 1.7, 2.0])
def test_constant_weights_criterion(theta):
    rep = shift_power_criterion(WeightSequence.constant(theta), 3)
    assert rep["result"] == "constant" and rep["identity_holds"]
    assert rep["max_residual"] <= 1e-12


def test_weights_1_2_2_fail_at_zero():
    rep = shift_power_criterion(WeightSequence.explicit([1.0], 2.0), 2)
    assert rep["result"] == "not_constant"
    assert rep["first_failure"] == 0
    assert rep["residual_at_failure"] == pytest.approx(FROZEN["hrypa_residual_weights_1_2_2"])


def test_single_atom_is_constant_two():
    w = WeightSequence.moments(BergerMeasure([(4.0, 1.0)]))
    rep = shift_power_criterion(w, 2)
    assert rep["result"] == "constant" and rep["agree"]
    assert w.weight(7) == pytest.approx(2.0)


hypo_weights = st.builds(
    lambda steps, tail_gap: WeightSequence.explicit(
        [sum(steps[:i + 1]) for i in range(len(steps))], sum(steps) + tail_gap),
    st.lists(st.floats(0.0, 1.0), min_size=1, max_size=5).map(lambda s: [0.3 + s[0]] + s[1:]),
    st.one_of(st.just(0.0), st.floats(0.0, 1.0)))


@settings(max_examples=50, deadline=None)
@given(hypo_weights, st.integers(2, 5))
def test_criterion_tests_agree(w, n):
    rep = shift_power_criterion(w, n)
    assert rep["precondition_nondecreasing"]
    assert rep["agree"], rep


@pytest.mark.parametrize("n", [2, 3, 4])
def test_quasinormal_class_is_closed_under_powers(n):
    T = quasinormal()
    Tn = block_power(T, n, verify=False).as_block()
    assert check_brownian_type(Tn, FAST).label_letter in ("I", "Q")


def test_extension_power_quasinormal_cube():
    T = quasinormal()
    R = basic_construction(T, build_mne(T.X))
    rep = extension_power(T, R, 3, FAST)
    assert rep["extension"].passed and rep["compression"].passed
    assert rep["modulus"].passed and rep["minimality"].passed


def test_extension_power_two_atom_square():
    T = two_atom(1.0)
    R = basic_construction(T, build_mne(T.X))
    rep = extension_power(T, R, 2, FAST)
    assert rep["extension"].passed and rep["compression"].passed
    assert power_classS_condition(T, 2).passed is False


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_compression_identity(n):
    T = two_atom(1.5)
    R = basic_construction(T, build_mne(T.X))
    assert extension_power(T, R, n, FAST, minimality=False)["compression"].passed
