import cmath
import math
from functools import reduce
from operator import or_

import pytest
from hypothesis import given, settings, strategies as st

from brownlift.classify import BlockTriangular
from brownlift.core import (BergerMeasure, BilateralShift, Diagonal, DirectSum, Identity, Nat,
                            StructuralError, UnilateralShift, WeightSequence, ZeroOp, adjoint,
                            scalar)
from brownlift.extension import basic_construction, build_mne
from brownlift.gallery import gallery, two_atom_spectral
from brownlift.spectra import (SpectrumRegion, SpectrumUnknown, WitnessRefused, block_spectrum,
                               block_spectrum_report, eigen_witness, extension_spectra_check,
                               filling_holes_check, region_csv_rows, sample_points,
                               structured_residual, symbolic_spectrum, witness_sweep)
from derived_constants import FROZEN, bilateral_window_residual

D, C, A, F = SpectrumRegion.disk, SpectrumRegion.circle, SpectrumRegion.annulus, \
    SpectrumRegion.finite


def moment_shift(atoms):
    return UnilateralShift(WeightSequence.moments(BergerMeasure(atoms)))


# -- region algebra -----------------------------------------------------------

radius = st.integers(0, 12).map(lambda k: k / 4)
piece = st.one_of(
    radius.map(D), radius.map(C),
    st.tuples(radius, radius).map(lambda ab: A(min(ab), max(ab))),
    st.lists(st.tuples(st.integers(-8, 8), st.integers(-8, 8)), min_size=1, max_size=3)
    .map(lambda pts: F([complex(a / 4, b / 4) for a, b in pts])),
)
region = st.lists(piece, min_size=1, max_size=4).map(lambda ps: reduce(or_, ps))
probe_z = st.tuples(st.integers(-14, 14), st.integers(-14, 14), st.integers(0, 7)).map(
    lambda t: complex(t[0] / 4, t[1] / 4) if t[2] < 4 else cmath.rect(t[0] / 4, t[2] * 0.7))


@settings(max_examples=150, deadline=None)
@given(region, region, region)
def test_union_laws(a, b, c):
    assert a | b == b | a
    assert (a | b) | c == a | (b | c)
    assert a | a == a


@settings(max_examples=150, deadline=None)
@given(st.lists(piece, min_size=1, max_size=4), probe_z)
def test_membership_is_or_of_pieces(ps, z):
    merged = ps[0]
    for p in ps[1:]:
        merged = merged | p
    assert merged.contains(z) == any(p.contains(z) for p in ps)


@settings(max_examples=100, deadline=None)
@given(region, region)
def test_subset_agrees_with_union(a, b):
    assert a.issubset(a | b)
    assert a.issubset(b) == (a | b == b)


@settings(max_examples=100, deadline=None)
@given(region)
def test_json_round_trip(a):
    assert SpectrumRegion.from_json(a.to_json()) == a


def test_canonical_merges():
    assert D(1) | D(2) == D(2)
    assert D(1) | A(1, 2) == D(2)
    assert C(1) | F([0.5j, 3]) == C(1) | F([0.5j, 3])
    assert D(1) | F([0.5]) == D(1)
    assert (D(1) | C(2)).contains(2j)
    assert not (D(1) | C(2)).contains(1.5)


def test_membership_tolerance():
    assert C(2).contains(2 + 1e-13)
    assert not C(2).contains(2 + 1e-9)


def test_complement_components():
    comps = (D(1) | C(2)).complement_components()
    kinds = [(c["kind"], c["lo"], c["hi"]) for c in comps]
    assert kinds == [("open_annulus", 1.0, 2.0), ("exterior", 2.0, math.inf)]
    assert [c["kind"] for c in C(1).complement_components()] == ["open_disk", "exterior"]


# -- symbolic spectra ----------------------------------------------------------

def test_catalog_spectra():
    assert symbolic_spectrum(UnilateralShift(1.0)) == D(1)
    assert symbolic_spectrum(BilateralShift(2.0)) == C(2)
    assert symbolic_spectrum(DirectSum(BilateralShift(0.5), BilateralShift(2.0))) == C(0.5) | C(2)
    assert symbolic_spectrum(moment_shift([(1 / 16, .5), (4.0, .5)])) == \
        D(FROZEN["spectral_radius_sixteenth"])
    assert symbolic_spectrum(scalar(3.0, UnilateralShift(1.0))) == D(3)
    assert symbolic_spectrum(adjoint(Diagonal(Nat(), {0: 1j}, 2.0))) == F([-1j, 2])


def test_unknown_spectrum_raises():
    with pytest.raises(SpectrumUnknown):
        symbolic_spectrum(UnilateralShift(1.0) + adjoint(UnilateralShift(1.0)))


def test_block_spectra():
    T = BlockTriangular(UnilateralShift(1.0), ZeroOp(Nat()),
                        moment_shift([(1 / 16, .5), (4.0, .5)]))
    assert block_spectrum(T) == D(2)
    T = BlockTriangular(BilateralShift(1.0), ZeroOp(Nat(), BilateralShift(1.0).domain),
                        Diagonal(Nat(), {}, 3.0))
    assert block_spectrum(T) == C(1) | F([3])
    rep = block_spectrum_report(gallery()["quasinormal"])
    assert rep["mode"] == "equality"


def test_two_atom_regions():
    T = two_atom_spectral()
    R = basic_construction(T, build_mne(T.X))
    assert block_spectrum(T) == D(2)
    assert block_spectrum(R.block()) == D(1) | C(2)


def test_extension_inclusion_and_holes():
    T = two_atom_spectral()
    R = basic_construction(T, build_mne(T.X))
    rep = extension_spectra_check(T, R, eps=1e-5)
    assert rep["passed"] and rep["witnesses_passed"]
    holes = filling_holes_check(T, R)
    assert holes["passed"]
    st_ = {(c["kind"], c["status"]) for c in holes["components"]}
    assert st_ == {("open_annulus", "pass"), ("exterior", "exempt")}


def test_unitary_v_is_skipped():
    T = BlockTriangular(BilateralShift(1.0), ZeroOp(Nat(), BilateralShift(1.0).domain),
                        Diagonal(Nat(), {0: 2.0}, 0.5))
    R = basic_construction(T, build_mne(T.X))
    assert extension_spectra_check(T, R)["status"] == "skipped"


def test_normal_x_gives_equal_regions():
    T = gallery()["quasinormal"]
    R = basic_construction(T, build_mne(T.X))
    rep = extension_spectra_check(T, R, eps=1e-5)
    assert rep["passed"]


# -- witnesses -------------------------------------------------------------------

def test_geometric_witness_for_shift_adjoint():
    lam = 0.9 * cmath.exp(1j * math.pi / 7)
    w = eigen_witness(adjoint(UnilateralShift(1.0)), lam, 1e-6)
    assert w.residual <= 1e-6
    assert w.support_size >= FROZEN["geometric_support_len"]
    assert abs(structured_residual(adjoint(UnilateralShift(1.0)), w) - w.residual) < 1e-9


def test_bilateral_window():
    w = eigen_witness(BilateralShift(2.0), 2.0, 1e-3)
    assert w.residual <= 1e-3
    assert w.support_size >= 2 / 1e-3
    # the dense oracle confirms the plane-wave bound on a smaller window
    assert bilateral_window_residual(2.0, 400) <= 2 * math.sqrt(2 / 400) + 1e-12
    assert w.residual <= 2 * math.sqrt(2 / w.support_size)


def test_resolvent_point_refused():
    with pytest.raises(WitnessRefused):
        eigen_witness(Diagonal(Nat(), {0: 2.0}, 3.0), 0.0)


@pytest.mark.parametrize("op", [
    UnilateralShift(1.0), adjoint(UnilateralShift(1.0)), BilateralShift(2.0),
    moment_shift([(0.25, .5), (4.0, .5)]), scalar(0.5, UnilateralShift(1.0)),
    DirectSum(BilateralShift(0.5), BilateralShift(2.0)), Diagonal(Nat(), {0: 1j}, 2.0),
], ids=str)
def test_witness_sweep(op):
    rows = witness_sweep(op, 1e-5, 8)
    assert rows
    for row in rows:
        assert row["status"] == "pass" and row["residual"] <= 1e-5, row


def test_sample_points_per_piece():
    pts = sample_points(D(1) | C(2), 8)
    assert {pid for pid, _ in pts} == {0, 1}
    assert sum(1 for pid, _ in pts if pid == 1) == 8


def test_csv_rows():
    rows = region_csv_rows(D(1) | C(2), 16)
    assert {cid for _, _, cid in rows} == {0, 1}


def test_bad_radius_rejected():
    with pytest.raises(StructuralError):
        A(2, 1)
    with pytest.raises(StructuralError):
        D(-1)


def test_identity_spectrum():
    assert symbolic_spectrum(Identity(Nat())) == F([1])
