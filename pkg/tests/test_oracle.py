import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brownlift import oracle
from brownlift.core import (BergerMeasure, Diagonal, Identity, Nat, Tensor, UnilateralShift,
                            WeightSequence, adjoint, compose)
from derived_constants import FROZEN, node_kinds, recompute

MU = BergerMeasure([(1.0, 0.5), (4.0, 0.5)])
S_MU = UnilateralShift(WeightSequence.moments(MU))


def test_derived_constants_gate():
    fresh = recompute()
    assert set(fresh) == set(FROZEN)
    for key, want in FROZEN.items():
        assert abs(fresh[key] - want) <= 1e-9, key


def test_truncate_identity():
    tr = oracle.truncate(Identity(Nat()), 4)
    assert np.array_equal(tr.matrix, np.eye(4))
    assert tr.boundary_dirty == set()


def test_truncate_shift_marks_last_column():
    tr = oracle.truncate(UnilateralShift(1.0), 3)
    assert np.array_equal(tr.matrix, np.eye(3, k=-1))
    assert tr.boundary_dirty == {2}


def test_truncate_moment_gram():
    tr = oracle.truncate(compose(adjoint(S_MU), S_MU), 3)
    want = [2.5, FROZEN["moment_shift_gram_11"], FROZEN["moment_shift_gram_22"]]
    assert np.allclose(np.diag(tr.matrix), want, atol=1e-12)
    assert 2 in tr.boundary_dirty


def test_truncate_elements_are_exact():
    op = compose(adjoint(S_MU), S_MU, S_MU)
    tr = oracle.truncate(op, 6)
    for a, i in enumerate(tr.window):
        for b, j in enumerate(tr.window):
            assert tr.matrix[a, b] == op.matrix_element(i, j)


def test_truncate_rejects_zero_radius():
    with pytest.raises(oracle.OracleError):
        oracle.truncate(Identity(Nat()), 0)


def test_small_eigen():
    ev, vec = oracle.jacobi_eigh([[1, 1], [1, 4]])
    assert ev == pytest.approx([FROZEN["eig_small"], FROZEN["eig_large"]], abs=1e-12)
    assert oracle.psd_check([[1, 1], [1, 4]])[0]


def test_singular_hankel_is_psd():
    ok, lo = oracle.psd_check([[1, 1, 4], [1, 4, 16], [4, 16, 64]])
    assert ok and abs(lo) < 1e-9


def test_zero_matrix_rank():
    assert oracle.dense_kernels(np.zeros((3, 3)))["rank"] == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 31))
def test_jacobi_matches_reconstruction(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = a + a.conj().T
    ev, vec = oracle.jacobi_eigh(h)
    assert np.allclose(vec @ np.diag(ev) @ vec.conj().T, h, atol=1e-10)
    assert np.all(np.diff(ev) >= -1e-12)
    u, s, vh = oracle.jacobi_svd(a)
    assert np.allclose((u * s) @ vh, a, atol=1e-10)
    U, P = oracle.polar(a)
    assert np.allclose(U @ P, a, atol=1e-9)


NODE_KINDS = node_kinds()


@pytest.mark.parametrize("kind", sorted(NODE_KINDS))
def test_structured_matches_dense(kind):
    res = oracle.compare_structured_dense(NODE_KINDS[kind], radius=32, tol=1e-12)
    assert res.passed, (res.max_deviation, res.location)
    assert res.clean_columns > 0


def test_tensor_of_shift_and_diag_radius_16():
    op = Tensor(UnilateralShift(1.0), Diagonal(Nat(), {0: 3.0}, 1.0))
    assert oracle.compare_structured_dense(op, radius=16).passed


def test_corrupted_entry_is_located():
    op = NODE_KINDS["Compose"]
    res = oracle.compare_structured_dense(op, radius=8, corrupt=(1, 0, 0.5))
    assert not res.passed
    assert res.location == (1, 0)
    assert res.max_deviation == pytest.approx(0.5)
