"""Frozen reference constants and their independent recomputation.

Each entry of ``FROZEN`` is recomputed by ``recompute()`` from dense
truncations, Jacobi kernels or exact rational arithmetic in the oracle
module.  Tests elsewhere compare production results with ``FROZEN``.
"""
import math
from fractions import Fraction

import numpy as np

from brownlift import oracle
from brownlift.core import (BergerMeasure, BilateralShift, DenseMatrix, Diagonal, DirectSum,
                            DisjointUnion, Fin, Identity, Int, Nat, Product, Tensor,
                            UnilateralShift, WeightSequence, ZeroOp, adjoint, compose, scalar)
from brownlift.core.indexsets import RankMap, TagMap
from brownlift.core.operators import Add, BlockMatrix, Inclusion, add
from brownlift.extension import build_mne
from brownlift.gallery import noistx, two_atom

FROZEN = {
    "moment_shift_first_weight": 1.5811388300841898,   # sqrt(5/2)
    "moment_shift_gram_11": 3.4,
    "moment_shift_gram_22": 3.823529411764706,         # 65/17
    "noistx_defect_top": 4.0,
    "noistn_sqrt_factor": 0.8,
    "hankel3_weights_1_2_2": 0.0,
    "hankel2_shifted_weights_1_2_2": 0.0,
    "hankel3_weights_1_2_2p5": -20.25,
    "power2_gram_e0": 14.0,
    "hrypa_residual_weights_1_2_2": 3.0,
    "hrypa_residual_two_atom": 1.3235294117647058,     # 65/17 - 5/2
    "mne_coeff_atom1": 0.4472135954999579,             # sqrt(0.2)
    "mne_coeff_atom4": 0.8944271909999159,             # 2 sqrt(0.2)
    "eig_small": 0.6972243622680054,                   # (5 - sqrt 13) / 2
    "eig_large": 4.302775637731995,
    "hankel3_min_eig": 0.0,
    "kernel_dim_shift_sq_adjoint": 2.0,
    "spectral_radius_two_atom": 2.0,
    "spectral_radius_sixteenth": 2.0,
    "geometric_support_len": 132.0,                    # first m with 0.9^m < 1e-6
}

MU = [(1, Fraction(1, 2)), (4, Fraction(1, 2))]


def _trunc(op, radius):
    return oracle.truncate(op, radius)


def _moment_weights_sq(atoms, count):
    g = oracle.exact_moments(atoms, count + 1)
    return [g[n + 1] / g[n] for n in range(count)]


def recompute() -> dict:
    out = {}
    g = oracle.exact_moments(MU, 6)
    out["moment_shift_first_weight"] = math.sqrt(g[1] / g[0])
    S = UnilateralShift(WeightSequence.moments(BergerMeasure([(1.0, .5), (4.0, .5)])))
    tr = _trunc(compose(adjoint(S), S), 3)
    out["moment_shift_gram_11"] = tr.matrix[1, 1].real
    out["moment_shift_gram_22"] = tr.matrix[2, 2].real
    assert float(g[2] / g[1]) == out["moment_shift_gram_11"] or \
        abs(float(g[2] / g[1]) - out["moment_shift_gram_11"]) < 1e-12

    # T*T - I for the isometric-column example: spectrum of the clean window
    T = noistx(2.0, True).full()
    delta = add(compose(adjoint(T), T), scalar(-1.0, Identity(T.domain)))
    tr = _trunc(delta, 24)
    clean = [k for k, i in enumerate(tr.window) if i not in tr.boundary_dirty]
    ev, _ = oracle.jacobi_eigh(tr.matrix[np.ix_(clean, clean)])
    out["noistx_defect_top"] = float(ev[-1])

    E = Tensor(UnilateralShift(1.0), scalar(math.sqrt(1 - 0.36), Identity(Nat())))
    rows = E.codomain.window(40)
    cols = E.domain.window(12)
    d = oracle.dense_eval(E, rows, cols)
    _, s, _ = oracle.jacobi_svd(d.m[:, d.clean_cols])
    assert np.allclose(s, s[0])
    out["noistn_sqrt_factor"] = float(s[0])

    gam = oracle.gammas_from_weights([1, 2, 2, 2, 2, 2], 6)
    out["hankel3_weights_1_2_2"] = float(oracle.exact_det(oracle.hankel(gam, 3)))
    out["hankel2_shifted_weights_1_2_2"] = float(oracle.exact_det(oracle.hankel(gam, 2, 1)))
    gam = oracle.gammas_from_weights([1, 2, Fraction(5, 2), Fraction(5, 2), Fraction(5, 2)], 5)
    out["hankel3_weights_1_2_2p5"] = float(oracle.exact_det(oracle.hankel(gam, 3)))

    # E_2*E_2 at e0 for E = 2 * isometry over the two-atom shift
    T2 = two_atom(2.0)
    E2 = add(compose(T2.E, T2.X), compose(T2.V, T2.E))
    d = oracle.dense_eval(compose(adjoint(E2), E2), T2.H2.window(4), T2.H2.window(4))
    out["power2_gram_e0"] = d.m[0, 0].real
    assert 4 * (1 + g[1] / g[0]) == 14

    lhs, rhs = oracle.hrypa_sides([1, 4, 4, 4, 4], 0, 2)
    out["hrypa_residual_weights_1_2_2"] = float(abs(lhs - rhs))
    lhs, rhs = oracle.hrypa_sides(_moment_weights_sq(MU, 6), 0, 2)
    out["hrypa_residual_two_atom"] = float(abs(lhs - rhs))

    out["mne_coeff_atom1"] = math.sqrt(0.5) * 1 / math.sqrt(g[1])
    out["mne_coeff_atom4"] = math.sqrt(0.5) * 2 / math.sqrt(g[1])

    ev, _ = oracle.jacobi_eigh([[1, 1], [1, 4]])
    out["eig_small"], out["eig_large"] = float(ev[0]), float(ev[1])
    ev, _ = oracle.jacobi_eigh([[1, 1, 4], [1, 4, 16], [4, 16, 64]])
    out["hankel3_min_eig"] = float(ev[0])

    W2 = adjoint(compose(UnilateralShift(1.0), UnilateralShift(1.0)))
    tr = _trunc(W2, 16)
    clean = [k for k, i in enumerate(tr.window) if i not in tr.boundary_dirty]
    out["kernel_dim_shift_sq_adjoint"] = float(
        len(clean) - oracle.numerical_rank(tr.matrix[:, clean], 1e-10))

    out["spectral_radius_two_atom"] = math.sqrt(max(t for t, _ in [(0.25, .5), (4.0, .5)]))
    out["spectral_radius_sixteenth"] = math.sqrt(max(t for t, _ in [(1 / 16, .5), (4.0, .5)]))
    m = 0
    while 0.9 ** m >= 1e-6:
        m += 1
    out["geometric_support_len"] = float(m)
    return out


def bilateral_window_residual(theta: float, m: int) -> float:
    """Residual of the normalised plane-wave window of length ``m`` at ``lam = theta``."""
    B = BilateralShift(theta)
    idx = list(range(m))
    d = oracle.dense_eval(B, list(range(-1, m + 1)), idx)
    v = np.ones(m) / math.sqrt(m)
    lam_v = np.zeros(m + 2, dtype=complex)
    lam_v[1:m + 1] = theta * v
    return float(np.linalg.norm(d.m @ v - lam_v))


def node_kinds() -> dict:
    """One instance of every operator node kind."""
    S_MU = UnilateralShift(WeightSequence.moments(BergerMeasure([(1.0, .5), (4.0, .5)])))
    H2 = DisjointUnion(Nat(), Nat())
    return {
        "Identity": Identity(Product(Nat(), Fin(3))),
        "ZeroOp": ZeroOp(Nat(), Int()),
        "ScalarMul": scalar(2 - 1j, UnilateralShift(1.3)),
        "UnilateralShift": S_MU,
        "BilateralShift": BilateralShift(1.7),
        "Diagonal": Diagonal(Nat(), {0: 2.0, 3: -1j}, 0.5,
                             ((S_MU.weights, 2, 1),)),
        "DenseMatrix": DenseMatrix(np.arange(12, dtype=complex).reshape(4, 3), Fin(3), Fin(4)),
        "Adjoint": adjoint(S_MU),
        "Compose": compose(adjoint(S_MU), S_MU, S_MU),
        "Add": Add(UnilateralShift(1.0), adjoint(UnilateralShift(2.0))),
        "DirectSum": DirectSum(S_MU, adjoint(UnilateralShift(1.0))),
        "BlockMatrix": BlockMatrix(UnilateralShift(1.0), Inclusion(RankMap(Nat(), 2, 0)),
                                   ZeroOp(Nat()), S_MU),
        "Tensor": Tensor(UnilateralShift(1.0), Diagonal(Nat(), {0: 1.0, 1: 2.0}, 0.8)),
        "Inclusion": Inclusion(TagMap(H2, "R")),
        "Embedding": build_mne(S_MU).J,
    }
