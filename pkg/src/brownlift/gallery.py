"""Named operators and demos reproducing the worked examples.

Every demo returns a report dict with a list of ``assertions``; a demo
passes when each assertion does.
"""
from __future__ import annotations

import math

from .classify import (BlockTriangular, check_brownian_type, cohyponormality_blocks,
                       two_isometry_report)
from .core.indexsets import (ChainMap, DisjointUnion, FunctionMap, Int, Nat, Product, RankMap,
                             StructuralError, TagMap)
from .core.operators import (DirectSum, Identity, Inclusion, Tensor, UnilateralShift,
                             BilateralShift, ZeroOp, adjoint, compose, scalar)
from .core.probes import DEFAULT, Check, ToleranceProfile, probe_equal
from .core.weights import BergerMeasure, WeightSequence
from .extension import (basic_construction, build_mne, defect_check, defect_gallery,
                        two_atom_measure, verify_taut)
from .powers import extension_power, power_classS_condition, shift_power_criterion
from .spectra import (SpectrumRegion, block_spectrum, eigen_witness, extension_spectra_check,
                      filling_holes_check, sample_points, symbolic_spectrum, WitnessRefused)


def _odd(domain=None):
    return Inclusion(RankMap(domain or Nat(), 2, 1))


def _even(domain=None):
    return Inclusion(RankMap(domain or Nat(), 2, 0))


def moment_shift(atoms) -> UnilateralShift:
    return UnilateralShift(WeightSequence.moments(BergerMeasure(atoms)))


# ---------------------------------------------------------------------------
# operators


def noistx(alpha: complex = 2.0, unitary: bool = True) -> BlockTriangular:
    """``[V alpha*U; 0 Q]`` with isometries ``V``, ``U`` of orthogonal ranges.

    ``Q`` is the bilateral shift when ``unitary`` and the unilateral shift
    otherwise.
    """
    if unitary:
        return BlockTriangular(_odd(), scalar(alpha, _even(Int())), BilateralShift(1.0),
                               name=f"noistx alpha={alpha} Q unitary")
    return BlockTriangular(_odd(), scalar(alpha, _even()), UnilateralShift(1.0),
                           name=f"noistx alpha={alpha} Q shift")


def noistn(d: float = 0.5, a: float = 0.6) -> BlockTriangular:
    """``E = D ⊕ (U1 ⊗ sqrt(I - A^2))``, ``Q = I ⊕ (U2 ⊗ A)`` with scalar ``D``, ``A``.

    Spaces are ``l2 ⊕ (l2 ⊗ l2)``; ``U1 = U2`` is the unilateral shift and
    ``V`` maps everything by rank onto ``ker U1* ⊗ l2``.
    """
    if not 0 <= a <= 1 or d == 0:
        raise StructuralError("need 0 <= A <= I and D != 0")
    H = DisjointUnion(Nat(), Product(Nat(), Nat()))
    E = DirectSum(scalar(d, Identity(Nat())),
                  Tensor(UnilateralShift(1.0), scalar(math.sqrt(1 - a * a), Identity(Nat()))))
    Q = DirectSum(Identity(Nat()), Tensor(UnilateralShift(1.0), scalar(a, Identity(Nat()))))
    onto_kernel = FunctionMap(
        H, H, lambda i: ("R", (0, H.rank(i))),
        lambda j: H.unrank(j[1][1]) if j[0] == "R" and j[1][0] == 0 else None,
        "rank onto ker U1* ⊗ l2")
    return BlockTriangular(Inclusion(onto_kernel), E, Q, name=f"noistn D={d} A={a}")


def two_atom(c: float = 1.0, atoms=None) -> BlockTriangular:
    """Isometric first column, ``E = c * isometry`` and a two-atom moment shift."""
    S = UnilateralShift(WeightSequence.moments(two_atom_measure())) if atoms is None \
        else moment_shift(atoms)
    return BlockTriangular(_odd(), scalar(c, _even()), S, name=f"two-atom c={c}")


def two_atom_spectral() -> BlockTriangular:
    """Two-atom demo with radii 0.5 and 2 (atoms 1/4 and 4).

    ``V`` carries a plain shift summand so that boundary witnesses of the
    closed unit disk come from a shift rather than a rank map.
    """
    H1 = DisjointUnion(Nat(), Nat())
    V = DirectSum(UnilateralShift(1.0), _odd())
    E = Inclusion(ChainMap((RankMap(Nat(), 2, 0), TagMap(H1, "R"))))
    S = moment_shift([(0.25, 0.5), (4.0, 0.5)])
    return BlockTriangular(V, E, S, name="two-atom spectral")


def kernel_split() -> BlockTriangular:
    """``E = 3 * isometry ∘ (projection onto the second summand)`` over shift ⊕ two-atom shift."""
    H2 = DisjointUnion(Nat(), Nat())
    E = compose(scalar(3.0, _even()), adjoint(Inclusion(TagMap(H2, "R"))))
    S = DirectSum(UnilateralShift(1.0),
                  UnilateralShift(WeightSequence.moments(two_atom_measure())))
    return BlockTriangular(_odd(), E, S, name="kernel split")


def quasinormal(theta: float = 2.0, c: float = 2.0) -> BlockTriangular:
    return BlockTriangular(_odd(), scalar(c, _even()), UnilateralShift(theta),
                           name=f"quasinormal theta={theta}")


def singleton(t: float = 4.0) -> BlockTriangular:
    return BlockTriangular(_odd(), _even(), moment_shift([(t, 1.0)]), name=f"singleton t={t}")


def gallery() -> dict:
    """The named block operators used across demos and acceptance checks."""
    return {
        "noistx": noistx(2.0, True),
        "noistx_shift": noistx(2.0, False),
        "noistn": noistn(0.5, 0.6),
        "two_atom": two_atom(1.0),
        "two_atom_scaled": two_atom(1.5),
        "two_atom_spectral": two_atom_spectral(),
        "kernel_split": kernel_split(),
        "quasinormal": quasinormal(),
        "singleton": singleton(),
    }


# ---------------------------------------------------------------------------
# demos


def _a(name, passed, residual=0.0, **extra) -> dict:
    out = {"name": name, "passed": bool(passed), "residual": float(residual)}
    out.update(extra)
    return out


def _from_check(name: str, chk: Check, want: bool = True) -> dict:
    out = _a(name, chk.passed is want, chk.residual, observed=chk.status)
    if chk.witness is not None:
        out["witness"] = chk.witness.to_json()
    return out


def _finish(demo_id: str, assertions: list, **details) -> dict:
    return {"demo": demo_id, "passed": all(a["passed"] for a in assertions),
            "assertions": assertions, **details}


def demo_noistx(tol: ToleranceProfile = DEFAULT) -> dict:
    """Brownian isometry of covariance |alpha| that is not subnormal yet extends entrywise."""
    out = []
    T = noistx(2.0, True)
    cls = check_brownian_type(T, tol)
    out.append(_a("Brownian type", cls.passed, max(cls.gqb1.residual, cls.gqb2.residual,
                                                   cls.gqb3.residual), label=cls.label))
    rep = two_isometry_report(T, tol)
    out.append(_from_check("2-isometry", rep.is_two_isometry))
    out.append(_from_check("Brownian isometry", rep.is_brownian_isometry))
    lo, hi = rep.covariance_bounds
    out.append(_a("covariance (2, 2)", abs(lo - 2) <= 1e-12 and abs(hi - 2) <= 1e-12,
                  max(abs(lo - 2), abs(hi - 2)), bounds=[lo, hi]))
    coh = cohyponormality_blocks(T, tol)
    out.append(_from_check("T not hyponormal, hence not subnormal", coh.T_hyponormal, False))
    R = basic_construction(T, build_mne(T.X, tol=tol), tol=tol)
    taut = verify_taut(T, R, tol)
    out.append(_a("entrywise extension exists", all(c.passed for c in taut.values()),
                  failures=[k for k, c in taut.items() if not c.passed]))
    T1 = noistx(1.0, True)
    coh1 = cohyponormality_blocks(T1, tol)
    out.append(_from_check("alpha=1: T* not hyponormal", coh1.T_star_hyponormal, False))
    out.append(_from_check("alpha=1: Brownian unitary", two_isometry_report(T1, tol)
                           .is_brownian_unitary))
    Tq = noistx(2.0, False)
    out.append(_a("shift variant is Brownian type", check_brownian_type(Tq, tol).passed,
                  label=check_brownian_type(Tq, tol).label))
    return _finish("noistx", out)


def demo_noistn(d: float = 0.5, a: float = 0.6, tol: ToleranceProfile = DEFAULT) -> dict:
    """2-isometry of covariance |D| with no entrywise Brownian-unitary extension."""
    out = []
    T = noistn(d, a)
    cls = check_brownian_type(T, tol)
    out.append(_a("Brownian type", cls.passed and cls.reduction.passed, label=cls.label))
    rep = two_isometry_report(T, tol)
    out.append(_from_check("2-isometry", rep.is_two_isometry))
    lo, hi = rep.covariance_bounds
    dev = max(abs(lo - abs(d)), abs(hi - abs(d)))
    out.append(_a("covariance equals |D|", dev <= 1e-12, dev, bounds=[lo, hi]))
    QQ = compose(adjoint(T.X), T.X)
    EE = compose(adjoint(T.E), T.E)
    I = Identity(T.H2)
    prod = compose(QQ - I, QQ + EE - I)
    zp = probe_equal(prod, ZeroOp(T.H2), tol, threshold=1e-12,
                     name="(|Q|²-I)(|Q|²+|E|²-I) = 0")
    out.append(_from_check("zero-product identity", zp))
    iso = probe_equal(QQ, I, tol, name="Q*Q = I")
    if a != 1:
        out.append(_from_check("obstruction: Q is not an isometry", iso, False))
        out.append(_a("obstruction witness present", iso.witness is not None))
    else:
        out.append(_from_check("A = I: Q is an isometry", iso))
    return _finish("noistn", out, covariance=[lo, hi])


TRYISU_PAIRS = ((0, 0), (2, 1), (1, 3), (2, 2), (0, 2))


def demo_tryisu(pairs=TRYISU_PAIRS, tol: ToleranceProfile = DEFAULT) -> dict:
    """Defect dimensions of ``T`` and of its taut extension chosen independently."""
    out = []
    for p, n in pairs:
        T, R = defect_gallery(p, n, tol)
        chk = defect_check(R, tol)
        count = chk.details.get("window_count")
        taut = verify_taut(T, R, tol)
        out.append(_a(f"(p, n) = ({p}, {n})", chk.passed and all(c.passed for c in taut.values()),
                      chk.residual, window_count=count, expected=n,
                      failures=[k for k, c in taut.items() if not c.passed]))
    return _finish("tryisu", out)


def demo_rozwis(atoms=((4.0, 1.0),), powers=(2, 3, 4, 5), tol: ToleranceProfile = DEFAULT) -> dict:
    """Power criteria: constancy of weights, the power-sum identity and class membership."""
    measure = BergerMeasure(atoms)
    w = WeightSequence.moments(measure)
    T = BlockTriangular(_odd(), _even(), UnilateralShift(w), name="rozwis")
    singleton_ = measure.k == 1
    out = []
    for n in powers:
        crit = shift_power_criterion(w, n, tol)
        cond = power_classS_condition(T, n, tol)
        expect = singleton_
        out.append(_a(f"n={n}: weight identity", crit["identity_holds"] is expect,
                      crit["max_residual"], first_failure=crit["first_failure"]))
        out.append(_a(f"n={n}: constancy test agrees", crit["agree"]))
        out.append(_from_check(f"n={n}: class condition for T^n", cond, expect))
    return _finish("rozwis", out, measure=str(measure))


def demo_twoatom(tol: ToleranceProfile = DEFAULT, eps: float = 1e-5) -> dict:
    """Spectral theorems on the radii (0.5, 2) instance and the power counterexample."""
    out = []
    T = two_atom_spectral()
    R = basic_construction(T, build_mne(T.X, tol=tol), tol=tol)
    sT, sR = block_spectrum(T, tol), block_spectrum(R.block(), tol)
    want_T = SpectrumRegion.disk(2.0)
    want_R = SpectrumRegion.disk(1.0) | SpectrumRegion.circle(2.0)
    out.append(_a("σ(T) = ClosedDisk(2)", sT == want_T, observed=str(sT)))
    out.append(_a("σ(R) = ClosedDisk(1) ∪ Circle(2)", sR == want_R, observed=str(sR)))
    spec = extension_spectra_check(T, R, tol)
    out.append(_a("extension spectra inclusions", all(c.passed for c in spec["checks"]),
                  witnesses_passed=spec["witnesses_passed"]))
    holes = filling_holes_check(T, R, tol)
    annulus = [c for c in holes["components"] if c["kind"] == "open_annulus"
               and c["inner_radius"] == 1.0 and c["outer_radius"] == 2.0]
    out.append(_a("annulus (1, 2) filled", holes["passed"] and len(annulus) == 1
                  and annulus[0].get("contained") is True))
    worst = 0.0
    ok = True
    for label, op in (("V~", R.V_t), ("N", R.N), ("V", T.V), ("S", T.X)):
        for _, lam in sample_points(symbolic_spectrum(op, tol), 8):
            try:
                w = eigen_witness(op, lam, eps, tol=tol)
                worst = max(worst, w.residual)
            except WitnessRefused:
                ok = False
    out.append(_a(f"witness residuals ≤ {eps:g}", ok and worst <= eps, worst))
    Tp = two_atom(1.0)
    Rp = basic_construction(Tp, build_mne(Tp.X, tol=tol), tol=tol)
    ep = extension_power(Tp, Rp, 2, tol)
    out.append(_a("T² extends entrywise to R²", ep["extension"].passed))
    out.append(_a("compression identity for n=2", ep["compression"].passed,
                  ep["compression"].residual))
    cond = power_classS_condition(Tp, 2, tol)
    out.append(_from_check("T² fails the class condition", cond, False))
    return _finish("twoatom", out, sigma_T=str(sT), sigma_R=str(sR))


DEMOS = {"noistx": demo_noistx, "noistn": demo_noistn, "tryisu": demo_tryisu,
         "rozwis": demo_rozwis, "twoatom": demo_twoatom}


def run_demo(demo_id: str, tol: ToleranceProfile = DEFAULT) -> dict:
    if demo_id not in DEMOS:
        raise KeyError(f"unknown demo {demo_id!r}; known: {', '.join(sorted(DEMOS))}")
    return DEMOS[demo_id](tol=tol)
