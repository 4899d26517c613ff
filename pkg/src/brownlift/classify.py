"""Class predicates and Brownian-type membership for upper triangular 2×2 blocks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core.indexsets import DisjointUnion, IndexMap, IndexSet, StructuralError
from .core.operators import (BlockMatrix, DirectSum, Identity, Inclusion, Operator, ScalarMul,
                             UnilateralShift, ZeroOp, adjoint, compose)
from .core.polar import UnsupportedForm, polar_and_modulus, positive_sqrt, support_projection
from .core.probes import (DEFAULT, Check, NormBounds, ToleranceProfile, norm_bounds, probe_equal,
                          window_psd)
from .core.simplify import simplify
from .core.weights import WeightSequence

CLASS_ORDER = ("U", "I", "N", "Q", "S", "H")
CLASS_SYMBOL = {"U": "𝒰", "I": "ℐ", "N": "𝒩", "Q": "𝒬", "S": "𝒮", "H": "ℋ"}
# each class implies the listed larger classes
IMPLIES = {"U": ("I", "N"), "I": ("Q",), "N": ("Q",), "Q": ("S",), "S": ("H",), "H": ()}


@dataclass
class BlockTriangular:
    """``T = [V E; 0 X]`` on ``H1 ⊕ H2``.

    ``certificate`` may carry ``{"subnormal": "explicit_normal_extension"}``
    for entries whose subnormality is known by construction.
    """

    V: Operator
    E: Operator
    X: Operator
    name: str = ""
    certificate: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.V.domain != self.V.codomain:
            raise StructuralError("V must act on H1")
        if self.X.domain != self.X.codomain:
            raise StructuralError("X must act on H2")
        if self.E.domain != self.X.domain or self.E.codomain != self.V.domain:
            raise StructuralError(
                f"E must map H2={self.X.domain} into H1={self.V.domain}, "
                f"got {self.E.domain}->{self.E.codomain}")

    @property
    def H1(self) -> IndexSet:
        return self.V.domain

    @property
    def H2(self) -> IndexSet:
        return self.X.domain

    @property
    def space(self) -> DisjointUnion:
        return DisjointUnion(self.H1, self.H2)

    def full(self) -> Operator:
        return BlockMatrix(self.V, self.E, ZeroOp(self.H1, self.H2), self.X)

    def to_json(self) -> dict:
        return {"V": self.V.to_json(), "E": self.E.to_json(), "X": self.X.to_json()}


# ---------------------------------------------------------------------------
# entry classes


@dataclass
class EntryClassReport:
    flags: dict
    checks: dict
    subnormality_evidence: dict

    @property
    def entry_class(self) -> set:
        return {c for c in CLASS_ORDER if self.flags.get(c) is True}

    @property
    def finest(self) -> str | None:
        for c in CLASS_ORDER:
            if self.flags.get(c) is True:
                return c
        return None

    def to_json(self) -> dict:
        return {"flags": {c: _tri(self.flags[c]) for c in CLASS_ORDER},
                "checks": {k: v.to_json() for k, v in self.checks.items()},
                "subnormality_evidence": self.subnormality_evidence}


def _tri(x) -> str:
    return {True: "pass", False: "fail", None: "unknown"}[x]


def _shift_core(X: Operator) -> tuple[complex, UnilateralShift] | None:
    c = 1.0
    while isinstance(X, ScalarMul):
        c *= X.c
        X = X.op
    if isinstance(X, UnilateralShift):
        return c, X
    return None


def hankel_psd_evidence(gammas: list[float], order: int, psd_tol: float) -> dict:
    """Test ``[g_{i+j}]`` and ``[g_{i+j+1}]`` for psd on leading blocks up to ``order``."""
    g = np.array(gammas, dtype=float)
    for size in range(1, order + 1):
        for shift in (0, 1):
            if 2 * (size - 1) + shift >= len(g):
                continue
            h = np.array([[g[i + j + shift] for j in range(size)] for i in range(size)])
            d = np.sqrt(np.abs(np.diag(h)))
            d[d == 0] = 1.0
            normalized = h / np.outer(d, d)
            lo = float(np.linalg.eigvalsh(normalized)[0])
            if lo < -psd_tol:
                return {"kind": "not_subnormal", "order": order,
                        "witness": {"hankel_shift": shift, "size": size,
                                    "determinant": float(np.linalg.det(h)),
                                    "min_normalized_eigenvalue": lo,
                                    "matrix": h.tolist()}}
    return {"kind": "hankel_psd", "order": order}


def shift_subnormality(w: WeightSequence, order: int = 6, tol: ToleranceProfile = DEFAULT) -> dict:
    """Stieltjes moment test on ``gamma_n = prod_{l<n} w_l^2``."""
    if order < 1:
        raise ValueError("order must be positive")
    for n in range(2 * order):
        if w.weight(n) == 0:
            raise StructuralError(f"zero weight at {n}: only injective shifts are tested")
    if w.measure is not None:
        # exact moments rather than products of rounded weights
        gammas = [w.measure.moment(n) for n in range(2 * order + 1)]
    else:
        gammas = [w.gamma(n) for n in range(2 * order + 1)]
    ev = hankel_psd_evidence(gammas, order, tol.psd_tol)
    if w.measure is not None and ev["kind"] != "hankel_psd":
        raise AssertionError("moment sequence of a measure failed the Hankel test")
    return ev


def entry_class_predicates(X: Operator, tol: ToleranceProfile = DEFAULT,
                           certificate: dict | None = None, order: int = 6) -> EntryClassReport:
    if X.domain != X.codomain:
        raise StructuralError("class predicates need an endomorphism")
    I = Identity(X.domain)
    Xs = adjoint(X)
    XsX, XXs = compose(Xs, X), compose(X, Xs)
    checks = {
        "I": probe_equal(XsX, I, tol, name="isometric"),
        "N": probe_equal(XsX, XXs, tol, name="normal"),
        "Q": probe_equal(compose(X, XsX), compose(XsX, X), tol, name="quasinormal"),
        "H": window_psd(XsX - XXs, tol, name="hyponormal"),
    }
    checks["U"] = (probe_equal(XXs, I, tol, name="unitary") if checks["I"].passed
                   else Check("unitary", False, checks["I"].residual, checks["I"].witness,
                              "not isometric"))
    flags = {c: checks[c].passed for c in ("U", "I", "N", "Q", "H")}
    evidence = {"kind": "unknown"}
    flags["S"] = None
    core = _shift_core(X)
    if certificate and certificate.get("subnormal") == "explicit_normal_extension":
        evidence = {"kind": "explicit_normal_extension"}
        flags["S"] = True
    elif flags["N"] or flags["Q"]:
        evidence = {"kind": "explicit_normal_extension",
                    "reason": "normal" if flags["N"] else "quasinormal"}
        flags["S"] = True
    elif core is not None and core[0] != 0:
        evidence = shift_subnormality(core[1].weights, order, tol)
        flags["S"] = evidence["kind"] == "hankel_psd"
    elif isinstance(X, DirectSum):
        a = entry_class_predicates(X.a, tol, None, order)
        b = entry_class_predicates(X.b, tol, None, order)
        if a.flags["S"] and b.flags["S"]:
            flags["S"] = True
            evidence = {"kind": "direct_sum", "parts": [a.subnormality_evidence,
                                                         b.subnormality_evidence]}
        elif a.flags["S"] is False or b.flags["S"] is False:
            flags["S"] = False
            evidence = {"kind": "not_subnormal", "parts": [a.subnormality_evidence,
                                                            b.subnormality_evidence]}
    checks["S"] = Check("subnormal", flags["S"], note=evidence["kind"], details=evidence)
    _close(flags)
    return EntryClassReport(flags, checks, evidence)


def _close(flags: dict) -> None:
    """Make flags monotone along the inclusion chains."""
    changed = True
    while changed:
        changed = False
        for small, bigs in IMPLIES.items():
            for big in bigs:
                if flags.get(small) is True and flags.get(big) is not True:
                    flags[big] = True
                    changed = True
                if flags.get(big) is False and flags.get(small) is not False:
                    flags[small] = False
                    changed = True


# ---------------------------------------------------------------------------
# Brownian-type membership


@dataclass
class ClassReport:
    gqb1: Check
    gqb2: Check
    gqb3: Check
    gqb3b: Check
    reduction: Check
    entry: EntryClassReport
    polar_supported: bool

    @property
    def passed(self) -> bool:
        return bool(self.gqb1 and self.gqb2 and self.gqb3)

    @property
    def entry_class(self) -> set:
        return self.entry.entry_class

    @property
    def subnormality_evidence(self) -> dict:
        return self.entry.subnormality_evidence

    @property
    def label(self) -> str:
        c = self.entry.finest
        if c is None:
            return "unclassified"
        return f"{CLASS_SYMBOL[c]}_{{H₁,H₂}}"

    @property
    def label_letter(self) -> str | None:
        return self.entry.finest

    def to_json(self) -> dict:
        return {"brownian_type": self.passed, "label": self.label,
                "entry_class": [c for c in CLASS_ORDER if c in self.entry_class],
                "gqb1": self.gqb1.to_json(), "gqb2": self.gqb2.to_json(),
                "gqb3": self.gqb3.to_json(), "gqb3b": self.gqb3b.to_json(),
                "reduction": self.reduction.to_json(),
                "polar_supported": self.polar_supported,
                "entry": self.entry.to_json()}


def check_brownian_type(T: BlockTriangular, tol: ToleranceProfile = DEFAULT,
                        order: int = 6, modE: Operator | None = None) -> ClassReport:
    """Probe gqb1..gqb3b, the reduction condition and the entry class of ``X``.

    ``modE`` overrides the structural polar decomposition of ``E`` when the
    caller already knows ``|E|``.
    """
    V, E, X = T.V, T.E, T.X
    EsE = compose(adjoint(E), E)
    gqb1 = probe_equal(compose(adjoint(V), V), Identity(T.H1), tol, name="gqb1: V*V = I")
    gqb2 = probe_equal(compose(adjoint(V), E), ZeroOp(T.H2, T.H1), tol, name="gqb2: V*E = 0")
    gqb3 = probe_equal(compose(X, EsE), compose(EsE, X), tol, name="gqb3: X E*E = E*E X")
    supported = modE is not None
    if not supported:
        try:
            _, modE = polar_and_modulus(E)
            supported = True
        except UnsupportedForm as exc:
            note = str(exc)
    if supported:
        gqb3b = probe_equal(compose(X, modE), compose(modE, X), tol, name="gqb3b: X|E| = |E|X")
        reduction = _reduction_probe(X, modE, tol)
    else:
        gqb3b = Check("gqb3b", gqb3.passed, gqb3.residual, gqb3.witness,
                      f"polar unsupported, read from gqb3 ({note})")
        reduction = Check("reduction", None, note="polar unsupported")
    entry = entry_class_predicates(X, tol, T.certificate, order)
    return ClassReport(gqb1, gqb2, gqb3, gqb3b, reduction, entry, supported)


def _reduction_probe(X: Operator, modE: Operator, tol: ToleranceProfile) -> Check:
    """``cl ran |E|`` is invariant for ``X`` and ``X*``."""
    P = support_projection(simplify(modE))
    Q = Identity(X.domain) - P
    zero = ZeroOp(X.domain)
    a = probe_equal(compose(Q, X, modE), zero, tol, name="X maps ran|E| into itself")
    b = probe_equal(compose(Q, adjoint(X), modE), zero, tol, name="X* maps ran|E| into itself")
    worst = max(a.residual, b.residual)
    witness = a.witness if a.witness is not None else b.witness
    return Check("reduction: cl ran|E| reduces X", a.passed and b.passed, worst, witness)


# ---------------------------------------------------------------------------
# entrywise extensions


def _as_isometry(inj, tol: ToleranceProfile) -> Operator:
    op = Inclusion(inj) if isinstance(inj, IndexMap) else inj
    chk = probe_equal(compose(adjoint(op), op), Identity(op.domain), tol)
    if not chk:
        raise StructuralError(f"injection {op.describe()} is not isometric "
                              f"(residual {chk.residual:.3e})")
    return op


def check_entrywise_extension(T: BlockTriangular, R: BlockTriangular, inj1, inj2,
                              tol: ToleranceProfile = DEFAULT, modulus: bool = True,
                              mod_T: Operator | None = None, mod_R: Operator | None = None,
                              radius: int | None = None) -> Check:
    J1 = _as_isometry(inj1, tol)
    J2 = _as_isometry(inj2, tol)
    parts = [
        probe_equal(compose(R.V, J1), compose(J1, T.V), tol, radius, name="V~ extends V"),
        probe_equal(compose(R.E, J2), compose(J1, T.E), tol, radius, name="E~ extends E"),
        probe_equal(compose(R.X, J2), compose(J2, T.X), tol, radius, name="N extends X"),
    ]
    if modulus:
        try:
            mt = mod_T if mod_T is not None else polar_and_modulus(T.E)[1]
            mr = mod_R if mod_R is not None else polar_and_modulus(R.E)[1]
            parts.append(probe_equal(compose(mr, J2), compose(J2, mt), tol, radius,
                                     name="|E| ⊆ |E~|"))
        except UnsupportedForm as exc:
            parts.append(Check("|E| ⊆ |E~|", None, note=str(exc)))
    passed = all(p.passed for p in parts if p.passed is not None)
    if any(p.passed is None for p in parts) and passed:
        passed = None
    first_bad = next((p for p in parts if p.passed is False), None)
    return Check("entrywise extension", passed, max(p.residual for p in parts),
                 first_bad.witness if first_bad is not None else None,
                 first_bad.name if first_bad is not None else "",
                 {p.name: p.to_json() for p in parts})


# ---------------------------------------------------------------------------
# 2-isometries


@dataclass
class TwoIsometryReport:
    is_two_isometry: Check
    covariance_bounds: tuple
    is_brownian_isometry: Check
    is_quasi_brownian: Check
    is_brownian_unitary: Check
    delta_T: Operator
    delta_bounds: NormBounds

    def to_json(self) -> dict:
        return {"is_two_isometry": self.is_two_isometry.to_json(),
                "covariance_bounds": list(self.covariance_bounds),
                "is_brownian_isometry": self.is_brownian_isometry.to_json(),
                "is_quasi_brownian": self.is_quasi_brownian.to_json(),
                "is_brownian_unitary": self.is_brownian_unitary.to_json(),
                "delta_norm_bounds": self.delta_bounds.to_json(),
                "delta_T": simplify(self.delta_T).describe()}


def _gate(name: str, base: Check, inner: Check) -> Check:
    if base.passed is False:
        return Check(name, False, base.residual, base.witness, "not a 2-isometry")
    return Check(name, inner.passed, inner.residual, inner.witness, inner.note, inner.details)


def two_isometry_report(T, tol: ToleranceProfile = DEFAULT) -> TwoIsometryReport:
    op = T.full() if isinstance(T, BlockTriangular) else T
    I = Identity(op.domain)
    Ts = adjoint(op)
    TsT = compose(Ts, op)
    delta = simplify(TsT - I)
    two = probe_equal(compose(Ts, Ts, op, op) - 2.0 * TsT + I, ZeroOp(op.domain), tol,
                      name="T*²T² − 2T*T + I = 0")
    bounds = norm_bounds(delta, tol)
    cov = (math.sqrt(max(bounds.lower, 0.0)), math.sqrt(max(bounds.upper, 0.0)))
    delta_star = compose(op, Ts) - I
    bi = probe_equal(compose(delta, delta_star, delta), ZeroOp(op.domain), tol,
                     name="Δ_T Δ_T* Δ_T = 0")
    try:
        root = positive_sqrt(delta)
        qb = probe_equal(compose(delta, op), compose(root, op, root), tol,
                         name="Δ_T T = Δ_T^½ T Δ_T^½")
    except UnsupportedForm as exc:
        qb = Check("Δ_T T = Δ_T^½ T Δ_T^½", None, note=str(exc))
    bu = _brownian_unitary(T, cov, tol) if isinstance(T, BlockTriangular) else \
        probe_equal(compose(op, Ts), I, tol, name="unitary")
    return TwoIsometryReport(two, cov, _gate("Brownian isometry", two, bi),
                             _gate("quasi-Brownian isometry", two, qb),
                             _gate("Brownian unitary", two, bu), delta, bounds)


def _brownian_unitary(T: BlockTriangular, cov: tuple, tol: ToleranceProfile) -> Check:
    """Structure test: V isometry, E = σY with Y isometric, ran V = ker Y*, X unitary."""
    sigma = cov[1]
    if sigma <= tol.identity_tol:
        op = T.full()
        return probe_equal(compose(op, adjoint(op)), Identity(op.domain), tol, name="unitary")
    Y = (1.0 / sigma) * T.E
    parts = [
        probe_equal(compose(adjoint(T.V), T.V), Identity(T.H1), tol, name="V isometric"),
        probe_equal(compose(adjoint(Y), Y), Identity(T.H2), tol, name="Y isometric"),
        probe_equal(compose(T.V, adjoint(T.V)) + compose(Y, adjoint(Y)), Identity(T.H1), tol,
                    name="ran V = ker Y*"),
        probe_equal(compose(T.X, adjoint(T.X)), Identity(T.H2), tol, name="X unitary"),
        probe_equal(compose(adjoint(T.X), T.X), Identity(T.H2), tol, name="X isometric"),
    ]
    bad = next((p for p in parts if not p.passed), None)
    return Check("Brownian unitary structure", bad is None, max(p.residual for p in parts),
                 bad.witness if bad is not None else None, bad.name if bad is not None else "",
                 {p.name: p.status for p in parts})


# ---------------------------------------------------------------------------
# self-commutator blocks


@dataclass
class CohyponormalityReport:
    blocks: tuple
    formula_check: Check
    T_star_hyponormal: Check
    T_hyponormal: Check
    T_normal: Check
    lemma_check: Check
    normal_criterion: Check | None

    def to_json(self) -> dict:
        out = {"formula_check": self.formula_check.to_json(),
               "T_star_hyponormal": self.T_star_hyponormal.to_json(),
               "T_hyponormal": self.T_hyponormal.to_json(),
               "T_normal": self.T_normal.to_json(),
               "lemma_check": self.lemma_check.to_json()}
        if self.normal_criterion is not None:
            out["normal_criterion"] = self.normal_criterion.to_json()
        return out


def cohyponormality_blocks(T: BlockTriangular, tol: ToleranceProfile = DEFAULT) -> CohyponormalityReport:
    """Blocks of ``[T, T*] = TT* − T*T`` and the cohyponormality cross-checks."""
    V, E, X = T.V, T.E, T.X
    Vs, Es, Xs = adjoint(V), adjoint(E), adjoint(X)
    b11 = compose(E, Es) - (compose(Vs, V) - compose(V, Vs))
    b12 = compose(E, Xs) - compose(Vs, E)
    b21 = compose(X, Es) - compose(Es, V)
    b22 = -(compose(Es, E) + compose(Xs, X) - compose(X, Xs))
    comm_blocks = BlockMatrix(b11, b12, b21, b22)
    op = T.full()
    direct = compose(op, adjoint(op)) - compose(adjoint(op), op)
    formula = probe_equal(comm_blocks, direct, tol, name="block formula for [T,T*]")
    star_hypo = window_psd(comm_blocks, tol, name="T* hyponormal: [T,T*] ≥ 0")
    hypo = window_psd(-comm_blocks, tol, name="T hyponormal: [T,T*] ≤ 0")
    normal = probe_equal(compose(op, adjoint(op)), compose(adjoint(op), op), tol, name="T normal")
    e_zero = probe_equal(E, ZeroOp(T.H2, T.H1), tol, name="E = 0")
    x_normal = probe_equal(compose(Xs, X), compose(X, Xs), tol, name="X normal")
    if star_hypo.passed:
        ok = bool(e_zero and x_normal)
        lemma = Check("T* hyponormal ⇒ E = 0 and X normal", ok,
                      max(e_zero.residual, x_normal.residual))
    else:
        lemma = Check("T* hyponormal ⇒ E = 0 and X normal", True, note="vacuous")
    crit = None
    if x_normal.passed:
        v_unitary = probe_equal(compose(V, Vs), Identity(T.H1), tol, name="V unitary")
        rhs = bool(e_zero) and bool(v_unitary)
        crit = Check("T normal ⇔ E = 0 and V unitary", bool(normal) == rhs, 0.0,
                     details={"T_normal": normal.status, "E_zero": e_zero.status,
                              "V_unitary": v_unitary.status})
    return CohyponormalityReport((b11, b12, b21, b22), formula, star_hypo, hypo, normal, lemma,
                                 crit)

