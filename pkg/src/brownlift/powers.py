"""Block powers of Brownian-type operators and the class-𝒮 power criteria."""
from __future__ import annotations

from dataclasses import dataclass

from .classify import BlockTriangular, check_entrywise_extension, hankel_psd_evidence
from .core.operators import (BilateralShift, BlockMatrix, Diagonal, DirectSum, Identity, Operator,
                             ScalarMul, UnilateralShift, ZeroOp, add, adjoint, compose, power)
from .core.polar import UnsupportedForm, polar_and_modulus, positive_sqrt, support_projection
from .core.probes import DEFAULT, Check, ToleranceProfile, probe_equal
from .core.simplify import scalar_identity_value
from .core.weights import WeightSequence


@dataclass
class PowerBundle:
    n: int
    Vn: Operator
    En: Operator
    Xn: Operator
    En_formula: Operator
    check: Check | None

    def as_block(self, name: str = "") -> BlockTriangular:
        return BlockTriangular(self.Vn, self.En, self.Xn, name=name)

    def to_json(self) -> dict:
        out = {"n": self.n, "En_formula": f"sum_{{j<{self.n}}} V^j E X^({self.n}-1-j)"}
        if self.check is not None:
            out["block_form"] = self.check.to_json()
        return out


def e_n(T: BlockTriangular, n: int) -> Operator:
    """``sum_{j=0}^{n-1} V^j E X^{n-1-j}``; zero for ``n = 0``."""
    if n == 0:
        return ZeroOp(T.H2, T.H1)
    terms = [compose(power(T.V, j), T.E, power(T.X, n - 1 - j)) for j in range(n)]
    return add(*terms)


def _radius(tol: ToleranceProfile, n: int) -> int:
    return max(1, tol.probe_radius - n)


def block_power(T: BlockTriangular, n: int, tol: ToleranceProfile = DEFAULT,
                verify: bool = True) -> PowerBundle:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return PowerBundle(0, Identity(T.H1), ZeroOp(T.H2, T.H1), Identity(T.H2),
                           ZeroOp(T.H2, T.H1), None)
    Vn, Xn, En = power(T.V, n), power(T.X, n), e_n(T, n)
    chk = None
    if verify:
        chk = probe_equal(power(T.full(), n), BlockMatrix(Vn, En, ZeroOp(T.H1, T.H2), Xn), tol,
                          _radius(tol, n), name=f"T^{n} = [V^n E_n; 0 X^n]")
    return PowerBundle(n, Vn, En, Xn, En, chk)


def gram_sum(X: Operator, n: int, start: int = 0) -> Operator:
    """``sum_{j=start}^{n-1} X*^j X^j``."""
    terms = [compose(adjoint(power(X, j)), power(X, j)) for j in range(start, n)]
    if not terms:
        return ZeroOp(X.domain)
    return add(*terms)


def gram_identity_check(T: BlockTriangular, n: int, tol: ToleranceProfile = DEFAULT) -> Check:
    En = e_n(T, n)
    lhs = compose(adjoint(En), En)
    rhs = compose(adjoint(T.E), T.E, gram_sum(T.X, n))
    return probe_equal(lhs, rhs, tol, _radius(tol, n), name=f"E_{n}*E_{n} = E*E Σ S*^j S^j")


# ---------------------------------------------------------------------------
# power of class 𝒮


def _shift_parts(X: Operator):
    c = 1.0
    while isinstance(X, ScalarMul):
        c *= X.c
        X = X.op
    if isinstance(X, UnilateralShift):
        return c, X.weights
    return None


def power_subnormality(X: Operator, n: int, order: int, tol: ToleranceProfile,
                       normal_like: bool = False) -> dict:
    """Evidence that ``X^n`` is subnormal.

    A weighted shift power splits into ``n`` weighted shifts on the residue
    classes ``r + n m``; each is tested with Hankel matrices.
    """
    if normal_like:
        return {"kind": "explicit_normal_extension", "reason": "normal or quasinormal entry"}
    if scalar_identity_value(X) is not None or isinstance(X, (Diagonal, BilateralShift)):
        return {"kind": "explicit_normal_extension", "reason": "normal entry"}
    parts = _shift_parts(X)
    if parts is not None:
        _, w = parts
        out = []
        for r in range(n):
            wr = w.power_summand(n, r)
            gam = ([wr.measure.moment(k) for k in range(2 * order + 1)] if wr.measure
                   else [wr.gamma(k) for k in range(2 * order + 1)])
            ev = hankel_psd_evidence(gam, order, tol.psd_tol)
            ev["residue_class"] = r
            out.append(ev)
            if ev["kind"] != "hankel_psd":
                return {"kind": "not_subnormal", "summands": out}
        return {"kind": "hankel_psd", "order": order, "summands": out}
    if isinstance(X, DirectSum):
        a = power_subnormality(X.a, n, order, tol)
        b = power_subnormality(X.b, n, order, tol)
        kinds = {a["kind"], b["kind"]}
        if "not_subnormal" in kinds:
            return {"kind": "not_subnormal", "parts": [a, b]}
        if "unknown" in kinds:
            return {"kind": "unknown", "parts": [a, b]}
        return {"kind": "direct_sum", "parts": [a, b]}
    return {"kind": "unknown"}


def power_classS_condition(T: BlockTriangular, n: int, tol: ToleranceProfile = DEFAULT,
                           order: int = 6, normal_like: bool = False) -> Check:
    """``S^n`` subnormal and ``S_2^n`` commuting with ``sum_{j=1}^{n-1} S_2*^j S_2^j``."""
    S = T.X
    try:
        _, modE = polar_and_modulus(T.E)
        P = support_projection(modE)
        note = "restricted to cl ran |E|"
    except UnsupportedForm:
        P = Identity(T.H2)
        note = "polar unsupported: using S in place of S_2 (E assumed injective)"
    Sn = compose(power(S, n), P)
    G = compose(gram_sum(S, n, 1), P)
    comm = probe_equal(compose(Sn, G), compose(G, Sn), tol, _radius(tol, n),
                       name=f"S_2^{n} commutes with Σ S_2*^j S_2^j")
    details = {"commutation": comm.to_json(), "restriction": note}
    extra_ok = True
    if n == 2:
        try:
            absS = positive_sqrt(compose(adjoint(S), S))
            c2 = probe_equal(compose(power(S, 2), P, absS), compose(absS, power(S, 2), P), tol,
                             _radius(tol, n), name="S_2² commutes with |S_2|")
            details["square_vs_modulus"] = c2.to_json()
            extra_ok = bool(c2.passed) == bool(comm.passed)
        except UnsupportedForm as exc:
            details["square_vs_modulus"] = {"status": "unknown", "note": str(exc)}
    sub = power_subnormality(S, n, order, tol, normal_like)
    details["power_subnormality"] = sub
    sub_ok = {"not_subnormal": False, "unknown": None}.get(sub["kind"], True)
    if not extra_ok:
        details["inconsistent"] = "n = 2 corollary disagrees with the commutation probe"
    passed = comm.passed and sub_ok
    if comm.passed and sub_ok is None:
        passed = None
    return Check(f"T^{n} in class 𝒮", passed, comm.residual, comm.witness, note, details)


def hrypa_sides(w: WeightSequence, k: int, n: int) -> tuple[float, float]:
    def side(start):
        total, prod = 0.0, 1.0
        for j in range(1, n):
            prod *= w.weight(start + j - 1) ** 2
            total += prod
        return total
    return side(k), side(k + n)


def shift_power_criterion(w: WeightSequence, n: int, tol: ToleranceProfile = DEFAULT,
                          threshold: float = 1e-12) -> dict:
    """Constancy of the weights against the shifted power-sum identity.

    Both tests are evaluated independently; ``agree`` reports whether they
    reach the same verdict on this instance.
    """
    if n < 2:
        raise ValueError("the criterion needs n >= 2")
    window = max(tol.probe_radius, w.horizon() + 1)
    nondecreasing = w.is_nondecreasing(window + n)
    residuals = []
    first_fail = None
    for k in range(window):
        a, b = hrypa_sides(w, k, n)
        r = abs(a - b)
        residuals.append(r)
        if r > threshold and first_fail is None:
            first_fail = k
    constant = w.is_constant()
    identity_holds = first_fail is None
    out = {"result": "constant" if constant else "not_constant",
           "first_change": w.first_change(),
           "identity_holds": identity_holds,
           "first_failure": first_fail,
           "residual_at_failure": residuals[first_fail] if first_fail is not None else 0.0,
           "max_residual": max(residuals),
           "window": window,
           "agree": constant == identity_holds,
           "precondition_nondecreasing": nondecreasing}
    return out


# ---------------------------------------------------------------------------
# powers of an extension


def extension_power(T: BlockTriangular, R, n: int, tol: ToleranceProfile = DEFAULT,
                    quasinormal: bool | None = None, minimality: bool = True) -> dict:
    """Compare ``T^n`` with ``R^n`` for an extension bundle ``R``."""
    from .extension import minimality_check

    radius = _radius(tol, n)
    Tn = block_power(T, n, tol, verify=False).as_block()
    Rb = R.block()
    Rn = block_power(Rb, n, tol, verify=False).as_block()
    J1, J2 = R.inj1, R.inj2
    ext = check_entrywise_extension(Tn, Rn, J1, J2, tol, modulus=False, radius=radius)
    EnT, EnR = Tn.E, Rn.E
    comp = probe_equal(compose(adjoint(J2), adjoint(EnR), EnR, J2), compose(adjoint(EnT), EnT),
                       tol, radius, name=f"E_{n}*E_{n} = P E~_{n}*E~_{n}|H2")
    out = {"n": n, "extension": ext, "compression": comp}
    if quasinormal is None:
        quasinormal = bool(probe_equal(compose(T.X, adjoint(T.X), T.X),
                                       compose(adjoint(T.X), T.X, T.X), tol))
    if quasinormal:
        # |A| ⊆ |B| is equivalent to |A|² ⊆ |B|² for positive operators
        out["modulus"] = probe_equal(compose(adjoint(EnR), EnR, J2),
                                     compose(J2, adjoint(EnT), EnT), tol, radius,
                                     name=f"|E_{n}| ⊆ |E~_{n}|")
    if minimality:
        out["minimality"] = minimality_check(R.mne, tol, power_n=n)
    return out
