"""Minimal normal extensions, modulus lifts and taut entrywise extensions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .classify import (BlockTriangular, check_brownian_type, check_entrywise_extension)
from .core.indexsets import (ChainMap, DisjointUnion, Fin, IndexSet, Int, Nat, Product, RankMap,
                             StructuralError, TagMap, dim_marker)
from .core.operators import (BilateralShift, Diagonal, DirectSum, Embedding, Identity, Inclusion,
                             Operator, ScalarMul, Tensor, UnilateralShift, ZeroOp, add, adjoint,
                             compose, scalar)
from .core.polar import UnsupportedForm, polar_and_modulus, support_projection
from .core.probes import (DEFAULT, Check, ToleranceProfile, modulus_lower_bound,
                          probe_equal, window_psd)
from .core.simplify import scalar_identity_value, simplify
from .core.vectors import SupportedVector
from .core.weights import BergerMeasure, WeightSequence

MNE_TOL = 1e-12


def _add_dims(a, b):
    if a == "countable" or b == "countable":
        return "countable"
    return a + b


# ---------------------------------------------------------------------------
# minimal normal extensions


@dataclass
class MneBundle:
    """``N`` on ``K2`` extending ``S`` through the isometry ``J``.

    ``complement`` is an isometry onto ``K2 ⊖ J(H2)`` from the index set
    ``complement_space`` (``None`` when ``J`` is onto).
    """

    S: Operator
    N: Operator
    K2: IndexSet
    J: Operator
    kind: str
    measure: BergerMeasure | None = None
    children: tuple = ()
    complement_space: IndexSet | None = None
    complement: Operator | None = None
    codimension: int | str = 0
    checks: dict = field(default_factory=dict)

    @property
    def P(self) -> Operator:
        return compose(self.J, adjoint(self.J))

    def to_json(self) -> dict:
        out = {"kind": self.kind, "K2": self.K2.to_json(), "N": self.N.to_json(),
               "codimension": self.codimension,
               "checks": {k: v.to_json() for k, v in self.checks.items()}}
        if self.measure is not None:
            out["measure"] = self.measure.to_json()
        if self.children:
            out["children"] = [c.to_json() for c in self.children]
        return out


def _atomic_parts(measure: BergerMeasure):
    k = measure.k
    radii = [math.sqrt(t) for t in measure.locations]
    K2 = Product(Fin(k), Int())
    N = Tensor(Diagonal(Fin(k), dict(enumerate(radii))), BilateralShift(1.0))

    @lru_cache(maxsize=4096)
    def col(n: int) -> tuple:
        return tuple(float(x) for x in np.sqrt(measure.slice_probabilities(n)))

    def column(n):
        return {(j, n): c for j, c in enumerate(col(n))}

    def row(idx):
        j, n = idx
        if n < 0:
            return {}
        return {n: col(n)[j]}

    J = Embedding(Nat(), K2, column, row, rule=f"atomic_mne[{measure}]", isometric=True)

    @lru_cache(maxsize=4096)
    def householder(n: int) -> np.ndarray:
        u = np.array(col(n))
        v = -u.copy()
        v[0] += 1.0
        vv = float(v @ v)
        if vv < 1e-30:
            return np.eye(k)
        return np.eye(k) - 2.0 * np.outer(v, v) / vv

    # negative fibres are entirely orthogonal to J(H2); fibre n >= 0 keeps the
    # k - 1 directions orthogonal to J e_n
    neg = Product(Fin(k), Nat())
    if k == 1:
        M0 = neg
    else:
        M0 = DisjointUnion(neg, Product(Fin(k - 1), Nat()))

    def c_column(idx):
        if k == 1:
            j, m = idx
            return {(j, -1 - m): 1.0}
        side, (j, m) = idx
        if side == "L":
            return {(j, -1 - m): 1.0}
        h = householder(m)
        return {(i, m): float(h[i, j + 1]) for i in range(k) if h[i, j + 1] != 0.0}

    def c_row(idx):
        i, n = idx
        if n < 0:
            return {(i, -1 - n): 1.0} if k == 1 else {("L", (i, -1 - n)): 1.0}
        if k == 1:
            return {}
        h = householder(n)
        return {("R", (j, n)): float(h[i, j + 1]) for j in range(k - 1) if h[i, j + 1] != 0.0}

    C = Embedding(M0, K2, c_column, c_row, rule=f"atomic_complement[{measure}]", isometric=True)
    return K2, N, J, M0, C


def _shift_measure(S: UnilateralShift) -> BergerMeasure | None:
    w = S.weights
    if w.measure is not None:
        return w.measure
    if w.is_constant():
        return BergerMeasure([(w.tail ** 2, 1.0)])
    return None


def _is_normal(S: Operator, tol: ToleranceProfile) -> bool:
    return bool(probe_equal(compose(adjoint(S), S), compose(S, adjoint(S)), tol))


def build_mne(S: Operator, certificate=None, tol: ToleranceProfile = DEFAULT,
              verify: bool = True) -> MneBundle:
    """Minimal normal extension of a supported subnormal operator.

    ``certificate`` may be ``"normal_self"`` or a dict
    ``{"N": ..., "J": ...}`` describing an explicit normal extension.
    """
    bundle = _build_mne(S, certificate, tol)
    if verify:
        bundle.checks = mne_checks(bundle, tol)
        bad = [k for k, c in bundle.checks.items() if c.passed is False]
        if bad:
            raise StructuralError(f"mne invariants failed: {', '.join(bad)}")
    return bundle


def _build_mne(S: Operator, certificate, tol: ToleranceProfile) -> MneBundle:
    if isinstance(certificate, dict):
        N, J = certificate["N"], certificate["J"]
        if J.domain != S.domain or N.domain != J.codomain:
            raise StructuralError("certificate shapes do not match S")
        normal = _is_normal(S, tol)
        codim = certificate.get("codimension", "countable")
        if not normal and isinstance(codim, int) and codim > 0:
            raise StructuralError("a non-normal operator has no normal extension of finite "
                                  "nonzero codimension")
        if not normal and N.domain.size is not None:
            raise StructuralError("a non-normal operator has no finite dimensional mne")
        return MneBundle(S, N, N.domain, J, "certified", codimension=codim)
    if certificate == "normal_self":
        return MneBundle(S, S, S.domain, Identity(S.domain), "normal_self")
    if isinstance(S, ScalarMul):
        inner = _build_mne(S.op, None, tol)
        return MneBundle(S, scalar(S.c, inner.N), inner.K2, inner.J, inner.kind, inner.measure,
                         inner.children, inner.complement_space, inner.complement,
                         inner.codimension)
    if isinstance(S, UnilateralShift):
        mu = _shift_measure(S)
        if mu is None:
            raise UnsupportedForm("unsupported mne form: shift weights are not moment generated")
        K2, N, J, M0, C = _atomic_parts(mu)
        return MneBundle(S, N, K2, J, "atomic_shift", mu, complement_space=M0, complement=C,
                         codimension="countable")
    if isinstance(S, DirectSum):
        a = _build_mne(S.a, None, tol)
        b = _build_mne(S.b, None, tol)
        K2 = DisjointUnion(a.K2, b.K2)
        M0, C = _sum_complement(K2, a, b)
        return MneBundle(S, DirectSum(a.N, b.N), K2, DirectSum(a.J, b.J), "direct_sum",
                         children=(a, b), complement_space=M0, complement=C,
                         codimension=_add_dims(a.codimension, b.codimension))
    if _is_normal(S, tol):
        return MneBundle(S, S, S.domain, Identity(S.domain), "normal_self")
    raise UnsupportedForm(f"unsupported mne form: {S.describe()}")


def _sum_complement(K2: DisjointUnion, a: MneBundle, b: MneBundle):
    if a.complement is None and b.complement is None:
        return None, None
    if b.complement is None:
        return a.complement_space, compose(Inclusion(TagMap(K2, "L")), a.complement)
    if a.complement is None:
        return b.complement_space, compose(Inclusion(TagMap(K2, "R")), b.complement)
    return (DisjointUnion(a.complement_space, b.complement_space),
            DirectSum(a.complement, b.complement))


def mne_checks(m: MneBundle, tol: ToleranceProfile = DEFAULT) -> dict:
    t = tol.with_(identity_tol=min(tol.identity_tol, MNE_TOL))
    radius = min(tol.probe_radius, 24)
    out = {
        "isometric_embedding": probe_equal(compose(adjoint(m.J), m.J), Identity(m.S.domain), t,
                                           radius, name="J*J = I"),
        "intertwining": probe_equal(compose(m.N, m.J), compose(m.J, m.S), t, radius,
                                    name="N J = J S"),
        "normal": probe_equal(compose(adjoint(m.N), m.N), compose(m.N, adjoint(m.N)), t, radius,
                              name="[N*, N] = 0"),
    }
    if m.complement is not None:
        C = m.complement
        out["complement"] = probe_equal(add(compose(m.J, adjoint(m.J)), compose(C, adjoint(C))),
                                        Identity(m.K2), t, radius, name="JJ* + CC* = I")
    out["minimality"] = minimality_check(m, tol)
    return out


def _min_vectors(m: MneBundle, window: int, power_n: int):
    """Log coordinates of ``N*^{na} J e_b`` (``a + b <= window``) grouped by fibre."""
    fibres: dict = {}
    mu = m.measure
    logr = [0.5 * math.log(t) for t in mu.locations]
    for a in range(window + 1):
        for b in range(window + 1 - a):
            logp = np.log(mu.slice_probabilities(b))
            vec = np.array([0.5 * lp + power_n * a * lr for lp, lr in zip(logp, logr)])
            fibres.setdefault(b - power_n * a, []).append((a, vec))
    return fibres


def _fibre_rank(vecs: list, k: int, rank_tol: float = 1e-8) -> int:
    # rescaling coordinates by the first vector keeps the rank and turns the
    # rows into low powers of r_j^(2n), which are well conditioned
    vecs = sorted(vecs, key=lambda av: av[0])
    base = vecs[0][1]
    rows = []
    for _, v in vecs[:k]:
        r = np.exp(v - base - (v - base).max())
        rows.append(r / np.linalg.norm(r))
    return int(np.linalg.matrix_rank(np.array(rows), tol=rank_tol))


def minimality_check(m: MneBundle, tol: ToleranceProfile = DEFAULT, power_n: int = 1,
                     window: int | None = None, rank_tol: float = 1e-8) -> Check:
    """Gram ranks of ``{N*^{na} J e_b}`` per fibre against the predicted count."""
    window = min(tol.probe_radius, 24) if window is None else window
    name = "minimality" if power_n == 1 else f"minimality of N^{power_n}"
    if m.kind == "normal_self":
        return Check(name, True, note="N = S on the same space")
    if m.kind == "direct_sum":
        parts = [minimality_check(c, tol, power_n, window, rank_tol) for c in m.children]
        passed = all(p.passed for p in parts) if all(p.passed is not None for p in parts) else (
            False if any(p.passed is False for p in parts) else None)
        return Check(name, passed, details={"parts": [p.to_json() for p in parts]})
    if m.kind != "atomic_shift":
        return Check(name, None, note="no predicted rank for certified extensions")
    k = m.measure.k
    fibres = _min_vectors(m, window, power_n)
    worst = None
    total = predicted = 0
    for ell, vecs in sorted(fibres.items()):
        rank = _fibre_rank(vecs, k, rank_tol)
        expected = min(k, len(vecs))
        total += rank
        predicted += expected
        if rank != expected and worst is None:
            worst = (ell, rank, expected)
    details = {"window": window, "fibres": len(fibres), "atoms": k, "rank": total,
               "predicted_rank": predicted, "rank_tol": rank_tol}
    if worst is not None:
        ell, rank, expected = worst
        return Check(name, False, float(predicted - total),
                     note=f"fibre {ell}: rank {rank}, expected {expected}", details=details)
    return Check(name, True, details=details)


# ---------------------------------------------------------------------------
# lifts relative to the commutant of N


def lift_modulus(modE: Operator, mne: MneBundle, hint=None, tol: ToleranceProfile = DEFAULT,
                 verify: bool = True) -> Operator:
    """The lift ``B = ψ(|E|)`` on ``K2``.

    Supported: scalars on any extension, anything on a normal summand (the
    lift is the operator itself), and blockwise lifts over direct sums.
    ``hint`` may be a pair of summand operators when ``modE`` is not
    already a ``DirectSum``.
    """
    B = _lift(simplify(modE), mne, hint)
    if verify:
        checks = lift_checks(modE, B, mne, tol)
        bad = [k for k, c in checks.items() if c.passed is False]
        if bad:
            raise StructuralError(f"lift invariants failed: {', '.join(bad)}")
    return B


def _lift(A: Operator, mne: MneBundle, hint) -> Operator:
    c = scalar_identity_value(A)
    if c is not None:
        return ZeroOp(mne.K2) if c == 0 else scalar(c, Identity(mne.K2))
    if isinstance(A, ZeroOp):
        return ZeroOp(mne.K2)
    if mne.kind == "normal_self":
        return A
    if mne.kind == "direct_sum":
        parts = hint
        if parts is None:
            if not isinstance(A, DirectSum):
                raise UnsupportedForm(f"unsupported lift form: {A.describe()} over a direct sum")
            parts = (A.a, A.b)
        a, b = mne.children
        return DirectSum(_lift(simplify(parts[0]), a, None), _lift(simplify(parts[1]), b, None))
    raise UnsupportedForm(f"unsupported lift form: {A.describe()} on a {mne.kind} extension")


def lift_checks(modE: Operator, B: Operator, mne: MneBundle,
                tol: ToleranceProfile = DEFAULT) -> dict:
    S, N, J, P = mne.S, mne.N, mne.J, mne.P
    out = {
        "commutes_with_S": probe_equal(compose(modE, S), compose(S, modE), tol,
                                       name="|E| S = S |E|"),
        "commutes_with_S*": probe_equal(compose(modE, adjoint(S)), compose(adjoint(S), modE),
                                        tol, name="|E| S* = S* |E|"),
        "extends": probe_equal(compose(B, J), compose(J, modE), tol, name="B ⊇ |E|"),
        "commutes_with_N": probe_equal(compose(B, N), compose(N, B), tol, name="B N = N B"),
        "positive": window_psd(B, tol, name="B >= 0"),
        "commutes_with_P": probe_equal(compose(B, P), compose(P, B), tol, name="B P = P B"),
    }
    # B is pinned down on span{N*^n J h} by B N*^n J h = N*^n J |E| h
    worst = Check("determined on N*^n H", True)
    for n in range(1, 4):
        Nn = compose(*([adjoint(N)] * n))
        c = probe_equal(compose(B, Nn, J), compose(Nn, J, modE), tol,
                        max(1, tol.probe_radius - n), name="determined on N*^n H")
        if not c.passed:
            worst = c
            break
    out["uniqueness"] = worst
    return out


# ---------------------------------------------------------------------------
# orthonormal families used for defect spaces


def _index_pre(op: Operator):
    """Preimage function for isometries that send basis vectors to basis vectors."""
    if isinstance(op, Identity):
        return lambda i: i
    if isinstance(op, Inclusion):
        return op.map.preimage
    if isinstance(op, ScalarMul) and op.c != 0:
        return _index_pre(op.op)
    if isinstance(op, UnilateralShift) and op.weights.is_constant() and op.weights.tail == 1.0:
        return lambda i: i - 1 if i >= 1 else None
    if isinstance(op, BilateralShift) and op.theta == 1.0:
        return lambda i: i - 1
    from .core.operators import Compose
    if isinstance(op, Compose):
        pa, pb = _index_pre(op.a), _index_pre(op.b)
        if pa is None or pb is None:
            return None

        def pre(i):
            j = pa(i)
            return None if j is None else pb(j)
        return pre
    if isinstance(op, DirectSum):
        pa, pb = _index_pre(op.a), _index_pre(op.b)
        if pa is None or pb is None:
            return None

        def pre(i):
            side, x = i
            y = (pa if side == "L" else pb)(x)
            return None if y is None else (side, y)
        return pre
    return None


class Family:
    """Orthonormal family ``vec(0), vec(1), ...`` in ``space``.

    ``size`` is an int or ``None`` (countable).  ``touch(i)`` returns
    ``{k: vec(k)[i]}`` for the members whose support contains ``i``.
    """

    space: IndexSet
    size: int | None

    def vec(self, k: int) -> dict:
        raise NotImplementedError

    def touch(self, i) -> dict:
        raise NotImplementedError

    @property
    def marker(self):
        return "countable" if self.size is None else self.size

    def vectors(self, limit: int = 64) -> list[SupportedVector]:
        n = limit if self.size is None else min(self.size, limit)
        return [SupportedVector(self.space, self.vec(k)) for k in range(n)]


class ComplementFamily(Family):
    """Basis vectors ``e_i`` with ``i`` outside the given ranges, in rank order."""

    FAR = (512, 4096)

    def __init__(self, space: IndexSet, excluded):
        self.space = space
        self._excluded = excluded
        self._members: list = []
        self._pos: dict = {}
        self._scanned = 0
        if space.size is not None:
            self._scan(space.size)
            self.size = len(self._members)
        else:
            self._scan(self.FAR[0])
            near = len(self._members)
            self._scan(self.FAR[1])
            self.size = near if len(self._members) == near else None

    def _scan(self, upto: int) -> None:
        while self._scanned < upto:
            i = self.space.unrank(self._scanned)
            if not self._excluded(i):
                self._pos[i] = len(self._members)
                self._members.append(i)
            self._scanned += 1

    def index(self, k: int):
        while k >= len(self._members):
            if self.size is not None:
                raise IndexError(k)
            self._scan(self._scanned * 2)
        return self._members[k]

    def vec(self, k):
        return {self.index(k): 1.0}

    def touch(self, i):
        r = self.space.rank(i)
        if r >= self._scanned:
            self._scan(r + 1)
        k = self._pos.get(i)
        return {} if k is None else {k: 1.0}


class SplitFamily(Family):
    """Members of ``base`` after removing the finite position set ``F`` and
    prepending ``extra`` vectors supported on those positions."""

    def __init__(self, base: Family, F: list, extra: list, head: bool = False):
        self.space = base.space
        self.base = base
        self.F = sorted(F)
        self.extra = extra
        self.head = head
        if head:
            self.size = len(extra)
        else:
            self.size = None if base.size is None else base.size - len(F) + len(extra)

    def _base_pos(self, m: int) -> int:
        p = m
        for f in self.F:
            if f <= p:
                p += 1
        return p

    def vec(self, k):
        if k < len(self.extra):
            return self.extra[k]
        return self.base.vec(self._base_pos(k - len(self.extra)))

    def touch(self, i):
        out = {}
        for k, v in enumerate(self.extra):
            if i in v:
                out[k] = v[i]
        if self.head:
            return out
        for p, val in self.base.touch(i).items():
            if p not in self.F:
                out[len(self.extra) + p - sum(1 for f in self.F if f < p)] = val
        return out


def _orth_complement(vectors: list, span: list, space: IndexSet) -> list:
    """Orthonormal basis of ``span ⊖ vectors`` (finite, via a full QR)."""
    ranks = sorted({i for v in span for i in v}, key=space.rank)
    pos = {i: n for n, i in enumerate(ranks)}
    H = np.zeros((len(ranks), len(vectors)), dtype=complex)
    for c, v in enumerate(vectors):
        for i, x in v.items():
            H[pos[i], c] = x
    A = np.zeros((len(ranks), len(span)), dtype=complex)
    for c, v in enumerate(span):
        for i, x in v.items():
            A[pos[i], c] = x
    # project the span off the hinted directions, then orthonormalise
    R = A - H @ (H.conj().T @ A)
    u, s, _ = np.linalg.svd(R, full_matrices=False)
    keep = u[:, s > 1e-10]
    return [{ranks[r]: complex(keep[r, c]) for r in range(len(ranks)) if abs(keep[r, c]) > 1e-15}
            for c in range(keep.shape[1])]


# ---------------------------------------------------------------------------
# the construction


@dataclass
class DefectSpec:
    finite_dim: int | str = 0
    basis_hint: list | None = None

    def __post_init__(self):
        if self.finite_dim != "countable" and (not isinstance(self.finite_dim, int)
                                               or self.finite_dim < 0):
            raise StructuralError("defect dimension must be a nonnegative integer or 'countable'")
        if self.basis_hint is not None and len(self.basis_hint) != self.finite_dim:
            raise StructuralError("basis hint length must equal the defect dimension")

    def to_json(self) -> dict:
        out = {"finite_dim": self.finite_dim}
        if self.basis_hint:
            out["basis_hint"] = [v.to_json() for v in self.basis_hint]
        return out


@dataclass
class ExtensionBundle:
    T: BlockTriangular
    K1: IndexSet
    V_t: Operator
    E_t: Operator
    mne: MneBundle
    U: Operator | None
    lift_B: Operator
    inj1: Operator
    inj2: Operator
    defect: DefectSpec
    defect_family: Family | None
    M0: IndexSet | None = None
    M1: IndexSet | None = None
    extra_defect: int | str = 0
    report: dict = field(default_factory=dict)

    @property
    def N(self) -> Operator:
        return self.mne.N

    @property
    def K2(self) -> IndexSet:
        return self.mne.K2

    def block(self) -> BlockTriangular:
        return BlockTriangular(self.V_t, self.E_t, self.N, name="extension")

    def defect_marker(self):
        return _add_dims(self.defect.finite_dim, self.extra_defect)

    def to_json(self) -> dict:
        return {"K1": self.K1.to_json(), "K2": self.K2.to_json(),
                "M0": dim_marker(self.M0), "M1": dim_marker(self.M1),
                "defect": self.defect_marker(), "mne": self.mne.to_json(),
                "lift": self.lift_B.to_json(),
                "report": _jsonable(self.report)}


def _jsonable(x):
    if isinstance(x, Check):
        return x.to_json()
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _is_injective(modE: Operator, tol: ToleranceProfile) -> bool:
    try:
        P = support_projection(simplify(modE))
    except UnsupportedForm:
        lb = modulus_lower_bound(modE)
        return lb is not None and lb > tol.identity_tol
    return bool(probe_equal(P, Identity(modE.domain), tol))


def _kernel_split(T: BlockTriangular, mne: MneBundle, tol: ToleranceProfile):
    """``("injective" | "zero" | "split", E2, mne2)`` per ``H2 = ker E ⊕ cl ran |E|``."""
    if probe_equal(T.E, ZeroOp(T.H2, T.H1), tol):
        return "zero", None, None
    _, modE = polar_and_modulus(T.E)
    if _is_injective(modE, tol):
        return "injective", T.E, mne
    H2 = T.H2
    if isinstance(H2, DisjointUnion) and isinstance(T.X, DirectSum) and mne.kind == "direct_sum":
        iL, iR = Inclusion(TagMap(H2, "L")), Inclusion(TagMap(H2, "R"))
        E1, E2 = simplify(compose(T.E, iL)), simplify(compose(T.E, iR))
        if probe_equal(E1, ZeroOp(E1.domain, E1.codomain), tol):
            if _is_injective(polar_and_modulus(E2)[1], tol):
                return "split", E2, mne.children[1]
    raise UnsupportedForm("kernel of E is not a supported direct summand of S")


def basic_construction(T: BlockTriangular, mne: MneBundle, D: DefectSpec | None = None,
                       tol: ToleranceProfile = DEFAULT, verify: bool = True) -> ExtensionBundle:
    """Taut entrywise extension ``[V~ E~; 0 N]`` of ``T`` with defect ``D``."""
    D = DefectSpec() if D is None else D
    if mne.S is not T.X and not probe_equal(mne.S, T.X, tol):
        raise StructuralError("the extension does not belong to the lower right entry of T")
    H1 = T.H1
    mode, E2, mne2 = _kernel_split(T, mne, tol)

    if mode == "zero":
        W1 = B2 = None
        M0, C = None, None
        excluded_E = lambda i: False  # noqa: E731
    else:
        W1, mod2 = polar_and_modulus(E2)
        B2 = lift_modulus(mod2, mne2, tol=tol, verify=verify)
        M0, C = mne2.complement_space, mne2.complement
        preW = _index_pre(W1)
        if preW is None:
            raise UnsupportedForm("defect computation needs E with a basis-preserving polar part")
        excluded_E = lambda i: preW(i) is not None  # noqa: E731
    preV = _index_pre(T.V)
    if preV is None:
        raise UnsupportedForm("defect computation needs V to send basis vectors to basis vectors")
    base = ComplementFamily(H1, lambda i: preV(i) is not None or excluded_E(i))
    Dfam, Efam = _split_defect(T, base, D, tol)

    # W : M0 ⊕ M1 -> ℰ ⊕ M1, canonical rank order isomorphism
    m0, e = dim_marker(M0), Efam.marker
    if m0 == e and m0 != "countable":
        M1 = None
    else:
        M1 = Nat()
    Dom = _join(M0, M1)
    Eidx = None if e == 0 else (Nat() if e == "countable" else Fin(e))
    Cv = _join(Eidx, M1)
    K1 = H1 if Dom is None else DisjointUnion(H1, Dom)

    def tagK1(part, x):
        if Dom is None:
            return x
        if part == "H1":
            return ("L", x)
        if part == "M0":
            return ("R", ("L", x) if M1 is not None else x)
        return ("R", ("R", x) if M0 is not None else x)

    def split_rest(z):
        if M0 is not None and M1 is not None:
            return ("M0" if z[0] == "L" else "M1"), z[1]
        return ("M0" if M0 is not None else "M1"), z

    def cv_split(c):
        if Eidx is not None and M1 is not None:
            return ("E" if c[0] == "L" else "M1"), c[1]
        return ("E" if Eidx is not None else "M1"), c

    def cv_join(part, x):
        if Eidx is not None and M1 is not None:
            return ("L" if part == "E" else "R", x)
        return x

    def column(idx):
        if Dom is not None:
            side, x = idx
        else:
            side, x = "L", idx
        if side == "L":
            return {tagK1("H1", j): c for j, c in T.V._fwd({x: 1.0}).items()}
        part, y = cv_split(Cv.unrank(Dom.rank(x)))
        if part == "E":
            return {tagK1("H1", j): c for j, c in Efam.vec(y).items()}
        return {tagK1("M1", y): 1.0}

    def row(idx):
        if Dom is not None:
            side, x = idx
        else:
            side, x = "L", idx
        if side == "L":
            out = {tagK1("H1", j): c for j, c in T.V._adj({x: 1.0}).items()}
            if Eidx is not None:
                for k, val in Efam.touch(x).items():
                    src = Dom.unrank(Cv.rank(cv_join("E", k)))
                    out[("R", src)] = out.get(("R", src), 0) + complex(val).conjugate()
            return out
        part, z = split_rest(x)
        if part == "M0":
            return {}
        return {("R", Dom.unrank(Cv.rank(cv_join("M1", z)))): 1.0}

    V_t = T.V if Dom is None else Embedding(K1, K1, column, row, rule="basic_construction_V",
                                            isometric=True)
    inj1 = Identity(H1) if Dom is None else Inclusion(TagMap(K1, "L"))

    K2 = mne.K2
    if mode == "zero":
        U, B, E_t = None, ZeroOp(K2), ZeroOp(K2, K1)
    else:
        terms = [compose(inj1, W1, adjoint(mne2.J))]
        if C is not None:
            into = TagMap(K1, "R")
            if M1 is not None:
                iM0 = Inclusion(ChainMap((TagMap(Dom, "L"), into)))
            else:
                iM0 = Inclusion(into)
            terms.append(compose(iM0, adjoint(C)))
        U = add(*terms) if len(terms) > 1 else terms[0]
        if mode == "split":
            iR = Inclusion(TagMap(K2, "R"))
            U = compose(U, adjoint(iR))
            B = DirectSum(ZeroOp(K2.left), B2)
        else:
            B = B2
        E_t = compose(U, B)
    Dk = _embed_family(Dfam, inj1)
    R = ExtensionBundle(T, K1, V_t, E_t, mne, U, B, inj1, mne.J, D, Dk, M0, M1)
    if verify:
        R.report = verify_taut(T, R, tol)
        bad = _failures(R.report)
        if bad:
            raise StructuralError(f"extension invariants failed: {', '.join(bad)}")
    return R


def _join(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return DisjointUnion(a, b)


def _split_defect(T: BlockTriangular, base: Family, D: DefectSpec, tol: ToleranceProfile):
    d = D.finite_dim
    if d == "countable":
        if base.size is not None:
            raise StructuralError(f"defect of T is {base.size}, cannot host a countable defect")
        return base, SplitFamily(base, [], [], head=True)
    if base.size is not None and d > base.size:
        raise StructuralError(f"requested defect {d} exceeds the defect {base.size} of T")
    if not D.basis_hint:
        return (SplitFamily(base, [], [base.vec(k) for k in range(d)], head=True),
                SplitFamily(base, list(range(d)), []))
    hints = [dict(h.entries) for h in D.basis_hint]
    for n, h in enumerate(D.basis_hint):
        hv = h
        if h.space != T.H1:
            raise StructuralError("defect hint must live in H1")
        if hv.norm() < 1 - 1e-9 or hv.norm() > 1 + 1e-9:
            raise StructuralError(f"defect hint {n} is not normalised")
        for m in range(n):
            if abs(hv.inner(D.basis_hint[m])) > 1e-9:
                raise StructuralError("defect hints are not orthogonal")
        leak = max(SupportedVector(T.H2, T.E._adj(hints[n])).norm(),
                   SupportedVector(T.H1, T.V._adj(hints[n])).norm())
        if leak > tol.identity_tol:
            raise StructuralError(f"defect hint {n} is not orthogonal to ran V and ran E "
                                  f"(residual {leak:.3e})")
    F = sorted({k for h in hints for i in h for k in base.touch(i)})
    if sum(len(base.touch(i)) == 0 for h in hints for i in h):
        raise StructuralError("defect hint leaves the defect space of T")
    span = [base.vec(k) for k in F]
    rest = _orth_complement(hints, span, T.H1)
    return SplitFamily(base, [], hints, head=True), SplitFamily(base, F, rest)


class _Embedded(Family):
    def __init__(self, fam: Family, inj: Operator):
        self.fam, self.inj = fam, inj
        self.space = inj.codomain
        self.size = fam.size

    def vec(self, k):
        return self.inj._fwd(self.fam.vec(k))

    def touch(self, i):
        back = self.inj._adj({i: 1.0})
        out = {}
        for j, c in back.items():
            for k, v in self.fam.touch(j).items():
                out[k] = v * c
        return out


def _embed_family(fam: Family, inj: Operator) -> Family:
    return fam if isinstance(inj, Identity) else _Embedded(fam, inj)


def _failures(report: dict, prefix: str = "") -> list:
    bad = []
    for k, v in report.items():
        if isinstance(v, Check) and v.passed is False:
            bad.append(prefix + k)
        elif isinstance(v, dict):
            bad += _failures(v, prefix + k + ".")
    return bad


def family_operator(fam: Family) -> Operator:
    """Isometry ``Fin(size)`` (or ``Nat``) onto the span of the family."""
    dom = Nat() if fam.size is None else Fin(fam.size)
    return Embedding(dom, fam.space, fam.vec, fam.touch, rule="family", isometric=True)


def window_trace(P: Operator, radius: int) -> float:
    """``sum <P e_i, e_i>`` over the probe window of the domain."""
    return sum(complex(P.matrix_element(i, i)).real for i in P.domain.window(radius))


def _summary(name: str, passed, details: dict, residual: float = 0.0, note: str = "") -> Check:
    return Check(name, passed, residual, note=note, details=details)


def verify_taut(T: BlockTriangular, R: ExtensionBundle, tol: ToleranceProfile = DEFAULT) -> dict:
    """Every invariant of an extension bundle, as named checks."""
    Rb = R.block()
    out: dict = {}
    cls = check_brownian_type(Rb, tol, modE=R.lift_B)
    out["brownian_type"] = _summary(
        "extension is Brownian-type with normal entry", cls.passed and "N" in cls.entry_class,
        {"gqb1": cls.gqb1.to_json(), "gqb2": cls.gqb2.to_json(), "gqb3": cls.gqb3.to_json(),
         "gqb3b": cls.gqb3b.to_json(), "label": cls.label},
        max(cls.gqb1.residual, cls.gqb2.residual, cls.gqb3.residual))
    out["entrywise"] = check_entrywise_extension(T, Rb, R.inj1, R.inj2, tol, mod_R=R.lift_B)
    out["modulus"] = probe_equal(compose(adjoint(R.E_t), R.E_t), compose(R.lift_B, R.lift_B), tol,
                                 name="E~*E~ = B²")
    if R.U is not None:
        out["polar_form"] = probe_equal(R.E_t, compose(R.U, R.lift_B), tol, name="E~ = U B")
    out["defect"] = defect_check(R, tol)
    out["tightness"] = _tightness(T, R, tol)
    dims = {"H1": dim_marker(T.H1), "K1": dim_marker(R.K1), "H2": dim_marker(T.H2),
            "K2": dim_marker(R.K2)}
    out["dimensions"] = _summary("dim K_j = dim H_j", dims["H1"] == dims["K1"]
                                 and dims["H2"] == dims["K2"], dims)
    return out


def defect_check(R: ExtensionBundle, tol: ToleranceProfile = DEFAULT) -> Check:
    """``K1 = ran V~ ⊕ cl ran E~ ⊕ 𝒟`` on probes, and the window count of ``𝒟``."""
    K1 = R.K1
    parts = [compose(R.V_t, adjoint(R.V_t))]
    if R.U is not None:
        PB = support_projection(simplify(R.lift_B))
        parts.append(compose(R.U, PB, adjoint(R.U)))
    Dop = None
    if R.defect_family is not None and R.defect_family.size != 0:
        Dop = family_operator(R.defect_family)
        parts.append(compose(Dop, adjoint(Dop)))
    total = add(*parts) if len(parts) > 1 else parts[0]
    split = probe_equal(total, Identity(K1), tol, name="K1 = ran V~ ⊕ cl ran E~ ⊕ 𝒟")
    details = {"decomposition": split.to_json()}
    passed = split.passed
    expected = R.defect_marker()
    if Dop is not None:
        orth = max(SupportedVector(R.K1, R.V_t._adj(v)).norm() + SupportedVector(
            R.K2, R.E_t._adj(v)).norm() for v in (R.defect_family.vec(k) for k in
                                                 range(min(R.defect_family.size or 16, 64))))
        details["orthogonality_residual"] = orth
        passed = passed and orth <= tol.identity_tol
    if expected == "countable":
        count = "countable" if Dop is not None and R.defect_family.size is None else 0
    else:
        radius = max(tol.probe_radius, _support_radius(R.defect_family, K1))
        count = 0 if Dop is None else round(window_trace(compose(Dop, adjoint(Dop)), radius))
    details["window_count"] = count
    details["expected"] = expected
    passed = passed and count == expected
    return Check("defect identity", passed, split.residual, split.witness,
                 details=details)


def _support_radius(fam: Family | None, space: IndexSet) -> int:
    if fam is None or fam.size in (None, 0):
        return 0
    return 1 + max(space.rank(i) for k in range(fam.size) for i in fam.vec(k))


def _tightness(T: BlockTriangular, R: ExtensionBundle, tol: ToleranceProfile) -> Check:
    """Injectivity, left invertibility and isometricity of ``E`` and ``E~`` agree."""
    try:
        _, modE = polar_and_modulus(T.E)
    except UnsupportedForm as exc:
        return Check("E and E~ share injectivity type", None, note=str(exc))
    lbE = modulus_lower_bound(modE)
    lbB = modulus_lower_bound(R.lift_B)
    inj = (_is_injective(modE, tol), _is_injective(R.lift_B, tol))
    left = (lbE is not None and lbE > tol.identity_tol, lbB is not None and lbB > tol.identity_tol)
    iso = (bool(probe_equal(compose(adjoint(T.E), T.E), Identity(T.H2), tol)),
           bool(probe_equal(compose(adjoint(R.E_t), R.E_t), Identity(R.K2), tol)))
    details = {"injective": list(inj), "left_invertible": list(left), "isometric": list(iso),
               "lower_bound_E": lbE, "lower_bound_E~": lbB}
    ok = inj[0] == inj[1] and left[0] == left[1] and iso[0] == iso[1]
    return Check("E and E~ share injectivity type", ok, details=details)


# ---------------------------------------------------------------------------
# structural operations on bundles


class UnionFamily(Family):
    """Concatenation (or interleaving, when both are countable) of two
    families living in the same space."""

    def __init__(self, a: Family, b: Family):
        if a.space != b.space:
            raise StructuralError("families live in different spaces")
        if a.size is None and b.size is not None:
            a, b = b, a
        self.a, self.b = a, b
        self.space = a.space
        self.size = None if a.size is None or b.size is None else a.size + b.size
        self._interleave = a.size is None

    def vec(self, k):
        if self._interleave:
            return (self.a if k % 2 == 0 else self.b).vec(k // 2)
        return self.a.vec(k) if k < self.a.size else self.b.vec(k - self.a.size)

    def touch(self, i):
        out = {}
        for k, v in self.a.touch(i).items():
            out[2 * k if self._interleave else k] = v
        for k, v in self.b.touch(i).items():
            out[2 * k + 1 if self._interleave else self.a.size + k] = v
        return out


def enlarge_first_column(R: ExtensionBundle, W: Operator,
                         tol: ToleranceProfile = DEFAULT) -> ExtensionBundle:
    """``[V~ ⊕ W, E~ ⊕ 0; 0 N]`` on ``K1 ⊕ L``; the defect grows by ``ker W*``."""
    L = W.domain
    if W.codomain != L:
        raise StructuralError("W must act on a single space L")
    if not probe_equal(compose(adjoint(W), W), Identity(L), tol):
        raise StructuralError("W must be an isometry")
    preW = _index_pre(W)
    if preW is None:
        raise UnsupportedForm("ker W* is computable only for basis-preserving isometries")
    K1n = DisjointUnion(R.K1, L)
    iK, iL = Inclusion(TagMap(K1n, "L")), Inclusion(TagMap(K1n, "R"))
    kerW = ComplementFamily(L, lambda i: preW(i) is not None)
    fams = [f for f in (_embed_family(R.defect_family, iK) if R.defect_family else None,
                        _Embedded(kerW, iL) if kerW.size != 0 else None) if f is not None]
    fam = fams[0] if len(fams) == 1 else (UnionFamily(*fams) if fams else None)
    Rn = ExtensionBundle(R.T, K1n, DirectSum(R.V_t, W), compose(iK, R.E_t), R.mne,
                         None if R.U is None else compose(iK, R.U), R.lift_B,
                         compose(iK, R.inj1), R.inj2, R.defect, fam, R.M0, R.M1,
                         _add_dims(R.extra_defect, kerW.marker))
    Rn.report = verify_taut(R.T, Rn, tol)
    Rn.report["same_modulus"] = probe_equal(compose(adjoint(Rn.E_t), Rn.E_t),
                                            compose(adjoint(R.E_t), R.E_t), tol,
                                            name="|F~| = |E~|")
    Rn.report["ker_W*"] = Check("ker W*", True, details={"dimension": kerW.marker})
    return Rn


def decompose_kernel_part(T: BlockTriangular, R: ExtensionBundle,
                          tol: ToleranceProfile = DEFAULT):
    """Split along ``H2 = ker E ⊕ cl ran |E|``.

    Returns ``(T1, T2, report)`` where ``T1`` carries the kernel part (or is
    ``None`` when ``E`` is injective) and ``T2`` the injective part (``None``
    when ``E = 0``).
    """
    mode, E2, mne2 = _kernel_split(T, R.mne, tol)
    rep: dict = {"mode": mode}
    if mode == "injective":
        rep["E_injective"] = Check("E injective", True)
        return None, T, rep
    if mode == "zero":
        rep["E~_zero"] = probe_equal(R.E_t, ZeroOp(R.K2, R.K1), tol, name="E~ = 0")
        return T, None, rep
    H2, K2 = T.H2, R.K2
    S1, S2 = T.X.a, T.X.b
    T1 = BlockTriangular(T.V, ZeroOp(H2.left, T.H1), S1, name="kernel part")
    T2 = BlockTriangular(T.V, E2, S2, name="injective part")
    a, b = R.mne.children
    rep["brownian_T1"] = _summary("kernel part is Brownian-type",
                                  check_brownian_type(T1, tol).passed, {})
    rep["brownian_T2"] = _summary("injective part is Brownian-type",
                                  check_brownian_type(T2, tol).passed, {})
    rep["E1_zero"] = probe_equal(compose(T.E, Inclusion(TagMap(H2, "L"))),
                                 ZeroOp(H2.left, T.H1), tol, name="E1 = 0")
    rep["E2_injective"] = Check("E2 injective", _is_injective(polar_and_modulus(E2)[1], tol))
    rep["mne_split"] = _summary("N = N1 ⊕ N2 with N_j = mne S_j",
                                not _failures({**mne_checks(a, tol), **mne_checks(b, tol)}),
                                {"kinds": [a.kind, b.kind]})
    iL = Inclusion(TagMap(K2, "L"))
    rep["E~1_zero"] = probe_equal(compose(R.E_t, iL), ZeroOp(K2.left, R.K1), tol, name="E~1 = 0")
    B2 = lift_modulus(polar_and_modulus(E2)[1], b, tol=tol)
    rep["E~2_injective"] = Check("E~2 injective", _is_injective(B2, tol))
    rep["blockwise_lift"] = probe_equal(R.lift_B, DirectSum(ZeroOp(K2.left), B2), tol,
                                        name="B = 0 ⊕ lift(|E2|)")
    return T1, T2, rep


def polar_structure(T: BlockTriangular, R: ExtensionBundle, tol: ToleranceProfile = DEFAULT) -> dict:
    """Polar data of ``E~`` for injective ``E``: ``W ⊆ U`` and ``ran V~ ⊥ ran U``."""
    W, modE = polar_and_modulus(T.E)
    if not _is_injective(modE, tol):
        raise StructuralError("E is not injective: split it with decompose_kernel_part first")
    U, B = R.U, R.lift_B
    return {
        "U_isometric": probe_equal(compose(adjoint(U), U), Identity(R.K2), tol, name="U*U = I"),
        "W_in_U": probe_equal(compose(U, R.inj2), compose(R.inj1, W), tol, name="W ⊆ U"),
        "ranges_orthogonal": probe_equal(compose(adjoint(R.V_t), U), ZeroOp(R.K2, R.K1), tol,
                                         name="ran V~ ⊥ ran U"),
        "polar": probe_equal(R.E_t, compose(U, B), tol, name="E~ = U |E~|"),
        "modulus": probe_equal(compose(adjoint(R.E_t), R.E_t), compose(B, B), tol,
                               name="|E~| = B"),
        "modulus_extends": probe_equal(compose(B, R.inj2), compose(R.inj2, modE), tol,
                                       name="|E| ⊆ |E~|"),
    }


def build_from_polar(T: BlockTriangular, V_t: Operator, U: Operator, B: Operator, mne: MneBundle,
                     inj1: Operator, defect: DefectSpec | None = None,
                     defect_family: Family | None = None,
                     tol: ToleranceProfile = DEFAULT) -> ExtensionBundle:
    """Bundle with ``E~ = U B`` from isometries ``V~``, ``U`` with orthogonal ranges."""
    if not probe_equal(compose(adjoint(U), U), Identity(U.domain), tol):
        raise StructuralError("U must be an isometry")
    if not probe_equal(compose(adjoint(V_t), U), ZeroOp(U.domain, V_t.domain), tol):
        raise StructuralError("ranges of V~ and U must be orthogonal")
    R = ExtensionBundle(T, V_t.domain, V_t, compose(U, B), mne, U, B, inj1, mne.J,
                        defect or DefectSpec(), defect_family)
    R.report = verify_taut(T, R, tol)
    return R


def two_atom_measure() -> BergerMeasure:
    return BergerMeasure([(1.0, 0.5), (4.0, 0.5)])


def _le(n, p) -> bool:
    if p == "countable":
        return True
    return n != "countable" and n <= p


def defect_gallery(p, n, tol: ToleranceProfile = DEFAULT):
    """``T`` with isometric ``E``, non-normal ``S`` and defect ``p``, together with
    a taut extension of defect ``n``."""
    for x in (p, n):
        if x != "countable" and not (isinstance(x, int) and 0 <= x <= 8):
            raise StructuralError("gallery dimensions are integers in 0..8 or 'countable'")
    if p == 0:
        H1 = Nat()
        V = Inclusion(_half(H1, 1))
        E = Inclusion(_half(Nat(), 0))
    else:
        H1 = DisjointUnion(Nat(), Nat() if p == "countable" else Fin(p))
        into = TagMap(H1, "L")
        V = Inclusion(ChainMap((_half(H1, 1), into)))
        E = Inclusion(ChainMap((_half(Nat(), 0), into)))
    S = UnilateralShift(WeightSequence.moments(two_atom_measure()))
    T = BlockTriangular(V, E, S, name=f"defect gallery p={p}")
    mne = build_mne(S, tol=tol)
    if _le(n, p):
        return T, basic_construction(T, mne, DefectSpec(n), tol)
    R = basic_construction(T, mne, DefectSpec(p), tol)
    if n == "countable":
        W = Inclusion(_half(Nat(), 0))
    else:
        W = compose(*([UnilateralShift(WeightSequence.constant(1.0))] * (n - p)))
    return T, enlarge_first_column(R, W, tol)


def _half(domain: IndexSet, offset: int) -> RankMap:
    """Even (offset 0) or odd (offset 1) positions of ``Nat``."""
    return RankMap(domain, 2, offset)
