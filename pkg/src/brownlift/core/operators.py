"""Lazy structured operators between l2 spaces over index sets.

Every node acts exactly on finitely supported vectors through two internal
maps ``_fwd`` and ``_adj`` on plain ``dict`` representations.  Nodes never
evaluate eagerly; combinators only build trees.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .indexsets import (DisjointUnion, Fin, IndexMap, IndexSet, Int, Nat, Product,
                        StructuralError, index_to_json)
from .vectors import DROP_TOL, SupportedVector
from .weights import WeightSequence


def _acc(out: dict, idx, c: complex) -> None:
    if c:
        out[idx] = out.get(idx, 0j) + c


def _scale(d: dict, c: complex) -> dict:
    if c == 0:
        return {}
    return {i: c * v for i, v in d.items()}


def _cval(c) -> object:
    c = complex(c)
    return c.real if c.imag == 0 else [c.real, c.imag]


class Operator:
    """Base class of all structured operator nodes."""

    domain: IndexSet
    codomain: IndexSet
    kind = "Operator"

    # -- action -------------------------------------------------------------
    def _fwd(self, d: dict) -> dict:
        raise NotImplementedError

    def _adj(self, d: dict) -> dict:
        raise NotImplementedError

    def apply(self, v: SupportedVector, drop_tol: float = DROP_TOL) -> SupportedVector:
        if v.space != self.domain:
            raise StructuralError(
                f"{self.kind}: vector lives in {v.space} but the domain is {self.domain}")
        return SupportedVector(self.codomain, self._fwd(v.entries), drop_tol)

    def apply_adjoint(self, v: SupportedVector, drop_tol: float = DROP_TOL) -> SupportedVector:
        if v.space != self.codomain:
            raise StructuralError(
                f"{self.kind}*: vector lives in {v.space} but the codomain is {self.codomain}")
        return SupportedVector(self.domain, self._adj(v.entries), drop_tol)

    def __call__(self, v: SupportedVector) -> SupportedVector:
        return self.apply(v)

    def column(self, j) -> dict:
        return self._fwd({j: 1.0})

    def matrix_element(self, i, j) -> complex:
        """``<op e_j, e_i>``."""
        self.codomain.check(i)
        self.domain.check(j)
        return complex(self.column(j).get(i, 0j))

    # -- combinators --------------------------------------------------------
    @property
    def H(self) -> "Operator":
        return adjoint(self)

    def __matmul__(self, other: "Operator") -> "Operator":
        return compose(self, other)

    def __add__(self, other: "Operator") -> "Operator":
        return add(self, other)

    def __sub__(self, other: "Operator") -> "Operator":
        return add(self, scalar(-1.0, other))

    def __neg__(self) -> "Operator":
        return scalar(-1.0, self)

    def __mul__(self, c) -> "Operator":
        return scalar(c, self)

    __rmul__ = __mul__

    # -- structure ----------------------------------------------------------
    def children(self) -> tuple:
        return ()

    def key(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        return isinstance(other, Operator) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def to_json(self) -> dict:
        raise NotImplementedError

    def horizon(self) -> int:
        """Index displacement of one application, used for dirty-boundary tracking."""
        return max((c.horizon() for c in self.children()), default=0)

    def describe(self) -> str:
        return self.kind

    def __repr__(self) -> str:
        return self.describe()


class Identity(Operator):
    kind = "Identity"

    def __init__(self, space: IndexSet):
        self.domain = self.codomain = space

    def _fwd(self, d):
        return dict(d)

    _adj = _fwd

    def key(self):
        return ("I", self.domain)

    def to_json(self):
        return {"node": "Identity", "space": self.domain.to_json()}

    def describe(self):
        return "I"


class ZeroOp(Operator):
    kind = "ZeroOp"

    def __init__(self, domain: IndexSet, codomain: IndexSet | None = None):
        self.domain = domain
        self.codomain = domain if codomain is None else codomain

    def _fwd(self, d):
        return {}

    _adj = _fwd

    def key(self):
        return ("0", self.domain, self.codomain)

    def to_json(self):
        return {"node": "ZeroOp", "domain": self.domain.to_json(),
                "codomain": self.codomain.to_json()}

    def describe(self):
        return "0"


class ScalarMul(Operator):
    kind = "ScalarMul"

    def __init__(self, c, op: Operator):
        self.c = complex(c)
        self.op = op
        self.domain, self.codomain = op.domain, op.codomain

    def _fwd(self, d):
        return _scale(self.op._fwd(d), self.c)

    def _adj(self, d):
        return _scale(self.op._adj(d), self.c.conjugate())

    def children(self):
        return (self.op,)

    def key(self):
        return ("c", self.c, self.op.key())

    def to_json(self):
        return {"node": "ScalarMul", "c": _cval(self.c), "op": self.op.to_json()}

    def describe(self):
        c = self.c.real if self.c.imag == 0 else self.c
        return f"{c:g}·{self.op.describe()}"


class UnilateralShift(Operator):
    """``e_n -> weight(n) e_{n+1}`` on ``l2(Nat)``."""

    kind = "UnilateralShift"

    def __init__(self, weights: WeightSequence | float = 1.0):
        if not isinstance(weights, WeightSequence):
            weights = WeightSequence.constant(float(weights))
        self.weights = weights
        self.domain = self.codomain = Nat()

    def _fwd(self, d):
        w = self.weights.weight
        return {n + 1: w(n) * c for n, c in d.items()}

    def _adj(self, d):
        w = self.weights.weight
        return {n - 1: w(n - 1) * c for n, c in d.items() if n > 0}

    def key(self):
        return ("S", self.weights.key())

    def horizon(self):
        return 1

    def to_json(self):
        return {"node": "UnilateralShift", "weights": self.weights.to_json()}

    def describe(self):
        return f"Shift[{self.weights!r}]"


class BilateralShift(Operator):
    """``e_n -> theta e_{n+1}`` on ``l2(Int)``."""

    kind = "BilateralShift"

    def __init__(self, theta: float = 1.0):
        if theta <= 0:
            raise StructuralError("bilateral shift weight must be positive")
        self.theta = float(theta)
        self.domain = self.codomain = Int()

    def _fwd(self, d):
        t = self.theta
        return {n + 1: t * c for n, c in d.items()}

    def _adj(self, d):
        t = self.theta
        return {n - 1: t * c for n, c in d.items()}

    def key(self):
        return ("B", self.theta)

    def horizon(self):
        return 1

    def to_json(self):
        return {"node": "BilateralShift", "weight": self.theta}

    def describe(self):
        return f"BShift[{self.theta:g}]"


class Diagonal(Operator):
    """Diagonal operator ``e_i -> d(i) e_i``.

    ``d(i) = values.get(i, tail) * prod_f w_f(i - off_f) ** p_f`` where the
    optional weight factors ``(w, p, off)`` apply on ``Nat`` and vanish below
    their offset.
    """

    kind = "Diagonal"

    def __init__(self, space: IndexSet, values: dict | None = None, tail=0.0,
                 factors: tuple = ()):
        self.domain = self.codomain = space
        self.values = {i: complex(v) for i, v in (values or {}).items()}
        for i in self.values:
            space.check(i)
        self.tail = complex(tail)
        if factors and space != Nat():
            raise StructuralError("weight factors on a diagonal need a Nat space")
        self.factors = tuple((w, int(p), int(off)) for w, p, off in factors)

    @classmethod
    def constant(cls, space: IndexSet, c) -> "Diagonal":
        return cls(space, {}, c)

    @classmethod
    def from_list(cls, space: IndexSet, vals) -> "Diagonal":
        if space.size != len(vals):
            raise StructuralError("diagonal list length must match the space size")
        return cls(space, {space.unrank(r): v for r, v in enumerate(vals)}, 0.0)

    @classmethod
    def from_weights(cls, w: WeightSequence, power: int = 2, offset: int = 0) -> "Diagonal":
        return cls(Nat(), {}, 1.0, ((w, power, offset),))

    def d(self, i) -> complex:
        v = self.values.get(i, self.tail)
        for w, p, off in self.factors:
            if not v:
                break
            if i < off:
                return 0j
            v *= w.weight(i - off) ** p
        return v

    def _fwd(self, d):
        return {i: self.d(i) * c for i, c in d.items()}

    def _adj(self, d):
        return {i: self.d(i).conjugate() * c for i, c in d.items()}

    def is_real(self) -> bool:
        return self.tail.imag == 0 and all(v.imag == 0 for v in self.values.values())

    def sup_abs(self) -> float:
        if not self.factors:
            return max([abs(self.tail)] + [abs(v) for v in self.values.values()])
        horizon = max([w.horizon() + off for w, _, off in self.factors]
                      + [i + 1 for i in self.values] + [1])
        best = max(abs(self.d(i)) for i in range(horizon + 1))
        lim = abs(self.tail)
        for w, p, _ in self.factors:
            lim *= w.sup() ** p if p >= 0 else w.inf() ** p
        return max(best, lim)

    def inf_abs(self) -> float:
        if not self.factors:
            return min([abs(self.tail)] + [abs(v) for v in self.values.values()])
        horizon = max([w.horizon() + off for w, _, off in self.factors]
                      + [i + 1 for i in self.values] + [1])
        low = min(abs(self.d(i)) for i in range(horizon + 1))
        lim = abs(self.tail)
        for w, p, _ in self.factors:
            lim *= w.inf() ** p if p >= 0 else w.sup() ** p
        return min(low, lim)

    def point_values(self) -> list[complex] | None:
        """All distinct diagonal values when they form a finite set."""
        if self.factors:
            return None
        vals = set(self.values.values())
        if self.domain.size is None or len(self.values) < self.domain.size:
            vals.add(self.tail)
        return sorted(vals, key=lambda z: (abs(z), z.real, z.imag))

    def key(self):
        vals = tuple(sorted(((repr(i), v) for i, v in self.values.items())))
        return ("D", self.domain, vals, self.tail,
                tuple((w.key(), p, off) for w, p, off in self.factors))

    def to_json(self):
        if self.factors:
            return {"node": "Diagonal", "space": self.domain.to_json(), "tail": _cval(self.tail),
                    "values": [[index_to_json(i), _cval(v)] for i, v in self.values.items()],
                    "factors": [{"weights": w.to_json(), "power": p, "offset": off}
                                for w, p, off in self.factors]}
        return {"node": "Diagonal", "space": self.domain.to_json(), "tail": _cval(self.tail),
                "values": [[index_to_json(i), _cval(v)] for i, v in self.values.items()]}

    def describe(self):
        if not self.values and not self.factors:
            return f"diag({self.tail.real if self.tail.imag == 0 else self.tail:g})"
        return "diag(...)"


class DenseMatrix(Operator):
    """Explicit matrix between finite index sets (rows/cols in canonical rank order)."""

    kind = "DenseMatrix"

    def __init__(self, matrix, domain: IndexSet | None = None, codomain: IndexSet | None = None):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2:
            raise StructuralError("dense matrix must be two-dimensional")
        self.matrix = m
        self.domain = domain if domain is not None else Fin(m.shape[1])
        self.codomain = codomain if codomain is not None else Fin(m.shape[0])
        if self.domain.size != m.shape[1] or self.codomain.size != m.shape[0]:
            raise StructuralError("dense matrix shape does not match its spaces")

    def _fwd(self, d):
        if not d:
            return {}
        x = np.zeros(self.matrix.shape[1], dtype=complex)
        for j, c in d.items():
            x[self.domain.rank(j)] = c
        y = self.matrix @ x
        cod = self.codomain
        return {cod.unrank(r): complex(y[r]) for r in np.flatnonzero(y)}

    def _adj(self, d):
        if not d:
            return {}
        x = np.zeros(self.matrix.shape[0], dtype=complex)
        for i, c in d.items():
            x[self.codomain.rank(i)] = c
        y = self.matrix.conj().T @ x
        dom = self.domain
        return {dom.unrank(r): complex(y[r]) for r in np.flatnonzero(y)}

    def key(self):
        return ("M", self.domain, self.codomain, self.matrix.tobytes())

    def horizon(self):
        return max(self.matrix.shape)

    def to_json(self):
        m = self.matrix
        rows = [[_cval(x) for x in row] for row in m]
        return {"node": "DenseMatrix", "matrix": rows, "domain": self.domain.to_json(),
                "codomain": self.codomain.to_json()}

    def describe(self):
        return f"Dense{self.matrix.shape}"


class Adjoint(Operator):
    kind = "Adjoint"

    def __init__(self, op: Operator):
        self.op = op
        self.domain, self.codomain = op.codomain, op.domain

    def _fwd(self, d):
        return self.op._adj(d)

    def _adj(self, d):
        return self.op._fwd(d)

    def children(self):
        return (self.op,)

    def key(self):
        return ("*", self.op.key())

    def to_json(self):
        return {"node": "Adjoint", "op": self.op.to_json()}

    def describe(self):
        return f"({self.op.describe()})*"


class Compose(Operator):
    """``A ∘ B``: apply ``B`` first."""

    kind = "Compose"

    def __init__(self, a: Operator, b: Operator):
        if b.codomain != a.domain:
            raise StructuralError(
                f"cannot compose: codomain {b.codomain} of the right factor differs from "
                f"domain {a.domain} of the left factor")
        self.a, self.b = a, b
        self.domain, self.codomain = b.domain, a.codomain

    def _fwd(self, d):
        return self.a._fwd(self.b._fwd(d))

    def _adj(self, d):
        return self.b._adj(self.a._adj(d))

    def children(self):
        return (self.a, self.b)

    def horizon(self):
        return self.a.horizon() + self.b.horizon()

    def key(self):
        return ("∘", self.a.key(), self.b.key())

    def to_json(self):
        return {"node": "Compose", "a": self.a.to_json(), "b": self.b.to_json()}

    def describe(self):
        return f"{self.a.describe()}∘{self.b.describe()}"


class Add(Operator):
    kind = "Add"

    def __init__(self, a: Operator, b: Operator):
        if a.domain != b.domain or a.codomain != b.codomain:
            raise StructuralError(
                f"cannot add {a.domain}->{a.codomain} and {b.domain}->{b.codomain}")
        self.a, self.b = a, b
        self.domain, self.codomain = a.domain, a.codomain

    def _fwd(self, d):
        out = self.a._fwd(d)
        for i, c in self.b._fwd(d).items():
            _acc(out, i, c)
        return out

    def _adj(self, d):
        out = self.a._adj(d)
        for i, c in self.b._adj(d).items():
            _acc(out, i, c)
        return out

    def children(self):
        return (self.a, self.b)

    def key(self):
        return ("+", self.a.key(), self.b.key())

    def to_json(self):
        return {"node": "Add", "a": self.a.to_json(), "b": self.b.to_json()}

    def describe(self):
        return f"({self.a.describe()} + {self.b.describe()})"


def _split(d: dict) -> tuple[dict, dict]:
    left, right = {}, {}
    for (tag, sub), c in d.items():
        (left if tag == "L" else right)[sub] = c
    return left, right


def _tag(d: dict, tag: str) -> dict:
    return {(tag, i): c for i, c in d.items()}


class DirectSum(Operator):
    kind = "DirectSum"

    def __init__(self, a: Operator, b: Operator):
        self.a, self.b = a, b
        self.domain = DisjointUnion(a.domain, b.domain)
        self.codomain = DisjointUnion(a.codomain, b.codomain)

    def _fwd(self, d):
        left, right = _split(d)
        out = _tag(self.a._fwd(left), "L") if left else {}
        if right:
            out.update(_tag(self.b._fwd(right), "R"))
        return out

    def _adj(self, d):
        left, right = _split(d)
        out = _tag(self.a._adj(left), "L") if left else {}
        if right:
            out.update(_tag(self.b._adj(right), "R"))
        return out

    def children(self):
        return (self.a, self.b)

    def key(self):
        return ("⊕", self.a.key(), self.b.key())

    def to_json(self):
        return {"node": "DirectSum", "a": self.a.to_json(), "b": self.b.to_json()}

    def describe(self):
        return f"({self.a.describe()} ⊕ {self.b.describe()})"


class BlockMatrix(Operator):
    """``[[A11, A12], [A21, A22]]`` from ``H1 ⊕ H2`` to ``K1 ⊕ K2``."""

    kind = "BlockMatrix"

    def __init__(self, a11: Operator, a12: Operator, a21: Operator, a22: Operator):
        if a11.domain != a21.domain or a12.domain != a22.domain:
            raise StructuralError("block columns must share domains")
        if a11.codomain != a12.codomain or a21.codomain != a22.codomain:
            raise StructuralError("block rows must share codomains")
        self.blocks = (a11, a12, a21, a22)
        self.domain = DisjointUnion(a11.domain, a12.domain)
        self.codomain = DisjointUnion(a11.codomain, a21.codomain)

    def _fwd(self, d):
        a11, a12, a21, a22 = self.blocks
        f, g = _split(d)
        top, bot = {}, {}
        for op, src, dst in ((a11, f, top), (a12, g, top), (a21, f, bot), (a22, g, bot)):
            if src and not isinstance(op, ZeroOp):
                for i, c in op._fwd(src).items():
                    _acc(dst, i, c)
        out = _tag(top, "L")
        out.update(_tag(bot, "R"))
        return out

    def _adj(self, d):
        a11, a12, a21, a22 = self.blocks
        f, g = _split(d)
        left, right = {}, {}
        for op, src, dst in ((a11, f, left), (a21, g, left), (a12, f, right), (a22, g, right)):
            if src and not isinstance(op, ZeroOp):
                for i, c in op._adj(src).items():
                    _acc(dst, i, c)
        out = _tag(left, "L")
        out.update(_tag(right, "R"))
        return out

    def children(self):
        return self.blocks

    def key(self):
        return ("[]",) + tuple(b.key() for b in self.blocks)

    def to_json(self):
        return {"node": "BlockMatrix", "blocks": [b.to_json() for b in self.blocks]}

    def describe(self):
        return "[" + "; ".join(b.describe() for b in self.blocks) + "]"


class Tensor(Operator):
    """``A ⊗ B`` on product index sets."""

    kind = "Tensor"

    def __init__(self, a: Operator, b: Operator):
        self.a, self.b = a, b
        self.domain = Product(a.domain, b.domain)
        self.codomain = Product(a.codomain, b.codomain)

    def _act(self, d, fa, fb):
        groups: dict = {}
        for (i, j), c in d.items():
            groups.setdefault(i, {})[j] = c
        out: dict = {}
        for i, row in groups.items():
            ai = fa({i: 1.0})
            if not ai:
                continue
            bj = fb(row)
            for k, x in ai.items():
                for l, y in bj.items():
                    _acc(out, (k, l), x * y)
        return out

    def _fwd(self, d):
        return self._act(d, self.a._fwd, self.b._fwd)

    def _adj(self, d):
        return self._act(d, self.a._adj, self.b._adj)

    def children(self):
        return (self.a, self.b)

    def key(self):
        return ("⊗", self.a.key(), self.b.key())

    def to_json(self):
        return {"node": "Tensor", "a": self.a.to_json(), "b": self.b.to_json()}

    def describe(self):
        return f"({self.a.describe()} ⊗ {self.b.describe()})"


class Inclusion(Operator):
    """Isometry ``e_i -> e_{map(i)}`` induced by an injective index map."""

    kind = "Inclusion"

    def __init__(self, imap: IndexMap):
        self.map = imap
        self.domain, self.codomain = imap.domain, imap.codomain

    def _fwd(self, d):
        m = self.map
        return {m(i): c for i, c in d.items()}

    def _adj(self, d):
        out = {}
        pre = self.map.preimage
        for k, c in d.items():
            j = pre(k)
            if j is not None:
                out[j] = c
        return out

    def horizon(self):
        return 1

    def key(self):
        return ("ι", self.map.key())

    def to_json(self):
        return {"node": "Inclusion", "map": self.map.to_json()}

    def describe(self):
        return f"ι[{self.domain}→{self.codomain}]"


class Embedding(Operator):
    """Operator given by explicit finitely supported columns.

    ``column(j)`` returns the image of ``e_j`` as a dict; ``row(k)`` returns
    the image of ``e_k`` under the adjoint.  ``rule`` names the generating
    recipe for serialization.
    """

    kind = "Embedding"

    def __init__(self, domain: IndexSet, codomain: IndexSet, column: Callable,
                 row: Callable, rule: str, isometric: bool = False):
        self.domain, self.codomain = domain, codomain
        self._column = column
        self._row = row
        self.rule = rule
        self.isometric = isometric

    def _fwd(self, d):
        out: dict = {}
        for j, c in d.items():
            for i, x in self._column(j).items():
                _acc(out, i, x * c)
        return out

    def _adj(self, d):
        out: dict = {}
        for k, c in d.items():
            for j, x in self._row(k).items():
                _acc(out, j, x * c)
        return out

    def horizon(self):
        return 1

    def key(self):
        return ("J", self.rule, id(self))

    def to_json(self, radius: int = 8):
        cols = []
        for j in self.domain.window(radius):
            col = self._column(j)
            cols.append([index_to_json(j),
                         [[index_to_json(i), _cval(x)] for i, x in
                          sorted(col.items(), key=lambda kv: self.codomain.rank(kv[0]))]])
        return {"node": "Embedding", "rule": self.rule, "isometric": self.isometric,
                "domain": self.domain.to_json(), "codomain": self.codomain.to_json(),
                "window_columns": cols}

    def describe(self):
        return f"J[{self.rule}]"


# ---------------------------------------------------------------------------
# combinators with light normalization


def adjoint(op: Operator) -> Operator:
    if isinstance(op, Adjoint):
        return op.op
    if isinstance(op, Identity):
        return op
    if isinstance(op, ZeroOp):
        return ZeroOp(op.codomain, op.domain)
    return Adjoint(op)


def compose(*ops: Operator) -> Operator:
    if not ops:
        raise StructuralError("compose needs at least one operator")
    out = ops[-1]
    for op in reversed(ops[:-1]):
        if isinstance(out, Identity):
            if out.domain != op.domain:
                raise StructuralError(f"cannot compose: {out.codomain} vs {op.domain}")
            out = op
        elif isinstance(op, Identity):
            if op.domain != out.codomain:
                raise StructuralError(f"cannot compose: {out.codomain} vs {op.domain}")
        else:
            out = Compose(op, out)
    return out


def add(*ops: Operator) -> Operator:
    out = ops[0]
    for op in ops[1:]:
        out = Add(out, op)
    return out


def scalar(c, op: Operator) -> Operator:
    c = complex(c)
    if c == 1:
        return op
    if isinstance(op, ScalarMul):
        return scalar(c * op.c, op.op)
    return ScalarMul(c, op)


def direct_sum(*ops: Operator) -> Operator:
    out = ops[-1]
    for op in reversed(ops[:-1]):
        out = DirectSum(op, out)
    return out


def tensor(a: Operator, b: Operator) -> Operator:
    return Tensor(a, b)


def inclusion(imap: IndexMap) -> Operator:
    return Inclusion(imap)


def power(op: Operator, n: int) -> Operator:
    if op.domain != op.codomain:
        raise StructuralError("powers need an endomorphism")
    if n == 0:
        return Identity(op.domain)
    return compose(*([op] * n))


def is_zero_node(op: Operator) -> bool:
    return isinstance(op, ZeroOp) or (isinstance(op, ScalarMul) and op.c == 0)


def shift(theta: float = 1.0) -> UnilateralShift:
    return UnilateralShift(WeightSequence.constant(theta))
