"""Structural rewriting of operator trees.

Pushes adjoints to the leaves, pulls scalars out, multiplies block/direct
sum/tensor structures componentwise and applies the shift and inclusion
identities that make norms of expressions such as ``T*T - I`` computable.
"""
from __future__ import annotations

import numpy as np

from .indexsets import DisjointUnion, Product, TagMap
from .operators import (Add, Adjoint, BilateralShift, BlockMatrix, Compose, DenseMatrix,
                        Diagonal, DirectSum, Embedding, Identity, Inclusion, Operator,
                        ScalarMul, Tensor, UnilateralShift, ZeroOp, compose, scalar)

MAX_DISTRIBUTE = 64


def scalar_identity_value(op: Operator) -> complex | None:
    """``c`` when ``op`` is structurally ``c * I``, else ``None``."""
    if isinstance(op, Identity):
        return 1.0
    if isinstance(op, ZeroOp):
        return 0.0 if op.domain == op.codomain else None
    if isinstance(op, ScalarMul):
        inner = scalar_identity_value(op.op)
        return None if inner is None else op.c * inner
    if isinstance(op, Diagonal):
        return op.tail if not op.values and not op.factors else None
    if isinstance(op, DirectSum):
        a, b = scalar_identity_value(op.a), scalar_identity_value(op.b)
        return a if a is not None and a == b else None
    if isinstance(op, Tensor):
        a, b = scalar_identity_value(op.a), scalar_identity_value(op.b)
        return None if a is None or b is None else a * b
    return None


def _sid(space, c) -> Operator:
    if c == 0:
        return ZeroOp(space)
    return scalar(c, Identity(space))


def _strip(op: Operator) -> tuple[complex, Operator]:
    c = 1.0
    while isinstance(op, ScalarMul):
        c *= op.c
        op = op.op
    return c, op


def _is_zero(op: Operator) -> bool:
    return isinstance(op, ZeroOp)


def simplify(op: Operator) -> Operator:
    if isinstance(op, (Identity, ZeroOp, UnilateralShift, BilateralShift, Inclusion,
                       Embedding, DenseMatrix)):
        return op
    if isinstance(op, Diagonal):
        op = _fold_constant_factors(op)
        if not op.values and not op.factors:
            return _sid(op.domain, op.tail)
        return op
    if isinstance(op, ScalarMul):
        inner = simplify(op.op)
        if op.c == 0 or _is_zero(inner):
            return ZeroOp(op.domain, op.codomain)
        c, core = _strip(inner)
        return scalar(op.c * c, core)
    if isinstance(op, Adjoint):
        return _push_adjoint(simplify(op.op))
    if isinstance(op, Compose):
        return _simplify_compose(op)
    if isinstance(op, Add):
        return _simplify_add(op)
    if isinstance(op, DirectSum):
        return _make_direct_sum(simplify(op.a), simplify(op.b))
    if isinstance(op, Tensor):
        return _make_tensor(simplify(op.a), simplify(op.b))
    if isinstance(op, BlockMatrix):
        return _make_block(*(simplify(b) for b in op.blocks))
    return op


def _fold_constant_factors(op: Diagonal) -> Diagonal:
    """Multiply constant weight factors without offset into the values."""
    keep, c = [], 1.0
    for w, p, off in op.factors:
        if off == 0 and w.measure is None and w.is_constant():
            c *= w.tail ** p
        else:
            keep.append((w, p, off))
    if len(keep) == len(op.factors):
        return op
    return Diagonal(op.domain, {i: c * v for i, v in op.values.items()}, c * op.tail,
                    tuple(keep))


def _push_adjoint(op: Operator) -> Operator:
    if isinstance(op, Identity):
        return op
    if isinstance(op, ZeroOp):
        return ZeroOp(op.codomain, op.domain)
    if isinstance(op, ScalarMul):
        return scalar(op.c.conjugate(), _push_adjoint(op.op))
    if isinstance(op, Adjoint):
        return op.op
    if isinstance(op, Compose):
        return _simplify_compose(Compose(_push_adjoint(op.b), _push_adjoint(op.a)))
    if isinstance(op, Add):
        return _simplify_add(Add(_push_adjoint(op.a), _push_adjoint(op.b)))
    if isinstance(op, DirectSum):
        return _make_direct_sum(_push_adjoint(op.a), _push_adjoint(op.b))
    if isinstance(op, Tensor):
        return _make_tensor(_push_adjoint(op.a), _push_adjoint(op.b))
    if isinstance(op, BlockMatrix):
        a11, a12, a21, a22 = op.blocks
        return _make_block(_push_adjoint(a11), _push_adjoint(a21),
                           _push_adjoint(a12), _push_adjoint(a22))
    if isinstance(op, Diagonal):
        if op.is_real():
            return op
        return Diagonal(op.domain, {i: v.conjugate() for i, v in op.values.items()},
                        op.tail.conjugate(), op.factors)
    if isinstance(op, DenseMatrix):
        return DenseMatrix(op.matrix.conj().T, op.codomain, op.domain)
    return Adjoint(op)


# -- direct sums, tensors, blocks ------------------------------------------------


def _make_direct_sum(a: Operator, b: Operator) -> Operator:
    dom = DisjointUnion(a.domain, b.domain)
    cod = DisjointUnion(a.codomain, b.codomain)
    if _is_zero(a) and _is_zero(b):
        return ZeroOp(dom, cod)
    ca, cb = scalar_identity_value(a), scalar_identity_value(b)
    if ca is not None and ca == cb:
        return _sid(dom, ca)
    return DirectSum(a, b)


def _make_tensor(a: Operator, b: Operator) -> Operator:
    dom = Product(a.domain, b.domain)
    cod = Product(a.codomain, b.codomain)
    if _is_zero(a) or _is_zero(b):
        return ZeroOp(dom, cod)
    ca, core_a = _strip(a)
    cb, core_b = _strip(b)
    c = ca * cb
    if isinstance(core_a, Identity) and isinstance(core_b, Identity):
        return _sid(dom, c)
    return scalar(c, Tensor(core_a, core_b))


def _make_block(a11, a12, a21, a22) -> Operator:
    if _is_zero(a12) and _is_zero(a21):
        return _make_direct_sum(a11, a22)
    return BlockMatrix(a11, a12, a21, a22)


def _as_block(op: Operator) -> BlockMatrix | None:
    if isinstance(op, BlockMatrix):
        return op
    if isinstance(op, DirectSum):
        return BlockMatrix(op.a, ZeroOp(op.b.domain, op.a.codomain),
                           ZeroOp(op.a.domain, op.b.codomain), op.b)
    if (isinstance(op.domain, DisjointUnion) and op.domain == op.codomain):
        c = scalar_identity_value(op)
        if c is not None:
            return BlockMatrix(_sid(op.domain.left, c), ZeroOp(op.domain.right, op.domain.left),
                               ZeroOp(op.domain.left, op.domain.right), _sid(op.domain.right, c))
    return None


def _as_direct_sum(op: Operator) -> DirectSum | None:
    if isinstance(op, DirectSum):
        return op
    if isinstance(op.domain, DisjointUnion) and op.domain == op.codomain:
        c = scalar_identity_value(op)
        if c is not None:
            return DirectSum(_sid(op.domain.left, c), _sid(op.domain.right, c))
    return None


def _as_tensor(op: Operator) -> Tensor | None:
    if isinstance(op, Tensor):
        return op
    if isinstance(op.domain, Product) and op.domain == op.codomain:
        c = scalar_identity_value(op)
        if c is not None:
            return Tensor(_sid(op.domain.a, c), Identity(op.domain.b))
    return None


# -- composition --------------------------------------------------------------


def _flatten_compose(op: Operator) -> list[Operator]:
    if isinstance(op, Compose):
        return _flatten_compose(op.a) + _flatten_compose(op.b)
    return [op]


def _same_map(f: Inclusion, g: Inclusion) -> bool:
    return f.map.key() == g.map.key()


def _pair(x: Operator, y: Operator) -> Operator | None:
    """Rewrite ``x ∘ y`` or return ``None``."""
    if isinstance(x, Adjoint) and isinstance(y, UnilateralShift) and x.op == y:
        return Diagonal.from_weights(y.weights, 2, 0)
    if isinstance(x, UnilateralShift) and isinstance(y, Adjoint) and y.op == x:
        return Diagonal.from_weights(x.weights, 2, 1)
    if isinstance(x, Adjoint) and isinstance(y, BilateralShift) and x.op == y:
        return _sid(y.domain, y.theta ** 2)
    if isinstance(x, BilateralShift) and isinstance(y, Adjoint) and y.op == x:
        return _sid(x.domain, x.theta ** 2)
    if isinstance(x, Adjoint) and isinstance(x.op, Inclusion) and isinstance(y, Inclusion):
        if _same_map(x.op, y):
            return Identity(y.domain)
        if x.op.map.image_disjoint(y.map) is True:
            return ZeroOp(y.domain, x.codomain)
    if isinstance(x, Adjoint) and isinstance(x.op, Embedding) and x.op is y and y.isometric:
        return Identity(y.domain)
    if isinstance(x, Diagonal) and isinstance(y, Diagonal) and x.domain == y.domain:
        keys = set(x.values) | set(y.values)
        vals = {i: x.values.get(i, x.tail) * y.values.get(i, y.tail) for i in keys}
        return Diagonal(x.domain, vals, x.tail * y.tail, x.factors + y.factors)
    if isinstance(x, DenseMatrix) and isinstance(y, DenseMatrix):
        return DenseMatrix(x.matrix @ y.matrix, y.domain, x.codomain)
    if isinstance(x, Tensor) and isinstance(y, Tensor):
        return _make_tensor(compose(x.a, y.a), compose(x.b, y.b))
    if isinstance(x, DirectSum) and isinstance(y, DirectSum):
        return _make_direct_sum(compose(x.a, y.a), compose(x.b, y.b))
    if isinstance(x, (BlockMatrix, DirectSum)) and isinstance(y, (BlockMatrix, DirectSum)):
        bx, by = _as_block(x), _as_block(y)
        a11, a12, a21, a22 = bx.blocks
        b11, b12, b21, b22 = by.blocks
        return _make_block(Add(compose(a11, b11), compose(a12, b21)),
                           Add(compose(a11, b12), compose(a12, b22)),
                           Add(compose(a21, b11), compose(a22, b21)),
                           Add(compose(a21, b12), compose(a22, b22)))
    # tag inclusions against direct sums and blocks
    if isinstance(y, Inclusion) and isinstance(y.map, TagMap):
        side = y.map.side
        if isinstance(x, DirectSum):
            part = x.a if side == "L" else x.b
            return compose(Inclusion(TagMap(x.codomain, side)), part)
        if isinstance(x, BlockMatrix):
            a11, a12, a21, a22 = x.blocks
            top, bot = (a11, a21) if side == "L" else (a12, a22)
            return Add(compose(Inclusion(TagMap(x.codomain, "L")), top),
                       compose(Inclusion(TagMap(x.codomain, "R")), bot))
    if isinstance(x, Adjoint) and isinstance(x.op, Inclusion) and isinstance(x.op.map, TagMap):
        side = x.op.map.side
        if isinstance(y, DirectSum):
            part = y.a if side == "L" else y.b
            return compose(part, Adjoint(Inclusion(TagMap(y.domain, side))))
        if isinstance(y, BlockMatrix):
            a11, a12, a21, a22 = y.blocks
            left, right = (a11, a12) if side == "L" else (a21, a22)
            return Add(compose(left, Adjoint(Inclusion(TagMap(y.domain, "L")))),
                       compose(right, Adjoint(Inclusion(TagMap(y.domain, "R")))))
    return None


def _simplify_compose(op: Compose) -> Operator:
    dom, cod = op.domain, op.codomain
    coeff: complex = 1.0
    fs: list[Operator] = []
    for f in _flatten_compose(op):
        c, core = _strip(simplify(f))
        coeff *= c
        if isinstance(core, ZeroOp) or coeff == 0:
            return ZeroOp(dom, cod)
        fs.extend(x for x in _flatten_compose(core) if not isinstance(x, Identity))
    changed = True
    while changed:
        changed = False
        for i in range(len(fs) - 1):
            r = _pair(fs[i], fs[i + 1])
            if r is None:
                continue
            c, core = _strip(simplify(r))
            coeff *= c
            if isinstance(core, ZeroOp) or coeff == 0:
                return ZeroOp(dom, cod)
            fs[i:i + 2] = [x for x in _flatten_compose(core) if not isinstance(x, Identity)]
            changed = True
            break
    for i, f in enumerate(fs):
        if isinstance(f, Add):
            terms = _flatten_add(f)
            if len(terms) <= MAX_DISTRIBUTE:
                parts = [compose(*(fs[:i] + [t] + fs[i + 1:])) for t in terms]
                out = parts[0]
                for p in parts[1:]:
                    out = Add(out, p)
                return simplify(scalar(coeff, out))
    if not fs:
        return _sid(dom, coeff)
    return scalar(coeff, compose(*fs))


# -- addition -----------------------------------------------------------------


def _flatten_add(op: Operator) -> list[Operator]:
    if isinstance(op, Add):
        return _flatten_add(op.a) + _flatten_add(op.b)
    return [op]


def _try_add(x: Operator, y: Operator) -> Operator | None:
    cx, cy = scalar_identity_value(x), scalar_identity_value(y)
    if cx is not None and cy is not None:
        return _sid(x.domain, cx + cy)
    sx, core_x = _strip(x)
    sy, core_y = _strip(y)
    if core_x == core_y:
        return scalar(sx + sy, core_x) if sx + sy != 0 else ZeroOp(x.domain, x.codomain)
    dx = core_x if isinstance(core_x, Diagonal) else None
    dy = core_y if isinstance(core_y, Diagonal) else None
    if dx is None and cx is not None and isinstance(core_y, Diagonal):
        dx, sx = Diagonal(x.domain, {}, cx), 1.0
    if dy is None and cy is not None and isinstance(core_x, Diagonal):
        dy, sy = Diagonal(y.domain, {}, cy), 1.0
    if dx is not None and dy is not None:
        if not dx.factors and not dy.factors:
            keys = set(dx.values) | set(dy.values)
            vals = {i: sx * dx.values.get(i, dx.tail) + sy * dy.values.get(i, dy.tail)
                    for i in keys}
            return Diagonal(x.domain, vals, sx * dx.tail + sy * dy.tail)
        if dx.factors == dy.factors and not dx.values and not dy.values:
            return Diagonal(x.domain, {}, sx * dx.tail + sy * dy.tail, dx.factors)
        return None
    if isinstance(core_x, DenseMatrix) and isinstance(core_y, DenseMatrix):
        return DenseMatrix(sx * core_x.matrix + sy * core_y.matrix, x.domain, x.codomain)
    if isinstance(core_x, DenseMatrix) and cy is not None:
        return DenseMatrix(sx * core_x.matrix + cy * np.eye(core_x.matrix.shape[0]),
                           x.domain, x.codomain)
    if isinstance(core_y, DenseMatrix) and cx is not None:
        return DenseMatrix(sy * core_y.matrix + cx * np.eye(core_y.matrix.shape[0]),
                           x.domain, x.codomain)
    if isinstance(x.domain, DisjointUnion) and isinstance(x.codomain, DisjointUnion):
        if isinstance(core_x, BlockMatrix) or isinstance(core_y, BlockMatrix):
            bx, by = _as_block(core_x), _as_block(core_y)
            if bx is not None and by is not None:
                return _make_block(*(Add(scalar(sx, p), scalar(sy, q))
                                     for p, q in zip(bx.blocks, by.blocks)))
        if isinstance(core_x, DirectSum) or isinstance(core_y, DirectSum):
            ax, ay = _as_direct_sum(core_x), _as_direct_sum(core_y)
            if ax is not None and ay is not None:
                return _make_direct_sum(Add(scalar(sx, ax.a), scalar(sy, ay.a)),
                                        Add(scalar(sx, ax.b), scalar(sy, ay.b)))
    if isinstance(x.domain, Product) and (isinstance(core_x, Tensor) or isinstance(core_y, Tensor)):
        tx, ty = _as_tensor(core_x), _as_tensor(core_y)
        if tx is not None and ty is not None:
            if simplify(tx.a) == simplify(ty.a):
                return _make_tensor(tx.a, Add(scalar(sx, tx.b), scalar(sy, ty.b)))
            if simplify(tx.b) == simplify(ty.b):
                return _make_tensor(Add(scalar(sx, tx.a), scalar(sy, ty.a)), tx.b)
            # c*I against a tensor whose left factor is an identity
            if scalar_identity_value(core_x) is not None and isinstance(ty.a, Identity):
                return _make_tensor(ty.a, Add(_sid(ty.b.domain, sx * scalar_identity_value(core_x)),
                                              scalar(sy, ty.b)))
            if scalar_identity_value(core_y) is not None and isinstance(tx.a, Identity):
                return _make_tensor(tx.a, Add(scalar(sx, tx.b),
                                              _sid(tx.b.domain, sy * scalar_identity_value(core_y))))
    return None


def _simplify_add(op: Add) -> Operator:
    dom, cod = op.domain, op.codomain
    terms = []
    for t in _flatten_add(op):
        s = simplify(t)
        if isinstance(s, Add):
            terms.extend(_flatten_add(s))
        elif not _is_zero(s):
            terms.append(s)
    changed = True
    while changed:
        changed = False
        for i in range(len(terms)):
            for j in range(i + 1, len(terms)):
                r = _try_add(terms[i], terms[j])
                if r is None:
                    continue
                r = simplify(r)
                rest = [t for k, t in enumerate(terms) if k not in (i, j)]
                if not _is_zero(r):
                    rest.insert(i, r)
                terms = rest
                changed = True
                break
            if changed:
                break
    if not terms:
        return ZeroOp(dom, cod)
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out
