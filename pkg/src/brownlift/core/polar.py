"""Polar decomposition and positive square roots for supported operator forms."""
from __future__ import annotations

import math

import numpy as np

from .indexsets import StructuralError, TagMap
from .operators import (Adjoint, BilateralShift, Compose, DenseMatrix, Diagonal, DirectSum,
                        Embedding, Identity, Inclusion, Operator, ScalarMul, Tensor,
                        UnilateralShift, ZeroOp, compose, scalar)
from .simplify import _flatten_compose, scalar_identity_value, simplify


class UnsupportedForm(StructuralError):
    """The operator is outside the structurally supported catalog."""


def is_structural_isometry(op: Operator) -> bool:
    if isinstance(op, (Identity, Inclusion)):
        return True
    if isinstance(op, Embedding):
        return op.isometric
    if isinstance(op, UnilateralShift):
        return op.weights.is_constant() and op.weights.sup() == 1.0
    if isinstance(op, BilateralShift):
        return op.theta == 1.0
    if isinstance(op, Adjoint):
        return is_structural_unitary(op.op)
    if isinstance(op, ScalarMul):
        return abs(abs(op.c) - 1.0) < 1e-15 and is_structural_isometry(op.op)
    if isinstance(op, Compose):
        return is_structural_isometry(op.a) and is_structural_isometry(op.b)
    if isinstance(op, (DirectSum, Tensor)):
        return is_structural_isometry(op.a) and is_structural_isometry(op.b)
    if isinstance(op, Diagonal):
        return op.point_values() is not None and all(abs(abs(v) - 1) < 1e-15
                                                     for v in op.point_values())
    if isinstance(op, DenseMatrix):
        m = op.matrix
        return m.shape[0] >= m.shape[1] and np.allclose(m.conj().T @ m, np.eye(m.shape[1]),
                                                        atol=1e-13)
    return False


def is_structural_unitary(op: Operator) -> bool:
    if isinstance(op, Identity):
        return True
    if isinstance(op, BilateralShift):
        return op.theta == 1.0
    if isinstance(op, Adjoint):
        return is_structural_unitary(op.op)
    if isinstance(op, ScalarMul):
        return abs(abs(op.c) - 1.0) < 1e-15 and is_structural_unitary(op.op)
    if isinstance(op, (Compose, DirectSum, Tensor)):
        return is_structural_unitary(op.a) and is_structural_unitary(op.b)
    if isinstance(op, Diagonal):
        return is_structural_isometry(op)
    if isinstance(op, DenseMatrix):
        m = op.matrix
        return m.shape[0] == m.shape[1] and is_structural_isometry(op)
    return False


def is_positive_form(op: Operator, tol: float = 1e-12) -> bool:
    c = scalar_identity_value(op)
    if c is not None:
        return abs(c.imag if isinstance(c, complex) else 0.0) <= tol and c.real >= -tol
    if isinstance(op, ZeroOp):
        return op.domain == op.codomain
    if isinstance(op, ScalarMul):
        return abs(op.c.imag) <= tol and op.c.real >= 0 and is_positive_form(op.op, tol)
    if isinstance(op, Diagonal):
        if not op.is_real():
            return False
        if op.tail.real < -tol or any(v.real < -tol for v in op.values.values()):
            return False
        return all(p % 2 == 0 for _, p, _ in op.factors)
    if isinstance(op, (DirectSum, Tensor)):
        return is_positive_form(op.a, tol) and is_positive_form(op.b, tol)
    if isinstance(op, DenseMatrix):
        m = op.matrix
        if m.shape[0] != m.shape[1] or not np.allclose(m, m.conj().T, atol=tol):
            return False
        return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0]) >= -1e-9
    return False


def positive_sqrt(op: Operator) -> Operator:
    """Square root of a structurally positive form."""
    s = simplify(op)
    if not is_positive_form(s):
        raise UnsupportedForm(f"unsupported positive form: {s.describe()}")
    return _sqrt(s)


def _sqrt(op: Operator) -> Operator:
    c = scalar_identity_value(op)
    if c is not None:
        r = math.sqrt(max(complex(c).real, 0.0))
        return ZeroOp(op.domain) if r == 0 else scalar(r, Identity(op.domain))
    if isinstance(op, ZeroOp):
        return op
    if isinstance(op, ScalarMul):
        return scalar(math.sqrt(op.c.real), _sqrt(op.op))
    if isinstance(op, Diagonal):
        if any(p % 2 for _, p, _ in op.factors):
            raise UnsupportedForm("odd weight power under a square root")
        return Diagonal(op.domain, {i: math.sqrt(max(v.real, 0.0)) for i, v in op.values.items()},
                        math.sqrt(max(op.tail.real, 0.0)),
                        tuple((w, p // 2, off) for w, p, off in op.factors))
    if isinstance(op, DirectSum):
        return DirectSum(_sqrt(op.a), _sqrt(op.b))
    if isinstance(op, Tensor):
        return Tensor(_sqrt(op.a), _sqrt(op.b))
    if isinstance(op, DenseMatrix):
        m = (op.matrix + op.matrix.conj().T) / 2
        ev, vec = np.linalg.eigh(m)
        root = (vec * np.sqrt(np.clip(ev, 0, None))) @ vec.conj().T
        return DenseMatrix(root, op.domain, op.codomain)
    raise UnsupportedForm(f"unsupported positive form: {op.describe()}")


def support_projection(op: Operator) -> Operator:
    """Projection onto the closure of the range of a positive form."""
    c = scalar_identity_value(op)
    if c is not None:
        return ZeroOp(op.domain) if abs(c) == 0 else Identity(op.domain)
    if isinstance(op, ZeroOp):
        return op
    if isinstance(op, ScalarMul):
        return support_projection(op.op) if op.c != 0 else ZeroOp(op.domain)
    if isinstance(op, Diagonal):
        vals = {i: (1.0 if v != 0 else 0.0) for i, v in op.values.items()}
        if op.factors:
            # weight factors are positive past their offsets
            offs = max(off for _, _, off in op.factors)
            for i in range(offs):
                vals[i] = 0.0
        return Diagonal(op.domain, vals, 1.0 if op.tail != 0 else 0.0)
    if isinstance(op, DirectSum):
        return DirectSum(support_projection(op.a), support_projection(op.b))
    if isinstance(op, Tensor):
        return Tensor(support_projection(op.a), support_projection(op.b))
    if isinstance(op, DenseMatrix):
        m = (op.matrix + op.matrix.conj().T) / 2
        ev, vec = np.linalg.eigh(m)
        keep = vec[:, ev > 1e-12 * max(1.0, float(np.abs(ev).max(initial=0.0)))]
        return DenseMatrix(keep @ keep.conj().T, op.domain, op.codomain)
    raise UnsupportedForm(f"unsupported positive form: {op.describe()}")


def polar_and_modulus(E: Operator) -> tuple[Operator, Operator]:
    """``(U, |E|)`` with ``E = U |E|`` and ``U`` isometric on the closure of ``ran |E|``."""
    return _polar(simplify(E))


def _polar(E: Operator) -> tuple[Operator, Operator]:
    if isinstance(E, ZeroOp):
        return ZeroOp(E.domain, E.codomain), ZeroOp(E.domain)
    if is_structural_isometry(E):
        return E, Identity(E.domain)
    if isinstance(E, ScalarMul):
        u, m = _polar(E.op)
        phase = E.c / abs(E.c)
        return scalar(phase, u), simplify(scalar(abs(E.c), m))
    if is_positive_form(E):
        return support_projection(E), E
    if isinstance(E, Adjoint) and isinstance(E.op, Inclusion) and isinstance(E.op.map, TagMap):
        # co-isometry onto one summand: the modulus is the block projection
        du = E.op.map.codomain
        left = E.op.map.side == "L"
        proj = DirectSum(Identity(du.left) if left else ZeroOp(du.left),
                         ZeroOp(du.right) if left else Identity(du.right))
        return E, proj
    if isinstance(E, Diagonal) and not E.factors:
        phases = {i: (v / abs(v) if v else 0.0) for i, v in E.values.items()}
        tail = E.tail / abs(E.tail) if E.tail else 0.0
        mods = {i: abs(v) for i, v in E.values.items()}
        return Diagonal(E.domain, phases, tail), Diagonal(E.domain, mods, abs(E.tail))
    if isinstance(E, DirectSum):
        ua, ma = _polar(E.a)
        ub, mb = _polar(E.b)
        return DirectSum(ua, ub), DirectSum(ma, mb)
    if isinstance(E, Tensor):
        ua, ma = _polar(E.a)
        ub, mb = _polar(E.b)
        return Tensor(ua, ub), simplify(Tensor(ma, mb))
    if isinstance(E, Compose):
        fs = _flatten_compose(E)
        k = 0
        while k < len(fs) - 1 and is_structural_isometry(fs[k]):
            k += 1
        if k > 0:
            left = compose(*fs[:k])
            u, m = _polar(compose(*fs[k:]))
            return compose(left, u), m
    if isinstance(E, DenseMatrix):
        w, s, vh = np.linalg.svd(E.matrix, full_matrices=False)
        r = int(np.sum(s > 1e-12 * max(1.0, float(s.max(initial=0.0)))))
        u = w[:, :r] @ vh[:r, :]
        mod = (vh.conj().T * s) @ vh
        return DenseMatrix(u, E.domain, E.codomain), DenseMatrix(mod, E.domain, E.domain)
    raise UnsupportedForm(f"unsupported polar form: {E.describe()}")
