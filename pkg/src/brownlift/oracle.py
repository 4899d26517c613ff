"""Dense brute-force reference used to certify structured results.

Nothing here shares arithmetic with the structured engine beyond reading the
leaf definitions: truncations are assembled blockwise and multiplied as dense
matrices, eigen/singular decompositions use cyclic Jacobi sweeps, and exact
rational helpers recompute moment data with ``fractions.Fraction``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core.indexsets import IndexSet
from .core.operators import (Add, Adjoint, BilateralShift, BlockMatrix, Compose, DenseMatrix,
                             Diagonal, DirectSum, Embedding, Identity, Inclusion, Operator,
                             ScalarMul, Tensor, UnilateralShift, ZeroOp)

JACOBI_TOL = 1e-13


class OracleError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Jacobi kernels


def _off_mass(a) -> float:
    # summed directly: total minus diagonal loses everything below ~1e-8 relative
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def jacobi_eigh(a, tol: float = JACOBI_TOL, max_sweeps: int = 60):
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix by cyclic Jacobi."""
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise OracleError("jacobi_eigh needs a square matrix")
    a = (a + a.conj().T) / 2
    v = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = _off_mass(a)
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = a[p, q]
                mag = abs(b)
                if mag < 1e-300:
                    continue
                phase = b / mag
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2 * mag)
                if abs(theta) > 1e150:
                    t = 1 / (2 * theta)
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(1 + t * t)
                s = t * c
                # W = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                w = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                cols = a[:, [p, q]] @ w
                a[:, [p, q]] = cols
                rows = w.conj().T @ a[[p, q], :]
                a[[p, q], :] = rows
                a[p, q] = a[q, p] = 0
                v[:, [p, q]] = v[:, [p, q]] @ w
    else:
        off = _off_mass(a)
        if off >= tol * scale:
            raise OracleError(f"Jacobi did not converge: off-diagonal mass {off:.3e}")
    ev = np.real(np.diag(a))
    order = np.argsort(ev)
    return ev[order], v[:, order]


def jacobi_svd(m):
    """Singular triple ``(U, s, Vh)`` from the Hermitian dilation ``[[0, M], [M*, 0]]``."""
    m = np.array(m, dtype=complex)
    r, c = m.shape
    k = min(r, c)
    if k == 0:
        return np.zeros((r, 0)), np.zeros(0), np.zeros((0, c))
    dil = np.zeros((r + c, r + c), dtype=complex)
    dil[:r, r:] = m
    dil[r:, :r] = m.conj().T
    ev, vec = jacobi_eigh(dil)
    top = np.argsort(ev)[::-1][:k]
    s = np.clip(ev[top], 0, None)
    u = vec[:r, top] * math.sqrt(2)
    vv = vec[r:, top] * math.sqrt(2)
    return u, s, vv.conj().T


def psd_check(m, psd_tol: float = 1e-9) -> tuple[bool, float]:
    ev, _ = jacobi_eigh(m)
    lo = float(ev[0]) if len(ev) else 0.0
    return lo >= -psd_tol, lo


def numerical_rank(m, tol: float) -> int:
    _, s, _ = jacobi_svd(m)
    return int(np.sum(s > tol))


def polar(m):
    """``(U, P)`` with ``M = U P``, ``P = (M*M)^{1/2}``."""
    u, s, vh = jacobi_svd(m)
    p = (vh.conj().T * s) @ vh
    keep = s > 1e-12 * max(1.0, float(s.max(initial=0.0)))
    uu = u[:, keep] @ vh[keep, :]
    return uu, p


def dense_kernels(m) -> dict:
    m = np.array(m, dtype=complex)
    out = {"svd": jacobi_svd(m), "rank": numerical_rank(m, 1e-10), "polar": polar(m)}
    if m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T):
        out["hermitian_eigen"] = jacobi_eigh(m)
        out["psd"] = psd_check(m)
    return out


# ---------------------------------------------------------------------------
# truncations with dirty-boundary tracking


@dataclass
class DenseTruncation:
    matrix: np.ndarray
    window: list
    boundary_dirty: set


@dataclass
class _Dense:
    m: np.ndarray
    clean_cols: np.ndarray
    clean_rows: np.ndarray


def _support_inside(d: dict, allowed: set) -> bool:
    return all(k in allowed for k, c in d.items() if c != 0)


def _leaf_entry(op: Operator, i, j) -> complex:
    if isinstance(op, Identity):
        return 1.0 if i == j else 0.0
    if isinstance(op, ZeroOp):
        return 0.0
    if isinstance(op, UnilateralShift):
        return op.weights.weight(j) if i == j + 1 else 0.0
    if isinstance(op, BilateralShift):
        return op.theta if i == j + 1 else 0.0
    if isinstance(op, Diagonal):
        return op.d(i) if i == j else 0.0
    if isinstance(op, DenseMatrix):
        return op.matrix[op.codomain.rank(i), op.domain.rank(j)]
    if isinstance(op, Inclusion):
        return 1.0 if op.map(j) == i else 0.0
    if isinstance(op, Embedding):
        return op._column(j).get(i, 0.0)
    raise OracleError(f"no leaf formula for {op.kind}")


def dense_eval(op: Operator, rows: list, cols: list) -> _Dense:
    """Honest truncation of ``op`` to ``rows x cols`` with exactness flags.

    ``clean_cols[j]`` certifies that column ``j`` is exact and that the true
    column has no support outside ``rows``; ``clean_rows`` likewise for rows.
    """
    row_set, col_set = set(rows), set(cols)
    if isinstance(op, (Identity, ZeroOp, UnilateralShift, BilateralShift, Diagonal, DenseMatrix,
                       Inclusion, Embedding)):
        m = np.array([[_leaf_entry(op, i, j) for j in cols] for i in rows], dtype=complex)
        m = m.reshape(len(rows), len(cols))
        cc = np.array([_support_inside(op._fwd({j: 1.0}), row_set) for j in cols], dtype=bool)
        cr = np.array([_support_inside(op._adj({i: 1.0}), col_set) for i in rows], dtype=bool)
        return _Dense(m, cc, cr)
    if isinstance(op, ScalarMul):
        d = dense_eval(op.op, rows, cols)
        return _Dense(op.c * d.m, d.clean_cols, d.clean_rows)
    if isinstance(op, Adjoint):
        d = dense_eval(op.op, cols, rows)
        return _Dense(d.m.conj().T, d.clean_rows, d.clean_cols)
    if isinstance(op, Add):
        a, b = dense_eval(op.a, rows, cols), dense_eval(op.b, rows, cols)
        return _Dense(a.m + b.m, a.clean_cols & b.clean_cols, a.clean_rows & b.clean_rows)
    if isinstance(op, Compose):
        mid = _mid_window(op.b.codomain, rows, cols, op)
        a = dense_eval(op.a, rows, mid)
        b = dense_eval(op.b, mid, cols)
        bad_a_cols = {mid[k] for k in np.flatnonzero(~a.clean_cols)}
        bad_b_rows = {mid[k] for k in np.flatnonzero(~b.clean_rows)}
        cc = np.array([b.clean_cols[t] and not (set(op.b._fwd({j: 1.0})) & bad_a_cols)
                       and _support_inside(op._fwd({j: 1.0}), row_set)
                       for t, j in enumerate(cols)], dtype=bool)
        cr = np.array([a.clean_rows[t] and not (set(op.a._adj({i: 1.0})) & bad_b_rows)
                       and _support_inside(op._adj({i: 1.0}), col_set)
                       for t, i in enumerate(rows)], dtype=bool)
        return _Dense(a.m @ b.m, cc, cr)
    if isinstance(op, (DirectSum, BlockMatrix)):
        if isinstance(op, DirectSum):
            blocks = (op.a, ZeroOp(op.b.domain, op.a.codomain),
                      ZeroOp(op.a.domain, op.b.codomain), op.b)
        else:
            blocks = op.blocks
        rl = [k for k, i in enumerate(rows) if i[0] == "L"]
        rr = [k for k, i in enumerate(rows) if i[0] == "R"]
        cl = [k for k, j in enumerate(cols) if j[0] == "L"]
        cr_ = [k for k, j in enumerate(cols) if j[0] == "R"]
        m = np.zeros((len(rows), len(cols)), dtype=complex)
        cc = np.ones(len(cols), dtype=bool)
        crw = np.ones(len(rows), dtype=bool)
        for blk, rsel, csel in ((blocks[0], rl, cl), (blocks[1], rl, cr_),
                                (blocks[2], rr, cl), (blocks[3], rr, cr_)):
            if not rsel or not csel:
                continue
            d = dense_eval(blk, [rows[k][1] for k in rsel], [cols[k][1] for k in csel])
            m[np.ix_(rsel, csel)] = d.m
            cc[csel] &= d.clean_cols
            crw[rsel] &= d.clean_rows
        cc &= np.array([_support_inside(op._fwd({j: 1.0}), row_set) for j in cols], dtype=bool)
        crw &= np.array([_support_inside(op._adj({i: 1.0}), col_set) for i in rows], dtype=bool)
        return _Dense(m, cc, crw)
    if isinstance(op, Tensor):
        ra = sorted({i[0] for i in rows}, key=op.a.codomain.rank)
        ca = sorted({j[0] for j in cols}, key=op.a.domain.rank)
        rb = sorted({i[1] for i in rows}, key=op.b.codomain.rank)
        cb = sorted({j[1] for j in cols}, key=op.b.domain.rank)
        da, db = dense_eval(op.a, ra, ca), dense_eval(op.b, rb, cb)
        pra, pca = {x: k for k, x in enumerate(ra)}, {x: k for k, x in enumerate(ca)}
        prb, pcb = {x: k for k, x in enumerate(rb)}, {x: k for k, x in enumerate(cb)}
        m = np.zeros((len(rows), len(cols)), dtype=complex)
        for s, (i, k) in enumerate(rows):
            for t, (j, l) in enumerate(cols):
                m[s, t] = da.m[pra[i], pca[j]] * db.m[prb[k], pcb[l]]
        cc = np.array([da.clean_cols[pca[j]] and db.clean_cols[pcb[l]]
                       and _support_inside(op._fwd({(j, l): 1.0}), row_set)
                       for j, l in cols], dtype=bool)
        crw = np.array([da.clean_rows[pra[i]] and db.clean_rows[prb[k]]
                        and _support_inside(op._adj({(i, k): 1.0}), col_set)
                        for i, k in rows], dtype=bool)
        return _Dense(m, cc, crw)
    raise OracleError(f"dense_eval cannot handle {op.kind}")


def _mid_window(space: IndexSet, rows: list, cols: list, op: Compose) -> list:
    if space == op.domain:
        return list(cols)
    if space == op.codomain:
        return list(rows)
    return space.window(max(len(rows), len(cols)))


def truncate(op: Operator, radius: int) -> DenseTruncation:
    if radius < 1:
        raise OracleError("radius must be at least 1")
    if op.domain != op.codomain:
        raise OracleError("truncate expects an endomorphism; use dense_eval for rectangles")
    window = op.domain.window(radius)
    m = np.array([[op.matrix_element(i, j) for j in window] for i in window], dtype=complex)
    d = dense_eval(op, window, window)
    dirty = {window[k] for k in range(len(window))
             if not d.clean_cols[k] or not d.clean_rows[k]}
    return DenseTruncation(m, window, dirty)


@dataclass
class Comparison:
    passed: bool
    max_deviation: float
    location: tuple | None
    clean_columns: int


def compare_structured_dense(op: Operator, radius: int = 32, tol: float = 1e-12,
                             corrupt: tuple | None = None) -> Comparison:
    """Structured columns against the dense truncation product on clean columns.

    ``corrupt=(row, col, delta)`` perturbs one dense entry (negative control).
    """
    rows = op.codomain.window(radius)
    cols = op.domain.window(radius)
    d = dense_eval(op, rows, cols)
    m = d.m.copy()
    if corrupt is not None:
        m[corrupt[0], corrupt[1]] += corrupt[2]
    worst, where, used = 0.0, None, 0
    for t, j in enumerate(cols):
        if not d.clean_cols[t]:
            continue
        used += 1
        col = op._fwd({j: 1.0})
        for s, i in enumerate(rows):
            dev = abs(col.get(i, 0.0) - m[s, t])
            if dev > worst:
                worst, where = dev, (i, j)
    return Comparison(bool(worst <= tol), float(worst), where, used)


# ---------------------------------------------------------------------------
# exact rational references


def exact_moments(atoms, count: int) -> list[Fraction]:
    atoms = [(Fraction(t), Fraction(w)) for t, w in atoms]
    return [sum(w * t ** n for t, w in atoms) for n in range(count)]


def gammas_from_weights(weights, count: int) -> list[Fraction]:
    out, g = [], Fraction(1)
    for n in range(count):
        out.append(g)
        g *= Fraction(weights[n]) ** 2
    return out


def exact_det(m) -> Fraction:
    a = [[Fraction(x) for x in row] for row in m]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            for k in range(c, n):
                a[r][k] -= f * a[c][k]
    return det


def hankel(seq, size: int, shift: int = 0):
    return [[seq[i + j + shift] for j in range(size)] for i in range(size)]


def hrypa_sides(weights_sq, k: int, n: int) -> tuple[Fraction, Fraction]:
    """Both sides of the power criterion sum for squared weights ``weights_sq``."""
    def side(start):
        total = Fraction(0)
        for j in range(1, n):
            prod = Fraction(1)
            for l in range(start, start + j):
                prod *= weights_sq[l]
            total += prod
        return total
    return side(k), side(k + n)
