"""Probe-based evidence: operator identities, norm bounds, window positivity."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .indexsets import IndexSet, Int, Nat, StructuralError
from .operators import (Adjoint, BilateralShift, BlockMatrix, Compose, DenseMatrix, Diagonal,
                        DirectSum, Embedding, Identity, Inclusion, Operator, ScalarMul, Tensor,
                        UnilateralShift, ZeroOp, Add, scalar)
from .simplify import scalar_identity_value, simplify
from .vectors import SupportedVector


@dataclass(frozen=True)
class ToleranceProfile:
    identity_tol: float = 1e-10
    psd_tol: float = 1e-9
    drop_tol: float = 1e-14
    probe_radius: int = 32
    random_probes: int = 64
    seed: int = 0

    def __post_init__(self):
        for name in ("identity_tol", "psd_tol", "drop_tol"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.probe_radius < 1:
            raise ValueError("probe_radius must be at least 1")
        if self.random_probes < 0:
            raise ValueError("random_probes must be nonnegative")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def with_(self, **kw) -> "ToleranceProfile":
        return replace(self, **kw)

    def to_json(self) -> dict:
        return {"identity_tol": self.identity_tol, "psd_tol": self.psd_tol,
                "drop_tol": self.drop_tol, "probe_radius": self.probe_radius,
                "random_probes": self.random_probes, "seed": self.seed}


DEFAULT = ToleranceProfile()


@dataclass
class Check:
    """Outcome of a probed assertion."""

    name: str
    passed: bool | None
    residual: float = 0.0
    witness: SupportedVector | None = None
    note: str = ""
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.passed)

    @property
    def status(self) -> str:
        return {True: "pass", False: "fail", None: "unknown"}[self.passed]

    def to_json(self) -> dict:
        out = {"name": self.name, "status": self.status, "residual": float(self.residual)}
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        if self.note:
            out["note"] = self.note
        if self.details:
            out["details"] = self.details
        return out


def probe_vectors(space: IndexSet, tol: ToleranceProfile, radius: int | None = None,
                  extra: list | None = None) -> list[SupportedVector]:
    radius = tol.probe_radius if radius is None else radius
    vecs = [SupportedVector.basis(space, i) for i in space.window(radius)]
    for i in extra or ():
        if space.contains(i):
            vecs.append(SupportedVector.basis(space, i))
    rng = np.random.default_rng(tol.seed)
    for _ in range(tol.random_probes):
        v = SupportedVector.random(space, radius, rng)
        vecs.append(v * (1.0 / v.norm()))
    return vecs


def probe_equal(a: Operator, b: Operator, tol: ToleranceProfile = DEFAULT,
                radius: int | None = None, name: str = "identity",
                threshold: float | None = None) -> Check:
    """Compare ``a`` and ``b`` on window basis vectors and random probes.

    The residual of a probe ``v`` is ``|a v - b v| / max(1, |a v|, |b v|)``.
    """
    if a.domain != b.domain or a.codomain != b.codomain:
        raise StructuralError(
            f"probe_equal shape mismatch: {a.domain}->{a.codomain} vs {b.domain}->{b.codomain}")
    threshold = tol.identity_tol if threshold is None else threshold
    worst, witness = 0.0, None
    for v in probe_vectors(a.domain, tol, radius):
        av = a._fwd(v.entries)
        bv = b._fwd(v.entries)
        diff = dict(av)
        for i, c in bv.items():
            diff[i] = diff.get(i, 0j) - c
        num = math.sqrt(math.fsum(abs(c) ** 2 for c in diff.values()))
        den = max(1.0, _dnorm(av), _dnorm(bv))
        r = num / den
        if r > worst:
            worst = r
        if r > threshold and witness is None:
            witness = v
    return Check(name, witness is None, worst, witness)


def _dnorm(d: dict) -> float:
    return math.sqrt(math.fsum(abs(c) ** 2 for c in d.values()))


def window_matrix(op: Operator, rows: list, cols: list) -> np.ndarray:
    out = np.zeros((len(rows), len(cols)), dtype=complex)
    pos = {r: k for k, r in enumerate(rows)}
    for j, c in enumerate(cols):
        for i, x in op.column(c).items():
            k = pos.get(i)
            if k is not None:
                out[k, j] = x
    return out


def window_psd(op: Operator, tol: ToleranceProfile = DEFAULT, radius: int | None = None,
               name: str = "psd") -> Check:
    """Positivity evidence: min eigenvalue of the compressed window Gram matrix."""
    radius = tol.probe_radius if radius is None else radius
    win = op.domain.window(radius)
    m = window_matrix(op, win, win)
    m = (m + m.conj().T) / 2
    ev, vecs = np.linalg.eigh(m)
    lo = float(ev[0]) if len(ev) else 0.0
    witness = None
    if lo < -tol.psd_tol:
        witness = SupportedVector(op.domain, dict(zip(win, vecs[:, 0])))
    return Check(name, lo >= -tol.psd_tol, max(0.0, -lo), witness,
                 details={"min_eigenvalue": lo, "window": len(win)})


# -- norms ---------------------------------------------------------------------


@dataclass
class NormBounds:
    lower: float
    upper: float
    probe_identified: bool = False

    def __iter__(self):
        return iter((self.lower, self.upper))

    def tight(self, tol: float) -> bool:
        return self.upper - self.lower <= tol

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper,
                "probe_identified": self.probe_identified}


def structural_upper(op: Operator) -> float:
    if isinstance(op, Identity):
        return 1.0
    if isinstance(op, ZeroOp):
        return 0.0
    if isinstance(op, ScalarMul):
        return abs(op.c) * structural_upper(op.op)
    if isinstance(op, UnilateralShift):
        return op.weights.sup()
    if isinstance(op, BilateralShift):
        return op.theta
    if isinstance(op, Diagonal):
        return op.sup_abs()
    if isinstance(op, DenseMatrix):
        if op.matrix.size == 0:
            return 0.0
        return float(np.linalg.svd(op.matrix, compute_uv=False)[0])
    if isinstance(op, Adjoint):
        return structural_upper(op.op)
    if isinstance(op, Compose):
        return structural_upper(op.a) * structural_upper(op.b)
    if isinstance(op, Add):
        return structural_upper(op.a) + structural_upper(op.b)
    if isinstance(op, DirectSum):
        return max(structural_upper(op.a), structural_upper(op.b))
    if isinstance(op, Tensor):
        return structural_upper(op.a) * structural_upper(op.b)
    if isinstance(op, Inclusion):
        return 1.0
    if isinstance(op, BlockMatrix):
        m = np.array([[structural_upper(b) for b in op.blocks[:2]],
                      [structural_upper(b) for b in op.blocks[2:]]])
        return float(np.linalg.svd(m, compute_uv=False)[0])
    if isinstance(op, Embedding):
        return 1.0 if op.isometric else math.inf
    return math.inf


def far_indices(space: IndexSet, op: Operator | None = None) -> list:
    """Basis indices deep in the tail, where sup-type quantities are approached."""
    if space == Nat():
        horizon = _weight_horizon(op) if op is not None else 0
        return sorted({horizon, horizon + 1, 64, 256, 1024, 4096})
    if space == Int():
        return [-4096, -64, 64, 4096]
    return []


def _weight_horizon(op: Operator) -> int:
    if isinstance(op, UnilateralShift):
        return op.weights.horizon()
    if isinstance(op, Diagonal):
        hs = [w.horizon() + off for w, _, off in op.factors] + [i + 1 for i in op.values
                                                               if isinstance(i, int)]
        return max(hs, default=0)
    return max((_weight_horizon(c) for c in op.children()), default=0)


def lower_bound(op: Operator, tol: ToleranceProfile = DEFAULT, radius: int | None = None) -> float:
    best = 0.0
    for v in probe_vectors(op.domain, tol, radius, far_indices(op.domain, op)):
        best = max(best, _dnorm(op._fwd(v.entries)) / v.norm())
    return best


def norm_bounds(op: Operator, tol: ToleranceProfile = DEFAULT) -> NormBounds:
    """``lower <= |op| <= upper``.

    The upper bound is structural after simplification.  When that bound is
    loose and the expression probes as ``c * I`` the pair collapses to
    ``|c|`` and ``probe_identified`` is set.
    """
    s = simplify(op)
    if isinstance(s, BlockMatrix):
        split = _block_diagonal_bounds(s, tol)
        if split is not None:
            return split
    upper = structural_upper(s)
    lower = min(lower_bound(s, tol), upper)
    if upper - lower > tol.identity_tol and s.domain == s.codomain:
        c = _probe_scalar(s, tol)
        if c is not None:
            return NormBounds(abs(c), abs(c), True)
    return NormBounds(lower, upper)


def _block_diagonal_bounds(s: BlockMatrix, tol: ToleranceProfile) -> NormBounds | None:
    """Bounds from the diagonal blocks when both off-diagonal blocks probe as zero."""
    a11, a12, a21, a22 = s.blocks
    for b in (a12, a21):
        if not isinstance(b, ZeroOp) and not probe_equal(b, ZeroOp(b.domain, b.codomain), tol):
            return None
    if isinstance(a12, ZeroOp) and isinstance(a21, ZeroOp):
        return None  # already block diagonal; the structural rules apply
    ba, bb = norm_bounds(a11, tol), norm_bounds(a22, tol)
    return NormBounds(max(ba.lower, bb.lower), max(ba.upper, bb.upper), True)


def _probe_scalar(op: Operator, tol: ToleranceProfile) -> complex | None:
    first = op.domain.unrank(0)
    c = op.matrix_element(first, first)
    if c == 0:
        target = ZeroOp(op.domain)
    else:
        target = scalar(c, Identity(op.domain))
    return c if probe_equal(op, target, tol) else None


def modulus_lower_bound(op: Operator, tol: ToleranceProfile = DEFAULT) -> float | None:
    """Structural ``inf |op f| / |f|`` for supported forms, else ``None``.

    Used for injectivity, left invertibility and isometry claims.
    """
    s = simplify(op)
    return _struct_lower(s)


def _struct_lower(op: Operator) -> float | None:
    c = scalar_identity_value(op)
    if c is not None:
        return abs(c)
    if isinstance(op, ZeroOp):
        return 0.0
    if isinstance(op, ScalarMul):
        inner = _struct_lower(op.op)
        return None if inner is None else abs(op.c) * inner
    if isinstance(op, (Inclusion,)):
        return 1.0
    if isinstance(op, Embedding):
        return 1.0 if op.isometric else None
    if isinstance(op, UnilateralShift):
        return op.weights.inf()
    if isinstance(op, BilateralShift):
        return op.theta
    if isinstance(op, Diagonal):
        return op.inf_abs()
    if isinstance(op, DirectSum):
        a, b = _struct_lower(op.a), _struct_lower(op.b)
        return None if a is None or b is None else min(a, b)
    if isinstance(op, Tensor):
        a, b = _struct_lower(op.a), _struct_lower(op.b)
        return None if a is None or b is None else a * b
    if isinstance(op, Compose):
        # only isometries on the left preserve the lower bound exactly
        a, b = _struct_lower(op.a), _struct_lower(op.b)
        if a is None or b is None:
            return None
        return a * b
    if isinstance(op, DenseMatrix):
        if op.matrix.shape[0] < op.matrix.shape[1]:
            return 0.0
        return float(np.linalg.svd(op.matrix, compute_uv=False)[-1])
    return None
