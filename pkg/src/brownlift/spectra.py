"""Rotation invariant spectral regions, block spectra and approximate eigenvectors."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .classify import BlockTriangular
from .core.indexsets import StructuralError
from .core.operators import (Adjoint, BilateralShift, DenseMatrix, Diagonal, DirectSum,
                             Identity, Operator, ScalarMul, Tensor,
                             UnilateralShift, ZeroOp, adjoint, compose, scalar)
from .core.polar import is_structural_isometry, is_structural_unitary
from .core.probes import DEFAULT, Check, ToleranceProfile, probe_equal, window_psd
from .core.vectors import SupportedVector

RTOL = 1e-12
WITNESS_EPS = 1e-5


def _same(a: float, b: float) -> bool:
    return abs(a - b) <= RTOL * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class SpectrumRegion:
    """Finite union of closed radial bands ``{a <= |z| <= b}`` and points.

    Disks are bands with ``a = 0``, circles have ``a = b``.  Instances are
    kept canonical: bands merged and sorted, points outside every band.
    """

    bands: tuple = ()
    points: tuple = ()

    # -- constructors
    @classmethod
    def disk(cls, r: float) -> "SpectrumRegion":
        return cls.build([(0.0, r)], [])

    @classmethod
    def circle(cls, r: float) -> "SpectrumRegion":
        return cls.build([(r, r)], [])

    @classmethod
    def annulus(cls, a: float, b: float) -> "SpectrumRegion":
        return cls.build([(a, b)], [])

    @classmethod
    def finite(cls, pts) -> "SpectrumRegion":
        return cls.build([], pts)

    @classmethod
    def build(cls, bands, points) -> "SpectrumRegion":
        bs = []
        for a, b in bands:
            a, b = float(a), float(b)
            if a < 0 or b < a:
                raise StructuralError(f"invalid band [{a}, {b}]")
            bs.append((a, b))
        bs.sort()
        merged: list = []
        for a, b in bs:
            if merged and (a <= merged[-1][1] or _same(a, merged[-1][1])):
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        pts = [complex(z) for z in points]
        # the degenerate band {0} is the point 0
        if merged and merged[0] == (0.0, 0.0):
            merged.pop(0)
            pts.append(0j)
        kept: list = []
        for z in pts:
            if any(_in_band(abs(z), a, b) for a, b in merged):
                continue
            if any(abs(z - w) <= RTOL * max(1.0, abs(z)) for w in kept):
                continue
            kept.append(z)
        kept.sort(key=lambda z: (abs(z), cmath.phase(z)))
        return cls(tuple(merged), tuple(kept))

    # -- algebra
    def union(self, other: "SpectrumRegion") -> "SpectrumRegion":
        return SpectrumRegion.build(self.bands + other.bands, self.points + other.points)

    __or__ = union

    def scale(self, c: complex) -> "SpectrumRegion":
        c = complex(c)
        if c == 0:
            return SpectrumRegion.finite([0])
        r = abs(c)
        return SpectrumRegion.build([(a * r, b * r) for a, b in self.bands],
                                    [z * c for z in self.points])

    def conjugate(self) -> "SpectrumRegion":
        return SpectrumRegion(self.bands, tuple(z.conjugate() for z in self.points))

    def contains(self, z: complex) -> bool:
        r = abs(z)
        if any(_in_band(r, a, b) for a, b in self.bands):
            return True
        return any(abs(z - w) <= RTOL * max(1.0, abs(w)) for w in self.points)

    __contains__ = contains

    def issubset(self, other: "SpectrumRegion") -> bool:
        for a, b in self.bands:
            if not any(_in_band(a, c, d) and _in_band(b, c, d) for c, d in other.bands):
                return False
        return all(other.contains(z) for z in self.points)

    __le__ = issubset

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpectrumRegion):
            return NotImplemented
        return self.issubset(other) and other.issubset(self)

    def __hash__(self):
        return hash((len(self.bands), len(self.points)))

    @property
    def is_empty(self) -> bool:
        return not self.bands and not self.points

    def pieces(self) -> list["SpectrumRegion"]:
        out = [SpectrumRegion(((a, b),), ()) for a, b in self.bands]
        if self.points:
            out.append(SpectrumRegion((), self.points))
        return out

    def complement_components(self) -> list[dict]:
        """Connected components of the complement as radial intervals.

        Removing finitely many points from an open disk or annulus keeps it
        connected, so only the bands matter.
        """
        comps = []
        lo = None
        for a, b in self.bands:
            if lo is None:
                if a > 0:
                    comps.append({"kind": "open_disk", "lo": 0.0, "hi": a, "bounded": True})
            elif a > lo:
                comps.append({"kind": "open_annulus", "lo": lo, "hi": a, "bounded": True})
            lo = b
        if lo is None:
            comps.append({"kind": "plane", "lo": 0.0, "hi": math.inf, "bounded": False})
        else:
            comps.append({"kind": "exterior", "lo": lo, "hi": math.inf, "bounded": False})
        return comps

    def meets_component(self, comp: dict) -> bool:
        lo, hi = comp["lo"], comp["hi"]
        disk = comp["kind"] in ("open_disk", "plane")
        for a, b in self.bands:
            if b > lo and a < hi or (disk and a == 0 and b >= 0 and hi > 0):
                if b > lo or disk:
                    return True
        for z in self.points:
            r = abs(z)
            if (lo < r or (disk and r == 0)) and r < hi:
                return True
        return False

    def contains_component(self, comp: dict) -> bool:
        if not comp["bounded"]:
            return False
        lo, hi = comp["lo"], comp["hi"]
        if comp["kind"] == "open_disk":
            lo = 0.0
        return any(_in_band(lo, a, b) and _in_band(hi, a, b) for a, b in self.bands)

    def components_json(self) -> list:
        out = []
        for a, b in self.bands:
            if a == 0:
                out.append({"ClosedDisk": b})
            elif _same(a, b):
                out.append({"Circle": a})
            else:
                out.append({"ClosedAnnulus": [a, b]})
        if self.points:
            out.append({"FinitePoints": [[z.real, z.imag] for z in self.points]})
        return out

    def to_json(self) -> dict:
        return {"components": self.components_json()}

    @classmethod
    def from_json(cls, data) -> "SpectrumRegion":
        bands, pts = [], []
        for c in data["components"] if isinstance(data, dict) else data:
            if "ClosedDisk" in c:
                bands.append((0.0, c["ClosedDisk"]))
            elif "Circle" in c:
                bands.append((c["Circle"], c["Circle"]))
            elif "ClosedAnnulus" in c:
                bands.append(tuple(c["ClosedAnnulus"]))
            elif "FinitePoints" in c:
                pts += [complex(x, y) for x, y in c["FinitePoints"]]
            else:
                raise StructuralError(f"unknown region component {c!r}")
        return cls.build(bands, pts)

    def __str__(self) -> str:
        parts = []
        for c in self.components_json():
            (k, v), = c.items()
            if k == "FinitePoints":
                parts.append("{" + ", ".join(f"{complex(x, y):g}" for x, y in v) + "}")
            elif k == "ClosedAnnulus":
                parts.append(f"ClosedAnnulus({v[0]:g}, {v[1]:g})")
            else:
                parts.append(f"{k}({v:g})")
        return " ∪ ".join(parts) if parts else "∅"

    def boundary_samples(self, n: int = 64) -> list[tuple[str, complex]]:
        """Points on the boundary of each piece, for plotting."""
        out = []
        angles = [2 * math.pi * k / n for k in range(n)]
        for a, b in self.bands:
            label = str(SpectrumRegion(((a, b),), ()))
            for r in sorted({a, b}):
                if r > 0:
                    out += [(label, cmath.rect(r, t)) for t in angles]
            if a == 0:
                out.append((label, 0j))
        for z in self.points:
            out.append(("point", z))
        return out


def _in_band(r: float, a: float, b: float) -> bool:
    return (a <= r or _same(a, r)) and (r <= b or _same(r, b))


# ---------------------------------------------------------------------------
# symbolic spectra


class SpectrumUnknown(StructuralError):
    """The operator is outside the catalog of known spectra."""


def _probe_isometry(op: Operator, tol: ToleranceProfile) -> bool:
    if is_structural_isometry(op):
        return True
    return bool(probe_equal(compose(adjoint(op), op), Identity(op.domain), tol))


def _probe_unitary(op: Operator, tol: ToleranceProfile) -> bool:
    if is_structural_unitary(op):
        return True
    return bool(probe_equal(compose(op, adjoint(op)), Identity(op.domain), tol))


def shift_radius(w) -> float:
    """Spectral radius of a unilateral weighted shift with these weights."""
    if w.measure is not None:
        return math.sqrt(w.measure.max_location())
    return w.tail


def symbolic_spectrum(op: Operator, tol: ToleranceProfile = DEFAULT) -> SpectrumRegion:
    if op.domain != op.codomain:
        raise SpectrumUnknown("spectrum not structurally known: not an endomorphism")
    if isinstance(op, Identity):
        return SpectrumRegion.finite([1])
    if isinstance(op, ZeroOp):
        return SpectrumRegion.finite([0])
    if isinstance(op, ScalarMul):
        return symbolic_spectrum(op.op, tol).scale(op.c)
    if isinstance(op, Adjoint):
        return symbolic_spectrum(op.op, tol).conjugate()
    if isinstance(op, UnilateralShift):
        # not invertible, rotation invariant and connected
        return SpectrumRegion.disk(shift_radius(op.weights))
    if isinstance(op, BilateralShift):
        return SpectrumRegion.circle(op.theta)
    if isinstance(op, Diagonal):
        pts = op.point_values()
        if pts is None:
            raise SpectrumUnknown("spectrum not structurally known: weight-generated diagonal")
        return SpectrumRegion.finite(pts)
    if isinstance(op, DenseMatrix):
        return SpectrumRegion.finite(np.linalg.eigvals(op.matrix))
    if isinstance(op, DirectSum):
        return symbolic_spectrum(op.a, tol) | symbolic_spectrum(op.b, tol)
    if isinstance(op, Tensor):
        if isinstance(op.a, Diagonal) and op.a.point_values() is not None:
            inner = symbolic_spectrum(op.b, tol)
            out = SpectrumRegion()
            for d in op.a.point_values():
                out = out | inner.scale(d)
            return out
    if _probe_isometry(op, tol):
        if not _probe_unitary(op, tol):
            return SpectrumRegion.disk(1.0)
    raise SpectrumUnknown(f"spectrum not structurally known: {op.describe()}")


# ---------------------------------------------------------------------------
# approximate eigenvectors


class WitnessRefused(StructuralError):
    pass


@dataclass
class SpectralWitness:
    """Approximate eigenvector: ``|(A - lam) f| / |f|`` on the operator side,
    ``|(A* - conj lam) f| / |f|`` on the adjoint side."""

    lam: complex
    side: str
    residual: float
    support_size: int
    method: str
    _build: object = None
    _vec: SupportedVector | None = None

    @property
    def vector(self) -> SupportedVector:
        if self._vec is None:
            self._vec = self._build()
        return self._vec

    def to_json(self, with_vector: bool = False) -> dict:
        out = {"lambda": [self.lam.real, self.lam.imag], "side": self.side,
               "residual": self.residual, "support_size": self.support_size,
               "method": self.method}
        if with_vector:
            out["vector"] = self.vector.to_json()
        return out


def structured_residual(op: Operator, w: SpectralWitness) -> float:
    """Residual recomputed from the materialized vector through the operator tree."""
    v = w.vector
    if w.side == "operator":
        img = op._fwd(v.entries)
        lam = w.lam
    else:
        img = op._adj(v.entries)
        lam = w.lam.conjugate()
    diff = dict(img)
    for i, c in v.entries.items():
        diff[i] = diff.get(i, 0j) - lam * c
    num = math.sqrt(math.fsum(abs(c) ** 2 for c in diff.values()))
    return num / v.norm()


def _window(m: int, smooth: bool) -> np.ndarray:
    if not smooth:
        return np.ones(m)
    return np.sin(np.pi * np.arange(1, m + 1) / (m + 1))


def _window_length(scale: float, eps: float) -> int:
    # a sine window of length m has first differences of relative size pi/(m+1)
    return int(math.ceil(1.1 * math.pi * max(scale, 1e-300) / eps)) + 1


MAX_WINDOW = 20_000_000


def _shift_weights(w, start: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights ``w_{start..start+m}`` and ``log prod_{l<n} w_{start+l}`` for ``n <= m``."""
    n = np.arange(start, start + m + 2, dtype=float)
    if w.measure is not None:
        t = np.log(np.array(w.measure.locations))
        p = np.log(np.array(w.measure.masses))
        lg = np.logaddexp.reduce(p[None, :] + n[:, None] * t[None, :], axis=1)
        logw = 0.5 * (lg[1:] - lg[:-1])
    else:
        ws = np.array([w.weight(int(k)) for k in n[: min(len(n), w.horizon() + 1)]]
                      + [w.tail] * max(0, len(n) - w.horizon() - 1))[: len(n) - 1]
        with np.errstate(divide="ignore"):
            logw = np.log(ws)
    logw = logw[: m + 1]
    logprod = np.concatenate([[0.0], np.cumsum(logw)])[: m + 1]
    return np.exp(logw), logprod


def _geometric(mu: complex, logprod: np.ndarray, m: int) -> np.ndarray:
    """``c_n = mu^n / prod_{l<n} w_l`` for ``n < m`` without overflow."""
    n = np.arange(m)
    if mu == 0:
        c = np.zeros(m, dtype=complex)
        c[0] = 1.0
        return c
    mag = n * math.log(abs(mu)) - logprod[:m]
    mag -= mag.max()
    return np.exp(mag) * np.exp(1j * cmath.phase(mu) * n)


def _leaf_shift(op, lam: complex, eps: float, side: str, region: SpectrumRegion):
    """Witness for a unilateral or bilateral shift leaf, computed on numpy arrays."""
    bilateral = isinstance(op, BilateralShift)
    r = op.theta if bilateral else shift_radius(op.weights)
    if not region.contains(lam):
        raise WitnessRefused(f"{lam} is not in {region}")
    on_edge = _same(abs(lam), r)
    if side == "operator" and not bilateral and not on_edge:
        raise WitnessRefused("operator-side witnesses of a unilateral shift exist only on "
                             "the boundary circle")
    start = 0
    if not bilateral and op.weights.measure is None:
        zeros = [k for k in range(op.weights.horizon()) if op.weights.weight(k) == 0]
        start = zeros[-1] + 1 if zeros else 0
        if r == 0:
            # zero tail: S kills e_n past the prefix
            return _basis_witness(op, op.weights.horizon(), lam)
    smooth = on_edge
    if smooth:
        m = _window_length(r, eps)
    else:
        # plain truncation: the tail ratio |lam| / r decides the length
        q = abs(lam) / r if r else 0.0
        m = 1 if q == 0 else int(math.ceil(math.log(eps / 4) / math.log(q))) + 2
    if m > MAX_WINDOW:
        raise WitnessRefused(f"window length {m} exceeds {MAX_WINDOW}")
    if bilateral:
        weights = np.full(m + 1, r)
        logprod = np.arange(m + 1) * math.log(r)
    else:
        weights, logprod = _shift_weights(op.weights, start, m)
    a = _window(m, smooth)
    if side == "adjoint":
        # S* e_n = w_{n-1} e_{n-1}; eigenvector of S* at conj(lam)
        mu = lam.conjugate()
        f = a * _geometric(mu, logprod, m)
        img = np.zeros(m, dtype=complex)
        img[:-1] = weights[:m - 1] * f[1:]
        res = img - mu * f
        extra = abs(r * f[0]) ** 2 if bilateral else 0.0
    else:
        # S e_n = w_n e_{n+1}; eigenvector of S at lam with c_n = prod w / lam^n
        inv = 1 / lam
        n = np.arange(m)
        mag = logprod[:m] + n * math.log(abs(inv))
        mag -= mag.max()
        f = a * np.exp(mag) * np.exp(1j * cmath.phase(inv) * n)
        img = np.zeros(m + 1, dtype=complex)
        img[1:] = weights[:m] * f
        res = img.copy()
        res[:m] -= lam * f
        extra = 0.0
    num = math.sqrt(float(np.sum(np.abs(res) ** 2)) + extra)
    residual = num / float(np.linalg.norm(f))
    space = op.domain

    def build():
        return SupportedVector(space, {start + k: complex(x) for k, x in enumerate(f)})

    kind = "sine-windowed" if smooth else "truncated geometric"
    return SpectralWitness(complex(lam), side, residual, m, kind, build)


def _basis_witness(op: Operator, idx, lam: complex) -> SpectralWitness:
    v = SupportedVector.basis(op.domain, idx)
    w = SpectralWitness(complex(lam), "operator", 0.0, 1, "basis vector", lambda: v, v)
    w.residual = structured_residual(op, w)
    return w


def _isometry_witness(op: Operator, lam: complex, eps: float, side: str,
                      tol: ToleranceProfile, cap: int = 20000) -> SpectralWitness:
    """``sum a_n mu^n V^n e`` for a wandering unit vector ``e``."""
    if abs(lam) > 1 + RTOL:
        raise WitnessRefused(f"{lam} is outside the closed unit disk")
    P = compose(op, adjoint(op))
    e = None
    for i in op.domain.window(64):
        d = {i: 1.0}
        pd = P._fwd(d)
        rest = {k: -c for k, c in pd.items()}
        rest[i] = rest.get(i, 0) + 1.0
        nrm = math.sqrt(math.fsum(abs(c) ** 2 for c in rest.values()))
        if nrm > 1e-8:
            e = {k: c / nrm for k, c in rest.items() if abs(c) > 1e-15}
            break
    if e is None:
        raise WitnessRefused("no wandering vector found in the probe window")
    edge = _same(abs(lam), 1.0)
    if side == "operator" and not edge:
        raise WitnessRefused("an isometry is bounded below off the unit circle")
    if edge:
        m = _window_length(1.0, eps)
    elif lam == 0:
        m = 1
    else:
        m = int(math.ceil(math.log(eps / 4) / math.log(abs(lam)))) + 2
    if m > cap:
        raise WitnessRefused(f"isometry witness needs {m} terms, above the cap {cap}")
    a = _window(m, edge)
    coef = (lam.conjugate() if side == "adjoint" else (1 / lam if lam else 0)) if m > 1 else 0
    out: dict = {}
    cur = e
    c = 1.0 + 0j
    for n in range(m):
        for k, x in cur.items():
            out[k] = out.get(k, 0) + a[n] * c * x
        cur = op._fwd(cur)
        c *= coef
    v = SupportedVector(op.domain, out)
    w = SpectralWitness(complex(lam), side, 0.0, len(v.entries),
                        "wandering geometric" + (" (windowed)" if edge else ""), lambda: v, v)
    w.residual = structured_residual(op, w)
    return w


def eigen_witness(op: Operator, lam, eps: float = WITNESS_EPS, side: str | None = None,
                  tol: ToleranceProfile = DEFAULT) -> SpectralWitness:
    """Finitely supported approximate eigenvector for ``lam`` in the spectrum of ``op``.

    Refuses points outside the symbolic spectrum.  ``side`` forces the
    operator or adjoint side; by default whichever side the catalog supports.
    """
    lam = complex(lam)
    region = symbolic_spectrum(op, tol)
    if not region.contains(lam):
        raise WitnessRefused(f"{lam:g} is not in the spectrum {region}")
    w = _witness(op, lam, eps, side, tol, region)
    if w.residual > eps:
        raise WitnessRefused(f"best witness residual {w.residual:.3e} exceeds {eps:g}")
    return w


def _sides(side):
    return ("operator", "adjoint") if side is None else (side,)


def _witness(op, lam, eps, side, tol, region=None) -> SpectralWitness:
    region = symbolic_spectrum(op, tol) if region is None else region
    if not region.contains(lam):
        raise WitnessRefused(f"{lam:g} is not in {region}")
    if isinstance(op, (UnilateralShift, BilateralShift)):
        errors = []
        for s in _sides(side):
            try:
                return _leaf_shift(op, lam, eps, s, region)
            except WitnessRefused as exc:
                errors.append(str(exc))
        raise WitnessRefused("; ".join(errors))
    if isinstance(op, Identity):
        return _basis_witness(op, op.domain.unrank(0), lam)
    if isinstance(op, ZeroOp):
        return _basis_witness(op, op.domain.unrank(0), lam)
    if isinstance(op, Diagonal):
        for i in list(op.values) + op.domain.window(len(op.values) + 1):
            if abs(op.d(i) - lam) <= RTOL * max(1.0, abs(lam)):
                return _basis_witness(op, i, lam)
        raise WitnessRefused(f"no diagonal entry equals {lam:g}")
    if isinstance(op, DenseMatrix):
        ev, vec = np.linalg.eig(op.matrix)
        k = int(np.argmin(np.abs(ev - lam)))
        v = SupportedVector.from_array(op.domain, op.domain.window(op.matrix.shape[0]),
                                       vec[:, k])
        w = SpectralWitness(lam, "operator", 0.0, len(v.entries), "eigenvector", lambda: v, v)
        w.residual = structured_residual(op, w)
        return w
    if isinstance(op, ScalarMul):
        if op.c == 0:
            return _wrap(_basis_witness(ZeroOp(op.domain), op.domain.unrank(0), 0), lam, 1.0,
                         lambda v: v, op.domain)
        inner_side = None if side is None else side
        w = _witness(op.op, lam / op.c, eps / abs(op.c), inner_side, tol)
        return _wrap(w, lam, abs(op.c), lambda v: v, op.domain)
    if isinstance(op, Adjoint):
        flip = {"operator": "adjoint", "adjoint": "operator", None: None}[side]
        w = _witness(op.op, lam.conjugate(), eps, flip, tol)
        out = _wrap(w, lam, 1.0, lambda v: v, op.domain)
        out.side = "adjoint" if w.side == "operator" else "operator"
        return out
    if isinstance(op, DirectSum):
        errors = []
        for tag, part in (("L", op.a), ("R", op.b)):
            try:
                w = _witness(part, lam, eps, side, tol)
            except WitnessRefused as exc:
                errors.append(str(exc))
                continue
            return _wrap(w, lam, 1.0, _tagger(tag), op.domain)
        raise WitnessRefused("; ".join(errors))
    if isinstance(op, Tensor) and isinstance(op.a, Diagonal):
        errors = []
        for i in op.a.domain.window(op.a.domain.size or 64):
            d = op.a.d(i)
            part = scalar(d, op.b) if d != 0 else ZeroOp(op.b.domain)
            try:
                w = _witness(part, lam, eps, side, tol)
            except (WitnessRefused, SpectrumUnknown) as exc:
                errors.append(str(exc))
                continue
            return _wrap(w, lam, 1.0, _fibre(i), op.domain)
        raise WitnessRefused("; ".join(errors) or "no fibre carries the point")
    if _probe_isometry(op, tol):
        errors = []
        for s in _sides(side):
            try:
                return _isometry_witness(op, lam, eps, s, tol)
            except WitnessRefused as exc:
                errors.append(str(exc))
        raise WitnessRefused("; ".join(errors))
    raise WitnessRefused(f"no witness generator for {op.describe()}")


def _tagger(tag):
    return lambda k: (tag, k)


def _fibre(i):
    return lambda k: (i, k)


def _wrap(w: SpectralWitness, lam: complex, factor: float, relabel, space) -> SpectralWitness:
    """Lift a witness of a piece.  Residuals scale by ``factor`` (scalar multiples)."""

    def build():
        inner = w.vector
        return SupportedVector(space, {relabel(k): c for k, c in inner.entries.items()})

    return SpectralWitness(complex(lam), w.side, w.residual * factor, w.support_size, w.method,
                           build)


def sample_points(region: SpectrumRegion, per_piece: int = 8) -> list[tuple[int, complex]]:
    """``(piece id, point)`` pairs: interior radii for disks, angles for circles."""
    out = []
    fracs = (0.0, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.98)
    for pid, piece in enumerate(region.pieces()):
        if piece.points:
            out += [(pid, z) for z in piece.points]
            continue
        (a, b), = piece.bands
        for k in range(per_piece):
            t = 2 * math.pi * (k + 0.3) / per_piece
            if a == 0:
                r = b * fracs[k % len(fracs)]
            elif _same(a, b):
                r = a
            else:
                r = a + (b - a) * (k + 0.5) / per_piece
            out.append((pid, cmath.rect(r, t)))
    return out


def boundary_points(region: SpectrumRegion, per_circle: int = 2) -> list[complex]:
    out = []
    for a, b in region.bands:
        for r in sorted({a, b}):
            if r > 0:
                out += [cmath.rect(r, 2 * math.pi * (k + 0.3) / per_circle)
                        for k in range(per_circle)]
    return out + list(region.points)


# ---------------------------------------------------------------------------
# block spectra and the extension theorems


def _region_check(name: str, ok: bool, lhs: SpectrumRegion, rhs: SpectrumRegion,
                  note: str = "") -> Check:
    return Check(name, ok, note=note, details={"lhs": str(lhs), "rhs": str(rhs)})


def block_spectrum_report(T: BlockTriangular, tol: ToleranceProfile = DEFAULT) -> dict:
    """Spectra of the diagonal entries and how they combine.

    The union is the spectrum when ``X`` is hyponormal and an upper bound
    otherwise.
    """
    sV = symbolic_spectrum(T.V, tol)
    sX = symbolic_spectrum(T.X, tol)
    union = sV | sX
    X = T.X
    hypo = window_psd(compose(adjoint(X), X) - compose(X, adjoint(X)), tol,
                      name="X hyponormal")
    e_zero = probe_equal(T.E, ZeroOp(T.H2, T.H1), tol, name="E = 0")
    v_unitary = _probe_unitary(T.V, tol)
    out = {"sigma_V": sV, "sigma_X": sX, "sigma": union,
           "mode": "equality" if hypo.passed else "inclusion",
           "X_hyponormal": hypo, "E_zero": bool(e_zero), "V_unitary": v_unitary}
    if not e_zero.passed and not v_unitary:
        target = SpectrumRegion.disk(1.0) | sX
        out["disk_form"] = _region_check("σ(T) = closed unit disk ∪ σ(X)", union == target,
                                         union, target)
    return out


def block_spectrum(T: BlockTriangular, tol: ToleranceProfile = DEFAULT) -> SpectrumRegion:
    return block_spectrum_report(T, tol)["sigma"]


def _as_block(R) -> BlockTriangular:
    return R if isinstance(R, BlockTriangular) else R.block()


def extension_spectra_check(T: BlockTriangular, R, tol: ToleranceProfile = DEFAULT,
                            eps: float = 1e-6, per_circle: int = 2) -> dict:
    """Region inclusions between ``T`` and an extension ``R``, with witnesses.

    Witnesses sit on the boundary of ``σ(R)``: operator-side vectors of
    the top-left entry and adjoint-side vectors of the bottom-right entry
    are approximate eigenvectors of the whole block, so each is certified on
    its entry.  Top-left points use ``V`` pushed through ``J1`` when
    available, since ``Ṽ J1 = J1 V``.
    """
    RB = _as_block(R)
    if _probe_unitary(T.V, tol):
        return {"status": "skipped", "passed": None,
                "reason": "V is unitary: the inclusion σ(R) ⊆ σ(T) needs a non-unitary V"}
    rt = block_spectrum_report(T, tol)
    rr = block_spectrum_report(RB, tol)
    sT, sR = rt["sigma"], rr["sigma"]
    sS, sN = rt["sigma_X"], rr["sigma_X"]
    checks = [
        _region_check("σ(N) ⊆ σ(X)", sN.issubset(sS), sN, sS),
        _region_check("σ(R) ⊆ σ(T)", sR.issubset(sT), sR, sT),
    ]
    if not rt["E_zero"]:
        disk = SpectrumRegion.disk(1.0)
        checks.append(_region_check("σ(T) = closed unit disk ∪ σ(X)", sT == disk | sS, sT,
                                    disk | sS))
        checks.append(_region_check("σ(R) = closed unit disk ∪ σ(N)", sR == disk | sN, sR,
                                    disk | sN))
    for name, rep in (("T", rt), ("R", rr)):
        if rep["mode"] != "equality":
            checks.append(Check(f"{name}: bottom-right entry hyponormal", False,
                                note="union of entry spectra is only an upper bound"))
    witnesses = []
    for lam in boundary_points(sR, per_circle):
        witnesses.append(_block_witness(T, RB, lam, eps, tol))
    produced = [w for w in witnesses if w["status"] != "unavailable"]
    wit_ok = all(w["status"] == "pass" for w in produced)
    if produced and len(produced) < len(witnesses):
        wit_ok = wit_ok and None
    passed = all(c.passed for c in checks) and wit_ok is not False
    return {"status": "pass" if passed else "fail", "passed": passed,
            "sigma_T": sT, "sigma_R": sR, "sigma_X": sS, "sigma_N": sN,
            "checks": checks, "witnesses": witnesses, "witness_eps": eps,
            "witnesses_passed": wit_ok}


def _block_witness(T, RB, lam, eps, tol) -> dict:
    attempts = [("V via J1", T.V, "operator"), ("Ṽ", RB.V, "operator"),
                ("N", RB.X, "adjoint")]
    reasons = []
    for label, op, side in attempts:
        try:
            if not symbolic_spectrum(op, tol).contains(lam):
                continue
            w = _witness(op, lam, eps, side, tol)
        except (WitnessRefused, SpectrumUnknown) as exc:
            reasons.append(f"{label}: {exc}")
            continue
        return {"lambda": [lam.real, lam.imag], "source": label, "side": side,
                "residual": w.residual, "support_size": w.support_size,
                "status": "pass" if w.residual <= eps else "fail"}
    return {"lambda": [lam.real, lam.imag], "status": "unavailable", "reasons": reasons}


def filling_holes_check(T, R, tol: ToleranceProfile = DEFAULT) -> dict:
    """Bounded components of the complement of ``σ(R)`` that meet ``σ(T)`` lie inside it."""
    sT = block_spectrum(_as_block(T), tol)
    sR = block_spectrum(_as_block(R), tol)
    comps = []
    ok = True
    for comp in sR.complement_components():
        meets = sT.meets_component(comp)
        entry = {"kind": comp["kind"], "inner_radius": comp["lo"],
                 "outer_radius": None if math.isinf(comp["hi"]) else comp["hi"],
                 "meets_sigma_T": meets}
        if not meets:
            entry["status"] = "exempt"
        elif not comp["bounded"]:
            entry["status"] = "fail"
            ok = False
        else:
            inside = sT.contains_component(comp)
            entry["contained"] = inside
            entry["status"] = "pass" if inside else "fail"
            ok = ok and inside
        comps.append(entry)
    return {"status": "pass" if ok else "fail", "passed": ok, "sigma_T": sT, "sigma_R": sR,
            "components": comps}


def witness_sweep(op: Operator, eps: float = WITNESS_EPS, per_piece: int = 8,
                  tol: ToleranceProfile = DEFAULT) -> list[dict]:
    """``eigen_witness`` at sample points of every piece of the symbolic spectrum."""
    out = []
    for pid, lam in sample_points(symbolic_spectrum(op, tol), per_piece):
        try:
            w = eigen_witness(op, lam, eps, tol=tol)
            out.append({"piece": pid, **w.to_json(), "status": "pass"})
        except (WitnessRefused, SpectrumUnknown) as exc:
            out.append({"piece": pid, "lambda": [lam.real, lam.imag], "status": "fail",
                        "reason": str(exc)})
    return out


def region_csv_rows(region: SpectrumRegion, n: int = 64) -> list[tuple[float, float, int]]:
    """``(re, im, component_id)`` boundary samples."""
    rows = []
    for cid, piece in enumerate(region.pieces()):
        for _, z in piece.boundary_samples(n):
            rows.append((z.real, z.imag, cid))
    return rows


def to_jsonable(rep):
    if isinstance(rep, SpectrumRegion):
        return rep.to_json()
    if isinstance(rep, Check):
        return rep.to_json()
    if isinstance(rep, dict):
        return {k: to_jsonable(v) for k, v in rep.items()}
    if isinstance(rep, (list, tuple)):
        return [to_jsonable(v) for v in rep]
    if isinstance(rep, complex):
        return [rep.real, rep.imag]
    return rep
