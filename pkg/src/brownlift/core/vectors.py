"""Finitely supported vectors in l2 over an index set."""
from __future__ import annotations

import math

import numpy as np

from .indexsets import IndexSet, StructuralError

DROP_TOL = 1e-14


class SupportedVector:
    __slots__ = ("space", "entries")

    def __init__(self, space: IndexSet, entries: dict | None = None, drop_tol: float = DROP_TOL):
        self.space = space
        self.entries = {i: complex(c) for i, c in (entries or {}).items() if abs(c) > drop_tol}

    @classmethod
    def basis(cls, space: IndexSet, idx) -> "SupportedVector":
        space.check(idx)
        return cls(space, {idx: 1.0})

    @classmethod
    def zero(cls, space: IndexSet) -> "SupportedVector":
        return cls(space, {})

    @classmethod
    def from_array(cls, space: IndexSet, indices, values) -> "SupportedVector":
        return cls(space, dict(zip(indices, values)))

    @classmethod
    def random(cls, space: IndexSet, radius: int, rng: np.random.Generator) -> "SupportedVector":
        window = space.window(radius)
        count = int(rng.integers(1, len(window) + 1))
        picks = rng.choice(len(window), size=count, replace=False)
        vals = rng.normal(size=count) + 1j * rng.normal(size=count)
        return cls(space, {window[int(p)]: v for p, v in zip(picks, vals)})

    def __getitem__(self, idx) -> complex:
        return self.entries.get(idx, 0j)

    def support(self) -> list:
        return sorted(self.entries, key=self.space.rank)

    def inner(self, other: "SupportedVector") -> complex:
        """``<self, other>``, linear in the first slot."""
        self._same(other)
        small, big = (self.entries, other.entries)
        return sum(c * big[i].conjugate() for i, c in small.items() if i in big)

    def norm(self) -> float:
        return math.sqrt(math.fsum(abs(c) ** 2 for c in self.entries.values()))

    def __add__(self, other: "SupportedVector") -> "SupportedVector":
        self._same(other)
        out = dict(self.entries)
        for i, c in other.entries.items():
            out[i] = out.get(i, 0j) + c
        return SupportedVector(self.space, out)

    def __sub__(self, other: "SupportedVector") -> "SupportedVector":
        return self + other * -1.0

    def __mul__(self, c: complex) -> "SupportedVector":
        return SupportedVector(self.space, {i: c * v for i, v in self.entries.items()})

    __rmul__ = __mul__

    def pruned(self, drop_tol: float) -> "SupportedVector":
        return SupportedVector(self.space, self.entries, drop_tol)

    def _same(self, other: "SupportedVector") -> None:
        if self.space != other.space:
            raise StructuralError(f"vector spaces differ: {self.space} vs {other.space}")

    def to_json(self) -> dict:
        from .indexsets import index_to_json
        return {"space": self.space.to_json(),
                "entries": [[index_to_json(i), [self.entries[i].real, self.entries[i].imag]]
                            for i in self.support()]}

    def __repr__(self) -> str:
        body = ", ".join(f"{self.space.path(i)}: {self.entries[i]:.6g}" for i in self.support()[:8])
        more = "" if len(self.entries) <= 8 else f", ... ({len(self.entries)} entries)"
        return f"SupportedVector({{{body}{more}}})"
