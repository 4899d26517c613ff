"""Weight sequences for unilateral shifts and finite atomic Berger measures."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .indexsets import StructuralError


@dataclass(frozen=True)
class BergerMeasure:
    """Finite atomic probability measure ``sum_j w_j delta_{t_j}`` on (0, inf)."""

    locations: tuple
    masses: tuple

    def __init__(self, atoms, mass_tol: float = 1e-12):
        atoms = [(float(t), float(w)) for t, w in atoms]
        if not atoms:
            raise StructuralError("a Berger measure needs at least one atom")
        atoms.sort()
        locs = tuple(t for t, _ in atoms)
        masses = tuple(w for _, w in atoms)
        if any(t <= 0 for t in locs):
            raise StructuralError("atom locations must be positive")
        if len(set(locs)) != len(locs):
            raise StructuralError("atom locations must be distinct")
        if any(w <= 0 for w in masses):
            raise StructuralError("atom masses must be positive")
        if abs(sum(masses) - 1.0) > mass_tol:
            raise StructuralError(f"masses sum to {sum(masses)!r}, expected 1")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "masses", masses)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locations, self.masses))

    @property
    def k(self) -> int:
        return len(self.locations)

    def moment(self, n: int) -> float:
        return math.fsum(w * t ** n for t, w in self.atoms)

    def log_moment(self, n: int) -> float:
        logs = [math.log(w) + n * math.log(t) for t, w in self.atoms]
        m = max(logs)
        return m + math.log(math.fsum(math.exp(x - m) for x in logs))

    def slice_probabilities(self, n: int) -> np.ndarray:
        """``p_j(n) = w_j t_j^n / gamma_n`` computed without overflow."""
        logs = np.array([math.log(w) + n * math.log(t) for t, w in self.atoms])
        logs -= logs.max()
        p = np.exp(logs)
        return p / p.sum()

    def max_location(self) -> float:
        return max(self.locations)

    def min_location(self) -> float:
        return min(self.locations)

    def power(self, n: int, r: int) -> "BergerMeasure":
        """Measure of the ``r``-th interleaved summand of the ``n``-th shift power.

        Atoms ``t_j^n`` with masses proportional to ``w_j t_j^r``.
        """
        p = self.slice_probabilities(r)
        return BergerMeasure([(t ** n, float(pj)) for t, pj in zip(self.locations, p)],
                             mass_tol=1e-9)

    def to_json(self) -> dict:
        return {"atoms": [[t, w] for t, w in self.atoms]}

    @classmethod
    def from_json(cls, data: dict) -> "BergerMeasure":
        return cls([tuple(a) for a in data["atoms"]])

    def __str__(self) -> str:
        return " + ".join(f"{w:g}·δ{t:g}" for t, w in self.atoms)


class WeightSequence:
    """Nonnegative weights ``weight(n)``, ``n >= 0``.

    Two kinds: an explicit prefix followed by a constant tail, or weights
    generated by a Berger measure via ``sqrt(gamma_{n+1} / gamma_n)``.
    """

    def __init__(self, prefix=(), tail: float = 1.0, measure: BergerMeasure | None = None):
        self.measure = measure
        if measure is None:
            self.prefix = tuple(float(x) for x in prefix)
            self.tail = float(tail)
            if any(x < 0 for x in self.prefix) or self.tail < 0:
                raise StructuralError("weights must be nonnegative")
        else:
            self.prefix = ()
            self.tail = math.sqrt(measure.max_location())
        self._cache: dict[int, float] = {}

    @classmethod
    def constant(cls, theta: float) -> "WeightSequence":
        return cls((), theta)

    @classmethod
    def explicit(cls, prefix, tail) -> "WeightSequence":
        return cls(prefix, tail)

    @classmethod
    def moments(cls, measure: BergerMeasure) -> "WeightSequence":
        return cls(measure=measure)

    @property
    def kind(self) -> str:
        return "moment" if self.measure is not None else "explicit"

    def weight(self, n: int) -> float:
        if n < 0:
            raise StructuralError("weights are indexed by n >= 0")
        if self.measure is None:
            return self.prefix[n] if n < len(self.prefix) else self.tail
        w = self._cache.get(n)
        if w is None:
            p = self.measure.slice_probabilities(n)
            w = math.sqrt(float(np.dot(p, self.measure.locations)))
            self._cache[n] = w
        return w

    def __call__(self, n: int) -> float:
        return self.weight(n)

    def gamma(self, n: int) -> float:
        """``gamma_n = prod_{l<n} weight(l)^2`` (the moments for a measure)."""
        if self.measure is not None:
            return self.measure.moment(n)
        return math.prod(self.weight(l) ** 2 for l in range(n))

    def sup(self) -> float:
        if self.measure is not None:
            return math.sqrt(self.measure.max_location())
        return max(self.prefix + (self.tail,))

    def inf(self) -> float:
        if self.measure is not None:
            # weights increase from sqrt(gamma_1) toward sqrt(max t)
            return self.weight(0)
        return min(self.prefix + (self.tail,))

    def is_constant(self) -> bool:
        if self.measure is not None:
            return self.measure.k == 1
        return all(x == self.tail for x in self.prefix)

    def first_change(self) -> int | None:
        """Smallest ``k`` with ``weight(k) != weight(k+1)``, or ``None`` when constant."""
        if self.is_constant():
            return None
        if self.measure is not None:
            return 0  # strictly increasing for >= 2 atoms
        vals = self.prefix + (self.tail,)
        for k in range(len(vals) - 1):
            if vals[k] != vals[k + 1]:
                return k
        return None

    def is_nondecreasing(self, upto: int) -> bool:
        return all(self.weight(n) <= self.weight(n + 1) * (1 + 1e-15) for n in range(upto))

    def power_summand(self, n: int, r: int) -> "WeightSequence":
        """Weights of the ``r``-th summand of ``S^n`` acting on ``e_{r + n m}``."""
        if self.measure is not None:
            return WeightSequence.moments(self.measure.power(n, r))
        horizon = len(self.prefix)
        prefix = []
        m = 0
        while r + n * m < horizon:
            prefix.append(math.prod(self.weight(r + n * m + i) for i in range(n)))
            m += 1
        return WeightSequence(prefix, self.tail ** n)

    def horizon(self) -> int:
        return len(self.prefix)

    def key(self) -> tuple:
        if self.measure is not None:
            return ("moment", self.measure.locations, self.measure.masses)
        return ("explicit", self.prefix, self.tail)

    def __eq__(self, other) -> bool:
        return isinstance(other, WeightSequence) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def to_json(self) -> dict:
        if self.measure is not None:
            return {"kind": "MomentGenerated", "measure": self.measure.to_json()}
        return {"kind": "ExplicitWithConstantTail", "prefix": list(self.prefix), "tail": self.tail}

    @classmethod
    def from_json(cls, data: dict) -> "WeightSequence":
        kind = data.get("kind")
        if kind == "MomentGenerated":
            return cls.moments(BergerMeasure.from_json(data["measure"]))
        if kind == "ExplicitWithConstantTail":
            return cls(data.get("prefix", []), data["tail"])
        if kind == "constant":
            return cls.constant(data["theta"])
        raise StructuralError(f"unknown weight sequence kind {kind!r}")

    def __repr__(self) -> str:
        if self.measure is not None:
            return f"WeightSequence(moments of {self.measure})"
        return f"WeightSequence({list(self.prefix)}, tail={self.tail})"
