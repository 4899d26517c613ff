"""Index sets labelling orthonormal bases, and injective maps between them.

Every Hilbert space in the package is ``l2(I)`` for an :class:`IndexSet` ``I``.
Indices are plain Python values:

* ``Nat``, ``Int``, ``Fin(n)``: ``int``
* ``DisjointUnion``: ``("L", i)`` or ``("R", j)``
* ``Product``: ``(i, j)``

Each index set carries a canonical enumeration (``rank``/``unrank``) of order
type omega (or its finite size), used for deterministic probe windows and for
index bijections between spaces of equal dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Iterator


class StructuralError(ValueError):
    """Shape, space or index mismatch in a structured expression."""


class IndexSet:
    size: int | None = None

    def contains(self, idx) -> bool:
        raise NotImplementedError

    def rank(self, idx) -> int:
        raise NotImplementedError

    def unrank(self, r: int):
        raise NotImplementedError

    @property
    def finite(self) -> bool:
        return self.size is not None

    def window(self, radius: int) -> list:
        n = radius if self.size is None else min(radius, self.size)
        return [self.unrank(r) for r in range(n)]

    def enumerate(self) -> Iterator:
        r = 0
        while self.size is None or r < self.size:
            yield self.unrank(r)
            r += 1

    def path(self, idx) -> str:
        raise NotImplementedError

    def check(self, idx) -> None:
        if not self.contains(idx):
            raise StructuralError(f"index {idx!r} is not in {self}")

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Nat(IndexSet):
    def contains(self, idx) -> bool:
        return isinstance(idx, int) and not isinstance(idx, bool) and idx >= 0

    def rank(self, idx) -> int:
        return idx

    def unrank(self, r: int):
        return r

    def path(self, idx) -> str:
        return str(idx)

    def __str__(self) -> str:
        return "Nat"

    def to_json(self) -> dict:
        return {"kind": "Nat"}


@dataclass(frozen=True)
class Int(IndexSet):
    def contains(self, idx) -> bool:
        return isinstance(idx, int) and not isinstance(idx, bool)

    def rank(self, idx) -> int:
        # zigzag 0, -1, 1, -2, 2, ...
        return 2 * idx if idx >= 0 else -2 * idx - 1

    def unrank(self, r: int):
        return r // 2 if r % 2 == 0 else -(r + 1) // 2

    def path(self, idx) -> str:
        return str(idx)

    def __str__(self) -> str:
        return "Int"

    def to_json(self) -> dict:
        return {"kind": "Int"}


@dataclass(frozen=True)
class Fin(IndexSet):
    n: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise StructuralError(f"Fin(n) requires n >= 1, got {self.n!r}")

    @property
    def size(self) -> int:  # type: ignore[override]
        return self.n

    def contains(self, idx) -> bool:
        return isinstance(idx, int) and not isinstance(idx, bool) and 0 <= idx < self.n

    def rank(self, idx) -> int:
        return idx

    def unrank(self, r: int):
        if not 0 <= r < self.n:
            raise StructuralError(f"rank {r} out of Fin({self.n})")
        return r

    def path(self, idx) -> str:
        return str(idx)

    def __str__(self) -> str:
        return f"Fin({self.n})"

    def to_json(self) -> dict:
        return {"kind": "Fin", "n": self.n}


def _interleave_rank(own_rank: int, other_size: int | None, parity: int) -> int:
    if other_size is None or own_rank < other_size:
        return 2 * own_rank + parity
    return 2 * other_size + (own_rank - other_size)


def _interleave_unrank(r: int, left_size: int | None, right_size: int | None) -> tuple[str, int]:
    finite = [s for s in (left_size, right_size) if s is not None]
    m = min(finite) if finite else None
    if m is None or r < 2 * m:
        return ("L" if r % 2 == 0 else "R"), r // 2
    rest = m + (r - 2 * m)
    # past the alternating prefix only the larger (or infinite) side remains
    if left_size is None or (right_size is not None and left_size > right_size):
        return "L", rest
    return "R", rest


@dataclass(frozen=True)
class DisjointUnion(IndexSet):
    left: IndexSet
    right: IndexSet

    @property
    def size(self) -> int | None:  # type: ignore[override]
        if self.left.size is None or self.right.size is None:
            return None
        return self.left.size + self.right.size

    def contains(self, idx) -> bool:
        if not (isinstance(idx, tuple) and len(idx) == 2 and idx[0] in ("L", "R")):
            return False
        return (self.left if idx[0] == "L" else self.right).contains(idx[1])

    def rank(self, idx) -> int:
        tag, sub = idx
        if tag == "L":
            return _interleave_rank(self.left.rank(sub), self.right.size, 0)
        return _interleave_rank(self.right.rank(sub), self.left.size, 1)

    def unrank(self, r: int):
        if self.size is not None and r >= self.size:
            raise StructuralError(f"rank {r} out of {self}")
        tag, sub = _interleave_unrank(r, self.left.size, self.right.size)
        return (tag, (self.left if tag == "L" else self.right).unrank(sub))

    def path(self, idx) -> str:
        tag, sub = idx
        return f"{tag}/" + (self.left if tag == "L" else self.right).path(sub)

    def __str__(self) -> str:
        return f"({self.left} ⊕ {self.right})"

    def to_json(self) -> dict:
        return {"kind": "DisjointUnion", "left": self.left.to_json(), "right": self.right.to_json()}


def _cantor_unrank(r: int) -> tuple[int, int]:
    d = (math.isqrt(8 * r + 1) - 1) // 2
    b = r - d * (d + 1) // 2
    return d - b, b


@dataclass(frozen=True)
class Product(IndexSet):
    a: IndexSet
    b: IndexSet

    @property
    def size(self) -> int | None:  # type: ignore[override]
        if self.a.size is None or self.b.size is None:
            return None
        return self.a.size * self.b.size

    def contains(self, idx) -> bool:
        return (isinstance(idx, tuple) and len(idx) == 2 and not isinstance(idx[0], str)
                and self.a.contains(idx[0]) and self.b.contains(idx[1]))

    def rank(self, idx) -> int:
        ra, rb = self.a.rank(idx[0]), self.b.rank(idx[1])
        sa, sb = self.a.size, self.b.size
        if sb is not None:
            return ra * sb + rb
        if sa is not None:
            return rb * sa + ra
        d = ra + rb
        return d * (d + 1) // 2 + rb

    def unrank(self, r: int):
        sa, sb = self.a.size, self.b.size
        if sb is not None:
            ra, rb = divmod(r, sb)
        elif sa is not None:
            rb, ra = divmod(r, sa)
        else:
            ra, rb = _cantor_unrank(r)
        return (self.a.unrank(ra), self.b.unrank(rb))

    def path(self, idx) -> str:
        return f"({self.a.path(idx[0])},{self.b.path(idx[1])})"

    def __str__(self) -> str:
        return f"({self.a} ⊗ {self.b})"

    def to_json(self) -> dict:
        return {"kind": "Product", "a": self.a.to_json(), "b": self.b.to_json()}


def indexset_from_json(data: dict) -> IndexSet:
    kind = data.get("kind")
    if kind == "Nat":
        return Nat()
    if kind == "Int":
        return Int()
    if kind == "Fin":
        return Fin(int(data["n"]))
    if kind == "DisjointUnion":
        return DisjointUnion(indexset_from_json(data["left"]), indexset_from_json(data["right"]))
    if kind == "Product":
        return Product(indexset_from_json(data["a"]), indexset_from_json(data["b"]))
    raise StructuralError(f"unknown index set kind {kind!r}")


def index_to_json(idx) -> Any:
    if isinstance(idx, tuple):
        return [index_to_json(x) for x in idx]
    return idx


def index_from_json(data) -> Any:
    if isinstance(data, list):
        return tuple(index_from_json(x) for x in data)
    return data


# ---------------------------------------------------------------------------
# injective index maps


class IndexMap:
    """Injective map ``domain -> codomain`` between index sets."""

    domain: IndexSet
    codomain: IndexSet

    def __call__(self, idx):
        raise NotImplementedError

    def preimage(self, idx):
        """Return the unique preimage of ``idx`` or ``None``."""
        raise NotImplementedError

    def key(self) -> tuple:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def image_disjoint(self, other: "IndexMap") -> bool | None:
        return None


@dataclass(frozen=True)
class IdentityMap(IndexMap):
    domain: IndexSet

    @property
    def codomain(self) -> IndexSet:  # type: ignore[override]
        return self.domain

    def __call__(self, idx):
        return idx

    def preimage(self, idx):
        return idx if self.domain.contains(idx) else None

    def key(self):
        return ("id", self.domain)

    def to_json(self):
        return {"map": "identity", "domain": self.domain.to_json()}


@dataclass(frozen=True)
class TagMap(IndexMap):
    """``i -> (side, i)`` into ``DisjointUnion``."""

    codomain: DisjointUnion
    side: str

    @property
    def domain(self) -> IndexSet:  # type: ignore[override]
        return self.codomain.left if self.side == "L" else self.codomain.right

    def __call__(self, idx):
        return (self.side, idx)

    def preimage(self, idx):
        if isinstance(idx, tuple) and idx[0] == self.side:
            return idx[1]
        return None

    def key(self):
        return ("tag", self.codomain, self.side)

    def to_json(self):
        return {"map": "tag", "into": self.codomain.to_json(), "side": self.side}

    def image_disjoint(self, other):
        if isinstance(other, TagMap) and other.codomain == self.codomain:
            return other.side != self.side
        return None


@dataclass(frozen=True)
class RankMap(IndexMap):
    """``idx -> scale * rank(idx) + offset`` from any index set into ``Nat``."""

    domain: IndexSet
    scale: int
    offset: int

    def __post_init__(self):
        if self.scale < 1 or self.offset < 0:
            raise StructuralError("RankMap needs scale >= 1 and offset >= 0")

    @property
    def codomain(self) -> IndexSet:  # type: ignore[override]
        return Nat()

    def __call__(self, idx):
        return self.scale * self.domain.rank(idx) + self.offset

    def preimage(self, idx):
        if not isinstance(idx, int) or idx < self.offset:
            return None
        q, rem = divmod(idx - self.offset, self.scale)
        if rem:
            return None
        if self.domain.size is not None and q >= self.domain.size:
            return None
        return self.domain.unrank(q)

    def key(self):
        return ("rank", self.domain, self.scale, self.offset)

    def to_json(self):
        return {"map": "rank", "domain": self.domain.to_json(), "scale": self.scale,
                "offset": self.offset}

    def image_disjoint(self, other):
        if not isinstance(other, RankMap):
            return None
        g = math.gcd(self.scale, other.scale)
        if (other.offset - self.offset) % g:
            return True
        if self.domain.size is None and other.domain.size is None:
            return False
        return None


@dataclass(frozen=True)
class ChainMap(IndexMap):
    """Apply ``maps[0]`` first, then ``maps[1]``, ..."""

    maps: tuple

    @property
    def domain(self) -> IndexSet:  # type: ignore[override]
        return self.maps[0].domain

    @property
    def codomain(self) -> IndexSet:  # type: ignore[override]
        return self.maps[-1].codomain

    def __call__(self, idx):
        for m in self.maps:
            idx = m(idx)
        return idx

    def preimage(self, idx):
        for m in reversed(self.maps):
            idx = m.preimage(idx)
            if idx is None:
                return None
        return idx

    def key(self):
        return ("chain",) + tuple(m.key() for m in self.maps)

    def to_json(self):
        return {"map": "chain", "maps": [m.to_json() for m in self.maps]}

    def image_disjoint(self, other):
        if isinstance(other, ChainMap):
            last_a, last_b = self.maps[-1], other.maps[-1]
            if isinstance(last_a, TagMap) and isinstance(last_b, TagMap) and last_a.image_disjoint(last_b):
                return True
        elif isinstance(other, TagMap):
            last = self.maps[-1]
            if isinstance(last, TagMap) and last.image_disjoint(other):
                return True
        return None


@dataclass(frozen=True)
class SumMap(IndexMap):
    """Map on a ``DisjointUnion`` domain acting by ``left``/``right`` on the two parts."""

    left: IndexMap
    right: IndexMap

    def __post_init__(self):
        if self.left.codomain != self.right.codomain:
            raise StructuralError("SumMap parts must share a codomain")

    @property
    def domain(self) -> IndexSet:  # type: ignore[override]
        return DisjointUnion(self.left.domain, self.right.domain)

    @property
    def codomain(self) -> IndexSet:  # type: ignore[override]
        return self.left.codomain

    def __call__(self, idx):
        tag, sub = idx
        return (self.left if tag == "L" else self.right)(sub)

    def preimage(self, idx):
        p = self.left.preimage(idx)
        if p is not None:
            return ("L", p)
        p = self.right.preimage(idx)
        return None if p is None else ("R", p)

    def key(self):
        return ("sum", self.left.key(), self.right.key())

    def to_json(self):
        return {"map": "sum", "left": self.left.to_json(), "right": self.right.to_json()}


@dataclass(frozen=True)
class PairMap(IndexMap):
    """``(i, j) -> (f(i), g(j))`` between products."""

    first: IndexMap
    second: IndexMap

    @property
    def domain(self) -> IndexSet:  # type: ignore[override]
        return Product(self.first.domain, self.second.domain)

    @property
    def codomain(self) -> IndexSet:  # type: ignore[override]
        return Product(self.first.codomain, self.second.codomain)

    def __call__(self, idx):
        return (self.first(idx[0]), self.second(idx[1]))

    def preimage(self, idx):
        if not isinstance(idx, tuple):
            return None
        a, b = self.first.preimage(idx[0]), self.second.preimage(idx[1])
        if a is None or b is None:
            return None
        return (a, b)

    def key(self):
        return ("pair", self.first.key(), self.second.key())

    def to_json(self):
        return {"map": "pair", "first": self.first.to_json(), "second": self.second.to_json()}


class FunctionMap(IndexMap):
    """Injective map given by a pair of Python callables.

    Used for generated bijections (e.g. between enumerations of basis sets).
    Serializes as a rule tag plus sample pairs; it cannot be rebuilt from JSON.
    """

    def __init__(self, domain: IndexSet, codomain: IndexSet, forward: Callable,
                 backward: Callable, rule: str):
        self.domain = domain
        self.codomain = codomain
        self._forward = forward
        self._backward = backward
        self.rule = rule

    def __call__(self, idx):
        return self._forward(idx)

    def preimage(self, idx):
        return self._backward(idx)

    def key(self):
        return ("fn", self.rule, id(self))

    def to_json(self):
        sample = [[index_to_json(i), index_to_json(self(i))] for i in self.domain.window(16)]
        return {"map": "function", "rule": self.rule, "domain": self.domain.to_json(),
                "codomain": self.codomain.to_json(), "sample": sample}


def indexmap_from_json(data: dict) -> IndexMap:
    kind = data.get("map")
    if kind == "identity":
        return IdentityMap(indexset_from_json(data["domain"]))
    if kind == "tag":
        into = indexset_from_json(data["into"])
        if not isinstance(into, DisjointUnion):
            raise StructuralError("tag map needs a DisjointUnion codomain")
        return TagMap(into, data["side"])
    if kind == "rank":
        return RankMap(indexset_from_json(data["domain"]), int(data["scale"]), int(data["offset"]))
    if kind == "chain":
        return ChainMap(tuple(indexmap_from_json(m) for m in data["maps"]))
    if kind == "sum":
        return SumMap(indexmap_from_json(data["left"]), indexmap_from_json(data["right"]))
    if kind == "pair":
        return PairMap(indexmap_from_json(data["first"]), indexmap_from_json(data["second"]))
    raise StructuralError(f"index map kind {kind!r} cannot be rebuilt from JSON")


def dim_marker(space: IndexSet | None) -> int | str:
    """Dimension as an int, or the marker ``"countable"``."""
    if space is None:
        return 0
    return "countable" if space.size is None else space.size
