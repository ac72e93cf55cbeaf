"""Integer-lattice geometry on Z^d.

Sites are tuples of ints. Boxes are half-open products ``[lower, lower + side)``
so that pavings tile the lattice exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

Site = tuple[int, ...]


def as_site(x: Iterable[int] | int) -> Site:
    if isinstance(x, int):
        return (x,)
    return tuple(int(c) for c in x)


def dist_linf(x: Sequence[int], y: Sequence[int]) -> int:
    """Supremum distance between two sites."""
    if len(x) != len(y):
        raise ValueError(f"dimension mismatch: {len(x)} vs {len(y)}")
    return max((abs(a - b) for a, b in zip(x, y)), default=0)


def norm_linf(x: Sequence[int]) -> int:
    return max((abs(c) for c in x), default=0)


def neighbors(x: Site) -> list[Site]:
    """Nearest neighbours in the order +e_1, -e_1, ..., +e_d, -e_d."""
    out = []
    for i in range(len(x)):
        for s in (1, -1):
            y = list(x)
            y[i] += s
            out.append(tuple(y))
    return out


def shift(x: Site, direction: int) -> Site:
    """Move ``x`` one step along a signed axis label (+j is +e_j, -j is -e_j)."""
    i = abs(direction) - 1
    y = list(x)
    y[i] += 1 if direction > 0 else -1
    return tuple(y)


def directions(d: int) -> list[int]:
    return [s * j for j in range(1, d + 1) for s in (1, -1)]


def internal_boundary(A: Iterable[Sequence[int]]) -> set[Site]:
    """Sites of ``A`` at sup-distance 1 from the complement of ``A``.

    Sup-distance 1 means some site of the 3^d - 1 surrounding sites is missing
    from ``A``, diagonals included.
    """
    A = {as_site(a) for a in A}
    if not A:
        return set()
    d = len(next(iter(A)))
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]
    return {x for x in A if any(tuple(a + b for a, b in zip(x, o)) not in A for o in offsets)}


@dataclass(frozen=True)
class Box:
    lower: Site
    side: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", as_site(self.lower))
        side = self.side
        if isinstance(side, int):
            side = (side,) * len(self.lower)
        side = tuple(int(s) for s in side)
        if len(side) != len(self.lower):
            raise ValueError("lower and side have different dimensions")
        if any(s <= 0 for s in side):
            raise ValueError(f"box sides must be positive, got {side}")
        object.__setattr__(self, "side", side)

    @classmethod
    def cube(cls, side: int, d: int, lower: Sequence[int] | None = None) -> "Box":
        return cls(as_site(lower) if lower is not None else (0,) * d, (side,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def upper(self) -> Site:
        """Exclusive upper corner."""
        return tuple(a + s for a, s in zip(self.lower, self.side))

    def __contains__(self, x) -> bool:
        return all(a <= c < a + s for c, a, s in zip(x, self.lower, self.side))

    def __len__(self) -> int:
        n = 1
        for s in self.side:
            n *= s
        return n

    def __iter__(self) -> Iterator[Site]:
        ranges = [range(a, a + s) for a, s in zip(self.lower, self.side)]
        return iter(itertools.product(*ranges))

    def sites(self) -> list[Site]:
        return list(self)

    def on_boundary(self, x: Sequence[int]) -> bool:
        """Membership in the internal boundary, in O(d)."""
        if x not in self:
            return False
        return any(c == a or c == a + s - 1 for c, a, s in zip(x, self.lower, self.side))

    def boundary(self) -> set[Site]:
        return {x for x in self if self.on_boundary(x)}

    def interior(self) -> list[Site]:
        return [x for x in self if not self.on_boundary(x)]

    def translate(self, v: Sequence[int]) -> "Box":
        return Box(tuple(a + b for a, b in zip(self.lower, v)), self.side)

    def contains_box(self, other: "Box") -> bool:
        return all(
            a <= b and b + t <= a + s
            for a, s, b, t in zip(self.lower, self.side, other.lower, other.side)
        )

    def to_json(self) -> dict:
        return {"lower": list(self.lower), "side": list(self.side)}

    @classmethod
    def from_json(cls, obj: dict) -> "Box":
        side = obj["side"]
        lower = obj.get("lower")
        if lower is None:
            d = len(side) if isinstance(side, list) else int(obj["d"])
            lower = [0] * d
        return cls(tuple(lower), tuple(side) if isinstance(side, list) else side)


@dataclass(frozen=True)
class Paving:
    """Disjoint tiling of Z^d by the boxes ``[0, side)^d + side * k + offset``."""

    side: int
    offset: Site

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError("paving side must be positive")
        object.__setattr__(self, "offset", as_site(self.offset))

    @property
    def d(self) -> int:
        return len(self.offset)

    def index(self, x: Sequence[int]) -> Site:
        return tuple((c - o) // self.side for c, o in zip(x, self.offset))

    def box(self, k: Sequence[int]) -> Box:
        lower = tuple(self.side * ki + o for ki, o in zip(k, self.offset))
        return Box(lower, (self.side,) * self.d)

    def locate(self, x: Sequence[int]) -> tuple[Site, Box]:
        k = self.index(x)
        return k, self.box(k)

    def in_half_kernel(self, x: Sequence[int]) -> bool:
        """Whether ``x`` lies in the centred sub-box ``[side/4, 3 side/4)`` of its tile."""
        for c, o in zip(x, self.offset):
            u = (c - o) % self.side
            if not (4 * u >= self.side and 4 * u < 3 * self.side):
                return False
        return True

    def half_kernel(self, k: Sequence[int]) -> list[Site]:
        return [x for x in self.box(k) if self.in_half_kernel(x)]


def paving_index(p: Paving, x: Sequence[int]) -> tuple[Site, Box]:
    return p.locate(x)


@dataclass(frozen=True)
class KernelTriple:
    """Nested boxes C2 in C1 in C0 with buffer rings of width ``ring``."""

    outer: Box
    middle: Box
    inner: Box
    ring: int
    scale: int

    def to_json(self) -> dict:
        return {
            "d": self.outer.d,
            "side": self.scale,
            "offset": list(self.outer.lower),
            "lower": list(self.outer.lower),
            "ring": self.ring,
            "boxes": {
                "C0": self.outer.to_json(),
                "C1": self.middle.to_json(),
                "C2": self.inner.to_json(),
            },
        }

    def level(self, q: int) -> Box:
        return (self.outer, self.middle, self.inner)[q]


def kernel_triple(L: int, R: int, index: Sequence[int] | int = 0, d: int | None = None) -> KernelTriple:
    """Boxes ``[0,L)``, ``[R, L-R)`` and ``[2R, L-2R)`` (per axis) anchored at ``L * index``."""
    if isinstance(index, int):
        index = (index,) * (d or 1)
    index = as_site(index)
    if d is not None and len(index) != d:
        raise ValueError("index dimension does not match d")
    if L <= 0 or R <= 0:
        raise ValueError("L and R must be positive")
    if 5 * R > L:
        raise ValueError(f"kernel boxes need 5R <= L, got 5*{R} = {5 * R} > {L}")
    base = tuple(L * i for i in index)
    dd = len(index)

    def box(a: int) -> Box:
        return Box(tuple(b + a for b in base), (L - 2 * a,) * dd)

    return KernelTriple(box(0), box(R), box(2 * R), R, L)


@dataclass(frozen=True)
class Annuli:
    """Ball ``B(0, 2^i0)`` followed by the shells ``2^(i-1) < |x| <= 2^i``."""

    d: int
    i0: int
    i_max: int

    def __post_init__(self):
        if self.i_max < self.i0:
            raise ValueError("i_max must be >= i0")
        if self.i0 < 0:
            raise ValueError("i0 must be nonnegative")

    @property
    def radius(self) -> int:
        return 2**self.i_max

    def bounds(self, i: int) -> tuple[int, int]:
        """Norm range ``(lo, hi]`` of annulus ``i``; the central ball uses lo = -1."""
        if i == self.i0:
            return -1, 2**self.i0
        return 2 ** (i - 1), 2**i

    def membership(self, x: Sequence[int]) -> int | None:
        r = norm_linf(x)
        if r <= 2**self.i0:
            return self.i0
        if r > self.radius:
            return None
        return (r - 1).bit_length()

    def sites(self, i: int) -> list[Site]:
        lo, hi = self.bounds(i)
        rng = range(-hi, hi + 1)
        return [x for x in itertools.product(rng, repeat=self.d) if lo < norm_linf(x) <= hi]

    def describe(self) -> list[dict]:
        return [
            {"index": i, "norm_gt": max(lo, -1), "norm_le": hi}
            for i in range(self.i0, self.i_max + 1)
            for lo, hi in [self.bounds(i)]
        ]


def dyadic_annuli(i0: int, i_max: int, d: int = 1) -> Annuli:
    return Annuli(d, i0, i_max)


class SievedSet:
    """Sites of ``C^q`` of a scale-(k+1) box that also lie in some inner box C2 of scale k.

    ``outer`` is the scale-(k+1) kernel triple; ``L`` and ``R`` are the scale-k
    side and ring, whose C2 boxes are anchored on the lattice ``L * Z^d``.
    """

    def __init__(self, outer: KernelTriple, q: int, L: int, R: int):
        if q not in (0, 1, 2):
            raise ValueError("q must be 0, 1 or 2")
        if 5 * R > L:
            raise ValueError(f"inner scale needs 5R <= L, got 5*{R} > {L}")
        self.region = outer.level(q)
        self.L, self.R = L, R

    def __contains__(self, x) -> bool:
        if x not in self.region:
            return False
        return all(2 * self.R <= c % self.L < self.L - 2 * self.R for c in x)

    def sites(self) -> list[Site]:
        return [x for x in self.region if x in self]
