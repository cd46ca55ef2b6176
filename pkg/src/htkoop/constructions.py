"""Explicit elements of F_{n,r}: the contracting maps g_m, their localizations to
standard n-adic intervals and admissible sets, and transporters between
Lambda-segments."""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .nadic import (
    GroupParams,
    Piece,
    PLMap,
    compose,
    identity,
    interval_measure,
    invert,
    merge_intervals,
)
from .scalars import is_nadic, nadic_level

__all__ = [
    "NAdicInterval",
    "AdmissibleSet",
    "LambdaSegment",
    "AffineMap",
    "make_gm",
    "make_affine_onto",
    "make_gmI",
    "make_gmA",
    "transporter",
    "approximate_by_admissible",
    "power_decomposition",
    "random_admissible",
    "random_tree_pair",
    "random_element",
]


@dataclass(frozen=True, order=True)
class NAdicInterval:
    """Standard interval ``[r*p/n**m, r*(p+1)/n**m)``."""

    params: GroupParams
    level: int
    index: int

    def __post_init__(self):
        if self.level < 0 or not 0 <= self.index < self.params.n ** self.level:
            raise ValueError(f"invalid standard interval {self.level}:{self.index} for n={self.params.n}")

    @property
    def left(self) -> Fraction:
        return Fraction(self.params.r * self.index, self.params.n ** self.level)

    @property
    def right(self) -> Fraction:
        return Fraction(self.params.r * (self.index + 1), self.params.n ** self.level)

    @property
    def bounds(self) -> tuple[Fraction, Fraction]:
        return self.left, self.right

    def children(self) -> list["NAdicInterval"]:
        n = self.params.n
        return [NAdicInterval(self.params, self.level + 1, self.index * n + j) for j in range(n)]

    def measure(self) -> Fraction:
        return Fraction(1, self.params.n ** self.level)

    def __str__(self):
        return f"{self.level}:{self.index}"

    @classmethod
    def parse(cls, params: GroupParams, text: str) -> "NAdicInterval":
        try:
            level, index = (int(t) for t in text.strip().split(":"))
        except ValueError as exc:
            raise ValueError(f"interval must look like 'level:index', got {text!r}") from exc
        return cls(params, level, index)


def _covered(lo: Fraction, hi: Fraction, ivs: Sequence[tuple[Fraction, Fraction]]) -> Fraction:
    return sum((max(Fraction(0), min(hi, b) - max(lo, a)) for a, b in ivs), Fraction(0))


class AdmissibleSet:
    """Finite union of standard intervals, stored in canonical (coarsest) form.

    The canonical decomposition is also the partition used for g_m^A.
    """

    __slots__ = ("params", "intervals")

    def __init__(self, params: GroupParams, intervals: Iterable[NAdicInterval] = ()):
        intervals = list(intervals)
        for iv in intervals:
            if iv.params != params:
                raise ValueError("interval params differ from set params")
        self.params = params
        self.intervals = tuple(self._canonicalize(params, intervals))

    @staticmethod
    def _canonicalize(params, intervals) -> list[NAdicInterval]:
        ivs = merge_intervals(iv.bounds for iv in intervals)
        if not ivs:
            return []
        out: list[NAdicInterval] = []

        def visit(node: NAdicInterval):
            lo, hi = node.bounds
            c = _covered(lo, hi, ivs)
            if c == hi - lo:
                out.append(node)
            elif c > 0:
                for ch in node.children():
                    visit(ch)

        visit(NAdicInterval(params, 0, 0))
        return out

    @classmethod
    def whole(cls, params: GroupParams) -> "AdmissibleSet":
        return cls(params, [NAdicInterval(params, 0, 0)])

    @classmethod
    def parse(cls, params: GroupParams, text: str) -> "AdmissibleSet":
        """``"all"``, ``"empty"``/``""`` or a comma list of ``level:index``."""
        text = text.strip()
        if text in ("", "empty"):
            return cls(params)
        if text == "all":
            return cls.whole(params)
        return cls(params, [NAdicInterval.parse(params, t) for t in text.split(",")])

    def __str__(self):
        return ",".join(str(iv) for iv in self.intervals) if self.intervals else "empty"

    def __repr__(self):
        return f"AdmissibleSet(n={self.params.n}, r={self.params.r}; {self})"

    def __eq__(self, other):
        if not isinstance(other, AdmissibleSet):
            return NotImplemented
        return self.params == other.params and self.intervals == other.intervals

    def __hash__(self):
        return hash((self.params, self.intervals))

    def __bool__(self):
        return bool(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def as_intervals(self) -> list[tuple[Fraction, Fraction]]:
        return merge_intervals(iv.bounds for iv in self.intervals)

    def measure(self) -> Fraction:
        return sum((iv.measure() for iv in self.intervals), Fraction(0))

    def max_level(self) -> int:
        return max((iv.level for iv in self.intervals), default=0)


@dataclass(frozen=True)
class LambdaSegment:
    """``[(n-1)p/n**m, (n-1)(p+1)/n**m]``, required to sit strictly inside (0, r)."""

    params: GroupParams
    m: int
    p: int

    def __post_init__(self):
        lo, hi = self.left, self.right
        if not (lo > 0 and hi < self.params.r):
            raise ValueError(f"segment [{lo}, {hi}] is not inside (0, {self.params.r})")

    @property
    def left(self) -> Fraction:
        n = self.params.n
        return Fraction((n - 1) * self.p, n**self.m)

    @property
    def right(self) -> Fraction:
        n = self.params.n
        return Fraction((n - 1) * (self.p + 1), n**self.m)


@dataclass(frozen=True)
class AffineMap:
    """``x -> n**slope_exponent * x + offset``."""

    n: int
    slope_exponent: int
    offset: Fraction

    def __call__(self, x) -> Fraction:
        return Fraction(self.n) ** self.slope_exponent * Fraction(x) + self.offset

    def inverse(self) -> "AffineMap":
        s = Fraction(self.n) ** self.slope_exponent
        return AffineMap(self.n, -self.slope_exponent, -self.offset / s)


def make_gm(params: GroupParams, m: int) -> PLMap:
    """Identity on ``[0, r/n^{2m})``, slope ``n^m`` up to ``r/n^m``, slope ``n^{-m}`` after."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    n, r = params.n, params.r
    b1, b2 = Fraction(r, n ** (2 * m)), Fraction(r, n**m)
    return PLMap(params, (
        Piece(Fraction(0), b1, 0, Fraction(0)),
        Piece(b1, b2, m, -b2 + b1),
        Piece(b2, Fraction(r), -m, r - b2),
    ))


def make_affine_onto(I: NAdicInterval) -> AffineMap:
    """The increasing affine map of ``[0, r]`` onto ``I``."""
    return AffineMap(I.params.n, -I.level, I.left)


def _localize(g: PLMap, I: NAdicInterval) -> PLMap:
    """``J g J^{-1}`` on I, identity elsewhere."""
    params = g.params
    J = make_affine_onto(I)
    lo, hi = I.bounds
    pieces = []
    if lo > 0:
        pieces.append(Piece(Fraction(0), lo, 0, Fraction(0)))
    for p in g.pieces:
        # J(n^e J^{-1}(x) + off) with J(y) = y/n^L + lo
        off = -params.slope(p.e) * lo + p.offset * params.slope(-I.level) + lo
        pieces.append(Piece(J(p.a), J(p.b), p.e, off))
    if hi < params.r:
        pieces.append(Piece(hi, Fraction(params.r), 0, Fraction(0)))
    return PLMap(params, tuple(pieces))


def make_gmI(I: NAdicInterval, m: int) -> PLMap:
    return _localize(make_gm(I.params, m), I)


def make_gmA(A: AdmissibleSet, m: int, order: Sequence[int] | None = None) -> PLMap:
    """Product of the g_m^I over the canonical partition of ``A``.

    ``order`` permutes the factors (they commute; exposed for testing).
    """
    if not A:
        raise ValueError("g_m^A needs a nonempty admissible set")
    factors = [make_gmI(I, m) for I in A.intervals]
    if order is not None:
        factors = [factors[i] for i in order]
    g = identity(A.params)
    for f in factors:
        g = compose(g, f)
    return g


def power_decomposition(length: Fraction, n: int) -> list[int]:
    """Exponents k (descending) with ``sum(n**k) == length``, from the base-n digits."""
    length = Fraction(length)
    if length <= 0 or not is_nadic(length, n):
        raise ValueError(f"{length} is not a positive element of Z[1/{n}]")
    shift = nadic_level(length, n)
    N = int(length * n**shift)
    out: list[int] = []
    pos = 0
    while N:
        N, digit = divmod(N, n)
        out.extend([pos - shift] * digit)
        pos += 1
    return sorted(out, reverse=True)


def _equalize(xs: list[int], ys: list[int], n: int) -> tuple[list[int], list[int]]:
    xs, ys = list(xs), list(ys)
    if (len(xs) - len(ys)) % (n - 1):
        raise RuntimeError("part counts are not congruent mod n-1")
    while len(xs) != len(ys):
        short = xs if len(xs) < len(ys) else ys
        k = short.pop(0)  # largest part
        short[:0] = [k - 1] * n
        short.sort(reverse=True)
    return xs, ys


def _pair_pieces(x0: Fraction, xs: list[int], y0: Fraction, ys: list[int], n: int) -> list[Piece]:
    pieces = []
    for kx, ky in zip(xs, ys):
        lx, ly = Fraction(n) ** kx, Fraction(n) ** ky
        e = ky - kx
        pieces.append(Piece(x0, x0 + lx, e, y0 - Fraction(n) ** e * x0))
        x0, y0 = x0 + lx, y0 + ly
    return pieces


def transporter(I1: LambdaSegment, I2: LambdaSegment) -> PLMap:
    """An element of F_{n,r} mapping I1 affinely onto I2.

    The gaps ``[0, left]`` and ``[right, r]`` on each side are cut into pieces of
    length ``n**k`` (base-n digits), counts are equalized by splitting the largest
    part into n, and parts are matched in order.
    """
    if I1.params != I2.params:
        raise ValueError("params mismatch")
    params = I1.params
    n, r = params.n, params.r
    pieces: list[Piece] = []
    a1, b1, a2, b2 = I1.left, I1.right, I2.left, I2.right
    xs, ys = _equalize(power_decomposition(a1, n), power_decomposition(a2, n), n)
    pieces += _pair_pieces(Fraction(0), xs, Fraction(0), ys, n)
    e_mid = I1.m - I2.m
    pieces.append(Piece(a1, b1, e_mid, a2 - Fraction(n) ** e_mid * a1))
    xs, ys = _equalize(power_decomposition(r - b1, n), power_decomposition(r - b2, n), n)
    pieces += _pair_pieces(b1, xs, b2, ys, n)
    return PLMap(params, tuple(pieces))


def approximate_by_admissible(
    params: GroupParams, S: Iterable[tuple[Fraction, Fraction]], eps: Fraction
) -> AdmissibleSet:
    """Admissible A with normalized measure of the symmetric difference below ``eps``.

    If S is itself a union of standard intervals it is returned as is. Otherwise a
    level m is chosen with ``n**-m * (#interior boundary points) < eps`` and a
    level-m interval is kept iff more than half of it lies in S.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    n, r = params.n, params.r
    ivs = [(max(Fraction(0), Fraction(a)), min(Fraction(r), Fraction(b))) for a, b in S]
    ivs = merge_intervals(ivs)
    if not ivs:
        return AdmissibleSet(params)
    ends = {x for iv in ivs for x in iv if 0 < x < r}
    if all(is_nadic(x / r, n) for x in ends):
        level = max((nadic_level(x / r, n) for x in ends), default=0)
        cells = [NAdicInterval(params, level, p) for p in range(n**level)]
        exact = [c for c in cells if _covered(c.left, c.right, ivs) == c.right - c.left]
        return AdmissibleSet(params, exact)
    m = 0
    while Fraction(len(ends), n**m) >= eps:
        m += 1
    keep = []
    for p in range(n**m):
        c = NAdicInterval(params, m, p)
        if 2 * _covered(c.left, c.right, ivs) > c.right - c.left:
            keep.append(c)
    return AdmissibleSet(params, keep)


def symmetric_difference_measure(params: GroupParams, S, A: AdmissibleSet) -> Fraction:
    S = merge_intervals(S)
    inter = sum((_covered(a, b, S) for a, b in A.as_intervals()), Fraction(0))
    return (interval_measure(S, params.r) + A.measure()) - 2 * inter / params.r


# random generation for property tests -------------------------------------


def random_admissible(params: GroupParams, rng: random.Random, max_level: int = 3) -> AdmissibleSet:
    """Nonempty random union of standard intervals of level <= max_level."""
    level = rng.randint(1, max_level)
    cells = [NAdicInterval(params, level, p) for p in range(params.n**level)]
    chosen = [c for c in cells if rng.random() < 0.5] or [rng.choice(cells)]
    return AdmissibleSet(params, chosen)


def _random_partition(params: GroupParams, rng: random.Random, expansions: int) -> list[NAdicInterval]:
    leaves = [NAdicInterval(params, 0, 0)]
    for _ in range(expansions):
        i = rng.randrange(len(leaves))
        leaves[i:i + 1] = leaves[i].children()
    return leaves


def random_tree_pair(
    params: GroupParams, rng: random.Random, expansions: int = 3, permute: bool = False
) -> PLMap:
    """Element given by two random standard partitions with equal leaf counts.

    With ``permute`` the leaves are matched by a random permutation, which gives a
    (generally discontinuous) element of G_{n,r}; otherwise an element of F_{n,r}.
    """
    dom = _random_partition(params, rng, expansions)
    ran = _random_partition(params, rng, expansions)
    if permute:
        rng.shuffle(ran)
    n = params.n
    pieces = []
    for d, c in zip(dom, ran):
        e = d.level - c.level
        pieces.append(Piece(d.left, d.right, e, c.left - Fraction(n) ** e * d.left))
    pieces.sort(key=lambda p: p.a)
    return PLMap(params, tuple(pieces))


def random_element(params: GroupParams, rng: random.Random, length: int = 2) -> PLMap:
    """Random word in tree-pair elements, g_m^I generators and their inverses (F_{n,r})."""
    g = identity(params)
    for _ in range(length):
        kind = rng.randrange(3)
        if kind == 0:
            h = random_tree_pair(params, rng, expansions=rng.randint(0, 2))
        else:
            level = rng.randint(0, 1)
            I = NAdicInterval(params, level, rng.randrange(params.n**level))
            h = make_gmI(I, 1)
        if rng.random() < 0.5:
            h = invert(h)
        g = compose(g, h)
    return g
