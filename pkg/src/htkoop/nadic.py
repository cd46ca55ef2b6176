"""Elements of the Higman-Thompson groups F_{n,r} < G_{n,r} as exact PL bijections.

Every element is a right-continuous piecewise-affine bijection of ``[0, r)``:
pieces ``x -> n**e * x + offset`` on ``[a, b)`` with n-adic ``a, b, offset``.
F-elements are the ones that are also continuous and fix 0; the right endpoint
``r`` is handled as a left limit.  The closed interval of the F definition and
the half-open one of G differ by a null set, so every measure statement is the
same in both settings.

Pieces are kept in canonical form (adjacent pieces with equal affine data are
merged), so ``==`` on :class:`PLMap` is equality of maps.
"""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple

from .scalars import QSqrtN, format_rational, is_nadic, parse_rational

__all__ = [
    "GroupParams",
    "Piece",
    "PLMap",
    "PLMapError",
    "MembershipReport",
    "identity",
    "evaluate",
    "compose",
    "invert",
    "membership",
    "support",
    "rn_sqrt_at",
    "interval_measure",
    "intersect_intervals",
    "merge_intervals",
    "to_json",
    "from_json",
]


class PLMapError(ValueError):
    """A piece list that does not describe an element of G_{n,r}."""


@dataclass(frozen=True)
class GroupParams:
    n: int
    r: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if not isinstance(self.r, int) or self.r < 1:
            raise ValueError(f"r must be an integer >= 1, got {self.r!r}")

    def slope(self, e: int) -> Fraction:
        return Fraction(self.n) ** e


class Piece(NamedTuple):
    a: Fraction
    b: Fraction
    e: int
    offset: Fraction


def _canonical(pieces) -> tuple[Piece, ...]:
    out: list[Piece] = []
    for p in pieces:
        if p.a == p.b:
            continue
        if out and out[-1].e == p.e and out[-1].offset == p.offset and out[-1].b == p.a:
            out[-1] = Piece(out[-1].a, p.b, p.e, p.offset)
        else:
            out.append(p)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class PLMap:
    """A PL bijection of ``[0, r)``; construction validates every invariant."""

    params: GroupParams
    pieces: tuple[Piece, ...]
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        pieces = tuple(
            Piece(Fraction(p[0]), Fraction(p[1]), int(p[2]), Fraction(p[3])) for p in self.pieces
        )
        if not self._validated:
            _validate(self.params, pieces)
        object.__setattr__(self, "pieces", _canonical(pieces))

    def __eq__(self, other):
        if not isinstance(other, PLMap):
            return NotImplemented
        return self.params == other.params and self.pieces == other.pieces

    def __hash__(self):
        return hash((self.params, self.pieces))

    def __call__(self, x) -> Fraction:
        return evaluate(self, x)

    def __matmul__(self, other: "PLMap") -> "PLMap":
        return compose(self, other)

    @cached_property
    def _starts(self) -> list[Fraction]:
        return [p.a for p in self.pieces]

    def piece_at(self, x) -> Piece:
        x = Fraction(x)
        if not 0 <= x < self.params.r:
            raise ValueError(f"{x} is outside [0, {self.params.r})")
        return self.pieces[bisect.bisect_right(self._starts, x) - 1]

    def breakpoints(self) -> list[Fraction]:
        """Internal domain breakpoints (starts of all pieces but the first)."""
        return [p.a for p in self.pieces[1:]]

    def image_pieces(self) -> list[tuple[Fraction, Fraction]]:
        return [(self.params.slope(p.e) * p.a + p.offset, self.params.slope(p.e) * p.b + p.offset)
                for p in self.pieces]

    @property
    def is_identity(self) -> bool:
        return len(self.pieces) == 1 and self.pieces[0].e == 0 and self.pieces[0].offset == 0

    def __repr__(self):
        body = ", ".join(
            f"[{format_rational(p.a)},{format_rational(p.b)}): {self.params.n}^{p.e}x"
            f"{'+' if p.offset >= 0 else '-'}{format_rational(abs(p.offset))}"
            for p in self.pieces
        )
        return f"PLMap(n={self.params.n}, r={self.params.r}; {body})"


def _validate(params: GroupParams, pieces: tuple[Piece, ...]) -> None:
    n, r = params.n, params.r
    if not pieces:
        raise PLMapError("empty piece list")
    if pieces[0].a != 0:
        raise PLMapError(f"partition must start at 0, starts at {pieces[0].a}")
    for i, p in enumerate(pieces):
        if not p.a < p.b:
            raise PLMapError(f"piece {i}: empty or reversed domain [{p.a}, {p.b})")
        for name in ("a", "b", "offset"):
            v = getattr(p, name)
            if not is_nadic(v, n):
                raise PLMapError(f"piece {i}: {name}={v} is not in Z[1/{n}]")
        if i + 1 < len(pieces) and pieces[i + 1].a != p.b:
            nxt = pieces[i + 1].a
            kind = "gap" if nxt > p.b else "overlap"
            raise PLMapError(f"{kind} in partition between {p.b} and {nxt}")
    if pieces[-1].b != r:
        raise PLMapError(f"partition must end at r={r}, ends at {pieces[-1].b}")
    images = sorted(
        (params.slope(p.e) * p.a + p.offset, params.slope(p.e) * p.b + p.offset, i)
        for i, p in enumerate(pieces)
    )
    pos = Fraction(0)
    for lo, hi, i in images:
        if lo != pos:
            kind = "gap" if lo > pos else "overlap"
            raise PLMapError(f"images do not tile [0, {r}): {kind} at {min(lo, pos)} (piece {i})")
        pos = hi
    if pos != r:
        raise PLMapError(f"images do not tile [0, {r}): end at {pos}")


def _trusted(params: GroupParams, pieces) -> PLMap:
    return PLMap(params, tuple(pieces), _validated=True)


def identity(params: GroupParams) -> PLMap:
    return _trusted(params, [Piece(Fraction(0), Fraction(params.r), 0, Fraction(0))])


def evaluate(g: PLMap, x) -> Fraction:
    p = g.piece_at(x)
    return g.params.slope(p.e) * Fraction(x) + p.offset


def compose(g: PLMap, h: PLMap) -> PLMap:
    """``x -> g(h(x))``."""
    if g.params != h.params:
        raise ValueError(f"params mismatch: {g.params} vs {h.params}")
    params = g.params
    out: list[Piece] = []
    for hp in h.pieces:
        s = params.slope(hp.e)
        lo, hi = s * hp.a + hp.offset, s * hp.b + hp.offset
        i = bisect.bisect_right(g._starts, lo) - 1
        while i < len(g.pieces) and g.pieces[i].a < hi:
            gp = g.pieces[i]
            ylo, yhi = max(lo, gp.a), min(hi, gp.b)
            xlo, xhi = (ylo - hp.offset) / s, (yhi - hp.offset) / s
            out.append(Piece(xlo, xhi, hp.e + gp.e, params.slope(gp.e) * hp.offset + gp.offset))
            i += 1
    return _trusted(params, out)


def invert(g: PLMap) -> PLMap:
    params = g.params
    out = []
    for p in g.pieces:
        s = params.slope(p.e)
        out.append(Piece(s * p.a + p.offset, s * p.b + p.offset, -p.e, -p.offset / s))
    out.sort(key=lambda p: p.a)
    return _trusted(params, out)


@dataclass
class MembershipReport:
    in_F: bool
    in_G: bool
    violations: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "in_F": self.in_F,
            "in_G": self.in_G,
            "violations": [{"location": loc, "rule": rule} for loc, rule in self.violations],
        }


def membership(g: PLMap, samples_per_piece: int = 4) -> MembershipReport:
    """Decide membership in F_{n,r} and G_{n,r}.

    G-membership is automatic for a valid :class:`PLMap` (affine pieces with n-adic
    data are right continuous and preserve Z[1/n]); it is re-checked on sampled
    n-adic points anyway.
    """
    params = g.params
    n = params.n
    violations: list[tuple[str, str]] = []
    in_G = True
    for p in g.pieces:
        width = p.b - p.a
        for j in range(samples_per_piece):
            x = p.a + width * Fraction(j, n**2)
            if x >= p.b:
                break
            y = evaluate(g, x)
            if not is_nadic(y, n):
                in_G = False
                violations.append((format_rational(x), "image not in Z[1/n]"))
    first = g.pieces[0]
    if first.offset != 0:
        violations.append(("0", "g(0) != 0"))
    for left, right in zip(g.pieces, g.pieces[1:]):
        lim = params.slope(left.e) * left.b + left.offset
        val = params.slope(right.e) * right.a + right.offset
        if lim != val:
            violations.append((format_rational(left.b), "discontinuous (left limit != value)"))
    last = g.pieces[-1]
    if params.slope(last.e) * last.b + last.offset != params.r:
        violations.append((str(params.r), "left limit at r != r"))
    in_F = in_G and not any(rule != "image not in Z[1/n]" for _, rule in violations)
    return MembershipReport(in_F=in_F, in_G=in_G, violations=violations)


# interval-set helpers: lists of disjoint half-open (lo, hi) pairs, sorted


def merge_intervals(intervals) -> list[tuple[Fraction, Fraction]]:
    out: list[tuple[Fraction, Fraction]] = []
    for lo, hi in sorted((Fraction(a), Fraction(b)) for a, b in intervals):
        if lo >= hi:
            continue
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def intersect_intervals(xs, ys) -> list[tuple[Fraction, Fraction]]:
    xs, ys = merge_intervals(xs), merge_intervals(ys)
    out, i, j = [], 0, 0
    while i < len(xs) and j < len(ys):
        lo, hi = max(xs[i][0], ys[j][0]), min(xs[i][1], ys[j][1])
        if lo < hi:
            out.append((lo, hi))
        if xs[i][1] < ys[j][1]:
            i += 1
        else:
            j += 1
    return out


def interval_measure(intervals, r: int) -> Fraction:
    """Normalized Lebesgue measure (total mass 1 on ``[0, r)``)."""
    return sum((hi - lo for lo, hi in merge_intervals(intervals)), Fraction(0)) / r


def support(g: PLMap) -> list[tuple[Fraction, Fraction]]:
    """Maximal disjoint half-open intervals covering ``{x : g(x) != x}`` up to finitely many points.

    A non-identity affine piece fixes at most one point, which is a null set; the
    returned set has the same measure as the true support.
    """
    return merge_intervals(
        (p.a, p.b) for p in g.pieces if not (p.e == 0 and p.offset == 0)
    )


def rn_sqrt_at(g: PLMap, x) -> QSqrtN:
    """Square root of the slope of ``g`` at ``x`` (right-hand slope at breakpoints)."""
    return QSqrtN.power_half(g.params.n, g.piece_at(x).e)


# JSON ----------------------------------------------------------------------


def to_dict(g: PLMap) -> dict:
    return {
        "n": g.params.n,
        "r": g.params.r,
        "pieces": [
            {"a": format_rational(p.a), "b": format_rational(p.b), "e": p.e,
             "offset": format_rational(p.offset)}
            for p in g.pieces
        ],
    }


def to_json(g: PLMap, **extra) -> str:
    d = to_dict(g)
    d.update(extra)
    return json.dumps(d, indent=2)


def from_dict(d: dict) -> PLMap:
    try:
        params = GroupParams(int(d["n"]), int(d["r"]))
        raw = d["pieces"]
        pieces = []
        for i, p in enumerate(raw):
            try:
                pieces.append(Piece(parse_rational(str(p["a"])), parse_rational(str(p["b"])),
                                    int(p["e"]), parse_rational(str(p["offset"]))))
            except (KeyError, TypeError, ValueError) as exc:
                raise PLMapError(f"pieces[{i}]: {exc}") from exc
    except KeyError as exc:
        raise PLMapError(f"missing field {exc}") from exc
    return PLMap(params, tuple(pieces))


def from_json(text: str) -> PLMap:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PLMapError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise PLMapError("element JSON must be an object")
    return from_dict(d)
