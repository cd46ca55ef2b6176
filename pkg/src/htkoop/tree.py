"""Automorphisms of the d-regular rooted tree and their Koopman data for Bernoulli measures.

Letters are ``0..d-1`` internally and ``1..d`` in text (the word ``"12"`` is
``(0, 1)``).  An automorphism acts by ``g(x w) = perm[x] g|_x(w)``; composition
``g * h`` means "apply h, then g".

Two representations share one interface (``d``, ``perm``, ``section(x)``,
``is_trivial()``):

* :class:`Portrait` -- finitary, a finite-depth tree of permutations;
* :class:`State` -- a state of a finite :class:`Automaton` (wreath recursion).
"""
from __future__ import annotations

import json
import math
from collections import Counter, deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence, Union

from .scalars import parse_rational, sqrt_fraction_float

__all__ = [
    "Automaton",
    "State",
    "Portrait",
    "Element",
    "BernoulliWeights",
    "CylinderFunction",
    "KoopmanEstimate",
    "grigorchuk",
    "parse_word",
    "format_word",
    "compose",
    "to_automaton",
    "act_word",
    "activity",
    "activity_profile",
    "SubexpReport",
    "subexp_report",
    "rn_on_cylinder",
    "koopman_inner_cylinders",
    "support_in_subtree",
    "level_permutation",
    "level_transitive_check",
    "element_from_dict",
    "element_to_dict",
    "load_element",
]

Word = tuple[int, ...]


def parse_word(text: str, d: int) -> Word:
    """``"12"`` -> ``(0, 1)``; ``""`` or ``"root"`` is the empty word."""
    text = text.strip()
    if text in ("", "root"):
        return ()
    try:
        word = tuple(int(ch) - 1 for ch in text)
    except ValueError as exc:
        raise ValueError(f"bad word {text!r}") from exc
    if any(not 0 <= x < d for x in word):
        raise ValueError(f"word {text!r} has letters outside 1..{d}")
    return word


def format_word(word: Sequence[int]) -> str:
    return "".join(str(x + 1) for x in word)


def _identity_perm(d: int) -> tuple[int, ...]:
    return tuple(range(d))


# automata -------------------------------------------------------------------


@dataclass(frozen=True)
class Automaton:
    """A finite machine: state i has root permutation ``perms[i]`` and sections ``succ[i]``."""

    d: int
    perms: tuple[tuple[int, ...], ...]
    succ: tuple[tuple[int, ...], ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("tree degree must be >= 2")
        if len(self.perms) != len(self.succ) or not self.perms:
            raise ValueError("perms and succ must be nonempty and of equal length")
        k = len(self.perms)
        for i, (p, s) in enumerate(zip(self.perms, self.succ)):
            if sorted(p) != list(range(self.d)):
                raise ValueError(f"state {i}: {list(p)} is not a permutation of 0..{self.d - 1}")
            if len(s) != self.d or any(not 0 <= t < k for t in s):
                raise ValueError(f"state {i}: invalid successor list {list(s)}")

    @cached_property
    def nontrivial(self) -> frozenset[int]:
        """States from which a non-identity permutation is reachable."""
        ident = _identity_perm(self.d)
        preds: dict[int, set[int]] = {i: set() for i in range(len(self.perms))}
        for i, s in enumerate(self.succ):
            for t in s:
                preds[t].add(i)
        seen = {i for i, p in enumerate(self.perms) if p != ident}
        queue = deque(seen)
        while queue:
            t = queue.popleft()
            for i in preds[t]:
                if i not in seen:
                    seen.add(i)
                    queue.append(i)
        return frozenset(seen)

    def state(self, key: Union[int, str]) -> "State":
        if isinstance(key, str):
            key = self.names.index(key)
        return State(self, key)

    def is_finitary(self, sid: int) -> bool:
        """No cycle through a nontrivial state is reachable from ``sid``."""
        nt = self.nontrivial
        color: dict[int, int] = {}

        def dfs(s: int) -> bool:
            if s not in nt:
                return True
            if color.get(s) == 1:
                return False
            if color.get(s) == 2:
                return True
            color[s] = 1
            ok = all(dfs(t) for t in self.succ[s])
            color[s] = 2
            return ok

        return dfs(sid)


@dataclass(frozen=True)
class State:
    machine: Automaton
    sid: int

    @property
    def d(self) -> int:
        return self.machine.d

    @property
    def perm(self) -> tuple[int, ...]:
        return self.machine.perms[self.sid]

    def section(self, x: int) -> "State":
        return State(self.machine, self.machine.succ[self.sid][x])

    def is_trivial(self) -> bool:
        return self.sid not in self.machine.nontrivial

    def __mul__(self, other):
        return compose(self, other)

    def __repr__(self):
        names = self.machine.names
        label = names[self.sid] if names and self.sid < len(names) else f"#{self.sid}"
        return f"State({label}, d={self.d})"


@dataclass(frozen=True)
class Portrait:
    """Finitary automorphism; ``children[x] is None`` means a trivial section."""

    d: int
    perm: tuple[int, ...]
    children: tuple[Union["Portrait", None], ...] = ()

    def __post_init__(self):
        if sorted(self.perm) != list(range(self.d)):
            raise ValueError(f"{list(self.perm)} is not a permutation of 0..{self.d - 1}")
        if not self.children:
            object.__setattr__(self, "children", (None,) * self.d)
        if len(self.children) != self.d:
            raise ValueError("a portrait node needs exactly d children")
        # trivial subtrees are stored as None so that equality is equality of maps
        children = tuple(None if c is None or c.is_trivial() else c for c in self.children)
        object.__setattr__(self, "children", children)

    @classmethod
    def identity(cls, d: int) -> "Portrait":
        return cls(d, _identity_perm(d))

    def section(self, x: int) -> "Portrait":
        c = self.children[x]
        return c if c is not None else Portrait.identity(self.d)

    @cached_property
    def _trivial(self) -> bool:
        return self.perm == _identity_perm(self.d) and all(
            c is None or c.is_trivial() for c in self.children
        )

    def is_trivial(self) -> bool:
        return self._trivial

    @cached_property
    def depth(self) -> int:
        """Levels carrying a non-identity permutation are all < depth."""
        if self.is_trivial():
            return 0
        return 1 + max((c.depth for c in self.children if c is not None), default=0)

    def __mul__(self, other):
        return compose(self, other)


Element = Union[State, Portrait]


def _compose_portraits(g: Portrait, h: Portrait) -> Portrait:
    if h.is_trivial():
        return g
    if g.is_trivial():
        return h
    d = g.d
    perm = tuple(g.perm[h.perm[x]] for x in range(d))
    children = []
    for x in range(d):
        c = _compose_portraits(g.section(h.perm[x]), h.section(x))
        children.append(None if c.is_trivial() else c)
    return Portrait(d, perm, tuple(children))


def to_automaton(g: Element) -> State:
    """Exact conversion to an automaton state (identity for automaton states)."""
    if isinstance(g, State):
        return g
    d = g.d
    index: dict[Portrait, int] = {}
    perms: list[tuple[int, ...]] = []
    succ: list[list[int]] = []
    ident = Portrait.identity(d)

    def visit(p: Portrait) -> int:
        if p.is_trivial():
            p = ident
        if p in index:
            return index[p]
        i = len(perms)
        index[p] = i
        perms.append(p.perm)
        succ.append([])
        succ[i] = [visit(p.section(x)) for x in range(d)]
        return i

    root = visit(g)
    return State(Automaton(d, tuple(perms), tuple(tuple(s) for s in succ)), root)


def compose(g: Element, h: Element) -> Element:
    """``g * h``: apply h first, then g."""
    if g.d != h.d:
        raise ValueError("tree degrees differ")
    if isinstance(g, Portrait) and isinstance(h, Portrait):
        return _compose_portraits(g, h)
    g, h = to_automaton(g), to_automaton(h)
    d = g.d
    index: dict[tuple[int, int], int] = {}
    perms: list[tuple[int, ...]] = []
    succ: list[tuple[int, ...]] = []
    order = [(g.sid, h.sid)]
    index[order[0]] = 0
    i = 0
    while i < len(order):
        gs, hs = order[i]
        gp, hp = g.machine.perms[gs], h.machine.perms[hs]
        perms.append(tuple(gp[hp[x]] for x in range(d)))
        row = []
        for x in range(d):
            pair = (g.machine.succ[gs][hp[x]], h.machine.succ[hs][x])
            if pair not in index:
                index[pair] = len(order)
                order.append(pair)
            row.append(index[pair])
        succ.append(tuple(row))
        i += 1
    return State(Automaton(d, tuple(perms), tuple(succ)), 0)


def grigorchuk() -> dict[str, State]:
    """The first Grigorchuk group: a = swap, b = (a, c), c = (a, d), d = (1, b)."""
    machine = Automaton(
        2,
        perms=((0, 1), (1, 0), (0, 1), (0, 1), (0, 1)),
        succ=((0, 0), (0, 0), (1, 3), (1, 4), (0, 2)),
        names=("e", "a", "b", "c", "d"),
    )
    return {name: machine.state(name) for name in machine.names}


# action ---------------------------------------------------------------------


def act_word(g: Element, word: Sequence[int]) -> tuple[Word, Element]:
    """Image of ``word`` and the section of g at ``word``."""
    image = []
    s = g
    for x in word:
        image.append(s.perm[x])
        s = s.section(x)
    return tuple(image), s


def _frontier(g: Element, n: int) -> Counter:
    """Multiset of nontrivial sections of g at level n."""
    level = Counter({g: 1}) if not g.is_trivial() else Counter()
    for _ in range(n):
        nxt: Counter = Counter()
        for s, cnt in level.items():
            for x in range(s.d):
                t = s.section(x)
                if not t.is_trivial():
                    nxt[t] += cnt
        level = nxt
    return level


def activity(g: Element, n: int) -> int:
    """k_n(g): number of level-n vertices where the section of g is nontrivial."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return sum(_frontier(g, n).values())


def activity_profile(g: Element, n_max: int) -> list[int]:
    """``[k_0, ..., k_{n_max}]`` in one sweep."""
    out = []
    level = Counter({g: 1}) if not g.is_trivial() else Counter()
    for n in range(n_max + 1):
        out.append(sum(level.values()))
        nxt: Counter = Counter()
        for s, cnt in level.items():
            for x in range(s.d):
                t = s.section(x)
                if not t.is_trivial():
                    nxt[t] += cnt
        level = nxt
    return out


@dataclass
class SubexpReport:
    gamma: Fraction
    rows: list[tuple[int, int, Fraction]]

    @property
    def max_activity(self) -> int:
        return max((k for _, k, _ in self.rows), default=0)

    @property
    def max_weighted(self) -> Fraction:
        return max((w for _, _, w in self.rows), default=Fraction(0))

    @property
    def bounded_on_range(self) -> bool:
        """Evidence only: the second half of the range never exceeds the first half's maximum."""
        half = len(self.rows) // 2
        first = max((k for _, k, _ in self.rows[:max(half, 1)]), default=0)
        return all(k <= first for _, k, _ in self.rows[half:])


def subexp_report(g: Element, n_max: int, gamma) -> SubexpReport:
    gamma = Fraction(gamma)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    ks = activity_profile(g, n_max)
    return SubexpReport(gamma, [(n, ks[n], ks[n] * gamma**n) for n in range(1, n_max + 1)])


# measures -------------------------------------------------------------------


@dataclass(frozen=True)
class BernoulliWeights:
    p: tuple[Fraction, ...]

    def __post_init__(self):
        p = tuple(Fraction(x) for x in self.p)
        if len(p) < 2:
            raise ValueError("need at least two weights")
        if any(x <= 0 for x in p):
            raise ValueError("weights must be positive")
        if sum(p) != 1:
            raise ValueError(f"weights sum to {sum(p)}, not 1")
        object.__setattr__(self, "p", p)

    @classmethod
    def parse(cls, text: str) -> "BernoulliWeights":
        return cls(tuple(parse_rational(t) for t in text.split(",")))

    @property
    def d(self) -> int:
        return len(self.p)

    @property
    def distinct(self) -> bool:
        return len(set(self.p)) == len(self.p)

    def cylinder(self, word: Sequence[int]) -> Fraction:
        out = Fraction(1)
        for x in word:
            out *= self.p[x]
        return out


def rn_on_cylinder(g: Element, word: Sequence[int], p: BernoulliWeights) -> Fraction:
    """``mu_p(g C_w) / mu_p(C_w)``; the Radon-Nikodym derivative on C_w when g|_w is trivial."""
    image, _ = act_word(g, word)
    return p.cylinder(image) / p.cylinder(word)


class CylinderFunction:
    """Finite combination ``sum c_w * 1_{C_w}`` of cylinder indicators."""

    def __init__(self, terms: dict[Word, Fraction] | Iterable[tuple[Word, Fraction]]):
        items = terms.items() if isinstance(terms, dict) else terms
        acc: dict[Word, Fraction] = {}
        for w, c in items:
            acc[tuple(w)] = acc.get(tuple(w), Fraction(0)) + Fraction(c)
        self.terms = {w: c for w, c in acc.items() if c}

    @classmethod
    def one(cls) -> "CylinderFunction":
        return cls({(): Fraction(1)})

    @classmethod
    def parse(cls, text: str, d: int) -> "CylinderFunction":
        """Comma list of ``word`` or ``word:coef``; ``root`` is the whole boundary."""
        terms = []
        for tok in text.split(","):
            tok = tok.strip()
            if ":" in tok:
                w, c = tok.split(":", 1)
                terms.append((parse_word(w, d), parse_rational(c)))
            else:
                terms.append((parse_word(tok, d), Fraction(1)))
        return cls(terms)

    @property
    def depth(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def sup_bound(self) -> Fraction:
        """``sum |c_w|``, an upper bound for the sup norm."""
        return sum((abs(c) for c in self.terms.values()), Fraction(0))

    def restrict(self, u: Word) -> tuple[bool, Fraction | None]:
        """(vanishes on C_u, constant value on C_u or None)."""
        value = Fraction(0)
        constant = True
        touches = False
        k = len(u)
        for w, c in self.terms.items():
            if len(w) <= k:
                if u[:len(w)] == w:
                    value += c
                    touches = True
            elif w[:k] == u:
                constant = False
                touches = True
        return (not touches), (value if constant else None)


@dataclass
class KoopmanEstimate:
    value: float
    unresolved_bound: float
    exact_terms: dict[Fraction, Fraction]
    unresolved_mass: Fraction

    def as_tuple(self) -> tuple[float, float]:
        return self.value, self.unresolved_bound


_BOUND_MARGIN = 1 + 2.0**-40


def koopman_inner_cylinders(
    g: Element,
    p: BernoulliWeights,
    xi: CylinderFunction,
    eta: CylinderFunction,
    depth_cap: int,
) -> KoopmanEstimate:
    """``<kappa_p(g) xi, eta> = integral sqrt(dmu(gy)/dmu(y)) xi(y) eta(gy) dmu(y)``.

    Cylinders are expanded until g's section is trivial and both functions are
    constant there (exact term ``sqrt(ratio) * weight``), or until ``depth_cap``.
    The unresolved set U contributes at most
    ``|xi| |eta| sqrt(mu(U) mu(gU))`` by Cauchy-Schwarz.
    """
    if p.d != g.d:
        raise ValueError("weights and tree degree differ")
    if depth_cap < max(xi.depth, eta.depth):
        raise ValueError(f"depth_cap {depth_cap} is below the cylinder depth {max(xi.depth, eta.depth)}")
    terms: dict[Fraction, Fraction] = {}
    u_mass = Fraction(0)
    gu_mass = Fraction(0)
    stack = [((), (), g, Fraction(1), Fraction(1))]
    while stack:
        u, gu, s, mu_u, mu_gu = stack.pop()
        xi_zero, xi_val = xi.restrict(u)
        if xi_zero:
            continue
        eta_zero, eta_val = eta.restrict(gu)
        if eta_zero:
            continue
        if s.is_trivial() and xi_val is not None and eta_val is not None:
            ratio = mu_gu / mu_u
            terms[ratio] = terms.get(ratio, Fraction(0)) + xi_val * eta_val * mu_u
            continue
        if len(u) >= depth_cap:
            u_mass += mu_u
            gu_mass += mu_gu
            continue
        for x in reversed(range(g.d)):
            y = s.perm[x]
            stack.append((u + (x,), gu + (y,), s.section(x), mu_u * p.p[x], mu_gu * p.p[y]))
    parts = []
    for ratio, w in terms.items():
        if w:
            mag = sqrt_fraction_float(ratio * w * w)
            parts.append(mag if w > 0 else -mag)
    value = math.fsum(parts)
    cs = sqrt_fraction_float(u_mass * gu_mass) if u_mass else 0.0
    bound = float(xi.sup_bound() * eta.sup_bound()) * cs * _BOUND_MARGIN
    return KoopmanEstimate(value, bound, terms, u_mass)


# supports and transitivity ------------------------------------------------------


def support_in_subtree(g: Element, v: Sequence[int]) -> bool:
    """True iff g acts trivially outside the subtree below vertex ``v``."""
    s = g
    for x in v:
        if s.perm[x] != x:
            return False
        if any(not s.section(y).is_trivial() for y in range(s.d) if y != x):
            return False
        s = s.section(x)
    return True


def level_permutation(g: Element, n: int, _memo: dict | None = None) -> list[int]:
    """Action of g on level-n vertices, words encoded base d with the first letter most significant."""
    memo = {} if _memo is None else _memo
    key = (g, n)
    if key in memo:
        return memo[key]
    d = g.d
    if n == 0:
        out = [0]
    elif g.is_trivial():
        out = list(range(d**n))
    else:
        block = d ** (n - 1)
        out = [0] * (d**n)
        for x in range(d):
            sub = level_permutation(g.section(x), n - 1, memo)
            base_in, base_out = x * block, g.perm[x] * block
            for i, j in enumerate(sub):
                out[base_in + i] = base_out + j
    memo[key] = out
    return out


DEFAULT_VERTEX_CAP = 2**16


def level_transitive_check(generators: Sequence[Element], n: int, cap: int = DEFAULT_VERTEX_CAP) -> bool:
    """Does the group generated by ``generators`` act transitively on level n?"""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not generators:
        raise ValueError("need at least one generator")
    d = generators[0].d
    size = d**n
    if size > cap:
        raise ValueError(f"level {n} has {size} vertices, above the cap {cap}")
    memo: dict = {}
    perms = [level_permutation(g, n, memo) for g in generators]
    seen = bytearray(size)
    seen[0] = 1
    queue = deque([0])
    count = 1
    while queue:
        v = queue.popleft()
        for perm in perms:
            w = perm[v]
            if not seen[w]:
                seen[w] = 1
                count += 1
                queue.append(w)
    return count == size


# JSON -------------------------------------------------------------------------


def _portrait_to_dict(p: Portrait | None):
    if p is None or p.is_trivial():
        return None
    return {"perm": list(p.perm), "children": [_portrait_to_dict(c) for c in p.children]}


def _portrait_from_dict(d: int, obj) -> Portrait | None:
    if obj is None:
        return None
    children = obj.get("children") or [None] * d
    return Portrait(d, tuple(obj["perm"]), tuple(_portrait_from_dict(d, c) for c in children))


def element_to_dict(g: Element) -> dict:
    """Automaton states as ``{"d", "states", "root"}``; portraits as ``{"d", "portrait"}``.

    Permutations are 0-based lists (``perm[x]`` is the image of letter x).
    """
    if isinstance(g, Portrait):
        return {"d": g.d, "portrait": _portrait_to_dict(g)}
    m = g.machine
    out = {
        "d": m.d,
        "states": [{"perm": list(p), "succ": list(s)} for p, s in zip(m.perms, m.succ)],
        "root": g.sid,
    }
    if m.names:
        out["names"] = list(m.names)
    return out


def element_from_dict(obj: dict) -> Element:
    d = int(obj["d"])
    if "portrait" in obj:
        p = _portrait_from_dict(d, obj["portrait"])
        return p if p is not None else Portrait.identity(d)
    states = obj["states"]
    machine = Automaton(
        d,
        tuple(tuple(s["perm"]) for s in states),
        tuple(tuple(s["succ"]) for s in states),
        tuple(obj.get("names", ())),
    )
    return State(machine, int(obj["root"]))


def load_element(spec: str) -> Element:
    """``grigorchuk:a`` (preset), a path to a JSON file, or an inline JSON object."""
    if spec.startswith("grigorchuk:"):
        name = spec.split(":", 1)[1]
        gens = grigorchuk()
        if name not in gens:
            raise ValueError(f"unknown Grigorchuk generator {name!r}")
        return gens[name]
    text = spec if spec.lstrip().startswith("{") else open(spec).read()
    return element_from_dict(json.loads(text))

