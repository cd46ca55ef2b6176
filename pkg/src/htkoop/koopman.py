"""Exact Koopman operators of the interval actions on step functions.

Level-k step functions are constant on the ``r*n**k`` cells ``[i/n**k, (i+1)/n**k)``
of ``[0, r)``.  The measure is the normalized Lebesgue measure (total mass 1), so
a level-k cell has mass ``n**-k / r``.  Vectors are real; every identity checked
here is already determined by the real structure.

``(kappa(g) f)(x) = sqrt(slope of g^{-1} at x) * f(g^{-1} x)``, so kappa(g) maps step
functions to step functions at a computable level and all entries lie in
Q(sqrt(n)).
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .constructions import AdmissibleSet, make_gmA
from .nadic import (
    GroupParams,
    PLMap,
    intersect_intervals,
    interval_measure,
    invert,
    support,
)
from .scalars import QSqrtN, format_rational, nadic_level

__all__ = [
    "StepFunction",
    "KoopmanMatrix",
    "ConvergenceRow",
    "ContractionReport",
    "inner_product",
    "koopman_apply",
    "koopman_inner",
    "koopman_matrix",
    "project_complement",
    "convergence_table",
    "levelset_measure",
    "check_measure_contracting",
    "contraction_threshold",
]


def _q(n: int, v) -> QSqrtN:
    return v if isinstance(v, QSqrtN) else QSqrtN(n, v)


@dataclass(frozen=True)
class StepFunction:
    params: GroupParams
    level: int
    coeffs: tuple

    def __post_init__(self):
        n, r = self.params.n, self.params.r
        coeffs = tuple(_q(n, c) for c in self.coeffs)
        if len(coeffs) != r * n**self.level:
            raise ValueError(f"level {self.level} needs {r * n ** self.level} coefficients, got {len(coeffs)}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def constant(cls, params: GroupParams, value=1, level: int = 0) -> "StepFunction":
        return cls(params, level, (value,) * (params.r * params.n**level))

    @classmethod
    def indicator(cls, A: AdmissibleSet) -> "StepFunction":
        params = A.params
        level = A.max_level()
        coeffs = [0] * (params.r * params.n**level)
        for iv in A.intervals:
            scale = params.n ** (level - iv.level)
            start = params.r * iv.index * scale
            for i in range(start, start + params.r * scale):
                coeffs[i] = 1
        return cls(params, level, tuple(coeffs))

    @property
    def size(self) -> int:
        return len(self.coeffs)

    def refine(self, level: int) -> "StepFunction":
        if level < self.level:
            raise ValueError("cannot coarsen a step function")
        if level == self.level:
            return self
        rep = self.params.n ** (level - self.level)
        return StepFunction(self.params, level, tuple(c for c in self.coeffs for _ in range(rep)))

    def value_at(self, x) -> QSqrtN:
        return self.coeffs[int(Fraction(x) * self.params.n**self.level)]

    def sup_norm(self) -> QSqrtN:
        return max((abs(c) for c in self.coeffs), default=QSqrtN(self.params.n))

    def __add__(self, other: "StepFunction") -> "StepFunction":
        k = max(self.level, other.level)
        a, b = self.refine(k), other.refine(k)
        return StepFunction(self.params, k, tuple(x + y for x, y in zip(a.coeffs, b.coeffs)))

    def scale(self, s) -> "StepFunction":
        return StepFunction(self.params, self.level, tuple(c * s for c in self.coeffs))

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        if self.params != other.params:
            return False
        k = max(self.level, other.level)
        return self.refine(k).coeffs == other.refine(k).coeffs

    __hash__ = None


def inner_product(f1: StepFunction, f2: StepFunction) -> QSqrtN:
    """``integral f1 * f2`` against the normalized Lebesgue measure."""
    if f1.params != f2.params:
        raise ValueError("params mismatch")
    k = max(f1.level, f2.level)
    a, b = f1.refine(k), f2.refine(k)
    n, r = f1.params.n, f1.params.r
    total = QSqrtN(n)
    for x, y in zip(a.coeffs, b.coeffs):
        if x and y:
            total = total + x * y
    return total * Fraction(1, r * n**k)


def _output_level(g: PLMap, k: int) -> int:
    """Smallest level at which kappa(g) of every level-k step function is a step function."""
    params = g.params
    n = params.n
    pts = {params.slope(p.e) * p.a + p.offset for p in g.pieces}
    for j in range(params.r * n**k):
        pts.add(g(Fraction(j, n**k)))
    return max(nadic_level(x, n) for x in pts)


def koopman_apply(g: PLMap, f: StepFunction) -> StepFunction:
    if g.params != f.params:
        raise ValueError("params mismatch")
    params = g.params
    n = params.n
    K = _output_level(g, f.level)
    ginv = invert(g)
    scale_in = n**f.level
    out = []
    half = {}
    for p in ginv.pieces:
        s = params.slope(p.e)
        if p.e not in half:
            half[p.e] = QSqrtN.power_half(n, p.e)
        w = half[p.e]
        for i in range(int(p.a * n**K), int(p.b * n**K)):
            y = s * Fraction(i, n**K) + p.offset
            out.append(w * f.coeffs[int(y * scale_in)])
    return StepFunction(params, K, tuple(out))


def koopman_inner(g: PLMap, f1: StepFunction, f2: StepFunction) -> QSqrtN:
    """``<kappa(g) f1, f2>`` without materializing kappa(g) f1 on a fine grid.

    On each piece of g^-1 the integrand is constant between consecutive points of
    the level grid of f2 and the pulled-back level grid of f1.
    """
    if not (g.params == f1.params == f2.params):
        raise ValueError("params mismatch")
    params = g.params
    n = params.n
    s1, s2 = n**f1.level, n**f2.level
    acc: dict[int, QSqrtN] = {}
    for p in invert(g).pieces:
        s = params.slope(p.e)
        lo, hi = s * p.a + p.offset, s * p.b + p.offset
        cuts = {p.a, p.b}
        cuts.update(Fraction(j, s2) for j in range(math.floor(p.a * s2) + 1, math.ceil(p.b * s2)))
        cuts.update((Fraction(i, s1) - p.offset) / s
                    for i in range(math.floor(lo * s1) + 1, math.ceil(hi * s1)))
        pts = sorted(cuts)
        w = Fraction(0)
        for x0, x1 in zip(pts, pts[1:]):
            c1 = f1.coeffs[math.floor((s * x0 + p.offset) * s1)]
            c2 = f2.coeffs[math.floor(x0 * s2)]
            if c1 and c2:
                acc[p.e] = acc.get(p.e, QSqrtN(n)) + c1 * c2 * (x1 - x0)
    total = QSqrtN(n)
    for e, v in acc.items():
        total = total + QSqrtN.power_half(n, e) * v
    return total * Fraction(1, params.r)


@dataclass
class KoopmanMatrix:
    """Matrix of kappa(g) from level-``domain_level`` to level-``range_level`` step functions.

    ``columns[j]`` maps row index to the value of kappa(g) applied to the indicator
    of domain cell j (sparse; absent rows are zero).  Entries are function values;
    :meth:`orthonormal_scale` is the factor that turns them into coordinates in the
    orthonormal bases of normalized indicators.
    """

    params: GroupParams
    domain_level: int
    range_level: int
    columns: list[dict[int, QSqrtN]]

    @property
    def shape(self) -> tuple[int, int]:
        n, r = self.params.n, self.params.r
        return r * n**self.range_level, r * n**self.domain_level

    def orthonormal_scale(self) -> QSqrtN:
        return QSqrtN.power_half(self.params.n, self.domain_level - self.range_level)

    def dense(self, orthonormal: bool = False) -> list[list[QSqrtN]]:
        rows, cols = self.shape
        zero = QSqrtN(self.params.n)
        s = self.orthonormal_scale() if orthonormal else 1
        out = [[zero] * cols for _ in range(rows)]
        for j, col in enumerate(self.columns):
            for i, v in col.items():
                out[i][j] = v * s
        return out

    def refine_rows(self, level: int) -> "KoopmanMatrix":
        if level < self.range_level:
            raise ValueError("cannot coarsen rows")
        rep = self.params.n ** (level - self.range_level)
        cols = [{i * rep + t: v for i, v in col.items() for t in range(rep)} for col in self.columns]
        return KoopmanMatrix(self.params, self.domain_level, level, cols)

    def gram(self) -> dict[tuple[int, int], QSqrtN]:
        """Nonzero entries of the Gram matrix of columns in orthonormal coordinates."""
        by_row: dict[int, list[tuple[int, QSqrtN]]] = defaultdict(list)
        for j, col in enumerate(self.columns):
            for i, v in col.items():
                by_row[i].append((j, v))
        acc: dict[tuple[int, int], QSqrtN] = defaultdict(lambda: QSqrtN(self.params.n))
        for entries in by_row.values():
            for j1, v1 in entries:
                for j2, v2 in entries:
                    acc[j1, j2] = acc[j1, j2] + v1 * v2
        factor = Fraction(self.params.n) ** (self.domain_level - self.range_level)
        return {key: v * factor for key, v in acc.items() if v}

    def is_unitary(self) -> bool:
        """Columns exactly orthonormal in the normalized L2 inner product."""
        gram = self.gram()
        ncols = len(self.columns)
        if any(gram.get((j, j)) != 1 for j in range(ncols)):
            return False
        return all(v == 0 or a == b for (a, b), v in gram.items())

    def __matmul__(self, other: "KoopmanMatrix") -> "KoopmanMatrix":
        if self.params != other.params:
            raise ValueError("params mismatch")
        if self.domain_level != other.range_level:
            raise ValueError(
                f"level mismatch: left domain {self.domain_level}, right range {other.range_level}"
            )
        zero = QSqrtN(self.params.n)
        cols = []
        for col in other.columns:
            acc: dict[int, QSqrtN] = {}
            for i, v in col.items():
                for row, w in self.columns[i].items():
                    acc[row] = acc.get(row, zero) + w * v
            cols.append({i: v for i, v in acc.items() if v})
        return KoopmanMatrix(self.params, other.domain_level, self.range_level, cols)

    def __eq__(self, other):
        if not isinstance(other, KoopmanMatrix):
            return NotImplemented
        if self.params != other.params or self.domain_level != other.domain_level:
            return False
        level = max(self.range_level, other.range_level)
        a, b = self.refine_rows(level), other.refine_rows(level)
        strip = lambda cols: [{i: v for i, v in c.items() if v} for c in cols]  # noqa: E731
        return strip(a.columns) == strip(b.columns)

    __hash__ = None


def koopman_matrix(g: PLMap, k: int) -> KoopmanMatrix:
    """kappa(g) restricted to level-k step functions, columns on indicators of the cells."""
    if k < 0:
        raise ValueError("k must be >= 0")
    params = g.params
    n = params.n
    K = _output_level(g, k)
    cols: list[dict[int, QSqrtN]] = []
    nk, nK = n**k, n**K
    half: dict[int, QSqrtN] = {}
    for j in range(params.r * nk):
        lo, hi = Fraction(j, nk), Fraction(j + 1, nk)
        col: dict[int, QSqrtN] = {}
        for p in g.pieces:
            if p.b <= lo or p.a >= hi:
                continue
            a, b = max(lo, p.a), min(hi, p.b)
            s = params.slope(p.e)
            ia, ib = (s * a + p.offset) * nK, (s * b + p.offset) * nK
            if -p.e not in half:
                half[-p.e] = QSqrtN.power_half(n, -p.e)
            for i in range(int(ia), int(ib)):
                col[i] = half[-p.e]
        cols.append(col)
    return KoopmanMatrix(params, k, K, cols)


def project_complement(A: AdmissibleSet, f: StepFunction) -> StepFunction:
    """Orthogonal projection onto functions vanishing on A."""
    if A.params != f.params:
        raise ValueError("params mismatch")
    k = max(f.level, A.max_level())
    f = f.refine(k)
    ind = StepFunction.indicator(A).refine(k) if A else None
    if ind is None:
        return f
    zero = QSqrtN(f.params.n)
    return StepFunction(f.params, k, tuple(zero if a else c for c, a in zip(f.coeffs, ind.coeffs)))


@dataclass
class ConvergenceRow:
    m: int
    value: QSqrtN
    limit: QSqrtN
    gap: QSqrtN
    bound: QSqrtN

    @property
    def within_bound(self) -> bool:
        return self.gap <= self.bound

    def csv_fields(self) -> list[str]:
        return [
            str(self.m),
            str(self.value),
            f"{self.value.to_float():.12g}",
            str(self.limit),
            f"{self.limit.to_float():.12g}",
            str(self.gap),
            f"{self.gap.to_float():.12g}",
        ]


CONVERGENCE_COLUMNS = ["m", "value_exact", "value_float", "limit_exact", "limit_float",
                       "gap_exact", "gap_float"]


def convergence_table(
    A: AdmissibleSet, xi1: StepFunction, xi2: StepFunction, m_range: Iterable[int]
) -> list[ConvergenceRow]:
    """Rows ``<kappa(g_m^A) xi1, xi2>`` against the weak limit ``<P^A xi1, xi2>``.

    ``bound`` is ``3 n^{-m/2} |xi1|_inf |xi2|_inf``.
    """
    n = A.params.n
    limit = inner_product(project_complement(A, xi1), xi2)
    norms = xi1.sup_norm() * xi2.sup_norm()
    rows = []
    for m in m_range:
        if A:
            g = make_gmA(A, m)
            value = koopman_inner(g, xi1, xi2)
        else:
            value = inner_product(xi1, xi2)
        rows.append(ConvergenceRow(m, value, limit, abs(value - limit),
                                   QSqrtN.power_half(n, -m) * norms * 3))
    return rows


def levelset_measure(g: PLMap, t, within: Sequence[tuple[Fraction, Fraction]] | None = None) -> Fraction:
    """Normalized measure of ``{x : sqrt(slope of g at x) >= t}`` (optionally intersected with ``within``)."""
    n, r = g.params.n, g.params.r
    t = _q(n, t)
    if t.sign() <= 0:
        raise ValueError("threshold must be positive")
    chosen = [(p.a, p.b) for p in g.pieces if QSqrtN.power_half(n, p.e) >= t]
    if within is not None:
        chosen = intersect_intervals(chosen, within)
    return interval_measure(chosen, r)


@dataclass
class ContractionReport:
    g: PLMap
    A: AdmissibleSet
    M: Fraction
    eps: Fraction
    leak: Fraction
    good_mass: Fraction
    pass_: bool = field(init=False)

    def __post_init__(self):
        self.pass_ = self.leak < self.eps and self.good_mass > self.A.measure() - self.eps

    @property
    def passed(self) -> bool:
        return self.pass_

    def to_dict(self) -> dict:
        from .nadic import to_dict

        return {
            "g": to_dict(self.g),
            "A": str(self.A),
            "A_measure": format_rational(self.A.measure()),
            "M": format_rational(self.M),
            "eps": format_rational(self.eps),
            "leak": format_rational(self.leak),
            "good_mass": format_rational(self.good_mass),
            "pass": self.pass_,
        }


def check_measure_contracting(g: PLMap, A: AdmissibleSet, M, eps) -> ContractionReport:
    """Both strict inequalities of the measure-contraction condition, exactly.

    ``leak = mu(supp g minus A)``, ``good_mass = mu({x in A : sqrt(dmu(gx)/dmu(x)) < 1/M})``.
    """
    M, eps = Fraction(M), Fraction(eps)
    if M <= 0 or eps <= 0:
        raise ValueError("M and eps must be positive")
    n, r = g.params.n, g.params.r
    a_ivs = A.as_intervals()
    supp = support(g)
    leak = interval_measure(supp, r) - interval_measure(intersect_intervals(supp, a_ivs), r)
    inv_M = 1 / M
    small = [(p.a, p.b) for p in g.pieces if QSqrtN.power_half(n, p.e).cmp_rational(inv_M) < 0]
    good = interval_measure(intersect_intervals(small, a_ivs), r)
    return ContractionReport(g, A, M, eps, leak, good)


def _ceil_log(n: int, q: Fraction) -> int:
    """Smallest integer j with ``n**j >= q`` (q > 0)."""
    j = 0
    while Fraction(n) ** j < q:
        j += 1
    while Fraction(n) ** (j - 1) >= q:
        j -= 1
    return j


def contraction_threshold(n: int, M, eps, mu_A) -> int:
    """``max(ceil(2 log_n M) + 1, ceil(log_n(mu_A/eps)) + 1)``, at least 1."""
    M, eps, mu_A = Fraction(M), Fraction(eps), Fraction(mu_A)
    m0 = max(_ceil_log(n, M * M) + 1, 1)
    if mu_A > 0:
        m0 = max(m0, _ceil_log(n, mu_A / eps) + 1)
    return m0
