"""Truncated generating functions and critical values extracted from them.

``Phi(x,x|lam)`` collects first-return walk counts, ``H`` all closed walks
and ``Theta`` all walks; for a random walk kernel ``F`` holds first-return
probabilities.  Critical values are limits, so they are always reported as a
bracket together with the truncation horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import DomainError
from .graph_core import (
    GraphFamily,
    WeightedMultigraph,
    closed_walk_counts,
    first_passage,
    path_counts,
    period as period_of,
)

DEFAULT_TOL = 1e-9
DEFAULT_NMAX = 40
_OVERFLOW_GUARD = 2.0**60
_FLOAT_SAFE = 10**300


@dataclass(frozen=True)
class SeriesTruncation:
    """Power series ``c0 + sum_{n=1}^{n_max} coeffs[n-1] lam^n``, nonnegative coefficients."""

    coeffs: tuple
    exact: bool
    provenance: str = ""
    c0: object = 0

    def __post_init__(self):
        if any(c < 0 for c in self.coeffs) or self.c0 < 0:
            raise DomainError("series coefficients must be nonnegative")

    @property
    def n_max(self) -> int:
        return len(self.coeffs)

    def coefficient(self, n: int):
        if n == 0:
            return self.c0
        return self.coeffs[n - 1] if 1 <= n <= self.n_max else 0

    def __call__(self, lam: float) -> float:
        if self._huge:
            return self._eval_log(lam)
        # Horner in double precision
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = (acc + float(c)) * lam
        return acc + float(self.c0)

    @property
    def _huge(self) -> bool:
        return bool(self.coeffs) and max(self.coeffs) > _FLOAT_SAFE

    def _eval_log(self, lam: float) -> float:
        # coefficients beyond double range: sum exp(log c_n + n log lam)
        if lam <= 0:
            return float(self.c0)
        ll = math.log(lam)
        acc = float(self.c0)
        for n, c in enumerate(self.coeffs, start=1):
            if c > 0:
                e = _log(c) + n * ll
                if e > 709:
                    return math.inf
                acc += math.exp(e)
        return acc

    def evaluate_exact(self, lam) -> Fraction:
        lam = Fraction(lam)
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = (acc + Fraction(c)) * lam
        return acc + Fraction(self.c0)

    def truncate(self, n_max: int) -> "SeriesTruncation":
        return SeriesTruncation(self.coeffs[:n_max], self.exact, self.provenance, self.c0)


@dataclass(frozen=True)
class CriticalBracket:
    """``lo <= value <= hi`` where value is the root of ``series(lam) = 1``.

    ``lower_bound_only`` means the truncated series stayed below 1 up to the
    overflow guard; ``lo`` is then only a lower bound and ``hi`` is infinite.
    """

    lo: float
    hi: float
    horizon: int
    lower_bound_only: bool = False
    note: str = ""

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= value <= self.hi + slack


def phi_series(g, x, n_max: int = DEFAULT_NMAX) -> SeriesTruncation:
    """First-return series ``Phi(x,x|lam)`` truncated at ``n_max``."""
    phi = first_passage(g, x, x, n_max)
    exact = _exact(g)
    return SeriesTruncation(tuple(phi[1:]), exact, f"Phi({x!r},{x!r}) on {_name(g)}")


def h_series(g, x, n_max: int = DEFAULT_NMAX) -> SeriesTruncation:
    """Closed-walk series ``H(x,x|lam)`` with ``c0 = 1``."""
    counts = closed_walk_counts(g, x, n_max)
    return SeriesTruncation(tuple(counts[1:]), _exact(g), f"H({x!r},{x!r}) on {_name(g)}", c0=counts[0])


def theta_series(g, x, n_max: int = DEFAULT_NMAX) -> SeriesTruncation:
    """All-walk series ``Theta(x|lam) = sum_n T_x^n lam^n``."""
    t = path_counts(g, x, n_max).totals
    return SeriesTruncation(tuple(t[1:]), _exact(g), f"Theta({x!r}) on {_name(g)}", c0=t[0])


def _exact(g) -> bool:
    if isinstance(g, WeightedMultigraph):
        return g.exact
    if g.finite is not None:
        return g.finite.exact
    w = [w for _, w in g.neighbors(g.root)]
    return all(isinstance(v, (int, Fraction)) for v in w)


def _name(g) -> str:
    return g.name if isinstance(g, GraphFamily) else repr(g)


def _root_of_unity_crossing(series: SeriesTruncation, tol: float, lo_floor: float = 0.0):
    if not any(c > 0 for c in series.coeffs):
        return CriticalBracket(_OVERFLOW_GUARD, math.inf, series.n_max, True,
                               "truncated series is identically zero")
    support = [m for m, c in enumerate(series.coeffs, start=1) if c > 0]
    if len(support) == 1 and lo_floor == 0.0:
        # monomial c lam^m = 1 has the closed-form root c^(-1/m)
        m = support[0]
        root = 1.0 / nth_root(series.coefficient(m), m)
        return CriticalBracket(root, root, series.n_max, False, "closed form")
    c1 = float(series.coefficient(1))
    hi = 1.0 / c1 if c1 > 0 else 1.0
    while series(hi) < 1.0:
        hi *= 2.0
        if hi > _OVERFLOW_GUARD:
            return CriticalBracket(_OVERFLOW_GUARD, math.inf, series.n_max, True,
                                   "truncated series below 1 up to the overflow guard")
    lo = lo_floor
    if series(lo) >= 1.0:
        raise DomainError(f"series already >= 1 at lam={lo}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if series(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return CriticalBracket(lo, hi, series.n_max)


def lambda_s_from_phi(series: SeriesTruncation, tol: float = DEFAULT_TOL) -> CriticalBracket:
    """Bracket on the root of ``Phi_trunc(lam) = 1``.

    Truncation drops nonnegative terms, so the root is an upper bound for
    ``lambda_s = 1/M_s`` and is nonincreasing in the horizon.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    return _root_of_unity_crossing(series, tol)


@dataclass(frozen=True)
class LambdaSEnclosure:
    """Two-sided enclosure ``lo <= lambda_s <= hi`` at a finite horizon.

    ``hi`` is the smaller of the Phi-root and ``1/e_k`` (both upper bounds);
    ``lo`` is ``1/ms_upper`` for a known upper bound on ``M_s`` (by default
    the maximal degree, since ``M_s <= M_w <= M``).
    """

    lo: float
    hi: float
    horizon: int
    phi_root: CriticalBracket
    ms_lower: float
    ms_upper: float
    upper_source: str

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= value <= self.hi + slack


def lambda_s_bracket(g, x, n_max: int = DEFAULT_NMAX, tol: float = DEFAULT_TOL,
                     ms_upper: float | None = None) -> LambdaSEnclosure:
    """Enclose ``lambda_s = 1/M_s`` using only truncated counts (plus an optional ``M_s`` bound)."""
    root = lambda_s_from_phi(phi_series(g, x, n_max), tol)
    growth = ms_growth_estimate(g, x, n_max)
    ms_lower = growth[-1] if growth else 0.0
    hi = root.hi
    if ms_lower > 0:
        hi = min(hi, 1.0 / ms_lower)
    source = "supplied"
    if ms_upper is None:
        ms_upper = float(_max_degree(g))
        source = "max degree"
    lo = 1.0 / ms_upper if ms_upper > 0 else 0.0
    # a supplied bound can be slightly above the exact value through rounding
    lo = min(lo, hi)
    return LambdaSEnclosure(lo, hi, n_max, root, ms_lower, ms_upper, source)


def _max_degree(g):
    if isinstance(g, WeightedMultigraph):
        return g.max_degree
    if g.max_degree is not None:
        return g.max_degree
    if g.finite is not None:
        return g.finite.max_degree
    raise DomainError(f"family {g.name} does not declare a maximal degree")


def ms_growth_estimate(g, x, n_max: int = DEFAULT_NMAX, d: int | None = None) -> list[float]:
    """``e_k = max_{j<=k} (gamma^{dj}_{x,x})^{1/(dj)}`` for ``dj <= n_max``.

    Supermultiplicativity makes every term a lower bound for ``M_s``.
    """
    counts = closed_walk_counts(g, x, n_max)
    if d is None:
        d = _period_from(counts)
        if d is None:
            raise DomainError(f"no closed walk through {x!r} up to length {n_max}")
    out = []
    best = 0.0
    for j in range(1, n_max // d + 1):
        c = counts[d * j]
        if c > 0:
            best = max(best, nth_root(c, d * j))
        out.append(best)
    return out


def _period_from(counts) -> int | None:
    d = 0
    for n, c in enumerate(counts):
        if n and c > 0:
            d = math.gcd(d, n)
    return d or None


def nth_root(c, n: int) -> float:
    """``c ** (1/n)`` as a float, exact when ``c`` is a perfect integer power."""
    r = math.exp(_log(c) / n)
    if isinstance(c, int) and r < 2**52:
        k = round(r)
        if k**n == c:
            return float(k)
    return r


def _log(c) -> float:
    if isinstance(c, Fraction):
        return math.log(c.numerator) - math.log(c.denominator)
    return math.log(c)


@dataclass(frozen=True)
class GrowthEstimate:
    value: float
    oscillation: float
    horizon: int
    window: tuple = field(default=())


def mw_growth_estimate(g, x, n_max: int = DEFAULT_NMAX, window: int = 10) -> GrowthEstimate:
    """``(T_x^{n_max})^{1/n_max}`` and its max-min spread over the last ``window`` horizons."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    totals = path_counts(g, x, n_max).totals
    vals = tuple(nth_root(totals[n], n) for n in range(max(1, n_max - window + 1), n_max + 1))
    return GrowthEstimate(vals[-1], max(vals) - min(vals), n_max, vals)


def is_stochastic(P, tol: float = 1e-12, probe_radius: int = 2) -> bool:
    if isinstance(P, WeightedMultigraph):
        rows = [sum(w for _, w in P.neighbors(v)) for v in P.vertices]
    else:
        from .graph_core import materialize
        b = materialize(P, P.root, probe_radius)
        rows = [sum(w for _, w in P.neighbors(v)) for v in b.graph.vertices]
    return all(abs(float(r) - 1.0) <= tol for r in rows)


def rw_return_series(P, x, n_max: int = DEFAULT_NMAX) -> SeriesTruncation:
    """First-return probabilities ``f^(n)(x,x)`` of the random walk ``P``."""
    if not is_stochastic(P):
        raise DomainError("transition weights are not row-stochastic")
    f = first_passage(P, x, x, n_max)
    return SeriesTruncation(tuple(f[1:]), _exact(P), f"F({x!r},{x!r}) on {_name(P)}")


def modified_lambda_s(series: SeriesTruncation, tol: float = DEFAULT_TOL) -> CriticalBracket:
    """Bracket on ``R = max{lam : F(x,x|lam) <= 1}``; always ``R >= 1``."""
    if tol <= 0:
        raise DomainError("tol must be positive")
    if series(1.0) >= 1.0:
        # recurrent (up to truncation): the crossing sits at 1
        return CriticalBracket(1.0, 1.0, series.n_max, note="F(1) = 1")
    return _root_of_unity_crossing(series, tol, lo_floor=1.0)


@dataclass(frozen=True)
class CriticalRow:
    horizon: int
    phi_root_lo: float
    phi_root_hi: float
    ms_growth: float
    mw_growth: float


def critical_table(g, x, n_max: int = DEFAULT_NMAX, tol: float = DEFAULT_TOL,
                   horizons: Sequence[int] | None = None) -> list[CriticalRow]:
    """Phi-root bracket and growth estimates at a sequence of horizons."""
    if horizons is None:
        step = max(1, n_max // 8)
        horizons = sorted(set(list(range(step, n_max + 1, step)) + [n_max]))
    phi = phi_series(g, x, n_max)
    closed = closed_walk_counts(g, x, n_max)
    totals = path_counts(g, x, n_max).totals
    d = _period_from(closed)
    rows = []
    for n in horizons:
        s = phi.truncate(n)
        if any(c > 0 for c in s.coeffs):
            br = lambda_s_from_phi(s, tol)
            lo, hi = br.lo, br.hi
        else:
            lo, hi = math.nan, math.nan
        best = 0.0
        if d is not None:
            for j in range(1, n // d + 1):
                if closed[d * j] > 0:
                    best = max(best, nth_root(closed[d * j], d * j))
        mw = nth_root(totals[n], n) if n >= 1 else math.nan
        rows.append(CriticalRow(n, lo, hi, best, mw))
    return rows


__all__ = [
    "CriticalBracket",
    "GrowthEstimate",
    "SeriesTruncation",
    "critical_table",
    "LambdaSEnclosure",
    "h_series",
    "lambda_s_bracket",
    "lambda_s_from_phi",
    "modified_lambda_s",
    "ms_growth_estimate",
    "mw_growth_estimate",
    "period_of",
    "phi_series",
    "rw_return_series",
    "theta_series",
]
