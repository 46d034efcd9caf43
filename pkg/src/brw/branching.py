"""Galton-Watson generating functions and the finite-family survival bound.

The extinction probability of a Galton-Watson process is the smallest fixed
point of its offspring pgf in [0, 1], reached by iterating the pgf from 0:
``s_k`` is exactly the probability of extinction by generation ``k``.
For a process whose individuals draw their offspring laws from a finite
collection, a common ``delta < 1`` with ``G_i(delta) <= delta`` for every law
bounds the extinction probability from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

FIXED_POINT_TOL = 1e-14
MAX_ITER = 1_000_000
NEAR_CRITICAL = 1e-6
# populations above this are treated as surviving; extinction from here has
# probability at most delta**POP_CEILING
POP_CEILING = 2**40


class OffspringLaw:
    """Offspring distribution given by coefficients ``nu(0..K)`` or by a pgf.

    ``OffspringLaw([0.25, 0, 0.75])`` is the law with pgf ``1/4 + 3 s^2 / 4``.
    A callable law needs ``pgf`` and its derivative ``dpgf``.
    """

    def __init__(self, coeffs: Sequence[float] | None = None, pgf: Callable | None = None,
                 dpgf: Callable | None = None, tol: float = 1e-12):
        if (coeffs is None) == (pgf is None):
            raise DomainError("give either coefficients or a pgf")
        if coeffs is not None:
            c = np.asarray(coeffs, dtype=float)
            if c.ndim != 1 or c.size == 0:
                raise DomainError("offspring coefficients must be a nonempty sequence")
            if (c < 0).any() or not np.isfinite(c).all():
                raise DomainError("offspring probabilities must be finite and nonnegative")
            if abs(c.sum() - 1.0) > tol:
                raise DomainError(f"offspring probabilities sum to {c.sum()!r}, not 1")
            self.coeffs = c
            self._rev = [float(v) for v in c[::-1]]
            self._pgf = None
            self.mean = float(np.dot(np.arange(c.size), c))
        else:
            if dpgf is None:
                raise DomainError("a callable law needs its derivative dpgf")
            if abs(pgf(1.0) - 1.0) > tol:
                raise DomainError("pgf(1) must equal 1")
            self.coeffs = None
            self._pgf, self._dpgf = pgf, dpgf
            self.mean = float(dpgf(1.0))

    @classmethod
    def parse(cls, text: str) -> "OffspringLaw":
        """Law from a comma separated coefficient list such as ``"0.25,0,0.75"``."""
        try:
            return cls([float(t) for t in text.split(",") if t.strip()])
        except ValueError as exc:
            raise DomainError(f"cannot parse offspring law {text!r}: {exc}") from None

    @property
    def finite_support(self) -> bool:
        return self.coeffs is not None

    def __call__(self, s):
        if self.coeffs is not None:
            if isinstance(s, float):
                acc = 0.0
                for c in self._rev:
                    acc = acc * s + c
                return acc
            # np.polyval wants the highest degree first
            return np.polyval(self.coeffs[::-1], s)
        return self._pgf(s)

    def derivative(self, s):
        if self.coeffs is not None:
            k = np.arange(1, self.coeffs.size)
            return np.polyval((k * self.coeffs[1:])[::-1], s) if k.size else 0.0 * s
        return self._dpgf(s)

    def __repr__(self):
        if self.coeffs is not None:
            return f"OffspringLaw({self.coeffs.tolist()})"
        return "OffspringLaw(<pgf>)"


@dataclass(frozen=True)
class FixedPoint:
    delta: float
    iterations: int
    near_critical: bool
    converged: bool


def _deterministic_single_child(law: OffspringLaw) -> bool:
    return law.coeffs is not None and law.coeffs.size > 1 and law.coeffs[1] == 1.0


def smallest_fixed_point(law: OffspringLaw, tol: float = FIXED_POINT_TOL,
                         max_iter: int = MAX_ITER) -> FixedPoint:
    """Smallest solution of ``G(s) = s`` in [0, 1], by iterating ``G`` from 0.

    For finite-support laws the result is exactly 1 when ``mean <= 1``
    (unless every individual has exactly one child), which the iteration
    only approaches slowly at criticality.
    """
    near = abs(law.mean - 1.0) < NEAR_CRITICAL
    if law.finite_support and law.mean <= 1.0 and not _deterministic_single_child(law):
        return FixedPoint(1.0, 0, near, True)
    s = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        nxt = float(law(s))
        if abs(nxt - s) < tol:
            s = nxt
            converged = True
            break
        s = nxt
    return FixedPoint(min(max(s, 0.0), 1.0), it, near, converged)


def extinction_by_generation(law: OffspringLaw, generations: int) -> list[float]:
    """``[q_0, q_1, ..., q_n]`` with ``q_k = G(q_{k-1})``, ``q_0 = 0``."""
    q = [0.0]
    for _ in range(generations):
        q.append(float(law(q[-1])))
    return q


@dataclass(frozen=True)
class PowerhouseBound:
    """Common bound ``delta_max`` with ``G_i(delta_max) <= delta_max`` for all laws.

    ``delta_max is None`` marks "no bound": some law is (sub)critical.
    """

    delta_max: float | None
    certificate: tuple
    per_law: tuple
    reason: str = ""

    @property
    def holds(self) -> bool:
        return self.delta_max is not None and all(ok for _, _, ok in self.certificate)


def powerhouse_bound(laws: Sequence[OffspringLaw], tol: float = FIXED_POINT_TOL) -> PowerhouseBound:
    """``delta_max = max_i delta_i`` and the checked inequalities ``G_i(delta_max) <= delta_max``."""
    if not laws:
        raise DomainError("need at least one offspring law")
    deltas = tuple(smallest_fixed_point(law, tol).delta for law in laws)
    bad = [i for i, d in enumerate(deltas) if d >= 1.0]
    if bad:
        return PowerhouseBound(None, (), deltas, f"law {bad[0]} has extinction probability 1")
    dmax = max(deltas)
    # the iteration stops within tol of the fixed point
    cert = tuple((i, float(law(dmax)), float(law(dmax)) <= dmax + 10 * tol) for i, law in enumerate(laws))
    return PowerhouseBound(dmax, cert, deltas)


def _block_seeds(seed, n_blocks):
    ss = np.random.SeedSequence(seed)
    return ss.spawn(n_blocks)


def simulate_gw(law: OffspringLaw, generations: int, trials: int, seed: int = 0,
                block: int = 1000) -> np.ndarray:
    """Empirical extinction-by-generation frequencies, ``freq[k]`` for ``k = 0..generations``.

    Trials are simulated in blocks of ``block``; block ``b`` uses the ``b``-th
    child of ``SeedSequence(seed)``, so results do not depend on how blocks
    are scheduled.
    """
    if not law.finite_support:
        raise DomainError("simulate_gw needs a finite-support law")
    if trials < 1 or generations < 0:
        raise DomainError("need trials >= 1 and generations >= 0")
    p = law.coeffs
    ks = np.arange(p.size)
    extinct = np.zeros(generations + 1)
    n_blocks = math.ceil(trials / block)
    for b, child in enumerate(_block_seeds(seed, n_blocks)):
        rng = np.random.default_rng(child)
        m = min(block, trials - b * block)
        z = np.ones(m, dtype=np.int64)
        for g in range(1, generations + 1):
            alive = (z > 0) & (z < POP_CEILING)
            if alive.any():
                counts = rng.multinomial(z[alive], p)
                z[alive] = np.minimum(counts @ ks, POP_CEILING)
            extinct[g] += np.count_nonzero(z == 0)
    return extinct / trials
