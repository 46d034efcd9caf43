"""Perron roots, operator-norm lower bounds on balls, amenability classifier.

For a non-oriented multigraph the closed-walk growth ``M_s`` equals the
operator norm of the adjacency operator, which is the limit of the spectral
radii of its finite balls (with zero boundary).  ``M_w`` of an F-multigraph
is the Perron root of its finite quotient.  Comparing the two classifies the
graph: a gap ``M_s < M_w`` happens exactly for nonamenable graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DomainError, NumericError
from .genfun import mw_growth_estimate
from .graph_core import GraphFamily, WeightedMultigraph, materialize, type_graph
from .quotient import QuotientMap, verify_local_isomorphism

DEFAULT_TOL = 1e-12
DEFAULT_MARGIN = 0.05
MAX_ITER = 500_000


@dataclass(frozen=True)
class PerronResult:
    """Perron root with positive eigenvectors (max entry 1).

    ``lower``/``upper`` are the final Collatz-Wielandt bounds, which enclose
    the root rigorously up to floating-point rounding.
    """

    value: float
    right: np.ndarray
    left: np.ndarray
    iterations: int
    lower: float
    upper: float


def _as_matrix(N):
    if isinstance(N, WeightedMultigraph):
        return N.csr(dtype=float) if len(N) > 200 else N.matrix(exact=False)
    if sp.issparse(N):
        return N.astype(float).tocsr()
    a = np.asarray(N, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("perron_root needs a square matrix")
    return a


def is_irreducible(A) -> bool:
    n = A.shape[0]
    if n == 1:
        return True
    pattern = sp.csr_matrix(A) if not sp.issparse(A) else A
    k, _ = connected_components(pattern, directed=True, connection="strong")
    return k == 1


def _power(A, tol, max_iter, what):
    n = A.shape[0]
    shifted = A + (sp.identity(n, format="csr") if sp.issparse(A) else np.eye(n))
    x = np.ones(n)
    lo, hi = -math.inf, math.inf
    for it in range(1, max_iter + 1):
        y = shifted @ x
        r = y / x
        lo, hi = float(r.min()), float(r.max())
        x = y / y.max()
        # Collatz-Wielandt: lo <= rho(A + I) <= hi for every positive x
        if hi - lo <= max(tol, 16 * np.finfo(float).eps * hi):
            return x, lo - 1.0, hi - 1.0, it
    raise NumericError(
        f"power iteration for the {what} eigenvector did not converge in {max_iter} "
        f"iterations (Collatz-Wielandt gap {hi - lo:.3e})"
    )


def perron_root(N, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> PerronResult:
    """Perron root of a nonnegative irreducible matrix by shifted power iteration.

    Iterating with ``N + I`` keeps the Perron vector but removes the
    peripheral spectrum of periodic matrices, so bipartite graphs converge.
    """
    A = _as_matrix(N)
    dense_neg = (A.data < 0).any() if sp.issparse(A) else (A < 0).any()
    if dense_neg:
        raise DomainError("perron_root needs a nonnegative matrix")
    if not is_irreducible(A):
        raise DomainError("matrix is reducible (its digraph is not strongly connected)")
    right, lo, hi, it = _power(A, tol, max_iter, "right")
    left, _, _, it2 = _power(A.T.tocsr() if sp.issparse(A) else A.T, tol, max_iter, "left")
    value = 0.5 * (lo + hi)
    return PerronResult(value, right, left, max(it, it2), lo, hi)


def perron_lower_bound(N, tol: float = 1e-10, max_iter: int = MAX_ITER) -> float:
    """Collatz-Wielandt lower bound for the spectral radius (right iteration only)."""
    A = _as_matrix(N)
    if not is_irreducible(A):
        raise DomainError("matrix is reducible")
    _, lo, _, _ = _power(A, tol, max_iter, "right")
    return lo


@dataclass(frozen=True)
class MwResult:
    value: float
    source: str  # "quotient", "finite" or "estimate"
    exact: bool
    detail: str = ""


def mw_of(g, verify_radius: int = 3) -> MwResult:
    """``M_w`` from the finite graph itself or from a verified quotient.

    Without a quotient this falls back to the growth estimate of the walk
    totals and says so.
    """
    if isinstance(g, WeightedMultigraph):
        return MwResult(perron_root(g).value, "finite", True)
    if g.finite is not None:
        return MwResult(perron_root(g.finite).value, "finite", True)
    q = g.known_quotient
    if q is not None:
        if q.verified_radius is None or q.verified_radius < verify_radius:
            report = verify_local_isomorphism(g, q, max(verify_radius, 3))
            if not report.passed:
                raise DomainError(f"known quotient of {g.name} fails verification: {report.violation}")
        return MwResult(perron_root(q.codomain).value, "quotient", True)
    est = mw_growth_estimate(g, g.root, 30)
    return MwResult(est.value, "estimate", False, f"(T^n)^(1/n) at n=30, oscillation {est.oscillation:.3g}")


def _ball_matrix(g, o, r):
    if isinstance(g, WeightedMultigraph):
        return materialize(g, o, r).graph
    if g.vertex_type is not None and o == g.root and g.finite is None:
        return type_graph(g, r).graph
    return materialize(g, o, r).graph


def ms_lower_bounds(g, o=None, radii: Sequence[int] = (4, 8, 16)) -> list[float]:
    """Spectral radii of the adjacency restricted to ``B(o, r)``, one per radius.

    Each term is a Collatz-Wielandt lower bound, so it never exceeds
    ``M_s``; a running maximum keeps the sequence nondecreasing against
    rounding.
    """
    if g.oriented:
        raise DomainError("ms_lower_bounds needs a non-oriented graph; use genfun.ms_growth_estimate")
    if o is None:
        o = g.root if isinstance(g, GraphFamily) else g.vertices[0]
    out = []
    best = 0.0
    for r in radii:
        if r < 0:
            raise DomainError("radii must be nonnegative")
        ball = _ball_matrix(g, o, r)
        val = perron_lower_bound(ball)
        best = max(best, val)
        out.append(best)
    return out


@dataclass(frozen=True)
class SpectralReport:
    mw: float
    ms_sequence: tuple
    radii: tuple
    ms_bracket: tuple
    gap: float
    verdict: str
    margin: float
    stabilized: bool
    lambda_s_bracket: tuple
    lambda_w: float
    lambda_w_status: str
    max_degree: float
    consistent: bool
    basis: str = field(
        default="non-oriented F-multigraph: lambda_w < lambda_s iff the graph is nonamenable; "
        "lambda_s = 1/M_s, lambda_w = 1/M_w"
    )

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "mw": self.mw,
            "ms_sequence": list(self.ms_sequence),
            "radii": list(self.radii),
            "ms_bracket": list(self.ms_bracket),
            "gap": self.gap,
            "margin": self.margin,
            "stabilized": self.stabilized,
            "lambda_s_bracket": list(self.lambda_s_bracket),
            "lambda_w": self.lambda_w,
            "lambda_w_status": self.lambda_w_status,
            "max_degree": self.max_degree,
            "consistent": self.consistent,
            "basis": self.basis,
        }


def default_radii(radius_max: int, points: int = 8) -> list[int]:
    step = max(1, radius_max // points)
    radii = list(range(step, radius_max + 1, step))
    if radii[-1] != radius_max:
        radii.append(radius_max)
    return radii


def classify(g, tol_margin: float = DEFAULT_MARGIN, radius_max: int | None = None,
             radii: Sequence[int] | None = None, verify_radius: int = 6) -> SpectralReport:
    """Amenable / nonamenable / inconclusive verdict from ``M_w`` against ``M_s`` lower bounds."""
    if g.oriented:
        raise DomainError("classify handles non-oriented multigraphs only")
    if isinstance(g, WeightedMultigraph):
        mw = perron_root(g).value
        status = "= 1/M_w (finite multigraph)"
        max_deg = g.max_degree
        o = g.vertices[0]
    else:
        if g.known_quotient is None and g.finite is None:
            raise DomainError(f"family {g.name} has no quotient to verify; classify needs an F-multigraph")
        mw = mw_of(g, verify_radius=verify_radius).value
        if g.finite is None:
            rep = verify_local_isomorphism(g, g.known_quotient, verify_radius)
            if not rep.passed:
                raise DomainError(f"quotient verification failed: {rep.violation}")
        status = "= 1/M_w (F-multigraph)" if g.uniformity == "quotient" else ">= 1/M_w only"
        max_deg = g.max_degree if g.max_degree is not None else math.nan
        o = g.root
    if radii is None:
        if radius_max is None:
            radius_max = 64 if getattr(g, "vertex_type", None) is not None else 12
        radii = default_radii(radius_max)
    radii = list(radii)
    seq = ms_lower_bounds(g, o, radii)
    ms = seq[-1]
    incs = [b - a for a, b in zip(seq, seq[1:])]
    stabilized = len(incs) >= 2 and all(abs(d) < tol_margin / 10 for d in incs[-2:])
    gap = mw - ms
    if stabilized and gap > tol_margin:
        verdict = "nonamenable"
    elif stabilized and abs(gap) < tol_margin:
        verdict = "amenable"
    else:
        verdict = "inconclusive"
    eps = 1e-9
    consistent = 1 - eps <= ms <= mw + eps and (math.isnan(max_deg) or mw <= max_deg + eps)
    return SpectralReport(
        mw=mw,
        ms_sequence=tuple(seq),
        radii=tuple(radii),
        ms_bracket=(ms, mw),
        gap=gap,
        verdict=verdict,
        margin=tol_margin,
        stabilized=stabilized,
        lambda_s_bracket=(1.0 / mw, 1.0 / ms),
        lambda_w=1.0 / mw,
        lambda_w_status=status,
        max_degree=float(max_deg),
        consistent=consistent,
    )


def eigenvector_transport_residual(g: GraphFamily, qmap: QuotientMap, radius: int) -> float:
    """Max over interior ball vertices of ``|sum_y n_xy a(phi(y)) - M_w a(phi(x))|``."""
    res = perron_root(qmap.codomain)
    Y = qmap.codomain
    a = {v: res.right[i] for i, v in enumerate(Y.vertices)}
    b = materialize(g, g.root, radius)
    worst = 0.0
    for x in b.interior():
        lhs = sum(float(w) * a[qmap(y)] for y, w in g.neighbors(x))
        worst = max(worst, abs(lhs - res.value * a[qmap(x)]))
    return worst


__all__ = [
    "MwResult",
    "PerronResult",
    "SpectralReport",
    "classify",
    "default_radii",
    "eigenvector_transport_residual",
    "ms_lower_bounds",
    "mw_of",
    "perron_lower_bound",
    "perron_root",
]
