"""Local isomorphisms onto finite multigraphs via equitable partitions.

A map ``phi: X -> Y`` is a local isomorphism when, for every vertex ``x`` and
every ``y`` in ``Y``, the weight from ``x`` into the fibre ``phi^-1(y)``
equals ``n^Y_{phi(x) y}``.  On a finite graph the coarsest equitable
partition (colour refinement with weighted signatures) yields one.  Infinite
families carry a constructed map instead; :func:`verify_local_isomorphism`
checks it on the interior of a ball.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Hashable, Mapping, Sequence

from .errors import DomainError
from .graph_core import (
    GraphFamily,
    WeightedMultigraph,
    canonical_key,
    materialize,
    path_counts,
)

FLOAT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QuotientMap:
    """Surjection from the vertices of a graph onto a finite ``codomain``.

    ``assignment`` is either a mapping (finite domains) or a callable
    (oracle-presented families).  ``verified_radius`` records the largest
    radius at which :func:`verify_local_isomorphism` passed.
    """

    codomain: WeightedMultigraph
    assignment: Mapping[Hashable, Hashable] | Callable[[Hashable], Hashable]
    domain: Any = None
    verified_radius: int | None = None

    def __call__(self, x):
        if callable(self.assignment):
            return self.assignment(x)
        try:
            return self.assignment[x]
        except KeyError:
            raise DomainError(f"{x!r} is not in the domain of the quotient map") from None

    @property
    def matrix(self) -> list[list]:
        m = self.codomain.matrix(exact=self.codomain.exact)
        return [[_plain(w) for w in row] for row in m.tolist()]

    def mark_verified(self, radius: int) -> "QuotientMap":
        return dataclasses.replace(self, verified_radius=radius)


def _plain(w):
    if isinstance(w, Fraction) and w.denominator == 1:
        return int(w)
    return w


def _key(w, exact):
    # exact weights compare exactly; floats on a 1e-9 grid
    return w if exact else round(float(w) / FLOAT_TOL)


def refine_partition(g: WeightedMultigraph, initial: Sequence[Sequence] | None = None):
    """Coarsest equitable partition of ``g`` refining ``initial``.

    Vertices stay together iff they carry the same colour and send the same
    total weight into every colour class.  Blocks are returned as tuples in
    canonical order: by size, then by smallest member (in the graph's vertex
    order).
    """
    n = len(g)
    adj = g.adjacency()
    colour = [0] * n
    if initial is not None:
        seen = set()
        for b, block in enumerate(initial):
            for v in block:
                i = g._check(v)
                if i in seen:
                    raise DomainError(f"vertex {v!r} appears in two seed blocks")
                seen.add(i)
                colour[i] = b + 1
        # unlisted vertices form one extra block
    colour = _relabel(colour)
    while True:
        sigs = []
        for i in range(n):
            acc: dict = {}
            for j, w in adj[i]:
                acc[colour[j]] = acc.get(colour[j], 0) + w
            sig = tuple(sorted((c, _key(w, g.exact)) for c, w in acc.items()))
            sigs.append((colour[i], sig))
        new = _relabel(sigs)
        if max(new) == max(colour):
            break
        colour = new
    blocks: dict[int, list[int]] = {}
    for i, c in enumerate(colour):
        blocks.setdefault(c, []).append(i)
    ordered = sorted(blocks.values(), key=lambda b: (len(b), b[0]))
    return tuple(tuple(g.vertices[i] for i in b) for b in ordered)


def _relabel(keys):
    # canonical ids by first occurrence, independent of key values' ordering
    ids: dict = {}
    out = []
    for k in keys:
        if k not in ids:
            ids[k] = len(ids)
        out.append(ids[k])
    return out


class NonEquitableError(DomainError):
    def __init__(self, x, x2, block):
        self.triple = (x, x2, block)
        super().__init__(
            f"partition is not equitable: {x!r} and {x2!r} send different weight into block {block}"
        )


def build_quotient(g: WeightedMultigraph, partition: Sequence[Sequence]):
    """Quotient multigraph ``Y`` (one vertex per block) and the map onto it.

    Every representative of every block is checked, so a non-equitable
    partition raises :class:`NonEquitableError` naming a violating triple.
    """
    assign = {}
    for b, block in enumerate(partition):
        for v in block:
            g._check(v)
            if v in assign:
                raise DomainError(f"vertex {v!r} appears in two blocks")
            assign[v] = b
    missing = [v for v in g.vertices if v not in assign]
    if missing:
        raise DomainError(f"partition does not cover vertex {missing[0]!r}")
    k = len(partition)
    rows: list[list | None] = [None] * k
    first: list = [None] * k
    for x in g.vertices:
        b = assign[x]
        row = [0] * k
        for y, w in g.neighbors(x):
            row[assign[y]] += w
        if rows[b] is None:
            rows[b], first[b] = row, x
            continue
        for c in range(k):
            if _key(row[c], g.exact) != _key(rows[b][c], g.exact):
                raise NonEquitableError(first[b], x, c)
    y_graph = WeightedMultigraph.from_matrix(
        rows, oriented=g.oriented or any(rows[i][j] != rows[j][i] for i in range(k) for j in range(k))
    )
    return y_graph, QuotientMap(codomain=y_graph, assignment=assign, domain=g)


def quotient_of(g: WeightedMultigraph, initial=None):
    """Refine then build: the coarsest quotient of a finite graph."""
    return build_quotient(g, refine_partition(g, initial))


@dataclass(frozen=True)
class Violation:
    vertex: Any
    kind: str
    detail: str


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    radius: int
    vertices_checked: int
    totals_checked: int
    violation: Violation | None = None
    float_tolerance: bool = False
    totals: tuple = ()

    def __bool__(self):
        return self.passed


def verify_local_isomorphism(g, qmap: QuotientMap, radius: int, root=None) -> VerificationReport:
    """Check the local-isomorphism condition on the interior of ``B(root, radius)``.

    Also checks ``T_root^n(X) == T_{phi(root)}^n(Y)`` for ``n <= radius - 1``,
    counting walks on the materialized ball (not on any type graph).
    Violations are reported, not raised.
    """
    if radius < 1:
        raise DomainError("verification radius must be >= 1")
    if root is None:
        root = g.root if isinstance(g, GraphFamily) else g.vertices[0]
    Y = qmap.codomain
    b = materialize(g, root, radius)
    exact = Y.exact and b.graph.exact
    seen_classes = set()
    checked = 0
    for x in b.graph.vertices:
        try:
            cx = qmap(x)
        except Exception as exc:  # noqa: BLE001 - any failure of the map is a violation
            return _fail(radius, checked, x, "unmapped", str(exc))
        if cx not in Y.index:
            return _fail(radius, checked, x, "unmapped", f"class {cx!r} is not a vertex of Y")
        seen_classes.add(cx)
        if b.dist[x] >= radius:
            continue
        acc: dict = {}
        for z, w in g.neighbors(x):
            cz = qmap(z)
            acc[cz] = acc.get(cz, 0) + w
        want = dict(Y.neighbors(cx))
        for c in set(acc) | set(want):
            got, exp = acc.get(c, 0), want.get(c, 0)
            ok = got == exp if exact else abs(float(got) - float(exp)) <= FLOAT_TOL
            if not ok:
                return _fail(
                    radius, checked, x, "weight",
                    f"weight into class {c!r} is {got!r}, quotient says {exp!r}",
                )
        checked += 1
    if seen_classes != set(Y.vertices):
        lost = sorted(set(Y.vertices) - seen_classes, key=canonical_key)
        return _fail(radius, checked, root, "surjectivity", f"class {lost[0]!r} not reached")

    horizon = radius - 1
    tx = path_counts(b.graph, root, horizon).totals
    ty = path_counts(Y, qmap(root), horizon).totals
    for n, (a, c) in enumerate(zip(tx, ty)):
        ok = a == c if exact else abs(a - c) <= FLOAT_TOL * max(1.0, abs(c))
        if not ok:
            return VerificationReport(
                False, radius, checked, n,
                Violation(root, "totals", f"T^{n}: X gives {a}, Y gives {c}"),
                not exact, tuple(zip(tx, ty)),
            )
    return VerificationReport(True, radius, checked, horizon + 1, None, not exact, tuple(zip(tx, ty)))


def _fail(radius, checked, vertex, kind, detail):
    return VerificationReport(False, radius, checked, 0, Violation(vertex, kind, detail))


def verified(g, qmap: QuotientMap, radius: int) -> QuotientMap:
    """Return ``qmap`` marked verified, or raise with the first violation."""
    report = verify_local_isomorphism(g, qmap, radius)
    if not report.passed:
        v = report.violation
        raise DomainError(f"local isomorphism fails at {v.vertex!r} ({v.kind}): {v.detail}")
    return qmap.mark_verified(radius)
