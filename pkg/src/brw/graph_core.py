"""Weighted multigraphs, lazily generated graph families and exact walk counts.

Finite graphs are :class:`WeightedMultigraph` values.  Infinite graphs exist
only as :class:`GraphFamily` oracles; every computation at horizon ``n`` first
materializes the finite ball it needs.

Exactness: integer and :class:`fractions.Fraction` weights are counted in
exact arithmetic (Python ints never overflow).  Float weights are counted in
double precision and the exactness invariants do not apply to them.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Real
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DomainError, ResourceError

Vertex = Hashable

# cells in a PathCountTable (horizons x vertices) before we refuse
DEFAULT_MAX_CELLS = 60_000_000
DEFAULT_MAX_VERTICES = 2_000_000
_INT64_SAFE = 2**62


def canonical_key(v):
    """Sort key for vertex encodings; tuples of ints sort lexicographically."""
    return (type(v).__name__, v)


def _clean_weight(w):
    if isinstance(w, bool):
        raise DomainError(f"weight must be numeric, got {w!r}")
    if isinstance(w, Integral):
        w = int(w)
    elif isinstance(w, Fraction):
        if w.denominator == 1:
            w = int(w)
    elif isinstance(w, Real):
        w = float(w)
        if not math.isfinite(w):
            raise DomainError(f"weight must be finite, got {w!r}")
    else:
        raise DomainError(f"weight must be numeric, got {w!r}")
    if w < 0:
        raise DomainError(f"weights must be nonnegative, got {w!r}")
    return w


class WeightedMultigraph:
    """Finite weighted multigraph with weights ``n_xy >= 0``.

    ``weights`` maps ordered pairs ``(x, y)`` to ``n_xy``; absent pairs are 0.
    For ``oriented=False`` the mapping must already be symmetric (use
    :meth:`from_edges` to symmetrize an edge list).  Loops ``(x, x)`` are
    allowed and count once per traversal.

    Vertex order is the order of ``vertices``; neighbor lists follow it.
    """

    def __init__(
        self,
        vertices: Sequence[Vertex],
        weights: Mapping[tuple[Vertex, Vertex], Any],
        oriented: bool = False,
        check_connected: bool = True,
    ):
        self.vertices = tuple(vertices)
        self.oriented = bool(oriented)
        self.index = {v: i for i, v in enumerate(self.vertices)}
        if len(self.index) != len(self.vertices):
            raise DomainError("duplicate vertex identifiers")
        if not self.vertices:
            raise DomainError("a multigraph needs at least one vertex")

        clean = {}
        for (x, y), w in weights.items():
            if x not in self.index or y not in self.index:
                raise DomainError(f"edge ({x!r}, {y!r}) references an unknown vertex")
            w = _clean_weight(w)
            if w != 0:
                clean[(x, y)] = w
        self.weights = clean

        if not self.oriented:
            for (x, y), w in clean.items():
                back = clean.get((y, x), 0)
                if back != w:
                    raise DomainError(
                        f"non-oriented graph is not symmetric: n[{x!r},{y!r}]={w!r} "
                        f"but n[{y!r},{x!r}]={back!r}"
                    )

        adj: list[list[tuple[int, Any]]] = [[] for _ in self.vertices]
        for (x, y), w in clean.items():
            adj[self.index[x]].append((self.index[y], w))
        for row in adj:
            row.sort()
        self._adj = [tuple(r) for r in adj]
        self.degrees = tuple(sum((w for _, w in row), 0) for row in self._adj)
        self.max_degree = max(self.degrees)
        self.integral = all(isinstance(w, int) for w in clean.values())
        self.exact = all(isinstance(w, (int, Fraction)) for w in clean.values())

        if check_connected and not self._weakly_connected():
            raise DomainError("multigraph is not connected")

    @classmethod
    def from_edges(cls, vertices, edges: Iterable[tuple], oriented: bool = False, **kw):
        """Build from ``(src, dst, weight)`` triples, accumulating parallel edges.

        Non-oriented edge lists give each edge once; the reverse is added here.
        """
        acc: dict[tuple, Any] = {}
        for src, dst, w in edges:
            w = _clean_weight(w)
            acc[(src, dst)] = acc.get((src, dst), 0) + w
            if not oriented and src != dst:
                acc[(dst, src)] = acc.get((dst, src), 0) + w
        return cls(vertices, acc, oriented=oriented, **kw)

    @classmethod
    def from_matrix(cls, matrix, vertices=None, oriented=None, **kw):
        m = [list(row) for row in matrix]
        k = len(m)
        if any(len(row) != k for row in m):
            raise DomainError("matrix must be square")
        vertices = list(range(k)) if vertices is None else list(vertices)
        weights = {}
        for i in range(k):
            for j in range(k):
                w = m[i][j]
                if isinstance(w, np.generic):
                    w = w.item()
                if w:
                    weights[(vertices[i], vertices[j])] = w
        if oriented is None:
            oriented = any(m[i][j] != m[j][i] for i in range(k) for j in range(k))
        return cls(vertices, weights, oriented=oriented, **kw)

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        kind = "oriented" if self.oriented else "non-oriented"
        return f"WeightedMultigraph({len(self)} vertices, {len(self.weights)} arcs, {kind})"

    def __eq__(self, other):
        if not isinstance(other, WeightedMultigraph):
            return NotImplemented
        return (
            self.vertices == other.vertices
            and self.oriented == other.oriented
            and self.weights == other.weights
        )

    __hash__ = None

    def _weakly_connected(self) -> bool:
        und: list[set[int]] = [set() for _ in self.vertices]
        for i, row in enumerate(self._adj):
            for j, _ in row:
                und[i].add(j)
                und[j].add(i)
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in und[i]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == len(self.vertices)

    def _check(self, x):
        try:
            return self.index[x]
        except (KeyError, TypeError):
            raise DomainError(f"unknown vertex {x!r}") from None

    def neighbors(self, x) -> tuple[tuple[Vertex, Any], ...]:
        i = self._check(x)
        return tuple((self.vertices[j], w) for j, w in self._adj[i])

    def degree(self, x):
        return self.degrees[self._check(x)]

    def weight(self, x, y):
        return self.weights.get((x, y), 0)

    def adjacency(self) -> tuple[tuple[tuple[int, Any], ...], ...]:
        """Index-based adjacency lists ``[(j, n_ij), ...]`` sorted by ``j``."""
        return tuple(self._adj)

    def matrix(self, exact: bool | None = None) -> np.ndarray:
        """Dense weight matrix; ``dtype=object`` holding exact weights if ``exact``."""
        exact = self.exact if exact is None else exact
        k = len(self.vertices)
        if exact:
            m = np.zeros((k, k), dtype=object)
            m[:, :] = 0
        else:
            m = np.zeros((k, k), dtype=float)
        for i, row in enumerate(self._adj):
            for j, w in row:
                m[i, j] = w if exact else float(w)
        return m

    def csr(self, dtype=float) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, row in enumerate(self._adj):
            for j, w in row:
                rows.append(i)
                cols.append(j)
                vals.append(w)
        k = len(self.vertices)
        return sp.csr_matrix((np.asarray(vals, dtype=dtype), (rows, cols)), shape=(k, k))

    def symmetric(self) -> bool:
        return all(self.weights.get((y, x), 0) == w for (x, y), w in self.weights.items())

    def to_json(self, encode: Callable[[Vertex], str] = str) -> dict:
        """brw-graph-v1 document; non-oriented graphs list each edge once."""
        edges = []
        for (x, y), w in sorted(
            self.weights.items(), key=lambda kv: (self.index[kv[0][0]], self.index[kv[0][1]])
        ):
            if not self.oriented and self.index[y] < self.index[x]:
                continue
            if isinstance(w, Fraction):
                w = float(w)
            edges.append([encode(x), encode(y), w])
        return {
            "format": "brw-graph-v1",
            "oriented": self.oriented,
            "vertices": [encode(v) for v in self.vertices],
            "edges": edges,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "WeightedMultigraph":
        if doc.get("format") != "brw-graph-v1":
            raise ConfigError(f"unsupported graph format {doc.get('format')!r}")
        try:
            vertices = [str(v) for v in doc["vertices"]]
            oriented = bool(doc.get("oriented", False))
            edges = [(str(a), str(b), w) for a, b, w in doc["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed brw-graph-v1 document: {exc}") from None
        try:
            return cls.from_edges(vertices, edges, oriented=oriented)
        except DomainError as exc:
            raise ConfigError(f"invalid graph file: {exc}") from None


@dataclass(frozen=True, eq=False)
class GraphFamily:
    """Lazy presentation of a possibly infinite multigraph.

    ``neighbor_oracle(x)`` must be pure and return ``(y, n_xy)`` pairs with
    positive weight.  ``vertex_type`` is optional: a labelling of vertices
    that refines the distance from ``root`` and is an equitable partition
    (every vertex of a type sends the same total weight into every other
    type).  When present, counts from the root are computed on the finite
    type graph instead of on the materialized ball.
    """

    name: str
    params: Mapping[str, Any]
    neighbor_oracle: Callable[[Vertex], Sequence[tuple[Vertex, Any]]]
    root: Vertex
    oriented: bool = False
    is_vertex: Callable[[Vertex], bool] | None = None
    known_quotient: Any = None
    vertex_type: Callable[[Vertex], Hashable] | None = None
    max_degree: Any = None
    # how "M_w attained uniformly" is certified: "quotient", "radial_periodic" or "unknown"
    uniformity: str = "unknown"
    finite: WeightedMultigraph | None = None
    encode: Callable[[Vertex], str] = field(default=lambda v: encode_vertex(v))

    def neighbors(self, x) -> tuple[tuple[Vertex, Any], ...]:
        if self.is_vertex is not None:
            try:
                ok = self.is_vertex(x)
            except (TypeError, ValueError):
                ok = False
            if not ok:
                raise DomainError(f"{x!r} is not a vertex of family {self.name}")
        acc: dict = {}
        for y, w in self.neighbor_oracle(x):
            w = _clean_weight(w)
            if w:
                acc[y] = acc.get(y, 0) + w
        return tuple(sorted(acc.items(), key=lambda kv: canonical_key(kv[0])))

    def __repr__(self):
        return f"GraphFamily({self.name}, {dict(self.params)})"


def encode_vertex(v) -> str:
    if isinstance(v, tuple):
        return "(" + ",".join(encode_vertex(c) for c in v) + ")"
    return str(v)


def family_from_graph(g: WeightedMultigraph, root=None, name="graph") -> GraphFamily:
    """Wrap a finite graph so it can be used wherever a family is expected."""
    root = g.vertices[0] if root is None else root
    g._check(root)
    return GraphFamily(
        name=name,
        params={"vertices": len(g)},
        neighbor_oracle=g.neighbors,
        root=root,
        oriented=g.oriented,
        is_vertex=lambda v: v in g.index,
        max_degree=g.max_degree,
        finite=g,
    )


def neighbors(g, x):
    """Pairs ``(y, n_xy)`` with ``n_xy > 0`` in canonical order."""
    return g.neighbors(x)


# --- balls -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ball:
    """Finite induced subgraph on ``B(center, radius)``.

    ``outside[x]`` is the weight of arcs from ``x`` leaving the ball; it is
    nonzero only on boundary vertices (``dist == radius``).
    """

    center: Vertex
    radius: int
    graph: WeightedMultigraph
    dist: Mapping[Vertex, int]
    outside: Mapping[Vertex, Any]

    def interior(self):
        return [v for v in self.graph.vertices if self.dist[v] < self.radius]


def materialize(g, x, n: int, max_vertices: int = DEFAULT_MAX_VERTICES) -> Ball:
    """Breadth-first materialization of ``B(x, n)`` with full neighbor data."""
    if n < 0:
        raise DomainError(f"radius must be >= 0, got {n}")
    first = g.neighbors(x)  # validates x
    dist = {x: 0}
    nbrs = {x: first}
    frontier = deque([x])
    while frontier:
        v = frontier.popleft()
        d = dist[v]
        row = nbrs[v]
        if d == n:
            continue
        for y, _ in row:
            if y not in dist:
                dist[y] = d + 1
                nbrs[y] = g.neighbors(y)
                frontier.append(y)
                if len(dist) > max_vertices:
                    raise ResourceError(
                        f"ball of radius {n} exceeds {max_vertices} vertices "
                        f"(reached at distance {d + 1})"
                    )
    order = sorted(dist, key=lambda v: (dist[v], canonical_key(v)))
    weights = {}
    outside = {}
    for v in order:
        out = 0
        for y, w in nbrs[v]:
            if y in dist:
                weights[(v, y)] = w
            else:
                out += w
        if out:
            outside[v] = out
    graph = WeightedMultigraph(order, weights, oriented=g.oriented, check_connected=False)
    return Ball(center=x, radius=n, graph=graph, dist=dist, outside=outside)


def ball(g, x, n: int):
    """``(induced subgraph on B(x, n), distance map)``."""
    b = materialize(g, x, n)
    return b.graph, dict(b.dist)


def type_graph(family: GraphFamily, n: int, max_types: int = 1_000_000) -> Ball:
    """Ball of radius ``n`` around the root in the quotient by ``vertex_type``.

    The result is a :class:`Ball` whose vertices are types.  Walk counts from
    the root type equal the corresponding lumped counts in the family.
    """
    if family.vertex_type is None:
        raise ConfigError(f"family {family.name} has no vertex types")
    tau = family.vertex_type
    root_t = tau(family.root)
    rep = {root_t: family.root}
    dist = {root_t: 0}
    rows: dict = {}
    frontier = deque([root_t])
    while frontier:
        t = frontier.popleft()
        d = dist[t]
        acc: dict = {}
        for y, w in family.neighbors(rep[t]):
            ty = tau(y)
            acc[ty] = acc.get(ty, 0) + w
            if ty in dist:
                if abs(dist[ty] - d) > 1:
                    raise ConfigError(
                        f"vertex types of {family.name} do not refine the distance from the root"
                    )
            elif d < n:
                dist[ty] = d + 1
                rep[ty] = y
                frontier.append(ty)
                if len(dist) > max_types:
                    raise ResourceError(f"type graph of radius {n} exceeds {max_types} types")
        rows[t] = acc
    order = sorted(dist, key=lambda t: (dist[t], canonical_key(t)))
    weights = {}
    outside = {}
    for t in order:
        out = 0
        for u, w in rows[t].items():
            if u in dist:
                weights[(t, u)] = w
            else:
                out += w
        if out:
            outside[t] = out
    graph = WeightedMultigraph(order, weights, oriented=True, check_connected=False)
    return Ball(center=root_t, radius=n, graph=graph, dist=dist, outside=outside)


# --- walk counting ---------------------------------------------------------


class _Propagator:
    """Repeated row-vector products ``v -> v N`` in the cheapest exact arithmetic."""

    def __init__(self, graph: WeightedMultigraph, n_max: int):
        self.size = len(graph)
        bound = max(graph.max_degree, 1)
        if graph.integral and bound**n_max < _INT64_SAFE:
            self.mode = "int64"
            self.mat = graph.csr(dtype=np.int64).T.tocsr()
        elif graph.exact:
            self.mode = "object"
            self.adj = graph.adjacency()
        else:
            self.mode = "float"
            self.mat = graph.csr(dtype=float).T.tocsr()

    def unit(self, i):
        if self.mode == "object":
            v = [0] * self.size
            v[i] = 1
            return v
        v = np.zeros(self.size, dtype=np.int64 if self.mode == "int64" else float)
        v[i] = 1
        return v

    def step(self, v):
        if self.mode == "object":
            out = [0] * self.size
            for i, c in enumerate(v):
                if c:
                    for j, w in self.adj[i]:
                        out[j] += c * w
            return out
        return self.mat @ v

    def scalar(self, c):
        return int(c) if self.mode == "int64" else c

    def total(self, v):
        if self.mode == "object":
            return sum(v, 0)
        return int(v.sum()) if self.mode == "int64" else float(v.sum())


@dataclass(frozen=True, eq=False)
class PathCountTable:
    """Walk counts ``gamma^n_{x,y}`` and totals ``T_x^n`` for ``n <= n_max``.

    When ``lumped`` is true the columns are vertex types and each entry is
    the sum of ``gamma^n_{x,y}`` over the vertices ``y`` of that type; the
    root type is a singleton so ``gamma^n_{x,x}`` is still exact.
    """

    source: Vertex
    n_max: int
    vertices: tuple
    rows: tuple
    totals: tuple
    exact: bool
    lumped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "_col", {v: i for i, v in enumerate(self.vertices)})

    def gamma(self, y, n: int):
        if not 0 <= n <= self.n_max:
            raise DomainError(f"horizon {n} outside [0, {self.n_max}]")
        j = self._col.get(y)
        if j is None:
            return 0
        c = self.rows[n][j]
        return int(c) if isinstance(c, np.integer) else (float(c) if isinstance(c, np.floating) else c)

    def row(self, n: int) -> dict:
        return {v: self.gamma(v, n) for v in self.vertices if self.gamma(v, n)}

    def closed(self) -> list:
        """``[gamma^n_{x,x} for n in 0..n_max]``."""
        return [self.gamma(self.source, n) for n in range(self.n_max + 1)]


def _check_budget(n_max, size, max_cells):
    if (n_max + 1) * size > max_cells:
        raise ResourceError(
            f"path-count table at horizon {n_max} needs {(n_max + 1) * size} cells "
            f"(budget {max_cells})"
        )


def _count_on(graph: WeightedMultigraph, source, n_max, lumped=False, max_cells=DEFAULT_MAX_CELLS):
    _check_budget(n_max, len(graph), max_cells)
    prop = _Propagator(graph, n_max)
    v = prop.unit(graph.index[source])
    rows = [v]
    totals = [prop.total(v)]
    for _ in range(n_max):
        v = prop.step(v)
        rows.append(v)
        totals.append(prop.total(v))
    return PathCountTable(
        source=source,
        n_max=n_max,
        vertices=graph.vertices,
        rows=tuple(rows),
        totals=tuple(totals),
        exact=graph.exact,
        lumped=lumped,
    )


def _use_types(g, x, lump):
    if not isinstance(g, GraphFamily):
        return False
    can = g.vertex_type is not None and x == g.root
    if lump and not can:
        raise ConfigError("lumped counting needs a family with vertex types and x == root")
    return can if lump is None else bool(lump)


def _counting_graph(g, x, radius, lump):
    """``(graph, source)`` on which walks of the requested kind can be counted."""
    if n_is_bad(radius):
        raise DomainError(f"horizon must be >= 0, got {radius}")
    if isinstance(g, WeightedMultigraph):
        g._check(x)
        return g, x, False
    if g.finite is not None and lump is not True:
        g.finite._check(x)
        return g.finite, x, False
    if _use_types(g, x, lump):
        tg = type_graph(g, radius)
        return tg.graph, tg.center, True
    return materialize(g, x, radius).graph, x, False


def n_is_bad(n) -> bool:
    return not isinstance(n, Integral) or n < 0


def path_counts(g, x, n_max: int, lump: bool | None = None,
                max_cells: int = DEFAULT_MAX_CELLS) -> PathCountTable:
    """Exact ``gamma^n_{x,y}`` and ``T_x^n`` for ``n <= n_max``.

    For families the ball ``B(x, n_max)`` is materialized first, unless the
    family carries vertex types and ``x`` is its root, in which case the
    (much smaller) type graph is used and the table is marked ``lumped``.
    """
    graph, src, lumped = _counting_graph(g, x, n_max, lump)
    return _count_on(graph, src, n_max, lumped=lumped, max_cells=max_cells)


def _closed_radius(g, n_max):
    # closed walks of length n stay within distance n/2 on non-oriented graphs
    return (n_max + 1) // 2 if not g.oriented else n_max


def closed_walk_counts(g, x, n_max: int, lump: bool | None = None) -> list:
    """``[gamma^n_{x,x} for n <= n_max]`` using the smallest ball that suffices."""
    radius = _closed_radius(g, n_max) if isinstance(g, GraphFamily) else n_max
    graph, src, _ = _counting_graph(g, x, radius, lump)
    prop = _Propagator(graph, n_max)
    i = graph.index[src]
    v = prop.unit(i)
    out = [prop.scalar(v[i])]
    for _ in range(n_max):
        v = prop.step(v)
        out.append(prop.scalar(v[i]))
    return out


def first_passage(g, x, y, n_max: int, lump: bool | None = None) -> list:
    """First-passage counts ``[phi^n_{x,y} for n <= n_max]`` with ``phi^0 = 0``.

    ``phi^n_{x,y}`` counts walks ``x = x_0, ..., x_n = y`` with ``x_i != y``
    for ``0 < i < n``.
    """
    if isinstance(g, GraphFamily) and g.finite is None:
        radius = _closed_radius(g, n_max) if x == y else n_max
        if y != x and lump:
            raise ConfigError("lumped first passage is only defined for y == x == root")
        if y == x and _use_types(g, x, lump):
            tg = type_graph(g, radius)
            graph, src, tgt = tg.graph, tg.center, tg.center
        else:
            graph = materialize(g, x, radius).graph
            src, tgt = x, y
            g.neighbors(y)  # validate
            if tgt not in graph.index:
                return [0] * (n_max + 1)
    else:
        graph = g.finite if isinstance(g, GraphFamily) else g
        graph._check(x)
        graph._check(y)
        src, tgt = x, y
    if n_is_bad(n_max):
        raise DomainError(f"horizon must be >= 0, got {n_max}")
    prop = _Propagator(graph, n_max)
    j = graph.index[tgt]
    v = prop.unit(graph.index[src])
    out = [0]
    for _ in range(n_max):
        v = prop.step(v)
        out.append(prop.scalar(v[j]))
        v[j] = 0
    return out


@dataclass(frozen=True)
class PeriodEstimate:
    """gcd of observed closed-walk lengths up to ``horizon``.

    The true period divides ``d``; the estimate can only shrink as the
    horizon grows.  ``d is None`` means no closed walk was seen.
    """

    d: int | None
    horizon: int
    lengths_seen: tuple

    @property
    def conclusive(self) -> bool:
        return self.d is not None


def period(g, x, n_max: int) -> PeriodEstimate:
    counts = closed_walk_counts(g, x, n_max)
    lengths = tuple(n for n in range(1, n_max + 1) if counts[n] > 0)
    d = 0
    for n in lengths:
        d = math.gcd(d, n)
    return PeriodEstimate(d=d or None, horizon=n_max, lengths_seen=lengths[:8])
