"""Generators for the infinite (and small finite) graphs used throughout.

Every family uses tuple-of-int vertex encodings, except ``loops`` whose only
vertex is ``"o"``.  Families that are locally isomorphic to a finite
multigraph by construction carry that map as ``known_quotient``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Mapping

from .errors import ConfigError
from .graph_core import GraphFamily, WeightedMultigraph
from .quotient import QuotientMap


def _single_vertex(k) -> WeightedMultigraph:
    return WeightedMultigraph(["o"], {("o", "o"): k})


def _const_quotient(k) -> QuotientMap:
    return QuotientMap(codomain=_single_vertex(k), assignment=lambda x: "o")


def _int_tuple(v) -> bool:
    return isinstance(v, tuple) and all(type(c) is int for c in v)


def loops(k: int = 3) -> GraphFamily:
    """One vertex ``o`` carrying ``k`` loops."""
    _positive_int("k", k)
    return GraphFamily(
        name="loops",
        params={"k": k},
        neighbor_oracle=lambda x: [("o", k)],
        root="o",
        is_vertex=lambda v: v == "o",
        known_quotient=QuotientMap(codomain=_single_vertex(k), assignment=lambda x: "o"),
        vertex_type=lambda v: 0,
        max_degree=k,
        uniformity="quotient",
        finite=_single_vertex(k),
    )


def regular_tree(k: int = 3) -> GraphFamily:
    """Homogeneous tree of degree ``k``; vertices are child-index paths from ``()``."""
    _positive_int("k", k)
    if k < 2:
        raise ConfigError("regular_tree needs k >= 2")

    def is_vertex(v):
        return _int_tuple(v) and (not v or 0 <= v[0] < k) and all(0 <= c < k - 1 for c in v[1:])

    def oracle(v):
        out = [] if not v else [(v[:-1], 1)]
        width = k if not v else k - 1
        out.extend((v + (j,), 1) for j in range(width))
        return out

    return GraphFamily(
        name="regular_tree",
        params={"k": k},
        neighbor_oracle=oracle,
        root=(),
        is_vertex=is_vertex,
        known_quotient=_const_quotient(k),
        vertex_type=len,
        max_degree=k,
        uniformity="quotient",
    )


def lattice(dim: int = 1) -> GraphFamily:
    """The integer lattice ``Z^dim`` with nearest-neighbour edges."""
    _positive_int("dim", dim)

    def oracle(v):
        out = []
        for i in range(dim):
            for s in (-1, 1):
                out.append((v[:i] + (v[i] + s,) + v[i + 1:], 1))
        return out

    return GraphFamily(
        name="lattice",
        params={"dim": dim},
        neighbor_oracle=oracle,
        root=(0,) * dim,
        is_vertex=lambda v: _int_tuple(v) and len(v) == dim,
        known_quotient=_const_quotient(2 * dim),
        # orbits of the signed-permutation group fixing the origin
        vertex_type=lambda v: tuple(sorted(abs(c) for c in v)),
        max_degree=2 * dim,
        uniformity="quotient",
    )


def cycle(n: int = 4) -> GraphFamily:
    """Finite cycle ``C_n`` on ``(0,) .. (n-1,)``; ``n`` of 1 or 2 gives a loop / double edge."""
    _positive_int("n", n)
    g = WeightedMultigraph.from_edges(
        [(i,) for i in range(n)], [((i,), ((i + 1) % n,), 1) for i in range(n)]
    )
    return GraphFamily(
        name="cycle",
        params={"n": n},
        neighbor_oracle=g.neighbors,
        root=(0,),
        is_vertex=lambda v: v in g.index,
        known_quotient=_const_quotient(2),
        max_degree=2,
        uniformity="quotient",
        finite=g,
    )


def pendant_tree3(base: str = "square") -> GraphFamily:
    """3-regular graph with one pendant edge attached at every vertex.

    ``base="square"``: a 4-cycle with a binary branch hanging from each
    corner (3-regular but not quasi-transitive).  ``base="tree"``: the
    3-regular tree.  Vertex ``(0, ...)`` is a base vertex, ``(1, ...)`` the
    pendant attached to it.  Quotient: base class then pendant class,
    matrix ``[[3, 1], [1, 0]]``.
    """
    if base == "square":
        def base_ok(b):
            return (
                len(b) >= 1 and 0 <= b[0] < 4
                and (len(b) == 1 or (b[1] == 0 and all(c in (0, 1) for c in b[2:])))
            )

        def base_nbrs(b):
            i, p = b[0], b[1:]
            if not p:
                return [((i + 1) % 4,), ((i - 1) % 4,), (i, 0)]
            return [b[:-1], b + (0,), b + (1,)]

        root = (0, 0)

        def vtype(v):
            return (v[0], min(v[1], 4 - v[1]), len(v) - 2)
    elif base == "tree":
        def base_ok(b):
            return (not b or 0 <= b[0] < 3) and all(c in (0, 1) for c in b[1:])

        def base_nbrs(b):
            out = [] if not b else [b[:-1]]
            out.extend(b + (j,) for j in range(3 if not b else 2))
            return out

        root = (0,)

        def vtype(v):
            return (v[0], len(v) - 1)
    else:
        raise ConfigError(f"pendant_tree3 base must be 'square' or 'tree', got {base!r}")

    def is_vertex(v):
        return _int_tuple(v) and len(v) >= 1 and v[0] in (0, 1) and base_ok(v[1:])

    def oracle(v):
        b = v[1:]
        if v[0] == 1:
            return [((0,) + b, 1)]
        return [((0,) + nb, 1) for nb in base_nbrs(b)] + [((1,) + b, 1)]

    y = WeightedMultigraph.from_matrix([[3, 1], [1, 0]], vertices=["base", "pendant"])
    q = QuotientMap(codomain=y, assignment=lambda v: "base" if v[0] == 0 else "pendant")
    return GraphFamily(
        name="pendant_tree3",
        params={"base": base},
        neighbor_oracle=oracle,
        root=root,
        is_vertex=is_vertex,
        known_quotient=q,
        vertex_type=vtype,
        max_degree=4,
        uniformity="quotient",
    )


def bridge(k: int = 3) -> GraphFamily:
    """k-regular tree whose vertices are paired, each pair joined by a 2-edge bridge.

    The pairing is a perfect matching of tree edges: the root is matched to
    its child 0, and a vertex is matched to its parent iff it is child 0 of a
    vertex matched downwards.  The bridge midpoint of the pair
    ``(v, v+(0,))`` is ``(1,) + v``; tree vertices are ``(0,) + path``.
    Quotient: tree class then bridge class, ``[[k, 1], [2, 0]]``.
    """
    _positive_int("k", k)
    if k < 2:
        raise ConfigError("bridge needs k >= 2")

    def matched_down(p) -> bool:
        down = True
        for j in p:
            down = not (down and j == 0)
        return down

    def tree_ok(p):
        return (not p or 0 <= p[0] < k) and all(0 <= c < k - 1 for c in p[1:])

    def is_vertex(v):
        if not (_int_tuple(v) and len(v) >= 1 and v[0] in (0, 1) and tree_ok(v[1:])):
            return False
        return v[0] == 0 or matched_down(v[1:])

    def oracle(v):
        p = v[1:]
        if v[0] == 1:
            return [((0,) + p, 1), ((0,) + p + (0,), 1)]
        out = [] if not p else [((0,) + p[:-1], 1)]
        out.extend(((0,) + p + (j,), 1) for j in range(k if not p else k - 1))
        out.append(((1,) + p, 1) if matched_down(p) else ((1,) + p[:-1], 1))
        return out

    y = WeightedMultigraph.from_matrix([[k, 1], [2, 0]], vertices=["tree", "bridge"])
    q = QuotientMap(codomain=y, assignment=lambda v: "tree" if v[0] == 0 else "bridge")
    return GraphFamily(
        name="bridge",
        params={"k": k},
        neighbor_oracle=oracle,
        root=(0,),
        is_vertex=is_vertex,
        known_quotient=q,
        max_degree=k + 1,
        uniformity="quotient",
    )


def _check_period(period):
    if not period or any(type(n) is not int or n < 1 for n in period):
        raise ConfigError(f"period must be a nonempty sequence of positive integers, got {period!r}")
    return tuple(period)


def radial_tree(period=(2, 1)) -> GraphFamily:
    """Rooted tree where a vertex at distance ``L`` from the root has degree ``n_{L mod d} + 1``.

    Non-root vertices at level ``L`` have ``n_{L mod d}`` children; the root
    has ``n_0 + 1``.  No finite quotient is attached; M_w being attained
    uniformly is certified by the periodic radial structure.
    """
    period = _check_period(period)
    d = len(period)

    def width(p):
        return period[0] + 1 if not p else period[len(p) % d]

    def is_vertex(v):
        if not _int_tuple(v):
            return False
        return all(0 <= c < width(v[:i]) for i, c in enumerate(v))

    def oracle(v):
        out = [] if not v else [(v[:-1], 1)]
        out.extend((v + (j,), 1) for j in range(width(v)))
        return out

    return GraphFamily(
        name="radial_tree",
        params={"period": list(period)},
        neighbor_oracle=oracle,
        root=(),
        is_vertex=is_vertex,
        vertex_type=len,
        max_degree=max(period) + 1,
        uniformity="radial_periodic",
    )


def radial_composite(period=(2, 1, 1)) -> GraphFamily:
    """Cycle ``c_0..c_{d-1}`` with ``n_i - 1`` radial trees hanging from ``c_i``.

    A tree vertex ``L`` steps below ``c_i`` has class ``(i + L) mod d`` and
    ``n_class`` children, so the class map is a local isomorphism onto the
    cyclic multigraph with ``n_c`` forward arcs and one backward arc per class.
    """
    period = _check_period(period)
    d = len(period)

    def cls(v):
        return (v[0] + len(v) - 1) % d

    def width(v):
        return period[v[0]] - 1 if len(v) == 1 else period[cls(v)]

    def is_vertex(v):
        if not (_int_tuple(v) and len(v) >= 1 and 0 <= v[0] < d):
            return False
        return all(0 <= v[i] < width(v[:i]) for i in range(1, len(v)))

    def oracle(v):
        out = []
        if len(v) == 1:
            i = v[0]
            out.append((((i + 1) % d,), 1))
            out.append((((i - 1) % d,), 1))
        else:
            out.append((v[:-1], 1))
        out.extend((v + (j,), 1) for j in range(width(v)))
        return out

    acc: dict = {}
    for c in range(d):
        acc[(c, (c + 1) % d)] = acc.get((c, (c + 1) % d), 0) + period[c]
        acc[((c + 1) % d, c)] = acc.get(((c + 1) % d, c), 0) + 1
    y = WeightedMultigraph(list(range(d)), acc, oriented=True)
    return GraphFamily(
        name="radial_composite",
        params={"period": list(period)},
        neighbor_oracle=oracle,
        root=(0,),
        is_vertex=is_vertex,
        known_quotient=QuotientMap(codomain=y, assignment=cls),
        max_degree=max(period) + 1,
        uniformity="quotient",
    )


def srw(g):
    """Simple random walk kernel ``p(x, y) = n_xy / deg(x)`` with exact weights."""
    if isinstance(g, WeightedMultigraph):
        w = {(x, y): Fraction(v) / Fraction(g.degree(x)) for (x, y), v in g.weights.items()}
        return WeightedMultigraph(g.vertices, w, oriented=g.oriented or not _row_regular(g))

    def oracle(x):
        row = g.neighbors(x)
        deg = sum((Fraction(w) for _, w in row), Fraction(0))
        return [(y, Fraction(w) / deg) for y, w in row]

    q = g.known_quotient
    if q is not None:
        q = QuotientMap(codomain=srw(q.codomain), assignment=q.assignment)
    return GraphFamily(
        name=f"srw({g.name})",
        params=dict(g.params),
        neighbor_oracle=oracle,
        root=g.root,
        oriented=True,
        is_vertex=g.is_vertex,
        known_quotient=q,
        vertex_type=g.vertex_type,
        max_degree=1,
        uniformity=g.uniformity,
        finite=srw(g.finite) if g.finite is not None else None,
    )


def _row_regular(g):
    return len(set(g.degrees)) == 1


def _positive_int(name, v):
    if type(v) is not int or v < 1:
        raise ConfigError(f"{name} must be a positive integer, got {v!r}")


_BUILDERS = {
    "loops": (loops, {"k"}),
    "regular_tree": (regular_tree, {"k"}),
    "tree": (regular_tree, {"k"}),
    "lattice": (lattice, {"dim"}),
    "Z": (lambda: lattice(1), set()),
    "line": (lambda: lattice(1), set()),
    "cycle": (cycle, {"n"}),
    "pendant_tree3": (pendant_tree3, {"base"}),
    "bridge": (bridge, {"k"}),
    "radial_tree": (radial_tree, {"period"}),
    "radial_composite": (radial_composite, {"period"}),
}

FAMILY_NAMES = tuple(sorted(_BUILDERS))


def make_family(spec: Mapping[str, Any]) -> GraphFamily:
    """Build a family from ``{"family": name, **params}``."""
    if not isinstance(spec, Mapping) or "family" not in spec:
        raise ConfigError("family spec must be a mapping with a 'family' key")
    name = spec["family"]
    try:
        builder, allowed = _BUILDERS[name]
    except (KeyError, TypeError):
        raise ConfigError(f"unknown family {name!r}; known: {', '.join(FAMILY_NAMES)}") from None
    params = {k: v for k, v in spec.items() if k != "family"}
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"family {name} does not take parameter(s) {sorted(extra)}")
    if "period" in params and isinstance(params["period"], list):
        params["period"] = tuple(params["period"])
    return builder(**params)
