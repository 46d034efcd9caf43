import os
import random

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from brw.graph_core import WeightedMultigraph

settings.register_profile(
    "default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def _strongly_connected(m):
    k = len(m)
    for src in range(k):
        seen = {src}
        stack = [src]
        while stack:
            i = stack.pop()
            for j in range(k):
                if m[i][j] and j not in seen:
                    seen.add(j)
                    stack.append(j)
        if len(seen) != k:
            return False
    return True


def random_matrix(rng: random.Random, k: int, oriented: bool, max_w: int = 3, density: float = 0.45):
    """Integer matrix of a strongly connected multigraph (a spanning cycle is added)."""
    m = [[0] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            if (oriented or j >= i) and rng.random() < density:
                m[i][j] = rng.randint(1, max_w)
    order = list(range(k))
    rng.shuffle(order)
    for a, b in zip(order, order[1:] + order[:1]):
        if k > 1 and m[a][b] == 0:
            m[a][b] = rng.randint(1, max_w)
    if k == 1 and m[0][0] == 0:
        m[0][0] = rng.randint(1, max_w)
    if not oriented:
        for i in range(k):
            for j in range(i):
                m[i][j] = m[j][i] = max(m[i][j], m[j][i])
    assert _strongly_connected(m)
    return m


@st.composite
def multigraphs(draw, max_vertices=8, oriented=None, max_w=3):
    """Random strongly connected integer multigraph with at most ``max_vertices`` vertices."""
    k = draw(st.integers(1, max_vertices))
    orient = draw(st.booleans()) if oriented is None else oriented
    seed = draw(st.integers(0, 2**32 - 1))
    m = random_matrix(random.Random(seed), k, orient, max_w)
    return WeightedMultigraph.from_matrix(m, oriented=orient)


def brute_walks(g: WeightedMultigraph, x, n):
    """All weighted walks of length ``n`` from ``x`` by explicit enumeration.

    Returns ``{y: count}`` and the list of walks as vertex tuples (with multiplicity weight).
    """
    walks = {(x,): 1}
    for _ in range(n):
        nxt = {}
        for w, c in walks.items():
            for y, m in g.neighbors(w[-1]):
                nxt[w + (y,)] = c * m
        walks = nxt
    counts = {}
    for w, c in walks.items():
        counts[w[-1]] = counts.get(w[-1], 0) + c
    return counts, walks


def brute_first_passage(g, x, y, n):
    if n == 0:
        return 0
    _, walks = brute_walks(g, x, n)
    return sum(c for w, c in walks.items() if w[-1] == y and all(v != y for v in w[1:-1]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def enumerate_tree_walks(step, x, n):
    """Closed and total walk counts of a family oracle by enumeration (small n only)."""
    layer = {x: 1}
    closed, total = [1], [1]
    for _ in range(n):
        nxt = {}
        for v, c in layer.items():
            for y, w in step(v):
                nxt[y] = nxt.get(y, 0) + c * w
        layer = nxt
        closed.append(layer.get(x, 0))
        total.append(sum(layer.values()))
    return closed, total


__all__ = ["brute_walks", "brute_first_passage", "multigraphs", "random_matrix", "enumerate_tree_walks"]


# --- acceptance summary ----------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    number, title = mark.args
    if number in _CRITERIA and _CRITERIA[number][1] != "PASS":
        return
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        tr.write_line(f"criterion {number:2d}: {status}  {title}" + (f"  [{detail}]" if detail else ""))
