from fractions import Fraction

import pytest

from brw.errors import ConfigError
from brw.families import (
    FAMILY_NAMES,
    bridge,
    make_family,
    pendant_tree3,
    radial_composite,
    radial_tree,
    srw,
)
from brw.graph_core import materialize, path_counts
from brw.quotient import verify_local_isomorphism


def test_make_family_examples():
    g = make_family({"family": "loops", "k": 3})
    assert g.neighbors("o") == (("o", 3),)
    assert g.known_quotient.matrix == [[3]]
    g = make_family({"family": "pendant_tree3"})
    assert g.known_quotient.matrix == [[3, 1], [1, 0]]
    g = make_family({"family": "radial_tree", "period": [2, 1]})
    b = materialize(g, g.root, 6)
    for v in b.interior():
        if v:
            deg = sum(w for _, w in g.neighbors(v))
            assert deg == (3 if len(v) % 2 == 0 else 2)


def test_make_family_errors():
    with pytest.raises(ConfigError):
        make_family({"family": "moebius"})
    with pytest.raises(ConfigError):
        make_family({"family": "loops", "k": 0})
    with pytest.raises(ConfigError):
        make_family({"family": "loops", "dim": 2})
    with pytest.raises(ConfigError):
        make_family({"family": "radial_tree", "period": []})
    with pytest.raises(ConfigError):
        make_family({"k": 3})


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_every_family_builds_and_is_symmetric(name):
    g = make_family({"family": name})
    b = materialize(g, g.root, 3)
    assert b.graph.max_degree <= (g.max_degree or b.graph.max_degree)
    if not g.oriented:
        for x in b.interior():
            for y, w in g.neighbors(x):
                assert dict(g.neighbors(y))[x] == w


@pytest.mark.parametrize(
    "fam",
    [pendant_tree3(), pendant_tree3("tree"), bridge(3), bridge(4), radial_composite((2, 1, 1)),
     radial_composite((3, 2))],
    ids=["pendant-square", "pendant-tree", "bridge3", "bridge4", "radial-211", "radial-32"],
)
def test_known_quotients_verify(fam):
    rep = verify_local_isomorphism(fam, fam.known_quotient, 6)
    assert rep.passed, rep.violation


def test_radial_composite_quotient_is_cyclic():
    g = radial_composite((2, 1, 1))
    assert g.known_quotient.matrix == [[0, 2, 1], [1, 0, 1], [1, 1, 0]]


def test_srw_rows_are_exact_probabilities():
    p = srw(pendant_tree3())
    for x in materialize(pendant_tree3(), (0, 0), 3).interior():
        row = p.neighbors(x)
        assert sum(w for _, w in row) == 1
        assert all(isinstance(w, (Fraction, int)) for _, w in row)
    t = path_counts(p, p.root, 6)
    assert all(v == 1 for v in t.totals)


def test_radial_tree_types_are_levels():
    g = radial_tree((2, 1))
    lumped = path_counts(g, g.root, 12)
    plain = path_counts(g, g.root, 12, lump=False)
    assert lumped.totals == plain.totals
