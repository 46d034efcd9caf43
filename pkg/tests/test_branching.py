import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brw.branching import (
    OffspringLaw,
    extinction_by_generation,
    powerhouse_bound,
    simulate_gw,
    smallest_fixed_point,
)
from brw.errors import DomainError

SUPER = OffspringLaw([0.25, 0, 0.75])


def test_fixed_point_examples():
    assert abs(smallest_fixed_point(SUPER).delta - 1 / 3) <= 1e-12
    assert smallest_fixed_point(OffspringLaw([0.75, 0, 0.25])).delta == 1.0
    assert smallest_fixed_point(OffspringLaw([0, 1])).delta == 0.0


def test_near_critical_flag():
    fp = smallest_fixed_point(OffspringLaw([0.5, 0, 0.5]))
    assert fp.delta == 1.0 and fp.near_critical


def test_callable_law():
    # geometric offspring law with pgf p / (1 - q s), p = 1/3: delta = p / q = 1/2
    p, q = 1 / 3, 2 / 3
    law = OffspringLaw(pgf=lambda s: p / (1 - q * s), dpgf=lambda s: p * q / (1 - q * s) ** 2)
    assert abs(smallest_fixed_point(law).delta - 0.5) < 1e-10
    assert law.mean == pytest.approx(2.0)


def test_invalid_laws():
    for bad in ([0.5, 0.6], [-0.1, 1.1], [], [float("nan"), 1]):
        with pytest.raises(DomainError):
            OffspringLaw(bad)
    with pytest.raises(DomainError):
        OffspringLaw.parse("a,b")
    with pytest.raises(DomainError):
        OffspringLaw(pgf=lambda s: s)


def test_parse():
    assert OffspringLaw.parse("0.25,0,0.75").coeffs.tolist() == [0.25, 0.0, 0.75]


def test_iterates_increase_to_delta():
    q = extinction_by_generation(SUPER, 60)
    assert q[0] == 0 and all(a <= b for a, b in zip(q, q[1:]))
    assert abs(q[-1] - 1 / 3) < 1e-10


def test_powerhouse_examples():
    b = powerhouse_bound([SUPER])
    assert abs(b.delta_max - 1 / 3) < 1e-12 and b.holds
    half = OffspringLaw([0.5, 0, 0, 0.5])  # G(s) = 1/2 + s^3/2 has smallest root (sqrt(5)-1)/2
    half_delta = smallest_fixed_point(half).delta
    b = powerhouse_bound([SUPER, half])
    assert b.delta_max == pytest.approx(half_delta) and b.holds
    assert len(b.certificate) == 2
    line = OffspringLaw([0, 1])
    b = powerhouse_bound([line, SUPER])
    assert b.delta_max == pytest.approx(1 / 3) and b.holds
    b = powerhouse_bound([SUPER, OffspringLaw([0.75, 0, 0.25])])
    assert b.delta_max is None and not b.holds and b.reason


def test_powerhouse_two_laws_with_one_third_and_one_half():
    # G_2(s) = 1/3 + 2 s^2 / 3 has delta = 1/2
    g2 = OffspringLaw([1 / 3, 0, 2 / 3])
    assert smallest_fixed_point(g2).delta == pytest.approx(0.5)
    b = powerhouse_bound([SUPER, g2])
    assert b.delta_max == pytest.approx(0.5)
    assert SUPER(0.5) == pytest.approx(0.4375)
    assert b.holds


def test_simulate_gw_examples():
    freq = simulate_gw(SUPER, 50, 20_000, seed=1)
    assert abs(freq[-1] - 1 / 3) < 4 * math.sqrt((1 / 3) * (2 / 3) / 20_000)
    assert simulate_gw(OffspringLaw([0.75, 0, 0.25]), 60, 2000, seed=2)[-1] > 0.99
    assert simulate_gw(OffspringLaw([0, 1]), 30, 100, seed=3).tolist() == [0.0] * 31


def test_simulate_gw_tracks_generation_probabilities():
    freq = simulate_gw(SUPER, 8, 20_000, seed=5)
    q = extinction_by_generation(SUPER, 8)
    se = np.sqrt(np.array(q) * (1 - np.array(q)) / 20_000) + 1e-12
    assert (np.abs(freq - q) <= 4 * se + 1e-9).all()


def test_simulate_gw_is_reproducible_and_block_independent():
    a = simulate_gw(SUPER, 20, 3000, seed=7)
    b = simulate_gw(SUPER, 20, 3000, seed=7)
    assert (a == b).all()


@given(st.lists(st.floats(0, 1), min_size=2, max_size=6).filter(lambda c: sum(c) > 0.1))
def test_fixed_point_is_minimal(raw):
    c = np.array(raw) / sum(raw)
    law = OffspringLaw(c.tolist())
    delta = smallest_fixed_point(law).delta
    for s in np.linspace(0, 1, 201):
        if law(float(s)) <= s - 1e-12:
            assert delta <= s + 1e-9
    assert abs(law(delta) - delta) < 1e-9 or delta == 1.0
