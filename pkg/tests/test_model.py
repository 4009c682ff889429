import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardcore.errors import InvalidArgument, InvalidConfiguration
from hardcore.geometry import Ball, regular_polygon, square
from hardcore.model import (STOPPED, Configuration, Grain, GrownGrain, covers_germ, first_contact_matrix,
                            first_contact_time, has_pair_ties, stop_time_against_frozen, stop_time_matrix)

B1 = Ball(1.0)


def g(i, x, t=0.0, shape=B1):
    return Grain(i, np.asarray(x, dtype=float), t, shape)


def test_first_contact_staggered_births():
    assert first_contact_time(g(0, [0, 0], 0.0), g(1, [10, 0], 3.0)) == pytest.approx(6.5, abs=1e-12)
    assert first_contact_time(g(1, [10, 0], 3.0), g(0, [0, 0], 0.0)) == pytest.approx(6.5, abs=1e-12)


def test_first_contact_cover_branch():
    u, v = g(0, [0, 0], 0.0), g(1, [2, 0], 5.0)
    assert first_contact_time(u, v) == pytest.approx(2.0)
    assert covers_germ(u, v) and covers_germ(v, u)
    assert not covers_germ(g(0, [0, 0]), g(1, [10, 0], 3.0))


def test_first_contact_equal_births():
    assert first_contact_time(g(0, [0, 0], 2.0), g(1, [8, 0], 2.0)) == pytest.approx(6.0)


def test_first_contact_errors():
    u = g(0, [0, 0])
    with pytest.raises(InvalidConfiguration):
        first_contact_time(u, u)
    with pytest.raises(InvalidConfiguration):
        first_contact_time(u, g(1, [0, 0]))


def test_stop_time_against_frozen():
    v = GrownGrain(g(9, [9, 0]), 5.0, STOPPED, 1)
    assert stop_time_against_frozen(g(0, [0, 0], 0.0), v) == pytest.approx(4.0)
    assert stop_time_against_frozen(g(0, [0, 0], 2.0), v) == pytest.approx(6.0)
    assert stop_time_against_frozen(g(0, [8, 0], 2.0), v) == pytest.approx(2.0)
    with pytest.raises(InvalidArgument):
        stop_time_against_frozen(g(0, [0, 0]), GrownGrain(g(9, [9, 0]), 0.0, "covered", 1))


def test_grain_validation():
    with pytest.raises(InvalidConfiguration):
        g(0, [0, 0], -1.0)
    with pytest.raises(InvalidConfiguration):
        g(0, [0, 0, 0])
    with pytest.raises(InvalidConfiguration):
        Configuration([g(0, [0, 0]), g(0, [1, 0])], [[0, 0], [1, 1]])
    with pytest.raises(InvalidConfiguration):
        Configuration([g(0, [0, 0]), g(1, [0, 0])], [[0, 0], [1, 1]])
    with pytest.raises(InvalidConfiguration):
        Configuration([], [[0, 0], [0, 1]])


def test_configuration_roundtrip():
    hexagon = regular_polygon(6, 1.0, 0.2)
    c = Configuration([g(0, [0, 0], 1.5, hexagon), g(1, [3, 1], 0.0, Ball(1.7))], [[0, 0], [5, 5]])
    back = Configuration.from_dict(c.to_dict())
    assert back.to_dict() == c.to_dict()
    assert back.grains[0].shape == hexagon


def _random_grains(rng, n, kind):
    shapes = {"ball": lambda: B1, "rball": lambda: Ball(float(rng.uniform(1, 2))), "square": lambda: square(1.0),
              "mixed": lambda: [B1, square(1.0), regular_polygon(5, 1.0, float(rng.uniform(0, 1)))][rng.integers(3)]}
    pos = rng.uniform(0, 10, (n, 2))
    births = rng.uniform(0, 5, n)
    return [g(k, pos[k], births[k], shapes[kind]()) for k in range(n)]


@pytest.mark.parametrize("kind", ["ball", "rball", "square", "mixed"])
def test_matrices_match_scalar(kind):
    rng = np.random.default_rng(4)
    grains = _random_grains(rng, 12, kind)
    d, cover = first_contact_matrix(grains)
    for i in range(12):
        for j in range(12):
            if i == j:
                assert d[i, j] == np.inf
                continue
            assert d[i, j] == pytest.approx(first_contact_time(grains[i], grains[j]), abs=1e-9)
            earlier = (grains[i].t, grains[i].id) < (grains[j].t, grains[j].id)
            assert cover[i, j] == (earlier and covers_germ(grains[i], grains[j]))
    frozen = grains[:4]
    radii = rng.uniform(0.1, 2, 4)
    f = stop_time_matrix(grains[4:], frozen, radii)
    for a, u in enumerate(grains[4:]):
        for b, v in enumerate(frozen):
            ref = stop_time_against_frozen(u, GrownGrain(v, radii[b], STOPPED, 0))
            assert f[a, b] == pytest.approx(ref, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(-30, 30), st.floats(-30, 30), st.floats(0, 20), st.floats(0, 20),
       st.sampled_from(["ball", "square"]))
def test_contact_time_symmetric_and_sandwiched(dx, dy, s, t, kind):
    shape = B1 if kind == "ball" else square(1.0)
    if dx == 0 and dy == 0:
        return
    u, v = g(0, [0, 0], s, shape), g(1, [dx, dy], t, shape)
    d = first_contact_time(u, v)
    assert d == pytest.approx(first_contact_time(v, u), abs=1e-12)
    # both grains alive by time d and each at most reaches the other germ
    assert d >= min(s, t) - 1e-12
    if s == t:
        c = shape.circumradius
        dist = float(np.hypot(dx, dy))
        assert dist / (2 * c) - 1e-9 <= d - s <= dist / 2 + 1e-9


def test_pair_ties():
    d = np.array([[np.inf, 1.0, 2.0], [1.0, np.inf, 1.0], [2.0, 1.0, np.inf]])
    assert has_pair_ties(d)
    d[1, 2] = d[2, 1] = 1.5
    assert not has_pair_ties(d)
