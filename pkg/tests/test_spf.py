import math
import time

import pytest
from hypothesis import given, strategies as st

from evacnav.spf import (
    ForceVector,
    SpfParams,
    equilibrium_distance,
    pairwise_force,
    resultant_force,
    spf_next_node,
)

from conftest import make_graph


def test_unit_distance_is_exact():
    assert pairwise_force(1.0) == -5.0


def test_near_equilibrium_at_seven_metres():
    f = pairwise_force(7.0)
    assert abs(f) < 0.01
    assert f == pytest.approx(-0.00025, abs=5e-5)


def test_edge_of_influence():
    assert pairwise_force(20.0) == pytest.approx(0.196, abs=1e-3)
    assert pairwise_force(25.0) == 0.0


def test_root_close_to_seven():
    r = equilibrium_distance()
    assert abs(r - 7.0) < 0.01
    # closed form of -c1 r^-s1 + c2 r^-s2 = 0
    p = SpfParams()
    assert r == pytest.approx((p.c1 / p.c2) ** (1 / (p.sigma1 - p.sigma2)), rel=1e-9)


def test_sign_structure_on_grid():
    t0 = time.perf_counter()
    r = equilibrium_distance()
    for k in range(1, 201):
        x = k / 10
        f = pairwise_force(x)
        if x < r - 0.01:
            assert f < 0
        elif x > r + 0.01:
            assert f > 0
    assert time.perf_counter() - t0 < 1.0


def test_non_positive_distance_rejected():
    with pytest.raises(ValueError):
        pairwise_force(0.0)


def test_resultant_examples():
    assert resultant_force((0, 0), []) == ForceVector(0.0, 0.0)
    f = resultant_force((0, 0), [(1, 0)])
    assert f.fx == pytest.approx(-5.0) and f.fy == pytest.approx(0.0)
    f = resultant_force((0, 0), [(10, 0), (-10, 0)])
    assert f.fx == pytest.approx(0.0, abs=1e-12) and f.fy == pytest.approx(0.0, abs=1e-12)


def test_coincident_other_is_perturbed_along_x():
    f = resultant_force((2.0, 3.0), [(2.0, 3.0)])
    assert f.fx == pytest.approx(pairwise_force(0.01))
    assert f.fy == 0.0


def test_far_other_ignored():
    assert resultant_force((0, 0), [(30, 0)]) == ForceVector(0.0, 0.0)


pts = st.tuples(st.floats(-30, 30), st.floats(-30, 30))


@given(pts, pts)
def test_reciprocity(a, b):
    if math.dist(a, b) < 1e-3:
        return
    fa = resultant_force(a, [b])
    fb = resultant_force(b, [a])
    assert fa.fx == pytest.approx(-fb.fx, rel=1e-9, abs=1e-12)
    assert fa.fy == pytest.approx(-fb.fy, rel=1e-9, abs=1e-12)


@given(pts, st.lists(pts, max_size=6), st.randoms())
def test_permutation_invariance(me, others, rnd):
    shuffled = list(others)
    rnd.shuffle(shuffled)
    f1, f2 = resultant_force(me, others), resultant_force(me, shuffled)
    assert f1.fx == pytest.approx(f2.fx, rel=1e-9, abs=1e-9)
    assert f1.fy == pytest.approx(f2.fy, rel=1e-9, abs=1e-9)


@given(st.floats(0.01, 20))
def test_sign_property(r):
    root = equilibrium_distance()
    if r < root - 0.01:
        assert pairwise_force(r) < 0
    elif r > root + 0.01:
        assert pairwise_force(r) > 0


def _star():
    # 0 centre; 1 east, 2 north, 3 west, 4 on the floor above
    return make_graph(
        [
            (0, 0, 0, 0, "exit"),
            (1, 5, 0, 0, "landmark"),
            (2, 0, 5, 0, "landmark"),
            (3, -5, 0, 0, "landmark"),
            (4, 5, 0, 1, "landmark"),
        ],
        [(0, 1), (0, 2), (0, 3), (0, 4)],
    )


def test_next_node_follows_force():
    g = _star()
    assert spf_next_node(g, 0, ForceVector(1.0, 0.0)) == 1
    assert spf_next_node(g, 0, ForceVector(0.0, 0.0)) is None
    assert spf_next_node(g, 0, ForceVector(-1.0, 0.1)) == 3


def test_next_node_tie_goes_to_smaller_id():
    g = _star()
    assert spf_next_node(g, 0, ForceVector(1.0, 1.0)) == 1


def test_next_node_filter_and_other_floor():
    g = _star()
    assert spf_next_node(g, 0, ForceVector(1.0, 0.0), allowed=lambda v: v != 1) == 2
    lone = make_graph([(0, 0, 0, 0, "exit"), (1, 0, 0, 1, "landmark")], [(0, 1)])
    assert spf_next_node(lone, 0, ForceVector(1.0, 0.0)) is None


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.01, 100))
def test_next_node_scale_invariant(fx, fy, k):
    g = _star()
    if math.hypot(fx, fy) < 1e-3:
        return
    assert spf_next_node(g, 0, ForceVector(fx, fy)) == spf_next_node(g, 0, ForceVector(k * fx, k * fy))


def test_param_validation():
    with pytest.raises(ValueError):
        SpfParams(c1=0.0)
