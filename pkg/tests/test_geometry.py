import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from dirbc.geometry import (
    CausalRelation,
    LayoutError,
    ProtocolLayout,
    SpacetimePoint,
    boost_x,
    causal_relation,
    earliest_joint_reception,
    in_causal_future,
    interval_squared,
    validate_layout,
)

coord = st.floats(-50, 50, allow_nan=False)
points = st.builds(SpacetimePoint, coord, coord, coord, coord)
O = SpacetimePoint(0, 0, 0, 0)


def test_interval_examples():
    assert interval_squared(O, O) == 0
    assert interval_squared(O, SpacetimePoint(1, 0, 0, 1)) == 0
    assert interval_squared(O, SpacetimePoint(2, 0, 0, 1)) == -3


def test_relation_examples():
    assert causal_relation(O, O) is CausalRelation.COINCIDENT
    assert causal_relation(O, SpacetimePoint(3, 0, 0, 1)) is CausalRelation.SPACELIKE
    assert causal_relation(O, SpacetimePoint(0, 0, 0, 2)) is CausalRelation.TIMELIKE_FUTURE
    assert causal_relation(O, SpacetimePoint(0, 1, 0, 1)) is CausalRelation.LIGHTLIKE_FUTURE
    assert causal_relation(O, SpacetimePoint(0, 1, 0, -1 - 1e-12)) is CausalRelation.LIGHTLIKE_PAST


def test_non_finite_coordinates_rejected():
    with pytest.raises(ValueError):
        SpacetimePoint(0, 0, math.nan, 0)


@given(points, points)
def test_relation_antisymmetric(p, q):
    assert causal_relation(q, p) is causal_relation(p, q).inverse()


@given(points, points, st.floats(-0.95, 0.95))
def test_interval_boost_invariant(p, q, v):
    a, b = interval_squared(p, q), interval_squared(boost_x(p, v), boost_x(q, v))
    scale = max(1.0, abs(p.t - q.t) ** 2 + p.spatial_distance(q) ** 2)
    assert abs(a - b) <= 1e-9 * scale


def test_symmetric_layout_valid():
    layout = ProtocolLayout.symmetric(d=2.0, t_unveil=0.3)
    assert validate_layout(layout) == []
    p, (q0, q1) = layout.commit_point, layout.unveil_points
    for a, b in ((p, q0), (p, q1), (q0, q1)):
        assert causal_relation(a, b) is CausalRelation.SPACELIKE


def test_layout_violations():
    bad = ProtocolLayout(O, (O, SpacetimePoint(1, 0, 0, 0.5)))
    assert any("not spacelike" in m for m in validate_layout(bad))
    past = ProtocolLayout(O, (SpacetimePoint(-1, 0, 0, -0.2), SpacetimePoint(1, 0, 0, 0.5)))
    assert any("FFPD" in m for m in validate_layout(past))


@given(st.floats(0.1, 10), st.floats(0.01, 0.99))
def test_valid_layout_implies_spacelike(d, frac):
    layout = ProtocolLayout.symmetric(d, frac * d)
    assert validate_layout(layout) == []
    assert causal_relation(layout.commit_point, layout.unveil_points[0]) is CausalRelation.SPACELIKE


def _reception_oracle(p, q):
    """Minimize max(arrival from P, arrival from Q) over the segment numerically."""
    dist = p.spatial_distance(q)

    def arrival(s):
        return max(p.t + s * dist, q.t + (1 - s) * dist)

    res = minimize_scalar(arrival, bounds=(0, 1), method="bounded", options={"xatol": 1e-12})
    return res.x, res.fun


def test_earliest_reception_example():
    layout = ProtocolLayout(O, (SpacetimePoint(1, 0, 0, 0.5), SpacetimePoint(-1, 0, 0, 0.5)))
    pt = earliest_joint_reception(layout, 0)
    assert pt.x == pytest.approx(0.75) and pt.t == pytest.approx(0.75)
    s, t = _reception_oracle(layout.commit_point, layout.unveil_points[0])
    assert pt.t == pytest.approx(t, abs=1e-9)
    assert pt.x == pytest.approx(s, abs=1e-6)


@given(st.floats(0.2, 5), st.floats(0.01, 0.99), st.floats(-3, 3), st.floats(-3, 3))
def test_earliest_reception_matches_oracle(d, frac, y, z):
    q0 = SpacetimePoint(-d, y, z, frac * math.hypot(d, y, z))
    q1 = SpacetimePoint(d, 0, 0, 0.1 * d)
    layout = ProtocolLayout(O, (q0, q1))
    pt = earliest_joint_reception(layout, 0)
    _, t = _reception_oracle(O, q0)
    assert pt.t == pytest.approx(t, abs=1e-6)
    assert in_causal_future(O, pt) and in_causal_future(q0, pt)


def test_earliest_reception_degenerate_and_symmetric():
    layout = ProtocolLayout(O, (SpacetimePoint(-1, 0, 0, 1.0), SpacetimePoint(1, 0, 0, 0.5)))
    # Q0 lightlike to P: the reception point is Q0 itself
    assert earliest_joint_reception(layout, 0, check=False) == layout.unveil_points[0]
    sym = ProtocolLayout.symmetric()
    a, b = earliest_joint_reception(sym, 0), earliest_joint_reception(sym, 1)
    assert a.x == -b.x and a.t == b.t
    with pytest.raises(LayoutError):
        earliest_joint_reception(layout, 0)


def test_layout_dict_round_trip_and_errors():
    layout = ProtocolLayout.symmetric(1.5, 0.25)
    assert ProtocolLayout.from_dict(layout.to_dict()) == layout
    with pytest.raises(LayoutError, match="Q1"):
        ProtocolLayout.from_dict({"P": [0, 0, 0, 0], "Q0": [1, 0, 0, 0.1]})
    with pytest.raises(LayoutError, match="layout.Q0"):
        ProtocolLayout.from_dict({"P": [0, 0, 0, 0], "Q0": [1, 0, 0], "Q1": [1, 0, 0, 0.1]})


def test_boost_rejects_superluminal():
    with pytest.raises(ValueError):
        boost_x(O, 1.0)
    assert np.isclose(boost_x(SpacetimePoint(1, 0, 0, 1), 0.6).t, 0.5)
