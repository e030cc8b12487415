import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from evacsim.geometry import Point, make_shape
from evacsim.trajectory import (
    FirstVisitProfile,
    Trajectory,
    TrajectoryError,
    format_trajectories,
    parse_trajectories,
)
from oracles import first_visit_scan, positions


def test_from_path_is_full_speed():
    tr = Trajectory.from_path([(0, 0), (1, 0), (1, 1)], start_time=0.5)
    assert tr.times == pytest.approx([0.5, 1.5, 2.5])
    assert tr.length == pytest.approx(2.0)
    assert tr.end == (1.0, 1.0)


def test_speed_bound_is_enforced():
    with pytest.raises(TrajectoryError, match="speed"):
        Trajectory(((Point(0, 0), 0.0), (Point(1, 0), 0.5)))
    with pytest.raises(TrajectoryError, match="decrease"):
        Trajectory(((Point(0, 0), 1.0), (Point(0, 0), 0.5)))
    with pytest.raises(TrajectoryError):
        Trajectory(())


def test_slack_means_waiting_at_segment_start():
    tr = Trajectory(((Point(0, 0), 0.0), (Point(1, 0), 3.0)))
    assert tr.position_at(1.5) == (0.0, 0.0)
    assert tr.position_at(2.5) == pytest.approx((0.5, 0.0))
    segs = tr.segments()
    assert len(segs) == 2 and segs[0][0] == segs[0][1]
    assert segs[1][2] == pytest.approx(2.0)


waypoint_lists = st.lists(
    st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.5)), min_size=2, max_size=6
)


def _build(raw):
    wps, t, prev = [], 0.0, None
    for x, y, slack in raw:
        p = Point(x, y)
        if prev is not None:
            t += math.dist(prev, p) + slack
        wps.append((p, t))
        prev = p
    return Trajectory(tuple(wps))


@given(raw=waypoint_lists, frac=st.floats(0, 1))
def test_position_matches_oracle(raw, frac):
    tr = _build(raw)
    t = tr.end_time * frac
    assert tr.position_at(t) == pytest.approx(tuple(positions(tr.waypoints, [t])[0]), abs=1e-12)


@given(raw=waypoint_lists)
def test_text_format_roundtrip(raw):
    tr = _build(raw)
    back = parse_trajectories(format_trajectories([tr], ["r"]))
    assert back["r"] == tr


def test_parse_rejects_bad_input():
    with pytest.raises(TrajectoryError, match="malformed"):
        parse_trajectories("a: (0,0)@0; (1,1)")
    with pytest.raises(TrajectoryError, match="speed"):
        parse_trajectories("a: (0,0)@0; (1,0)@0.5")
    with pytest.raises(TrajectoryError, match="duplicate"):
        parse_trajectories("a: (0,0)@0\na: (0,0)@0")
    with pytest.raises(TrajectoryError):
        parse_trajectories("(0,0)@0")


def test_parse_ignores_comments_and_blank_lines():
    robots = parse_trajectories("# two robots\n\nL: (0.5,0.5)@0; (0,0.5)@0.5  # left\nR: (0.5,0.5)@0\n")
    assert list(robots) == ["L", "R"]
    assert robots["L"].end == (0.0, 0.5)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0, 3, exclude_max=True))
def test_first_visit_matches_time_stepping(s):
    from cases import paper_protocol

    assume(abs(s - round(s)) > 1e-4)  # the scan cannot resolve exits beside a vertex
    proto = paper_protocol("tri-detour1")
    prof = FirstVisitProfile(proto.shape, proto.trajectories)
    X = proto.shape.boundary_point(s)
    got = prof.per_robot(s)[:, 0]
    for rid, tr in enumerate(proto.trajectories):
        want = first_visit_scan(tr.waypoints, X, dt=1e-5)
        if math.isinf(want):
            assert math.isinf(got[rid])
        else:
            assert got[rid] == pytest.approx(want, abs=3e-5)


def test_unvisited_boundary_is_infinite():
    S = make_shape("square")
    tr = Trajectory.from_path([S.centroid, (0.5, 0.0)])
    prof = FirstVisitProfile(S, [tr])
    assert math.isinf(prof.per_robot(2.5)[0, 0])
    assert prof.per_robot(0.5)[0, 0] == pytest.approx(0.5)


def test_mirrored():
    S = make_shape("triangle")
    tr = Trajectory.from_path([S.centroid, (0.2, 0.0)])
    m = tr.mirrored(S)
    assert m.end == pytest.approx((0.8, 0.0))
    assert np.allclose(m.times, tr.times)
