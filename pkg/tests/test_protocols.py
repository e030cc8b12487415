import json
import math

import jsonschema
import numpy as np
import pytest

from evacsim import load_schema
from evacsim.geometry import dist, make_shape
from evacsim.protocols import (
    ProtocolError,
    Rendezvous,
    build,
    build_early_meeting,
    build_equal_travel,
    build_square_detour,
    build_triangle_detour1,
    build_triangle_detour2,
    custom_protocol,
    equal_travel_partition,
    protocol_from_json,
    protocol_to_dict,
    protocol_to_json,
    symmetric_early_p1,
)
from evacsim.simulator import evac_times
from evacsim.trajectory import FirstVisitProfile, Trajectory
from oracles import path_length

SPEED_TOL = 1e-12


# -- invariants over every built protocol ---------------------------------------


def test_speed_bound(any_protocol):
    for tr in any_protocol.trajectories:
        for (p, tp), (q, tq) in zip(tr.waypoints, tr.waypoints[1:]):
            assert math.dist(p, q) <= tq - tp + SPEED_TOL


def test_start_at_centroid(any_protocol):
    O = any_protocol.shape.centroid
    for tr in any_protocol.trajectories:
        assert dist(tr.points[0], O) < 1e-15 and tr.start_time == 0.0


def test_coverage(any_protocol):
    """Every boundary point is visited by a schedule or lies in the common section."""
    proto = any_protocol
    s = np.linspace(0, proto.shape.perimeter, 30001, endpoint=False)
    t, _ = FirstVisitProfile(proto.shape, proto.trajectories)(s)
    lost = ~np.isfinite(t)
    cs = proto.common_section
    if cs is None:
        assert not lost.any()
    else:
        off = np.mod(s[lost] - cs.start, proto.shape.perimeter)
        assert np.all(off <= cs.end - cs.start + 1e-12)
    assert np.all(np.isfinite(evac_times(proto, s)))


def test_rendezvous_schedules_end_together(any_protocol):
    pol = any_protocol.policy
    if not isinstance(pol, Rendezvous):
        pytest.skip("intercept protocol")
    for tr in any_protocol.trajectories:
        assert dist(tr.end, pol.meeting_point) < 1e-12
        assert tr.end_time == pytest.approx(pol.meeting_time, abs=1e-9)


def test_json_roundtrip(any_protocol):
    text = protocol_to_json(any_protocol)
    jsonschema.validate(json.loads(text), load_schema("protocol"))
    back = protocol_from_json(text)
    assert back.trajectories == any_protocol.trajectories
    assert back.policy == any_protocol.policy
    assert back.common_section == any_protocol.common_section
    assert protocol_to_dict(back) == protocol_to_dict(any_protocol)


# -- triangle detours ------------------------------------------------------------


def test_detour1_constraints():
    z = 0.70745
    proto = build_triangle_detour1(z)
    sp = proto.spec
    S = proto.shape
    B = S.vertex("B")
    assert dist(S.vertex("C"), sp.q2) == pytest.approx(z, abs=1e-15)
    # the informed robot from B reaches r2 when the other does
    assert z + dist(sp.q2, sp.r2) == pytest.approx(dist(sp.r2, B), abs=1e-12)
    # the informed robot from q1 reaches p2 when the other does
    assert dist(sp.q2, sp.r2) + dist(sp.r2, sp.p2) == pytest.approx(dist(sp.p2, sp.q1), abs=1e-12)
    assert sp.r1 == pytest.approx(S.mirror(sp.r2))
    # the two robots' schedules mirror each other
    left, right = proto.trajectories
    assert left == right.mirrored(S)


def test_detour1_preconditions():
    for z in (0.5, 1.0, 0.2):
        with pytest.raises(ProtocolError):
            build_triangle_detour1(z)


def test_detour2_contains_detour1_prefix():
    p1 = build_triangle_detour1(0.666)
    p2 = build_triangle_detour2(0.666, 0.9023)
    n = len(p1.trajectories[1].waypoints) - 1  # detour1 continues to A; detour2 goes to q2b
    assert p2.trajectories[1].waypoints[:n] == p1.trajectories[1].waypoints[:n]
    sp = p2.spec
    assert sp.first.r2 == p1.spec.r2


def test_detour2_preconditions():
    for b1, b2 in ((0.9, 0.7), (0.4, 0.9), (0.7, 1.0)):
        with pytest.raises(ProtocolError):
            build_triangle_detour2(b1, b2)


# -- square detour ---------------------------------------------------------------


def test_square_detour_constraints():
    p, q = 0.1556, 0.501
    sp = build_square_detour(p, q).spec
    # |DA| + |AE| + |EG| = |CG|
    assert 1 + p + sp.eg == pytest.approx(sp.gc, abs=1e-12)
    # |CJ| + |JI| = |DA| + |AE| + |EG| + |GI|
    assert q + sp.ij == pytest.approx(1 + p + sp.eg + sp.gi, abs=1e-12)
    assert sp.ec == pytest.approx(math.sqrt(1 + (1 - p) ** 2), abs=1e-15)
    assert sp.detour_len == pytest.approx(sp.eg + sp.gi + sp.ei)


def test_square_detour_preconditions():
    for p, q in ((0.0, 0.5), (0.3, 0.5), (0.15, 0.0), (0.15, 0.999)):
        with pytest.raises(ProtocolError):
            build_square_detour(p, q)


# -- equal travel and early meeting ----------------------------------------------


@pytest.mark.parametrize("kind,k", [("triangle", k) for k in range(2, 9)] + [("square", 3)])
def test_equal_travel_lengths_are_equal(kind, k):
    proto = build_equal_travel(kind, k)
    lengths = [path_length(tr.points) for tr in proto.trajectories]
    assert max(lengths) - min(lengths) < 1e-10
    # the sections tile the whole perimeter
    r = proto.spec.r
    assert all(a < b for a, b in zip(r, r[1:]))


def test_equal_travel_partition_direct():
    S = make_shape("triangle")
    breaks, L = equal_travel_partition(S, S.centroid, 0.0, 3.0, 3)
    # by symmetry the three vertices split the perimeter
    assert breaks == pytest.approx([0.0, 1.0, 2.0, 3.0], abs=1e-12)
    assert L == pytest.approx(2 * S.constants["x_c"] + 1.0, abs=1e-12)


@pytest.mark.parametrize("kind,k", [("triangle", 3), ("triangle", 4), ("triangle", 5),
                                    ("square", 3), ("square", 4)])
def test_early_meeting_structure(kind, k):
    S = make_shape(kind)
    proto = build_early_meeting(kind, k, 0.4)
    sp = proto.spec
    x = S.max_centroid_dist
    # |O p1| + |p1 p2| = x
    assert dist(S.centroid, S.boundary_point(sp.p1)) + (sp.p2 - sp.p1) == pytest.approx(x, abs=1e-12)
    lengths = [path_length(tr.points) for tr in proto.trajectories]
    assert max(lengths) - min(lengths) < 1e-10
    assert sp.worst_time == pytest.approx(sp.meeting_time + x, abs=1e-9)


def test_early_meeting_rejects_bad_k_and_p1():
    with pytest.raises(ProtocolError):
        build_early_meeting("square", 5, 0.4)
    with pytest.raises(ProtocolError):
        build_early_meeting("triangle", 3, 0.0)
    with pytest.raises(ProtocolError):
        build_early_meeting("triangle", 3, 1.0)


def test_symmetric_early_p1_centres_the_common_section():
    for kind in ("triangle", "square"):
        p1 = symmetric_early_p1(kind)
        sp = build_early_meeting(kind, 3, p1).spec
        assert sp.p2 == pytest.approx(1.0 - p1, abs=1e-12)


# -- dispatch and custom protocols -----------------------------------------------


def test_build_validates_parameters():
    with pytest.raises(ProtocolError, match="needs"):
        build("detour1")
    with pytest.raises(ProtocolError, match="unexpected"):
        build("detour1", z=0.7, w=1.0)
    with pytest.raises(ProtocolError, match="unknown"):
        build("spiral")
    with pytest.raises(ProtocolError):
        build("square-detour", "triangle", 2, p=0.15, q=0.5)


def test_custom_protocol_checks_start_and_policy():
    S = make_shape("square")
    a = Trajectory.from_path([S.centroid, (0.5, 0.0)])
    b = Trajectory.from_path([(0.1, 0.1), (0.0, 0.0)])
    with pytest.raises(ProtocolError, match="centroid"):
        custom_protocol(S, [a, b])
    with pytest.raises(ProtocolError, match="two robots"):
        custom_protocol(S, [a])
    c = Trajectory.from_path([S.centroid, (0.5, 1.0)])
    with pytest.raises(ProtocolError, match="one point"):
        custom_protocol(S, [a, c], "rendezvous")
