import json
import math

import jsonschema
import numpy as np
import pytest

from evacsim import load_schema
from evacsim.geometry import Point, dist, make_shape
from evacsim.protocols import Rendezvous, custom_protocol
from evacsim.simulator import (
    EvacuationError,
    earliest_interception,
    earliest_interception_many,
    evac_times,
    evacuate,
)
from evacsim.trajectory import FirstVisitProfile, Trajectory
from cases import PAPER_CASES, paper_protocol
from oracles import brute_intercept, intercept_evacuation, positions


def _random_chase(rng):
    n = rng.integers(2, 5)
    pts = rng.random((n, 2))
    wps, t = [], rng.random() * 0.3
    for i, p in enumerate(pts):
        if i:
            t += math.dist(pts[i - 1], p) + (rng.random() * 0.2 if rng.random() < 0.3 else 0.0)
        wps.append((Point(*p), t))
    chaser = Point(*rng.random(2))
    free_from = rng.random() * t
    return chaser, free_from, Trajectory(tuple(wps))


def test_interception_matches_brute_force_scan():
    rng = np.random.default_rng(20240601)
    for _ in range(200):
        chaser, f, target = _random_chase(rng)
        t, at = earliest_interception(chaser, f, target)
        want = brute_intercept(chaser, f, target.waypoints, fine=1e-6)
        assert t == pytest.approx(want, abs=2e-6)
        # the returned point is where the target is and the chaser can be
        assert at == pytest.approx(tuple(positions(target.waypoints, [t])[0]), abs=1e-9)
        assert dist(chaser, at) <= t - f + 1e-9


def test_vectorized_interception_agrees():
    rng = np.random.default_rng(7)
    chaser, f, target = _random_chase(rng)
    chasers = rng.random((50, 2))
    fs = rng.random(50) * target.end_time
    t, at = earliest_interception_many(chasers, fs, target)
    for i in range(50):
        ts, ps = earliest_interception(Point(*chasers[i]), fs[i], target)
        assert t[i] == pytest.approx(ts, abs=1e-13)
        assert tuple(at[i]) == pytest.approx(ps, abs=1e-12)


def test_interception_after_schedule_ends():
    target = Trajectory.from_path([(0.0, 0.0), (0.1, 0.0)])
    t, at = earliest_interception(Point(1.0, 0.0), 5.0, target)
    assert at == (0.1, 0.0) and t == pytest.approx(5.9)


@pytest.mark.parametrize("name", ["tri-detour1", "tri-detour2", "sq-detour"])
def test_intercept_evacuation_matches_first_principles(name):
    proto = paper_protocol(name)
    rng = np.random.default_rng(len(name))
    for s in rng.random(12) * proto.shape.perimeter:
        want = intercept_evacuation(proto.trajectories, proto.shape.boundary_point(s), dt=1e-5)
        assert evacuate(proto, s).evac_time == pytest.approx(want, abs=5e-5)


def test_rendezvous_evacuation_formula():
    proto = paper_protocol("tri-early3")
    pol, cs, S = proto.policy, proto.common_section, proto.shape
    s_found, s_common = 2.3, 0.5 * (cs.start + cs.end)
    r = evacuate(proto, s_found)
    assert r.evac_time == pytest.approx(pol.meeting_time + dist(pol.meeting_point, S.boundary_point(s_found)))
    r = evacuate(proto, s_common)
    assert r.discovery is None
    want = pol.meeting_time + dist(pol.meeting_point, cs.entry) + (s_common - cs.start)
    assert r.evac_time == pytest.approx(want, abs=1e-12)
    assert [e.kind for e in r.events] == ["rendezvous", "phase2"]


def test_exit_at_start_side_midpoint_is_immediate():
    proto = paper_protocol("tri-detour1")
    r = evacuate(proto, 0.5)
    assert r.evac_time == pytest.approx(proto.shape.constants["y_c"], abs=1e-15)
    assert {e.robot for e in r.events if e.kind == "discover"} == {0, 1}


@pytest.mark.parametrize("name", sorted(PAPER_CASES))
def test_vectorized_matches_scalar(name):
    proto = paper_protocol(name)
    s = np.random.default_rng(3).random(200) * proto.shape.perimeter
    v = evac_times(proto, s)
    for si, vi in zip(s, v):
        assert vi == pytest.approx(evacuate(proto, si).evac_time, abs=1e-12)


SYMMETRIC = ["tri-detour1", "tri-detour2", "sq-detour", "sq-early3", "sq-early4",
             "tri-equal2", "tri-equal3", "tri-equal5", "sq-equal2", "sq-equal4"]


@pytest.mark.parametrize("name", SYMMETRIC)
def test_mirror_symmetry(name):
    proto = paper_protocol(name)
    S = proto.shape
    s = np.random.default_rng(11).random(1000) * S.perimeter
    cs = proto.common_section
    if cs is not None:
        # phase 2 sweeps the common section one way, so only exits outside it pair up
        s = s[np.mod(s - cs.start, S.perimeter) > cs.length]
    m = np.array([S.mirror_arc(x) for x in s])
    assert np.max(np.abs(evac_times(proto, s) - evac_times(proto, m))) < 1e-9


def test_result_json_matches_schema():
    schema = load_schema("evacuation_result")
    for name in ("tri-detour1", "sq-detour", "tri-early4"):
        proto = paper_protocol(name)
        for s in (0.0, 0.5, 1.3, 2.7):
            doc = json.loads(json.dumps(evacuate(proto, s).to_dict()))
            jsonschema.validate(doc, schema)


def test_unvisited_exit_raises():
    S = make_shape("square")
    a = Trajectory.from_path([S.centroid, (0.5, 0.0)])
    b = Trajectory.from_path([S.centroid, (0.5, 1.0)])
    proto = custom_protocol(S, [a, b])
    # robot 0 finds (0.5, 0) at 0.5 and fetches robot 1 from (0.5, 1)
    assert evacuate(proto, 0.5).evac_time == pytest.approx(2.5)
    with pytest.raises(EvacuationError):
        evacuate(proto, 1.5)
    with pytest.raises(EvacuationError):
        evac_times(proto, [1.5])


@pytest.mark.parametrize("name", ["tri-detour1", "tri-detour2", "sq-detour"])
def test_evacuation_never_later_than_other_robots_own_visit(name):
    # an interception point lies on the other robot's path, so the pair is
    # never slower than letting that robot find the exit itself
    proto = paper_protocol(name)
    s = np.random.default_rng(5).random(300) * proto.shape.perimeter
    per = FirstVisitProfile(proto.shape, proto.trajectories).per_robot(s)
    for j, si in enumerate(s):
        r = evacuate(proto, si)
        finder = r.discovery[1]
        assert r.discovery[0] == per[finder, j]
        assert r.discovery[0] - 1e-15 <= r.evac_time <= per[1 - finder, j] + 1e-12


def test_tie_with_own_visit_keeps_finder_in_place():
    S = make_shape("square")
    a = Trajectory.from_path([S.centroid, (0.5, 0.0), (0.0, 0.0)])
    b = Trajectory.from_path([S.centroid, (0.5, 1.0), (0.0, 1.0), (0.0, 0.0)])
    proto = custom_protocol(S, [a, b])
    r = evacuate(proto, 0.0)
    # chasing robot 1 head-on and returning costs exactly its own arrival, 2.0
    assert r.evac_time == pytest.approx(2.0)
    assert r.arrivals[0] == pytest.approx(1.0)


def test_rendezvous_custom_protocol():
    S = make_shape("square")
    a = Trajectory.from_path([S.centroid, (0.0, 0.5), S.centroid])
    b = Trajectory.from_path([S.centroid, (1.0, 0.5), S.centroid])
    proto = custom_protocol(S, [a, b], "rendezvous")
    assert isinstance(proto.policy, Rendezvous)
    assert evacuate(proto, 3.5).evac_time == pytest.approx(1.0 + 0.5)
