"""Builders for the evacuation protocols.

Every builder turns a handful of free parameters into concrete timed
trajectories. Detour waypoints are all solved from one constraint: the
informed robot, leaving discovery point ``d`` at time ``T_other(d)``, reaches
waypoint ``w`` exactly when the uninformed robot does::

    T_other(d) + |d - w| = T_self(w)

Equal-travel partitions solve for section endpoints so that every robot's
out-explore-return path has the same length.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

from .geometry import GEOM_TOL, Point, Shape, dist, lerp, make_shape, toward
from .trajectory import Trajectory

ROOT_TOL = 1e-13


class ProtocolError(ValueError):
    """A builder precondition or waypoint constraint cannot be satisfied."""


@dataclass(frozen=True)
class Intercept:
    kind: str = "intercept"


@dataclass(frozen=True)
class Rendezvous:
    meeting_point: Point
    meeting_time: float
    kind: str = "rendezvous"


Policy = Union[Intercept, Rendezvous]


@dataclass(frozen=True)
class CommonSection:
    """Boundary arc [start, end] left for all robots to sweep together after meeting."""

    start: float
    end: float
    entry: Point

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class DetourSpec:
    z: float
    q1: Point
    q2: Point
    r1: Point
    r2: Point
    p1: Point
    p2: Point
    t1: float
    t2: float


@dataclass(frozen=True)
class TwoDetourSpec:
    b1: float
    b2: float
    first: DetourSpec
    q1b: Point
    q2b: Point
    r2b: Point
    p2b: Point
    t1: float
    t2: float
    t3: float


@dataclass(frozen=True)
class SquareDetourSpec:
    p: float
    q: float
    F: Point
    E: Point
    G: Point
    I: Point
    J: Point
    K: Point
    M: Point
    alpha: float
    ec: float
    eg: float
    gc: float
    gj: float
    ij: float
    gi: float
    ic: float
    ei: float
    detour_len: float
    kj: float


@dataclass(frozen=True)
class EarlyMeetingSpec:
    p1: float
    p2: float
    r: tuple[float, ...]
    travel_times: tuple[float, ...]
    meeting_time: float

    @property
    def worst_time(self) -> float:
        return max(self.travel_times)


@dataclass(frozen=True)
class Protocol:
    family: str
    shape: Shape
    trajectories: tuple[Trajectory, ...]
    policy: Policy
    params: dict = field(default_factory=dict)
    common_section: Optional[CommonSection] = None
    spec: Any = None

    @property
    def k(self) -> int:
        return len(self.trajectories)

    def breakpoints(self) -> list[float]:
        """Arc coordinates where the evacuation-time formula may change."""
        shape = self.shape
        arcs = [float(i) for i in range(shape.n_sides)]
        for traj in self.trajectories:
            for p in traj.points:
                if shape.on_boundary(p):
                    arcs.append(shape.arc_of(p))
        if self.common_section is not None:
            arcs += [shape.wrap(self.common_section.start), shape.wrap(self.common_section.end)]
        # anchor points named in the spec (e.g. J) need not be waypoints
        if dataclasses.is_dataclass(self.spec):
            for f in dataclasses.fields(self.spec):
                v = getattr(self.spec, f.name)
                if isinstance(v, Point) and shape.on_boundary(v):
                    arcs.append(shape.arc_of(v))
        out: list[float] = []
        for s in sorted(arcs):
            s = 0.0 if shape.perimeter - s < 1e-12 else s
            if not out or s - out[-1] > 1e-12:
                out.append(s)
        if len(out) > 1 and shape.perimeter - out[-1] < 1e-12:
            out.pop()
        return out


# -- root finding --------------------------------------------------------------


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = ROOT_TOL,
           max_iter: int = 200) -> float:
    """Root of ``f`` on [lo, hi]; requires a sign change (either orientation)."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ProtocolError("no sign change on bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_detour_point(start: Point, end: Point, t_start: float, d: Point, t_d: float,
                       name: str) -> Point:
    """Waypoint ``w`` on segment start->end with ``t_d + |d w| = t_start + |start w|``.

    The robot traverses start->end at unit speed from ``t_start``; an informed
    robot leaves ``d`` at ``t_d``. Raises ProtocolError naming ``name`` when the
    segment holds no root.
    """
    L = dist(start, end)

    def f(lam: float) -> float:
        w = lerp(start, end, lam)
        return t_d + dist(d, w) - (t_start + lam * L)

    if not (f(0.0) >= -1e-12 and f(1.0) <= 1e-12):
        raise ProtocolError(f"constraint {name} has no solution on its segment")
    return lerp(start, end, bisect(f, 0.0, 1.0))


# -- equal-travel partitions -----------------------------------------------------


def _section_length(shape: Shape, centre: Point, a: float, b: float) -> float:
    return dist(centre, shape.boundary_point(a)) + (b - a) + dist(centre, shape.boundary_point(b))


def _next_break(shape: Shape, centre: Point, a: float, L: float, end: float) -> float:
    # monotone in both a and L; extended linearly past the admissible range
    full = _section_length(shape, centre, a, end)
    if full <= L:
        return end + (L - full)
    empty = 2.0 * dist(centre, shape.boundary_point(a))
    if L <= empty:
        return a - (empty - L)
    # solve b + |O b| = c side by side; on one side it is linear in the side parameter
    c = L - dist(centre, shape.boundary_point(a)) + a
    lo = a
    while True:
        n = math.floor(lo) + 1
        hi = min(float(n), end)
        if hi >= end or hi + dist(centre, shape.boundary_point(hi)) >= c:
            break
        lo = hi
    j = math.floor(lo) if lo < math.floor(lo) + 1 else math.floor(lo)
    v0, v1 = shape.side(j)
    wx, wy = centre[0] - v0[0], centre[1] - v0[1]
    dx, dy = v1[0] - v0[0], v1[1] - v0[1]
    cj = c - j
    lam = (cj * cj - wx * wx - wy * wy) / (2.0 * (cj - wx * dx - wy * dy))
    return min(max(j + lam, lo), hi)


def equal_travel_partition(shape: Shape, centre: Point, start: float, end: float,
                           k: int) -> tuple[list[float], float]:
    """Split boundary arc [start, end] into ``k`` sections of equal round-trip length.

    Returns the k+1 section endpoints (unwrapped arcs) and the common length.
    """
    if k < 1:
        raise ProtocolError("need at least one section")
    if end <= start:
        raise ProtocolError("empty boundary interval")

    def last_break(L: float) -> float:
        a = start
        for _ in range(k):
            a = _next_break(shape, centre, a, L, end)
        return a - end

    L = bisect(last_break, 0.0, _section_length(shape, centre, start, end), tol=1e-15)
    breaks = [start]
    for _ in range(k - 1):
        breaks.append(_next_break(shape, centre, breaks[-1], L, end))
    breaks.append(end)
    return breaks, L


def boundary_walk(shape: Shape, a: float, b: float) -> list[Point]:
    """Points visited walking counterclockwise from arc a to arc b (a <= b, unwrapped)."""
    pts = [shape.boundary_point(a)]
    n = math.floor(a) + 1
    while n < b - 1e-15:
        pts.append(shape.vertices[n % shape.n_sides])
        n += 1
    pts.append(shape.boundary_point(b))
    return pts


def _sections_to_trajectories(shape: Shape, centre: Point, breaks: list[float]) -> list[Trajectory]:
    trajs = []
    for a, b in zip(breaks, breaks[1:]):
        trajs.append(Trajectory.from_path([centre, *boundary_walk(shape, a, b), centre]))
    return trajs


def build_equal_travel(shape: Union[Shape, str], k: int, start: Optional[float] = None) -> Protocol:
    """Equal-Travel: k sections of equal round-trip length, rendezvous at the centroid.

    ``start`` is the arc where the first section begins (default: midpoint of
    the first side).
    """
    shape = make_shape(shape) if isinstance(shape, str) else shape
    if k < 2:
        raise ProtocolError("equal-travel needs k >= 2")
    s0 = 0.5 if start is None else float(start)
    O = shape.centroid
    breaks, L = equal_travel_partition(shape, O, s0, s0 + shape.perimeter, k)
    trajs = _sections_to_trajectories(shape, O, breaks)
    return Protocol(
        family="equal",
        shape=shape,
        trajectories=tuple(trajs),
        policy=Rendezvous(O, L),
        params={"start": s0},
        spec=EarlyMeetingSpec(
            p1=s0, p2=s0, r=tuple(breaks[1:-1]),
            travel_times=tuple(t.end_time for t in trajs), meeting_time=L,
        ),
    )


# -- triangle, two robots with detours ----------------------------------------------


def _triangle_constants(shape: Shape):
    B, C, A = shape.vertex("B"), shape.vertex("C"), shape.vertex("A")
    return B, C, A, shape.centroid, shape.constants["y_c"]


def build_triangle_detour1(z: float) -> Protocol:
    """Two robots, one detour each; ``z`` = |Bq1| = |Cq2|."""
    if not (0.5 < z < 1.0):
        raise ProtocolError("detour1 requires 0.5 < z < 1")
    shape = make_shape("triangle")
    B, C, A, O, y = _triangle_constants(shape)
    F = lerp(B, C, 0.5)
    q2 = toward(C, A, z)
    q1 = shape.mirror(q2)
    t_c = y + 0.5
    t_q = t_c + z
    r2 = solve_detour_point(q2, B, t_q, B, t_c, "z + |q2 r2| = |r2 B|")
    t_r = t_q + dist(q2, r2)
    p2 = solve_detour_point(r2, q1, t_r, q1, t_q, "|q2 r2| + |r2 p2| = |p2 q1|")
    right = Trajectory.from_path([O, F, C, q2, r2, p2, q2, A])
    left = right.mirrored(shape)
    detour = dist(q2, r2) + dist(r2, p2) + dist(p2, q2)
    spec = DetourSpec(
        z=z, q1=q1, q2=q2, r1=shape.mirror(r2), r2=r2, p1=shape.mirror(p2), p2=p2,
        t1=y + 0.5 + z + dist(q2, B),
        t2=y + 0.5 + z + detour + 2.0 * (1.0 - z),
    )
    return Protocol("detour1", shape, (left, right), Intercept(), {"z": z}, spec=spec)


def build_triangle_detour2(b1: float, b2: float) -> Protocol:
    """Two robots, two detours each; b1 = |Bq1|, b2 = |Bq1'| (and mirrored on CA)."""
    if not (0.5 < b1 < b2 < 1.0):
        raise ProtocolError("detour2 requires 0.5 < b1 < b2 < 1")
    shape = make_shape("triangle")
    B, C, A, O, y = _triangle_constants(shape)
    F = lerp(B, C, 0.5)
    q2 = toward(C, A, b1)
    q1 = shape.mirror(q2)
    q2b = toward(C, A, b2)
    q1b = shape.mirror(q2b)

    t_c = y + 0.5
    t_q = t_c + b1
    r2 = solve_detour_point(q2, B, t_q, B, t_c, "z + |q2 r2| = |r2 B|")
    t_r = t_q + dist(q2, r2)
    p2 = solve_detour_point(r2, q1, t_r, q1, t_q, "|q2 r2| + |r2 p2| = |p2 q1|")
    t_back = t_r + dist(r2, p2) + dist(p2, q2)

    # second detour: same construction inside the smaller triangle A q1 q2
    t_qb = t_back + (b2 - b1)
    r2b = solve_detour_point(q2b, q1, t_qb, q1, t_back, "second detour r2'")
    t_rb = t_qb + dist(q2b, r2b)
    p2b = solve_detour_point(r2b, q1b, t_rb, q1b, t_qb, "second detour p2'")
    t_backb = t_rb + dist(r2b, p2b) + dist(p2b, q2b)

    right = Trajectory.from_path([O, F, C, q2, r2, p2, q2, q2b, r2b, p2b, q2b, A])
    left = right.mirrored(shape)
    first = DetourSpec(
        z=b1, q1=q1, q2=q2, r1=shape.mirror(r2), r2=r2, p1=shape.mirror(p2), p2=p2,
        t1=t_c + 2.0 * dist(B, r2), t2=t_back + 2.0 * (1.0 - b1),
    )
    spec = TwoDetourSpec(
        b1=b1, b2=b2, first=first, q1b=q1b, q2b=q2b, r2b=r2b, p2b=p2b,
        t1=t_c + 2.0 * dist(B, r2),
        t2=t_back + 2.0 * dist(q1, r2b),
        t3=t_backb + 2.0 * (1.0 - b2),
    )
    return Protocol("detour2", shape, (left, right), Intercept(), {"b1": b1, "b2": b2}, spec=spec)


# -- square, two robots with a detour ---------------------------------------------


def square_eh(p: float) -> float:
    """|EH|: vertical drop from E to the height of G (H = foot of G on the vertical through E)."""
    ec = math.sqrt(1.0 + (1.0 - p) ** 2)
    eg = (ec - 1.0 - p) / 2.0
    return eg / ec


def build_square_detour(p: float, q: float) -> Protocol:
    """Two robots in the square; p = |AE|, q = |CJ|."""
    if not (0.0 < p < 0.25):
        raise ProtocolError("square detour requires 0 < p < 0.25")
    if not (0.0 < q < 1.0 - square_eh(p)):
        raise ProtocolError("square detour requires 0 < q < 1 - |EH|")
    shape = make_shape("square")
    D, C, B, A = (shape.vertex(c) for c in "DCBA")
    O = shape.centroid
    F = lerp(D, C, 0.5)
    M = lerp(A, B, 0.5)
    E = Point(p, 1.0)
    J = Point(1.0, q)

    t_c = dist(O, F) + 0.5  # right robot at C
    t_e = t_c + 1.0 + p  # left robot at E
    G = solve_detour_point(E, C, t_e, C, t_c, "|DA| + |AE| + |EG| = |CG|")
    t_g = t_e + dist(E, G)
    I = solve_detour_point(G, J, t_g, J, t_c + q, "|CJ| + |JI| = |DA| + |AE| + |EG| + |GI|")
    t_e2 = t_g + dist(G, I) + dist(I, E)
    # K lives on line AB and may fall slightly left of E; solve on the line extended past A
    K = solve_detour_point(Point(p - 1.0, 1.0), M, t_e2 - 1.0, J, t_c + q, "interception point K")

    left = Trajectory.from_path([O, F, D, A, E, G, I, E, M])
    right = left.mirrored(shape)

    eg, gi, ei = dist(E, G), dist(G, I), dist(I, E)
    spec = SquareDetourSpec(
        p=p, q=q, F=F, E=E, G=G, I=I, J=J, K=K, M=M,
        alpha=math.asin((G.x - E.x) / eg),
        ec=dist(E, C), eg=eg, gc=dist(G, C), gj=dist(G, J), ij=dist(I, J), gi=gi,
        ic=dist(I, C), ei=ei, detour_len=eg + gi + ei, kj=dist(K, J),
    )
    return Protocol("square-detour", shape, (left, right), Intercept(), {"p": p, "q": q}, spec=spec)


# -- early meeting ----------------------------------------------------------------------

EARLY_MEETING_K = {"triangle": (3, 4, 5), "square": (3, 4)}


def build_early_meeting(shape: Union[Shape, str], k: int, p1: float) -> Protocol:
    """Equal-Travel Early-Meeting with the common section on the first side.

    ``p1`` is the arc length from the first vertex (|Bp1| or |Dp1|) to the
    start of the common section; its end p2 satisfies |Op1| + |p1p2| equal to
    the centroid-to-vertex distance.
    """
    shape = make_shape(shape) if isinstance(shape, str) else shape
    if k not in EARLY_MEETING_K[shape.kind]:
        raise ProtocolError(f"early meeting for the {shape.kind} supports k in {EARLY_MEETING_K[shape.kind]}")
    O = shape.centroid
    x = shape.max_centroid_dist
    if not (0.0 < p1 < 1.0):
        raise ProtocolError("p1 must lie inside the first side")
    reach = x - dist(O, shape.boundary_point(p1))
    p2 = p1 + reach
    if reach <= 0.0 or p2 >= 1.0:
        raise ProtocolError("common section must lie on the first side (|Op1| + |p1p2| = x)")
    breaks, L = equal_travel_partition(shape, O, p2, p1 + shape.perimeter, k)
    trajs = _sections_to_trajectories(shape, O, breaks)
    spec = EarlyMeetingSpec(
        p1=p1, p2=p2, r=tuple(breaks[1:-1]),
        travel_times=tuple(t.end_time + x for t in trajs), meeting_time=L,
    )
    return Protocol(
        family="early",
        shape=shape,
        trajectories=tuple(trajs),
        policy=Rendezvous(O, L),
        params={"p1": p1},
        common_section=CommonSection(p1, p2, shape.boundary_point(p1)),
        spec=spec,
    )


def symmetric_early_p1(shape: Union[Shape, str]) -> float:
    """The p1 whose common section is centred on the first side (p2 = 1 - p1).

    This is the reference layout for the square; it makes the middle break
    of the four-robot partition land exactly on the top side's midpoint.
    """
    shape = make_shape(shape) if isinstance(shape, str) else shape
    O, x = shape.centroid, shape.max_centroid_dist
    return bisect(lambda p: p + x - dist(O, shape.boundary_point(p)) - (1.0 - p), 1e-9, 0.5)


# -- dispatch ---------------------------------------------------------------------------

FAMILIES = ("equal", "detour1", "detour2", "early", "square-detour")


def build(family: str, shape: str = "triangle", k: int = 2, **params: float) -> Protocol:
    """Build a protocol by family name; used by the CLI and the optimizer."""
    needed = {
        "equal": (), "detour1": ("z",), "detour2": ("b1", "b2"),
        "square-detour": ("p", "q"), "early": ("p1",),
    }
    if family not in needed:
        raise ProtocolError(f"unknown protocol family {family!r}")
    optional = ("start",) if family == "equal" else ()
    missing = [n for n in needed[family] if n not in params]
    extra = sorted(set(params) - set(needed[family]) - set(optional))
    if missing:
        raise ProtocolError(f"protocol {family!r} needs parameter(s) {missing}")
    if extra:
        raise ProtocolError(f"unexpected parameter(s) for {family!r}: {extra}")
    if family == "equal":
        return build_equal_travel(shape, k, params.get("start"))
    if family == "early":
        return build_early_meeting(shape, k, params["p1"])
    if family == "square-detour":
        _expect(shape, k, "square", 2, family)
        return build_square_detour(params["p"], params["q"])
    _expect(shape, k, "triangle", 2, family)
    if family == "detour1":
        return build_triangle_detour1(params["z"])
    return build_triangle_detour2(params["b1"], params["b2"])


def _expect(shape, k, want_shape, want_k, family):
    kind = shape if isinstance(shape, str) else shape.kind
    if kind != want_shape or k != want_k:
        raise ProtocolError(f"{family} is defined for {want_shape} with k={want_k}")


# -- JSON ----------------------------------------------------------------------------------


def protocol_to_dict(protocol: Protocol) -> dict:
    pol = protocol.policy
    policy: dict = {"kind": pol.kind}
    if isinstance(pol, Rendezvous):
        policy.update(meeting_point=list(pol.meeting_point), meeting_time=pol.meeting_time)
    cs = protocol.common_section
    return {
        "family": protocol.family,
        "shape": protocol.shape.kind,
        "k": protocol.k,
        "params": dict(protocol.params),
        "policy": policy,
        "common_section": None if cs is None else {
            "start": cs.start, "end": cs.end, "entry": list(cs.entry),
        },
        "trajectories": [
            {"robot": i, "waypoints": [[p.x, p.y, t] for p, t in traj.waypoints]}
            for i, traj in enumerate(protocol.trajectories)
        ],
    }


def protocol_from_dict(doc: dict) -> Protocol:
    shape = make_shape(doc["shape"])
    trajs = tuple(
        Trajectory(tuple((Point(x, y), t) for x, y, t in tr["waypoints"]))
        for tr in sorted(doc["trajectories"], key=lambda tr: tr["robot"])
    )
    pol = doc["policy"]
    if pol["kind"] == "rendezvous":
        policy: Policy = Rendezvous(Point(*pol["meeting_point"]), pol["meeting_time"])
    elif pol["kind"] == "intercept":
        policy = Intercept()
    else:
        raise ProtocolError(f"unknown policy {pol['kind']!r}")
    cs = doc.get("common_section")
    common = None if cs is None else CommonSection(cs["start"], cs["end"], Point(*cs["entry"]))
    if len(trajs) != doc["k"]:
        raise ProtocolError("k does not match the number of trajectories")
    return Protocol(doc["family"], shape, trajs, policy, dict(doc["params"]), common)


def protocol_to_json(protocol: Protocol, indent: Optional[int] = 2) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(protocol_to_dict(protocol), indent=indent)


def protocol_from_json(text: str) -> Protocol:
    return protocol_from_dict(json.loads(text))


def custom_protocol(shape: Union[Shape, str], trajectories, policy: str = "intercept") -> Protocol:
    """Wrap user-supplied trajectories (e.g. parsed from the text format)."""
    shape = make_shape(shape) if isinstance(shape, str) else shape
    trajs = tuple(trajectories)
    for tr in trajs:
        if dist(tr.points[0], shape.centroid) > GEOM_TOL or tr.start_time != 0.0:
            raise ProtocolError("every trajectory must start at the centroid at time 0")
    if policy == "intercept":
        if len(trajs) != 2:
            raise ProtocolError("intercept policy is defined for two robots")
        pol: Policy = Intercept()
    elif policy == "rendezvous":
        end, t_end = trajs[0].end, trajs[0].end_time
        for tr in trajs:
            if dist(tr.end, end) > GEOM_TOL or abs(tr.end_time - t_end) > GEOM_TOL:
                raise ProtocolError("rendezvous needs all trajectories to end at one point and time")
        pol = Rendezvous(end, t_end)
    else:
        raise ProtocolError(f"unknown policy {policy!r}")
    return Protocol("custom", shape, trajs, pol, {})
