"""Timed polylines for unit-speed robots and first-visit bookkeeping on the boundary."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import GEOM_TOL, Point, Shape, dist

SPEED_TOL = 1e-12


class TrajectoryError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    """Waypoints with scheduled arrival times.

    Arrival-time slack beyond a segment's length means the robot waits at
    the segment start; it never moves faster than unit speed.
    """

    waypoints: tuple[tuple[Point, float], ...]

    def __post_init__(self):
        if not self.waypoints:
            raise TrajectoryError("trajectory needs at least one waypoint")
        wps = tuple((Point(float(p[0]), float(p[1])), float(t)) for p, t in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        for (p, t), (q, u) in zip(wps, wps[1:]):
            if not (math.isfinite(t) and math.isfinite(u)):
                raise TrajectoryError("non-finite arrival time")
            if u < t:
                raise TrajectoryError(f"arrival times decrease ({t} -> {u})")
            if u - t < dist(p, q) - SPEED_TOL:
                raise TrajectoryError(
                    f"speed bound violated between {tuple(p)}@{t} and {tuple(q)}@{u}"
                )

    @classmethod
    def from_path(cls, points: Sequence, start_time: float = 0.0) -> "Trajectory":
        """Full-speed trajectory through ``points``."""
        t = start_time
        wps = [(Point(*points[0]), t)]
        for p, q in zip(points, points[1:]):
            t += dist(p, q)
            wps.append((Point(*q), t))
        return cls(tuple(wps))

    @property
    def points(self) -> list[Point]:
        return [p for p, _ in self.waypoints]

    @property
    def times(self) -> list[float]:
        return [t for _, t in self.waypoints]

    @property
    def start_time(self) -> float:
        return self.waypoints[0][1]

    @property
    def end_time(self) -> float:
        return self.waypoints[-1][1]

    @property
    def end(self) -> Point:
        return self.waypoints[-1][0]

    @property
    def length(self) -> float:
        pts = self.points
        return sum(dist(p, q) for p, q in zip(pts, pts[1:]))

    def position_at(self, t: float) -> Point:
        wps = self.waypoints
        if t <= wps[0][1]:
            return wps[0][0]
        for (p, tp), (q, tq) in zip(wps, wps[1:]):
            if t <= tq:
                d = dist(p, q)
                move_start = tq - d  # waiting happens at the segment start
                if t <= move_start or d == 0.0:
                    return p
                lam = (t - move_start) / d
                return Point(p.x + (q.x - p.x) * lam, p.y + (q.y - p.y) * lam)
        return wps[-1][0]

    def time_at_waypoint(self, i: int) -> float:
        return self.waypoints[i][1]

    def segments(self) -> list[tuple[Point, Point, float, float]]:
        """Constant-velocity pieces ``(a, b, t_a, t_b)``; waits become their own pieces."""
        out = []
        for (p, tp), (q, tq) in zip(self.waypoints, self.waypoints[1:]):
            d = dist(p, q)
            move_start = tq - d
            if move_start > tp + SPEED_TOL:
                out.append((p, p, tp, move_start))
                out.append((p, q, move_start, tq))
            else:
                out.append((p, q, tp, tq))
        return out

    def mirrored(self, shape: Shape) -> "Trajectory":
        return Trajectory(tuple((shape.mirror(p), t) for p, t in self.waypoints))


@dataclass(frozen=True)
class VisitPiece:
    robot: int
    s_a: float
    s_b: float
    t_a: float
    t_b: float


class FirstVisitProfile:
    """Earliest scheduled visit of every boundary point, from robot schedules only.

    Built from the trajectory pieces that run along a side (plus isolated
    boundary touches at waypoints). Each piece maps an arc interval affinely
    to time.
    """

    def __init__(self, shape: Shape, trajectories: Sequence[Trajectory]):
        self.shape = shape
        pieces: list[VisitPiece] = []
        for rid, traj in enumerate(trajectories):
            for p, t in traj.waypoints:
                for i in shape.side_of(p):
                    s = shape.arc_on_side(p, i)
                    pieces.append(VisitPiece(rid, s, s, t, t))
            for a, b, ta, tb in traj.segments():
                if a == b:
                    continue
                common = set(shape.side_of(a)) & set(shape.side_of(b))
                for i in sorted(common):
                    pieces.append(
                        VisitPiece(rid, shape.arc_on_side(a, i), shape.arc_on_side(b, i), ta, tb)
                    )
        self.pieces = pieces
        self.n_robots = len(trajectories)

    def per_robot(self, s) -> np.ndarray:
        """First-visit time of each robot at arcs ``s``; shape (n_robots, N), inf if never."""
        s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), self.shape.perimeter)
        P = self.shape.perimeter
        out = np.full((self.n_robots, s.size), np.inf)
        for pc in self.pieces:
            lo, hi = min(pc.s_a, pc.s_b), max(pc.s_a, pc.s_b)
            span = pc.s_b - pc.s_a
            for shift in (0.0, P, -P):
                ss = s + shift
                m = (ss >= lo - GEOM_TOL) & (ss <= hi + GEOM_TOL)
                if not m.any():
                    continue
                if span == 0.0:
                    t = np.full(int(m.sum()), pc.t_a)
                else:
                    lam = np.clip((ss[m] - pc.s_a) / span, 0.0, 1.0)
                    t = pc.t_a + (pc.t_b - pc.t_a) * lam
                row = out[pc.robot]
                row[m] = np.minimum(row[m], t)
        return out

    def __call__(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Earliest visit time and visiting robot (lowest id on ties) at arcs ``s``."""
        per = self.per_robot(s)
        rid = np.argmin(per, axis=0)
        return per[rid, np.arange(per.shape[1])], rid


def first_visit(protocol, exit_s: float) -> tuple[float, int] | None:
    """Earliest scheduled visit of the exit by any robot, or None if no schedule covers it."""
    profile = FirstVisitProfile(protocol.shape, protocol.trajectories)
    t, rid = profile(exit_s)
    if not math.isfinite(t[0]):
        return None
    return float(t[0]), int(rid[0])


# -- text format --------------------------------------------------------------
#
#   <id>: (x,y)@t; (x,y)@t; ...
#
# One robot per line; blank lines and '#' comments are ignored.

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_WAYPOINT = re.compile(rf"\(\s*({_NUM})\s*,\s*({_NUM})\s*\)\s*@\s*({_NUM})")


def parse_trajectories(text: str) -> dict[str, Trajectory]:
    robots: dict[str, Trajectory] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise TrajectoryError(f"line {lineno}: expected '<id>: (x,y)@t; ...'")
        rid, body = (part.strip() for part in line.split(":", 1))
        if not rid or rid in robots:
            raise TrajectoryError(f"line {lineno}: missing or duplicate robot id {rid!r}")
        wps = []
        for chunk in filter(None, (c.strip() for c in body.split(";"))):
            m = _WAYPOINT.fullmatch(chunk)
            if m is None:
                raise TrajectoryError(f"line {lineno}: malformed waypoint {chunk!r}")
            x, y, t = (float(g) for g in m.groups())
            wps.append((Point(x, y), t))
        try:
            robots[rid] = Trajectory(tuple(wps))
        except TrajectoryError as exc:
            raise TrajectoryError(f"line {lineno} (robot {rid}): {exc}") from None
    return robots


def format_trajectories(trajectories: Iterable[Trajectory], ids: Iterable[str] | None = None) -> str:
    trajectories = list(trajectories)
    ids = list(ids) if ids is not None else [str(i) for i in range(len(trajectories))]
    lines = []
    for rid, traj in zip(ids, trajectories):
        body = "; ".join(f"({p.x!r},{p.y!r})@{t!r}" for p, t in traj.waypoints)
        lines.append(f"{rid}: {body}")
    return "\n".join(lines) + "\n"
