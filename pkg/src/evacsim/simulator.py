"""Face-to-face evacuation semantics.

Two policies are supported:

* ``Intercept`` (two robots): the finder computes the earliest point where it
  can catch the other robot on its remaining schedule, then both walk to the
  exit. If the other robot's own schedule reaches the exit no later than that
  round trip, the finder simply waits.
* ``Rendezvous``: every robot finishes its phase-1 path back to the meeting
  point; at the meeting time all walk to the exit together, or, if nobody
  found it, sweep the common section from its entry point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import Point, dist
from .protocols import Intercept, Protocol, Rendezvous
from .trajectory import FirstVisitProfile, Trajectory

# feasibility slack for |chaser - target(t)| <= t - free_from; absorbs rounding
# at the designed interception waypoints, where equality holds exactly
INTERCEPT_TOL = 1e-12


class EvacuationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Event:
    kind: str  # discover | intercept | rendezvous | phase2
    time: float
    robot: Optional[int] = None
    at: Optional[Point] = None


@dataclass
class EvacuationResult:
    exit: float
    exit_point: Point
    discovery: Optional[tuple[float, int]]  # None means found in phase 2
    events: list[Event] = field(default_factory=list)
    arrivals: list[float] = field(default_factory=list)

    @property
    def evac_time(self) -> float:
        return max(self.arrivals)

    def to_dict(self) -> dict:
        return {
            "exit": self.exit,
            "exit_point": list(self.exit_point),
            "discovery": None if self.discovery is None else {
                "time": self.discovery[0], "robot": self.discovery[1],
            },
            "events": [
                {"kind": e.kind, "time": e.time, "robot": e.robot,
                 "at": None if e.at is None else list(e.at)}
                for e in self.events
            ],
            "arrivals": list(self.arrivals),
            "evac_time": self.evac_time,
        }


# -- interception -----------------------------------------------------------------


def _segment_root(e, u, s0, T):
    """Smallest tau in [0, T] with |e + tau*u| = s0 + tau, given infeasible at 0."""
    a = u[0] * u[0] + u[1] * u[1] - 1.0
    b = 2.0 * (e[0] * u[0] + e[1] * u[1] - s0)
    c = e[0] * e[0] + e[1] * e[1] - s0 * s0
    if abs(a) < 1e-14:
        tau = -c / b if b != 0.0 else T
    else:
        disc = max(b * b - 4.0 * a * c, 0.0)
        qq = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        roots = [r for r in (qq / a, c / qq if qq != 0.0 else math.inf) if r >= -1e-15]
        tau = min(roots) if roots else T
    return min(max(tau, 0.0), T)


def earliest_interception(chaser_at, free_from: float, target: Trajectory) -> tuple[float, Point]:
    """Earliest time a unit-speed chaser leaving ``chaser_at`` at ``free_from`` meets ``target``.

    Because the target never outruns the chaser, feasibility is monotone in
    time: scan segments for the first one whose end is reachable, then solve
    the quadratic on it. A target that has finished its schedule waits at its
    last waypoint, so an interception always exists.
    """
    c = chaser_at
    for a, b, ta, tb in target.segments():
        if tb < free_from:
            continue
        lo = max(ta, free_from)
        dur = tb - ta
        u = ((b[0] - a[0]) / dur, (b[1] - a[1]) / dur) if dur > 0 else (0.0, 0.0)
        start = (a[0] + u[0] * (lo - ta), a[1] + u[1] * (lo - ta))
        if dist(c, start) - (lo - free_from) <= INTERCEPT_TOL:
            return lo, Point(*start)
        if dist(c, b) - (tb - free_from) <= INTERCEPT_TOL:
            e = (start[0] - c[0], start[1] - c[1])
            tau = _segment_root(e, u, lo - free_from, tb - lo)
            return lo + tau, Point(start[0] + u[0] * tau, start[1] + u[1] * tau)
    last = target.end
    return max(free_from + dist(c, last), target.end_time), last


def earliest_interception_many(chasers: np.ndarray, free_from: np.ndarray,
                               target: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``earliest_interception`` for N chasers against one target."""
    chasers = np.asarray(chasers, dtype=float).reshape(-1, 2)
    f = np.asarray(free_from, dtype=float).reshape(-1)
    n = f.size
    t_out = np.full(n, np.nan)
    p_out = np.full((n, 2), np.nan)
    pending = np.ones(n, dtype=bool)
    for a, b, ta, tb in target.segments():
        if not pending.any():
            break
        m = pending & (f <= tb)
        if not m.any():
            continue
        idx = np.nonzero(m)[0]
        dur = tb - ta
        u = np.array([(b[0] - a[0]) / dur, (b[1] - a[1]) / dur]) if dur > 0 else np.zeros(2)
        lo = np.maximum(ta, f[idx])
        start = np.asarray(a)[None, :] + u[None, :] * (lo - ta)[:, None]
        cc = chasers[idx]
        e = start - cc
        s0 = lo - f[idx]
        at_start = np.hypot(e[:, 0], e[:, 1]) - s0 <= INTERCEPT_TOL
        at_end = np.hypot(b[0] - cc[:, 0], b[1] - cc[:, 1]) - (tb - f[idx]) <= INTERCEPT_TOL
        hit = at_start | at_end
        if not hit.any():
            continue
        tau = np.zeros(idx.size)
        solve = at_end & ~at_start
        if solve.any():
            tau[solve] = _segment_root_many(e[solve], u, s0[solve], (tb - lo)[solve])
        h = idx[hit]
        t_out[h] = lo[hit] + tau[hit]
        p_out[h] = start[hit] + u[None, :] * tau[hit][:, None]
        pending[h] = False
    if pending.any():
        last = np.asarray(target.end)
        idx = np.nonzero(pending)[0]
        d = np.hypot(chasers[idx, 0] - last[0], chasers[idx, 1] - last[1])
        t_out[idx] = np.maximum(f[idx] + d, target.end_time)
        p_out[idx] = last
    return t_out, p_out


def _segment_root_many(e, u, s0, T):
    a = float(u @ u) - 1.0
    b = 2.0 * (e @ u - s0)
    c = np.einsum("ij,ij->i", e, e) - s0 * s0
    if abs(a) < 1e-14:
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(b != 0.0, -c / b, T)
    else:
        disc = np.maximum(b * b - 4.0 * a * c, 0.0)
        qq = -0.5 * (b + np.copysign(np.sqrt(disc), b))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = qq / a
            r2 = np.where(qq != 0.0, c / qq, np.inf)
        r1 = np.where(r1 >= -1e-15, r1, np.inf)
        r2 = np.where(r2 >= -1e-15, r2, np.inf)
        tau = np.minimum(r1, r2)
        tau = np.where(np.isfinite(tau), tau, T)
    return np.clip(tau, 0.0, T)


# -- evacuation ----------------------------------------------------------------------


def _profile(protocol: Protocol) -> FirstVisitProfile:
    # protocols are frozen, so the profile is cached on the instance
    prof = protocol.__dict__.get("_first_visit_profile")
    if prof is None:
        prof = FirstVisitProfile(protocol.shape, protocol.trajectories)
        object.__setattr__(protocol, "_first_visit_profile", prof)
    return prof


def evacuate(protocol: Protocol, exit_s: float) -> EvacuationResult:
    shape = protocol.shape
    s = shape.wrap(float(exit_s))
    X = shape.boundary_point(s)
    per = _profile(protocol).per_robot(s)[:, 0]
    pol = protocol.policy

    if isinstance(pol, Rendezvous):
        return _evacuate_rendezvous(protocol, s, X, per, pol)
    if isinstance(pol, Intercept):
        return _evacuate_intercept(protocol, s, X, per)
    raise EvacuationError(f"unsupported policy {pol!r}")


def _evacuate_rendezvous(protocol, s, X, per, pol: Rendezvous) -> EvacuationResult:
    k = protocol.k
    finder = int(np.argmin(per))
    t_d = float(per[finder])
    mt, mp = pol.meeting_time, pol.meeting_point
    if math.isfinite(t_d):
        events = [Event("discover", t_d, finder, X), Event("rendezvous", mt, None, mp)]
        return EvacuationResult(s, X, (t_d, finder), events, [mt + dist(mp, X)] * k)
    cs = protocol.common_section
    if cs is None or not _in_section(protocol.shape, cs, s):
        raise EvacuationError(f"exit at arc {s} is covered by neither schedules nor the common section")
    entry_t = mt + dist(mp, cs.entry)
    t = entry_t + protocol.shape.arc_dist(cs.start, s)
    events = [Event("rendezvous", mt, None, mp), Event("phase2", entry_t, None, cs.entry)]
    return EvacuationResult(s, X, None, events, [t] * k)


def _in_section(shape, cs, s) -> bool:
    return shape.arc_dist(cs.start, s) <= cs.end - cs.start + 1e-12


def _evacuate_intercept(protocol, s, X, per) -> EvacuationResult:
    if protocol.k != 2:
        raise EvacuationError("intercept policy is defined for two robots")
    finder = int(np.argmin(per))
    other = 1 - finder
    t_d = float(per[finder])
    if not math.isfinite(t_d):
        raise EvacuationError(f"exit at arc {s} is never visited")
    own = float(per[other])
    events = [Event("discover", t_d, finder, X)]
    arrivals = [0.0, 0.0]
    if own <= t_d + INTERCEPT_TOL:
        events.append(Event("discover", own, other, X))
        arrivals[finder] = arrivals[other] = t_d
        return EvacuationResult(s, X, (t_d, finder), events, arrivals)
    t_i, at = earliest_interception(X, t_d, protocol.trajectories[other])
    via = t_i + dist(at, X)
    if own <= via:
        # the other robot will find the exit by itself; the finder stays
        events.append(Event("discover", own, other, X))
        arrivals[finder], arrivals[other] = t_d, own
    else:
        events.append(Event("intercept", t_i, other, at))
        arrivals[finder] = arrivals[other] = via
    return EvacuationResult(s, X, (t_d, finder), events, arrivals)


def evac_times(protocol: Protocol, s) -> np.ndarray:
    """Vectorized evacuation time for many exits (arc coordinates)."""
    shape = protocol.shape
    s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), shape.perimeter)
    X = shape.boundary_points(s)
    per = _profile(protocol).per_robot(s)
    pol = protocol.policy
    n = s.size
    cols = np.arange(n)
    finder = np.argmin(per, axis=0)
    t_d = per[finder, cols]

    if isinstance(pol, Rendezvous):
        mp = np.asarray(pol.meeting_point)
        out = pol.meeting_time + np.hypot(X[:, 0] - mp[0], X[:, 1] - mp[1])
        lost = ~np.isfinite(t_d)
        if lost.any():
            cs = protocol.common_section
            if cs is None:
                raise EvacuationError("exit covered by neither schedules nor a common section")
            off = np.mod(s[lost] - cs.start, shape.perimeter)
            if np.any(off > cs.end - cs.start + 1e-12):
                raise EvacuationError("exit covered by neither schedules nor the common section")
            out[lost] = pol.meeting_time + dist(pol.meeting_point, cs.entry) + off
        return out

    if not isinstance(pol, Intercept) or protocol.k != 2:
        raise EvacuationError("intercept policy is defined for two robots")
    if not np.all(np.isfinite(t_d)):
        raise EvacuationError("some exits are never visited")
    other = 1 - finder
    own = per[other, cols]
    out = t_d.copy()
    need = own > t_d + INTERCEPT_TOL
    for r in (0, 1):
        m = need & (other == r)
        if not m.any():
            continue
        t_i, at = earliest_interception_many(X[m], t_d[m], protocol.trajectories[r])
        via = t_i + np.hypot(at[:, 0] - X[m, 0], at[:, 1] - X[m, 1])
        out[m] = np.minimum(own[m], via)
    return out
