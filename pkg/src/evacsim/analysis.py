"""Worst-case search over exit positions, closed-form critical times, lower bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import SQRT2, SQRT3, Shape, dist, make_shape, toward
from .protocols import (
    EarlyMeetingSpec,
    Protocol,
    ProtocolError,
    Rendezvous,
    SquareDetourSpec,
    TwoDetourSpec,
    DetourSpec,
    square_eh,
)
from .simulator import evac_times

ONE_SIDED = 1e-7
WORST_TIE = 1e-6
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BreakpointProbe:
    s: float
    value: float
    left: float
    right: float


@dataclass
class WorstCaseReport:
    shape: str
    k: int
    protocol: str
    params: dict
    worst_time: float
    worst_exits: list[float]
    breakpoints_probed: list[BreakpointProbe]
    lower_bound: float
    lower_bound_kind: str
    samples_used: int
    # uniform samples followed by the one-sided probes; not serialized
    curve: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def margin(self) -> float:
        return self.worst_time - self.lower_bound

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "k": self.k,
            "protocol": self.protocol,
            "params": dict(self.params),
            "worst_time": self.worst_time,
            "worst_exits": list(self.worst_exits),
            "breakpoints_probed": [
                {"s": b.s, "value": b.value, "left_limit": b.left, "right_limit": b.right}
                for b in self.breakpoints_probed
            ],
            "lower_bound": self.lower_bound,
            "lower_bound_kind": self.lower_bound_kind,
            "margin": self.margin,
            "samples_used": self.samples_used,
        }


def golden_max(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    """Golden-section search for a maximum of ``f`` on [a, b]; returns (x, f(x))."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def golden_max_many(f, a, b, tol: float):
    """Vectorized golden-section maximization on intervals [a_i, b_i].

    ``f`` maps an array of abscissae to an array of values. Returns the
    maximizers, their values and the number of function evaluations.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    used = 2 * a.size
    steps = max(0, math.ceil(math.log(tol / max(float(np.max(b - a)), tol)) / math.log(INV_PHI)))
    for _ in range(steps):
        left = fc >= fd
        # left: keep [a, d]; otherwise keep [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = np.where(left, b - INV_PHI * (b - a), d)
        nd = np.where(left, c, a + INV_PHI * (b - a))
        fnew = f(np.where(left, nc, nd))
        used += a.size
        fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
        c, d = nc, nd
    pick = fc >= fd
    return np.where(pick, c, d), np.where(pick, fc, fd), used


def _cluster(shape: Shape, cands: list[tuple[float, float]], gap: float = 1e-3) -> list[float]:
    """Representative arc per cluster of near-worst candidates (circular)."""
    if not cands:
        return []
    cands = sorted((shape.wrap(s), v) for s, v in cands)
    groups: list[list[tuple[float, float]]] = [[cands[0]]]
    for s, v in cands[1:]:
        if s - groups[-1][-1][0] <= gap:
            groups[-1].append((s, v))
        else:
            groups.append([(s, v)])
    if len(groups) > 1 and shape.perimeter - groups[-1][-1][0] + groups[0][0][0] <= gap:
        groups[0] = groups.pop() + groups[0]
    reps = []
    for g in groups:
        best = max(g, key=lambda sv: (sv[1], -sv[0]))
        reps.append(best[0])
    return sorted(reps)


def worst_case(protocol: Protocol, samples_per_unit: int = 10000, refine_tol: float = 1e-7,
               max_refine: int = 32) -> WorstCaseReport:
    """Supremum of the evacuation time over exits, including one-sided limits at breakpoints."""
    shape = protocol.shape
    P = shape.perimeter
    n = int(round(samples_per_unit * P))
    s = np.arange(n) * (P / n)
    v = evac_times(protocol, s)

    bps = np.asarray(protocol.breakpoints())
    left = evac_times(protocol, bps - ONE_SIDED)
    right = evac_times(protocol, bps + ONE_SIDED)
    exact = evac_times(protocol, bps)
    evals = n + 3 * bps.size

    cands: list[tuple[float, float]] = list(zip(s.tolist(), v.tolist()))
    for b, l, r, e in zip(bps, left, right, exact):
        cands += [(b - ONE_SIDED, l), (b + ONE_SIDED, r), (b, e)]

    # golden refinement of the highest sampled local maxima, all peaks at once
    is_max = (v >= np.roll(v, 1)) & (v >= np.roll(v, -1))
    peaks = np.nonzero(is_max)[0]
    peaks = peaks[np.lexsort((peaks, -v[peaks]))][:max_refine]
    if peaks.size:
        h = P / n
        x, fx, used = golden_max_many(lambda xs: evac_times(protocol, xs),
                                      s[peaks] - h, s[peaks] + h, refine_tol)
        evals += used
        cands += list(zip(x.tolist(), fx.tolist()))

    worst = max(val for _, val in cands)
    near = [(a, val) for a, val in cands if val >= worst - WORST_TIE]
    lb, kind = lower_bound_floor(shape, protocol.k, with_kind=True)
    curve = np.column_stack([
        np.concatenate([s, bps - ONE_SIDED, bps + ONE_SIDED]),
        np.concatenate([v, left, right]),
    ])
    return WorstCaseReport(
        shape=shape.kind,
        k=protocol.k,
        protocol=protocol.family,
        params=dict(protocol.params),
        worst_time=float(worst),
        worst_exits=_cluster(shape, near),
        breakpoints_probed=[
            BreakpointProbe(float(b), float(e), float(l), float(r))
            for b, e, l, r in zip(bps, exact, left, right)
        ],
        lower_bound=lb,
        lower_bound_kind=kind,
        samples_used=int(evals),
        curve=curve,
    )


def lower_bound_floor(shape, k: int, with_kind: bool = False):
    """Largest proven lower bound that applies; the square with k >= 3 gets a trivial floor."""
    kind = shape if isinstance(shape, str) else shape.kind
    if k < 2:
        raise ValueError("k must be at least 2")
    if kind == "triangle":
        val, how = (1.0 + 2.0 / SQRT3, "proven") if k == 2 else (SQRT3, "proven")
    elif kind == "square":
        val, how = (1.0 + 3.0 * SQRT2 / 2.0, "proven") if k == 2 else (SQRT2, "trivial floor")
    else:
        raise ValueError(f"unknown shape {kind!r}")
    return (val, how) if with_kind else val


# -- closed forms ---------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalFormulas:
    """Closed-form evacuation times at the exits where each section peaks."""

    times: dict
    scalars: dict = field(default_factory=dict)

    @property
    def max_time(self) -> float:
        return max(self.times.values())


def square_scalars(p, q) -> dict:
    """Intermediate lengths of the two-robot square detour as closed forms.

    Works elementwise on numpy arrays, so a whole grid row can be evaluated
    at once.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    ec = np.sqrt(1.0 + (1.0 - p) ** 2)
    alpha = np.arcsin((1.0 - p) / ec)
    eg = (ec - 1.0 - p) / 2.0
    hg = eg * np.sin(alpha)
    gc = ec - eg
    gj = np.sqrt(gc * gc + q * q - 2.0 * gc * q * np.cos(alpha))
    ij = (1.0 + p + eg - q + gj) / 2.0
    gi = gj - ij
    cos_beta = (gc * gc - gj * gj - q * q) / (-2.0 * gj * q)
    beta = np.arccos(cos_beta)
    ic = np.sqrt(ij * ij + q * q - 2.0 * ij * q * cos_beta)
    ei = np.sqrt(eg * eg + gi * gi - 2.0 * eg * gi * np.cos(alpha + beta))
    detour = eg + gi + ei
    A = 1.0 + detour - q
    r = (2.0 + q * q - 2.0 * q - A * A) / (2.0 * A + 2.0)
    kj = np.sqrt((1.0 - r) ** 2 + (1.0 - q) ** 2)
    return {
        "alpha": alpha, "ec": ec, "eg": eg, "hg": hg, "gc": gc, "gj": gj, "ij": ij,
        "gi": gi, "beta": beta, "ic": ic, "ei": ei, "detour_len": detour, "A": A,
        "r": r, "kj": kj,
        "time_C": 1.0 + 2.0 * gc,
        "time_J": 1.0 + q + 2.0 * ij,
        "time_J'": 1.0 + q + 2.0 * kj,
        "time_B": 3.0 + detour,
    }


def square_formula_max(p, q):
    sc = square_scalars(p, q)
    return np.maximum(np.maximum(sc["time_C"], sc["time_J"]), np.maximum(sc["time_J'"], sc["time_B"]))


def critical_times_square(p: float, q: float) -> CriticalFormulas:
    if not (0.0 < p < 0.25) or not (0.0 < q < 1.0 - square_eh(p)):
        raise ProtocolError("infeasible square detour parameters (need 0<p<0.25, 0<q<1-|EH|)")
    sc = {k: float(v) for k, v in square_scalars(p, q).items()}
    times = {k: sc.pop(k) for k in ("time_C", "time_J", "time_J'", "time_B")}
    return CriticalFormulas(times, sc)


def critical_times_detour1(z: float) -> CriticalFormulas:
    """Closed forms for the one-detour triangle protocol (no root finding)."""
    if not (0.5 < z < 1.0):
        raise ProtocolError("detour1 requires 0.5 < z < 1")
    y = SQRT3 / 6.0
    shape = make_shape("triangle")
    B, C, A = shape.vertex("B"), shape.vertex("C"), shape.vertex("A")
    q2 = toward(C, A, z)
    q1 = shape.mirror(q2)
    q2B = dist(q2, B)
    q2r2 = (q2B - z) / 2.0  # z + |q2 r2| = |q2 B| - |q2 r2|
    r2 = toward(q2, B, q2r2)
    r2q1 = dist(r2, q1)
    r2p2 = (r2q1 - q2r2) / 2.0  # |q2 r2| + |r2 p2| = |r2 q1| - |r2 p2|
    p2 = toward(r2, q1, r2p2)
    detour = q2r2 + r2p2 + dist(p2, q2)
    t1 = y + 0.5 + z + q2B
    t2 = y + 0.5 + z + detour + 2.0 * (1.0 - z)
    return CriticalFormulas(
        {"t1": t1, "t2": t2},
        {"q2r2": q2r2, "r2p2": r2p2, "p2q2": dist(p2, q2), "detour_len": detour},
    )


def critical_exits(protocol: Protocol) -> dict[str, tuple[float, int, float]]:
    """Named critical exits: name -> (arc, side, closed-form time).

    ``side`` is 0 for the exit itself, +1/-1 for the limit from larger/smaller
    arc. Closed forms come from the protocol's spec quantities, which the
    builders derive from schedule times, or from the analytic formulas above.
    """
    spec = protocol.spec
    out: dict[str, tuple[float, int, float]] = {}
    if isinstance(spec, SquareDetourSpec):
        cf = critical_times_square(spec.p, spec.q).times
        out["C"] = (1.0, 0, cf["time_C"])
        out["D"] = (0.0, 0, cf["time_C"])
        out["J"] = (1.0 + spec.q, 0, cf["time_J"])
        out["J'"] = (1.0 + spec.q, +1, cf["time_J'"])
        out["B"] = (2.0, 0, cf["time_B"])
        out["A"] = (3.0, 0, cf["time_B"])
    elif isinstance(spec, TwoDetourSpec):
        out["B"] = (0.0, 0, spec.t1)
        out["C"] = (1.0, 0, spec.t1)
        out["q2+"] = (1.0 + spec.b1, +1, spec.t2)
        out["q1+"] = (3.0 - spec.b1, -1, spec.t2)
        out["q2'+"] = (1.0 + spec.b2, +1, spec.t3)
        out["q1'+"] = (3.0 - spec.b2, -1, spec.t3)
    elif isinstance(spec, DetourSpec):
        cf = critical_times_detour1(spec.z).times
        out["B"] = (0.0, 0, cf["t1"])
        out["C"] = (1.0, 0, cf["t1"])
        out["q2+"] = (1.0 + spec.z, +1, cf["t2"])
        out["q1+"] = (3.0 - spec.z, -1, cf["t2"])
    elif isinstance(spec, EarlyMeetingSpec) and isinstance(protocol.policy, Rendezvous):
        t = protocol.policy.meeting_time + protocol.shape.max_centroid_dist
        for i, lab in enumerate(protocol.shape.labels):
            out[lab] = (float(i), 0, t)
        if protocol.common_section is not None:
            out["p2-"] = (protocol.common_section.end, -1, t)
    return out


def simulate_at(protocol: Protocol, s: float, side: int, eps: float = ONE_SIDED) -> float:
    """Evacuation time at an exit or its one-sided limit (linear extrapolation to eps -> 0)."""
    if side == 0:
        return float(evac_times(protocol, [s])[0])
    v1, v2 = evac_times(protocol, [s + side * eps, s + 2 * side * eps])
    return float(2.0 * v1 - v2)
