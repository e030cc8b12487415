"""Parameter search over protocol families: exhaustive grids and coordinate descent."""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import INV_PHI, critical_times_detour1, square_formula_max, worst_case
from .protocols import ProtocolError, build

OBJECTIVES = ("WorstCaseSim", "CriticalFormulaMax")

# optimizer family -> (builder family, shape, default k, parameter names)
FAMILIES = {
    "triangle_detour1": ("detour1", "triangle", 2, ("z",)),
    "triangle_detour2": ("detour2", "triangle", 2, ("b1", "b2")),
    "square_detour": ("square-detour", "square", 2, ("p", "q")),
    "early_meeting": ("early", None, None, ("p1",)),
}
# builder names accepted as aliases (the CLI speaks these)
_ALIASES = {"detour1": "triangle_detour1", "detour2": "triangle_detour2",
            "square-detour": "square_detour", "early": "early_meeting"}

MAX_CELLS = 50_000_000


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class Family:
    name: str
    shape: str
    k: int

    @classmethod
    def make(cls, name: str, shape: Optional[str] = None, k: Optional[int] = None) -> "Family":
        name = _ALIASES.get(name, name)
        if name not in FAMILIES:
            raise OptimizerError(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}")
        _, fshape, fk, _ = FAMILIES[name]
        if fshape is not None:
            if shape not in (None, fshape) or k not in (None, fk):
                raise OptimizerError(f"{name} is defined for {fshape} with k={fk}")
            return cls(name, fshape, fk)
        if shape is None or k is None:
            raise OptimizerError(f"{name} needs a shape and k")
        return cls(name, shape, int(k))

    @property
    def param_names(self) -> tuple[str, ...]:
        return FAMILIES[self.name][3]

    def build(self, params: dict):
        return build(FAMILIES[self.name][0], self.shape, self.k, **params)


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and math.isfinite(self.step)):
            raise OptimizerError(f"axis {self.name}: bounds and step must be finite")
        if not self.lo < self.hi:
            raise OptimizerError(f"axis {self.name}: need lo < hi")
        if not self.step > 0:
            raise OptimizerError(f"axis {self.name}: need step > 0")

    @property
    def size(self) -> int:
        # grid includes hi when it is a whole number of steps away (up to rounding)
        return int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1

    def values(self) -> np.ndarray:
        return self.lo + self.step * np.arange(self.size)


@dataclass(frozen=True)
class ParamSpace:
    axes: tuple[Axis, ...]
    objective: str = "WorstCaseSim"

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise OptimizerError(f"objective must be one of {OBJECTIVES}")
        if len({a.name for a in self.axes}) != len(self.axes):
            raise OptimizerError("duplicate axis names")
        if self.n_cells > MAX_CELLS:
            raise OptimizerError(f"grid has {self.n_cells} cells; limit is {MAX_CELLS}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def n_cells(self) -> int:
        return math.prod(a.size for a in self.axes)

    @classmethod
    def from_dict(cls, doc: dict) -> "ParamSpace":
        axes = tuple(Axis(n, float(v["lo"]), float(v["hi"]), float(v["step"]))
                     for n, v in doc["params"].items())
        return cls(axes, doc.get("objective", "WorstCaseSim"))


@dataclass
class OptResult:
    family: str
    objective: str
    best_params: dict
    best_time: float
    evaluations: int
    skipped: int = 0
    trace: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "objective": self.objective,
            "best_params": dict(self.best_params),
            "best_time": self.best_time,
            "evaluations": self.evaluations,
            "skipped": self.skipped,
            "trace": list(self.trace),
        }


# -- objectives --------------------------------------------------------------------


def objective(family: Family, params: dict, kind: str = "WorstCaseSim",
              samples_per_unit: int = 10000) -> float:
    """Objective value at ``params``; inf when the parameters are infeasible."""
    try:
        if kind == "CriticalFormulaMax":
            return _formula_max(family, params)
        return worst_case(family.build(params), samples_per_unit).worst_time
    except ProtocolError:
        return math.inf


def _formula_max(family: Family, params: dict) -> float:
    if family.name == "square_detour":
        proto = family.build(params)  # feasibility check only
        return float(square_formula_max(proto.spec.p, proto.spec.q))
    if family.name == "triangle_detour1":
        return critical_times_detour1(params["z"]).max_time
    spec = family.build(params).spec
    if family.name == "triangle_detour2":
        return max(spec.t1, spec.t2, spec.t3)
    return spec.worst_time


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get("EVACSIM_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


# -- grid search -------------------------------------------------------------------


def grid_search(space: ParamSpace, family: Family, samples_per_unit: int = 10000,
                threads: Optional[int] = None) -> OptResult:
    """Exhaustive grid; ties go to the lexicographically smallest parameter vector."""
    if set(space.names) != set(family.param_names):
        raise OptimizerError(f"{family.name} takes parameters {family.param_names}, got {space.names}")
    grids = [a.values() for a in space.axes]
    mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, len(grids))

    def run(chunk: np.ndarray) -> np.ndarray:
        return np.array([
            objective(family, dict(zip(space.names, map(float, row))), space.objective,
                      samples_per_unit)
            for row in chunk
        ])

    n = resolve_threads(threads)
    chunks = np.array_split(mesh, max(1, min(n * 4, len(mesh))))
    if n == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            parts = list(pool.map(run, chunks))
    vals = np.concatenate(parts)
    ok = np.isfinite(vals)
    if not ok.any():
        raise OptimizerError("no feasible grid cell")
    # lexsort: last key is primary; ties fall back to params in axis order
    order = np.lexsort(tuple(mesh[:, j] for j in reversed(range(mesh.shape[1]))) + (np.where(ok, vals, np.inf),))
    best = order[0]
    params = dict(zip(space.names, map(float, mesh[best])))
    return OptResult(family.name, space.objective, params, float(vals[best]),
                     evaluations=int(len(mesh)), skipped=int((~ok).sum()),
                     trace=[{"params": params, "time": float(vals[best])}])


# -- refinement --------------------------------------------------------------------


def _golden_min(f, a: float, b: float, tol: float) -> tuple[float, float, int]:
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    used = 2
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        used += 1
    return (c, fc, used) if fc <= fd else (d, fd, used)


def refine(family: Family, start: dict, tol: float = 1e-6, objective_kind: str = "WorstCaseSim",
           step: float = 0.02, samples_per_unit: int = 10000, max_sweeps: int = 200) -> OptResult:
    """Coordinate descent with golden line searches and pattern moves.

    Each sweep line-searches along every coordinate, then along the pairwise
    diagonals, over a window of half-width ``step`` around the incumbent. A
    move is kept only if it lowers the objective. Minimax objectives have
    ridges where two candidate times are equal and no single coordinate can
    descend; the diagonals and a final pattern move along the sweep's total
    displacement let the search slide along them. The window shrinks when a
    sweep gains nothing and the search stops once it is below ``tol``.
    """
    names = family.param_names
    if set(start) != set(names):
        raise OptimizerError(f"{family.name} takes parameters {names}, got {tuple(start)}")
    x = np.array([float(start[n]) for n in names])
    n = len(names)
    dirs = [np.eye(n)[i] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for sgn in (1.0, -1.0):
                d = np.zeros(n)
                d[i], d[j] = 1.0, sgn
                dirs.append(d / math.sqrt(2.0))
    evals = 0

    def f(v: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return objective(family, dict(zip(names, map(float, v))), objective_kind, samples_per_unit)

    fx = f(x)
    if not math.isfinite(fx):
        raise OptimizerError("start parameters are infeasible")
    trace = [{"params": dict(zip(names, x.tolist())), "time": fx}]
    h = step
    for _ in range(max_sweeps):
        x0, f0 = x.copy(), fx
        for d in dirs:
            base = x.copy()
            t, ft, _ = _golden_min(lambda t: f(base + t * d), -h, h, tol / 4)
            if ft < fx:
                x, fx = base + t * d, ft
        move = x - x0
        if np.any(move != 0.0):
            # pattern direction: search along x0 + a*move for a in [1, 4]
            a, fa, _ = _golden_min(lambda a: f(x0 + a * move), 1.0, 4.0,
                                   tol / max(float(np.max(np.abs(move))), tol))
            if fa < fx:
                x, fx = x0 + a * move, fa
        trace.append({"params": dict(zip(names, x.tolist())), "time": fx})
        change = float(np.max(np.abs(x - x0)))
        if change < tol or f0 - fx <= 0.0:
            if h <= tol:
                break
            h = max(h / 4.0, tol)
        else:
            h = max(min(h, 4.0 * change), tol)
    return OptResult(family.name, objective_kind, dict(zip(names, x.tolist())), fx,
                     evaluations=evals, trace=trace)


# -- appendix replay ---------------------------------------------------------------


@dataclass(frozen=True)
class AppendixResult:
    time: float
    p: float
    q: float
    cells: int
    skipped: int

    def lines(self) -> list[str]:
        return [
            f"The evacuation time is: {self.time!r}",
            f"The value of p is: {self.p!r}",
            f"The value of q is: {self.q!r}",
        ]


def appendix_replay(p_lo: float = 0.1, p_hi: float = 0.2, q_lo: float = 0.2, q_hi: float = 0.8,
                    step: float = 0.00005) -> AppendixResult:
    """Replay the published square grid with its exact float accumulation.

    Both loop counters are advanced by repeated addition, as in the original
    listing, so the visited (p, q) values match it bit for bit. A whole row of
    q values is evaluated at once; the first strict improvement wins.
    """
    qs = []
    q = q_lo
    while q < q_hi:
        qs.append(q)
        q += step
    qs = np.array(qs)
    best, bp, bq = 5.0, p_lo, q_lo
    cells = skipped = 0
    p = p_lo
    with np.errstate(invalid="ignore"):
        while p < p_hi:
            row = square_formula_max(np.full(qs.shape, p), qs)
            cells += row.size
            bad = np.isnan(row)
            skipped += int(bad.sum())
            row = np.where(bad, np.inf, row)
            j = int(np.argmin(row))
            if row[j] < best:
                best, bp, bq = float(row[j]), p, float(qs[j])
            p += step
    return AppendixResult(best, bp, bq, cells, skipped)


# -- config ------------------------------------------------------------------------


def run_config(doc: dict) -> OptResult:
    """Run an optimization described by a JSON document.

    Keys: ``family``, optional ``shape`` and ``k``, ``space`` (``params`` map of
    ``{lo, hi, step}`` plus ``objective``), optional ``refine`` (``tol``),
    ``samples_per_unit`` and ``threads``.
    """
    fam = Family.make(doc["family"], doc.get("shape"), doc.get("k"))
    space = ParamSpace.from_dict(doc["space"])
    spu = int(doc.get("samples_per_unit", 10000))
    res = grid_search(space, fam, spu, doc.get("threads"))
    ref = doc.get("refine")
    if ref is not None:
        r = refine(fam, res.best_params, float(ref.get("tol", 1e-6)), space.objective,
                   step=float(ref.get("step", min(a.step for a in space.axes))),
                   samples_per_unit=spu)
        r.evaluations += res.evaluations
        r.skipped = res.skipped
        r.trace = res.trace + r.trace
        return r
    return res


def load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
