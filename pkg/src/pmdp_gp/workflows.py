"""The four user tasks: feasibility, optimization, repair and region certification."""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .encoder import (ExactPoint, GPContext, Objective, Region, compute_lifting, convexify, encode_repair,
                      encode_sgp, exact_point, region_constraints)
from .expressions import Signomial
from .gp_solver import INFEASIBLE, OPTIMAL, SolverOptions, phase1, solve, to_convex
from .mc_analysis import check
from .model import PMDP, ModelError, Scheduler, Specification, induce, instantiate
from .programs import GPConstraint
from . import scp

FEASIBLE = "feasible"
UNKNOWN = "unknown"
UNSAFE = "UNSAFE"
REGION_UNKNOWN = "UNKNOWN"

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


@dataclass
class SpecResult:
    spec: str
    achieved: float
    satisfied: bool


@dataclass
class ResultReport:
    command: str
    status: str
    valuation: dict[str, float] = field(default_factory=dict)
    scheduler: dict[str, dict[str, float]] = field(default_factory=dict)
    specs: list[SpecResult] = field(default_factory=list)
    objective: float | None = None
    timings: dict[str, float] = field(default_factory=dict)
    scp: dict | None = None
    repair_cost: float | None = None
    message: str = ""
    region: dict | None = None

    @property
    def exit_code(self) -> int:
        if self.status in (FEASIBLE, OPTIMAL, REGION_UNKNOWN):
            return EXIT_OK
        if self.status in (INFEASIBLE, UNSAFE):
            return EXIT_INFEASIBLE
        return EXIT_NUMERICAL

    def to_dict(self) -> dict:
        d = asdict(self)
        d["exit_code"] = self.exit_code
        return _jsonable(d)

    def summary(self) -> str:
        lines = [f"{self.command}: {self.status}"]
        if self.message:
            lines.append(f"  {self.message}")
        for k, v in sorted(self.valuation.items()):
            lines.append(f"  {k} = {v:.10g}")
        for r in self.specs:
            mark = "ok" if r.satisfied else "VIOLATED"
            lines.append(f"  {r.spec}: {r.achieved:.10g} [{mark}]")
        if self.objective is not None:
            lines.append(f"  objective = {self.objective:.10g}")
        if self.repair_cost is not None:
            lines.append(f"  repair cost = {self.repair_cost:.10g}")
        if self.scp:
            lines.append(f"  scp: {self.scp['iterations']} iterations ({self.scp['status']})")
        return "\n".join(lines)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, (np.floating, np.integer)):
        return _jsonable(x.item())
    return x


@dataclass(frozen=True)
class RunOptions:
    solver: SolverOptions = SolverOptions()
    eps: float = 1e-3
    max_iters: int = 50
    seed: int = 0
    restarts: int = 0
    timeout: float | None = None

    def scp_options(self) -> scp.ScpOptions:
        return scp.ScpOptions(eps=self.eps, max_iters=self.max_iters, solver=self.solver, timeout=self.timeout)


def recheck(m: PMDP, specs: Sequence[Specification], valuation, scheduler: Scheduler) -> list[SpecResult]:
    """Exact values of all specifications under the reported valuation and scheduler."""
    mc = induce(instantiate(m, valuation), scheduler)
    return [SpecResult(str(r.spec), r.value, r.satisfied) for r in check(mc, specs)]


def _scheduler_dict(m: PMDP, sched: Scheduler) -> dict[str, dict[str, float]]:
    out = {}
    for s in range(m.n_states):
        acts = m.enabled(s)
        if len(acts) > 1:
            out[m.state_name(s)] = {a: sched[(s, a)] for a in acts}
    return out


def _fill(report: ResultReport, m: PMDP, specs, point: ExactPoint):
    report.valuation = {str(k): float(v) for k, v in point.params.items()}
    report.scheduler = _scheduler_dict(m, point.scheduler)
    report.specs = recheck(m, specs, point.params, point.scheduler)


def _region_extra(gp_ctx: GPContext, region: Region | None):
    if region is None:
        return [], []
    region.validate(gp_ctx.encoding.source.parameters)
    return region_constraints(region, gp_ctx.lifting)


# -- feasibility ------------------------------------------------------------------

@dataclass
class _Start:
    status: str
    point: ExactPoint | None
    sgp: object
    lifting: object
    extra: tuple
    message: str = ""
    restored: bool = False


def _feasible_start(m, specs, objective, region, opts: RunOptions, timings) -> _Start:
    t = time.perf_counter()
    sgp = encode_sgp(m, specs, objective)
    lifting = compute_lifting(sgp)
    gp = convexify(sgp, lifting)
    extra_ineq, extra_eq = _region_extra(gp.context, region)
    gp = gp.with_constraints(extra_ineq, extra_eq)
    timings["encode"] = time.perf_counter() - t
    t = time.perf_counter()
    res = solve(gp, opts.solver)
    timings["gp"] = time.perf_counter() - t
    extra = (extra_ineq, extra_eq)
    if res.status == INFEASIBLE:
        return _Start(INFEASIBLE, None, sgp, lifting, extra, "geometric program is infeasible")
    if res.status != OPTIMAL:
        return _Start(UNKNOWN, None, sgp, lifting, extra, f"solver status {res.status}: {res.message}")
    evaluate = scp.evaluator(sgp, lifting)
    try:
        point = evaluate(res.x)
    except ModelError as exc:
        return _Start(UNKNOWN, None, sgp, lifting, extra, f"normalization failed: {exc}")
    if point.satisfied and (region is None or region.contains(point.params, 1e-9)):
        return _Start(FEASIBLE, point, sgp, lifting, extra)
    t = time.perf_counter()
    state = scp.restore(sgp, lifting, point, opts.scp_options(), extra_ineq, extra_eq)
    timings["restore"] = time.perf_counter() - t
    if state.point.satisfied and (region is None or region.contains(state.point.params, 1e-9)):
        return _Start(FEASIBLE, state.point, sgp, lifting, extra, "restored after normalization", True)
    return _Start(UNKNOWN, state.point, sgp, lifting, extra,
                  "normalized solution violates the specifications and restoration failed")


def cmd_feasible(m: PMDP, specs: Sequence[Specification], region: Region | None = None,
                 opts: RunOptions = RunOptions()) -> ResultReport:
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    start = _feasible_start(m, specs, None, region, opts, timings)
    report = ResultReport("feasible", start.status, message=start.message, timings=timings)
    if start.point is not None:
        _fill(report, m, specs, start.point)
    timings["total"] = time.perf_counter() - t0
    return report


# -- optimization -----------------------------------------------------------------

def _random_start(sgp, lifting, rng: np.random.Generator):
    enc = sgp.context
    m = enc.model
    for _ in range(20):
        u = {p: float(rng.uniform(0.05, 0.95)) for p in m.parameters}
        try:
            mdp = instantiate(m, u)
        except ModelError:
            continue
        if not mdp.well_defined:
            continue
        w = {}
        for s in range(m.n_states):
            acts = m.enabled(s)
            x = rng.dirichlet(np.ones(len(acts))) if len(acts) > 1 else np.ones(1)
            x = np.maximum(x, 1e-3)
            x /= x.sum()
            for a, v in zip(acts, x):
                w[(s, a)] = float(v)
        try:
            point = exact_point(sgp, lifting, u, Scheduler(w))
        except (ModelError, ArithmeticError):
            continue
        if point.satisfied:
            return point
    return None


def cmd_optimize(m: PMDP, specs: Sequence[Specification], objective: Objective | Signomial,
                 region: Region | None = None, opts: RunOptions = RunOptions(), trace: str | None = None
                 ) -> ResultReport:
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    start = _feasible_start(m, specs, objective, region, opts, timings)
    report = ResultReport("optimize", start.status, message=start.message, timings=timings)
    if start.status != FEASIBLE:
        if start.point is not None:
            _fill(report, m, specs, start.point)
        timings["total"] = time.perf_counter() - t0
        return report
    t = time.perf_counter()
    starts = [start.point]
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.restarts):
        p = _random_start(start.sgp, start.lifting, rng)
        if p is not None and (region is None or region.contains(p.params)):
            starts.append(p)
    best = None
    for p in starts:
        state = scp.run(start.sgp, start.lifting, p, opts.scp_options(), *start.extra)
        if best is None or state.objective < best.objective:
            best = state
    timings["scp"] = time.perf_counter() - t
    if trace:
        best.write_trace(trace)
    report.status = OPTIMAL
    _fill(report, m, specs, best.point)
    report.objective = _objective_value(objective, best.point)
    report.scp = {"iterations": best.iterations, "solves": best.solves, "status": best.status,
                  "history": best.history, "starts": len(starts)}
    timings["total"] = time.perf_counter() - t0
    return report


def _objective_value(objective, point: ExactPoint) -> float:
    """Objective in user terms: the probability itself for maximize-reach."""
    if isinstance(objective, Objective) and objective.kind == "maximize-reach":
        return 1.0 / point.objective if point.objective > 0 else 0.0
    return point.objective


# -- repair -----------------------------------------------------------------------

def cmd_repair(m: PMDP, specs: Sequence[Specification], changeable: Iterable[tuple[int, str, int]],
               cost_bound: float | None = None, opts: RunOptions = RunOptions(), trace: str | None = None
               ) -> ResultReport:
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    changeable = list(changeable)
    base = recheck(m, specs, {}, Scheduler.uniform(m)) if m.is_pmc else None
    report = ResultReport("repair", UNKNOWN, timings=timings)
    if base is not None and all(r.satisfied for r in base):
        report.status = OPTIMAL
        report.specs = base
        report.repair_cost = 0.0
        report.message = "specifications already hold; identity repair"
        return report
    if not changeable:
        report.status = INFEASIBLE
        report.message = "no changeable transitions"
        report.specs = base or []
        return report
    if cost_bound is not None and cost_bound <= 0:
        report.status = INFEASIBLE
        report.message = "cost bound 0 admits no change"
        report.specs = base or []
        return report

    t = time.perf_counter()
    pm, sgp = encode_repair(m, specs, changeable)
    lifting = compute_lifting(sgp)
    gp = convexify(sgp, lifting)
    info = sgp.context.repair
    if cost_bound is not None:
        bound_con = _cost_bound_constraint(sgp, cost_bound)
        if bound_con is None:
            report.message = "cost bound too small for the conservative posynomial bound"
            report.specs = base or []
            return report
        gp = gp.with_constraints([bound_con])
    timings["encode"] = time.perf_counter() - t
    t = time.perf_counter()
    res = solve(gp, opts.solver)
    timings["gp"] = time.perf_counter() - t
    if res.status == INFEASIBLE:
        report.status = INFEASIBLE
        report.message = "geometric program is infeasible"
        return report
    if res.status != OPTIMAL:
        report.message = f"solver status {res.status}"
        return report
    evaluate = scp.evaluator(sgp, lifting)
    try:
        point = evaluate(res.x)
    except ModelError as exc:
        report.message = f"normalization failed: {exc}"
        return report
    if not point.satisfied:
        state = scp.restore(sgp, lifting, point, opts.scp_options())
        point = state.point
    if not point.satisfied:
        report.message = "no feasible repair found"
        _fill(report, pm, specs, point)
        report.repair_cost = info.cost(point.params)
        return report
    if cost_bound is None:
        t = time.perf_counter()
        state = scp.run(sgp, lifting, point, opts.scp_options())
        timings["scp"] = time.perf_counter() - t
        if trace:
            state.write_trace(trace)
        point = state.point
        report.scp = {"iterations": state.iterations, "solves": state.solves, "status": state.status,
                      "history": state.history}
    _fill(report, pm, specs, point)
    report.repair_cost = info.cost(point.params)
    report.objective = point.objective
    report.status = OPTIMAL if cost_bound is None else FEASIBLE
    if cost_bound is not None and report.repair_cost > cost_bound:
        report.status = UNKNOWN
        report.message = f"repair cost {report.repair_cost:.6g} exceeds the bound after normalization"
    report.timings["total"] = time.perf_counter() - t0
    return report


def _cost_bound_constraint(sgp, bound: float) -> GPConstraint | None:
    """Posynomial constraint that implies ``repair cost <= bound``.

    The cost is ``sum a^2 r^2 - 2 sum a^2 r + sum a^2``. Within a row the
    changeable mass ``sum a r`` is fixed, so ``sum a^2 r`` is at least the
    smallest base probability of the row times that mass. Substituting this
    lower bound gives ``sum a^2 r^2 <= bound + C``, exact when each row's
    changeable entries share one base probability. Returns None if the
    right-hand side is not positive.
    """
    info = sgp.context.repair
    rows: dict[tuple[int, str], list[int]] = {}
    for i, (s, a, _t) in enumerate(info.changeable):
        rows.setdefault((s, a), []).append(i)
    offset = 0.0
    for idx in rows.values():
        a = [info.base[i] for i in idx]
        offset += 2.0 * min(a) * sum(a) - sum(x * x for x in a)
    rhs = bound + offset
    if rhs <= 0:
        return None
    expr = Signomial()
    for a, n in zip(info.base, info.names):
        expr = expr + Signomial.term(a * a / rhs, {n: 2.0})
    return GPConstraint(expr, "cost-bound")


# -- regions ----------------------------------------------------------------------

def certify_region(m: PMDP, specs: Sequence[Specification], region: Region,
                   opts: RunOptions = RunOptions()) -> ResultReport:
    """UNSAFE when the relaxed program restricted to the region is infeasible."""
    t0 = time.perf_counter()
    sgp = encode_sgp(m, specs, margin=0.0)
    lifting = compute_lifting(sgp)
    gp = convexify(sgp, lifting)
    region.validate(m.parameters)
    ineqs, eqs = region_constraints(region, lifting)
    gp = gp.with_constraints(ineqs, eqs)
    res = phase1(to_convex(gp), opts.solver)
    report = ResultReport("region", REGION_UNKNOWN,
                          region={"box": {k: list(v) for k, v in region.box.items()},
                                  "linear": [[dict(c), d] for c, d in region.linear]})
    if res.feasible is False:
        report.status = UNSAFE
        report.message = f"phase 1 certified infeasibility (min slack {res.slack:.3g})"
    elif res.feasible is None:
        report.message = f"phase 1 inconclusive ({res.status})"
    else:
        report.message = "a relaxed feasible point exists"
    report.timings = {"total": time.perf_counter() - t0}
    return report


def cmd_region(m: PMDP, specs: Sequence[Specification], regions: Sequence[Region] | Region,
               opts: RunOptions = RunOptions(), workers: int | None = None) -> list[ResultReport]:
    if isinstance(regions, Region):
        regions = [regions]
    regions = list(regions)
    if len(regions) <= 1 or workers == 1:
        return [certify_region(m, specs, r, opts) for r in regions]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: certify_region(m, specs, r, opts), regions))
