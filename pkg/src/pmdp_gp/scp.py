"""Sequential convex programming over the signomial program.

Each step solves a local geometric program in which every equality
constraint is replaced by the ratio of monomial approximations of its two
sides, restricted to a multiplicative trust region around the current
iterate. Candidates are normalized, evaluated exactly, and accepted only if
they satisfy all specifications and improve the exact objective.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

from .encoder import (Encoding, ExactPoint, LiftingMap, bound_constraints, exact_point, lifted_constraints,
                      to_gp_constraint)
from .expressions import Shape, Signomial, Var, VarKind
from .gp_solver import MAX_ITERATIONS, OPTIMAL, SolverOptions, solve
from .model import ModelError, normalize_solution
from .programs import Constraint, GeometricProgram, GPConstraint, SignomialProgram

log = logging.getLogger(__name__)

SLACK = "_slack"


def monomial_approx(f: Signomial, u: Mapping[str, float]) -> Signomial:
    """Monomial that matches ``f`` in value and gradient at ``u``.

    ``f_hat = f(u) * prod (x_i / u_i) ** a_i`` with ``a_i = u_i / f(u) * df/dx_i (u)``.
    """
    if f.is_monomial or f.is_constant:
        return f
    vals = []
    for key, c in f.items():
        v = c
        for x, e in key:
            v *= u[x] ** e
        vals.append((key, v))
    fu = sum(v for _, v in vals)
    if not fu > 0:
        raise ValueError(f"{f} is not positive at the expansion point")
    exps: dict[str, float] = {}
    for key, v in vals:
        for x, e in key:
            exps[x] = exps.get(x, 0.0) + e * v / fu
    coef = fu
    for x, a in exps.items():
        coef /= u[x] ** a
    return Signomial.term(coef, {x: a for x, a in exps.items() if a != 0.0})


@dataclass(frozen=True)
class TrustRegion:
    """``center / t <= x <= t * center`` for the listed variables."""

    center: Mapping[str, float]
    t: float

    def __post_init__(self):
        if not self.t > 1:
            raise ValueError("trust region factor must exceed 1")

    def constraints(self, variables: Iterable[str]) -> list[GPConstraint]:
        out = []
        for v in variables:
            c = self.center[v]
            out.append(GPConstraint(Signomial.term(1.0 / (self.t * c), {v: 1.0}), "trust", (v, "hi")))
            out.append(GPConstraint(Signomial.term(c / self.t, {v: -1.0}), "trust", (v, "lo")))
        return out

    def contains(self, x: Mapping[str, float], variables: Iterable[str], tol: float = 1e-9) -> bool:
        for v in variables:
            r = x[v] / self.center[v]
            if r > self.t * (1 + tol) or r < (1 - tol) / self.t:
                return False
        return True


@dataclass(frozen=True)
class ScpOptions:
    eps: float = 1e-3
    t0: float = 1.5
    t_expand: float = 1.25
    t_max: float = 4.0
    t_min: float = 1.0001
    improve_ratio: float = 0.01
    max_iters: int = 50
    solver: SolverOptions = SolverOptions()
    timeout: float | None = None


@dataclass
class TraceRow:
    k: int
    objective: float
    t: float
    accepted: bool
    solver_iterations: int
    wall_time: float
    status: str


@dataclass
class ScpState:
    k: int
    point: ExactPoint
    objective: float
    t: float
    history: list[float] = field(default_factory=list)
    trace: list[TraceRow] = field(default_factory=list)
    status: str = "running"

    @property
    def iterations(self) -> int:
        """Outer steps: accepted moves plus a final unsuccessful step, if any.

        Rejected solves that only shrink the trust region are retries of the
        same step; ``solves`` counts every local program.
        """
        accepted = sum(r.accepted for r in self.trace)
        return accepted + (1 if self.trace and not self.trace[-1].accepted else 0)

    @property
    def solves(self) -> int:
        return len(self.trace)

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "objective", "t", "accepted", "solver_iters", "wall_time", "status"])
            for r in self.trace:
                w.writerow([r.k, repr(r.objective), repr(r.t), int(r.accepted), r.solver_iterations,
                            f"{r.wall_time:.6f}", r.status])


def trust_variables(sgp: SignomialProgram, lifting: LiftingMap) -> list[str]:
    enc: Encoding = sgp.context
    return list(enc.parameters) + list(enc.sched.values())


def build_local_gp(sgp: SignomialProgram, lifting: LiftingMap, u: Mapping[str, float], tr: TrustRegion,
                   extra: Iterable[GPConstraint] = (), extra_eq: Iterable[GPConstraint] = (),
                   objective: Signomial | None = None, slack: str | None = None) -> GeometricProgram:
    """Local GP around ``u``: inequalities kept, equalities replaced by monomial approximations.

    With ``slack`` set, every threshold is scaled by that extra variable.
    """
    enc: Encoding = sgp.context
    obj = sgp.objective if objective is None else objective
    if obj.is_zero:
        obj = Signomial.constant(1.0)
    if obj.classify() is Shape.SIGNOMIAL:
        raise ValueError(f"objective {obj} is not a posynomial")
    ineqs, eqs = [], []
    seen = set()
    for c in lifted_constraints(sgp, lifting):
        if c.sense == "<=":
            if slack and c.tag == "threshold":
                c = Constraint(c.lhs, c.rhs * Signomial.var(slack), "<=", c.tag, c.key)
            res = to_gp_constraint(c)
            if res is not None:
                ineqs.append(res[1])
            continue
        expr = monomial_approx(c.lhs, u) / monomial_approx(c.rhs, u)
        if expr.is_constant or expr in seen:
            continue
        seen.add(expr)
        eqs.append(GPConstraint(expr, c.tag, c.key))
    variables = ([Var(p, VarKind.PARAMETER) for p in enc.parameters] + lifting.variables()
                 + enc.scheduler_variables() + enc.state_variables())
    if slack:
        variables.append(Var(slack, VarKind.LIFTING))
    ineqs += bound_constraints(variables, center=u)
    ineqs += tr.constraints(trust_variables(sgp, lifting))
    ineqs += list(extra)
    eqs += list(extra_eq)
    return GeometricProgram(obj, ineqs, eqs, dict(sgp.constants), variables).validate()


def evaluator(sgp: SignomialProgram, lifting: LiftingMap) -> Callable[[Mapping[str, float]], ExactPoint]:
    """Map raw solver values to a normalized, exactly evaluated point."""
    enc: Encoding = sgp.context

    def evaluate(raw: Mapping[str, float]) -> ExactPoint:
        u, sched = normalize_solution(raw, enc.model, enc.sched, lifting.groups())
        return exact_point(sgp, lifting, u, sched)
    return evaluate


def run(sgp: SignomialProgram, lifting: LiftingMap, start: ExactPoint, opts: ScpOptions = ScpOptions(),
        extra: Iterable[GPConstraint] = (), extra_eq: Iterable[GPConstraint] = ()) -> ScpState:
    """Improve a feasible start point; every accepted iterate satisfies all specifications."""
    if not start.satisfied:
        raise ValueError("SCP needs a feasible start point")
    return _iterate(sgp, lifting, start, opts, list(extra), list(extra_eq), evaluator(sgp, lifting),
                    value=lambda p: p.objective, admissible=lambda p: p.satisfied,
                    done=lambda p: False, slack=None)


def restore(sgp: SignomialProgram, lifting: LiftingMap, start: ExactPoint, opts: ScpOptions = ScpOptions(),
            extra: Iterable[GPConstraint] = (), extra_eq: Iterable[GPConstraint] = ()) -> ScpState:
    """Drive a well-defined but violating point into the feasible set.

    Minimizes a common scale factor on all thresholds with the same local
    programs; stops once the exact check passes.
    """
    enc: Encoding = sgp.context
    bounds = [s.threshold * (1.0 - enc.margin) for s in enc.specs]

    def ratio(p: ExactPoint) -> float:
        r = 0.0
        for a, b in zip(p.achieved, bounds):
            r = max(r, a / b if b > 0 else (math.inf if a > 0 else 0.0))
        return max(r, 1e-6)

    base = evaluator(sgp, lifting)

    def evaluate(raw):
        p = base(raw)
        p.values[SLACK] = ratio(p)
        return p

    start.values[SLACK] = ratio(start)
    # any accepted improvement counts as progress here; only rejections shrink the region
    opts = replace(opts, eps=0.0, improve_ratio=0.0)
    return _iterate(sgp, lifting, start, opts, list(extra), list(extra_eq), evaluate,
                    value=ratio, admissible=lambda p: True, done=lambda p: p.satisfied, slack=SLACK)


def _iterate(sgp, lifting, start, opts: ScpOptions, extra, extra_eq, evaluate, value, admissible, done, slack):
    t0 = time.perf_counter()
    f = value(start)
    state = ScpState(0, start, f, opts.t0, [f])
    if done(start):
        state.status = "converged"
        return state
    objective = Signomial.var(slack) if slack else None
    t = opts.t0
    for k in range(1, opts.max_iters + 1):
        if opts.timeout is not None and time.perf_counter() - t0 > opts.timeout:
            state.status = "timeout"
            return state
        tick = time.perf_counter()
        point = state.point
        tr = TrustRegion(point.values, t)
        gp = build_local_gp(sgp, lifting, point.values, tr, extra, extra_eq, objective, slack)
        res = solve(gp, opts.solver, start=point.values)
        accepted, cand_value, predicted_gain = False, math.nan, math.inf
        if res.status in (OPTIMAL, MAX_ITERATIONS) and res.x:
            predicted_gain = f - (res.objective if not slack else res.x[slack])
            try:
                cand = evaluate(res.x)
            except (ModelError, ValueError, ZeroDivisionError) as exc:
                log.debug("candidate rejected: %s", exc)
                cand = None
            if cand is not None:
                cand_value = value(cand)
                if admissible(cand) and cand_value < f:
                    accepted = True
        state.trace.append(TraceRow(k, cand_value, t, accepted, res.iterations, time.perf_counter() - tick,
                                    res.status))
        log.debug("scp k=%d f=%.10g cand=%.10g t=%.5f accepted=%s", k, f, cand_value, t, accepted)
        if accepted:
            gain = f - cand_value
            rel = gain / max(abs(f), 1e-300)
            state.point, state.objective, state.k = cand, cand_value, k
            state.history.append(cand_value)
            f = cand_value
            t = min(t * opts.t_expand, opts.t_max) if rel >= opts.improve_ratio else max(1 + (t - 1) / 2, opts.t_min)
            if done(cand) or gain < opts.eps:
                state.status = "converged"
                state.t = t
                return state
        else:
            if res.status in (OPTIMAL, MAX_ITERATIONS) and res.x and predicted_gain < opts.eps and not slack:
                state.status = "converged"
                state.t = t
                return state
            if t <= opts.t_min * (1 + 1e-12):
                state.status = "trust-region-collapsed"
                state.t = t
                return state
            t = max(1 + (t - 1) / 2, opts.t_min)
        state.t = t
    state.status = "max-iterations"
    return state
