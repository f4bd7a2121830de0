"""Encoding of parameter synthesis problems as signomial and geometric programs.

The signomial program has one probability (or cost) variable per relevant
state and specification target, one scheduler variable per enabled action at
states with a real choice, and the model parameters. Bellman equations are
equalities; thresholds are inequalities at the initial state.

``convexify`` turns it into a geometric program: signomial transition
entries are replaced by lifted variables, equalities are relaxed to
inequalities in ``posynomial / monomial <= 1`` form, and the objective becomes
the sum of reciprocals of the parameter, lifted and scheduler variables, which
drives the relaxed stochasticity constraints tight at the optimum.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .expressions import Shape, Signomial, Var, VarKind
from .mc_analysis import check, expected_cost, reachability
from .model import (PMDP, LiftGroup, ModelError, Scheduler, Specification, forward_reachable, induce,
                    instantiate, prob0, prob1, prob1_exists)
from .programs import Constraint, GeometricProgram, GPConstraint, SignomialProgram

THRESHOLD_MARGIN = 1e-6
VAR_FLOOR = 1e-8
VAR_CEILING = 1e8
REPAIR_REGULARIZATION = 1e-3


class EncodingError(ValueError):
    pass


class ShapeError(EncodingError):
    """A transition row has more than one non-posynomial entry."""

    def __init__(self, state: int, action: str, detail: str):
        self.state, self.action = state, action
        super().__init__(f"row ({state}, {action}): {detail}")


class UnsupportedRegionError(EncodingError):
    pass


@dataclass(frozen=True)
class Objective:
    """``kind`` is one of "maximize-reach", "minimize-reach", "minimize-cost"."""

    kind: str
    target: frozenset
    label: str | None = None

    def __post_init__(self):
        if self.kind not in ("maximize-reach", "minimize-reach", "minimize-cost"):
            raise EncodingError(f"unknown objective kind {self.kind!r}")
        object.__setattr__(self, "target", frozenset(int(s) for s in self.target))

    @property
    def family_kind(self) -> str:
        return "expcost" if self.kind == "minimize-cost" else "reach"


@dataclass
class Family:
    """Probability or cost values of all states for one (kind, target) pair."""

    index: int
    kind: str
    target: frozenset
    values: dict[int, Signomial] = field(default_factory=dict)
    names: dict[int, str] = field(default_factory=dict)
    specs: list[Specification] = field(default_factory=list)

    def value(self, s: int) -> Signomial:
        return self.values.get(s, Signomial())


@dataclass
class RepairInfo:
    changeable: list[tuple[int, str, int]]
    base: list[float]
    names: list[str]
    weight: float

    def cost(self, u: Mapping[str, float]) -> float:
        """Sum of squared changes of the transition probabilities."""
        return sum((a * u[n] - a) ** 2 for a, n in zip(self.base, self.names))


@dataclass
class Encoding:
    source: PMDP
    model: PMDP
    states: list[int]
    families: list[Family]
    sched: dict[tuple[int, str], str]
    specs: list[Specification]
    parameters: list[str]
    objective: Objective | Signomial | None = None
    margin: float = THRESHOLD_MARGIN
    infeasible: str | None = None
    repair: RepairInfo | None = None

    @property
    def rows(self) -> list[tuple[int, str]]:
        return [(s, a) for s in self.states for a in self.model.enabled(s)]

    def sched_expr(self, s: int, a: str) -> Signomial:
        name = self.sched.get((s, a))
        return Signomial.var(name) if name else Signomial.constant(1.0)

    def family(self, kind: str, target) -> Family:
        target = frozenset(target)
        for f in self.families:
            if f.kind == kind and f.target == target:
                return f
        raise KeyError((kind, target))

    def state_variables(self) -> list[Var]:
        out = []
        for f in self.families:
            kind = VarKind.PROBABILITY if f.kind == "reach" else VarKind.COST
            out += [Var(n, kind) for _, n in sorted(f.names.items())]
        return out

    def scheduler_variables(self) -> list[Var]:
        return [Var(n, VarKind.SCHEDULER) for n in self.sched.values()]


# -- preprocessing ------------------------------------------------------------

def _prune_for_costs(m: PMDP, goals: list[frozenset]) -> tuple[PMDP, str | None]:
    """Keep only actions under which every cost goal is reached almost surely."""
    current = m
    while True:
        changed = False
        for goal in goals:
            states, acts = prob1_exists(current, goal)
            if current.initial not in states:
                return current, f"initial state cannot reach goal {sorted(goal)[:5]} almost surely"
            keep = {s: a for s, a in acts.items() if len(a) < len(current.enabled(s))}
            if keep:
                current = current.restrict_actions(keep)
                changed = True
        if not changed:
            return current, None


def encode_sgp(m: PMDP, specs: Iterable[Specification], objective: Objective | Signomial | None = None,
               margin: float = THRESHOLD_MARGIN) -> SignomialProgram:
    """Signomial program whose feasible points are the satisfying (scheduler, valuation) pairs.

    Thresholds are tightened by the relative ``margin`` so that solutions stay
    sound after normalization; pass ``margin=0`` for exact certification.
    """
    specs = list(specs)
    if not specs and objective is None:
        raise EncodingError("no specifications given")
    for sp_ in specs:
        bad = [s for s in sp_.target if not 0 <= s < m.n_states]
        if bad:
            raise EncodingError(f"specification {sp_} targets unknown states {bad}")
    if isinstance(objective, Objective):
        bad = [s for s in objective.target if not 0 <= s < m.n_states]
        if bad:
            raise EncodingError(f"objective targets unknown states {bad}")
    for p in m.parameters:
        if p.startswith("_"):
            raise EncodingError(f"parameter names starting with '_' are reserved ({p})")

    keys: list[tuple[str, frozenset]] = []
    for sp_ in specs:
        if (sp_.kind, sp_.target) not in keys:
            keys.append((sp_.kind, sp_.target))
    if isinstance(objective, Objective) and (objective.family_kind, objective.target) not in keys:
        keys.append((objective.family_kind, objective.target))

    goals = [t for k, t in keys if k == "expcost"]
    model, reason = _prune_for_costs(m, goals) if goals else (m, None)
    states = sorted(forward_reachable(model))

    sched: dict[tuple[int, str], str] = {}
    for s in states:
        acts = model.enabled(s)
        if len(acts) > 1:
            for i, a in enumerate(acts):
                sched[(s, a)] = f"_sig_{s}_{i}"

    families = []
    for idx, (kind, target) in enumerate(keys):
        fam = Family(idx, kind, target, specs=[x for x in specs if (x.kind, x.target) == (kind, target)])
        if kind == "reach":
            zero, one = prob0(model, target), prob1(model, target) | set(target)
            for s in states:
                if s in one:
                    fam.values[s] = Signomial.constant(1.0)
                elif s in zero:
                    continue
                else:
                    fam.names[s] = f"_p{idx}_{s}"
        else:
            for s in states:
                if s in target:
                    continue
                fam.names[s] = f"_c{idx}_{s}"
        for s, n in fam.names.items():
            fam.values[s] = Signomial.var(n)
        families.append(fam)

    params = sorted({v for (s, a) in ((s, a) for s in states for a in model.enabled(s))
                     for e in model.transitions[(s, a)].values() for v in e.variables})
    enc = Encoding(m, model, states, families, sched, specs, params, objective, margin, reason)

    cons = build_constraints(enc, lambda s, a, t, e: e)
    ineqs = [c for c in cons if c.sense == "<="]
    eqs = [c for c in cons if c.sense == "==" and not c.zero_form.is_zero]
    if reason:
        ineqs.append(Constraint(Signomial.constant(1.0), Signomial.constant(0.0), "<=", "infeasible"))

    variables = [Var(p, VarKind.PARAMETER) for p in params] + enc.scheduler_variables() + enc.state_variables()
    constants = {}
    for f in families:
        prefix = "_p" if f.kind == "reach" else "_c"
        for s in states:
            if s not in f.names:
                constants[f"{prefix}{f.index}_{s}"] = f.value(s).constant_value()
    return SignomialProgram(objective_expression(enc), ineqs, eqs, variables, constants, enc)


def objective_expression(enc: Encoding) -> Signomial:
    obj = enc.objective
    if obj is None:
        return Signomial.constant(0.0)
    if isinstance(obj, Signomial):
        return obj
    val = enc.family(obj.family_kind, obj.target).value(enc.model.initial)
    if obj.kind == "maximize-reach":
        if val.is_zero:
            return Signomial.constant(1.0)
        return val.reciprocal()
    return val


Transition = Callable[[int, str, int, Signomial], Signomial]


def build_constraints(enc: Encoding, trans: Transition) -> list[Constraint]:
    """Threshold, simplex, row and Bellman constraints with transitions mapped by ``trans``."""
    m = enc.model
    init = m.initial
    out: list[Constraint] = []
    for f in enc.families:
        for spec in f.specs:
            if f.kind == "reach" and spec.threshold >= 1.0:
                continue  # vacuous; the margin would otherwise reject probability-one models
            bound = Signomial.constant(spec.threshold * (1.0 - enc.margin))
            out.append(Constraint(f.value(init), bound, "<=", "threshold", (f.index, spec.threshold)))
    for s in enc.states:
        acts = m.enabled(s)
        if len(acts) > 1:
            total = Signomial()
            for a in acts:
                total = total + enc.sched_expr(s, a)
            out.append(Constraint(total, Signomial.constant(1.0), "==", "simplex", (s,)))
    for s, a in enc.rows:
        if m.row_is_constant(s, a):
            continue
        total = Signomial()
        for t, e in m.transitions[(s, a)].items():
            total = total + trans(s, a, t, e)
        out.append(Constraint(total, Signomial.constant(1.0), "==", "row", (s, a)))
    for f in enc.families:
        for s, name in f.names.items():
            rhs = Signomial()
            for a in m.enabled(s):
                inner = Signomial()
                if f.kind == "expcost" and m.cost(s, a) > 0:
                    inner = inner + m.cost(s, a)
                for t, e in m.transitions[(s, a)].items():
                    val = f.value(t)
                    if not val.is_zero:
                        inner = inner + trans(s, a, t, e) * val
                rhs = rhs + enc.sched_expr(s, a) * inner
            out.append(Constraint(Signomial.var(name), rhs, "==", "bellman", (f.index, s)))
    return out


# -- lifting ------------------------------------------------------------------

def _split(g: Signomial) -> tuple[Signomial, Signomial]:
    pos, neg = {}, {}
    for k, c in g.items():
        (pos if c > 0 else neg)[k] = abs(c)
    return Signomial(pos), Signomial(neg)


@dataclass
class LiftingMap:
    """Lifted variables standing for the non-posynomial transition entries."""

    entries: dict[str, Signomial] = field(default_factory=dict)
    designated: dict[tuple[int, str], int] = field(default_factory=dict)
    by_expr: dict[Signomial, str] = field(default_factory=dict)

    def transition(self, s: int, a: str, t: int, e: Signomial) -> Signomial:
        if self.designated.get((s, a)) == t:
            return Signomial.var(self.by_expr[e])
        return e

    def coupling(self, name: str) -> tuple[Signomial, Signomial]:
        """``(lhs, rhs)`` posynomials with ``lhs == rhs`` meaning ``name == g``."""
        pos, neg = _split(self.entries[name])
        return Signomial.var(name) + neg, pos

    def groups(self) -> list[LiftGroup]:
        return [LiftGroup(n, 1.0 - g) for n, g in self.entries.items()]

    def values(self, u: Mapping[str, float]) -> dict[str, float]:
        return {n: g.evaluate(u) for n, g in self.entries.items()}

    def variables(self) -> list[Var]:
        return [Var(n, VarKind.LIFTING) for n in self.entries]


def compute_lifting(sgp_or_enc: SignomialProgram | Encoding) -> LiftingMap:
    """One lifted variable per distinct non-posynomial entry; rows may contain at most one."""
    enc = sgp_or_enc.context if isinstance(sgp_or_enc, SignomialProgram) else sgp_or_enc
    m = enc.model
    lift = LiftingMap()
    for s, a in enc.rows:
        sig = [(t, e) for t, e in m.transitions[(s, a)].items() if e.classify() is Shape.SIGNOMIAL]
        if len(sig) > 1:
            raise ShapeError(s, a, f"{len(sig)} successors have non-posynomial probabilities")
        if not sig:
            continue
        t, e = sig[0]
        pos, _ = _split(e)
        if not pos.is_monomial:
            raise ShapeError(s, a, f"entry {e} has a positive part that is not a monomial")
        if e not in lift.by_expr:
            name = f"_lift_{len(lift.entries)}"
            lift.entries[name] = e
            lift.by_expr[e] = name
        lift.designated[(s, a)] = t
    return lift


def lifted_constraints(sgp: SignomialProgram, lifting: LiftingMap) -> list[Constraint]:
    """Constraints of ``sgp`` with lifted transitions plus the lifting couplings (as equalities)."""
    enc: Encoding = sgp.context
    cons = build_constraints(enc, lifting.transition)
    cons = [c for c in cons if not (c.sense == "==" and c.zero_form.is_zero)]
    for name in lifting.entries:
        lhs, rhs = lifting.coupling(name)
        cons.append(Constraint(lhs, rhs, "==", "lift", (name,)))
    cons += [c for c in sgp.inequalities if c.tag == "infeasible"]
    return cons


# -- convexification ------------------------------------------------------------

@dataclass
class GPContext:
    sgp: SignomialProgram
    lifting: LiftingMap

    @property
    def encoding(self) -> Encoding:
        return self.sgp.context


def regularizer(params: Iterable[str], lifted: Iterable[str], sched: Iterable[str]) -> Signomial:
    out = Signomial()
    for v in list(params) + list(lifted) + list(sched):
        out = out + Signomial.term(1.0, {v: -1.0})
    return out


def _infeasible(tag: str) -> GPConstraint:
    return GPConstraint(Signomial.constant(2.0), tag)


def to_gp_constraint(c: Constraint) -> tuple[str, GPConstraint] | None:
    """``("ineq"|"eq", constraint)`` for posynomial sides, or None when trivially true."""
    lhs, rhs = c.lhs, c.rhs
    if c.sense == "<=":
        if lhs.is_zero:
            return None
        if rhs.is_zero or (rhs.is_constant and rhs.constant_value() <= 0):
            return "ineq", _infeasible(c.tag)
        if not rhs.is_monomial:
            raise EncodingError(f"[{c.tag}] right-hand side {rhs} is not a monomial")
        expr = lhs / rhs
        if expr.is_constant:
            return None if expr.constant_value() <= 1.0 else ("ineq", _infeasible(c.tag))
        return "ineq", GPConstraint(expr, c.tag, c.key)
    if lhs.is_monomial and rhs.is_monomial:
        return "eq", GPConstraint(lhs / rhs, c.tag, c.key)
    if lhs.is_monomial:
        return "ineq", GPConstraint(rhs / lhs, c.tag, c.key)
    if rhs.is_monomial:
        return "ineq", GPConstraint(lhs / rhs, c.tag, c.key)
    raise EncodingError(f"[{c.tag}] equality {c} has no monomial side")


def bound_constraints(variables: Iterable[Var], center: Mapping[str, float] | None = None) -> list[GPConstraint]:
    """Positivity floor, ceiling, and ``p <= 1`` for probability variables."""
    out = []
    for v in variables:
        lo, hi = VAR_FLOOR, VAR_CEILING
        if center is not None and v in center:
            lo, hi = min(lo, 0.5 * center[v]), max(hi, 2.0 * center[v])
        out.append(GPConstraint(Signomial.term(lo, {v: -1.0}), "floor", (v,)))
        if getattr(v, "kind", None) is VarKind.PROBABILITY:
            out.append(GPConstraint(Signomial.var(v), "pbound", (v,)))
        else:
            out.append(GPConstraint(Signomial.term(1.0 / hi, {v: 1.0}), "ceiling", (v,)))
    return out


def _dedupe(cons: list[GPConstraint]) -> list[GPConstraint]:
    seen = set()
    out = []
    for c in cons:
        if c.expr in seen:
            continue
        seen.add(c.expr)
        out.append(c)
    return out


def convexify(sgp: SignomialProgram, lifting: LiftingMap | None = None) -> GeometricProgram:
    """Relaxed geometric program whose optimum makes the relaxed equalities tight."""
    enc: Encoding = sgp.context
    lifting = compute_lifting(enc) if lifting is None else lifting
    ineqs, eqs = [], []
    for c in lifted_constraints(sgp, lifting):
        if c.sense == "==" and c.tag in ("row", "simplex", "lift", "bellman"):
            lhs_mono, rhs_mono = c.lhs.is_monomial, c.rhs.is_monomial
            if not (lhs_mono and rhs_mono):
                c = Constraint(c.lhs, c.rhs, "<=", c.tag, c.key) if rhs_mono else \
                    Constraint(c.rhs, c.lhs, "<=", c.tag, c.key)
        res = to_gp_constraint(c)
        if res is None:
            continue
        (ineqs if res[0] == "ineq" else eqs).append(res[1])
    variables = ([Var(p, VarKind.PARAMETER) for p in enc.parameters] + lifting.variables()
                 + enc.scheduler_variables() + enc.state_variables())
    ineqs = _dedupe(ineqs) + bound_constraints(variables)
    eqs = _dedupe(eqs)
    obj = regularizer(enc.parameters, lifting.entries, enc.sched.values())
    if obj.is_zero:
        obj = Signomial.constant(1.0)
    gp = GeometricProgram(obj, ineqs, eqs, dict(sgp.constants), variables, GPContext(sgp, lifting))
    return gp.validate()


# -- regions ------------------------------------------------------------------

@dataclass
class Region:
    """Parameter box plus optional positive linear constraints ``sum c_i x_i <= d``."""

    box: dict[str, tuple[float, float]] = field(default_factory=dict)
    linear: list[tuple[dict[str, float], float]] = field(default_factory=list)

    def validate(self, parameters: Iterable[str] | None = None):
        known = set(parameters) if parameters is not None else None
        for p, (lo, hi) in self.box.items():
            if known is not None and p not in known:
                raise EncodingError(f"region bounds unknown parameter {p!r}")
            if not (lo > 0 and hi > 0):
                raise EncodingError(f"region bounds for {p} must be positive, got [{lo}, {hi}]")
            if hi < lo:
                raise EncodingError(f"empty interval [{lo}, {hi}] for {p}")
        for coeffs, d in self.linear:
            if any(c < 0 for c in coeffs.values()) or d <= 0 or not any(c > 0 for c in coeffs.values()):
                raise UnsupportedRegionError(
                    "only linear constraints with nonnegative coefficients and positive bound are supported")
            if known is not None and set(coeffs) - known:
                raise EncodingError(f"linear constraint uses unknown parameters {sorted(set(coeffs) - known)}")
        return self

    def contains(self, u: Mapping[str, float], tol: float = 0.0) -> bool:
        for p, (lo, hi) in self.box.items():
            if not lo - tol <= u[p] <= hi + tol:
                return False
        return all(sum(c * u[p] for p, c in coeffs.items()) <= d + tol for coeffs, d in self.linear)

    def center(self) -> dict[str, float]:
        return {p: (lo * hi) ** 0.5 for p, (lo, hi) in self.box.items()}


def _monomial_range(coef: float, key, box) -> tuple[float, float]:
    lo_v, hi_v = coef, coef
    for v, e in key:
        lo, hi = box[v]
        a, b = lo ** e, hi ** e
        lo_v *= min(a, b)
        hi_v *= max(a, b)
    return lo_v, hi_v


def region_constraints(region: Region, lifting: LiftingMap | None = None) -> tuple[list[GPConstraint], list[GPConstraint]]:
    """(inequalities, equalities) restricting parameters, and lifted variables, to ``region``."""
    region.validate()
    ineqs, eqs = [], []
    for p, (lo, hi) in sorted(region.box.items()):
        if lo == hi:
            eqs.append(GPConstraint(Signomial.term(1.0 / lo, {p: 1.0}), "region", (p,)))
            continue
        ineqs.append(GPConstraint(Signomial.term(1.0 / hi, {p: 1.0}), "region", (p, "hi")))
        ineqs.append(GPConstraint(Signomial.term(lo, {p: -1.0}), "region", (p, "lo")))
    for i, (coeffs, d) in enumerate(region.linear):
        expr = Signomial()
        for p, c in coeffs.items():
            if c > 0:
                expr = expr + Signomial.term(c / d, {p: 1.0})
        ineqs.append(GPConstraint(expr, "region", ("linear", i)))
    if lifting is not None:
        for name, g in lifting.entries.items():
            if not g.variables <= set(region.box):
                continue
            lb = ub = 0.0
            for key, c in g.items():
                mlo, mhi = _monomial_range(abs(c), key, region.box)
                if c > 0:
                    lb, ub = lb + mlo, ub + mhi
                else:
                    lb, ub = lb - mhi, ub - mlo
            if ub <= 0:
                ineqs.append(_infeasible("region"))
                continue
            ineqs.append(GPConstraint(Signomial.term(1.0 / ub, {name: 1.0}), "region", (name, "hi")))
            if lb > 0:
                ineqs.append(GPConstraint(Signomial.term(lb, {name: -1.0}), "region", (name, "lo")))
    return ineqs, eqs


def add_region(gp: GeometricProgram, region: Region) -> GeometricProgram:
    ctx = gp.context
    lifting = ctx.lifting if isinstance(ctx, GPContext) else None
    if isinstance(ctx, GPContext):
        region.validate(ctx.encoding.source.parameters)
    ineqs, eqs = region_constraints(region, lifting)
    return gp.with_constraints(ineqs, eqs).validate()


# -- repair -------------------------------------------------------------------

def encode_repair(m: PMDP, specs: Iterable[Specification], changeable: Iterable[tuple[int, str, int]],
                  weight: float = REPAIR_REGULARIZATION, margin: float = THRESHOLD_MARGIN
                  ) -> tuple[PMDP, SignomialProgram]:
    """Make each changeable probability ``a`` into ``a * r`` for a fresh factor ``r``.

    The objective is the sum of ``a**2 * r**2`` plus ``weight`` times the
    regularizer. Within a row whose changeable entries share one base
    probability this equals the squared probability change up to a constant.
    """
    if any(not e.is_constant for row in m.transitions.values() for e in row.values()):
        raise EncodingError("repair expects a model without parameters")
    changeable = list(dict.fromkeys((int(s), str(a), int(t)) for s, a, t in changeable))
    trans = {sa: dict(row) for sa, row in m.transitions.items()}
    base, names = [], []
    for i, (s, a, t) in enumerate(changeable):
        row = trans.get((s, a))
        if row is None or t not in row:
            raise EncodingError(f"changeable transition ({s}, {a}, {t}) has zero probability")
        prob = row[t].constant_value()
        if prob <= 0:
            raise EncodingError(f"changeable transition ({s}, {a}, {t}) has zero probability")
        name = f"r{i}"
        base.append(prob)
        names.append(name)
        row[t] = Signomial.term(prob, {name: 1.0})
    pm = PMDP(m.n_states, m.initial, trans, tuple(names), dict(m.costs), dict(m.labels), m.state_names)
    sgp = encode_sgp(pm, specs, margin=margin)
    enc: Encoding = sgp.context
    used = set(enc.parameters)
    obj = Signomial()
    for a, n in zip(base, names):
        if n in used:
            obj = obj + Signomial.term(a * a, {n: 2.0})
    obj = obj + weight * regularizer(enc.parameters, (), enc.sched.values())
    enc.objective = obj
    enc.repair = RepairInfo(changeable, base, names, weight)
    sgp.objective = obj
    return pm, sgp


# -- exact evaluation -------------------------------------------------------------

@dataclass
class ExactPoint:
    """A well-defined (valuation, scheduler) with all program variables evaluated exactly."""

    params: dict[str, float]
    scheduler: Scheduler
    values: dict[str, float]
    achieved: list[float]
    satisfied: bool
    objective: float


def exact_point(sgp: SignomialProgram, lifting: LiftingMap, params: Mapping[str, float],
                scheduler: Scheduler) -> ExactPoint:
    """Evaluate every variable of ``sgp`` at the given valuation and scheduler by exact analysis."""
    enc: Encoding = sgp.context
    m = enc.model
    mdp = instantiate(m, params)
    if not mdp.well_defined:
        raise ModelError("valuation is not well-defined")
    mc = induce(mdp, scheduler)
    values = {p: float(params[p]) for p in params}
    values.update(lifting.values(params))
    for (s, a), n in enc.sched.items():
        values[n] = scheduler[(s, a)]
    for f in enc.families:
        if not f.names:
            continue
        if f.kind == "reach":
            x = reachability(mc, f.target)
        else:
            x = expected_cost(mc, f.target)
        for s, n in f.names.items():
            values[n] = float(x[s])
    results = check(mc, enc.specs)
    achieved = [r.value for r in results]
    ok = all(r.satisfied for r in results) and enc.infeasible is None
    obj = sgp.objective
    try:
        fval = obj.evaluate(values) if not obj.is_zero else 0.0
    except ZeroDivisionError:
        fval = float("inf")
    return ExactPoint(dict(params), scheduler, values, achieved, ok, fval)
