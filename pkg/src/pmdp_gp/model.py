"""Parametric MDPs, schedulers, instantiation and graph preprocessing."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .expressions import MissingVariableError, Shape, Signomial, Var, VarKind

WELL_DEFINED_TOL = 1e-6
NORMALIZED_TOL = 1e-9


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Specification:
    """``P<=threshold(target)`` for kind "reach", ``EC<=threshold(target)`` for "expcost"."""

    kind: str
    threshold: float
    target: frozenset
    label: str | None = None

    def __post_init__(self):
        if self.kind not in ("reach", "expcost"):
            raise ModelError(f"unknown specification kind {self.kind!r}")
        if not self.target:
            raise ModelError("specification target set is empty")
        if self.kind == "reach" and not 0.0 <= self.threshold <= 1.0:
            raise ModelError(f"reachability threshold {self.threshold} outside [0, 1]")
        if self.kind == "expcost" and self.threshold < 0:
            raise ModelError(f"expected-cost threshold {self.threshold} is negative")
        object.__setattr__(self, "target", frozenset(int(s) for s in self.target))

    def __str__(self) -> str:
        op = "P" if self.kind == "reach" else "EC"
        tgt = self.label or "{" + ",".join(map(str, sorted(self.target))) + "}"
        return f"{op}<={self.threshold:g}({tgt})"


@dataclass
class PMDP:
    """Parametric MDP with signomial transition probabilities.

    ``transitions[(s, a)]`` maps successor states to expressions; actions with
    no entry for a state are not enabled there.
    """

    n_states: int
    initial: int
    transitions: dict[tuple[int, str], dict[int, Signomial]]
    parameters: tuple[str, ...] = ()
    costs: dict[tuple[int, str], float] = field(default_factory=dict)
    labels: dict[str, frozenset] = field(default_factory=dict)
    state_names: list[str] | None = None

    def __post_init__(self):
        self.parameters = tuple(Var(str(p), VarKind.PARAMETER) for p in self.parameters)
        clean = {}
        for (s, a), row in self.transitions.items():
            row = {int(t): e for t, e in row.items() if not e.is_zero}
            if row:
                clean[(int(s), str(a))] = row
        self.transitions = clean
        self._enabled: dict[int, list[str]] = {}
        for s, a in sorted(self.transitions, key=lambda sa: (sa[0], sa[1])):
            self._enabled.setdefault(s, []).append(a)
        self.validate()

    # -- structure ----------------------------------------------------
    def validate(self):
        if not 0 <= self.initial < self.n_states:
            raise ModelError(f"initial state {self.initial} out of range")
        params = set(self.parameters)
        for s in range(self.n_states):
            if s not in self._enabled:
                raise ModelError(f"state {s} has no enabled action (deadlock)")
        for (s, a), row in self.transitions.items():
            if not 0 <= s < self.n_states:
                raise ModelError(f"state {s} out of range")
            for t, e in row.items():
                if not 0 <= t < self.n_states:
                    raise ModelError(f"successor {t} of ({s}, {a}) out of range")
                extra = e.variables - params
                if extra:
                    raise ModelError(f"transition ({s}, {a}, {t}) uses undeclared {sorted(extra)}")
        for (s, a), c in self.costs.items():
            if c < 0:
                raise ModelError(f"negative cost at ({s}, {a})")
        for name, states in self.labels.items():
            bad = [s for s in states if not 0 <= s < self.n_states]
            if bad:
                raise ModelError(f"label {name!r} references unknown states {bad}")

    def enabled(self, s: int) -> list[str]:
        return self._enabled[s]

    @property
    def choices(self) -> list[tuple[int, str]]:
        return [(s, a) for s in range(self.n_states) for a in self._enabled[s]]

    @property
    def actions(self) -> list[str]:
        return sorted({a for _, a in self.transitions})

    @property
    def is_pmc(self) -> bool:
        return all(len(acts) == 1 for acts in self._enabled.values())

    @property
    def n_transitions(self) -> int:
        return sum(len(r) for r in self.transitions.values())

    def cost(self, s: int, a: str) -> float:
        return self.costs.get((s, a), 0.0)

    def row_is_constant(self, s: int, a: str) -> bool:
        return all(e.is_constant for e in self.transitions[(s, a)].values())

    def state_name(self, s: int) -> str:
        return self.state_names[s] if self.state_names else str(s)

    def successors(self, s: int, a: str | None = None) -> set[int]:
        if a is not None:
            return set(self.transitions[(s, a)])
        return {t for b in self._enabled[s] for t in self.transitions[(s, b)]}

    def restrict_actions(self, keep: Mapping[int, Iterable[str]]) -> "PMDP":
        """Copy of the model keeping only the listed actions for the listed states."""
        trans = {}
        for (s, a), row in self.transitions.items():
            if s in keep and a not in keep[s]:
                continue
            trans[(s, a)] = dict(row)
        costs = {sa: c for sa, c in self.costs.items() if sa in trans}
        return PMDP(self.n_states, self.initial, trans, self.parameters, costs,
                    dict(self.labels), self.state_names)

    def label(self, name: str) -> frozenset:
        try:
            return self.labels[name]
        except KeyError:
            raise ModelError(f"unknown label {name!r}") from None


@dataclass
class Scheduler:
    """Memoryless randomized scheduler as weights per (state, action)."""

    weights: dict[tuple[int, str], float]

    def validate(self, m: PMDP | "MDP", tol: float = NORMALIZED_TOL):
        sums: dict[int, float] = {}
        for (s, a), w in self.weights.items():
            if w < -tol or w > 1 + tol:
                raise ModelError(f"scheduler weight {w} at ({s}, {a}) outside [0, 1]")
            if w > 0 and a not in m.enabled(s):
                raise ModelError(f"scheduler picks disabled action {a!r} in state {s}")
            sums[s] = sums.get(s, 0.0) + w
        for s in range(m.n_states):
            if abs(sums.get(s, 0.0) - 1.0) > tol:
                raise ModelError(f"scheduler weights at state {s} sum to {sums.get(s, 0.0)}")

    @classmethod
    def uniform(cls, m: PMDP | "MDP") -> "Scheduler":
        w = {}
        for s in range(m.n_states):
            acts = m.enabled(s)
            for a in acts:
                w[(s, a)] = 1.0 / len(acts)
        return cls(w)

    def __getitem__(self, sa) -> float:
        return self.weights.get(sa, 0.0)


@dataclass
class MDP:
    """Numeric MDP: one sparse row per (state, action) choice."""

    n_states: int
    initial: int
    choices: list[tuple[int, str]]
    matrix: sp.csr_matrix
    row_sums: np.ndarray
    well_defined: bool
    costs: np.ndarray

    def __post_init__(self):
        self._enabled: dict[int, list[str]] = {}
        self._index = {}
        for i, (s, a) in enumerate(self.choices):
            self._enabled.setdefault(s, []).append(a)
            self._index[(s, a)] = i

    def enabled(self, s: int) -> list[str]:
        return self._enabled[s]

    def probability(self, s: int, a: str, t: int) -> float:
        return float(self.matrix[self._index[(s, a)], t])

    def row(self, s: int, a: str) -> dict[int, float]:
        r = self.matrix.getrow(self._index[(s, a)])
        return dict(zip(r.indices.tolist(), r.data.tolist()))


@dataclass
class MarkovChain:
    n_states: int
    initial: int
    matrix: sp.csr_matrix
    costs: np.ndarray  # expected one-step cost per state

    def probability(self, s: int, t: int) -> float:
        return float(self.matrix[s, t])


def instantiate(m: PMDP, u: Mapping[str, float], tol: float = WELL_DEFINED_TOL) -> MDP:
    """Replace every transition expression by its value under ``u``."""
    for p in m.parameters:
        if p not in u:
            raise MissingVariableError(p)
        if not u[p] > 0:
            raise ModelError(f"parameter {p} must be positive, got {u[p]}")
    choices = m.choices
    rows, cols, vals = [], [], []
    costs = np.zeros(len(choices))
    for i, (s, a) in enumerate(choices):
        for t, e in m.transitions[(s, a)].items():
            rows.append(i)
            cols.append(t)
            vals.append(e.evaluate(u))
        costs[i] = m.cost(s, a)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(choices), m.n_states))
    row_sums = np.asarray(mat.sum(axis=1)).ravel()
    vals = np.asarray(vals)
    ok = bool(np.all(np.abs(row_sums - 1.0) <= tol) and np.all(vals >= -tol) and np.all(vals <= 1 + tol))
    return MDP(m.n_states, m.initial, choices, mat, row_sums, ok, costs)


def induce(mdp: MDP, sched: Scheduler | None = None) -> MarkovChain:
    """Markov chain obtained by mixing each state's action rows with the scheduler weights."""
    n = mdp.n_states
    weights = np.zeros(len(mdp.choices))
    owner = np.zeros(len(mdp.choices), dtype=int)
    for i, (s, a) in enumerate(mdp.choices):
        owner[i] = s
        if sched is None:
            if len(mdp.enabled(s)) != 1:
                raise ModelError(f"state {s} has several actions; a scheduler is required")
            weights[i] = 1.0
        else:
            weights[i] = sched[(s, a)]
    if sched is not None:
        for (s, a), w in sched.weights.items():
            if w > 0 and (s >= n or a not in mdp.enabled(s)):
                raise ModelError(f"scheduler picks disabled action {a!r} in state {s}")
    mix = sp.csr_matrix((weights, (owner, np.arange(len(owner)))), shape=(n, len(owner)))
    return MarkovChain(n, mdp.initial, (mix @ mdp.matrix).tocsr(), mix @ mdp.costs)


# -- graph analyses -------------------------------------------------------

def _predecessors(m: PMDP) -> dict[int, set[tuple[int, str]]]:
    pred: dict[int, set[tuple[int, str]]] = {s: set() for s in range(m.n_states)}
    for (s, a), row in m.transitions.items():
        for t in row:
            pred[t].add((s, a))
    return pred


def backward_reachable(m: PMDP, targets: Iterable[int], within: set[int] | None = None) -> set[int]:
    """States with a path (any actions) into ``targets`` staying inside ``within``."""
    pred = _predecessors(m)
    seen = set(targets)
    queue = deque(seen)
    while queue:
        t = queue.popleft()
        for s, _ in pred[t]:
            if s not in seen and (within is None or s in within):
                seen.add(s)
                queue.append(s)
    return seen


def forward_reachable(m: PMDP, start: int | None = None) -> set[int]:
    start = m.initial if start is None else start
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in m.successors(s):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def prob0(m: PMDP, targets: Iterable[int]) -> set[int]:
    """States from which no path reaches ``targets`` under any action choice."""
    return set(range(m.n_states)) - backward_reachable(m, targets)


def prob1(m: PMDP, targets: Iterable[int]) -> set[int]:
    """States reaching ``targets`` almost surely for every scheduler and positive valuation."""
    targets = set(targets)
    # states where some scheduler avoids the target forever
    avoid = set(range(m.n_states)) - targets
    while True:
        nxt = {s for s in avoid if any(m.successors(s, a) <= avoid for a in m.enabled(s))}
        if nxt == avoid:
            break
        avoid = nxt
    escapes = backward_reachable(m, avoid, within=set(range(m.n_states)) - targets)
    return set(range(m.n_states)) - escapes


def prob1_exists(m: PMDP, targets: Iterable[int]) -> tuple[set[int], dict[int, list[str]]]:
    """States where some scheduler reaches ``targets`` almost surely.

    Returns the state set together with, for each non-target member, the
    actions that keep the play inside it. Randomizing over exactly those
    actions reaches the targets with probability one.
    """
    targets = set(targets)
    keep = set(range(m.n_states))
    while True:
        inner = set(targets)
        safe = {s: [a for a in m.enabled(s) if m.successors(s, a) <= keep] for s in keep}
        changed = True
        while changed:
            changed = False
            for s in keep - inner:
                if any(m.successors(s, a) & inner for a in safe[s]):
                    inner.add(s)
                    changed = True
        if inner == keep:
            break
        keep = inner
    acts = {s: [a for a in m.enabled(s) if m.successors(s, a) <= keep] for s in keep - targets}
    return keep, acts


def prob01_analysis(m: PMDP, targets: Iterable[int]) -> tuple[set[int], set[int]]:
    targets = set(targets)
    return prob0(m, targets), prob1(m, targets)


# -- normalization ---------------------------------------------------------

@dataclass
class LiftGroup:
    """Lifted variable ``name`` standing for ``1 - complement``."""

    name: str
    complement: Signomial


def normalize_solution(raw: Mapping[str, float], m: PMDP, scheduler_vars: Mapping[tuple[int, str], str] | None = None,
                       lifting: Iterable[LiftGroup] = (), default: float = 0.5) -> tuple[dict[str, float], Scheduler]:
    """Rescale raw solver values into a well-defined valuation and scheduler.

    Scheduler weights are divided by their per-state sum. A parameter group
    tied to a lifted variable ``l = 1 - g`` is scaled so that ``g + l = 1``;
    a parametric row without lifting is scaled so its entries sum to one.
    A group can be rescaled only when ``g`` is homogeneous and its variables
    belong to no other group. Parameters missing from ``raw`` take
    ``default``; states without scheduler values are randomized uniformly.
    """
    def positive(k):
        v = raw[k]
        if not v > 0:
            raise ModelError(f"raw value of {k} must be positive, got {v}")
        return float(v)

    u = {p: positive(p) if p in raw else default for p in m.parameters}

    weights: dict[tuple[int, str], float] = {}
    for s in range(m.n_states):
        acts = m.enabled(s)
        if len(acts) == 1:
            weights[(s, acts[0])] = 1.0
            continue
        if scheduler_vars is None or not any((s, a) in scheduler_vars for a in acts):
            for a in acts:
                weights[(s, a)] = 1.0 / len(acts)
            continue
        vals = [positive(scheduler_vars[(s, a)]) if (s, a) in scheduler_vars else 0.0 for a in acts]
        total = sum(vals)
        for a, v in zip(acts, vals):
            weights[(s, a)] = v / total

    owner: dict[str, object] = {}
    groups = []
    for g in lifting:
        groups.append((g.complement, positive(g.name), g))
    lifted_rows = set()
    for (s, a), row in m.transitions.items():
        exprs = list(row.values())
        if all(e.is_constant for e in exprs):
            continue
        if any(not e.is_posynomial for e in exprs):
            lifted_rows.add((s, a))
            continue
        total = Signomial()
        for e in exprs:
            total = total + e
        groups.append((total, 0.0, (s, a)))

    scales: dict[str, float] = {}
    for expr, extra, tag in groups:
        const_part = expr.partial_evaluate({}).terms.get((), 0.0)
        varying = expr - const_part
        if varying.is_zero:
            continue
        room = 1.0 - const_part
        value = varying.evaluate(u) + extra
        if abs(value - room) <= NORMALIZED_TOL:
            continue
        deg = varying.degree()
        if room <= 0 or not deg:
            raise ModelError(f"cannot normalize {expr}: not expressible by rescaling its parameters")
        factor = (room / value) ** (1.0 / deg)
        for v in varying.variables:
            prev = owner.get(v)
            if prev is not None and prev is not tag and not np.isclose(scales[v], factor, rtol=1e-12):
                raise ModelError(f"parameter {v} is shared by rows with different normalizations")
            owner[v] = tag
            scales[v] = factor
    for v, f in scales.items():
        u[v] *= f

    mdp = instantiate(m, u, tol=NORMALIZED_TOL)
    if not mdp.well_defined:
        raise ModelError("normalized valuation is not well-defined for this lifting shape")
    return u, Scheduler(weights)
