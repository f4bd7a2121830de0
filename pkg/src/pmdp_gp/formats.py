"""Plain-text formats for models, specifications, regions and changeable transitions.

All formats are line based; ``#`` starts a comment and blank lines are
ignored. Errors carry the offending line number. See ``docs/formats.md``
for the grammar.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .encoder import Objective, Region
from .expressions import ExpressionError, Signomial, parse
from .model import PMDP, ModelError, Specification


class FormatError(ValueError):
    def __init__(self, line: int | None, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def _number(tok: str, no: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise FormatError(no, f"expected a number for {what}, got {tok!r}") from None


def _int(tok: str, no: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(no, f"expected an integer for {what}, got {tok!r}") from None


# -- models -----------------------------------------------------------------------

MODEL_KINDS = ("pmc", "pmdp")


def parse_model(text: str) -> PMDP:
    kind = n_states = initial = None
    params: list[str] = []
    names: dict[int, str] = {}
    by_name: dict[str, int] = {}
    trans: dict[tuple[int, str], dict[int, Signomial]] = {}
    costs: dict[tuple[int, str], float] = {}
    labels: dict[str, set[int]] = {}

    def state(tok: str, no: int) -> int:
        if tok in by_name:
            return by_name[tok]
        s = _int(tok, no, "state")
        if n_states is None:
            raise FormatError(no, "'states' must precede the first state reference")
        if not 0 <= s < n_states:
            raise FormatError(no, f"state {s} outside 0..{n_states - 1}")
        return s

    for no, line in _lines(text):
        head, *rest = line.split()
        if head == "model":
            if len(rest) != 1 or rest[0] not in MODEL_KINDS:
                raise FormatError(no, "expected 'model pmc' or 'model pmdp'")
            kind = rest[0]
        elif head == "states":
            if len(rest) != 1:
                raise FormatError(no, "expected 'states N'")
            n_states = _int(rest[0], no, "state count")
            if n_states <= 0:
                raise FormatError(no, "state count must be positive")
        elif head == "initial":
            if len(rest) != 1:
                raise FormatError(no, "expected 'initial S'")
            initial = state(rest[0], no)
        elif head == "parameters":
            for p in rest:
                if not p.isidentifier():
                    raise FormatError(no, f"invalid parameter name {p!r}")
                if p in params:
                    raise FormatError(no, f"parameter {p!r} declared twice")
                params.append(p)
        elif head == "name":
            if len(rest) != 2:
                raise FormatError(no, "expected 'name S NAME'")
            s = state(rest[0], no)
            if rest[1] in by_name and by_name[rest[1]] != s:
                raise FormatError(no, f"state name {rest[1]!r} used twice")
            if rest[1].lstrip("-").isdigit():
                raise FormatError(no, "state names must not be integers")
            names[s] = rest[1]
            by_name[rest[1]] = s
        elif head == "trans":
            if len(rest) < 4:
                raise FormatError(no, "expected 'trans S ACTION SUCC EXPRESSION'")
            s, a, t = state(rest[0], no), rest[1], state(rest[2], no)
            expr_text = line.split(None, 4)[4]
            try:
                e = parse(expr_text)
            except ExpressionError as exc:
                raise FormatError(no, f"bad expression: {exc}") from None
            undeclared = e.variables - set(params)
            if undeclared:
                raise FormatError(no, f"undeclared parameters {sorted(undeclared)}")
            row = trans.setdefault((s, a), {})
            if t in row:
                raise FormatError(no, f"duplicate transition ({s}, {a}, {t})")
            row[t] = e
        elif head == "cost":
            if len(rest) != 3:
                raise FormatError(no, "expected 'cost S ACTION VALUE'")
            s, a = state(rest[0], no), rest[1]
            c = _number(rest[2], no, "cost")
            if c < 0:
                raise FormatError(no, "costs must be nonnegative")
            costs[(s, a)] = c
        elif head == "label":
            if not rest:
                raise FormatError(no, "expected 'label NAME S...'")
            labels.setdefault(rest[0], set()).update(state(t, no) for t in rest[1:])
        else:
            raise FormatError(no, f"unknown record {head!r}")

    if kind is None or n_states is None or initial is None:
        raise FormatError(None, "model header needs 'model', 'states' and 'initial'")
    for sa in costs:
        if sa not in trans:
            raise FormatError(None, f"cost given for disabled action {sa}")
    state_names = [names.get(s, str(s)) for s in range(n_states)] if names else None
    try:
        m = PMDP(n_states, initial, trans, tuple(params), costs,
                 {k: frozenset(v) for k, v in labels.items()}, state_names)
    except ModelError as exc:
        raise FormatError(None, str(exc)) from None
    if kind == "pmc" and not m.is_pmc:
        raise FormatError(None, "a pmc must have exactly one action per state")
    return m


def serialize_model(m: PMDP) -> str:
    out = [f"model {'pmc' if m.is_pmc else 'pmdp'}", f"states {m.n_states}", f"initial {m.initial}"]
    if m.parameters:
        out.append("parameters " + " ".join(m.parameters))
    if m.state_names:
        out += [f"name {s} {n}" for s, n in enumerate(m.state_names) if n != str(s)]
    for (s, a), row in sorted(m.transitions.items()):
        out += [f"trans {s} {a} {t} {e}" for t, e in sorted(row.items())]
    out += [f"cost {s} {a} {c!r}" for (s, a), c in sorted(m.costs.items())]
    for name, states in sorted(m.labels.items()):
        out.append(" ".join(["label", name, *map(str, sorted(states))]))
    return "\n".join(out) + "\n"


def load_model(path) -> PMDP:
    with open(path) as fh:
        return parse_model(fh.read())


# -- regions ----------------------------------------------------------------------

def _region_line(line: str, no: int, region: Region, params: set[str] | None):
    if "<=" in line:
        lhs, rhs = line.split("<=", 1)
        try:
            e = parse(lhs)
        except ExpressionError as exc:
            raise FormatError(no, f"bad expression: {exc}") from None
        coeffs = {}
        for key, c in e.items():
            if len(key) != 1 or key[0][1] != 1.0:
                raise FormatError(no, "region constraints must be linear in the parameters")
            coeffs[key[0][0]] = c
        region.linear.append((coeffs, _number(rhs.strip(), no, "bound")))
        return
    toks = line.split()
    if len(toks) != 3:
        raise FormatError(no, "expected 'PARAM LO HI' or 'EXPRESSION <= BOUND'")
    if params is not None and toks[0] not in params:
        raise FormatError(no, f"unknown parameter {toks[0]!r}")
    if toks[0] in region.box:
        raise FormatError(no, f"bounds for {toks[0]!r} given twice")
    lo, hi = _number(toks[1], no, "lower bound"), _number(toks[2], no, "upper bound")
    if not 0 < lo <= hi:
        raise FormatError(no, f"bounds must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
    region.box[toks[0]] = (lo, hi)


def parse_regions(text: str, params: Iterable[str] | None = None) -> list[Region]:
    """One or more ``region`` ... ``end`` blocks, or bare bound lines for a single region."""
    params = set(params) if params is not None else None
    regions: list[Region] = []
    current: Region | None = None
    bare = None
    for no, line in _lines(text):
        if line == "region":
            if bare or current is not None:
                raise FormatError(no, "unexpected 'region'")
            bare = False
            current = Region()
        elif line == "end":
            if current is None:
                raise FormatError(no, "'end' without 'region'")
            regions.append(current)
            current = None
        else:
            if current is None:
                if bare is False:
                    raise FormatError(no, "bounds outside a region block")
                bare = True
                current = Region()
                regions.append(current)
            _region_line(line, no, current, params)
    if current is not None and not bare:
        raise FormatError(None, "unterminated region block")
    return regions


def serialize_region(region: Region) -> str:
    out = ["region"]
    out += [f"  {p} {lo!r} {hi!r}" for p, (lo, hi) in region.box.items()]
    for coeffs, d in region.linear:
        expr = Signomial()
        for p, c in coeffs.items():
            expr = expr + c * Signomial.var(p)
        out.append(f"  {expr} <= {d!r}")
    out.append("end")
    return "\n".join(out) + "\n"


def load_regions(path, params: Iterable[str] | None = None) -> list[Region]:
    with open(path) as fh:
        return parse_regions(fh.read(), params)


# -- specifications ---------------------------------------------------------------

@dataclass
class SpecLine:
    kind: str
    label: str
    threshold: float | None = None
    sense: str | None = None
    line: int | None = None


@dataclass
class SpecFile:
    specs: list[SpecLine] = field(default_factory=list)
    objective: SpecLine | None = None
    region: Region | None = None

    def resolve(self, m: PMDP) -> tuple[list[Specification], Objective | None]:
        """Turn label names into target state sets of ``m``."""
        def target(sl: SpecLine):
            if sl.label not in m.labels:
                raise FormatError(sl.line, f"unknown label {sl.label!r}")
            if not m.labels[sl.label]:
                raise FormatError(sl.line, f"label {sl.label!r} is empty")
            return m.labels[sl.label]

        specs = []
        for sl in self.specs:
            try:
                specs.append(Specification(sl.kind, sl.threshold, target(sl), sl.label))
            except ModelError as exc:
                raise FormatError(sl.line, str(exc)) from None
        obj = None
        if self.objective is not None:
            o = self.objective
            kind = {("maximize", "reach"): "maximize-reach", ("minimize", "reach"): "minimize-reach",
                    ("minimize", "expcost"): "minimize-cost"}[(o.sense, o.kind)]
            obj = Objective(kind, target(o), o.label)
        if self.region is not None:
            unknown = set(self.region.box) - set(m.parameters)
            if unknown:
                raise FormatError(None, f"region bounds unknown parameters {sorted(unknown)}")
        return specs, obj


def parse_specs(text: str) -> SpecFile:
    out = SpecFile()
    region: Region | None = None
    for no, line in _lines(text):
        if region is not None:
            if line == "end":
                out.region, region = region, None
            else:
                _region_line(line, no, region, None)
            continue
        toks = line.split()
        if toks == ["region"]:
            if out.region is not None:
                raise FormatError(no, "only one region block allowed")
            region = Region()
            continue
        if len(toks) == 5 and toks[0] in ("reach", "expcost") and toks[1] == "<=" and toks[3] == "label":
            thr = _number(toks[2], no, "threshold")
            if toks[0] == "reach" and not 0 <= thr <= 1:
                raise FormatError(no, f"reachability threshold {thr} outside [0, 1]")
            if toks[0] == "expcost" and thr < 0:
                raise FormatError(no, f"expected-cost threshold {thr} is negative")
            out.specs.append(SpecLine(toks[0], toks[4], thr, line=no))
        elif len(toks) == 4 and toks[0] in ("maximize", "minimize") and toks[2] == "label":
            if (toks[0], toks[1]) not in (("maximize", "reach"), ("minimize", "reach"), ("minimize", "expcost")):
                raise FormatError(no, f"unsupported objective '{toks[0]} {toks[1]}'")
            if out.objective is not None:
                raise FormatError(no, "at most one objective line")
            out.objective = SpecLine(toks[1], toks[3], sense=toks[0], line=no)
        else:
            raise FormatError(no, f"cannot parse specification {line!r}")
    if region is not None:
        raise FormatError(None, "unterminated region block")
    return out


def serialize_specs(sf: SpecFile) -> str:
    out = [f"{s.kind} <= {s.threshold!r} label {s.label}" for s in sf.specs]
    if sf.objective is not None:
        out.append(f"{sf.objective.sense} {sf.objective.kind} label {sf.objective.label}")
    text = "\n".join(out) + "\n"
    if sf.region is not None:
        text += serialize_region(sf.region)
    return text


def load_specs(path) -> SpecFile:
    with open(path) as fh:
        return parse_specs(fh.read())


# -- changeable transitions -------------------------------------------------------

def parse_changeable(text: str, m: PMDP) -> list[tuple[int, str, int]]:
    """Lines ``S ACTION SUCC``; ``*`` as successor selects the whole row."""
    names = {n: i for i, n in enumerate(m.state_names)} if m.state_names else {}

    def state(tok, no):
        if tok in names:
            return names[tok]
        s = _int(tok, no, "state")
        if not 0 <= s < m.n_states:
            raise FormatError(no, f"state {s} out of range")
        return s

    out = []
    for no, line in _lines(text):
        toks = line.split()
        if len(toks) != 3:
            raise FormatError(no, "expected 'S ACTION SUCC'")
        s, a = state(toks[0], no), toks[1]
        if (s, a) not in m.transitions:
            raise FormatError(no, f"action {a!r} not enabled in state {s}")
        succ = sorted(m.transitions[(s, a)]) if toks[2] == "*" else [state(toks[2], no)]
        for t in succ:
            if t not in m.transitions[(s, a)]:
                raise FormatError(no, f"transition ({s}, {a}, {t}) has zero probability")
            out.append((s, a, t))
    return out


def load_changeable(path, m: PMDP) -> list[tuple[int, str, int]]:
    with open(path) as fh:
        return parse_changeable(fh.read(), m)
