"""Signomial and geometric program containers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .expressions import Shape, Signomial, Var


class ProgramError(ValueError):
    pass


@dataclass
class Constraint:
    """``lhs <= rhs`` (sense "<=") or ``lhs == rhs`` (sense "==")."""

    lhs: Signomial
    rhs: Signomial
    sense: str
    tag: str
    key: tuple = ()

    @property
    def zero_form(self) -> Signomial:
        return self.lhs - self.rhs

    def residual(self, u) -> float:
        return self.lhs.evaluate(u) - self.rhs.evaluate(u)

    def __str__(self) -> str:
        op = "<=" if self.sense == "<=" else "=="
        return f"{self.lhs} {op} {self.rhs}"


@dataclass
class GPConstraint:
    """Posynomial ``expr <= 1`` or monomial ``expr == 1``."""

    expr: Signomial
    tag: str
    key: tuple = ()


@dataclass
class GeometricProgram:
    objective: Signomial
    inequalities: list[GPConstraint] = field(default_factory=list)
    equalities: list[GPConstraint] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)
    variables: list[Var] = field(default_factory=list)
    context: object = None

    def validate(self):
        if self.objective.classify() is Shape.SIGNOMIAL:
            raise ProgramError(f"objective {self.objective} is not a posynomial")
        for c in self.inequalities:
            if c.expr.classify() is Shape.SIGNOMIAL:
                raise ProgramError(f"inequality [{c.tag}] {c.expr} is not a posynomial")
        for c in self.equalities:
            if c.expr.classify() is not Shape.MONOMIAL:
                raise ProgramError(f"equality [{c.tag}] {c.expr} is not a monomial")
        declared = set(self.variables)
        used = self.used_variables()
        if self.variables and not used <= declared:
            raise ProgramError(f"undeclared variables {sorted(used - declared)[:5]}")
        return self

    def used_variables(self) -> set[str]:
        used = set(self.objective.variables)
        for c in self.inequalities + self.equalities:
            used |= c.expr.variables
        return used

    def with_constraints(self, inequalities: Iterable[GPConstraint] = (),
                         equalities: Iterable[GPConstraint] = ()) -> "GeometricProgram":
        return GeometricProgram(self.objective, self.inequalities + list(inequalities),
                                self.equalities + list(equalities), dict(self.constants),
                                list(self.variables), self.context)

    def count(self, tag: str) -> int:
        return sum(c.tag == tag for c in self.inequalities + self.equalities)

    def dump(self) -> str:
        """One line per item: objective, inequalities, equalities, constants."""
        lines = [f"minimize {self.objective}"]
        lines += [f"{c.expr} <= 1  # {c.tag}" for c in self.inequalities]
        lines += [f"{c.expr} == 1  # {c.tag}" for c in self.equalities]
        lines += [f"const {k} = {v!r}" for k, v in sorted(self.constants.items())]
        return "\n".join(lines) + "\n"


@dataclass
class SignomialProgram:
    """Minimize a signomial subject to signomial constraints.

    ``context`` carries the encoding details (model, variable families,
    lifting information) that later transformations need.
    """

    objective: Signomial
    inequalities: list[Constraint] = field(default_factory=list)
    equalities: list[Constraint] = field(default_factory=list)
    variables: list[Var] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)
    context: object = None

    def constraints(self, tag: str | None = None) -> list[Constraint]:
        cs = self.inequalities + self.equalities
        return cs if tag is None else [c for c in cs if c.tag == tag]

    def max_violation(self, u) -> float:
        worst = 0.0
        for c in self.inequalities:
            worst = max(worst, c.residual(u))
        for c in self.equalities:
            worst = max(worst, abs(c.residual(u)))
        return worst
