"""Monomials, posynomials and signomials over strictly positive variables.

A signomial is stored as a mapping from an exponent key (a sorted tuple of
``(variable, exponent)`` pairs with nonzero exponents) to a real coefficient.
Values are immutable after construction.

The textual grammar understood by :func:`parse` and produced by ``str()``::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' exponent)?
    atom   := NUMBER | IDENT | '(' expr ')'
    exponent := ['-'] NUMBER | '(' ['-'] NUMBER ')'
"""
from __future__ import annotations

import enum
import math
import re
from typing import Iterable, Mapping

ZERO_TOL = 1e-15

ExpKey = tuple  # tuple[tuple[str, float], ...]


class VarKind(str, enum.Enum):
    PARAMETER = "parameter"
    LIFTING = "lifting"
    SCHEDULER = "scheduler"
    PROBABILITY = "probability"
    COST = "cost"


class Var(str):
    """A variable name that also remembers what role it plays.

    Equality and hashing are those of the underlying string, so a ``Var`` can
    be used interchangeably with its name as a dictionary key.
    """

    def __new__(cls, name: str, kind: VarKind | str = VarKind.PARAMETER):
        obj = super().__new__(cls, name)
        obj.kind = VarKind(kind)
        return obj

    def __repr__(self) -> str:
        return f"Var({str.__repr__(self)}, {self.kind.value!r})"

    def __reduce__(self):
        return (Var, (str(self), self.kind.value))


class Shape(str, enum.Enum):
    MONOMIAL = "monomial"
    POSYNOMIAL = "posynomial"
    SIGNOMIAL = "general-signomial"


class ExpressionError(ValueError):
    pass


class MissingVariableError(KeyError):
    def __init__(self, var: str):
        super().__init__(var)
        self.var = var

    def __str__(self) -> str:
        return f"no value assigned to variable {self.var!r}"


def _key(exps: Mapping[str, float] | Iterable[tuple[str, float]]) -> ExpKey:
    items = exps.items() if isinstance(exps, Mapping) else exps
    acc: dict[str, float] = {}
    for v, a in items:
        acc[v] = acc.get(v, 0.0) + float(a)
    return tuple(sorted((v, a) for v, a in acc.items() if a != 0.0))


def _mul_keys(k1: ExpKey, k2: ExpKey) -> ExpKey:
    if not k1:
        return k2
    if not k2:
        return k1
    return _key(list(k1) + list(k2))


class Signomial:
    """Sum of terms ``c * x1^a1 * ... * xn^an`` with real ``c`` and ``a``."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[ExpKey, float] | None = None):
        clean: dict[ExpKey, float] = {}
        if terms:
            for k, c in terms.items():
                c = float(c)
                if abs(c) > ZERO_TOL:
                    clean[k] = c
        self._terms = clean
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def _from_pairs(cls, pairs: Iterable[tuple[ExpKey, float]]) -> "Signomial":
        acc: dict[ExpKey, float] = {}
        for k, c in pairs:
            acc[k] = acc.get(k, 0.0) + c
        return Signomial(acc)

    @classmethod
    def constant(cls, c: float) -> "Signomial":
        return Signomial({(): c})

    @classmethod
    def var(cls, name: str) -> "Signomial":
        return Signomial({((name, 1.0),): 1.0})

    @classmethod
    def term(cls, coefficient: float, exponents: Mapping[str, float]) -> "Signomial":
        return Signomial({_key(exponents): coefficient})

    # -- structure ----------------------------------------------------
    @property
    def terms(self) -> dict[ExpKey, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v for k in self._terms for v, _ in k)

    @property
    def is_constant(self) -> bool:
        return all(k == () for k in self._terms)

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ExpressionError(f"{self} is not constant")
        return self._terms.get((), 0.0)

    def classify(self) -> Shape:
        if not self._terms or any(c < 0 for c in self._terms.values()):
            return Shape.SIGNOMIAL
        if len(self._terms) == 1:
            return Shape.MONOMIAL
        return Shape.POSYNOMIAL

    @property
    def is_monomial(self) -> bool:
        return self.classify() is Shape.MONOMIAL

    @property
    def is_posynomial(self) -> bool:
        return self.classify() is not Shape.SIGNOMIAL

    def degree(self) -> float | None:
        """Common total degree of all terms, or None when terms differ."""
        degs = {sum(a for _, a in k) for k in self._terms}
        return degs.pop() if len(degs) == 1 else None

    # -- arithmetic ---------------------------------------------------
    @staticmethod
    def _coerce(other) -> "Signomial":
        if isinstance(other, Signomial):
            return other
        if isinstance(other, (int, float)):
            return Signomial.constant(float(other))
        if isinstance(other, str):
            return Signomial.var(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Signomial._from_pairs(list(self._terms.items()) + list(other._terms.items()))

    __radd__ = __add__

    def __neg__(self):
        return Signomial({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Signomial._from_pairs(
            (_mul_keys(k1, k2), c1 * c2)
            for k1, c1 in self._terms.items()
            for k2, c2 in other._terms.items()
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if len(other._terms) != 1:
            raise ExpressionError(f"cannot divide by non-monomial {other}")
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other / self

    def reciprocal(self) -> "Signomial":
        if len(self._terms) != 1:
            raise ExpressionError(f"reciprocal of non-monomial {self}")
        (k, c), = self._terms.items()
        return Signomial({tuple((v, -a) for v, a in k): 1.0 / c})

    def __pow__(self, exponent):
        exponent = float(exponent)
        if len(self._terms) == 1:
            (k, c), = self._terms.items()
            if c <= 0 and not exponent.is_integer():
                raise ExpressionError("real power of a negative term")
            return Signomial({_key((v, a * exponent) for v, a in k): c ** exponent})
        if self.is_zero:
            if exponent > 0:
                return Signomial()
            raise ExpressionError("nonpositive power of zero")
        if not exponent.is_integer() or exponent < 0:
            raise ExpressionError(f"power {exponent} of non-monomial {self}")
        out = Signomial.constant(1.0)
        for _ in range(int(exponent)):
            out = out * self
        return out

    # -- comparison ---------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = Signomial.constant(float(other))
        if not isinstance(other, Signomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def isclose(self, other: "Signomial", rel: float = 1e-12, abs_: float = 1e-15) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(
            math.isclose(self._terms.get(k, 0.0), other._terms.get(k, 0.0), rel_tol=rel, abs_tol=abs_)
            for k in keys
        )

    # -- calculus -----------------------------------------------------
    def evaluate(self, u: Mapping[str, float]) -> float:
        total = 0.0
        for k, c in self._terms.items():
            t = c
            for v, a in k:
                try:
                    x = u[v]
                except KeyError:
                    raise MissingVariableError(v) from None
                t *= x ** a if a != 1.0 else x
            total += t
        return total

    def partial(self, v: str) -> "Signomial":
        out: dict[ExpKey, float] = {}
        for k, c in self._terms.items():
            for i, (w, a) in enumerate(k):
                if w == v:
                    nk = k[:i] + (((w, a - 1.0),) if a != 1.0 else ()) + k[i + 1:]
                    out[nk] = out.get(nk, 0.0) + c * a
                    break
        return Signomial(out)

    def substitute(self, v: str, replacement) -> "Signomial":
        replacement = self._coerce(replacement)
        result = Signomial()
        cache: dict[float, Signomial] = {}
        for k, c in self._terms.items():
            rest = []
            power = 0.0
            for w, a in k:
                if w == v:
                    power = a
                else:
                    rest.append((w, a))
            base = Signomial({tuple(rest): c})
            if power == 0.0:
                result = result + base
                continue
            if power not in cache:
                if len(replacement) != 1 and not (power.is_integer() and power > 0):
                    raise ExpressionError(
                        f"cannot substitute non-monomial {replacement} into {v}^{power}"
                    )
                cache[power] = replacement ** power
            result = result + base * cache[power]
        return result

    def partial_evaluate(self, values: Mapping[str, float]) -> "Signomial":
        """Fold the given variables to constants."""
        pairs = []
        for k, c in self._terms.items():
            rest = []
            for w, a in k:
                if w in values:
                    c *= values[w] ** a
                else:
                    rest.append((w, a))
            pairs.append((tuple(rest), c))
        return Signomial._from_pairs(pairs)

    def normalize(self) -> "Signomial":
        return Signomial(self._terms)

    # -- text ---------------------------------------------------------
    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for i, (k, c) in enumerate(sorted(self._terms.items(), key=lambda kc: kc[0])):
            body = _format_term(abs(c), k)
            if i == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append((" - " if c < 0 else " + ") + body)
        return "".join(parts)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({str(self)!r})"


def _format_term(c: float, key: ExpKey) -> str:
    factors = []
    if c != 1.0 or not key:
        factors.append(repr(c))
    for v, a in key:
        factors.append(v if a == 1.0 else f"{v}^{_fmt_exp(a)}")
    return "*".join(factors)


def _fmt_exp(a: float) -> str:
    if a.is_integer() and abs(a) < 1e15:
        return str(int(a))
    return repr(a)


class Monomial(Signomial):
    """A single positive term. Arithmetic on monomials yields Signomials."""

    __slots__ = ()

    def __init__(self, coefficient: float = 1.0, exponents: Mapping[str, float] | None = None):
        if not coefficient > 0:
            raise ExpressionError(f"monomial coefficient must be positive, got {coefficient}")
        super().__init__({_key(exponents or {}): coefficient})

    @classmethod
    def from_signomial(cls, s: Signomial) -> "Monomial":
        if not s.is_monomial:
            raise ExpressionError(f"{s} is not a monomial")
        (k, c), = s.items()
        return cls(c, dict(k))

    @property
    def coefficient(self) -> float:
        return next(iter(self._terms.values()))

    @property
    def exponents(self) -> dict[str, float]:
        return dict(next(iter(self._terms)))


class Posynomial(Signomial):
    __slots__ = ()

    def __init__(self, terms: Mapping[ExpKey, float] | Iterable[Monomial]):
        if not isinstance(terms, Mapping):
            acc: dict[ExpKey, float] = {}
            for m in terms:
                for k, c in m.items():
                    acc[k] = acc.get(k, 0.0) + c
            terms = acc
        super().__init__(terms)
        if not self._terms or any(c <= 0 for c in self._terms.values()):
            raise ExpressionError("posynomial needs at least one term, all coefficients positive")

    @classmethod
    def from_signomial(cls, s: Signomial) -> "Posynomial":
        if not s.is_posynomial:
            raise ExpressionError(f"{s} is not a posynomial")
        return cls(s.terms)


# -- functional API ------------------------------------------------------

def evaluate(expr: Signomial, u: Mapping[str, float]) -> float:
    return expr.evaluate(u)


def partial_derivative(expr: Signomial, v: str) -> Signomial:
    return expr.partial(v)


def classify(expr: Signomial) -> Shape:
    return expr.classify()


def substitute(expr: Signomial, v: str, replacement) -> Signomial:
    return expr.substitute(v, replacement)


def const(c: float) -> Signomial:
    return Signomial.constant(c)


def var(name: str) -> Signomial:
    return Signomial.var(name)


# -- parser --------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_.]*)|(?P<op>[-+*/^()]))"
)


class ParseError(ExpressionError):
    pass


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].strip()[:1]!r} in {text!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise ParseError(f"expected {value or 'token'} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self) -> Signomial:
        e = self.expr()
        if self.i != len(self.toks):
            raise ParseError(f"trailing input {self.toks[self.i][1]!r} in {self.text!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            f = self.unary()
            e = e * f if op == "*" else e / f
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            base = base ** self.exponent()
        return base

    def exponent(self) -> float:
        paren = self.peek()[1] == "("
        if paren:
            self.take("(")
        sign = 1.0
        if self.peek()[1] == "-":
            self.take()
            sign = -1.0
        kind, val = self.take()
        if kind != "num":
            raise ParseError(f"exponent must be a numeric literal in {self.text!r}")
        if paren:
            self.take(")")
        return sign * float(val)

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return Signomial.constant(float(val))
        if kind == "ident":
            return Signomial.var(val)
        if val == "(":
            e = self.expr()
            self.take(")")
            return e
        raise ParseError(f"unexpected {val!r} in {self.text!r}")


def parse(text: str) -> Signomial:
    """Parse an expression written in the grammar described in the module docstring."""
    return _Parser(text).parse()
