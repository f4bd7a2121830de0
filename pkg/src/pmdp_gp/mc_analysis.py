"""Exact reachability probabilities and expected costs on Markov chains."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import MarkovChain, Specification

DIRECT_LIMIT = 50_000
GS_TOL = 1e-10
GS_MAX_SWEEPS = 100_000


class AnalysisError(RuntimeError):
    pass


class SingularSystemError(AnalysisError):
    pass


class CostDivergenceError(AnalysisError):
    def __init__(self, states):
        self.states = sorted(states)
        super().__init__(f"goal reached with probability < 1 from states {self.states[:10]}")


@dataclass
class SparseLinearSystem:
    """``matrix @ x = rhs`` over the unknown states listed in ``index``."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    index: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.index)

    def residual(self, x: np.ndarray) -> float:
        if not len(x):
            return 0.0
        return float(np.max(np.abs(self.matrix @ x - self.rhs)))


def _graph_sets(mc: MarkovChain, targets: set[int]) -> tuple[set[int], set[int]]:
    """(prob0, prob1) of the chain, using edges with positive probability."""
    n = mc.n_states
    preds = [[] for _ in range(n)]
    coo = mc.matrix.tocoo()
    for s, t, v in zip(coo.row, coo.col, coo.data):
        if v > 0:
            preds[t].append(s)

    def back(start, blocked=()):
        seen = set(start)
        q = deque(seen)
        while q:
            t = q.popleft()
            for s in preds[t]:
                if s not in seen and s not in blocked:
                    seen.add(s)
                    q.append(s)
        return seen

    can_reach = back(targets)
    zero = set(range(n)) - can_reach
    escapes = back(zero, blocked=targets)
    one = set(range(n)) - escapes
    return zero, one


def _solve(system: SparseLinearSystem) -> np.ndarray:
    if system.dimension == 0:
        return np.zeros(0)
    A = system.matrix.tocsc()
    if system.dimension <= DIRECT_LIMIT:
        try:
            x = spla.splu(A).solve(system.rhs)
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from None
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("non-finite solution")
        return x
    return gauss_seidel(system.matrix, system.rhs)


def gauss_seidel(A: sp.csr_matrix, b: np.ndarray, tol: float = GS_TOL, max_sweeps: int = GS_MAX_SWEEPS) -> np.ndarray:
    A = sp.csr_matrix(A)
    lower = sp.tril(A, format="csr")
    upper = sp.triu(A, k=1, format="csr")
    if np.any(A.diagonal() == 0):
        raise SingularSystemError("zero on the diagonal")
    x = np.zeros_like(b)
    for _ in range(max_sweeps):
        x = spla.spsolve_triangular(lower, b - upper @ x, lower=True)
        if np.max(np.abs(A @ x - b)) <= tol:
            return x
    raise SingularSystemError("Gauss-Seidel did not converge")


def reachability_system(mc: MarkovChain, targets: Iterable[int]) -> tuple[SparseLinearSystem, set[int], set[int]]:
    targets = set(targets)
    zero, one = _graph_sets(mc, targets)
    maybe = np.array(sorted(set(range(mc.n_states)) - zero - one), dtype=int)
    P = mc.matrix.tocsr()
    sub = P[maybe][:, maybe]
    one_idx = np.array(sorted(one), dtype=int)
    rhs = np.asarray(P[maybe][:, one_idx].sum(axis=1)).ravel() if len(one_idx) else np.zeros(len(maybe))
    A = (sp.identity(len(maybe), format="csr") - sub).tocsr()
    return SparseLinearSystem(A, rhs, maybe), zero, one


def reachability(mc: MarkovChain, targets: Iterable[int]) -> np.ndarray:
    """Probability of eventually reaching ``targets`` from every state."""
    system, zero, one = reachability_system(mc, targets)
    x = np.zeros(mc.n_states)
    x[sorted(one)] = 1.0
    if system.dimension:
        x[system.index] = np.clip(_solve(system), 0.0, 1.0)
    return x


def expected_cost(mc: MarkovChain, goal: Iterable[int], costs: Sequence[float] | None = None) -> np.ndarray:
    """Expected accumulated cost until ``goal``.

    Raises CostDivergenceError when a state reachable from the initial state
    reaches the goal with probability below one. Unreachable diverging states
    are reported as ``inf``.
    """
    goal = set(goal)
    costs = mc.costs if costs is None else np.asarray(costs, dtype=float)
    zero, one = _graph_sets(mc, goal)
    diverge = set(range(mc.n_states)) - one
    if diverge:
        reach = _forward(mc, mc.initial, stop=goal)
        bad = diverge & reach
        if bad:
            raise CostDivergenceError(bad)
    unknown = np.array(sorted(one - goal), dtype=int)
    x = np.zeros(mc.n_states)
    x[sorted(diverge)] = np.inf
    if len(unknown):
        P = mc.matrix.tocsr()
        A = (sp.identity(len(unknown), format="csr") - P[unknown][:, unknown]).tocsr()
        system = SparseLinearSystem(A, costs[unknown], unknown)
        x[unknown] = _solve(system)
    return x


def _forward(mc: MarkovChain, start: int, stop: set[int] = frozenset()) -> set[int]:
    P = mc.matrix.tocsr()
    seen = {start}
    q = deque([start])
    while q:
        s = q.popleft()
        if s in stop:
            continue
        row = P.indices[P.indptr[s]:P.indptr[s + 1]]
        vals = P.data[P.indptr[s]:P.indptr[s + 1]]
        for t, v in zip(row, vals):
            if v > 0 and t not in seen:
                seen.add(int(t))
                q.append(int(t))
    return seen


@dataclass
class CheckResult:
    spec: Specification
    value: float
    satisfied: bool


def check(mc: MarkovChain, specs: Iterable[Specification]) -> list[CheckResult]:
    out = []
    for spec in specs:
        if spec.kind == "reach":
            value = float(reachability(mc, spec.target)[mc.initial])
        else:
            value = float(expected_cost(mc, spec.target)[mc.initial])
        out.append(CheckResult(spec, value, value <= spec.threshold))
    return out
