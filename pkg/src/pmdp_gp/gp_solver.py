"""Geometric programs solved in log space by a primal-dual interior-point method.

With ``x = exp(y)`` every posynomial ``sum_k c_k prod x_i^a_ik`` becomes
``exp(lse(A y + b))`` with ``b = log c``. The program

    minimize lse(A_0 y + b_0)  s.t.  lse(A_j y + b_j) <= 0,  G y = h

is convex. Phase 1 minimizes a common slack ``t`` over all inequalities to
either find a strictly feasible start or certify infeasibility; phase 2 runs
a Mehrotra predictor-corrector iteration from that start.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .expressions import Signomial
from .programs import GeometricProgram, ProgramError

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"
NUMERICAL_FAILURE = "numerical-failure"

INFEASIBILITY_THRESHOLD = 1e-8
WARM_START_SLACK = 1e-3
STALL_ITERS = 8
REDUCED_TOL = 1e-5


@dataclass(frozen=True)
class SolverOptions:
    feastol: float = 1e-8
    gaptol: float = 1e-8
    max_iter: int = 200
    phase1_target: float = -1.0
    verbose: bool = False


@dataclass
class ConvexForm:
    """Stacked log-sum-exp blocks. Block 0 is the objective."""

    variables: list[str]
    A: sp.csr_matrix
    b: np.ndarray
    starts: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    ineq_tags: list[str] = field(default_factory=list)
    eq_tags: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def m(self) -> int:
        return len(self.starts) - 1

    @property
    def p(self) -> int:
        return self.G.shape[0]

    def __post_init__(self):
        K = self.A.shape[0]
        sizes = np.diff(np.append(self.starts, K))
        self.block = np.repeat(np.arange(len(self.starts)), sizes)
        self.At = self.A.T.tocsr()
        # fixed sparsity pattern of the block gradient matrix D = B diag(w) A
        coo = self.A.tocoo()
        self._nz_row, self._nz_val = coo.row, coo.data
        pattern = sp.csr_matrix((np.ones(coo.nnz), (self.block[coo.row], coo.col)),
                                shape=(len(self.starts), self.n))
        pattern.sum_duplicates()
        pattern.sort_indices()
        self._D_indices, self._D_indptr = pattern.indices, pattern.indptr
        pos = {(r, c): k for r in range(pattern.shape[0])
               for k, c in zip(range(pattern.indptr[r], pattern.indptr[r + 1]),
                               pattern.indices[pattern.indptr[r]:pattern.indptr[r + 1]])}
        self._nz_slot = np.array([pos[(int(self.block[r]), int(c))] for r, c in zip(coo.row, coo.col)],
                                 dtype=np.int64)

    def values(self, y: np.ndarray):
        """Block values and softmax weights per term."""
        z = self.A @ y + self.b
        zmax = np.maximum.reduceat(z, self.starts)
        e = np.exp(z - zmax[self.block])
        S = np.add.reduceat(e, self.starts)
        return zmax + np.log(S), e / S[self.block]

    def combined_gradient(self, w: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """``sum_j theta_j grad f_j`` without forming the gradient rows."""
        return self.At @ (theta[self.block] * w)

    def gradients(self, w: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self._nz_slot, weights=w[self._nz_row] * self._nz_val,
                           minlength=len(self._D_indices))
        return sp.csr_matrix((data, self._D_indices, self._D_indptr), shape=(len(self.starts), self.n))

    def evaluate(self, y: np.ndarray):
        """Values, softmax weights per term, and gradients (as sparse rows) of all blocks."""
        vals, w = self.values(y)
        return vals, w, self.gradients(w)

    def hessian(self, w: np.ndarray, D: sp.csr_matrix, theta: np.ndarray) -> sp.csr_matrix:
        """sum_j theta_j * Hessian of block j."""
        tw = theta[self.block] * w
        H = self.At @ sp.diags(tw) @ self.A - D.T @ sp.diags(theta) @ D
        return H.tocsr()


@dataclass
class SolveResult:
    status: str
    x: dict[str, float]
    y: np.ndarray
    objective: float
    iterations: int
    wall_time: float
    primal_residual: float = math.nan
    dual_residual: float = math.nan
    gap: float = math.nan
    duals: np.ndarray | None = None
    phase1_value: float = math.nan
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def to_convex(gp: GeometricProgram) -> ConvexForm:
    """Log-transform a geometric program; fixed constants are folded in."""
    gp.validate()
    consts = gp.constants
    fold = (lambda e: e.partial_evaluate(consts)) if consts else (lambda e: e)
    obj = fold(gp.objective)
    ineqs = [(fold(c.expr), c.tag) for c in gp.inequalities]
    eqs = [(fold(c.expr), c.tag) for c in gp.equalities]

    names: list[str] = []
    seen = set()
    ordered = list(gp.variables) if gp.variables else []
    for v in ordered:
        if v not in consts and v not in seen:
            seen.add(v)
            names.append(v)
    extra = set(obj.variables)
    for e, _ in ineqs + eqs:
        extra |= e.variables
    for v in sorted(extra - seen):
        names.append(v)
        seen.add(v)
    col = {v: i for i, v in enumerate(names)}

    rows, cols, vals, b, starts = [], [], [], [], []
    kept_tags = []
    k = 0

    def add_block(expr: Signomial):
        nonlocal k
        starts.append(k)
        if expr.is_zero:
            raise ProgramError("empty posynomial")
        for key, c in expr.items():
            if c <= 0:
                raise ProgramError(f"non-positive coefficient in {expr}")
            for v, a in key:
                rows.append(k)
                cols.append(col[v])
                vals.append(a)
            b.append(math.log(c))
            k += 1

    if obj.is_zero:
        obj = Signomial.constant(1.0)
    add_block(obj)
    for e, tag in ineqs:
        if e.is_constant:
            if e.constant_value() > 1.0 + 1e-12:
                # constant violation: keep as a block so phase 1 reports it
                add_block(e)
                kept_tags.append(tag)
            continue
        add_block(e)
        kept_tags.append(tag)

    g_rows, g_cols, g_vals, h, eq_tags = [], [], [], [], []
    for e, tag in eqs:
        (key, c), = e.items()
        if not key:
            if abs(math.log(c)) > 1e-12:
                g_rows.append(len(h))
                g_cols.append(0)
                g_vals.append(0.0)
                h.append(-math.log(c))
                eq_tags.append(tag)
            continue
        for v, a in key:
            g_rows.append(len(h))
            g_cols.append(col[v])
            g_vals.append(a)
        h.append(-math.log(c))
        eq_tags.append(tag)

    A = sp.csr_matrix((vals, (rows, cols)), shape=(k, len(names)))
    G = sp.csr_matrix((g_vals, (g_rows, g_cols)), shape=(len(h), len(names)))
    return ConvexForm(names, A, np.array(b, dtype=float), np.array(starts, dtype=int), G,
                      np.array(h, dtype=float), kept_tags, eq_tags)


# -- linear algebra ---------------------------------------------------------

def _kkt_factor(K: sp.csr_matrix, G: sp.csr_matrix):
    """Factor the reduced KKT matrix; returns a solver ``(r1, r2) -> (dy, dnu)``.

    ``K`` is symmetrically scaled to unit diagonal first, so that the small
    diagonal regularization (raised only if the factorization fails) and the
    refinement against the unregularized system work on a balanced matrix.
    """
    n, p = K.shape[0], G.shape[0]
    d = K.diagonal()
    scale = 1.0 / np.sqrt(np.maximum(d, 1.0))
    S = sp.diags(scale)
    Ks = (S @ K @ S).tocsr()
    Gs = (G @ S).tocsr() if p else G
    exact = sp.bmat([[Ks, Gs.T], [Gs, None]], format="csr") if p else Ks
    delta = 1e-10
    for _ in range(6):
        if p:
            M = sp.bmat([[Ks + delta * sp.identity(n), Gs.T], [Gs, -delta * sp.identity(p)]], format="csc")
        else:
            M = (Ks + delta * sp.identity(n)).tocsc()
        try:
            lu = spla.splu(M)
        except RuntimeError:
            delta *= 100.0
            continue

        def solver(r1, r2, lu=lu):
            rhs = np.concatenate([scale * r1, r2]) if p else scale * r1
            sol = lu.solve(rhs)
            res = rhs - exact @ sol
            err = np.max(np.abs(res), initial=0.0)
            for _ in range(5):
                cand = sol + lu.solve(res)
                res_c = rhs - exact @ cand
                err_c = np.max(np.abs(res_c), initial=0.0)
                if not err_c < 0.5 * err:
                    if err_c < err:
                        sol = cand
                    break
                sol, res, err = cand, res_c, err_c
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError("non-finite Newton step")
            return scale * sol[:n], sol[n:]
        return solver
    raise np.linalg.LinAlgError("KKT system singular after regularization")


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


# -- primal-dual interior point ----------------------------------------------

@dataclass
class _Outcome:
    status: str
    y: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    f0: float
    iterations: int
    rp: float
    rd: float
    gap: float
    message: str = ""


def _pdip(cf: ConvexForm, y0: np.ndarray, opts: SolverOptions, stop=None, tag: str = "phase2") -> _Outcome:
    """Feasible-start primal-dual method. ``y0`` must satisfy all inequalities strictly."""
    m, p = cf.m, cf.p
    y = y0.copy()
    vals, w, D = cf.evaluate(y)
    s = -vals[1:]
    if m and np.any(s <= 0):
        return _Outcome(NUMERICAL_FAILURE, y, np.zeros(m), np.zeros(p), vals[0], 0, math.nan, math.nan, math.nan,
                        "start point is not strictly feasible")
    lam = 1.0 / s if m else np.zeros(0)
    nu = np.zeros(p)
    Gt = cf.G.T.tocsr()

    def residuals(y, w, lam, nu):
        g0 = cf.combined_gradient(w, _unit_theta(cf))
        rd = cf.combined_gradient(w, np.concatenate([[1.0], lam])) + (Gt @ nu if p else 0.0)
        rp = cf.G @ y - cf.h if p else np.zeros(0)
        return g0, rd, rp

    it = 0
    sigma_floor = 0.0
    worst_best, stalled = math.inf, 0
    g0, rd, rp = residuals(y, w, lam, nu)
    for it in range(1, opts.max_iter + 1):
        gap = float(s @ lam) if m else 0.0
        f0 = float(vals[0])
        rd_norm = float(np.max(np.abs(rd))) if len(rd) else 0.0
        rp_norm = float(np.max(np.abs(rp))) if p else 0.0
        if opts.verbose or log.isEnabledFor(logging.DEBUG):
            log.debug("%s it=%3d f0=% .10e gap=%.2e rd=%.2e rp=%.2e", tag, it - 1, f0, gap, rd_norm, rp_norm)
        if stop is not None:
            verdict = stop(y, f0, gap)
            if verdict:
                return _Outcome(verdict, y, lam, nu, f0, it - 1, rp_norm, rd_norm, gap)
        if (rd_norm <= opts.feastol * (1.0 + float(np.max(np.abs(g0))))
                and rp_norm <= opts.feastol * (1.0 + float(np.max(np.abs(cf.h), initial=0.0)))
                and gap <= opts.gaptol * max(1.0, abs(f0))):
            return _Outcome(OPTIMAL, y, lam, nu, f0, it - 1, rp_norm, rd_norm, gap)
        # degenerate or nearly infeasible problems: progress stalls at the accuracy of the KKT solves
        worst = max(rd_norm / (1.0 + float(np.max(np.abs(g0)))),
                    rp_norm / (1.0 + float(np.max(np.abs(cf.h), initial=0.0))),
                    gap / max(1.0, abs(f0)))
        if worst < 0.5 * worst_best:
            worst_best, stalled = worst, 0
        else:
            stalled += 1
        if stalled >= STALL_ITERS and worst <= REDUCED_TOL:
            return _Outcome(OPTIMAL, y, lam, nu, f0, it - 1, rp_norm, rd_norm, gap,
                            f"reduced accuracy: residuals stalled at {worst:.1e}")

        theta = np.concatenate([[1.0], lam])
        # H + Df' diag(lam/s) Df with H = A' diag(theta w) A - D' diag(theta) D
        c = np.concatenate([[-1.0], lam / s - lam])
        K = (cf.At @ sp.diags(theta[cf.block] * w) @ cf.A + D.T @ sp.diags(c) @ D).tocsr()
        Df = D[1:]
        mu = gap / m if m else 0.0
        base = -(g0 + (Gt @ nu if p else 0.0))
        try:
            solver = _kkt_factor(K, cf.G)
        except np.linalg.LinAlgError as exc:
            return _Outcome(NUMERICAL_FAILURE, y, lam, nu, f0, it, rp_norm, rd_norm, gap, str(exc))

        def direction(target: np.ndarray):
            rhs1 = base - (Df.T @ (target / s) if m else 0.0)
            dy, dnu = solver(rhs1, -rp)
            if m:
                ds = -(Df @ dy)
                dlam = -lam + target / s - (lam / s) * ds
            else:
                ds = dlam = np.zeros(0)
            return dy, dnu, ds, dlam

        if m:
            # predictor
            dy_a, dnu_a, ds_a, dl_a = direction(np.zeros(m))
            a_aff = min(_max_step(s, ds_a), _max_step(lam, dl_a))
            mu_aff = float((s + a_aff * ds_a) @ (lam + a_aff * dl_a)) / m
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
            # short previous steps mean the iterate hugs curved constraints: recentre
            sigma = max(sigma, sigma_floor)
            target = sigma * mu * np.ones(m) - ds_a * dl_a
            dy, dnu, ds, dlam = direction(target)
        else:
            dy, dnu, ds, dlam = direction(np.zeros(0))
            sigma = 0.0

        step = _line_search(cf, y, lam, nu, s, dy, dnu, ds, dlam, sigma * mu, rd, rp, Gt)
        if step is None and m:
            # retry with a pure centering direction
            target = max(0.1 * mu, 1e-14) * np.ones(m)
            dy, dnu, ds, dlam = direction(target)
            step = _line_search(cf, y, lam, nu, s, dy, dnu, ds, dlam, float(target[0]), rd, rp, Gt)
        if step is None:
            return _Outcome(NUMERICAL_FAILURE, y, lam, nu, f0, it, rp_norm, rd_norm, gap, "line search failed")
        alpha_taken = float(np.max(np.abs(step[0] - y)) / max(float(np.max(np.abs(dy))), 1e-300)) if len(dy) else 1.0
        sigma_floor = 0.5 if alpha_taken < 0.2 else (0.1 if alpha_taken < 0.5 else 0.0)
        y, lam, nu, vals, w = step
        D = cf.gradients(w)
        s = -vals[1:]
        g0, rd, rp = residuals(y, w, lam, nu)

    gap = float(s @ lam) if m else 0.0
    return _Outcome(MAX_ITERATIONS, y, lam, nu, float(vals[0]), opts.max_iter,
                    float(np.max(np.abs(rp))) if p else 0.0, float(np.max(np.abs(rd))) if len(rd) else 0.0, gap)


def _line_search(cf, y, lam, nu, s, dy, dnu, ds, dlam, mu_target, rd, rp, Gt):
    """Backtrack from the fraction-to-boundary step.

    A step is accepted when the primal-dual residual norm drops, or when it
    gives Armijo decrease of the primal barrier function at ``mu_target``.
    The second test keeps progress going on strongly curved constraints
    where the residual norm is a poor guide.
    """
    m, p = cf.m, cf.p
    alpha = 1.0
    if m:
        alpha = min(1.0, 0.99 * _max_step(lam, dlam), 0.99 * _max_step(s, ds))
        if alpha <= 0:
            return None

    def merit(rd_, rc_, rp_):
        return math.sqrt(float(rd_ @ rd_) + float(rc_ @ rc_) + float(rp_ @ rp_))

    r0 = merit(rd, s * lam - mu_target, rp)
    mu_b = max(mu_target, 1e-14)
    vals0, w0 = cf.values(y)
    g0 = cf.combined_gradient(w0, _unit_theta(cf))
    psi0 = float(vals0[0]) - (mu_b * float(np.sum(np.log(s))) if m else 0.0)
    slope = float(g0 @ dy) - (mu_b * float(np.sum(ds / s)) if m else 0.0)
    use_barrier = slope < 0 and (not p or float(np.max(np.abs(rp)))
                                 <= 1e-9 * (1.0 + float(np.max(np.abs(cf.h), initial=0.0))))
    while alpha >= 1e-12:
        y1 = y + alpha * dy
        lam1 = lam + alpha * dlam
        nu1 = nu + alpha * dnu
        vals1, w1 = cf.values(y1)
        s1 = -vals1[1:]
        if np.all(np.isfinite(vals1)) and np.all(s1 > 0):
            rd1 = cf.combined_gradient(w1, np.concatenate([[1.0], lam1])) + (Gt @ nu1 if p else 0.0)
            rp1 = cf.G @ y1 - cf.h if p else np.zeros(0)
            if merit(rd1, s1 * lam1 - mu_target, rp1) <= (1.0 - 0.01 * alpha) * r0:
                return y1, lam1, nu1, vals1, w1
            if use_barrier:
                psi1 = float(vals1[0]) - (mu_b * float(np.sum(np.log(s1))) if m else 0.0)
                if psi1 <= psi0 + 1e-4 * alpha * slope:
                    return y1, lam1, nu1, vals1, w1
        alpha *= 0.5
    return None


def _unit_theta(cf) -> np.ndarray:
    t = np.zeros(len(cf.starts))
    t[0] = 1.0
    return t


# -- public API -------------------------------------------------------------

def _start_point(cf: ConvexForm) -> np.ndarray | None:
    if not cf.p:
        return np.zeros(cf.n)
    y0, *_ = np.linalg.lstsq(cf.G.toarray(), cf.h, rcond=None)
    if np.max(np.abs(cf.G @ y0 - cf.h)) > 1e-8 * (1.0 + np.max(np.abs(cf.h))):
        return None
    return y0


def _phase1_form(cf: ConvexForm, target: float) -> ConvexForm:
    n = cf.n
    K = cf.A.shape[0]
    obj_rows = cf.starts[1] if cf.m else K
    cons = cf.A[obj_rows:]
    t_col = sp.csr_matrix(-np.ones((cons.shape[0], 1)))
    A = sp.vstack([
        sp.csr_matrix(([1.0], ([0], [n])), shape=(1, n + 1)),
        sp.hstack([cons, t_col]),
        sp.csr_matrix(([-1.0], ([0], [n])), shape=(1, n + 1)),
    ]).tocsr()
    b = np.concatenate([[0.0], cf.b[obj_rows:], [target]])
    starts = np.concatenate([[0], cf.starts[1:] - obj_rows + 1, [1 + cons.shape[0]]])
    G = sp.hstack([cf.G, sp.csr_matrix((cf.p, 1))]).tocsr()
    return ConvexForm(cf.variables + ["__phase1_slack"], A, b, starts.astype(int), G, cf.h.copy(),
                      cf.ineq_tags + ["phase1-floor"], cf.eq_tags)


@dataclass
class Phase1Result:
    feasible: bool | None
    y: np.ndarray | None
    slack: float
    lower_bound: float
    iterations: int
    status: str


def phase1(cf: ConvexForm, opts: SolverOptions = SolverOptions(), y0: np.ndarray | None = None) -> Phase1Result:
    """Minimize a common slack ``t`` with ``lse_j(y) <= t``; infeasible iff ``t* > 1e-8``.

    ``y0`` is used as the starting point when it satisfies the equalities.
    """
    if y0 is None or (cf.p and np.max(np.abs(cf.G @ y0 - cf.h)) > 1e-9 * (1.0 + np.max(np.abs(cf.h)))):
        y0 = _start_point(cf)
    if y0 is None:
        return Phase1Result(False, None, math.inf, math.inf, 0, INFEASIBLE)
    if cf.m == 0:
        return Phase1Result(True, y0, -math.inf, -math.inf, 0, OPTIMAL)
    vals = cf.values(y0)[0][1:]
    if np.max(vals) < opts.phase1_target:
        return Phase1Result(True, y0, float(np.max(vals)), -math.inf, 0, OPTIMAL)
    target = opts.phase1_target
    pf = _phase1_form(cf, target)
    t0 = max(float(np.max(vals)) + 1.0, target + 1.0)
    z0 = np.append(y0, t0)

    def stop(z, f0, gap):
        t = z[-1]
        if t <= target + 0.5 * abs(target) or (t < 0 and gap <= 0.1 * abs(t)):
            return "feasible"
        if t - gap > INFEASIBILITY_THRESHOLD:
            return "infeasible"
        return None

    out = _pdip(pf, z0, opts, stop=stop, tag="phase1")
    t = float(out.y[-1])
    lower = t - out.gap if not math.isnan(out.gap) else -math.inf
    y = out.y[:-1]
    if out.status == "feasible" or (out.status == OPTIMAL and t < 0):
        true_t = float(np.max(cf.values(y)[0][1:]))
        if true_t < 0:
            return Phase1Result(True, y, true_t, lower, out.iterations, OPTIMAL)
    if out.status == "infeasible" or (out.status == OPTIMAL and t > INFEASIBILITY_THRESHOLD):
        return Phase1Result(False, None, t, lower, out.iterations, INFEASIBLE)
    if out.status == OPTIMAL:
        # optimal slack within [0, threshold]: feasible set has no interior
        return Phase1Result(True, None, t, lower, out.iterations, OPTIMAL)
    return Phase1Result(None, None, t, lower, out.iterations, out.status)


def solve_convex(cf: ConvexForm, opts: SolverOptions = SolverOptions(), start: np.ndarray | None = None) -> SolveResult:
    t_start = time.perf_counter()
    if cf.n == 0:
        raise ProgramError("geometric program has no variables")
    p1_value = math.nan
    p1_iters = 0
    if start is not None and (cf.m == 0 or np.max(cf.values(start)[0][1:]) < -WARM_START_SLACK) and \
            (not cf.p or np.max(np.abs(cf.G @ start - cf.h)) <= 1e-9):
        y0 = start
    else:
        p1 = phase1(cf, opts, start)
        p1_value, p1_iters = p1.slack, p1.iterations
        if p1.feasible is False:
            return SolveResult(INFEASIBLE, {}, np.zeros(cf.n), math.inf, p1_iters,
                               time.perf_counter() - t_start, phase1_value=p1.slack,
                               message="phase 1 certified infeasibility")
        if p1.y is None:
            return SolveResult(NUMERICAL_FAILURE, {}, np.zeros(cf.n), math.nan, p1_iters, time.perf_counter() - t_start,
                               phase1_value=p1.slack, message=f"phase 1 ended with {p1.status}")
        y0 = p1.y
    out = _pdip(cf, y0, opts)
    y = out.y
    x = {v: float(math.exp(yi)) for v, yi in zip(cf.variables, y)}
    return SolveResult(out.status, x, y, float(math.exp(out.f0)), out.iterations + p1_iters,
                       time.perf_counter() - t_start, out.rp, out.rd, out.gap, out.lam, p1_value, out.message)


def solve(gp: GeometricProgram | ConvexForm, opts: SolverOptions = SolverOptions(), start=None) -> SolveResult:
    """Solve a geometric program; values of folded constants are included in ``x``."""
    if isinstance(gp, ConvexForm):
        return solve_convex(gp, opts, start)
    cf = to_convex(gp)
    y_start = None
    if start is not None:
        y_start = np.array([math.log(start[v]) for v in cf.variables])
    res = solve_convex(cf, opts, y_start)
    if res.x:
        res.x.update(gp.constants)
    return res
