"""Bundled benchmark models and random model generators."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .expressions import Signomial
from .encoder import Objective
from .model import PMDP, Specification

DIE_COIN_STATES = 7


def _bern(param: str | None, prob: float = 0.5) -> tuple[Signomial, Signomial]:
    """(heads, tails) probabilities of a coin."""
    if param is None:
        return Signomial.constant(prob), Signomial.constant(1.0 - prob)
    x = Signomial.var(param)
    return x, 1.0 - x


def _die_rows(coins: list[str | None]):
    """Coin-state rows of one die as ``{state: [(succ, expr), ...]}`` over local names.

    Local names are 0..6 for coin states and ("d", k) for outcome k.
    """
    h = [_bern(c) for c in coins]
    return {
        0: [(1, h[0][0]), (2, h[0][1])],
        1: [(3, h[1][0]), (4, h[1][1])],
        2: [(5, h[2][0]), (6, h[2][1])],
        3: [(1, h[3][0]), (("d", 1), h[3][1])],
        4: [(("d", 3), h[4][0]), (("d", 2), h[4][1])],
        5: [(2, h[5][0]), (("d", 4), h[5][1])],
        6: [(("d", 6), h[6][0]), (("d", 5), h[6][1])],
    }


def knuth_yao_die(p: str = "p", q: str = "q") -> PMDP:
    """Knuth-Yao die with coin parameter ``p`` at s0, s3..s6 and ``q`` at s1, s2.

    States 0..6 are coin states s0..s6; states 7..12 are the outcomes 1..6.
    Every coin flip costs 1.
    """
    coins = [p, q, q, p, p, p, p]
    rows = _die_rows(coins)
    idx = lambda x: x if isinstance(x, int) else 6 + x[1]
    trans = {}
    costs = {}
    for s, succ in rows.items():
        trans[(s, "flip")] = {idx(t): e for t, e in succ}
        costs[(s, "flip")] = 1.0
    for k in range(1, 7):
        trans[(6 + k, "done")] = {6 + k: Signomial.constant(1.0)}
    labels = {f"die{k}": frozenset({6 + k}) for k in range(1, 7)}
    labels["done"] = frozenset(range(7, 13))
    names = [f"s{i}" for i in range(7)] + [f"die{k}" for k in range(1, 7)]
    params = tuple(dict.fromkeys(x for x in (p, q)))
    return PMDP(13, 0, trans, params, costs, labels, names)


def knuth_yao_fair() -> PMDP:
    """Parameter-free die with fair coins, the starting point for repair."""
    rows = _die_rows([None] * 7)
    idx = lambda x: x if isinstance(x, int) else 6 + x[1]
    trans = {(s, "flip"): {idx(t): e for t, e in succ} for s, succ in rows.items()}
    costs = {(s, "flip"): 1.0 for s in rows}
    for k in range(1, 7):
        trans[(6 + k, "done")] = {6 + k: Signomial.constant(1.0)}
    labels = {f"die{k}": frozenset({6 + k}) for k in range(1, 7)}
    labels["done"] = frozenset(range(7, 13))
    names = [f"s{i}" for i in range(7)] + [f"die{k}" for k in range(1, 7)]
    return PMDP(13, 0, trans, (), costs, labels, names)


def multi_dice(n_params: int = 2, n_dice: int = 2) -> PMDP:
    """Several parametric dice thrown in an order picked by a scheduler.

    The coin states of all dice are assigned parameters ``c0..c{n-1}`` round
    robin. A state records the local state of every die; while several dice
    are unfinished the scheduler chooses which one flips next. Labels
    ``sum{k}`` mark finished configurations with face total ``k`` and
    ``all{k}`` those where every die shows ``k``.
    """
    n_coins = DIE_COIN_STATES * n_dice
    if not 1 <= n_params <= n_coins:
        raise ValueError(f"n_params must be within 1..{n_coins}")
    params = [f"c{i}" for i in range(n_params)]
    coin_param = [params[i % n_params] for i in range(n_coins)]
    dice = [_die_rows(coin_param[d * DIE_COIN_STATES:(d + 1) * DIE_COIN_STATES]) for d in range(n_dice)]
    local = list(range(DIE_COIN_STATES)) + [("d", k) for k in range(1, 7)]

    configs = list(itertools.product(local, repeat=n_dice))
    index = {c: i for i, c in enumerate(configs)}
    trans, costs, labels = {}, {}, {}
    for c in configs:
        s = index[c]
        active = [d for d in range(n_dice) if isinstance(c[d], int)]
        if not active:
            trans[(s, "done")] = {s: Signomial.constant(1.0)}
            faces = [x[1] for x in c]
            labels.setdefault(f"sum{sum(faces)}", set()).add(s)
            if len(set(faces)) == 1:
                labels.setdefault(f"all{faces[0]}", set()).add(s)
            continue
        for d in active:
            row = {}
            for t, e in dice[d][c[d]]:
                nxt = c[:d] + (t,) + c[d + 1:]
                row[index[nxt]] = row.get(index[nxt], Signomial()) + e
            trans[(s, f"d{d}")] = row
            costs[(s, f"d{d}")] = 1.0
    labels["done"] = {index[c] for c in configs if not any(isinstance(x, int) for x in c)}
    names = ["_".join(str(x) if isinstance(x, int) else f"f{x[1]}" for x in c) for c in configs]
    return PMDP(len(configs), index[(0,) * n_dice], trans, tuple(params), costs,
                {k: frozenset(v) for k, v in labels.items()}, names)


def brp_like(n_chunks: int = 3, max_retries: int = 2, channels: int = 2) -> PMDP:
    """Chunked transmission with bounded retries over lossy channels.

    For each chunk the scheduler picks a channel ``k``; a message is lost with
    probability ``l{k}``, and its acknowledgement with probability ``a{k}``.
    Both losses consume one retry. Labels: ``success`` and ``fail``.
    """
    params = [f"{x}{k}" for k in range(channels) for x in ("l", "a")]
    states: dict[tuple, int] = {}

    def sid(key):
        if key not in states:
            states[key] = len(states)
        return states[key]

    start = sid(("send", 0, 0))
    success, fail = sid(("success",)), sid(("fail",))
    trans, costs = {}, {}
    todo = [("send", 0, 0)]
    seen = set()
    while todo:
        key = todo.pop()
        if key in seen:
            continue
        seen.add(key)
        _, chunk, retry = key
        s = sid(key)
        retry_key = ("send", chunk, retry + 1) if retry < max_retries else None
        nxt_ok = ("send", chunk + 1, 0) if chunk + 1 < n_chunks else None
        for k in range(channels):
            wait = sid(("wait", chunk, retry, k))
            lost, alost = Signomial.var(f"l{k}"), Signomial.var(f"a{k}")
            target_fail = sid(retry_key) if retry_key else fail
            trans[(s, f"ch{k}")] = {wait: 1.0 - lost, target_fail: lost}
            costs[(s, f"ch{k}")] = 1.0
            target_ok = sid(nxt_ok) if nxt_ok else success
            trans[(wait, "ack")] = {target_ok: 1.0 - alost, target_fail: alost}
            for nk in (retry_key, nxt_ok):
                if nk:
                    todo.append(nk)
    trans[(success, "stay")] = {success: Signomial.constant(1.0)}
    trans[(fail, "stay")] = {fail: Signomial.constant(1.0)}
    for (s, a), row in list(trans.items()):
        trans[(s, a)] = {t: e if isinstance(e, Signomial) else Signomial.constant(e) for t, e in row.items()}
    names = [None] * len(states)
    for key, i in states.items():
        names[i] = "_".join(map(str, key))
    labels = {"success": frozenset({success}), "fail": frozenset({fail})}
    return PMDP(len(states), start, trans, tuple(params), costs, labels, names)


def random_pmc(n_states: int, n_params: int = 2, seed: int | np.random.Generator = 0,
               p_param: float = 0.5, n_actions: int = 1) -> PMDP:
    """Random model with a ``goal`` and a ``sink`` absorbing state.

    Each other state gets ``n_actions`` actions; a row is either a parametric
    coin ``x`` / ``1 - x`` between two successors or a constant distribution
    over two or three successors. The first transition of state ``i`` leads to
    ``i + 1`` so that every state can reach the goal.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if n_states < 3:
        raise ValueError("need at least three states")
    params = [f"x{i}" for i in range(n_params)]
    goal, sink = n_states - 1, n_states - 2
    trans = {}
    for s in range(n_states - 2):
        for k in range(n_actions):
            fwd = s + 1 if s + 1 < sink else goal
            others = [t for t in range(n_states) if t != fwd]
            if params and rng.random() < p_param:
                other = int(rng.choice(others))
                x = Signomial.var(params[int(rng.integers(n_params))])
                if rng.random() < 0.5:
                    row = {fwd: x, other: 1.0 - x}
                else:
                    row = {fwd: 1.0 - x, other: x}
            else:
                k_succ = int(rng.integers(1, 3))
                succ = [fwd] + [int(t) for t in rng.choice(others, size=k_succ, replace=False)]
                w = rng.dirichlet(np.ones(len(succ)))
                w = np.round(w, 3)
                w[0] += 1.0 - w.sum()
                row = {}
                for t, v in zip(succ, w):
                    if v > 0:
                        row[t] = row.get(t, Signomial()) + Signomial.constant(float(v))
            trans[(s, f"a{k}")] = row
    trans[(goal, "stay")] = {goal: Signomial.constant(1.0)}
    trans[(sink, "stay")] = {sink: Signomial.constant(1.0)}
    used = sorted({v for row in trans.values() for e in row.values() for v in e.variables})
    labels = {"goal": frozenset({goal}), "sink": frozenset({sink})}
    costs = {sa: 1.0 for sa in trans if sa[0] < n_states - 2}
    return PMDP(n_states, 0, trans, tuple(used), costs, labels)


def random_pmdp(n_states: int, n_params: int = 2, seed: int | np.random.Generator = 0,
                n_actions: int = 2) -> PMDP:
    return random_pmc(n_states, n_params, seed, n_actions=n_actions)


@dataclass
class BenchmarkTask:
    name: str
    model: PMDP
    specs: list[Specification]
    objective: Objective


def benchmark_suite() -> list[BenchmarkTask]:
    """Optimization tasks on the bundled models, used for SCP convergence checks."""

    def spec(m, kind, threshold, label):
        return Specification(kind, threshold, m.labels[label], label)

    def goal(m, kind, label):
        return Objective(kind, m.labels[label], label)

    ky = knuth_yao_die()
    tasks = [
        BenchmarkTask("ky-max-six", ky, [spec(ky, "reach", 0.9, "die2")], goal(ky, "maximize-reach", "die6")),
        BenchmarkTask("ky-min-flips", ky, [spec(ky, "reach", 0.2, "die2")], goal(ky, "minimize-cost", "done")),
    ]
    for k in (2, 4, 6, 8):
        m = multi_dice(k)
        tasks.append(BenchmarkTask(f"dice{k}-max-double-six", m, [spec(m, "expcost", 10.0, "done")],
                                   goal(m, "maximize-reach", "sum12")))
        tasks.append(BenchmarkTask(f"dice{k}-min-seven", m, [spec(m, "expcost", 8.0, "done")],
                                   goal(m, "minimize-reach", "sum7")))
    brp = brp_like()
    tasks.append(BenchmarkTask("brp-max-success", brp, [spec(brp, "reach", 0.5, "fail")],
                               goal(brp, "maximize-reach", "success")))
    return tasks
