"""Tour of the Knuth-Yao die: instantiate, check, find a feasible point, optimize.

Run with ``python3 demos/knuth_yao_tour.py``.
"""
from __future__ import annotations

from pmdp_gp.benchmarks import knuth_yao_die
from pmdp_gp.encoder import Objective
from pmdp_gp.mc_analysis import reachability
from pmdp_gp.model import Specification, induce, instantiate
from pmdp_gp.workflows import cmd_feasible, cmd_optimize


def outcome_table(m, valuation):
    mc = induce(instantiate(m, valuation))
    return [reachability(mc, m.labels[f"die{k}"])[m.initial] for k in range(1, 7)]


def main():
    ky = knuth_yao_die()
    print(f"Knuth-Yao die: {ky.n_states} states, parameters {', '.join(map(str, ky.parameters))}")

    for point in ({"p": 0.5, "q": 0.5}, {"p": 0.4, "q": 0.7}):
        probs = outcome_table(ky, point)
        print(f"\n  p={point['p']}, q={point['q']}: " + "  ".join(f"{k}:{v:.4f}" for k, v in enumerate(probs, 1)))

    bound = Specification("reach", 0.1, ky.labels["die2"], "die2")
    print("\nFind coin biases that make a two rarer than 10%:")
    print(cmd_feasible(ky, [bound]).summary())

    print("\nUnder that bound, make a one as likely as possible:")
    report = cmd_optimize(ky, [bound], Objective("maximize-reach", ky.labels["die1"], "die1"))
    print(report.summary())
    print("  accepted objective values:", ", ".join(f"{v:.5f}" for v in report.scp["history"]))


if __name__ == "__main__":
    main()
