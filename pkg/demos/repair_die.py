"""Repair a fair die so that a two shows up at most one time in eight.

Every coin flip may be changed; the repair minimizes the sum of squared
probability changes. Run with ``python3 demos/repair_die.py``.
"""
from __future__ import annotations

from pmdp_gp.benchmarks import knuth_yao_fair
from pmdp_gp.model import Specification
from pmdp_gp.workflows import cmd_repair


def main():
    fair = knuth_yao_fair()
    changeable = [(s, "flip", t) for s in range(7) for t in sorted(fair.transitions[(s, "flip")])]
    spec = Specification("reach", 0.125, fair.labels["die2"], "die2")

    report = cmd_repair(fair, [spec], changeable)
    print(report.summary())

    print("\nrepaired flips (old -> new):")
    for i, (s, a, t) in enumerate(changeable):
        old = fair.transitions[(s, a)][t].evaluate({})
        new = old * report.valuation[f"r{i}"]
        if abs(new - old) > 1e-4:
            print(f"  {fair.state_name(s)} -> {fair.state_name(t)}: {old:.4f} -> {new:.4f}")

    for bound in (0.05, 0.001):
        r = cmd_repair(fair, [spec], changeable, cost_bound=bound)
        print(f"\ncost bound {bound}: {r.status}" + (f" (cost {r.repair_cost:.5f})" if r.repair_cost else ""))


if __name__ == "__main__":
    main()
