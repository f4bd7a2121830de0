"""Sweep a grid of parameter boxes and certify the ones where no coin bias works.

A box is UNSAFE when the relaxed program restricted to it is infeasible;
UNKNOWN boxes may or may not contain a solution. Run with
``python3 demos/unsafe_regions.py``.
"""
from __future__ import annotations

import numpy as np

from pmdp_gp.benchmarks import knuth_yao_die
from pmdp_gp.encoder import Region
from pmdp_gp.model import Specification
from pmdp_gp.workflows import UNSAFE, cmd_region


def main(cells: int = 8, threshold: float = 0.05):
    ky = knuth_yao_die()
    spec = Specification("reach", threshold, ky.labels["die2"], "die2")
    edges = np.linspace(0.02, 0.98, cells + 1)
    boxes = [Region({"p": (edges[i], edges[i + 1]), "q": (edges[j], edges[j + 1])})
             for j in range(cells) for i in range(cells)]
    reports = cmd_region(ky, [spec], boxes)

    print(f"P(two) <= {threshold}: '#' certified unsafe, '.' unknown   (p left to right, q bottom to top)")
    for j in reversed(range(cells)):
        row = "".join("#" if reports[j * cells + i].status == UNSAFE else "." for i in range(cells))
        print(f"  q~{(edges[j] + edges[j + 1]) / 2:.2f} {row}")
    share = sum(r.status == UNSAFE for r in reports) / len(reports)
    print(f"\n{share:.0%} of the square certified unsafe")


if __name__ == "__main__":
    main()
