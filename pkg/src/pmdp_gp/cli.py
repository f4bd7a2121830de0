"""Command-line front end: ``pmdp-gp {feasible|optimize|repair|region}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .encoder import EncodingError
from .expressions import ExpressionError
from .formats import FormatError, load_changeable, load_model, load_regions, load_specs
from .gp_solver import SolverOptions
from .model import ModelError
from .workflows import (EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, UNSAFE, RunOptions, cmd_feasible,
                        cmd_optimize, cmd_region, cmd_repair)

COMMANDS = ("feasible", "optimize", "repair", "region")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmdp-gp", description="Parameter synthesis for parametric MDPs "
                                 "via geometric and signomial programming.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--model", required=True, help="model file")
    ap.add_argument("--specs", required=True, help="specification file")
    ap.add_argument("--region", help="region file (one or more boxes)")
    ap.add_argument("--changeable", help="changeable transitions for repair")
    ap.add_argument("--cost-bound", type=float, help="repair: solve a single feasibility problem with this cost bound")
    ap.add_argument("--json", action="store_true", help="print only JSON on standard output")
    ap.add_argument("--trace", help="write the per-iteration SCP trace as CSV")
    ap.add_argument("--feastol", type=float, default=1e-8)
    ap.add_argument("--gaptol", type=float, default=1e-8)
    ap.add_argument("--max-iter", type=int, default=200, help="interior-point iteration limit")
    ap.add_argument("--eps", type=float, default=1e-3, help="SCP stopping tolerance")
    ap.add_argument("--scp-iters", type=int, default=50, help="SCP step limit")
    ap.add_argument("--seed", type=int, default=0, help="seed for additional random SCP starts")
    ap.add_argument("--restarts", type=int, default=0, help="number of additional random SCP starts")
    ap.add_argument("--timeout", type=float, default=None, help="SCP wall-clock limit in seconds")
    ap.add_argument("--workers", type=int, default=None, help="threads for multiple region boxes")
    ap.add_argument("--verbose", action="store_true", help="solver and SCP log on standard error")
    return ap


def _emit(reports, as_json: bool):
    if as_json:
        data = [r.to_dict() for r in reports]
        print(json.dumps(data if len(data) > 1 else data[0], indent=2))
    else:
        for r in reports:
            print(r.summary())
        print(json.dumps([r.to_dict() for r in reports] if len(reports) > 1 else reports[0].to_dict()))


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr, format="%(name)s: %(message)s")
    opts = RunOptions(SolverOptions(feastol=args.feastol, gaptol=args.gaptol, max_iter=args.max_iter,
                                    verbose=args.verbose),
                      eps=args.eps, max_iters=args.scp_iters, seed=args.seed, restarts=args.restarts,
                      timeout=args.timeout)
    try:
        m = load_model(args.model)
        sf = load_specs(args.specs)
        specs, objective = sf.resolve(m)
        region = sf.region
        regions = load_regions(args.region, m.parameters) if args.region else None
        if args.command == "feasible":
            if regions and len(regions) > 1:
                raise FormatError(None, "feasible takes a single region")
            reports = [cmd_feasible(m, specs, regions[0] if regions else region, opts)]
        elif args.command == "optimize":
            if objective is None:
                raise FormatError(None, "optimize needs an objective line in the specification file")
            if regions and len(regions) > 1:
                raise FormatError(None, "optimize takes a single region")
            reports = [cmd_optimize(m, specs, objective, regions[0] if regions else region, opts, args.trace)]
        elif args.command == "repair":
            if args.changeable is None:
                raise FormatError(None, "repair needs --changeable")
            changeable = load_changeable(args.changeable, m)
            reports = [cmd_repair(m, specs, changeable, args.cost_bound, opts, args.trace)]
        else:
            boxes = regions or ([region] if region is not None else None)
            if not boxes:
                raise FormatError(None, "region needs --region or a region block in the specification file")
            reports = cmd_region(m, specs, boxes, opts, args.workers)
    except (FormatError, ModelError, EncodingError, ExpressionError, OSError) as exc:
        print(f"pmdp-gp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(reports, args.json)
    if args.command == "region":
        return EXIT_INFEASIBLE if any(r.status == UNSAFE for r in reports) else EXIT_OK
    return reports[0].exit_code


if __name__ == "__main__":
    sys.exit(main())
