#!/usr/bin/env python3
"""Verify the call-processing refinement chain end to end.

Builds the six development steps of the call-processing machine, checks every
refinement edge of the chain (plus the transitive base-to-final edge), and
prints one verdict line per pair with timing.  Exits 1 if any pair fails.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from stdrefine import Bounds, build_step, check_refinement, default_env, parse_env

PAIRS = ((0, 1), (1, 2), (2, 3), (2, 4), (3, 5), (4, 5), (0, 5))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k", type=int, default=4, help="input-length bound (default 4)")
    parser.add_argument(
        "--eps-budget", type=int, default=4, help="internal-step budget (default 4)"
    )
    parser.add_argument(
        "--env", type=Path, default=None, help="environment file (default: shipped default.env)"
    )
    args = parser.parse_args(argv)

    env = parse_env(args.env.read_text()) if args.env else default_env()
    bounds = Bounds(max_input_len=args.k, eps_budget=args.eps_budget, output_cap=16)

    print(f"chain verification ({bounds.describe()})")
    failures = 0
    total = time.monotonic()
    for abstract, concrete in PAIRS:
        start = time.monotonic()
        verdict = check_refinement(build_step(abstract), build_step(concrete), env, bounds)
        elapsed = time.monotonic() - start
        mark = "pass" if verdict.ok else "FAIL"
        print(f"  step {abstract} => step {concrete}: {mark}  ({elapsed:.2f}s)")
        if not verdict.ok:
            failures += 1
            print(f"    {verdict.describe()}")
    print(f"total: {time.monotonic() - total:.2f}s, {failures} failing pairs")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
