#!/usr/bin/env python3
"""Random-machine soundness sweep.

Generates a corpus of small random machines, proposes random rule
applications against each, and checks that every application the rule engine
accepts really is a bounded refinement of the original machine — and that
every generated machine has prefix-monotone trace sets.  Prints per-rule
statistics.  Exits 1 on any soundness violation.
"""

from __future__ import annotations

import argparse
import collections
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from machine_gen import gen_application, gen_std  # noqa: E402

from stdrefine import (  # noqa: E402
    Bounds,
    RuleError,
    apply_rule,
    check_monotone,
    check_refinement,
    make_environment,
    traces,
)

EMPTY_ENV = make_environment({}, {}, {})


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--machines", type=int, default=200, help="corpus size (default 200)")
    parser.add_argument("--proposals", type=int, default=3, help="rule proposals per machine")
    parser.add_argument("--seed", type=int, default=0, help="generator seed")
    parser.add_argument("--k", type=int, default=3, help="input-length bound (default 3)")
    args = parser.parse_args(argv)

    rng = random.Random(args.seed)
    bounds = Bounds(max_input_len=args.k, eps_budget=4, output_cap=64)

    applied = collections.Counter()
    rejected = collections.Counter()
    violations = 0
    start = time.monotonic()

    for i in range(args.machines):
        std = gen_std(rng, name=f"gen{i}")

        verdict = check_monotone(traces(std, EMPTY_ENV, bounds))
        if not verdict.ok:
            violations += 1
            print(f"MONOTONICITY VIOLATION on {std.name}: {verdict.describe()}")

        for _ in range(args.proposals):
            application = gen_application(rng, std)
            kind = type(application).__name__
            try:
                result = apply_rule(std, application, EMPTY_ENV)
            except RuleError:
                rejected[kind] += 1
                continue
            applied[kind] += 1
            verdict = check_refinement(std, result, EMPTY_ENV, bounds)
            if not verdict.ok:
                violations += 1
                print(f"SOUNDNESS VIOLATION on {std.name} via {kind}:")
                print(f"  {verdict.describe()}")

    elapsed = time.monotonic() - start
    total_applied = sum(applied.values())
    total_rejected = sum(rejected.values())
    print(f"sweep: {args.machines} machines, {total_applied + total_rejected} proposals "
          f"({bounds.describe()}), {elapsed:.2f}s")
    for kind in sorted(set(applied) | set(rejected)):
        print(f"  {kind}: {applied[kind]} applied, {rejected[kind]} rejected")
    print(f"{violations} violations")
    return 1 if violations else 0


if __name__ == "__main__":
    sys.exit(main())
