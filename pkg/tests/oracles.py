"""Brute-force reference semantics for cross-checking the interpreter.

The oracle re-derives the transition relation the slow way: it enumerates
every post-state valuation with itertools.product instead of the library's
valuation helpers, rebuilds parameter bindings by hand, and folds internal
steps with a plain recursion.  Expression evaluation is shared (re-specifying
arithmetic would test nothing); everything above it is independent.
"""

from __future__ import annotations

import itertools

from stdrefine.model import (
    Msg,
    Std,
    Undefined,
    bind_environment,
    desugar,
    enumerate_sort,
    eval_expr,
    make_config,
)
from stdrefine.interp import Bounds


def _post_valuations(std: Std):
    """Every attribute valuation, via a raw cartesian product."""
    domains = std.domain_map()
    names = [n for n, _ in std.attributes]
    pools = [enumerate_sort(s, domains) for _, s in std.attributes]
    out = []
    for combo in itertools.product(*pools):
        out.append(dict(zip(names, combo)))
    return out


def oracle_enabled(std: Std, config, trigger: Msg | None, env):
    """Set of (label, binding, reactions) for every productive transition
    enabled at `config` under `trigger` (None = internal).  A transition is
    productive when its guard holds, every output evaluates to a value, and
    at least one post-state satisfies its postcondition."""
    std = desugar(std)
    tables, problems = bind_environment(std, env)
    if problems:
        raise ValueError("; ".join(problems))
    valuation = config.value_map()
    results = set()
    for t in std.transitions:
        if t.source != config.control:
            continue
        if trigger is None:
            if t.trigger is not None:
                continue
            params: dict = {}
        else:
            if t.trigger != trigger.ctor or len(t.params) != len(trigger.args):
                continue
            params = dict(zip(t.params, trigger.args))
        if eval_expr(t.guard, valuation, tables, params=params) is not True:
            continue
        outs = []
        bad_output = False
        for oname, oargs in t.outputs:
            vals = []
            for a in oargs:
                v = eval_expr(a, valuation, tables, params=params)
                if v is Undefined:
                    bad_output = True
                    break
                vals.append(v)
            if bad_output:
                break
            outs.append(Msg(oname, tuple(vals)))
        if bad_output:
            continue
        reactions = set()
        for primed in _post_valuations(std):
            if eval_expr(t.post, valuation, tables, primed=primed, params=params) is True:
                reactions.add((tuple(outs), make_config(t.target, primed)))
        if reactions:
            results.add((t.label, tuple(sorted(params.items())), frozenset(reactions)))
    return results


def oracle_step(std: Std, config, message: Msg, env, bounds: Bounds):
    """Reference one-message step: (reactions, divergent, chaotic).

    reactions: set of (complete outputs, configuration after consumption);
    divergent: output prefixes of branches the internal-step budget cut off;
    chaotic: some branch reached a configuration with nothing productive.
    """
    std = desugar(std)
    memo: dict = {}

    def explore(cfg, allowance: int):
        key = (cfg, allowance)
        if key in memo:
            return memo[key]
        ext = oracle_enabled(std, cfg, message, env)
        eps = oracle_enabled(std, cfg, None, env)
        reactions = set()
        divergent = set()
        chaotic = False
        for _lab, _bind, rs in ext:
            reactions |= set(rs)
        if not ext and not eps:
            chaotic = True
        elif eps:
            if allowance == 0:
                divergent.add(())
            else:
                for _lab, _bind, rs in eps:
                    for outs, succ in rs:
                        sub_r, sub_d, sub_c = explore(succ, allowance - 1)
                        chaotic = chaotic or sub_c
                        for souts, ssucc in sub_r:
                            reactions.add((outs + souts, ssucc))
                        for souts in sub_d:
                            divergent.add(outs + souts)
        memo[key] = (frozenset(reactions), frozenset(divergent), chaotic)
        return memo[key]

    return explore(config, bounds.eps_budget)


def all_configs(std: Std):
    """Every configuration: control states crossed with all valuations."""
    return [
        make_config(state, valuation)
        for state in std.states
        for valuation in _post_valuations(std)
    ]
