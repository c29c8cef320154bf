"""Property-based checks over randomly generated machines.

Each property draws an integer seed, derives a machine from it with the
shared generator, and checks a semantic invariant: syntax round-trips,
desugaring stability, oracle agreement, trace-set structure, and the
soundness of rule application with respect to bounded refinement.
"""

from __future__ import annotations

import json
import random

from hypothesis import event, given, settings
from hypothesis import strategies as st

from machine_gen import gen_application, gen_std
from oracles import all_configs, oracle_enabled, oracle_step

from stdrefine import (
    Bounds,
    RuleError,
    apply_rule,
    check_monotone,
    check_refinement,
    desugar,
    make_environment,
    parse_std,
    print_std,
    std_from_json,
    std_to_json,
    traces,
    validate_std,
)
from stdrefine.interp import Machine
from stdrefine.model import enabled_transitions, message_instances

EMPTY_ENV = make_environment({}, {}, {})
B3 = Bounds(max_input_len=3, eps_budget=3, output_cap=64)
B2 = Bounds(max_input_len=2, eps_budget=3, output_cap=64)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def make_std(seed: int):
    return gen_std(random.Random(seed))


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_desugar_is_idempotent_and_preserves_validity(seed):
    std = make_std(seed)
    once = desugar(std)
    assert desugar(once) == once
    assert validate_std(once) == []


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_printing_is_stable_and_parses_back(seed):
    std = make_std(seed)
    text = print_std(std)
    assert print_std(std) == text
    assert parse_std(text) == std


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_json_export_round_trips(seed):
    std = make_std(seed)
    doc = json.loads(json.dumps(std_to_json(std)))
    assert std_from_json(doc) == std


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_enabled_transitions_agree_with_oracle(seed):
    std = make_std(seed)
    msgs = list(message_instances(std.signature.inputs, std.domain_map()))
    for config in all_configs(std):
        for trigger in [None, *msgs]:
            got = {
                (e.transition.label, tuple(sorted(e.binding)), e.reactions)
                for e in enabled_transitions(std, config, trigger, EMPTY_ENV)
            }
            assert got == oracle_enabled(std, config, trigger, EMPTY_ENV)


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_step_agrees_with_oracle(seed):
    std = make_std(seed)
    machine = Machine(std, EMPTY_ENV, B3)
    msgs = list(message_instances(std.signature.inputs, std.domain_map()))
    for config in all_configs(std):
        for message in msgs:
            sr = machine.step(config, message)
            assert oracle_step(std, config, message, EMPTY_ENV, B3) == (
                sr.reactions,
                sr.divergent,
                sr.chaotic,
            )


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_trace_sets_grow_monotonically_and_absorb_chaos(seed):
    std = make_std(seed)
    ts2 = traces(std, EMPTY_ENV, B2)
    ts3 = traces(std, EMPTY_ENV, B3)

    # Raising the input-length bound only adds sequences; shared ones keep
    # the exact same entry.
    for seq, entry in ts2.entries.items():
        assert ts3.entry(seq) == entry

    # Once a sequence reaches chaos every extension stays chaotic.
    for seq, entry in ts3.entries.items():
        if seq and ts3.entry(seq[:-1]).chaos:
            assert entry.chaos

    verdict = check_monotone(ts3)
    assert verdict.ok, verdict.describe()


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_refinement_is_reflexive(seed):
    std = make_std(seed)
    verdict = check_refinement(std, std, EMPTY_ENV, B2)
    assert verdict.ok, verdict.describe()


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_applicable_rules_yield_refinements(seed):
    rng = random.Random(seed)
    std = gen_std(rng)
    application = gen_application(rng, std)
    try:
        result = apply_rule(std, application, EMPTY_ENV)
    except RuleError:
        event("rule rejected")
        return
    event(f"rule applied: {type(application).__name__}")

    # The rewritten machine stays well formed and keeps the signature.
    assert validate_std(result) == []
    assert result.signature == std.signature
    assert result.domains == std.domains
    assert result.attributes == std.attributes

    verdict = check_refinement(std, result, EMPTY_ENV, B3)
    assert verdict.ok, verdict.describe()
