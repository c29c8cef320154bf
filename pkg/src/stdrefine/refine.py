"""Behavior-preserving transformation rules and bounded refinement checking.

A machine M2 refines M1 when every behavior of M2 is a behavior of M1 —
bounded here to: for every input sequence up to the length bound, every output
sequence M2 can produce is one M1 can produce, where a CHAOS entry of M1
licenses anything.  `check_refinement` decides this on enumerated trace sets
and returns a replayable verdict; the minimal counterexample (shortest input
sequence, then lexicographically least) is reported on failure.

The six transformation rules are syntactic machine edits whose side conditions
guarantee bounded refinement by construction:

* add-states: fresh, unreachable states (plus transitions among them only).
* remove-states: states no bounded-reachable configuration occupies.
* split-state: replace one state by several; each incoming transition is
  redirected to exactly one part (optionally with a strengthened
  postcondition), every outgoing transition is copied to every part.
* add-transitions: new transitions whose guards are disjoint, at every
  attribute valuation, from everything already leaving the same state — they
  only give behavior to situations that were completely unspecified.
* remove-transitions: redundant branches; wherever a removed transition was
  enabled (within bounded reach), an alternative with the same trigger, or an
  internal transition, remains enabled.
* remove-initial-states: drop initial markings, keeping at least one.

`apply_rule` checks the side conditions against the machine the rule is
applied to and raises `RuleError`, naming the violated condition with a
witness, instead of producing an unsound result.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional, Union

from .model import (
    Environment,
    Expr,
    Msg,
    Not,
    Std,
    Transition,
    Value,
    bind_environment,
    conj,
    desugar,
    enumerate_sort,
    enumerate_valuations,
    eval_expr,
    format_value,
    guard_holds,
    has_else,
    reachable_configurations,
    reachable_control_states,
    resolve_names,
    validate_std,
)
from .interp import (
    Bounds,
    DEFAULT_BOUNDS,
    TraceSet,
    Verdict,
    Witness,
    outputs_key,
    traces,
)


class RuleError(Exception):
    """A transformation rule's side condition failed (or its payload is
    malformed).  Carries the rule name, the violated condition, and where
    available a witness valuation/configuration demonstrating the violation."""

    def __init__(self, rule: str, reason: str, witness: Optional[str] = None) -> None:
        text = f"rule {rule}: {reason}"
        if witness:
            text += f" [witness: {witness}]"
        super().__init__(text)
        self.rule = rule
        self.reason = reason
        self.witness = witness


class SignatureMismatch(ValueError):
    """Refinement is only defined between machines with identical message
    signatures and declared domains."""


# ---------------------------------------------------------------------------
# Rule applications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AddStates:
    """New, unreachable states, optionally with transitions among them."""

    names: tuple[str, ...]
    transitions: tuple[Transition, ...] = ()


@dataclass(frozen=True)
class RemoveStates:
    names: tuple[str, ...]


@dataclass(frozen=True)
class SplitState:
    """Replace `name` by `parts`.  `redirects` maps each incoming transition
    label to (part, optional strengthened postcondition)."""

    name: str
    parts: tuple[str, ...]
    redirects: tuple[tuple[str, str, Optional[Expr]], ...]


@dataclass(frozen=True)
class AddTransitions:
    transitions: tuple[Transition, ...]


@dataclass(frozen=True)
class RemoveTransitions:
    labels: tuple[str, ...]


@dataclass(frozen=True)
class RemoveInitialStates:
    names: tuple[str, ...]


RuleApplication = Union[
    AddStates, RemoveStates, SplitState, AddTransitions, RemoveTransitions, RemoveInitialStates
]


def rule_name(app: RuleApplication) -> str:
    return {
        AddStates: "add-states",
        RemoveStates: "remove-states",
        SplitState: "split-state",
        AddTransitions: "add-transitions",
        RemoveTransitions: "remove-transitions",
        RemoveInitialStates: "remove-initial-states",
    }[type(app)]


# ---------------------------------------------------------------------------
# Payload preparation
# ---------------------------------------------------------------------------


def _resolution_context(std: Std):
    attrs = {n for n, _ in std.attributes}
    members = {m: d for d, ms in std.domains for m in ms}
    symbols = {n for n, _ in std.uses}
    return attrs, members, symbols


def _resolve_transition(t: Transition, std: Std, rule: str) -> Transition:
    attrs, members, symbols = _resolution_context(std)
    params = set(t.params)

    def fix(e: Expr) -> Expr:
        try:
            return resolve_names(e, attrs, members, symbols, params)
        except ValueError as exc:
            raise RuleError(rule, str(exc), witness=f"transition {t.label or t.source}") from exc

    guard = t.guard if has_else(t.guard) else fix(t.guard)
    outputs = tuple((c, tuple(fix(a) for a in args)) for c, args in t.outputs)
    return replace(t, guard=guard, outputs=outputs, post=fix(t.post))


def _desugar_payload(transitions: tuple[Transition, ...], rule: str) -> tuple[Transition, ...]:
    """Priorities inside one payload batch are local to the batch: each
    prioritized transition's guard is conjoined with the negations of all
    strictly higher-priority guards in its (source, trigger) group.  `else`
    has no meaning relative to a payload and is rejected."""
    for t in transitions:
        if has_else(t.guard):
            raise RuleError(rule, "'else' guards are not allowed in rule payloads",
                            witness=f"transition {t.label or t.source}")
    groups: dict[tuple[str, Optional[str]], list[Transition]] = {}
    for t in transitions:
        groups.setdefault((t.source, t.trigger), []).append(t)
    out = []
    for t in transitions:
        if t.priority is None:
            out.append(t)
            continue
        negs = [
            Not(t2.guard)
            for t2 in groups[(t.source, t.trigger)]
            if t2 is not t and t2.priority is not None and t2.priority < t.priority
        ]
        out.append(replace(t, guard=conj(t.guard, *negs), priority=None))
    return tuple(out)


def _prepare_payload(
    transitions: tuple[Transition, ...], std: Std, rule: str
) -> tuple[Transition, ...]:
    resolved = tuple(_resolve_transition(t, std, rule) for t in transitions)
    return _desugar_payload(resolved, rule)


# ---------------------------------------------------------------------------
# Enabledness helpers (valuation-granular disjointness / coverage)
# ---------------------------------------------------------------------------


def _param_pools(std: Std, t: Transition, domains) -> list[list[Value]]:
    if t.trigger is None:
        return []
    ctor = std.signature.input_ctor(t.trigger)
    if ctor is None:
        raise RuleError("add-transitions", f"unknown input constructor {t.trigger!r}",
                        witness=f"transition {t.label or t.source}")
    return [enumerate_sort(s, domains) for s in ctor.params]


def _eps_enabled(std: Std, tables, control: str, valuation) -> Optional[Transition]:
    for t in std.transitions:
        if t.source != control or not t.is_internal:
            continue
        if guard_holds(t.guard, valuation, tables):
            return t
    return None


def _external_enabled_any(std: Std, tables, domains, control: str,
                          valuation) -> Optional[tuple[Transition, tuple]]:
    for t in std.transitions:
        if t.source != control or t.is_internal:
            continue
        pools = _param_pools(std, t, domains)
        for args in itertools.product(*pools):
            if guard_holds(t.guard, valuation, tables, dict(zip(t.params, args))):
                return t, args
    return None


def _same_trigger_enabled(std: Std, tables, control: str, trigger: str, args,
                          valuation) -> Optional[Transition]:
    for t in std.transitions:
        if t.source != control or t.trigger != trigger:
            continue
        if guard_holds(t.guard, valuation, tables, dict(zip(t.params, args))):
            return t
    return None


def _format_valuation(valuation) -> str:
    return "{" + ", ".join(f"{k}={format_value(v)}" for k, v in sorted(valuation.items())) + "}"


def _format_instance(trigger: Optional[str], args) -> str:
    if trigger is None:
        return "eps"
    if not args:
        return trigger
    return str(Msg(trigger, tuple(args)))


# ---------------------------------------------------------------------------
# apply_rule
# ---------------------------------------------------------------------------


def apply_rule(
    std: Std,
    app: RuleApplication,
    env: Environment,
    bounds: Bounds = DEFAULT_BOUNDS,
) -> Std:
    """Apply one transformation rule, checking its side conditions against the
    machine it is applied to.  The result is validated before it is returned;
    the input machine is never modified."""
    work = desugar(std)
    name = rule_name(app)
    if isinstance(app, AddStates):
        result = _apply_add_states(work, app)
    elif isinstance(app, RemoveStates):
        result = _apply_remove_states(work, app, env, bounds)
    elif isinstance(app, SplitState):
        result = _apply_split_state(work, app, env)
    elif isinstance(app, AddTransitions):
        result = _apply_add_transitions(work, app, env)
    elif isinstance(app, RemoveTransitions):
        result = _apply_remove_transitions(work, app, env, bounds)
    elif isinstance(app, RemoveInitialStates):
        result = _apply_remove_initial(work, app)
    else:  # pragma: no cover - exhaustive over RuleApplication
        raise RuleError(str(type(app)), "unknown rule application")
    problems = validate_std(result)
    if problems:
        raise RuleError(name, "the transformed machine is invalid: " + "; ".join(problems))
    return result


def _apply_add_states(work: Std, app: AddStates) -> Std:
    rule = "add-states"
    if not app.names:
        raise RuleError(rule, "no states to add")
    existing = set(work.states)
    fresh = set()
    for n in app.names:
        if n in existing:
            raise RuleError(rule, f"state {n!r} already exists")
        if n in fresh:
            raise RuleError(rule, f"state {n!r} listed twice")
        fresh.add(n)
    payload = _prepare_payload(app.transitions, work, rule)
    for t in payload:
        if t.source not in fresh or t.target not in fresh:
            raise RuleError(
                rule,
                "payload transitions must connect the new states only "
                "(anything else could make them reachable)",
                witness=f"transition {t.label or t.source}->{t.target}",
            )
    return replace(
        work,
        states=work.states + tuple(app.names),
        transitions=work.transitions + payload,
    )


def _apply_remove_states(work: Std, app: RemoveStates, env: Environment, bounds: Bounds) -> Std:
    rule = "remove-states"
    if not app.names:
        raise RuleError(rule, "no states to remove")
    existing = set(work.states)
    for n in app.names:
        if n not in existing:
            raise RuleError(rule, f"state {n!r} does not exist")
    reachable = reachable_control_states(work, env, bounds.max_input_len, bounds.eps_budget)
    doomed = set(app.names)
    hit = sorted(doomed & set(reachable))
    if hit:
        raise RuleError(
            rule,
            "only unreachable states may be removed",
            witness=f"state {hit[0]!r} is reachable within {bounds.max_input_len} message(s)",
        )
    return replace(
        work,
        states=tuple(s for s in work.states if s not in doomed),
        initial=tuple((s, p) for s, p in work.initial if s not in doomed),
        transitions=tuple(
            t for t in work.transitions if t.source not in doomed and t.target not in doomed
        ),
    )


def _apply_split_state(work: Std, app: SplitState, env: Environment) -> Std:
    rule = "split-state"
    if app.name not in work.states:
        raise RuleError(rule, f"state {app.name!r} does not exist")
    if not app.parts:
        raise RuleError(rule, "a split needs at least one part")
    existing = set(work.states)
    seen = set()
    for p in app.parts:
        if p in existing:
            raise RuleError(rule, f"part {p!r} collides with an existing state")
        if p in seen:
            raise RuleError(rule, f"part {p!r} listed twice")
        seen.add(p)

    redirect: dict[str, tuple[str, Optional[Expr]]] = {}
    for label, part, post in app.redirects:
        if label in redirect:
            raise RuleError(rule, f"transition {label!r} redirected twice")
        if part not in seen:
            raise RuleError(rule, f"redirect of {label!r} targets {part!r}, which is not a part")
        redirect[label] = (part, post)

    incoming = [t for t in work.transitions if t.target == app.name]
    incoming_labels = set()
    for t in incoming:
        if t.label is None:
            raise RuleError(
                rule,
                "every transition into the split state must be labeled so it can be redirected",
                witness=f"{t.source}->{t.target} on {t.trigger or 'eps'}",
            )
        incoming_labels.add(t.label)
        if t.label not in redirect:
            raise RuleError(rule, f"incoming transition {t.label!r} has no redirect")
    for label in redirect:
        if label not in incoming_labels:
            raise RuleError(rule, f"redirect names {label!r}, which does not enter {app.name!r}")

    tables, problems = bind_environment(work, env)
    if problems:
        raise ValueError("environment does not fit the diagram: " + "; ".join(problems))
    domains = work.domain_map()
    valuations = enumerate_valuations(work.attributes, domains)
    attrs, members, symbols = _resolution_context(work)

    checked_redirect: dict[str, tuple[str, Optional[Expr]]] = {}
    for t in incoming:
        part, post = redirect[t.label]
        if post is None:
            checked_redirect[t.label] = (part, None)
            continue
        try:
            post = resolve_names(post, attrs, members, symbols, set(t.params))
        except ValueError as exc:
            raise RuleError(rule, str(exc), witness=f"redirect of {t.label!r}") from exc
        pools = _param_pools(work, t, domains)
        for args in itertools.product(*pools):
            binding = dict(zip(t.params, args))
            for v in valuations:
                if not guard_holds(t.guard, v, tables, binding):
                    continue
                original_sat = False
                strengthened_sat = False
                for v2 in valuations:
                    orig = eval_expr(t.post, v, tables, primed=v2, params=binding) is True
                    strong = eval_expr(post, v, tables, primed=v2, params=binding) is True
                    if strong and not orig:
                        raise RuleError(
                            rule,
                            f"strengthened postcondition of {t.label!r} does not imply the original",
                            witness=(
                                f"valuation {_format_valuation(v)}, trigger "
                                f"{_format_instance(t.trigger, args)}, primed {_format_valuation(v2)}"
                            ),
                        )
                    original_sat = original_sat or orig
                    strengthened_sat = strengthened_sat or strong
                if original_sat and not strengthened_sat:
                    raise RuleError(
                        rule,
                        f"strengthened postcondition of {t.label!r} is unsatisfiable "
                        "where the original was satisfiable",
                        witness=(
                            f"valuation {_format_valuation(v)}, trigger "
                            f"{_format_instance(t.trigger, args)}"
                        ),
                    )
        checked_redirect[t.label] = (part, post)

    # Rebuild the state list with the parts in place of the split state.
    new_states: list[str] = []
    for s in work.states:
        if s == app.name:
            new_states.extend(app.parts)
        else:
            new_states.append(s)

    new_initial: list[tuple[str, Expr]] = []
    for s, pred in work.initial:
        if s == app.name:
            new_initial.extend((p, pred) for p in app.parts)
        else:
            new_initial.append((s, pred))

    new_transitions: list[Transition] = []
    used_labels = {t.label for t in work.transitions if t.label is not None}
    for t in work.transitions:
        if t.source == app.name:
            # Copied to every part; a self-loop's target follows its redirect.
            part_target, strengthened = (None, None)
            if t.target == app.name:
                part_target, strengthened = checked_redirect[t.label]
            for p in app.parts:
                label = f"{t.label}__{p}" if t.label is not None else None
                if label is not None and label in used_labels:
                    raise RuleError(rule, f"copied label {label!r} collides with an existing label")
                copy = replace(
                    t,
                    label=label,
                    source=p,
                    target=part_target if part_target is not None else t.target,
                    post=strengthened if strengthened is not None else t.post,
                )
                new_transitions.append(copy)
        elif t.target == app.name:
            part, strengthened = checked_redirect[t.label]
            new_transitions.append(
                replace(t, target=part, post=strengthened if strengthened is not None else t.post)
            )
        else:
            new_transitions.append(t)

    return replace(
        work,
        states=tuple(new_states),
        initial=tuple(new_initial),
        transitions=tuple(new_transitions),
    )


def _apply_add_transitions(work: Std, app: AddTransitions, env: Environment) -> Std:
    rule = "add-transitions"
    if not app.transitions:
        raise RuleError(rule, "no transitions to add")
    payload = _prepare_payload(app.transitions, work, rule)
    states = set(work.states)
    for t in payload:
        if t.source not in states:
            raise RuleError(rule, f"source state {t.source!r} does not exist",
                            witness=f"transition {t.label or t.source}")
        if t.target not in states:
            raise RuleError(rule, f"target state {t.target!r} does not exist",
                            witness=f"transition {t.label or t.source}")

    tables, problems = bind_environment(work, env)
    if problems:
        raise ValueError("environment does not fit the diagram: " + "; ".join(problems))
    domains = work.domain_map()
    valuations = enumerate_valuations(work.attributes, domains)

    # Disjointness is checked against the machine being extended, not against
    # other members of the same batch: the batch as a whole claims previously
    # unspecified situations, and may distribute them among its members.
    for t in payload:
        pools = _param_pools(work, t, domains)
        for args in itertools.product(*pools):
            binding = dict(zip(t.params, args))
            for v in valuations:
                if not guard_holds(t.guard, v, tables, binding):
                    continue
                if t.is_internal:
                    clash = _eps_enabled(work, tables, t.source, v)
                    if clash is not None:
                        raise RuleError(
                            rule,
                            f"new internal transition overlaps existing internal "
                            f"transition {clash.label or clash.source!r}",
                            witness=f"state {t.source}, valuation {_format_valuation(v)}",
                        )
                    ext = _external_enabled_any(work, tables, domains, t.source, v)
                    if ext is not None:
                        t2, eargs = ext
                        raise RuleError(
                            rule,
                            "new internal transition overlaps existing transition "
                            f"{t2.label or t2.source!r} (the machine was not unspecified there)",
                            witness=(
                                f"state {t.source}, valuation {_format_valuation(v)}, "
                                f"trigger {_format_instance(t2.trigger, eargs)}"
                            ),
                        )
                else:
                    clash = _same_trigger_enabled(work, tables, t.source, t.trigger, args, v)
                    if clash is not None:
                        raise RuleError(
                            rule,
                            f"new transition overlaps existing transition "
                            f"{clash.label or clash.source!r} on the same trigger",
                            witness=(
                                f"state {t.source}, valuation {_format_valuation(v)}, "
                                f"trigger {_format_instance(t.trigger, args)}"
                            ),
                        )
                    eclash = _eps_enabled(work, tables, t.source, v)
                    if eclash is not None:
                        raise RuleError(
                            rule,
                            f"new transition overlaps existing internal transition "
                            f"{eclash.label or eclash.source!r}",
                            witness=f"state {t.source}, valuation {_format_valuation(v)}",
                        )
    return replace(work, transitions=work.transitions + payload)


def _apply_remove_transitions(
    work: Std, app: RemoveTransitions, env: Environment, bounds: Bounds
) -> Std:
    rule = "remove-transitions"
    if not app.labels:
        raise RuleError(rule, "no transitions to remove")
    removed: list[Transition] = []
    seen = set()
    for label in app.labels:
        if label in seen:
            raise RuleError(rule, f"transition {label!r} listed twice")
        seen.add(label)
        t = work.transition(label)
        if t is None:
            raise RuleError(rule, f"no transition labeled {label!r}")
        removed.append(t)
    removed_set = set(removed)
    remaining = tuple(t for t in work.transitions if t not in removed_set)

    tables, problems = bind_environment(work, env)
    if problems:
        raise ValueError("environment does not fit the diagram: " + "; ".join(problems))
    domains = work.domain_map()
    kept = replace(work, transitions=remaining)

    for cfg in reachable_configurations(work, env, bounds.max_input_len, bounds.eps_budget):
        v = cfg.value_map()
        for t in removed:
            if t.source != cfg.control:
                continue
            if t.is_internal:
                if not guard_holds(t.guard, v, tables):
                    continue
                if _eps_enabled(kept, tables, cfg.control, v) is None:
                    raise RuleError(
                        rule,
                        f"removing {t.label!r} leaves no internal transition where it was enabled",
                        witness=f"configuration {cfg}",
                    )
            else:
                pools = _param_pools(work, t, domains)
                for args in itertools.product(*pools):
                    if not guard_holds(t.guard, v, tables, dict(zip(t.params, args))):
                        continue
                    same = _same_trigger_enabled(kept, tables, cfg.control, t.trigger, args, v)
                    if same is None and _eps_enabled(kept, tables, cfg.control, v) is None:
                        raise RuleError(
                            rule,
                            f"removing {t.label!r} leaves {_format_instance(t.trigger, args)} "
                            "unhandled where it was accepted",
                            witness=f"configuration {cfg}",
                        )
    return kept


def _apply_remove_initial(work: Std, app: RemoveInitialStates) -> Std:
    rule = "remove-initial-states"
    if not app.names:
        raise RuleError(rule, "no initial markings to remove")
    marked = {s for s, _ in work.initial}
    doomed = set()
    for n in app.names:
        if n not in marked:
            raise RuleError(rule, f"state {n!r} is not an initial state")
        if n in doomed:
            raise RuleError(rule, f"state {n!r} listed twice")
        doomed.add(n)
    kept = tuple((s, p) for s, p in work.initial if s not in doomed)
    if not kept:
        raise RuleError(rule, "at least one initial state must remain")
    return replace(work, initial=kept)


# ---------------------------------------------------------------------------
# Bounded refinement
# ---------------------------------------------------------------------------


def signatures_match(a: Std, b: Std) -> bool:
    return a.signature == b.signature and a.domains == b.domains


def _require_same_alphabet(ts_abstract: TraceSet, ts_concrete: TraceSet) -> None:
    if ts_abstract.inputs != ts_concrete.inputs:
        raise SignatureMismatch(
            "trace sets range over different input alphabets; refinement is "
            "only defined between machines with identical signatures and domains"
        )
    if ts_abstract.bounds != ts_concrete.bounds:
        raise SignatureMismatch("trace sets were computed under different bounds")


def _divergence_note(*tracesets: TraceSet) -> str:
    if any(ts.has_divergence() for ts in tracesets):
        return ("internal-step budget was exhausted somewhere; the verdict covers "
                "explored behavior only")
    return ""


def trace_inclusion(ts_abstract: TraceSet, ts_concrete: TraceSet) -> Verdict:
    """Every concrete behavior is an abstract behavior, entry by entry, with
    abstract CHAOS licensing anything.  Fails on the minimal counterexample
    (shortest input sequence, then lexicographically least offending output)."""
    _require_same_alphabet(ts_abstract, ts_concrete)
    bounds = ts_abstract.bounds
    for seq in ts_abstract.sequences():
        ea = ts_abstract.entries[seq]
        ec = ts_concrete.entries[seq]
        if ea.chaos:
            continue
        if ec.chaos:
            return Verdict(
                ok=False,
                kind="refinement",
                bounds=bounds,
                witness=Witness(
                    input=seq,
                    note="the concrete machine is unspecified (chaos) where the "
                    "abstract machine is specified",
                ),
            )
        if ec.capped and not ea.capped:
            return Verdict(
                ok=False,
                kind="refinement",
                bounds=bounds,
                witness=Witness(
                    input=seq,
                    note="the concrete machine hit the output cap where the abstract "
                    "machine did not; outputs are incomparable at this bound",
                ),
            )
        for o in sorted(ec.outputs, key=outputs_key):
            if o not in ea.outputs:
                return Verdict(
                    ok=False,
                    kind="refinement",
                    bounds=bounds,
                    witness=Witness(
                        input=seq,
                        output=o,
                        note="concrete output is not among the abstract outputs",
                    ),
                )
        for o in sorted(ec.divergent, key=outputs_key):
            if o not in ea.divergent:
                return Verdict(
                    ok=False,
                    kind="refinement",
                    bounds=bounds,
                    witness=Witness(
                        input=seq,
                        output=o,
                        note="concrete divergent (budget-truncated) output has no "
                        "abstract counterpart",
                    ),
                )
    return Verdict(
        ok=True, kind="refinement", bounds=bounds,
        note=_divergence_note(ts_abstract, ts_concrete),
    )


def trace_equivalence(ts_a: TraceSet, ts_b: TraceSet) -> Verdict:
    """Entry-by-entry equality of two trace sets (same chaos, outputs,
    divergent outputs, and cap flags everywhere)."""
    _require_same_alphabet(ts_a, ts_b)
    bounds = ts_a.bounds
    for seq in ts_a.sequences():
        a = ts_a.entries[seq]
        b = ts_b.entries[seq]
        if a.chaos != b.chaos:
            return Verdict(
                ok=False, kind="trace-equivalence", bounds=bounds,
                witness=Witness(input=seq, note="chaos on one side only"),
            )
        if a.chaos:
            continue
        if a.outputs != b.outputs or a.divergent != b.divergent or a.capped != b.capped:
            only = sorted((a.all_outputs() ^ b.all_outputs()), key=outputs_key)
            return Verdict(
                ok=False, kind="trace-equivalence", bounds=bounds,
                witness=Witness(
                    input=seq,
                    output=only[0] if only else None,
                    note="entries differ at this input",
                ),
            )
    return Verdict(ok=True, kind="trace-equivalence", bounds=bounds,
                   note=_divergence_note(ts_a, ts_b))


def check_refinement(
    abstract: Std,
    concrete: Std,
    env: Environment,
    bounds: Bounds = DEFAULT_BOUNDS,
) -> Verdict:
    """Enumerate both trace sets and decide bounded refinement."""
    if not signatures_match(abstract, concrete):
        raise SignatureMismatch(
            f"{abstract.name} and {concrete.name} have different signatures or domains"
        )
    ts_abstract = traces(abstract, env, bounds)
    ts_concrete = traces(concrete, env, bounds)
    return trace_inclusion(ts_abstract, ts_concrete)
