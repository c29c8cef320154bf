"""Bounded operational semantics for state transition diagrams.

The denotation of a machine is approximated by a `TraceSet`: for every input
sequence up to a length bound, the set of output sequences the machine can
produce.  The single-message building block is `step`:

* A step begins when an input message arrives and ends when the message is
  consumed by a matching external transition.  While the message is pending,
  enabled internal transitions may fire (appending their outputs), up to the
  internal-step budget.  Internal transitions never fire on their own between
  messages — progress is driven, and observed, message by message.

* If the machine can reach, while the message is pending, a configuration
  where neither a matching external transition nor any internal transition is
  enabled, the behavior is completely unspecified from that point on: the
  whole entry is CHAOS, and chaos propagates to every extension of the input
  sequence.

* A branch whose chain of internal steps exhausts the budget without consuming
  the message is *divergent*: its partial output is parked, flagged, and
  inherited verbatim by every extension (the branch makes no further progress
  inside the bound).  Divergence is deliberately not chaos.

Output sequences longer than the output cap are clipped and flagged, never
silently dropped.  A configured state cap aborts exploration with a
`ResourceLimit` naming the offending bound.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .model import (
    Configuration,
    Environment,
    Msg,
    Std,
    Value,
    bind_environment,
    desugar,
    enabled_transitions,
    initial_configurations,
    message_instances,
    msg_key,
)


class ResourceLimit(Exception):
    """A configured exploration bound was exceeded."""

    def __init__(self, bound: str, limit, message: str) -> None:
        super().__init__(message)
        self.bound = bound
        self.limit = limit


@dataclass(frozen=True)
class Bounds:
    """Exploration bounds: input-sequence length, internal-step budget per
    processed message, output-length cap, and an optional cap on the number of
    distinct configurations explored."""

    max_input_len: int = 4
    eps_budget: int = 4
    output_cap: int = 16
    state_cap: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_input_len < 0 or self.eps_budget < 0 or self.output_cap < 0:
            raise ValueError("bounds must be non-negative")
        if self.state_cap is not None and self.state_cap < 0:
            raise ValueError("bounds must be non-negative")

    def describe(self) -> str:
        cap = "none" if self.state_cap is None else str(self.state_cap)
        return (
            f"k={self.max_input_len} eps-budget={self.eps_budget} "
            f"output-cap={self.output_cap} state-cap={cap}"
        )


DEFAULT_BOUNDS = Bounds()


class _ChaosType:
    _instance: Optional["_ChaosType"] = None

    def __new__(cls) -> "_ChaosType":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "CHAOS"


CHAOS = _ChaosType()

Outputs = tuple[Msg, ...]


@dataclass(frozen=True)
class StepResult:
    """Everything one message can do from one configuration.

    reactions: (complete output sequence, configuration after consumption).
    divergent: partial outputs of branches cut by the internal-step budget.
    chaotic: some branch reached a configuration with nothing enabled.
    touched: configurations occupied while the message was pending or consumed.
    """

    reactions: frozenset[tuple[Outputs, Configuration]]
    divergent: frozenset[Outputs]
    chaotic: bool
    touched: frozenset[Configuration]

    @property
    def is_chaos(self) -> bool:
        return self.chaotic


def outputs_key(outs: Outputs):
    return (len(outs), tuple(msg_key(m) for m in outs))


def _sorted_outputs(outs) -> list[Outputs]:
    return sorted(outs, key=outputs_key)


def is_prefix(short: Outputs, long: Outputs) -> bool:
    return len(short) <= len(long) and long[: len(short)] == short


class Machine:
    """A diagram bound to an environment, with memoized single-message steps."""

    def __init__(self, std: Std, env: Environment, bounds: Bounds = DEFAULT_BOUNDS) -> None:
        self.surface = std
        self.std = desugar(std)
        self.env = env
        self.bounds = bounds
        tables, problems = bind_environment(self.std, env)
        if problems:
            raise ValueError("environment does not fit the diagram: " + "; ".join(problems))
        self.tables = tables
        self.inputs: tuple[Msg, ...] = tuple(
            message_instances(self.std.signature.inputs, self.std.domain_map())
        )
        self._step_memo: dict[tuple[Configuration, Msg], StepResult] = {}

    def initial_configs(self) -> list[Configuration]:
        return initial_configurations(self.std, self.env, self.tables)

    def step(self, config: Configuration, message: Msg) -> StepResult:
        key = (config, message)
        hit = self._step_memo.get(key)
        if hit is not None:
            return hit
        result = self._explore(config, message)
        self._step_memo[key] = result
        return result

    def _explore(self, config: Configuration, message: Msg) -> StepResult:
        reactions: set[tuple[Outputs, Configuration]] = set()
        divergent: set[Outputs] = set()
        touched: set[Configuration] = set()
        chaotic = False

        # outcomes relative to a pending-message configuration, keyed by the
        # remaining internal-step allowance
        memo: dict[tuple[Configuration, int], tuple[frozenset, frozenset, bool]] = {}

        def outcomes(cfg: Configuration, allowance: int):
            key = (cfg, allowance)
            hit = memo.get(key)
            if hit is not None:
                return hit
            local_reactions: set[tuple[Outputs, Configuration]] = set()
            local_divergent: set[Outputs] = set()
            local_chaos = False
            ext = enabled_transitions(self.std, cfg, message, self.env, self.tables)
            eps = enabled_transitions(self.std, cfg, None, self.env, self.tables)
            for en in ext:
                for outs, succ in en.reactions:
                    local_reactions.add((outs, succ))
                    touched.add(succ)
            if not ext and not eps:
                local_chaos = True
            elif eps:
                if allowance == 0:
                    local_divergent.add(())
                else:
                    for en in eps:
                        for outs, succ in en.reactions:
                            touched.add(succ)
                            sub_r, sub_d, sub_c = outcomes(succ, allowance - 1)
                            local_chaos = local_chaos or sub_c
                            for souts, ssucc in sub_r:
                                local_reactions.add((outs + souts, ssucc))
                            for souts in sub_d:
                                local_divergent.add(outs + souts)
            result = (frozenset(local_reactions), frozenset(local_divergent), local_chaos)
            memo[key] = result
            return result

        r, d, chaotic = outcomes(config, self.bounds.eps_budget)
        reactions |= r
        divergent |= d
        return StepResult(
            reactions=frozenset(reactions),
            divergent=frozenset(divergent),
            chaotic=chaotic,
            touched=frozenset(touched),
        )


@dataclass(frozen=True)
class Entry:
    """The recorded behavior at one input sequence: CHAOS, or a set of output
    sequences plus parked divergent outputs, with an output-cap flag."""

    chaos: bool
    outputs: frozenset[Outputs] = frozenset()
    divergent: frozenset[Outputs] = frozenset()
    capped: bool = False

    def all_outputs(self) -> frozenset[Outputs]:
        return self.outputs | self.divergent


CHAOS_ENTRY = Entry(chaos=True)


@dataclass
class TraceSet:
    """Bounded denotation of a machine: entries for every input sequence up to
    the length bound, plus the configurations reached along the way."""

    std_name: str
    bounds: Bounds
    inputs: tuple[Msg, ...]
    entries: dict[tuple[Msg, ...], Entry]
    reached: frozenset[Configuration]
    warnings: tuple[str, ...]

    def entry(self, seq: tuple[Msg, ...]) -> Entry:
        return self.entries[seq]

    def sequences(self) -> list[tuple[Msg, ...]]:
        return sorted(self.entries, key=seq_key)

    def has_divergence(self) -> bool:
        return any(e.divergent for e in self.entries.values())


def seq_key(seq: tuple[Msg, ...]):
    return (len(seq), tuple(msg_key(m) for m in seq))


def format_outputs(outs: Outputs) -> str:
    return "[" + ", ".join(str(m) for m in outs) + "]"


def format_sequence(seq: tuple[Msg, ...]) -> str:
    return "[" + ", ".join(str(m) for m in seq) + "]"


_WARNING_LIMIT = 20


def traces(std: Std, env: Environment, bounds: Bounds = DEFAULT_BOUNDS) -> TraceSet:
    """Exhaustively enumerate `step` over every input sequence up to the length
    bound, from every initial configuration."""
    machine = Machine(std, env, bounds)
    return machine_traces(machine)


def machine_traces(machine: Machine) -> TraceSet:
    bounds = machine.bounds
    cap = bounds.output_cap
    entries: dict[tuple[Msg, ...], Entry] = {}
    warnings: list[str] = []
    suppressed = 0
    reached: set[Configuration] = set(machine.initial_configs())

    def warn(text: str) -> None:
        nonlocal suppressed
        if len(warnings) < _WARNING_LIMIT:
            warnings.append(text)
        else:
            suppressed += 1

    def check_state_cap() -> None:
        if bounds.state_cap is not None and len(reached) > bounds.state_cap:
            raise ResourceLimit(
                "state_cap",
                bounds.state_cap,
                f"state cap exceeded: more than {bounds.state_cap} distinct "
                f"configurations reached (offending bound: state_cap)",
            )

    check_state_cap()

    # A live node: the branch states (configuration, accumulated outputs)
    # plus parked divergent outputs inherited by every extension.
    Branches = set  # of (Configuration, Outputs)
    start_branches: Branches = {(c, ()) for c in machine.initial_configs()}

    def clip(outs: Outputs) -> tuple[Outputs, bool]:
        if len(outs) > cap:
            return outs[:cap], True
        return outs, False

    def make_entry(branches, divergent, chaotic) -> Entry:
        if chaotic:
            return CHAOS_ENTRY
        outs: set[Outputs] = set()
        capped = False
        for _, u in branches:
            cu, hit = clip(u)
            capped = capped or hit
            outs.add(cu)
        divs: set[Outputs] = set()
        for u in divergent:
            cu, hit = clip(u)
            capped = capped or hit
            divs.add(cu)
        return Entry(
            chaos=False,
            outputs=frozenset(outs),
            divergent=frozenset(divs),
            capped=capped,
        )

    entries[()] = make_entry(start_branches, frozenset(), False)
    layer: list[tuple[tuple[Msg, ...], Branches, frozenset, bool]] = [
        ((), start_branches, frozenset(), False)
    ]

    for _depth in range(bounds.max_input_len):
        next_layer: list[tuple[tuple[Msg, ...], Branches, frozenset, bool]] = []
        for seq, branches, divergent, chaotic in layer:
            for m in machine.inputs:
                child_seq = seq + (m,)
                if chaotic:
                    entries[child_seq] = CHAOS_ENTRY
                    next_layer.append((child_seq, set(), frozenset(), True))
                    continue
                child_branches: Branches = set()
                child_divergent: set[Outputs] = set(divergent)
                child_chaos = False
                for cfg, u in branches:
                    res = machine.step(cfg, m)
                    reached.update(res.touched)
                    if res.chaotic:
                        child_chaos = True
                        break
                    for outs, succ in res.reactions:
                        child_branches.add((succ, u + outs))
                    for outs in res.divergent:
                        child_divergent.add(u + outs)
                        warn(
                            "internal-step budget exhausted while processing "
                            f"{m} after input {format_sequence(seq)}"
                        )
                check_state_cap()
                if child_chaos:
                    entries[child_seq] = CHAOS_ENTRY
                    next_layer.append((child_seq, set(), frozenset(), True))
                else:
                    entry = make_entry(child_branches, child_divergent, False)
                    if entry.capped:
                        warn(
                            "output cap hit at input "
                            f"{format_sequence(child_seq)} (outputs clipped at {cap})"
                        )
                    entries[child_seq] = entry
                    next_layer.append(
                        (child_seq, child_branches, frozenset(child_divergent), False)
                    )
        layer = next_layer

    if suppressed:
        warnings.append(f"... {suppressed} more warnings suppressed")
    return TraceSet(
        std_name=machine.std.name,
        bounds=bounds,
        inputs=machine.inputs,
        entries=entries,
        reached=frozenset(reached),
        warnings=tuple(warnings),
    )


def simulate_prefixes(
    std: Std,
    env: Environment,
    input_seq: tuple[Msg, ...],
    bounds: Bounds = DEFAULT_BOUNDS,
) -> TraceSet:
    """Entries for every prefix of one concrete input sequence (the same
    semantics as `traces`, without enumerating the whole alphabet)."""
    machine = Machine(std, env, bounds)
    input_seq = tuple(input_seq)
    cap = bounds.output_cap

    def clip(sets) -> tuple[frozenset, bool]:
        clipped: set[Outputs] = set()
        hit = False
        for u in sets:
            if len(u) > cap:
                clipped.add(u[:cap])
                hit = True
            else:
                clipped.add(u)
        return frozenset(clipped), hit

    entries: dict[tuple[Msg, ...], Entry] = {}
    reached: set[Configuration] = set(machine.initial_configs())
    branches = {(c, ()) for c in machine.initial_configs()}
    divergent: set[Outputs] = set()

    def check_state_cap() -> None:
        if bounds.state_cap is not None and len(reached) > bounds.state_cap:
            raise ResourceLimit(
                "state_cap",
                bounds.state_cap,
                f"state cap exceeded: more than {bounds.state_cap} distinct "
                f"configurations reached (offending bound: state_cap)",
            )

    check_state_cap()

    def record(prefix: tuple[Msg, ...]) -> None:
        outs, capped_out = clip({u for _, u in branches})
        divs, capped_div = clip(divergent)
        entries[prefix] = Entry(
            chaos=False, outputs=outs, divergent=divs, capped=capped_out or capped_div
        )

    record(())
    chaotic = False
    for i, m in enumerate(input_seq):
        prefix = input_seq[: i + 1]
        if chaotic:
            entries[prefix] = CHAOS_ENTRY
            continue
        if m not in machine.inputs:
            raise ValueError(f"{m} is not an input message instance of {std.name}")
        next_branches = set()
        for cfg, u in branches:
            res = machine.step(cfg, m)
            if res.chaotic:
                chaotic = True
                break
            reached.update(res.touched)
            check_state_cap()
            for outs, succ in res.reactions:
                next_branches.add((succ, u + outs))
            for outs in res.divergent:
                divergent.add(u + outs)
        if chaotic:
            entries[prefix] = CHAOS_ENTRY
            continue
        branches = next_branches
        record(prefix)
    return TraceSet(
        std_name=std.name,
        bounds=bounds,
        inputs=machine.inputs,
        entries=entries,
        reached=frozenset(reached),
        warnings=(),
    )


def simulate(
    std: Std,
    env: Environment,
    input_seq: tuple[Msg, ...],
    bounds: Bounds = DEFAULT_BOUNDS,
) -> Entry:
    """The entry for one concrete input sequence."""
    return simulate_prefixes(std, env, input_seq, bounds).entries[tuple(input_seq)]


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    """Replayable counterexample: an input sequence, optionally the offending
    output, and for monotonicity failures the extended input sequence."""

    input: tuple[Msg, ...]
    output: Optional[Outputs] = None
    extension: Optional[tuple[Msg, ...]] = None
    note: str = ""


@dataclass(frozen=True)
class Verdict:
    ok: bool
    kind: str
    bounds: Bounds
    witness: Optional[Witness] = None
    note: str = ""

    def describe(self) -> str:
        head = f"{self.kind}: {'pass' if self.ok else 'FAIL'} (bounds: {self.bounds.describe()})"
        lines = [head]
        if self.note:
            lines.append(f"  {self.note}")
        if self.witness is not None:
            w = self.witness
            lines.append(f"  input:  {format_sequence(w.input)}")
            if w.extension is not None:
                lines.append(f"  extended input: {format_sequence(w.extension)}")
            if w.output is not None:
                lines.append(f"  output: {format_outputs(w.output)}")
            if w.note:
                lines.append(f"  {w.note}")
        return "\n".join(lines)


def check_monotone(ts: TraceSet) -> Verdict:
    """Pass iff every output recorded at an input sequence extends to some
    output at every longer sequence, and chaos propagates to extensions."""
    for seq in ts.sequences():
        ej = ts.entries[seq]
        for cut in range(len(seq)):
            pre = seq[:cut]
            ei = ts.entries[pre]
            if ei.chaos:
                if not ej.chaos:
                    return Verdict(
                        ok=False,
                        kind="monotonicity",
                        bounds=ts.bounds,
                        witness=Witness(
                            input=pre,
                            extension=seq,
                            note="chaos at the shorter input did not propagate",
                        ),
                    )
                continue
            if ej.chaos:
                continue
            targets = ej.all_outputs()
            for o in _sorted_outputs(ei.all_outputs()):
                if not any(is_prefix(o, t) for t in targets):
                    return Verdict(
                        ok=False,
                        kind="monotonicity",
                        bounds=ts.bounds,
                        witness=Witness(
                            input=pre,
                            output=o,
                            extension=seq,
                            note="no output at the longer input extends this one",
                        ),
                    )
    return Verdict(ok=True, kind="monotonicity", bounds=ts.bounds)


# ---------------------------------------------------------------------------
# JSON export (traces/1, verdict/1)
# ---------------------------------------------------------------------------


def _value_to_json(v: Value):
    if isinstance(v, tuple):
        return {"list": [_value_to_json(x) for x in v]}
    return v


def msg_to_json(m: Msg) -> dict:
    return {"ctor": m.ctor, "args": [_value_to_json(a) for a in m.args]}


def _outputs_to_json(outs) -> list:
    return [[msg_to_json(m) for m in o] for o in _sorted_outputs(outs)]


def traceset_to_json(ts: TraceSet) -> dict:
    entries = []
    for seq in ts.sequences():
        e = ts.entries[seq]
        item: dict = {"input": [msg_to_json(m) for m in seq], "chaos": e.chaos}
        if not e.chaos:
            item["outputs"] = _outputs_to_json(e.outputs)
            item["divergent"] = _outputs_to_json(e.divergent)
            item["capped"] = e.capped
        entries.append(item)
    return {
        "format": "traces/1",
        "std": ts.std_name,
        "bounds": bounds_to_json(ts.bounds),
        "entries": entries,
        "reached": sorted(str(c) for c in ts.reached),
        "warnings": list(ts.warnings),
    }


def bounds_to_json(b: Bounds) -> dict:
    return {
        "max_input_len": b.max_input_len,
        "eps_budget": b.eps_budget,
        "output_cap": b.output_cap,
        "state_cap": b.state_cap,
    }


def witness_to_json(w: Optional[Witness]):
    if w is None:
        return None
    out: dict = {"input": [msg_to_json(m) for m in w.input]}
    if w.output is not None:
        out["output"] = [msg_to_json(m) for m in w.output]
    if w.extension is not None:
        out["extension"] = [msg_to_json(m) for m in w.extension]
    if w.note:
        out["note"] = w.note
    return out


def verdict_to_json(v: Verdict) -> dict:
    return {
        "format": "verdict/1",
        "kind": v.kind,
        "ok": v.ok,
        "bounds": bounds_to_json(v.bounds),
        "witness": witness_to_json(v.witness),
        "note": v.note,
    }


def dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
