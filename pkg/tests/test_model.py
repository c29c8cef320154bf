"""Core data model: sorts, evaluation, desugaring, validation, enabledness."""

from __future__ import annotations

import itertools

import pytest

from stdrefine import (
    EnvSymDecl,
    Msg,
    MsgCtor,
    Signature,
    Std,
    Transition,
    Undefined,
    desugar,
    make_config,
    make_environment,
    parse_std,
    validate_std,
)
from stdrefine.model import (
    EMPTY_ENV,
    TRUE,
    AttrRef,
    BinOp,
    BoolSort,
    Cons,
    Defined,
    ElseGuard,
    EnumLit,
    EnumSort,
    Head,
    IntSort,
    Len,
    ListLit,
    ListSort,
    Lit,
    Neg,
    Not,
    ParamRef,
    PrimedRef,
    SymApp,
    Tail,
    bind_environment,
    conj,
    enabled_transitions,
    enumerate_sort,
    enumerate_valuations,
    eval_expr,
    format_value,
    message_instances,
    msg_key,
)

DOMS = {"Hue": ("red", "green")}


# ---------------------------------------------------------------------------
# Sorts and values
# ---------------------------------------------------------------------------


def test_enumerate_bool_sort():
    assert enumerate_sort(BoolSort(), {}) == [False, True]


def test_enumerate_int_sort_is_inclusive():
    assert enumerate_sort(IntSort(1, 3), {}) == [1, 2, 3]


def test_enumerate_enum_sort_follows_domain_order():
    assert enumerate_sort(EnumSort("Hue"), DOMS) == ["red", "green"]


def test_enumerate_enum_sort_unknown_domain():
    with pytest.raises(KeyError):
        enumerate_sort(EnumSort("Nope"), DOMS)


def test_enumerate_list_sort_counts_all_lengths():
    values = enumerate_sort(ListSort(IntSort(0, 1), 2), {})
    assert len(values) == 1 + 2 + 4  # lengths 0, 1, 2
    assert () in values and (0, 1) in values
    assert all(isinstance(v, tuple) and len(v) <= 2 for v in values)


def test_enumerate_valuations_is_cartesian():
    attrs = (("a", BoolSort()), ("b", IntSort(0, 2)))
    vals = enumerate_valuations(attrs, {})
    assert len(vals) == 2 * 3
    assert {"a": True, "b": 2} in vals


def test_format_value_booleans_and_lists():
    assert format_value(True) == "true"
    assert format_value((1, 2)) == "[1, 2]"
    assert format_value("red") == "red"


def test_message_instances_expand_params_deterministically():
    ctors = (MsgCtor("DL", (IntSort(1, 3),)), MsgCtor("LT"))
    msgs = message_instances(ctors, {})
    assert msgs == sorted(msgs, key=msg_key)
    assert Msg("DL", (2,)) in msgs
    assert Msg("LT") in msgs
    assert len(msgs) == 4


def test_msg_str_forms():
    assert str(Msg("DL", (2,))) == "DL(2)"
    assert str(Msg("LT")) == "LT"
    assert str(Msg(None, (3,))) == "3"  # bare value message


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------


def _ev(expr, valuation=None, tables=None, primed=None, params=None):
    return eval_expr(expr, valuation or {}, tables or {}, primed=primed, params=params)


def test_eval_arithmetic_and_comparisons():
    assert _ev(BinOp("add", Lit(1), Lit(2))) == 3
    assert _ev(BinOp("sub", Lit(1), Lit(2))) == -1
    assert _ev(BinOp("mul", Lit(3), Lit(2))) == 6
    assert _ev(Neg(Lit(2))) == -2
    assert _ev(BinOp("lt", Lit(1), Lit(2))) is True
    assert _ev(BinOp("ge", Lit(1), Lit(2))) is False
    assert _ev(BinOp("ne", Lit(1), Lit(2))) is True


def test_eval_boolean_connectives():
    assert _ev(BinOp("and", Lit(True), Lit(False))) is False
    assert _ev(BinOp("or", Lit(True), Lit(False))) is True
    assert _ev(Not(Lit(True))) is False


def test_eval_enum_equality():
    e = BinOp("eq", EnumLit("red", "Hue"), EnumLit("red", "Hue"))
    assert _ev(e) is True


def test_eval_attribute_param_and_primed_refs():
    expr = BinOp("eq", PrimedRef("x"), BinOp("add", AttrRef("x"), ParamRef("d")))
    assert _ev(expr, valuation={"x": 1}, primed={"x": 3}, params={"d": 2}) is True
    assert _ev(expr, valuation={"x": 1}, primed={"x": 4}, params={"d": 2}) is False


def test_eval_list_operations():
    lst = ListLit((Lit(1), Lit(2)))
    assert _ev(Head(lst)) == 1
    assert _ev(Tail(lst)) == (2,)
    assert _ev(Len(lst)) == 2
    assert _ev(Cons(Lit(0), lst)) == (0, 1, 2)


def test_eval_head_and_tail_of_empty_are_undefined():
    empty = ListLit(())
    assert _ev(Head(empty)) is Undefined
    assert _ev(Tail(empty)) is Undefined
    assert _ev(Defined(Head(empty))) is False


def test_eval_partial_table_lookup():
    tables = {"Del": {("d1",): "d2"}}
    hit = SymApp("Del", (EnumLit("d1", "DN"),))
    miss = SymApp("Del", (EnumLit("d3", "DN"),))
    assert _ev(hit, tables=tables) == "d2"
    assert _ev(miss, tables=tables) is Undefined
    assert _ev(Defined(hit), tables=tables) is True
    assert _ev(Defined(miss), tables=tables) is False


def test_undefined_propagates_through_operators():
    tables = {"Del": {}}
    miss = SymApp("Del", (EnumLit("d1", "DN"),))
    assert _ev(BinOp("eq", miss, EnumLit("d1", "DN")), tables=tables) is Undefined
    assert _ev(Not(BinOp("eq", miss, EnumLit("d1", "DN")), ), tables=tables) is Undefined
    assert _ev(BinOp("and", Lit(True), BinOp("eq", miss, miss)), tables=tables) is Undefined


def test_conj_flattens_trivial_parts():
    assert conj() == TRUE
    assert conj(TRUE, Lit(False)) == Lit(False)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _tiny(transitions=(), **overrides) -> Std:
    base = dict(
        name="tiny",
        domains=(),
        uses=(),
        signature=Signature((MsgCtor("go"),), (MsgCtor("out"),)),
        attributes=(("x", IntSort(0, 1)),),
        states=("a", "b"),
        initial=(("a", TRUE),),
        transitions=tuple(transitions),
    )
    base.update(overrides)
    return Std(**base)


def _t(**kw) -> Transition:
    base = dict(
        label="t1",
        source="a",
        target="b",
        trigger="go",
        params=(),
        guard=TRUE,
        outputs=(),
        post=TRUE,
    )
    base.update(kw)
    return Transition(**base)


def test_validate_accepts_minimal_machine():
    assert validate_std(_tiny((_t(),))) == []


def test_validate_rejects_primed_reference_in_guard():
    bad = _tiny((_t(guard=BinOp("eq", PrimedRef("x"), Lit(0))),))
    assert any("primed" in p for p in validate_std(bad))


def test_validate_rejects_unknown_states_and_ctors():
    problems = validate_std(
        _tiny((_t(source="zz"), _t(label="t2", trigger="nope")))
    )
    assert any("unknown source state" in p for p in problems)
    assert any("unknown input constructor" in p for p in problems)


def test_validate_rejects_duplicate_labels_and_states():
    problems = validate_std(
        _tiny((_t(), _t(target="a")), states=("a", "b", "a"))
    )
    assert any("duplicate label" in p for p in problems)
    assert any("duplicate control state" in p for p in problems)


def test_validate_rejects_params_on_internal_trigger():
    bad = _tiny((_t(trigger=None, params=("p",)),))
    assert any("internal trigger binds no parameters" in p for p in validate_std(bad))


def test_validate_rejects_ill_sorted_guard():
    bad = _tiny((_t(guard=Lit(3)),))
    assert any("guard must be Bool" in p for p in validate_std(bad))


def test_validate_rejects_empty_signature_sides():
    bad = _tiny((), signature=Signature((), ()))
    problems = validate_std(bad)
    assert any("input message set is empty" in p for p in problems)
    assert any("output message set is empty" in p for p in problems)


def test_validate_requires_initial_state():
    assert any("no initial control state" in p for p in validate_std(_tiny((), initial=())))


def test_validation_is_deterministic():
    bad = _tiny((_t(source="zz"), _t(label="t2", trigger="nope")))
    assert validate_std(bad) == validate_std(bad)


# ---------------------------------------------------------------------------
# Desugaring
# ---------------------------------------------------------------------------

PRIO_SRC = """
std prio = {
  input go
  output a | b | c
  attributes x :: Int 0..2
  states s init {x == 0}
  t1: s -> s : {x < 2} go / [a] {x' == x} @1
  t2: s -> s : {x < 1} go / [b] {x' == x} @2
  t3: s -> s : {true} go / [c] {x' == x} @3
}
"""

ELSE_SRC = """
std fallback = {
  input go
  output a | c
  attributes x :: Int 0..2
  states s init {x == 0}
  t1: s -> s : {x < 2} go / [a] {x' == x}
  t3: s -> s : {else} go / [c] {x' == x}
}
"""


def test_desugar_priorities_conjoin_higher_priority_negations():
    std = desugar(parse_std(PRIO_SRC))
    assert all(t.priority is None for t in std.transitions)
    by_label = {t.label: t for t in std.transitions}
    # Highest priority keeps its guard; lower ones get the negations stacked.
    assert by_label["t1"].guard == parse_std(PRIO_SRC).transitions[0].guard
    for valuation in enumerate_valuations((("x", IntSort(0, 2)),), {}):
        holds = [
            eval_expr(by_label[l].guard, valuation, {}) is True for l in ("t1", "t2", "t3")
        ]
        assert sum(holds) <= 1, f"overlap at {valuation}"


def test_desugar_else_is_negation_of_group():
    std = desugar(parse_std(ELSE_SRC))
    by_label = {t.label: t for t in std.transitions}
    for valuation in enumerate_valuations((("x", IntSort(0, 2)),), {}):
        t1 = eval_expr(by_label["t1"].guard, valuation, {}) is True
        t3 = eval_expr(by_label["t3"].guard, valuation, {}) is True
        assert t3 == (not t1)


def test_desugar_is_idempotent():
    for src in (PRIO_SRC, ELSE_SRC):
        once = desugar(parse_std(src))
        assert desugar(once) == once


def test_desugar_preserves_well_sortedness_and_order():
    std = parse_std(PRIO_SRC)
    out = desugar(std)
    assert validate_std(out) == []
    assert [t.label for t in out.transitions] == [t.label for t in std.transitions]


def test_desugar_rejects_two_else_guards_in_one_group():
    bad = _tiny(
        (_t(guard=ElseGuard()), _t(label="t2", guard=ElseGuard())),
    )
    with pytest.raises(ValueError, match="'else'"):
        desugar(bad)


def test_else_only_group_desugars_to_true():
    std = desugar(_tiny((_t(guard=ElseGuard()),)))
    assert std.transitions[0].guard == TRUE


# ---------------------------------------------------------------------------
# Enabled transitions
# ---------------------------------------------------------------------------


def test_enabled_binds_trigger_parameters():
    sig = Signature((MsgCtor("put", (IntSort(0, 2),)),), (MsgCtor("echo", (IntSort(0, 2),)),))
    std = _tiny(
        (
            _t(
                trigger="put",
                params=("v",),
                guard=BinOp("gt", ParamRef("v"), Lit(0)),
                outputs=(("echo", (ParamRef("v"),)),),
                post=BinOp("eq", PrimedRef("x"), Lit(0)),
            ),
        ),
        signature=sig,
    )
    cfg = make_config("a", {"x": 0})
    assert enabled_transitions(std, cfg, Msg("put", (0,)), EMPTY_ENV) == []
    [en] = enabled_transitions(std, cfg, Msg("put", (2,)), EMPTY_ENV)
    assert en.binding == (("v", 2),)
    [(outs, succ)] = list(en.reactions)
    assert outs == (Msg("echo", (2,)),)
    assert succ == make_config("b", {"x": 0})


def test_unsatisfiable_postcondition_contributes_nothing():
    std = _tiny((_t(post=Lit(False)),))
    cfg = make_config("a", {"x": 0})
    assert enabled_transitions(std, cfg, Msg("go"), EMPTY_ENV) == []


def test_undefined_output_contributes_nothing():
    sig = Signature((MsgCtor("go"),), (MsgCtor("echo", (EnumSort("DN"),)),))
    std = _tiny(
        (
            _t(outputs=(("echo", (SymApp("Del", (EnumLit("d1", "DN"),)),)),),),
        ),
        signature=sig,
        domains=(("DN", ("d1", "d2")),),
        uses=(
            ("Del", EnvSymDecl(params=(EnumSort("DN"),), result=EnumSort("DN"), total=False)),
        ),
    )
    env = make_environment(domains={"DN": ("d1", "d2")}, tables={"Del": {}})
    assert enabled_transitions(std, make_config("a", {"x": 0}), Msg("go"), env) == []
    env_hit = make_environment(domains={"DN": ("d1", "d2")}, tables={"Del": {("d1",): "d2"}})
    [en] = enabled_transitions(std, make_config("a", {"x": 0}), Msg("go"), env_hit)
    assert next(iter(en.reactions))[0] == (Msg("echo", ("d2",)),)


def test_relational_post_yields_one_reaction_per_valuation():
    std = _tiny((_t(post=TRUE),))  # x' unconstrained over Int 0..1
    [en] = enabled_transitions(std, make_config("a", {"x": 0}), Msg("go"), EMPTY_ENV)
    succs = {succ for _, succ in en.reactions}
    assert succs == {make_config("b", {"x": 0}), make_config("b", {"x": 1})}


def test_bind_environment_reports_missing_totals():
    decl = EnvSymDecl(params=(EnumSort("DN"),), result=BoolSort(), total=True)
    std = _tiny((), domains=(("DN", ("d1", "d2")),), uses=(("Busy", decl),))
    env = make_environment(domains={"DN": ("d1", "d2")}, tables={"Busy": {("d1",): True}})
    tables, problems = bind_environment(std, env)
    assert any("Busy" in p for p in problems)
    full = make_environment(
        domains={"DN": ("d1", "d2")},
        tables={"Busy": {("d1",): True}},
        defaults={"Busy": False},
    )
    tables, problems = bind_environment(std, full)
    assert problems == []
    assert tables["Busy"][("d2",)] is False
