"""Concrete syntax: parsing, printing, JSON import/export, error spans."""

from __future__ import annotations

import json

import pytest

from stdrefine import (
    Msg,
    ParseFailure,
    RuleError,
    apply_feature,
    base_std,
    corpus_text,
    default_env,
    parse_env,
    parse_feature,
    parse_messages,
    parse_std,
    print_env,
    print_feature,
    print_std,
    std_from_json,
    std_to_json,
    tel_std,
)
from stdrefine.callproc import _PATCH_NAMES  # the shipped .feat inventory
from stdrefine.model import EMPTY_ENV

STD_FILES = ("callproc.std", "tel.std", "stack.std", "duo.std")
ENV_FILES = ("default.env", "quiet.env")
FEAT_FILES = tuple(f"{name}.feat" for name in _PATCH_NAMES)


# ---------------------------------------------------------------------------
# Round-trips over the shipped corpus
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("fname", STD_FILES)
def test_std_parse_print_identity(fname):
    std = parse_std(corpus_text(fname))
    assert parse_std(print_std(std)) == std


@pytest.mark.parametrize("fname", STD_FILES)
def test_std_printing_is_stable(fname):
    std = parse_std(corpus_text(fname))
    text = print_std(std)
    assert print_std(parse_std(text)) == text


@pytest.mark.parametrize("fname", STD_FILES)
def test_std_json_import_export_identity(fname):
    std = parse_std(corpus_text(fname))
    doc = std_to_json(std)
    assert doc["format"] == "std/1"
    assert std_from_json(doc) == std
    # and through an actual serialization
    assert std_from_json(json.loads(json.dumps(doc))) == std


@pytest.mark.parametrize("fname", ENV_FILES)
def test_env_parse_print_identity(fname):
    env = parse_env(corpus_text(fname))
    assert parse_env(print_env(env)) == env


@pytest.mark.parametrize("fname", FEAT_FILES)
def test_feature_parse_print_identity(fname):
    text = corpus_text(fname)
    base = None if fname.startswith("conflict-") else base_std()
    if base is None:
        from stdrefine import duo_std

        base = duo_std()
    patch = parse_feature(text, base=base)
    assert parse_feature(print_feature(patch), base=base) == patch


def test_feature_print_covers_split_and_removals():
    # Exercise every application form through the printer, not just the
    # corpus ones: split with strengthening, removals, initial removal.
    src = """
std two = {
  input go | halt
  output o
  attributes x :: Int 0..1
  states a init, b init, c
  t1: a -> c : go / [o]
  t2: b -> c : halt {x' == x}
  t3: c -> a : go {x' == x}
}
"""
    base = parse_std(src)
    patch_text = """
feature surgery on two {
  split c into { c_lo, c_hi } {
    redirect t1 -> c_lo with {x' == 0}
    redirect t2 -> c_hi
  }
  remove-initial-states { b }
  remove-transitions { t3__c_hi }
  remove-states { b, c_hi }
}
"""
    patch = parse_feature(patch_text, base=base)
    printed = print_feature(patch)
    assert parse_feature(printed, base=base) == patch
    # the patch is actually applicable and ends where it should
    out = apply_feature(base, patch, EMPTY_ENV)
    assert sorted(out.states) == ["a", "c_lo"]
    assert [t.label for t in out.transitions] == ["t1", "t3__c_lo"]


# ---------------------------------------------------------------------------
# Parse errors
# ---------------------------------------------------------------------------


def _spans_lie_within(text: str, exc: ParseFailure) -> bool:
    lines = text.splitlines() or [""]
    for err in exc.errors:
        s = err.span
        if not (1 <= s.line <= len(lines) + 1):
            return False
        if s.col < 1:
            return False
    return True


@pytest.mark.parametrize(
    "src",
    [
        "std x = {",
        "std x = { input go output o states }",
        "std x = { input go output o states a init t: a -> nowhere : go }",
        "std x = { input go | go output o states a init }",
        "std x = { input go output o attributes x :: Int 5..2 states a init }",
        "std x = { input go output o states a init t: a -> a : {x' == 0} go }",
    ],
)
def test_parse_errors_carry_in_range_spans(src):
    with pytest.raises(ParseFailure) as info:
        parse_std(src)
    assert _spans_lie_within(src, info.value)
    assert str(info.value)  # message renders


def test_parse_error_mentions_line_and_col():
    with pytest.raises(ParseFailure) as info:
        parse_std("std x = {\n  oops\n}")
    assert "line 2" in str(info.value)


def test_env_parse_rejects_bad_rows():
    with pytest.raises(ParseFailure):
        parse_env("domain DN = {d1}\nBusy(d1) =")


def test_feature_payload_names_resolve_at_application():
    # Unknown states inside a patch parse fine (patches are standalone
    # scripts) but are rejected the moment the patch is applied.
    patch = parse_feature(
        "feature f on tel { add-transitions { z1: onhook -> nowhere : LT } }",
        base=tel_std(),
    )
    with pytest.raises(RuleError, match="nowhere"):
        apply_feature(tel_std(), patch, EMPTY_ENV)


# ---------------------------------------------------------------------------
# Message-sequence parsing (simulate's --input argument)
# ---------------------------------------------------------------------------


def test_parse_messages_forms():
    msgs = parse_messages("LT, DL(3), Push([1, 2]), flag(true), pick(d1)")
    assert msgs == (
        Msg("LT"),
        Msg("DL", (3,)),
        Msg("Push", ((1, 2),)),
        Msg("flag", (True,)),
        Msg("pick", ("d1",)),
    )


def test_parse_messages_bare_value():
    assert parse_messages("3") == (Msg(None, (3,)),)


def test_parse_messages_empty_is_empty_sequence():
    assert parse_messages("") == ()


def test_parse_messages_rejects_garbage():
    with pytest.raises(ParseFailure):
        parse_messages("DL(")
