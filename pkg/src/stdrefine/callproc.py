"""Bundled case study: a telephone switching unit grown by features.

The corpus ships as plain text under ``corpus/`` — machines (``.std``),
environments (``.env``), and feature patches (``.feat``) — and this module
loads those files and rebuilds the development chain:

* step 0 — the bare switching unit: a call attempt ends busy or alerting
* step 1 — callers may abandon a failed attempt (patch ``abandon``)
* step 2 — the connect state splits into a subscriber lookup and a phone
  lookup (patch ``split-connect``)
* step 3 — forwarding directories redirect attempts (patch ``forwarding``,
  applied to step 2)
* step 4 — screening tables refuse attempts (patch ``blocking``, also
  applied to step 2)
* step 5 — both feature families together (``blocking`` applied to step 3)

Steps 1-5 are always produced by applying the shipped patches, never built
by hand, so rebuilding the chain exercises the rule checker end to end.
The module also provides the well-formedness checks the chain relies on:
an environment must keep numbers in good standing out of every feature
table (`validate_call_env`) and must not let the forwarding directories
loop (`check_forwarding_acyclic`).
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .features import FeaturePatch, apply_feature
from .interp import DEFAULT_BOUNDS, Verdict
from .model import Environment, Std, bind_environment
from .textlang import parse_env, parse_feature, parse_std

#: chain step -> (patch applied, step it is applied to)
STEP_FEATURES = {
    1: ("abandon", 0),
    2: ("split-connect", 1),
    3: ("forwarding", 2),
    4: ("blocking", 2),
    5: ("blocking", 3),
}

#: partial directories consulted by the forwarding transitions, in priority order
FORWARDING_TABLES = ("FM", "Del", "DelB", "FMNA", "DelNA")

#: total predicates consulted by the blocking transitions
BLOCKING_TABLES = ("DNR", "VP", "OCS", "TCS", "CNDB", "ACR")

_PATCH_NAMES = ("abandon", "split-connect", "forwarding", "blocking")


def corpus_path(filename: str):
    """Location of a shipped corpus file (a real path in a normal install)."""
    return resources.files(__package__) / "corpus" / filename


def corpus_text(filename: str) -> str:
    return corpus_path(filename).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def base_std() -> Std:
    """Step 0: the bare switching unit."""
    return parse_std(corpus_text("callproc.std"))


@lru_cache(maxsize=None)
def tel_std() -> Std:
    """The desk-telephone fixture (lift, dial, ring-or-busy)."""
    return parse_std(corpus_text("tel.std"))


@lru_cache(maxsize=None)
def stack_std() -> Std:
    """The bounded-stack fixture (list attribute, partial behavior)."""
    return parse_std(corpus_text("stack.std"))


@lru_cache(maxsize=None)
def duo_std() -> Std:
    """The conflict-demonstration fixture (two rival features share one message)."""
    return parse_std(corpus_text("duo.std"))


@lru_cache(maxsize=None)
def default_env() -> Environment:
    """Reference environment: d1 answers busy, d3 rings, d2 forwards to d3."""
    return parse_env(corpus_text("default.env"))


@lru_cache(maxsize=None)
def quiet_env() -> Environment:
    """Like `default_env` but with every feature table empty, so the added
    features are dormant and the full chain behaves exactly like step 2."""
    return parse_env(corpus_text("quiet.env"))


@lru_cache(maxsize=None)
def feature_patch(name: str) -> FeaturePatch:
    """One of the four chain patches, parsed against the base machine."""
    if name not in _PATCH_NAMES:
        raise ValueError(
            f"unknown patch {name!r}; the chain ships {', '.join(_PATCH_NAMES)}"
        )
    return parse_feature(corpus_text(f"{name}.feat"), base=base_std())


@lru_cache(maxsize=None)
def conflict_patches() -> tuple[FeaturePatch, FeaturePatch]:
    """The rival patch pair for the duo fixture; applying either blocks the other."""
    base = duo_std()
    return (
        parse_feature(corpus_text("conflict-left.feat"), base=base),
        parse_feature(corpus_text("conflict-right.feat"), base=base),
    )


@lru_cache(maxsize=None)
def build_step(n: int) -> Std:
    """Reconstruct chain step `n` (0..5) by applying the shipped patches."""
    if n not in range(6):
        raise ValueError("the development chain has steps 0..5")
    if n == 0:
        return base_std()
    patch_name, prev = STEP_FEATURES[n]
    return apply_feature(
        build_step(prev), feature_patch(patch_name), default_env(), DEFAULT_BOUNDS
    )


def _call_domain(env: Environment) -> tuple[str, ...]:
    return tuple(env.domain_map().get("DN", base_std().domain_map()["DN"]))


def block_predicates(env: Environment) -> dict[str, dict[tuple[str, str], bool]]:
    """Pointwise screening verdicts over (origin, subscriber) pairs.

    ``Block-Sub``: the subscriber refuses the attempt — do-not-redirect,
    a per-caller veto, or anonymous-call rejection.  ``Block-Phone``: the
    subscriber's phone is vetoed outright.  ``Block-Route``: originating or
    terminating call screening forbids this particular route.
    """
    dn = _call_domain(env)
    tables = env.table_map()
    defaults = env.default_map()

    def look(sym: str, *args: str) -> bool:
        rows = tables.get(sym, {})
        if args in rows:
            value = rows[args]
        elif sym in defaults:
            value = defaults[sym]
        else:
            raise ValueError(
                f"{sym} has no entry for ({', '.join(args)}) and no default"
            )
        if not isinstance(value, bool):
            raise ValueError(
                f"{sym}({', '.join(args)}) = {value!r} is not a truth value"
            )
        return value

    block_sub: dict[tuple[str, str], bool] = {}
    block_phone: dict[tuple[str, str], bool] = {}
    block_route: dict[tuple[str, str], bool] = {}
    for org in dn:
        for sub in dn:
            dnr = look("DNR", sub)
            cndb = look("CNDB", org, sub)
            acr = look("ACR", org, sub)
            block_sub[(org, sub)] = dnr or cndb or acr
            block_phone[(org, sub)] = look("VP", sub)
            ocs = look("OCS", org, sub)
            tcs = look("TCS", org, sub)
            block_route[(org, sub)] = ocs or tcs
    return {
        "Block-Sub": block_sub,
        "Block-Phone": block_phone,
        "Block-Route": block_route,
    }


def forwarding_cycle(env: Environment) -> list[str] | None:
    """A number sequence [a, ..., a] that the forwarding directories send
    around in a loop, or None when every directory chain terminates."""
    edges: dict[str, set[str]] = {}
    tables = env.table_map()
    for sym in FORWARDING_TABLES:
        for args, value in tables.get(sym, {}).items():
            if len(args) == 1 and isinstance(args[0], str) and isinstance(value, str):
                edges.setdefault(args[0], set()).add(value)
    adjacent = {src: sorted(dsts) for src, dsts in edges.items()}
    ON_PATH, DONE = 1, 2
    state: dict[str, int] = {}
    path: list[str] = []

    def visit(node: str) -> list[str] | None:
        state[node] = ON_PATH
        path.append(node)
        for nxt in adjacent.get(node, ()):
            mark = state.get(nxt)
            if mark == ON_PATH:
                return path[path.index(nxt):] + [nxt]
            if mark is None:
                cycle = visit(nxt)
                if cycle is not None:
                    return cycle
        path.pop()
        state[node] = DONE
        return None

    for start in sorted(adjacent):
        if start not in state:
            cycle = visit(start)
            if cycle is not None:
                return cycle
    return None


def check_forwarding_acyclic(env: Environment) -> Verdict:
    """Pass iff following forwarding directory entries can never loop.

    Every defined row of every directory is one hop; a loop would let an
    attempt bounce between numbers forever, which the step semantics would
    only mask up to the internal-step budget.
    """
    cycle = forwarding_cycle(env)
    if cycle is not None:
        return Verdict(
            ok=False,
            kind="forwarding-acyclicity",
            bounds=DEFAULT_BOUNDS,
            note="forwarding directories loop: " + " -> ".join(cycle),
        )
    return Verdict(
        ok=True,
        kind="forwarding-acyclicity",
        bounds=DEFAULT_BOUNDS,
        note="every forwarding directory chain terminates",
    )


def validate_call_env(env: Environment) -> list[str]:
    """Well-formedness of an environment for the switching-unit corpus.

    Returns human-readable problems, empty when the environment is fit for
    the full chain.  Checks, in order: the tables bind against the base
    machine's declarations (arity, sorts, totality of the total symbols);
    numbers in good standing (ok or ok-s) trigger no feature — the standing
    disjointness assumption the chain's rule checks rely on; and the
    forwarding directories are acyclic.
    """
    bound, problems = bind_environment(base_std(), env)
    problems = list(problems)

    def truth(sym: str, *args: str) -> bool:
        return bool(bound.get(sym, {}).get(tuple(args), False))

    for d in _call_domain(env):
        if not (truth("ok", d) or truth("ok-s", d)):
            continue
        for sym in FORWARDING_TABLES:
            if (d,) in bound.get(sym, {}):
                problems.append(
                    f"{sym}({d}) is defined although {d} is in good standing (ok/ok-s)"
                )
        for sym in ("DNR", "VP"):
            if truth(sym, d):
                problems.append(
                    f"{sym}({d}) holds although {d} is in good standing (ok/ok-s)"
                )
        for sym in ("OCS", "TCS", "CNDB", "ACR"):
            for org in _call_domain(env):
                if truth(sym, org, d):
                    problems.append(
                        f"{sym}({org}, {d}) holds although {d} is in good standing (ok/ok-s)"
                    )
    acyclic = check_forwarding_acyclic(env)
    if not acyclic.ok:
        problems.append(acyclic.note)
    return problems
