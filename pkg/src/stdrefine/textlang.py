"""The textual surface language: diagrams, environments, feature patches.

Three file kinds share one lexer:

* ``.std`` — a machine: domains, used environment symbols, the message
  signature, attributes, states (with initial markings) and transitions.
* ``.env`` — an environment: domain declarations plus function/predicate
  tables (``SYM(args) = value`` rows and ``default SYM = value`` fills).
* ``.feat`` — a feature patch: ``feature NAME on SUBJECT { ... }`` wrapping a
  sequence of rule applications.

Identifiers may contain hyphens (``busy-tone``, ``time-out-alarm``): a hyphen
continues an identifier when it is directly attached on the left and a letter
or underscore follows, so ``a-b`` is one name while ``a - b`` and ``a-1``
are subtractions.  ``#`` starts a comment running to the end of the line.

`print_std` emits a canonical form that `parse_std` maps back to the same
machine, `export_dot` renders the state graph, and `std_to_json` /
`std_from_json` give a lossless structured encoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .model import (
    AttrRef,
    BinOp,
    BoolSort,
    Cons,
    Defined,
    ElseGuard,
    EnumLit,
    EnumSort,
    EnvSymDecl,
    Expr,
    Head,
    IntSort,
    Len,
    Lit,
    ListLit,
    ListSort,
    MsgCtor,
    Msg,
    Name,
    Neg,
    Not,
    ParamRef,
    PrimedRef,
    Signature,
    Sort,
    Std,
    SymApp,
    Tail,
    TRUE,
    Transition,
    Value,
    format_value,
    make_environment,
    validate_std,
    walk,
)
from .model import Environment
from .refine import (
    AddStates,
    AddTransitions,
    RemoveInitialStates,
    RemoveStates,
    RemoveTransitions,
    RuleApplication,
    SplitState,
)
from .features import FeaturePatch


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceSpan:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"line {self.line}, col {self.col}"


@dataclass(frozen=True)
class ParseError:
    message: str
    span: SourceSpan

    def __str__(self) -> str:
        return f"{self.span}: {self.message}"


class ParseFailure(Exception):
    """Raised when parsing fails; `errors` holds the diagnostics."""

    def __init__(self, errors) -> None:
        self.errors = tuple(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "punct" | "eof"
    text: str
    line: int
    col: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, self.line, self.col + max(len(self.text), 1))


_MULTI_PUNCT = ("->?", "->", "::", "..", "==", "!=", "<=", ">=", "&&", "||")
_SINGLE_PUNCT = set("{}()[],:=|/@'!<>+-*^")

RESERVED = frozenset(
    {
        "std", "input", "output", "attributes", "states", "init", "eps", "else",
        "true", "false", "domain", "uses", "feature", "on", "split", "into",
        "redirect", "with", "default",
    }
)

_BUILTIN_FUNCS = {"defined", "head", "tail", "len", "cons"}


def _ident_char(c: str) -> bool:
    return c.isalnum() or c == "_"


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            start = i
            while i < n and text[i].isdigit():
                i += 1
            toks.append(Token("int", text[start:i], line, col))
            col += i - start
            continue
        if c.isalpha() or c == "_":
            start = i
            while i < n:
                if _ident_char(text[i]):
                    i += 1
                elif (
                    text[i] == "-"
                    and i + 1 < n
                    and (text[i + 1].isalpha() or text[i + 1] == "_")
                ):
                    i += 2
                else:
                    break
            toks.append(Token("ident", text[start:i], line, col))
            col += i - start
            continue
        matched = None
        for p in _MULTI_PUNCT:
            if text.startswith(p, i):
                matched = p
                break
        if matched is None and c in _SINGLE_PUNCT:
            matched = c
        if matched is None:
            raise ParseFailure(
                [ParseError(f"unexpected character {c!r}", SourceSpan(line, col, line, col + 1))]
            )
        toks.append(Token("punct", matched, line, col))
        i += len(matched)
        col += len(matched)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser core
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str) -> None:
        self.toks = tokenize(text)
        self.i = 0

    def peek(self, k: int = 0) -> Token:
        j = min(self.i + k, len(self.toks) - 1)
        return self.toks[j]

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind != "eof"

    def at_kind(self, kind: str) -> bool:
        return self.peek().kind == kind

    def take(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, message: str, tok: Optional[Token] = None):
        t = tok if tok is not None else self.peek()
        raise ParseFailure([ParseError(message, t.span)])

    def _describe(self, t: Token) -> str:
        return "end of input" if t.kind == "eof" else repr(t.text)

    def expect(self, text: str, what: Optional[str] = None) -> Token:
        if not self.at(text):
            want = what or repr(text)
            self.fail(f"expected {want}, found {self._describe(self.peek())}")
        return self.take()

    def expect_int(self) -> int:
        if not self.at_kind("int"):
            self.fail(f"expected a number, found {self._describe(self.peek())}")
        return int(self.take().text)

    def expect_name(self, what: str = "a name") -> Token:
        t = self.peek()
        if t.kind != "ident":
            self.fail(f"expected {what}, found {self._describe(t)}")
        if t.text in RESERVED:
            self.fail(f"{t.text!r} is a reserved word and cannot be used as {what}")
        return self.take()

    def expect_eof(self) -> None:
        if not self.at_kind("eof"):
            self.fail(f"expected end of input, found {self._describe(self.peek())}")


# ---------------------------------------------------------------------------
# Name resolution context
# ---------------------------------------------------------------------------


@dataclass
class _Naming:
    """What identifiers mean while parsing expressions.  With `deferred` set
    (feature patch without its subject machine), unknown names become `Name`
    nodes for later resolution."""

    attrs: frozenset[str]
    members: dict[str, str]
    symbols: frozenset[str]
    input_ctors: Optional[dict[str, MsgCtor]]
    output_names: Optional[frozenset[str]]
    deferred: bool

    @staticmethod
    def for_std(
        attrs, members, symbols, input_ctors, output_names
    ) -> "_Naming":
        return _Naming(
            attrs=frozenset(attrs),
            members=dict(members),
            symbols=frozenset(symbols),
            input_ctors=dict(input_ctors),
            output_names=frozenset(output_names),
            deferred=False,
        )

    @staticmethod
    def from_base(base: Std) -> "_Naming":
        return _Naming.for_std(
            attrs={n for n, _ in base.attributes},
            members={m: d for d, ms in base.domains for m in ms},
            symbols={n for n, _ in base.uses},
            input_ctors={c.name: c for c in base.signature.inputs if c.name is not None},
            output_names={c.name for c in base.signature.outputs if c.name is not None},
        )

    @staticmethod
    def deferred_naming() -> "_Naming":
        return _Naming(
            attrs=frozenset(),
            members={},
            symbols=frozenset(),
            input_ctors=None,
            output_names=None,
            deferred=True,
        )


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

_CMP_OPS = {"==": "eq", "!=": "ne", "<=": "le", ">=": "ge", "<": "lt", ">": "gt"}


def _parse_expr(p: _Parser, naming: _Naming, params: frozenset[str]) -> Expr:
    return _parse_or(p, naming, params)


def _parse_or(p, naming, params) -> Expr:
    left = _parse_and(p, naming, params)
    while p.at("||"):
        p.take()
        left = BinOp("or", left, _parse_and(p, naming, params))
    return left


def _parse_and(p, naming, params) -> Expr:
    left = _parse_cmp(p, naming, params)
    while p.at("&&"):
        p.take()
        left = BinOp("and", left, _parse_cmp(p, naming, params))
    return left


def _parse_cmp(p, naming, params) -> Expr:
    left = _parse_add(p, naming, params)
    for text, op in _CMP_OPS.items():
        if p.at(text):
            p.take()
            return BinOp(op, left, _parse_add(p, naming, params))
    return left


def _parse_add(p, naming, params) -> Expr:
    left = _parse_mul(p, naming, params)
    while p.at("+") or p.at("-"):
        op = "add" if p.take().text == "+" else "sub"
        left = BinOp(op, left, _parse_mul(p, naming, params))
    return left


def _parse_mul(p, naming, params) -> Expr:
    left = _parse_unary(p, naming, params)
    while p.at("*"):
        p.take()
        left = BinOp("mul", left, _parse_unary(p, naming, params))
    return left


def _parse_unary(p, naming, params) -> Expr:
    if p.at("!"):
        p.take()
        return Not(_parse_unary(p, naming, params))
    if p.at("-"):
        p.take()
        return Neg(_parse_unary(p, naming, params))
    return _parse_atom(p, naming, params)


def _parse_atom(p, naming: _Naming, params: frozenset[str]) -> Expr:
    t = p.peek()
    if t.kind == "int":
        p.take()
        return Lit(int(t.text))
    if p.at("true"):
        p.take()
        return Lit(True)
    if p.at("false"):
        p.take()
        return Lit(False)
    if p.at("("):
        p.take()
        e = _parse_expr(p, naming, params)
        p.expect(")")
        return e
    if p.at("["):
        p.take()
        items = []
        if not p.at("]"):
            items.append(_parse_expr(p, naming, params))
            while p.at(","):
                p.take()
                items.append(_parse_expr(p, naming, params))
        p.expect("]")
        return ListLit(tuple(items))
    if t.kind != "ident":
        p.fail(f"expected an expression, found {p._describe(t)}")
    if t.text in RESERVED and t.text not in ("true", "false"):
        p.fail(f"{t.text!r} cannot appear in an expression")
    name_tok = p.take()
    name = name_tok.text
    if p.at("'"):
        p.take()
        if not naming.deferred and name not in naming.attrs:
            p.fail(f"unknown attribute {name!r} (primed references name attributes)", name_tok)
        return PrimedRef(name)
    if p.at("("):
        p.take()
        args = []
        if not p.at(")"):
            args.append(_parse_expr(p, naming, params))
            while p.at(","):
                p.take()
                args.append(_parse_expr(p, naming, params))
        p.expect(")")
        args_t = tuple(args)
        if name in _BUILTIN_FUNCS:
            arity = {"defined": 1, "head": 1, "tail": 1, "len": 1, "cons": 2}[name]
            if len(args_t) != arity:
                p.fail(f"{name} takes {arity} argument(s), got {len(args_t)}", name_tok)
            if name == "defined":
                return Defined(args_t[0])
            if name == "head":
                return Head(args_t[0])
            if name == "tail":
                return Tail(args_t[0])
            if name == "len":
                return Len(args_t[0])
            return Cons(args_t[0], args_t[1])
        if not naming.deferred and name not in naming.symbols:
            p.fail(f"unknown environment symbol {name!r}", name_tok)
        return SymApp(name, args_t)
    # Bare identifier: parameters shadow attributes, which shadow enum
    # members, which shadow nullary environment symbols.
    if name in params:
        return ParamRef(name)
    if name in naming.attrs:
        return AttrRef(name)
    if name in naming.members:
        return EnumLit(name, naming.members[name])
    if name in naming.symbols:
        return SymApp(name, ())
    if naming.deferred:
        return Name(name)
    p.fail(f"unknown identifier {name!r}", name_tok)


def _parse_guard(p: _Parser, naming: _Naming, params: frozenset[str]) -> Expr:
    p.expect("{")
    if p.at("else"):
        p.take()
        p.expect("}")
        return ElseGuard()
    e = _parse_expr(p, naming, params)
    p.expect("}")
    return e


# ---------------------------------------------------------------------------
# Sorts
# ---------------------------------------------------------------------------


def _parse_signed_int(p: _Parser) -> int:
    if p.at("-"):
        p.take()
        return -p.expect_int()
    return p.expect_int()


def _parse_sort(
    p: _Parser,
    domains: frozenset[str],
    default_int: tuple[int, int],
    default_list_len: int,
) -> Sort:
    if p.at("Bool"):
        p.take()
        return BoolSort()
    if p.at("Int"):
        p.take()
        if p.at_kind("int") or p.at("-"):
            lo = _parse_signed_int(p)
            p.expect("..")
            hi = _parse_signed_int(p)
        else:
            lo, hi = default_int
        if lo > hi:
            p.fail(f"empty integer range {lo}..{hi}")
        return IntSort(lo, hi)
    if p.at("["):
        p.take()
        elem = _parse_sort(p, domains, default_int, default_list_len)
        p.expect("]")
        length = default_list_len
        if p.at("^"):
            p.take()
            length = p.expect_int()
        return ListSort(elem, length)
    t = p.peek()
    if t.kind == "ident" and t.text in domains:
        p.take()
        return EnumSort(t.text)
    p.fail(
        f"expected a sort (Bool, Int lo..hi, [SORT]^N or a domain name), found {p._describe(t)}"
    )


# ---------------------------------------------------------------------------
# Transitions (shared between .std bodies and .feat payloads)
# ---------------------------------------------------------------------------


def _parse_transition(p: _Parser, naming: _Naming) -> Transition:
    start = p.peek()
    label: Optional[str] = None
    if p.peek().kind == "ident" and p.peek(1).text == ":":
        label = p.expect_name("a transition label").text
        p.expect(":")
    source = p.expect_name("a source state").text
    p.expect("->")
    target = p.expect_name("a target state").text
    p.expect(":")
    guard: Expr = TRUE
    trigger: Optional[str] = None
    params: tuple[str, ...] = ()
    guard_parsed = False
    if p.at("{"):
        # The guard is written before the trigger introduces its parameter
        # names; parse it leniently (unknown identifiers become Name nodes)
        # and rebind once the parameters are known.
        lenient = _Naming(
            attrs=naming.attrs,
            members=naming.members,
            symbols=naming.symbols,
            input_ctors=naming.input_ctors,
            output_names=naming.output_names,
            deferred=True,
        )
        guard = _parse_guard(p, lenient, frozenset())
        guard_parsed = True
    if p.at("eps"):
        p.take()
    else:
        trig_tok = p.expect_name("an input message name")
        trigger = trig_tok.text
        if naming.input_ctors is not None and trigger not in naming.input_ctors:
            p.fail(f"unknown input message {trigger!r}", trig_tok)
        if p.at("("):
            p.take()
            names = []
            if not p.at(")"):
                names.append(p.expect_name("a parameter name").text)
                while p.at(","):
                    p.take()
                    names.append(p.expect_name("a parameter name").text)
            p.expect(")")
            params = tuple(names)
    param_set = frozenset(params)
    if guard_parsed:
        guard = _rebind_params(guard, param_set, naming)
        if not naming.deferred:
            for e in walk(guard):
                if isinstance(e, Name):
                    p.fail(f"unknown identifier {e.name!r} in guard", start)
    outputs: list[tuple[Optional[str], tuple[Expr, ...]]] = []
    if p.at("/"):
        p.take()
        p.expect("[")
        if not p.at("]"):
            outputs.append(_parse_output_term(p, naming, param_set))
            while p.at(","):
                p.take()
                outputs.append(_parse_output_term(p, naming, param_set))
        p.expect("]")
    post: Expr = TRUE
    if p.at("{"):
        p.take()
        post = _parse_expr(p, naming, param_set)
        p.expect("}")
    priority: Optional[int] = None
    if p.at("@"):
        p.take()
        priority = p.expect_int()
    return Transition(
        label=label,
        source=source,
        target=target,
        trigger=trigger,
        params=params,
        guard=guard,
        outputs=tuple(outputs),
        post=post,
        priority=priority,
        span=(start.line, start.col),
    )


def _rebind_params(expr: Expr, params: frozenset[str], naming: _Naming) -> Expr:
    """The guard is written before the trigger introduces its parameter names,
    so identifiers that turn out to be parameters were provisionally read as
    attributes/members/symbols/names; rebind them."""

    def go(e: Expr) -> Expr:
        if isinstance(e, (AttrRef, Name)) and e.name in params:
            return ParamRef(e.name)
        if isinstance(e, EnumLit) and e.value in params:
            return ParamRef(e.value)
        if isinstance(e, SymApp) and not e.args and e.name in params:
            return ParamRef(e.name)
        if isinstance(e, (Not, Neg, Defined, Head, Tail, Len)):
            return type(e)(go(e.arg))
        if isinstance(e, BinOp):
            return BinOp(e.op, go(e.left), go(e.right))
        if isinstance(e, SymApp):
            return SymApp(e.name, tuple(go(a) for a in e.args))
        if isinstance(e, ListLit):
            return ListLit(tuple(go(a) for a in e.items))
        if isinstance(e, Cons):
            return Cons(go(e.head), go(e.tail))
        return e

    return go(expr)


def _parse_output_term(
    p: _Parser, naming: _Naming, params: frozenset[str]
) -> tuple[Optional[str], tuple[Expr, ...]]:
    t = p.peek()
    if t.kind == "ident" and t.text not in RESERVED and t.text not in _BUILTIN_FUNCS:
        is_ctor = (
            naming.output_names is not None and t.text in naming.output_names
        ) or (naming.output_names is None and t.text not in params)
        if is_ctor:
            name = p.take().text
            args: list[Expr] = []
            if p.at("("):
                p.take()
                if not p.at(")"):
                    args.append(_parse_expr(p, naming, params))
                    while p.at(","):
                        p.take()
                        args.append(_parse_expr(p, naming, params))
                p.expect(")")
            return (name, tuple(args))
    expr = _parse_expr(p, naming, params)
    return (None, (expr,))


# ---------------------------------------------------------------------------
# .std files
# ---------------------------------------------------------------------------


def parse_std(
    text: str,
    default_int: tuple[int, int] = (0, 3),
    default_list_len: int = 3,
) -> Std:
    """Parse a machine and validate it; raises ParseFailure with located
    diagnostics on any syntax or well-formedness problem.  `default_int` and
    `default_list_len` fill in bare ``Int`` and ``[SORT]`` sorts."""
    p = _Parser(text)
    std_tok = p.peek()
    p.expect("std", "'std'")
    name = p.expect_name("the machine name").text
    p.expect("=")
    p.expect("{")

    domains: list[tuple[str, tuple[str, ...]]] = []
    domain_names: set[str] = set()
    while p.at("domain"):
        p.take()
        dn = p.expect_name("a domain name")
        if dn.text in domain_names:
            p.fail(f"domain {dn.text!r} declared twice", dn)
        domain_names.add(dn.text)
        p.expect("=")
        p.expect("{")
        members = [p.expect_name("a domain member").text]
        while p.at(","):
            p.take()
            members.append(p.expect_name("a domain member").text)
        p.expect("}")
        domains.append((dn.text, tuple(members)))
    domain_set = frozenset(domain_names)

    uses: list[tuple[str, EnvSymDecl]] = []
    if p.at("uses"):
        p.take()
        p.expect("{")
        seen_syms: set[str] = set()
        while not p.at("}"):
            sym = p.expect_name("an environment symbol name")
            if sym.text in seen_syms:
                p.fail(f"environment symbol {sym.text!r} declared twice", sym)
            seen_syms.add(sym.text)
            p.expect("(")
            psorts: list[Sort] = []
            if not p.at(")"):
                psorts.append(_parse_sort(p, domain_set, default_int, default_list_len))
                while p.at(","):
                    p.take()
                    psorts.append(_parse_sort(p, domain_set, default_int, default_list_len))
            p.expect(")")
            total = True
            if p.at("->?"):
                p.take()
                total = False
            else:
                p.expect("->", "'->' or '->?'")
            rsort = _parse_sort(p, domain_set, default_int, default_list_len)
            uses.append((sym.text, EnvSymDecl(tuple(psorts), rsort, total)))
        p.expect("}")

    def parse_alternatives(keyword: str) -> tuple[MsgCtor, ...]:
        p.expect(keyword)
        alts: list[MsgCtor] = []
        while True:
            t = p.peek()
            bare_sort = (
                t.text in ("Bool", "Int", "[")
                or (t.kind == "ident" and t.text in domain_set)
            )
            if bare_sort:
                sort = _parse_sort(p, domain_set, default_int, default_list_len)
                alts.append(MsgCtor(None, (sort,)))
            else:
                cname = p.expect_name("a message constructor").text
                psorts: list[Sort] = []
                if p.at("("):
                    p.take()
                    psorts.append(_parse_sort(p, domain_set, default_int, default_list_len))
                    while p.at(","):
                        p.take()
                        psorts.append(_parse_sort(p, domain_set, default_int, default_list_len))
                    p.expect(")")
                alts.append(MsgCtor(cname, tuple(psorts)))
            if p.at("|"):
                p.take()
                continue
            break
        return tuple(alts)

    inputs = parse_alternatives("input")
    outputs = parse_alternatives("output")
    signature = Signature(inputs, outputs)

    attributes: list[tuple[str, Sort]] = []
    while p.at("attributes"):
        p.take()
        while True:
            names = [p.expect_name("an attribute name").text]
            while p.at(","):
                p.take()
                names.append(p.expect_name("an attribute name").text)
            p.expect("::")
            sort = _parse_sort(p, domain_set, default_int, default_list_len)
            attributes.extend((n, sort) for n in names)
            if p.at("states") or p.at("attributes") or p.at("}"):
                break

    naming = _Naming.for_std(
        attrs={n for n, _ in attributes},
        members={m: d for d, ms in domains for m in ms},
        symbols={n for n, _ in uses},
        input_ctors={c.name: c for c in inputs if c.name is not None},
        output_names={c.name for c in outputs if c.name is not None},
    )

    p.expect("states")
    states: list[str] = []
    initial: list[tuple[str, Expr]] = []
    while True:
        sname = p.expect_name("a state name").text
        states.append(sname)
        if p.at("init"):
            p.take()
            pred: Expr = TRUE
            if p.at("{"):
                p.take()
                pred = _parse_expr(p, naming, frozenset())
                p.expect("}")
            initial.append((sname, pred))
        if p.at(","):
            p.take()
            continue
        break

    transitions: list[Transition] = []
    while not p.at("}"):
        if p.at_kind("eof"):
            p.fail("expected a transition or '}'")
        transitions.append(_parse_transition(p, naming))
    p.expect("}")
    p.expect_eof()

    std = Std(
        name=name,
        domains=tuple(domains),
        uses=tuple(uses),
        signature=signature,
        attributes=tuple(attributes),
        states=tuple(states),
        initial=tuple(initial),
        transitions=tuple(transitions),
    )
    problems = validate_std(std)
    if problems:
        raise ParseFailure([ParseError(m, std_tok.span) for m in problems])
    return std


# ---------------------------------------------------------------------------
# .env files
# ---------------------------------------------------------------------------


def parse_env(text: str) -> Environment:
    """Parse an environment file: domain declarations, table rows
    ``SYM(v1, …) = value``, and ``default SYM = value`` fills."""
    p = _Parser(text)
    domains: dict[str, tuple[str, ...]] = {}
    tables: dict[str, dict[tuple[Value, ...], Value]] = {}
    defaults: dict[str, Value] = {}
    member_uses: list[tuple[Token, str]] = []

    def parse_value() -> Value:
        t = p.peek()
        if p.at("true"):
            p.take()
            return True
        if p.at("false"):
            p.take()
            return False
        if t.kind == "int" or p.at("-"):
            return _parse_signed_int(p)
        if p.at("["):
            p.take()
            items: list[Value] = []
            if not p.at("]"):
                items.append(parse_value())
                while p.at(","):
                    p.take()
                    items.append(parse_value())
            p.expect("]")
            return tuple(items)
        tok = p.expect_name("a value")
        member_uses.append((tok, tok.text))
        return tok.text

    while not p.at_kind("eof"):
        if p.at("domain"):
            p.take()
            dn = p.expect_name("a domain name")
            if dn.text in domains:
                p.fail(f"domain {dn.text!r} declared twice", dn)
            p.expect("=")
            p.expect("{")
            members = [p.expect_name("a domain member").text]
            while p.at(","):
                p.take()
                members.append(p.expect_name("a domain member").text)
            p.expect("}")
            domains[dn.text] = tuple(members)
            continue
        if p.at("default"):
            p.take()
            sym = p.expect_name("an environment symbol")
            if sym.text in defaults:
                p.fail(f"default for {sym.text!r} given twice", sym)
            p.expect("=")
            defaults[sym.text] = parse_value()
            continue
        sym = p.expect_name("an environment symbol")
        args: tuple[Value, ...] = ()
        if p.at("("):
            p.take()
            items: list[Value] = []
            if not p.at(")"):
                items.append(parse_value())
                while p.at(","):
                    p.take()
                    items.append(parse_value())
            p.expect(")")
            args = tuple(items)
        p.expect("=")
        value = parse_value()
        rows = tables.setdefault(sym.text, {})
        if args in rows:
            p.fail(f"duplicate row for {sym.text}{args!r}", sym)
        rows[args] = value

    all_members = {m for ms in domains.values() for m in ms}
    for tok, name in member_uses:
        if name not in all_members:
            raise ParseFailure(
                [
                    ParseError(
                        f"{name!r} is not a member of any domain declared in this environment",
                        tok.span,
                    )
                ]
            )
    return make_environment(domains, tables, defaults)


def _parse_ground_value(p: "_Parser") -> Value:
    t = p.peek()
    if p.at("true"):
        p.take()
        return True
    if p.at("false"):
        p.take()
        return False
    if t.kind == "int" or p.at("-"):
        return _parse_signed_int(p)
    if p.at("["):
        p.take()
        items: list[Value] = []
        if not p.at("]"):
            items.append(_parse_ground_value(p))
            while p.at(","):
                p.take()
                items.append(_parse_ground_value(p))
        p.expect("]")
        return tuple(items)
    return p.expect_name("a value").text


def parse_messages(text: str) -> tuple[Msg, ...]:
    """Parse a comma-separated message list such as ``LT, DL(7), call(d1, d2)``.

    Arguments are ground values (integers, ``true``/``false``, domain members,
    or ``[...]`` lists); a bare value stands for a message of an unnamed
    signature alternative.  Empty text is the empty sequence.  Whether each
    message actually belongs to a machine's alphabet is checked at use."""
    p = _Parser(text)
    msgs: list[Msg] = []
    if p.at_kind("eof"):
        return ()
    while True:
        t = p.peek()
        if t.kind == "int" or p.at("-") or p.at("true") or p.at("false") or p.at("["):
            msgs.append(Msg(None, (_parse_ground_value(p),)))
        else:
            name = p.expect_name("a message constructor")
            args: list[Value] = []
            if p.at("("):
                p.take()
                if not p.at(")"):
                    args.append(_parse_ground_value(p))
                    while p.at(","):
                        p.take()
                        args.append(_parse_ground_value(p))
                p.expect(")")
            msgs.append(Msg(name.text, tuple(args)))
        if p.at(","):
            p.take()
            continue
        break
    p.expect_eof()
    return tuple(msgs)


# ---------------------------------------------------------------------------
# .feat files
# ---------------------------------------------------------------------------


def parse_feature(text: str, base: Optional[Std] = None) -> FeaturePatch:
    """Parse a feature patch.  When `base` (the subject machine) is given,
    identifiers in payload expressions are resolved against it immediately;
    otherwise they are deferred and resolved when the patch is applied."""
    p = _Parser(text)
    p.expect("feature")
    fname = p.expect_name("the feature name").text
    p.expect("on")
    subject = p.expect_name("the subject machine name").text
    p.expect("{")
    naming = _Naming.from_base(base) if base is not None else _Naming.deferred_naming()

    def name_list() -> tuple[str, ...]:
        p.expect("{")
        names = [p.expect_name("a state name").text]
        while p.at(","):
            p.take()
            names.append(p.expect_name("a state name").text)
        p.expect("}")
        return tuple(names)

    apps: list[RuleApplication] = []
    while not p.at("}"):
        if p.at("add-states"):
            p.take()
            names = name_list()
            payload: tuple[Transition, ...] = ()
            if p.at("with"):
                p.take()
                p.expect("{")
                ts = []
                while not p.at("}"):
                    ts.append(_parse_transition(p, naming))
                p.expect("}")
                payload = tuple(ts)
            apps.append(AddStates(names, payload))
        elif p.at("remove-states"):
            p.take()
            apps.append(RemoveStates(name_list()))
        elif p.at("split"):
            p.take()
            sname = p.expect_name("the state to split").text
            p.expect("into")
            parts = name_list()
            p.expect("{")
            redirects: list[tuple[str, str, Optional[Expr]]] = []
            while p.at("redirect"):
                p.take()
                label = p.expect_name("a transition label").text
                p.expect("->")
                part = p.expect_name("a part name").text
                post: Optional[Expr] = None
                if p.at("with"):
                    p.take()
                    p.expect("{")
                    post_tok = p.peek()
                    lenient = _Naming(
                        attrs=naming.attrs,
                        members=naming.members,
                        symbols=naming.symbols,
                        input_ctors=naming.input_ctors,
                        output_names=naming.output_names,
                        deferred=True,
                    )
                    post = _parse_expr(p, lenient, frozenset())
                    if base is not None:
                        t = base.transition(label)
                        if t is not None and t.params:
                            post = _rebind_params(post, frozenset(t.params), naming)
                        for e in walk(post):
                            if isinstance(e, Name):
                                p.fail(
                                    f"unknown identifier {e.name!r} in redirect postcondition",
                                    post_tok,
                                )
                    p.expect("}")
                redirects.append((label, part, post))
            p.expect("}")
            apps.append(SplitState(sname, parts, tuple(redirects)))
        elif p.at("add-transitions"):
            p.take()
            p.expect("{")
            ts = []
            while not p.at("}"):
                ts.append(_parse_transition(p, naming))
            p.expect("}")
            apps.append(AddTransitions(tuple(ts)))
        elif p.at("remove-transitions"):
            p.take()
            p.expect("{")
            labels = [p.expect_name("a transition label").text]
            while p.at(","):
                p.take()
                labels.append(p.expect_name("a transition label").text)
            p.expect("}")
            apps.append(RemoveTransitions(tuple(labels)))
        elif p.at("remove-initial-states"):
            p.take()
            apps.append(RemoveInitialStates(name_list()))
        else:
            p.fail(
                "expected a rule application (add-states, remove-states, split, "
                f"add-transitions, remove-transitions, remove-initial-states), "
                f"found {p._describe(p.peek())}"
            )
    p.expect("}")
    p.expect_eof()
    if not apps:
        p.fail("a feature patch needs at least one rule application")
    return FeaturePatch(name=fname, subject=subject, applications=tuple(apps))


# ---------------------------------------------------------------------------
# Canonical printing
# ---------------------------------------------------------------------------

_OP_TEXT = {
    "or": "||", "and": "&&", "eq": "==", "ne": "!=", "le": "<=", "ge": ">=",
    "lt": "<", "gt": ">", "add": "+", "sub": "-", "mul": "*",
}

_PREC = {
    "or": 1, "and": 2,
    "eq": 3, "ne": 3, "le": 3, "ge": 3, "lt": 3, "gt": 3,
    "add": 4, "sub": 4, "mul": 5,
}

def _expr_prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, (Not, Neg)):
        return 6
    return 7


def print_expr(e: Expr) -> str:
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value)
    if isinstance(e, EnumLit):
        return e.value
    if isinstance(e, (AttrRef, ParamRef, Name)):
        return e.name
    if isinstance(e, PrimedRef):
        return f"{e.name}'"
    if isinstance(e, SymApp):
        if not e.args:
            return e.name
        return f"{e.name}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, Defined):
        return f"defined({print_expr(e.arg)})"
    if isinstance(e, Head):
        return f"head({print_expr(e.arg)})"
    if isinstance(e, Tail):
        return f"tail({print_expr(e.arg)})"
    if isinstance(e, Len):
        return f"len({print_expr(e.arg)})"
    if isinstance(e, Cons):
        return f"cons({print_expr(e.head)}, {print_expr(e.tail)})"
    if isinstance(e, ListLit):
        return "[" + ", ".join(print_expr(a) for a in e.items) + "]"
    if isinstance(e, Not):
        return "!" + _child(e.arg, 6, right=False)
    if isinstance(e, Neg):
        return "-" + _child(e.arg, 6, right=False)
    if isinstance(e, ElseGuard):
        return "else"
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        left = _child(e.left, prec, right=False)
        right = _child(e.right, prec, right=True)
        return f"{left} {_OP_TEXT[e.op]} {right}"
    raise TypeError(f"not an expression: {e!r}")


def _child(e: Expr, parent_prec: int, right: bool) -> str:
    text = print_expr(e)
    prec = _expr_prec(e)
    if prec < parent_prec or (right and prec == parent_prec):
        return f"({text})"
    return text


def _print_sort(s: Sort) -> str:
    return str(s)


def _print_ctor(c: MsgCtor) -> str:
    if c.name is None:
        return _print_sort(c.params[0])
    if not c.params:
        return c.name
    return f"{c.name}({', '.join(_print_sort(s) for s in c.params)})"


def print_transition(t: Transition) -> str:
    parts = []
    if t.label is not None:
        parts.append(f"{t.label}: ")
    parts.append(f"{t.source} -> {t.target} : ")
    if isinstance(t.guard, ElseGuard):
        parts.append("{else} ")
    elif t.guard != TRUE:
        parts.append("{" + print_expr(t.guard) + "} ")
    if t.trigger is None:
        parts.append("eps")
    else:
        parts.append(t.trigger)
        if t.params:
            parts.append("(" + ", ".join(t.params) + ")")
    if t.outputs:
        terms = []
        for cname, args in t.outputs:
            if cname is None:
                terms.append(print_expr(args[0]))
            elif args:
                terms.append(f"{cname}(" + ", ".join(print_expr(a) for a in args) + ")")
            else:
                terms.append(cname)
        parts.append(" / [" + ", ".join(terms) + "]")
    if t.post != TRUE:
        parts.append(" {" + print_expr(t.post) + "}")
    if t.priority is not None:
        parts.append(f" @{t.priority}")
    return "".join(parts)


def print_std(std: Std) -> str:
    """Canonical text for a machine; `parse_std(print_std(m))` reproduces `m`
    exactly (source spans aside)."""
    lines: list[str] = [f"std {std.name} = {{"]
    for dn, members in std.domains:
        lines.append(f"  domain {dn} = {{{', '.join(members)}}}")
    if std.uses:
        if std.domains:
            lines.append("")
        lines.append("  uses {")
        for sym, decl in std.uses:
            arrow = "->" if decl.total else "->?"
            args = ", ".join(_print_sort(s) for s in decl.params)
            lines.append(f"    {sym}({args}) {arrow} {_print_sort(decl.result)}")
        lines.append("  }")
    lines.append("")
    lines.append("  input " + " | ".join(_print_ctor(c) for c in std.signature.inputs))
    lines.append("  output " + " | ".join(_print_ctor(c) for c in std.signature.outputs))
    if std.attributes:
        lines.append("")
        groups: list[tuple[list[str], Sort]] = []
        for name, sort in std.attributes:
            if groups and groups[-1][1] == sort:
                groups[-1][0].append(name)
            else:
                groups.append(([name], sort))
        for names, sort in groups:
            lines.append(f"  attributes {', '.join(names)} :: {_print_sort(sort)}")
    lines.append("")
    init_map = dict(std.initial)
    state_texts = []
    for s in std.states:
        if s in init_map:
            pred = init_map[s]
            if pred == TRUE:
                state_texts.append(f"{s} init")
            else:
                state_texts.append(f"{s} init {{{print_expr(pred)}}}")
        else:
            state_texts.append(s)
    lines.append("  states " + ", ".join(state_texts))
    if std.transitions:
        lines.append("")
        for t in std.transitions:
            lines.append("  " + print_transition(t))
    lines.append("}")
    return "\n".join(lines) + "\n"


def print_env(env: Environment) -> str:
    """Canonical text for an environment; `parse_env(print_env(e))`
    reproduces `e` exactly."""
    lines: list[str] = []
    for dn, members in env.domains:
        lines.append(f"domain {dn} = {{{', '.join(members)}}}")
    for sym, value in env.defaults:
        lines.append(f"default {sym} = {format_value(value)}")
    for sym, rows in env.tables:
        for args, value in rows:
            head = sym if not args else f"{sym}({', '.join(format_value(a) for a in args)})"
            lines.append(f"{head} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def print_feature(patch: FeaturePatch) -> str:
    """Canonical text for a feature patch; `parse_feature(print_feature(p),
    base)` reproduces `p` when parsed against the same subject machine (or
    none, if `p` itself was parsed without one)."""
    lines: list[str] = [f"feature {patch.name} on {patch.subject} {{"]

    def name_list(names) -> str:
        return "{ " + ", ".join(names) + " }"

    for app in patch.applications:
        if isinstance(app, AddStates):
            head = f"  add-states {name_list(app.names)}"
            if app.transitions:
                lines.append(head + " with {")
                for t in app.transitions:
                    lines.append("    " + print_transition(t))
                lines.append("  }")
            else:
                lines.append(head)
        elif isinstance(app, RemoveStates):
            lines.append(f"  remove-states {name_list(app.names)}")
        elif isinstance(app, SplitState):
            lines.append(f"  split {app.name} into {name_list(app.parts)} {{")
            for label, part, post in app.redirects:
                line = f"    redirect {label} -> {part}"
                if post is not None:
                    line += " with {" + print_expr(post) + "}"
                lines.append(line)
            lines.append("  }")
        elif isinstance(app, AddTransitions):
            lines.append("  add-transitions {")
            for t in app.transitions:
                lines.append("    " + print_transition(t))
            lines.append("  }")
        elif isinstance(app, RemoveTransitions):
            lines.append(f"  remove-transitions {name_list(app.labels)}")
        elif isinstance(app, RemoveInitialStates):
            lines.append(f"  remove-initial-states {name_list(app.names)}")
        else:
            raise TypeError(f"not a rule application: {app!r}")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(std: Std) -> str:
    """Graphviz rendering: one node per control state, entry arrows for
    initial markings, one edge per transition labeled with its full text."""
    lines = [f'digraph "{_dot_escape(std.name)}" {{', "  rankdir=LR;", '  node [shape=circle];']
    for i, (s, pred) in enumerate(std.initial):
        lines.append(f'  "__init{i}" [shape=point, label=""];')
        attrs = ""
        if pred != TRUE:
            attrs = f' [label="{_dot_escape("{" + print_expr(pred) + "}")}"]'
        lines.append(f'  "__init{i}" -> "{_dot_escape(s)}"{attrs};')
    for s in std.states:
        lines.append(f'  "{_dot_escape(s)}";')
    for t in std.transitions:
        text = print_transition(t)
        # The arrow itself carries source/target; keep the label compact.
        head = f"{t.label}: " if t.label is not None else ""
        body = text.split(" : ", 1)[1] if " : " in text else text
        lines.append(
            f'  "{_dot_escape(t.source)}" -> "{_dot_escape(t.target)}" '
            f'[label="{_dot_escape(head + body)}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON (std/1) export / import
# ---------------------------------------------------------------------------


def sort_to_json(s: Sort) -> dict:
    if isinstance(s, BoolSort):
        return {"kind": "bool"}
    if isinstance(s, IntSort):
        return {"kind": "int", "lo": s.lo, "hi": s.hi}
    if isinstance(s, EnumSort):
        return {"kind": "enum", "domain": s.domain}
    if isinstance(s, ListSort):
        return {"kind": "list", "elem": sort_to_json(s.elem), "max_len": s.max_len}
    raise TypeError(f"not a sort: {s!r}")


def sort_from_json(d: dict) -> Sort:
    kind = d["kind"]
    if kind == "bool":
        return BoolSort()
    if kind == "int":
        return IntSort(d["lo"], d["hi"])
    if kind == "enum":
        return EnumSort(d["domain"])
    if kind == "list":
        return ListSort(sort_from_json(d["elem"]), d["max_len"])
    raise ValueError(f"unknown sort kind {kind!r}")


def expr_to_json(e: Expr):
    if isinstance(e, Lit):
        return {"node": "lit", "value": e.value}
    if isinstance(e, EnumLit):
        return {"node": "enum", "value": e.value, "domain": e.domain}
    if isinstance(e, AttrRef):
        return {"node": "attr", "name": e.name}
    if isinstance(e, PrimedRef):
        return {"node": "primed", "name": e.name}
    if isinstance(e, ParamRef):
        return {"node": "param", "name": e.name}
    if isinstance(e, Name):
        return {"node": "name", "name": e.name}
    if isinstance(e, SymApp):
        return {"node": "sym", "name": e.name, "args": [expr_to_json(a) for a in e.args]}
    if isinstance(e, Defined):
        return {"node": "defined", "arg": expr_to_json(e.arg)}
    if isinstance(e, Not):
        return {"node": "not", "arg": expr_to_json(e.arg)}
    if isinstance(e, Neg):
        return {"node": "neg", "arg": expr_to_json(e.arg)}
    if isinstance(e, BinOp):
        return {
            "node": "bin", "op": e.op,
            "left": expr_to_json(e.left), "right": expr_to_json(e.right),
        }
    if isinstance(e, ListLit):
        return {"node": "list", "items": [expr_to_json(a) for a in e.items]}
    if isinstance(e, Cons):
        return {"node": "cons", "head": expr_to_json(e.head), "tail": expr_to_json(e.tail)}
    if isinstance(e, Head):
        return {"node": "head", "arg": expr_to_json(e.arg)}
    if isinstance(e, Tail):
        return {"node": "tail", "arg": expr_to_json(e.arg)}
    if isinstance(e, Len):
        return {"node": "len", "arg": expr_to_json(e.arg)}
    if isinstance(e, ElseGuard):
        return {"node": "else"}
    raise TypeError(f"not an expression: {e!r}")


def expr_from_json(d) -> Expr:
    node = d["node"]
    if node == "lit":
        return Lit(d["value"])
    if node == "enum":
        return EnumLit(d["value"], d["domain"])
    if node == "attr":
        return AttrRef(d["name"])
    if node == "primed":
        return PrimedRef(d["name"])
    if node == "param":
        return ParamRef(d["name"])
    if node == "name":
        return Name(d["name"])
    if node == "sym":
        return SymApp(d["name"], tuple(expr_from_json(a) for a in d["args"]))
    if node == "defined":
        return Defined(expr_from_json(d["arg"]))
    if node == "not":
        return Not(expr_from_json(d["arg"]))
    if node == "neg":
        return Neg(expr_from_json(d["arg"]))
    if node == "bin":
        return BinOp(d["op"], expr_from_json(d["left"]), expr_from_json(d["right"]))
    if node == "list":
        return ListLit(tuple(expr_from_json(a) for a in d["items"]))
    if node == "cons":
        return Cons(expr_from_json(d["head"]), expr_from_json(d["tail"]))
    if node == "head":
        return Head(expr_from_json(d["arg"]))
    if node == "tail":
        return Tail(expr_from_json(d["arg"]))
    if node == "len":
        return Len(expr_from_json(d["arg"]))
    if node == "else":
        return ElseGuard()
    raise ValueError(f"unknown expression node {node!r}")


def _ctor_to_json(c: MsgCtor) -> dict:
    return {"name": c.name, "params": [sort_to_json(s) for s in c.params]}


def _ctor_from_json(d: dict) -> MsgCtor:
    return MsgCtor(d["name"], tuple(sort_from_json(s) for s in d["params"]))


def _transition_to_json(t: Transition) -> dict:
    return {
        "label": t.label,
        "source": t.source,
        "target": t.target,
        "trigger": t.trigger,
        "params": list(t.params),
        "guard": expr_to_json(t.guard),
        "outputs": [
            {"ctor": cname, "args": [expr_to_json(a) for a in args]}
            for cname, args in t.outputs
        ],
        "post": expr_to_json(t.post),
        "priority": t.priority,
    }


def _transition_from_json(d: dict) -> Transition:
    return Transition(
        label=d["label"],
        source=d["source"],
        target=d["target"],
        trigger=d["trigger"],
        params=tuple(d["params"]),
        guard=expr_from_json(d["guard"]),
        outputs=tuple(
            (o["ctor"], tuple(expr_from_json(a) for a in o["args"])) for o in d["outputs"]
        ),
        post=expr_from_json(d["post"]),
        priority=d["priority"],
    )


def std_to_json(std: Std) -> dict:
    return {
        "format": "std/1",
        "name": std.name,
        "domains": [{"name": n, "members": list(ms)} for n, ms in std.domains],
        "uses": [
            {
                "name": n,
                "params": [sort_to_json(s) for s in decl.params],
                "result": sort_to_json(decl.result),
                "total": decl.total,
            }
            for n, decl in std.uses
        ],
        "signature": {
            "inputs": [_ctor_to_json(c) for c in std.signature.inputs],
            "outputs": [_ctor_to_json(c) for c in std.signature.outputs],
        },
        "attributes": [{"name": n, "sort": sort_to_json(s)} for n, s in std.attributes],
        "states": list(std.states),
        "initial": [{"state": s, "pred": expr_to_json(e)} for s, e in std.initial],
        "transitions": [_transition_to_json(t) for t in std.transitions],
    }


def std_from_json(d: dict) -> Std:
    if d.get("format") != "std/1":
        raise ValueError(f"not a std/1 document (format: {d.get('format')!r})")
    std = Std(
        name=d["name"],
        domains=tuple((x["name"], tuple(x["members"])) for x in d["domains"]),
        uses=tuple(
            (
                x["name"],
                EnvSymDecl(
                    tuple(sort_from_json(s) for s in x["params"]),
                    sort_from_json(x["result"]),
                    x["total"],
                ),
            )
            for x in d["uses"]
        ),
        signature=Signature(
            tuple(_ctor_from_json(c) for c in d["signature"]["inputs"]),
            tuple(_ctor_from_json(c) for c in d["signature"]["outputs"]),
        ),
        attributes=tuple((x["name"], sort_from_json(x["sort"])) for x in d["attributes"]),
        states=tuple(d["states"]),
        initial=tuple((x["state"], expr_from_json(x["pred"])) for x in d["initial"]),
        transitions=tuple(_transition_from_json(t) for t in d["transitions"]),
    )
    problems = validate_std(std)
    if problems:
        raise ValueError("invalid machine: " + "; ".join(problems))
    return std
