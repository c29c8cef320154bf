"""Core model for state transition diagrams (STDs) over finite data domains.

An ``Std`` couples a message signature (input and output constructors) with a
set of control states, typed attributes, and guarded transitions.  A machine
configuration is a control state plus a total attribute valuation; transitions
relate configurations via a guard over the pre-state, a trigger (an input
constructor binding fresh parameters, or the internal trigger ``eps``), a
sequence of output expressions, and a relational postcondition over primed
and unprimed attributes.

Everything here is finite and enumerable by construction: integer sorts carry
explicit bounds, list sorts carry a maximum length, and enumeration sorts
refer to named finite domains.  That keeps guard disjointness, postcondition
satisfiability, and successor enumeration decidable by brute force.

Expression evaluation is strict.  Applying a partial environment function
outside its table yields the special `Undefined` marker, which propagates
through every operator except ``defined(...)``.  A guard that evaluates to
Undefined is simply not satisfied.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Union


class UndefinedType:
    """Singleton marker for the result of a partial function outside its table."""

    _instance: Optional["UndefinedType"] = None

    def __new__(cls) -> "UndefinedType":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Undefined"


Undefined = UndefinedType()

#: A ground value: bool, int, enum member (str), or a tuple for list values.
Value = Union[bool, int, str, tuple]


# ---------------------------------------------------------------------------
# Sorts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoolSort:
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class IntSort:
    lo: int
    hi: int

    def __str__(self) -> str:
        return f"Int {self.lo}..{self.hi}"


@dataclass(frozen=True)
class EnumSort:
    domain: str

    def __str__(self) -> str:
        return self.domain


@dataclass(frozen=True)
class ListSort:
    elem: "Sort"
    max_len: int

    def __str__(self) -> str:
        return f"[{self.elem}]^{self.max_len}"


Sort = Union[BoolSort, IntSort, EnumSort, ListSort]


def enumerate_sort(sort: Sort, domains: dict[str, tuple[str, ...]]) -> list[Value]:
    """All values of `sort`, in a fixed deterministic order."""
    if isinstance(sort, BoolSort):
        return [False, True]
    if isinstance(sort, IntSort):
        return list(range(sort.lo, sort.hi + 1))
    if isinstance(sort, EnumSort):
        if sort.domain not in domains:
            raise KeyError(f"unknown domain {sort.domain!r}")
        return list(domains[sort.domain])
    if isinstance(sort, ListSort):
        elems = enumerate_sort(sort.elem, domains)
        out: list[Value] = []
        for n in range(sort.max_len + 1):
            out.extend(tuple(p) for p in itertools.product(elems, repeat=n))
        return out
    raise TypeError(f"not a sort: {sort!r}")


def value_in_sort(value: Value, sort: Sort, domains: dict[str, tuple[str, ...]]) -> bool:
    if isinstance(sort, BoolSort):
        return isinstance(value, bool)
    if isinstance(sort, IntSort):
        return isinstance(value, int) and not isinstance(value, bool) and sort.lo <= value <= sort.hi
    if isinstance(sort, EnumSort):
        return isinstance(value, str) and value in domains.get(sort.domain, ())
    if isinstance(sort, ListSort):
        return (
            isinstance(value, tuple)
            and len(value) <= sort.max_len
            and all(value_in_sort(v, sort.elem, domains) for v in value)
        )
    return False


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    """Boolean or integer literal."""

    value: Value


@dataclass(frozen=True)
class EnumLit:
    """A member of a named finite domain."""

    value: str
    domain: str


@dataclass(frozen=True)
class AttrRef:
    name: str


@dataclass(frozen=True)
class PrimedRef:
    """Post-state attribute reference; only legal inside postconditions."""

    name: str


@dataclass(frozen=True)
class ParamRef:
    """Reference to a trigger-bound parameter."""

    name: str


@dataclass(frozen=True)
class SymApp:
    """Application of a declared environment function or predicate."""

    name: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Defined:
    """defined(e): true iff e does not evaluate to Undefined.  Never Undefined itself."""

    arg: "Expr"


@dataclass(frozen=True)
class Not:
    arg: "Expr"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # and or eq ne lt le gt ge add sub mul
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class ListLit:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class Cons:
    head: "Expr"
    tail: "Expr"


@dataclass(frozen=True)
class Head:
    arg: "Expr"


@dataclass(frozen=True)
class Tail:
    arg: "Expr"


@dataclass(frozen=True)
class Len:
    arg: "Expr"


@dataclass(frozen=True)
class ElseGuard:
    """Surface-only guard: the negation of every other guard in the transition's
    (source, trigger) group.  Eliminated by `desugar`."""


@dataclass(frozen=True)
class Name:
    """An identifier whose resolution (parameter, attribute, enum member or
    environment symbol) was deferred — produced when parsing a feature patch
    without its subject diagram.  `resolve_names` eliminates it; evaluation
    and validation reject it."""

    name: str


Expr = Union[
    Lit, EnumLit, AttrRef, PrimedRef, ParamRef, SymApp, Defined, Not, Neg,
    BinOp, ListLit, Cons, Head, Tail, Len, ElseGuard, Name,
]

TRUE = Lit(True)
FALSE = Lit(False)


def conj(*parts: Expr) -> Expr:
    """Conjunction of the given expressions, flattening trivial cases."""
    items = [p for p in parts if p != TRUE]
    if not items:
        return TRUE
    acc = items[0]
    for p in items[1:]:
        acc = BinOp("and", acc, p)
    return acc


def walk(expr: Expr) -> Iterator[Expr]:
    """Yield expr and every sub-expression."""
    yield expr
    if isinstance(expr, (Not, Neg, Defined, Head, Tail, Len)):
        yield from walk(expr.arg)
    elif isinstance(expr, BinOp):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, SymApp):
        for a in expr.args:
            yield from walk(a)
    elif isinstance(expr, ListLit):
        for a in expr.items:
            yield from walk(a)
    elif isinstance(expr, Cons):
        yield from walk(expr.head)
        yield from walk(expr.tail)


def has_primed(expr: Expr) -> bool:
    return any(isinstance(e, PrimedRef) for e in walk(expr))


def has_else(expr: Expr) -> bool:
    return any(isinstance(e, ElseGuard) for e in walk(expr))


def resolve_names(
    expr: Expr,
    attrs: frozenset | set,
    members: dict[str, str],
    symbols: frozenset | set,
    params: frozenset | set,
) -> Expr:
    """Replace every deferred `Name` by its resolution.  Parameters shadow
    attributes, which shadow enum members, which shadow nullary environment
    symbols.  Raises ValueError on an identifier none of them covers."""
    if isinstance(expr, Name):
        n = expr.name
        if n in params:
            return ParamRef(n)
        if n in attrs:
            return AttrRef(n)
        if n in members:
            return EnumLit(n, members[n])
        if n in symbols:
            return SymApp(n, ())
        raise ValueError(f"unknown identifier {n!r}")

    def go(e: Expr) -> Expr:
        return resolve_names(e, attrs, members, symbols, params)

    if isinstance(expr, (Not, Neg, Defined, Head, Tail, Len)):
        return type(expr)(go(expr.arg))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, go(expr.left), go(expr.right))
    if isinstance(expr, SymApp):
        return SymApp(expr.name, tuple(go(a) for a in expr.args))
    if isinstance(expr, ListLit):
        return ListLit(tuple(go(a) for a in expr.items))
    if isinstance(expr, Cons):
        return Cons(go(expr.head), go(expr.tail))
    return expr


# ---------------------------------------------------------------------------
# Signature, messages, transitions, Std
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MsgCtor:
    """One alternative of a message set.

    `name` is None for a bare value alternative (the message is the carried
    value itself, e.g. an output alphabet that is just a bounded integer);
    in that case `params` holds exactly the one value sort.
    """

    name: Optional[str]
    params: tuple[Sort, ...] = ()


@dataclass(frozen=True)
class Signature:
    inputs: tuple[MsgCtor, ...]
    outputs: tuple[MsgCtor, ...]

    def input_ctor(self, name: Optional[str]) -> Optional[MsgCtor]:
        for c in self.inputs:
            if c.name == name:
                return c
        return None

    def output_ctor(self, name: Optional[str]) -> Optional[MsgCtor]:
        for c in self.outputs:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class Msg:
    """A ground message instance: constructor name (None for a bare value) and
    its argument values."""

    ctor: Optional[str]
    args: tuple[Value, ...] = ()

    def __str__(self) -> str:
        if self.ctor is None:
            return format_value(self.args[0])
        if not self.args:
            return self.ctor
        return f"{self.ctor}({', '.join(format_value(a) for a in self.args)})"


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    return str(v)


def _value_key(v: Value):
    if isinstance(v, bool):
        return (0, v)
    if isinstance(v, int):
        return (1, v)
    if isinstance(v, str):
        return (2, v)
    return (3, tuple(_value_key(x) for x in v))


def msg_key(m: Msg):
    """Deterministic sort key for message instances."""
    return (m.ctor or "", tuple(_value_key(a) for a in m.args))


def message_instances(ctors: Iterable[MsgCtor], domains: dict[str, tuple[str, ...]]) -> list[Msg]:
    """Every ground message over the given constructors, deterministically ordered."""
    out: list[Msg] = []
    for c in ctors:
        pools = [enumerate_sort(s, domains) for s in c.params]
        for combo in itertools.product(*pools):
            out.append(Msg(c.name, tuple(combo)))
    out.sort(key=msg_key)
    return out


@dataclass(frozen=True)
class Transition:
    """A guarded transition.  `trigger` is an input constructor name, or None
    for the internal trigger eps (in which case `params` must be empty).
    `outputs` items are (output-constructor-name-or-None, argument exprs).
    """

    label: Optional[str]
    source: str
    target: str
    trigger: Optional[str]
    params: tuple[str, ...]
    guard: Expr
    outputs: tuple[tuple[Optional[str], tuple[Expr, ...]], ...]
    post: Expr
    priority: Optional[int] = None
    span: Optional[tuple[int, int]] = field(default=None, compare=False)

    @property
    def is_internal(self) -> bool:
        return self.trigger is None


@dataclass(frozen=True)
class EnvSymDecl:
    """Declared environment symbol: parameter sorts, result sort, totality."""

    params: tuple[Sort, ...]
    result: Sort
    total: bool


@dataclass(frozen=True, eq=True)
class Std:
    """A state transition diagram over finite domains."""

    name: str
    domains: tuple[tuple[str, tuple[str, ...]], ...]
    uses: tuple[tuple[str, EnvSymDecl], ...]
    signature: Signature
    attributes: tuple[tuple[str, Sort], ...]
    states: tuple[str, ...]
    initial: tuple[tuple[str, Expr], ...]
    transitions: tuple[Transition, ...]

    def domain_map(self) -> dict[str, tuple[str, ...]]:
        return dict(self.domains)

    def uses_map(self) -> dict[str, EnvSymDecl]:
        return dict(self.uses)

    def attr_map(self) -> dict[str, Sort]:
        return dict(self.attributes)

    def transition(self, label: str) -> Optional[Transition]:
        for t in self.transitions:
            if t.label == label:
                return t
        return None


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Environment:
    """Interpretation context: named domains plus function/predicate tables.

    `tables` maps a symbol name to rows (argument tuple -> value).  `defaults`
    maps a symbol name to a fill value used, at binding time, for every entry
    the explicit rows leave open (only sensible for total symbols).
    """

    domains: tuple[tuple[str, tuple[str, ...]], ...] = ()
    tables: tuple[tuple[str, tuple[tuple[tuple[Value, ...], Value], ...]], ...] = ()
    defaults: tuple[tuple[str, Value], ...] = ()

    def domain_map(self) -> dict[str, tuple[str, ...]]:
        return dict(self.domains)

    def table_map(self) -> dict[str, dict[tuple[Value, ...], Value]]:
        return {name: dict(rows) for name, rows in self.tables}

    def default_map(self) -> dict[str, Value]:
        return dict(self.defaults)


EMPTY_ENV = Environment()


def make_environment(
    domains: dict[str, tuple[str, ...]] | None = None,
    tables: dict[str, dict[tuple[Value, ...], Value]] | None = None,
    defaults: dict[str, Value] | None = None,
) -> Environment:
    """Convenience constructor from plain dicts."""
    return Environment(
        domains=tuple(sorted((k, tuple(v)) for k, v in (domains or {}).items())),
        tables=tuple(
            sorted(
                (name, tuple(sorted(rows.items(), key=lambda kv: tuple(_value_key(a) for a in kv[0]))))
                for name, rows in (tables or {}).items()
            )
        ),
        defaults=tuple(sorted((defaults or {}).items())),
    )


def bind_environment(std: Std, env: Environment) -> tuple[dict[str, dict[tuple[Value, ...], Value]], list[str]]:
    """Resolve `env` against the symbols `std` declares.

    Returns (tables, problems).  Defaults are expanded, totality of total
    symbols is enforced, arities and sorts are checked.  `problems` is empty
    iff the environment fully fits the declarations.
    """
    problems: list[str] = []
    std_domains = std.domain_map()
    env_domains = env.domain_map()
    for dname, members in std_domains.items():
        if dname in env_domains and tuple(env_domains[dname]) != tuple(members):
            problems.append(
                f"domain {dname} disagrees between the diagram ({', '.join(members)}) "
                f"and the environment ({', '.join(env_domains[dname])})"
            )
    merged_domains = dict(std_domains)
    for dname, members in env_domains.items():
        merged_domains.setdefault(dname, members)

    raw_tables = env.table_map()
    defaults = env.default_map()
    bound: dict[str, dict[tuple[Value, ...], Value]] = {}
    decls = std.uses_map()
    for name, decl in decls.items():
        rows = dict(raw_tables.get(name, {}))
        pools = [enumerate_sort(s, merged_domains) for s in decl.params]
        all_args = [tuple(c) for c in itertools.product(*pools)]
        for args, val in rows.items():
            if len(args) != len(decl.params):
                problems.append(f"{name}: row arity {len(args)} does not match declared arity {len(decl.params)}")
                continue
            for a, s in zip(args, decl.params):
                if not value_in_sort(a, s, merged_domains):
                    problems.append(f"{name}{args!r}: argument {format_value(a)} is not of sort {s}")
            if not value_in_sort(val, decl.result, merged_domains):
                problems.append(f"{name}{args!r}: value {format_value(val)} is not of sort {decl.result}")
        if name in defaults:
            fill = defaults[name]
            if not value_in_sort(fill, decl.result, merged_domains):
                problems.append(f"{name}: default value {format_value(fill)} is not of sort {decl.result}")
            else:
                for args in all_args:
                    rows.setdefault(args, fill)
        if decl.total:
            missing = [a for a in all_args if a not in rows]
            if missing:
                problems.append(
                    f"{name} is declared total but has no entry for "
                    f"({', '.join(format_value(v) for v in missing[0])})"
                    + (f" and {len(missing) - 1} more" if len(missing) > 1 else "")
                )
        bound[name] = rows
    for name in raw_tables:
        if name not in decls:
            # Tables for symbols the diagram does not declare are allowed and
            # ignored; an environment may serve several diagrams.
            pass
    return bound, sorted(problems)


# ---------------------------------------------------------------------------
# Configurations and valuations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Configuration:
    """Control state plus a total attribute valuation (sorted name/value pairs)."""

    control: str
    valuation: tuple[tuple[str, Value], ...]

    def value_map(self) -> dict[str, Value]:
        return dict(self.valuation)

    def __str__(self) -> str:
        if not self.valuation:
            return self.control
        vals = ", ".join(f"{k}={format_value(v)}" for k, v in self.valuation)
        return f"{self.control}[{vals}]"


def make_config(control: str, values: dict[str, Value]) -> Configuration:
    return Configuration(control, tuple(sorted(values.items())))


def enumerate_valuations(
    attributes: tuple[tuple[str, Sort], ...], domains: dict[str, tuple[str, ...]]
) -> list[dict[str, Value]]:
    names = [n for n, _ in attributes]
    pools = [enumerate_sort(s, domains) for _, s in attributes]
    return [dict(zip(names, combo)) for combo in itertools.product(*pools)]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def eval_expr(
    expr: Expr,
    valuation: dict[str, Value],
    tables: dict[str, dict[tuple[Value, ...], Value]],
    primed: dict[str, Value] | None = None,
    params: dict[str, Value] | None = None,
):
    """Strict evaluation.  Returns a Value or Undefined; never raises on a
    well-sorted expression.  Undefined propagates through every operator
    except ``defined``; see the module docstring.
    """
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, EnumLit):
        return expr.value
    if isinstance(expr, AttrRef):
        return valuation[expr.name]
    if isinstance(expr, ParamRef):
        if params is None or expr.name not in params:
            raise ValueError(f"unbound parameter {expr.name!r}")
        return params[expr.name]
    if isinstance(expr, Name):
        raise ValueError(f"unresolved identifier {expr.name!r} (resolve_names was not applied)")
    if isinstance(expr, PrimedRef):
        if primed is None:
            raise ValueError(f"primed reference {expr.name}' outside a postcondition")
        return primed[expr.name]
    if isinstance(expr, Defined):
        v = eval_expr(expr.arg, valuation, tables, primed, params)
        return v is not Undefined
    if isinstance(expr, SymApp):
        args = []
        for a in expr.args:
            v = eval_expr(a, valuation, tables, primed, params)
            if v is Undefined:
                return Undefined
            args.append(v)
        return tables.get(expr.name, {}).get(tuple(args), Undefined)
    if isinstance(expr, Not):
        v = eval_expr(expr.arg, valuation, tables, primed, params)
        return Undefined if v is Undefined else not v
    if isinstance(expr, Neg):
        v = eval_expr(expr.arg, valuation, tables, primed, params)
        return Undefined if v is Undefined else -v
    if isinstance(expr, BinOp):
        l = eval_expr(expr.left, valuation, tables, primed, params)
        if l is Undefined:
            return Undefined
        r = eval_expr(expr.right, valuation, tables, primed, params)
        if r is Undefined:
            return Undefined
        op = expr.op
        if op == "and":
            return l and r
        if op == "or":
            return l or r
        if op == "eq":
            return l == r
        if op == "ne":
            return l != r
        if op == "lt":
            return l < r
        if op == "le":
            return l <= r
        if op == "gt":
            return l > r
        if op == "ge":
            return l >= r
        if op == "add":
            return l + r
        if op == "sub":
            return l - r
        if op == "mul":
            return l * r
        raise ValueError(f"unknown operator {op!r}")
    if isinstance(expr, ListLit):
        items = []
        for it in expr.items:
            v = eval_expr(it, valuation, tables, primed, params)
            if v is Undefined:
                return Undefined
            items.append(v)
        return tuple(items)
    if isinstance(expr, Cons):
        h = eval_expr(expr.head, valuation, tables, primed, params)
        if h is Undefined:
            return Undefined
        t = eval_expr(expr.tail, valuation, tables, primed, params)
        if t is Undefined:
            return Undefined
        return (h,) + t
    if isinstance(expr, Head):
        v = eval_expr(expr.arg, valuation, tables, primed, params)
        if v is Undefined or len(v) == 0:
            return Undefined
        return v[0]
    if isinstance(expr, Tail):
        v = eval_expr(expr.arg, valuation, tables, primed, params)
        if v is Undefined or len(v) == 0:
            return Undefined
        return v[1:]
    if isinstance(expr, Len):
        v = eval_expr(expr.arg, valuation, tables, primed, params)
        return Undefined if v is Undefined else len(v)
    if isinstance(expr, ElseGuard):
        raise ValueError("'else' guard must be desugared before evaluation")
    raise TypeError(f"not an expression: {expr!r}")


def guard_holds(
    guard: Expr,
    valuation: dict[str, Value],
    tables: dict[str, dict[tuple[Value, ...], Value]],
    params: dict[str, Value] | None = None,
) -> bool:
    """A guard is satisfied only when it evaluates to True (Undefined is not)."""
    return eval_expr(guard, valuation, tables, params=params) is True


# ---------------------------------------------------------------------------
# Sort checking
# ---------------------------------------------------------------------------

_BOOL = BoolSort()
_INT = IntSort(0, 0)  # bounds are irrelevant for expression-level typing


@dataclass(frozen=True)
class _Kind:
    """Expression-level type: 'bool' | 'int' | ('enum', domain) | ('list', kind) | 'emptylist'."""

    tag: str
    detail: object = None


def _kind_of_sort(sort: Sort) -> _Kind:
    if isinstance(sort, BoolSort):
        return _Kind("bool")
    if isinstance(sort, IntSort):
        return _Kind("int")
    if isinstance(sort, EnumSort):
        return _Kind("enum", sort.domain)
    if isinstance(sort, ListSort):
        return _Kind("list", _kind_of_sort(sort.elem))
    raise TypeError(sort)


def _kinds_compatible(a: _Kind, b: _Kind) -> bool:
    if a.tag == "emptylist":
        return b.tag in ("list", "emptylist")
    if b.tag == "emptylist":
        return a.tag == "list"
    if a.tag != b.tag:
        return False
    if a.tag in ("bool", "int"):
        return True
    if a.tag == "enum":
        return a.detail == b.detail
    if a.tag == "list":
        return _kinds_compatible(a.detail, b.detail)
    return False


class SortContext:
    """Name resolution context for checking one expression."""

    def __init__(
        self,
        std: Std,
        params: dict[str, Sort] | None = None,
        allow_primed: bool = False,
    ) -> None:
        self.attrs = std.attr_map()
        self.params = params or {}
        self.decls = std.uses_map()
        self.domains = std.domain_map()
        self.allow_primed = allow_primed
        self.member_domain: dict[str, str] = {}
        for dname, members in self.domains.items():
            for m in members:
                self.member_domain[m] = dname


def infer_kind(expr: Expr, ctx: SortContext, errors: list[str], where: str) -> _Kind | None:
    """Infer the expression-level type, appending diagnostics to `errors`."""

    def err(msg: str) -> None:
        errors.append(f"{where}: {msg}")

    if isinstance(expr, Lit):
        if isinstance(expr.value, bool):
            return _Kind("bool")
        return _Kind("int")
    if isinstance(expr, Name):
        err(f"unresolved identifier {expr.name!r}")
        return None
    if isinstance(expr, EnumLit):
        return _Kind("enum", expr.domain)
    if isinstance(expr, AttrRef):
        if expr.name not in ctx.attrs:
            err(f"unknown attribute {expr.name!r}")
            return None
        return _kind_of_sort(ctx.attrs[expr.name])
    if isinstance(expr, ParamRef):
        if expr.name not in ctx.params:
            err(f"unknown parameter {expr.name!r}")
            return None
        return _kind_of_sort(ctx.params[expr.name])
    if isinstance(expr, PrimedRef):
        if not ctx.allow_primed:
            err(f"primed reference {expr.name}' is only allowed in postconditions")
        if expr.name not in ctx.attrs:
            err(f"unknown attribute {expr.name!r}")
            return None
        return _kind_of_sort(ctx.attrs[expr.name])
    if isinstance(expr, SymApp):
        decl = ctx.decls.get(expr.name)
        if decl is None:
            err(f"unknown environment symbol {expr.name!r}")
            for a in expr.args:
                infer_kind(a, ctx, errors, where)
            return None
        if len(expr.args) != len(decl.params):
            err(f"{expr.name} expects {len(decl.params)} argument(s), got {len(expr.args)}")
        for a, s in zip(expr.args, decl.params):
            k = infer_kind(a, ctx, errors, where)
            if k is not None and not _kinds_compatible(k, _kind_of_sort(s)):
                err(f"argument of {expr.name} has the wrong sort (expected {s})")
        return _kind_of_sort(decl.result)
    if isinstance(expr, Defined):
        infer_kind(expr.arg, ctx, errors, where)
        return _Kind("bool")
    if isinstance(expr, Not):
        k = infer_kind(expr.arg, ctx, errors, where)
        if k is not None and k.tag != "bool":
            err("'!' applies to Bool")
        return _Kind("bool")
    if isinstance(expr, Neg):
        k = infer_kind(expr.arg, ctx, errors, where)
        if k is not None and k.tag != "int":
            err("unary '-' applies to Int")
        return _Kind("int")
    if isinstance(expr, BinOp):
        lk = infer_kind(expr.left, ctx, errors, where)
        rk = infer_kind(expr.right, ctx, errors, where)
        if expr.op in ("and", "or"):
            for k, side in ((lk, "left"), (rk, "right")):
                if k is not None and k.tag != "bool":
                    err(f"{side} operand of '{expr.op}' must be Bool")
            return _Kind("bool")
        if expr.op in ("eq", "ne"):
            if lk is not None and rk is not None and not (
                _kinds_compatible(lk, rk) or _kinds_compatible(rk, lk)
            ):
                err("'==' compares values of the same sort")
            return _Kind("bool")
        if expr.op in ("lt", "le", "gt", "ge"):
            for k in (lk, rk):
                if k is not None and k.tag != "int":
                    err(f"'{expr.op}' compares Int values")
            return _Kind("bool")
        if expr.op in ("add", "sub", "mul"):
            for k in (lk, rk):
                if k is not None and k.tag != "int":
                    err("arithmetic applies to Int")
            return _Kind("int")
        err(f"unknown operator {expr.op!r}")
        return None
    if isinstance(expr, ListLit):
        if not expr.items:
            return _Kind("emptylist")
        kinds = [infer_kind(it, ctx, errors, where) for it in expr.items]
        base = next((k for k in kinds if k is not None and k.tag != "emptylist"), None)
        if base is None:
            return _Kind("emptylist")
        for k in kinds:
            if k is not None and not _kinds_compatible(k, base):
                err("list elements must share one sort")
        return _Kind("list", base)
    if isinstance(expr, Cons):
        hk = infer_kind(expr.head, ctx, errors, where)
        tk = infer_kind(expr.tail, ctx, errors, where)
        if tk is not None and tk.tag not in ("list", "emptylist"):
            err("second argument of cons must be a list")
        elif tk is not None and tk.tag == "list" and hk is not None:
            if not _kinds_compatible(hk, tk.detail):
                err("cons head must match the list element sort")
        if hk is None:
            return tk
        return _Kind("list", hk)
    if isinstance(expr, Head):
        k = infer_kind(expr.arg, ctx, errors, where)
        if k is None or k.tag == "emptylist":
            return None
        if k.tag != "list":
            err("head applies to a list")
            return None
        return k.detail
    if isinstance(expr, Tail):
        k = infer_kind(expr.arg, ctx, errors, where)
        if k is not None and k.tag not in ("list", "emptylist"):
            err("tail applies to a list")
        return k
    if isinstance(expr, Len):
        k = infer_kind(expr.arg, ctx, errors, where)
        if k is not None and k.tag not in ("list", "emptylist"):
            err("len applies to a list")
        return _Kind("int")
    if isinstance(expr, ElseGuard):
        err("'else' may only appear as the entire guard of a transition")
        return _Kind("bool")
    raise TypeError(f"not an expression: {expr!r}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _check_sort_wf(sort: Sort, domains: dict[str, tuple[str, ...]], errors: list[str], where: str) -> None:
    if isinstance(sort, IntSort):
        if sort.lo > sort.hi:
            errors.append(f"{where}: empty integer range {sort.lo}..{sort.hi}")
    elif isinstance(sort, EnumSort):
        if sort.domain not in domains:
            errors.append(f"{where}: unknown domain {sort.domain!r}")
    elif isinstance(sort, ListSort):
        if sort.max_len < 0:
            errors.append(f"{where}: negative list bound")
        _check_sort_wf(sort.elem, domains, errors, where)


def validate_std(std: Std, extra_decls: dict[str, EnvSymDecl] | None = None) -> list[str]:
    """Structural and sort validation.  Returns a deterministic list of
    diagnostics; the Std is valid iff the list is empty.
    """
    errors: list[str] = []
    domains = std.domain_map()

    seen_members: dict[str, str] = {}
    for dname, members in std.domains:
        if not members:
            errors.append(f"domain {dname}: empty domain")
        for m in members:
            if m in seen_members:
                errors.append(f"domain {dname}: member {m!r} already belongs to domain {seen_members[m]}")
            seen_members[m] = dname

    if not std.signature.inputs:
        errors.append("signature: input message set is empty")
    if not std.signature.outputs:
        errors.append("signature: output message set is empty")
    for side, ctors in (("input", std.signature.inputs), ("output", std.signature.outputs)):
        names = [c.name for c in ctors if c.name is not None]
        for n in sorted(set(names)):
            if names.count(n) > 1:
                errors.append(f"signature: duplicate {side} constructor {n!r}")
        bare = [c for c in ctors if c.name is None]
        if side == "input" and bare:
            errors.append("signature: input alternatives must be named constructors")
        if len(bare) > 1:
            errors.append(f"signature: at most one bare value alternative is allowed per {side} set")
        for c in bare:
            if len(c.params) != 1:
                errors.append(f"signature: a bare {side} value alternative carries exactly one sort")
        for c in ctors:
            for s in c.params:
                _check_sort_wf(s, domains, errors, f"signature: {side} {c.name or 'value'}")

    attr_names = set()
    for aname, sort in std.attributes:
        if aname in attr_names:
            errors.append(f"attribute {aname}: duplicate attribute name")
        attr_names.add(aname)
        _check_sort_wf(sort, domains, errors, f"attribute {aname}")

    if not std.states:
        errors.append("states: control state set is empty")
    state_set = set()
    for s in std.states:
        if s in state_set:
            errors.append(f"state {s}: duplicate control state")
        state_set.add(s)

    if not std.initial:
        errors.append("initial: no initial control state")
    for s, pred in std.initial:
        if s not in state_set:
            errors.append(f"initial {s}: unknown control state")
        if has_primed(pred):
            errors.append(f"initial {s}: initialization predicate must not use primed references")
        if has_else(pred):
            errors.append(f"initial {s}: initialization predicate must not use 'else'")
        ctx = SortContext(std, params={}, allow_primed=False)
        if extra_decls:
            ctx.decls = {**ctx.decls, **extra_decls}
        k = infer_kind(pred, ctx, errors, f"initial {s}")
        if k is not None and k.tag != "bool":
            errors.append(f"initial {s}: initialization predicate must be Bool")

    labels = set()
    group_else: dict[tuple[str, Optional[str]], int] = {}
    for i, t in enumerate(std.transitions):
        where = f"transition {t.label or '#' + str(i)}"
        if t.label is not None:
            if t.label in labels:
                errors.append(f"{where}: duplicate label")
            labels.add(t.label)
        if t.source not in state_set:
            errors.append(f"{where}: unknown source state {t.source!r}")
        if t.target not in state_set:
            errors.append(f"{where}: unknown target state {t.target!r}")

        params: dict[str, Sort] = {}
        if t.trigger is None:
            if t.params:
                errors.append(f"{where}: the internal trigger binds no parameters")
        else:
            ctor = std.signature.input_ctor(t.trigger)
            if ctor is None:
                errors.append(f"{where}: unknown input constructor {t.trigger!r}")
            else:
                if len(t.params) != len(ctor.params):
                    errors.append(
                        f"{where}: trigger {t.trigger} binds {len(ctor.params)} parameter(s), got {len(t.params)}"
                    )
                for p, s in zip(t.params, ctor.params):
                    params[p] = s
            if len(set(t.params)) != len(t.params):
                errors.append(f"{where}: trigger parameters must be distinct")
            for p in t.params:
                if p in attr_names:
                    errors.append(f"{where}: parameter {p!r} shadows an attribute")

        ctx = SortContext(std, params=params, allow_primed=False)
        if extra_decls:
            ctx.decls = {**ctx.decls, **extra_decls}
        if isinstance(t.guard, ElseGuard):
            key = (t.source, t.trigger)
            group_else[key] = group_else.get(key, 0) + 1
        else:
            if has_else(t.guard):
                errors.append(f"{where}: 'else' may only appear as the entire guard")
            if has_primed(t.guard):
                errors.append(f"{where}: guard must not use primed references")
            k = infer_kind(t.guard, ctx, errors, f"{where} guard")
            if k is not None and k.tag != "bool":
                errors.append(f"{where}: guard must be Bool")

        for j, (oname, oargs) in enumerate(t.outputs):
            octor = std.signature.output_ctor(oname)
            owhere = f"{where} output {j}"
            if octor is None:
                label = oname if oname is not None else "a bare value"
                errors.append(f"{owhere}: no output constructor for {label}")
                continue
            if len(oargs) != len(octor.params):
                errors.append(f"{owhere}: {oname or 'value'} expects {len(octor.params)} argument(s)")
            for a, s in zip(oargs, octor.params):
                if has_primed(a):
                    errors.append(f"{owhere}: output expressions must not use primed references")
                if has_else(a):
                    errors.append(f"{owhere}: 'else' may only appear as the entire guard")
                k = infer_kind(a, ctx, errors, owhere)
                if k is not None and not _kinds_compatible(k, _kind_of_sort(s)):
                    errors.append(f"{owhere}: argument has the wrong sort (expected {s})")

        pctx = SortContext(std, params=params, allow_primed=True)
        if extra_decls:
            pctx.decls = {**pctx.decls, **extra_decls}
        if has_else(t.post):
            errors.append(f"{where}: 'else' may only appear as the entire guard")
        else:
            k = infer_kind(t.post, pctx, errors, f"{where} post")
            if k is not None and k.tag != "bool":
                errors.append(f"{where}: postcondition must be Bool")

    for (src, trig), n in sorted(group_else.items(), key=lambda kv: (kv[0][0], kv[0][1] or "")):
        if n > 1:
            errors.append(
                f"group ({src}, {trig or 'eps'}): {n} 'else' guards in one group (at most one is allowed)"
            )

    return errors


# ---------------------------------------------------------------------------
# Desugaring: else guards and priorities
# ---------------------------------------------------------------------------


def desugar(std: Std) -> Std:
    """Eliminate `else` guards and `@N` priorities.

    Within each (source, trigger) group, an `else` guard becomes the
    conjunction of the negations of every other written guard in the group,
    and each prioritized transition's guard is conjoined with the negations
    of all strictly higher-priority guards (smaller `@N` wins) in its group.
    Idempotent: a diagram without the two notations is returned unchanged.
    """
    needs_work = any(
        t.priority is not None or isinstance(t.guard, ElseGuard) for t in std.transitions
    )
    if not needs_work:
        return std

    groups: dict[tuple[str, Optional[str]], list[int]] = {}
    for i, t in enumerate(std.transitions):
        groups.setdefault((t.source, t.trigger), []).append(i)

    new_transitions = list(std.transitions)
    for key, idxs in groups.items():
        else_idxs = [i for i in idxs if isinstance(std.transitions[i].guard, ElseGuard)]
        if len(else_idxs) > 1:
            raise ValueError(
                f"group ({key[0]}, {key[1] or 'eps'}) has {len(else_idxs)} 'else' guards; at most one is allowed"
            )
        originals = {i: std.transitions[i].guard for i in idxs}
        for i in idxs:
            t = std.transitions[i]
            guard = originals[i]
            if isinstance(guard, ElseGuard):
                others = [originals[j] for j in idxs if j != i and not isinstance(originals[j], ElseGuard)]
                guard = conj(*[Not(g) for g in others]) if others else TRUE
            if t.priority is not None:
                negs = [
                    Not(originals[j])
                    for j in idxs
                    if j != i
                    and std.transitions[j].priority is not None
                    and std.transitions[j].priority < t.priority
                    and not isinstance(originals[j], ElseGuard)
                ]
                guard = conj(guard, *negs)
            new_transitions[i] = replace(t, guard=guard, priority=None)

    return replace(std, transitions=tuple(new_transitions))


def is_desugared(std: Std) -> bool:
    return all(t.priority is None and not isinstance(t.guard, ElseGuard) for t in std.transitions)


# ---------------------------------------------------------------------------
# Enabled transitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnabledTransition:
    """One enabled transition at a configuration under a trigger: the bound
    parameters plus the set of (output sequence, successor) reactions the
    relational postcondition admits."""

    transition: Transition
    binding: tuple[tuple[str, Value], ...]
    reactions: frozenset[tuple[tuple[Msg, ...], Configuration]]


def _outputs_of(
    t: Transition,
    valuation: dict[str, Value],
    tables: dict[str, dict[tuple[Value, ...], Value]],
    params: dict[str, Value],
):
    """Evaluate the output expressions; None if any piece is Undefined."""
    msgs: list[Msg] = []
    for oname, oargs in t.outputs:
        vals = []
        for a in oargs:
            v = eval_expr(a, valuation, tables, params=params)
            if v is Undefined:
                return None
            vals.append(v)
        msgs.append(Msg(oname, tuple(vals)))
    return tuple(msgs)


def enabled_transitions(
    std: Std,
    config: Configuration,
    trigger: Msg | None,
    env: Environment,
    tables: dict[str, dict[tuple[Value, ...], Value]] | None = None,
) -> list[EnabledTransition]:
    """All transitions enabled at `config` for `trigger` (a ground input
    message, or None for the internal trigger), with their reactions.

    A transition contributes one reaction per primed valuation satisfying its
    postcondition; an unsatisfiable postcondition, or an Undefined output,
    contributes nothing.  The diagram must be desugared.
    """
    if not is_desugared(std):
        std = desugar(std)
    if tables is None:
        tables, problems = bind_environment(std, env)
        if problems:
            raise ValueError("environment does not fit the diagram: " + "; ".join(problems))
    domains = std.domain_map()
    valuation = config.value_map()
    out: list[EnabledTransition] = []
    for t in std.transitions:
        if t.source != config.control:
            continue
        if trigger is None:
            if t.trigger is not None:
                continue
            params: dict[str, Value] = {}
        else:
            if t.trigger != trigger.ctor:
                continue
            if len(t.params) != len(trigger.args):
                continue
            params = dict(zip(t.params, trigger.args))
        if eval_expr(t.guard, valuation, tables, params=params) is not True:
            continue
        outputs = _outputs_of(t, valuation, tables, params)
        if outputs is None:
            continue
        reactions = set()
        for primed in enumerate_valuations(std.attributes, domains):
            if eval_expr(t.post, valuation, tables, primed=primed, params=params) is True:
                reactions.add((outputs, make_config(t.target, primed)))
        if reactions:
            out.append(
                EnabledTransition(
                    transition=t,
                    binding=tuple(sorted(params.items())),
                    reactions=frozenset(reactions),
                )
            )
    return out


# ---------------------------------------------------------------------------
# Initial configurations and bounded reachability
# ---------------------------------------------------------------------------


def initial_configurations(
    std: Std,
    env: Environment,
    tables: dict[str, dict[tuple[Value, ...], Value]] | None = None,
) -> list[Configuration]:
    if tables is None:
        tables, problems = bind_environment(std, env)
        if problems:
            raise ValueError("environment does not fit the diagram: " + "; ".join(problems))
    domains = std.domain_map()
    configs: list[Configuration] = []
    for state, pred in std.initial:
        for valu in enumerate_valuations(std.attributes, domains):
            if eval_expr(pred, valu, tables) is True:
                configs.append(make_config(state, valu))
    return sorted(set(configs), key=lambda c: (c.control, tuple(_value_key(v) for _, v in c.valuation)))


def _configs_touched_processing(
    std: Std,
    config: Configuration,
    message: Msg,
    env: Environment,
    tables: dict[str, dict[tuple[Value, ...], Value]],
    eps_budget: int,
) -> set[Configuration]:
    """Every configuration the machine can occupy while processing `message`
    from `config`: intermediate configurations along internal-transition chains
    (while the message is still pending) and the configurations reached by
    consuming it.  Internal chains are cut at `eps_budget` hops.
    """
    touched: set[Configuration] = set()
    chain = {config}
    frontier = [config]
    hops = 0
    while True:
        for cfg in frontier:
            for en in enabled_transitions(std, cfg, message, env, tables):
                for _, succ in en.reactions:
                    touched.add(succ)
        if hops == eps_budget:
            break
        nxt: list[Configuration] = []
        for cfg in frontier:
            for en in enabled_transitions(std, cfg, None, env, tables):
                for _, succ in en.reactions:
                    if succ not in chain:
                        chain.add(succ)
                        nxt.append(succ)
                        touched.add(succ)
        if not nxt:
            break
        frontier = nxt
        hops += 1
    return touched


def reachable_configurations(
    std: Std,
    env: Environment,
    depth: int,
    eps_budget: int = 4,
) -> set[Configuration]:
    """Configurations reachable by processing at most `depth` input messages.

    Internal transitions fire only while a message is pending, so depth 0
    yields exactly the initial configurations; each further message admits up
    to `eps_budget` internal hops before it is consumed.
    """
    std = desugar(std)
    tables, problems = bind_environment(std, env)
    if problems:
        raise ValueError("environment does not fit the diagram: " + "; ".join(problems))
    domains = std.domain_map()
    inputs = message_instances(std.signature.inputs, domains)

    reached = set(initial_configurations(std, env, tables))
    layer = set(reached)
    explored: dict[Configuration, set[Configuration]] = {}
    for _ in range(depth):
        nxt: set[Configuration] = set()
        for c in layer:
            if c not in explored:
                touched: set[Configuration] = set()
                for m in inputs:
                    touched |= _configs_touched_processing(std, c, m, env, tables, eps_budget)
                explored[c] = touched
            nxt |= explored[c]
        reached |= nxt
        if nxt <= explored.keys():
            break
        layer = nxt
    return reached


def reachable_control_states(
    std: Std,
    env: Environment,
    depth: int,
    eps_budget: int = 4,
) -> set[str]:
    """Control states reachable within `depth` processed input messages."""
    return {c.control for c in reachable_configurations(std, env, depth, eps_budget)}
