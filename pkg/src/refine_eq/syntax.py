"""Concrete syntax for signature files, equality declarations and queries.

Surface forms:

    type V[n1]...[nk | phi] = A          definitions (constraint optional)
    eqtype {v1, v2 | C} V1[e] == V2[e]   equality declarations
    {v1, v2 | C} A == B                  queries (context optional)

    +{l: A, ...}   internal choice       &{l: A, ...}   external choice
    A * B          send channel          A -o B         receive channel
    1              close                 V[e]...[e]     instantiation
    ?{phi}. A      assert                !{phi}. A      assume
    ?n. A          send a number         !n. A          receive a number

Propositions use = > < >= <= /\\ \\/ ~ true false, exists n. / forall n.
quantifiers and constant divisibility d | e; < <= >= desugar into > and =.
`%` starts a line comment unless immediately followed by a digit, which is
how generated internal names (%0, %1, ...) print and re-parse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import (
    Add, And, ArithExpr, ArithProp, Assert, Assume, Bot, Const, Dvd, Eq,
    EqDecl, Gt, Lolli, Mul, Not, One, Or, Plus, PropExists, PropForall,
    SessionType, Signature, Sub, TExists, TForall, TOP, TVar, Tensor, Top,
    TypeDef, Var, With, free_arith_vars, fresh_name,
)

KEYWORDS = {"type", "eqtype", "true", "false", "exists", "forall"}

_PUNCT2 = ("==", ">=", "<=", "/\\", "\\/")
_PUNCT1 = "{}[](),:.|=><+-*?!&~"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{line}:{col}: {message}")
        self.diagnostic = Diagnostic(message, line, col)


@dataclass(frozen=True)
class Token:
    kind: str  # 'name' | 'number' | 'punct' | 'kw' | 'eof'
    value: str
    line: int
    col: int


def _is_name_char(c: str) -> bool:
    return c.isalnum() or c in "_'"


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if c in " \t\r":
            i, col = i + 1, col + 1
            continue
        if c == "%":
            if i + 1 < n and text[i + 1].isdigit():
                j = i + 1
                while j < n and text[j].isdigit():
                    j += 1
                toks.append(Token("name", text[i:j], line, col))
                col += j - i
                i = j
                continue
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("number", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and _is_name_char(text[j]):
                j += 1
            word = text[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "name", word, line, col))
            col += j - i
            i = j
            continue
        if c == "-" and i + 1 < n and text[i + 1] == "o" and \
                (i + 2 >= n or not _is_name_char(text[i + 2])):
            toks.append(Token("punct", "-o", line, col))
            i, col = i + 2, col + 2
            continue
        two = text[i:i + 2]
        if two in _PUNCT2:
            toks.append(Token("punct", two, line, col))
            i, col = i + 2, col + 2
            continue
        if c in _PUNCT1:
            toks.append(Token("punct", c, line, col))
            i, col = i + 1, col + 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str) -> None:
        self.toks = tokenize(text)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def at_punct(self, *values: str) -> bool:
        return self.tok.kind == "punct" and self.tok.value in values

    def at_kw(self, *values: str) -> bool:
        return self.tok.kind == "kw" and self.tok.value in values

    def expect_punct(self, value: str) -> Token:
        if not self.at_punct(value):
            self.fail(f"expected {value!r}, found {self.describe()}")
        return self.advance()

    def expect_name(self, what: str = "name") -> Token:
        if self.tok.kind != "name":
            self.fail(f"expected {what}, found {self.describe()}")
        return self.advance()

    def describe(self) -> str:
        t = self.tok
        return "end of input" if t.kind == "eof" else repr(t.value)

    def fail(self, message: str) -> None:
        raise ParseError(message, self.tok.line, self.tok.col)

    # -- arithmetic expressions ---------------------------------------------

    def parse_expr(self) -> ArithExpr:
        e = self.parse_term()
        while self.at_punct("+", "-"):
            op = self.advance().value
            rhs = self.parse_term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def parse_term(self) -> ArithExpr:
        e = self.parse_factor()
        while self.at_punct("*"):
            self.advance()
            e = Mul(e, self.parse_factor())
        return e

    def parse_factor(self) -> ArithExpr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            return Const(int(t.value))
        if t.kind == "name":
            self.advance()
            return Var(t.value)
        if self.at_punct("("):
            self.advance()
            e = self.parse_expr()
            self.expect_punct(")")
            return e
        self.fail(f"expected an arithmetic expression, found {self.describe()}")

    # -- propositions --------------------------------------------------------

    def parse_prop(self) -> ArithProp:
        if self.at_kw("exists", "forall"):
            kw = self.advance().value
            v = self.expect_name("a quantified variable").value
            self.expect_punct(".")
            body = self.parse_prop()
            return PropExists(v, body) if kw == "exists" else PropForall(v, body)
        return self.parse_or()

    def parse_or(self) -> ArithProp:
        p = self.parse_and()
        while self.at_punct("\\/"):
            self.advance()
            if self.at_kw("exists", "forall"):
                return Or(p, self.parse_prop())
            p = Or(p, self.parse_and())
        return p

    def parse_and(self) -> ArithProp:
        p = self.parse_prop_atom()
        while self.at_punct("/\\"):
            self.advance()
            if self.at_kw("exists", "forall"):
                return And(p, self.parse_prop())
            p = And(p, self.parse_prop_atom())
        return p

    def parse_prop_atom(self) -> ArithProp:
        if self.at_punct("~"):
            self.advance()
            return Not(self.parse_prop_atom())
        if self.at_kw("true"):
            self.advance()
            return Top()
        if self.at_kw("false"):
            self.advance()
            return Bot()
        if self.at_kw("exists", "forall"):
            return self.parse_prop()
        if self.at_punct("("):
            # Either a parenthesized proposition or a parenthesized
            # left-hand expression of a comparison; try the comparison
            # reading first and fall back.
            mark = self.pos
            try:
                return self.parse_comparison()
            except ParseError:
                self.pos = mark
            self.advance()
            p = self.parse_prop()
            self.expect_punct(")")
            return p
        return self.parse_comparison()

    def parse_comparison(self) -> ArithProp:
        lhs = self.parse_expr()
        if self.at_punct("="):
            self.advance()
            return Eq(lhs, self.parse_expr())
        if self.at_punct(">"):
            self.advance()
            return Gt(lhs, self.parse_expr())
        if self.at_punct("<"):
            self.advance()
            return Gt(self.parse_expr(), lhs)
        if self.at_punct(">="):
            self.advance()
            return Gt(Add(lhs, Const(1)), self.parse_expr())
        if self.at_punct("<="):
            self.advance()
            return Gt(Add(self.parse_expr(), Const(1)), lhs)
        if self.at_punct("|"):
            if not isinstance(lhs, Const):
                self.fail("divisibility divisor must be a constant")
            if lhs.value < 1:
                self.fail("divisibility divisor must be positive")
            self.advance()
            return Dvd(lhs.value, self.parse_expr())
        self.fail(f"expected a comparison operator, found {self.describe()}")

    # -- session types ---------------------------------------------------------

    def parse_type(self) -> SessionType:
        t = self.parse_prefix()
        if t is not None:
            return t
        lhs = self.parse_tensor()
        if self.at_punct("-o"):
            self.advance()
            return Lolli(lhs, self.parse_type())
        return lhs

    def parse_prefix(self) -> Optional[SessionType]:
        if not self.at_punct("?", "!"):
            return None
        op = self.advance().value
        if self.at_punct("{"):
            self.advance()
            prop = self.parse_prop()
            self.expect_punct("}")
            self.expect_punct(".")
            cont = self.parse_type()
            return Assert(prop, cont) if op == "?" else Assume(prop, cont)
        v = self.expect_name("a quantified index variable").value
        self.expect_punct(".")
        body = self.parse_type()
        return TExists(v, body) if op == "?" else TForall(v, body)

    def parse_tensor(self) -> SessionType:
        lhs = self.parse_type_atom()
        if self.at_punct("*"):
            self.advance()
            rhs = self.parse_prefix()
            if rhs is None:
                rhs = self.parse_tensor()
            return Tensor(lhs, rhs)
        return lhs

    def parse_type_atom(self) -> SessionType:
        t = self.tok
        if t.kind == "number" and t.value == "1":
            self.advance()
            return One()
        if self.at_punct("+", "&"):
            op = self.advance().value
            branches = self.parse_branches()
            return Plus(branches) if op == "+" else With(branches)
        if self.at_punct("("):
            self.advance()
            inner = self.parse_type()
            self.expect_punct(")")
            return inner
        if t.kind == "name":
            self.advance()
            args = []
            while self.at_punct("["):
                self.advance()
                args.append(self.parse_expr())
                self.expect_punct("]")
            return TVar(t.value, tuple(args))
        self.fail(f"expected a type, found {self.describe()}")

    def parse_branches(self) -> tuple[tuple[str, SessionType], ...]:
        self.expect_punct("{")
        out: list[tuple[str, SessionType]] = []
        seen: set[str] = set()
        while True:
            label_tok = self.tok
            label = self.expect_name("a branch label").value
            if label in seen:
                raise ParseError(f"duplicate label {label!r} in choice",
                                 label_tok.line, label_tok.col)
            seen.add(label)
            self.expect_punct(":")
            out.append((label, self.parse_type()))
            if self.at_punct(","):
                self.advance()
                continue
            break
        self.expect_punct("}")
        if not out:
            self.fail("choice must have at least one branch")
        return tuple(out)

    # -- declarations -----------------------------------------------------------

    def parse_context(self) -> tuple[tuple[str, ...], ArithProp]:
        """{v1, v2 | C} with both parts optional inside the braces."""
        self.expect_punct("{")
        names: list[str] = []
        if self.tok.kind == "name":
            names.append(self.advance().value)
            while self.at_punct(","):
                self.advance()
                names.append(self.expect_name("a context variable").value)
        constraint: ArithProp = TOP
        if self.at_punct("|"):
            self.advance()
            constraint = self.parse_prop()
        self.expect_punct("}")
        if len(set(names)) != len(names):
            self.fail("context variables must be distinct")
        return tuple(names), constraint

    def parse_params(self) -> tuple[tuple[str, ...], ArithProp]:
        params: list[str] = []
        constraint: ArithProp = TOP
        while self.at_punct("["):
            open_tok = self.tok
            self.advance()
            if not self.at_punct("|"):
                params.append(self.expect_name("a parameter name").value)
            if self.at_punct("|"):
                self.advance()
                constraint = self.parse_prop()
                self.expect_punct("]")
                if self.at_punct("["):
                    raise ParseError("parameter constraint must be in the last bracket",
                                     open_tok.line, open_tok.col)
                break
            self.expect_punct("]")
        if len(set(params)) != len(params):
            self.fail("parameter names must be distinct")
        return tuple(params), constraint

    def parse_instvar(self) -> TVar:
        name = self.expect_name("a type name").value
        args = []
        while self.at_punct("["):
            self.advance()
            args.append(self.parse_expr())
            self.expect_punct("]")
        return TVar(name, tuple(args))


# ---------------------------------------------------------------------------
# bound-variable hygiene
# ---------------------------------------------------------------------------

def rename_bound(x, scope: frozenset[str]):
    """Rename quantified variables shadowing an enclosing binding."""
    match x:
        case TExists(v, b):
            v2, b2 = _freshen(v, b, scope)
            return TExists(v2, b2)
        case TForall(v, b):
            v2, b2 = _freshen(v, b, scope)
            return TForall(v2, b2)
        case PropExists(v, b):
            v2, b2 = _freshen(v, b, scope)
            return PropExists(v2, b2)
        case PropForall(v, b):
            v2, b2 = _freshen(v, b, scope)
            return PropForall(v2, b2)
        case Plus(branches):
            return Plus(tuple((l, rename_bound(t, scope)) for l, t in branches))
        case With(branches):
            return With(tuple((l, rename_bound(t, scope)) for l, t in branches))
        case Tensor(l, r):
            return Tensor(rename_bound(l, scope), rename_bound(r, scope))
        case Lolli(l, r):
            return Lolli(rename_bound(l, scope), rename_bound(r, scope))
        case Assert(p, c):
            return Assert(rename_bound(p, scope), rename_bound(c, scope))
        case Assume(p, c):
            return Assume(rename_bound(p, scope), rename_bound(c, scope))
        case And(l, r):
            return And(rename_bound(l, scope), rename_bound(r, scope))
        case Or(l, r):
            return Or(rename_bound(l, scope), rename_bound(r, scope))
        case Not(b):
            return Not(rename_bound(b, scope))
        case _:
            return x


def _freshen(v: str, body, scope: frozenset[str]):
    from .core import subst_arith
    if v in scope:
        v2 = fresh_name(v, scope | free_arith_vars(body))
        body = subst_arith(body, {v: Var(v2)})
        v = v2
    return v, rename_bound(body, scope | {v})


# ---------------------------------------------------------------------------
# top level entry points
# ---------------------------------------------------------------------------

@dataclass
class ParseResult:
    signature: Optional[Signature]
    diagnostics: list[Diagnostic] = field(default_factory=list)
    spans: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.signature is not None and not self.diagnostics


def parse_signature(text: str) -> ParseResult:
    """Parse a signature file; diagnostics are collected, not thrown."""
    p = _Parser(text)
    defs: list[TypeDef] = []
    eqdecls: list[EqDecl] = []
    diagnostics: list[Diagnostic] = []
    spans: dict[str, tuple[int, int]] = {}

    while p.tok.kind != "eof":
        start = p.tok
        try:
            if p.at_kw("type"):
                p.advance()
                name_tok = p.expect_name("a type name")
                params, constraint = p.parse_params()
                p.expect_punct("=")
                body = p.parse_type()
                scope = frozenset(params)
                constraint = rename_bound(constraint, scope)
                body = rename_bound(body, scope)
                defs.append(TypeDef(name_tok.value, params, constraint, body))
                spans[name_tok.value] = (name_tok.line, name_tok.col)
            elif p.at_kw("eqtype"):
                p.advance()
                if p.at_punct("{"):
                    vars_, constraint = p.parse_context()
                else:
                    vars_, constraint = (), TOP
                lhs = p.parse_instvar()
                p.expect_punct("==")
                rhs = p.parse_instvar()
                scope = frozenset(vars_)
                eqdecls.append(EqDecl(vars_, rename_bound(constraint, scope),
                                      rename_bound(lhs, scope), rename_bound(rhs, scope)))
            else:
                p.fail(f"expected 'type' or 'eqtype', found {p.describe()}")
        except ParseError as err:
            diagnostics.append(err.diagnostic)
            if p.pos < len(p.toks) and p.toks[p.pos] is start:
                p.advance()  # guarantee progress
            while p.tok.kind != "eof" and not p.at_kw("type", "eqtype"):
                p.advance()

    diagnostics.extend(_check_signature_names(defs, eqdecls, spans))
    if diagnostics:
        return ParseResult(None, diagnostics, spans)
    return ParseResult(Signature(tuple(defs), tuple(eqdecls)), [], spans)


def _check_signature_names(defs, eqdecls, spans) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    seen: dict[str, int] = {}
    for d in defs:
        line, col = spans.get(d.name, (0, 0))
        if d.name in seen:
            out.append(Diagnostic(f"duplicate definition of {d.name!r}", line, col))
        seen[d.name] = 1
        if isinstance(d.body, TVar):
            out.append(Diagnostic(
                f"definition of {d.name!r} is not contractive: "
                "the body is itself a type variable", line, col))
        bad = (free_arith_vars(d.body) | free_arith_vars(d.constraint)) - set(d.params)
        for v in sorted(bad):
            out.append(Diagnostic(
                f"variable {v!r} is not a parameter of {d.name!r}", line, col))
    names = set(seen)
    for d in defs:
        line, col = spans.get(d.name, (0, 0))
        for ref in _type_refs(d.body):
            if ref not in names:
                out.append(Diagnostic(
                    f"unbound type name {ref!r} in definition of {d.name!r}", line, col))
    for i, decl in enumerate(eqdecls):
        for side in (decl.left, decl.right):
            if side.name not in names:
                out.append(Diagnostic(
                    f"unbound type name {side.name!r} in eqtype declaration {i + 1}", 0, 0))
        bad = (free_arith_vars(decl.left) | free_arith_vars(decl.right)
               | free_arith_vars(decl.constraint)) - set(decl.vars)
        for v in sorted(bad):
            out.append(Diagnostic(
                f"variable {v!r} is not declared in eqtype declaration {i + 1}", 0, 0))
    return out


def _type_refs(t: SessionType) -> set[str]:
    match t:
        case TVar(name, _):
            return {name}
        case Plus(branches) | With(branches):
            out: set[str] = set()
            for _, b in branches:
                out |= _type_refs(b)
            return out
        case Tensor(l, r) | Lolli(l, r):
            return _type_refs(l) | _type_refs(r)
        case Assert(_, c) | Assume(_, c):
            return _type_refs(c)
        case TExists(_, b) | TForall(_, b):
            return _type_refs(b)
        case _:
            return set()


def parse_query(text: str, sig: Optional[Signature] = None
                ) -> tuple[tuple[str, ...], ArithProp, SessionType, SessionType]:
    """Parse '{vars | C} A == B' (context optional); raises ParseError."""
    p = _Parser(text)
    vars_: tuple[str, ...] = ()
    constraint: ArithProp = TOP
    if p.at_punct("{"):
        vars_, constraint = p.parse_context()
    lhs = p.parse_type()
    p.expect_punct("==")
    rhs = p.parse_type()
    if p.tok.kind != "eof":
        p.fail(f"unexpected trailing input: {p.describe()}")
    scope = frozenset(vars_)
    constraint = rename_bound(constraint, scope)
    lhs = rename_bound(lhs, scope)
    rhs = rename_bound(rhs, scope)
    free = (free_arith_vars(lhs) | free_arith_vars(rhs)
            | free_arith_vars(constraint)) - set(vars_)
    if free:
        raise ParseError(
            f"free variable(s) not declared in the query context: "
            f"{', '.join(sorted(free))}", 1, 1)
    if sig is not None:
        for ref in sorted((_type_refs(lhs) | _type_refs(rhs)) - set(sig.def_map)):
            raise ParseError(f"unbound type name {ref!r} in query", 1, 1)
    return vars_, constraint, lhs, rhs


def parse_formula(text: str) -> ArithProp:
    """Parse a standalone arithmetic proposition; raises ParseError."""
    p = _Parser(text)
    prop = p.parse_prop()
    if p.tok.kind != "eof":
        p.fail(f"unexpected trailing input: {p.describe()}")
    return rename_bound(prop, frozenset())


# ---------------------------------------------------------------------------
# printer
# ---------------------------------------------------------------------------

def print_expr(e: ArithExpr, prec: int = 0) -> str:
    match e:
        case Const(v):
            return str(v)
        case Var(n):
            return n
        case Add(l, r):
            s = f"{print_expr(l, 1)}+{print_expr(r, 2)}"
            return f"({s})" if prec > 1 else s
        case Sub(l, r):
            s = f"{print_expr(l, 1)}-{print_expr(r, 2)}"
            return f"({s})" if prec > 1 else s
        case Mul(l, r):
            s = f"{print_expr(l, 2)}*{print_expr(r, 3)}"
            return f"({s})" if prec > 2 else s
        case _:
            raise TypeError(f"not an arithmetic expression: {e!r}")


def print_prop(p: ArithProp, prec: int = 0) -> str:
    match p:
        case Top():
            return "true"
        case Bot():
            return "false"
        case Eq(l, r):
            return f"{print_expr(l)} = {print_expr(r)}"
        case Gt(l, r):
            return f"{print_expr(l)} > {print_expr(r)}"
        case Dvd(d, e):
            return f"{d} | {print_expr(e)}"
        case And(l, r):
            s = f"{print_prop(l, 2)} /\\ {print_prop(r, 3)}"
            return f"({s})" if prec > 2 else s
        case Or(l, r):
            s = f"{print_prop(l, 1)} \\/ {print_prop(r, 2)}"
            return f"({s})" if prec > 1 else s
        case Not(b):
            return f"~{print_prop(b, 4)}"
        case PropExists(v, b):
            s = f"exists {v}. {print_prop(b, 0)}"
            return f"({s})" if prec > 0 else s
        case PropForall(v, b):
            s = f"forall {v}. {print_prop(b, 0)}"
            return f"({s})" if prec > 0 else s
        case _:
            raise TypeError(f"not a proposition: {p!r}")


# type printing levels: 0 full type, 1 tensor operand, 2 atom
def print_type(t: SessionType, prec: int = 0) -> str:
    match t:
        case One():
            return "1"
        case TVar(name, args):
            return name + "".join(f"[{print_expr(e)}]" for e in args)
        case Plus(branches):
            inner = ", ".join(f"{l}: {print_type(b)}" for l, b in branches)
            return "+{" + inner + "}"
        case With(branches):
            inner = ", ".join(f"{l}: {print_type(b)}" for l, b in branches)
            return "&{" + inner + "}"
        case Tensor(l, r):
            s = f"{print_type(l, 2)} * {print_type(r, 1)}"
            return f"({s})" if prec > 1 else s
        case Lolli(l, r):
            s = f"{print_type(l, 1)} -o {print_type(r, 0)}"
            return f"({s})" if prec > 0 else s
        case Assert(p, c):
            s = f"?{{{print_prop(p)}}}. {print_type(c, 0)}"
            return f"({s})" if prec > 0 else s
        case Assume(p, c):
            s = f"!{{{print_prop(p)}}}. {print_type(c, 0)}"
            return f"({s})" if prec > 0 else s
        case TExists(v, b):
            s = f"?{v}. {print_type(b, 0)}"
            return f"({s})" if prec > 0 else s
        case TForall(v, b):
            s = f"!{v}. {print_type(b, 0)}"
            return f"({s})" if prec > 0 else s
        case _:
            raise TypeError(f"not a session type: {t!r}")


def print_def(d: TypeDef) -> str:
    brackets = ""
    if d.params:
        for param in d.params[:-1]:
            brackets += f"[{param}]"
        if isinstance(d.constraint, Top):
            brackets += f"[{d.params[-1]}]"
        else:
            brackets += f"[{d.params[-1]} | {print_prop(d.constraint)}]"
    elif not isinstance(d.constraint, Top):
        brackets = f"[| {print_prop(d.constraint)}]"
    return f"type {d.name}{brackets} = {print_type(d.body)}"


def print_context(vars_: tuple[str, ...], constraint: ArithProp) -> str:
    if not vars_ and isinstance(constraint, Top):
        return ""
    inner = ", ".join(vars_)
    if not isinstance(constraint, Top):
        inner += f" | {print_prop(constraint)}" if inner else f"| {print_prop(constraint)}"
    return "{" + inner + "} "


def print_eqdecl(d: EqDecl) -> str:
    ctx = print_context(d.vars, d.constraint)
    return f"eqtype {ctx}{print_type(d.left)} == {print_type(d.right)}"


def print_signature(sig: Signature) -> str:
    lines = [print_def(d) for d in sig.defs]
    lines.extend(print_eqdecl(d) for d in sig.eqdecls)
    return "\n".join(lines) + ("\n" if lines else "")
