"""Abstract syntax for refined session types and their index arithmetic.

Everything here is an immutable tree.  Structural equality on session types
is positional (branch order matters for ``==``); the equality engine and the
bounded-bisimulation checker compare choices by label *set*, as the semantics
demands.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Optional, Union


# ---------------------------------------------------------------------------
# arithmetic expressions
# ---------------------------------------------------------------------------

class ArithExpr:
    """Base class for index expressions over natural-number variables."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(ArithExpr):
    value: int  # >= 0 in surface syntax; internal math may go negative


@dataclass(frozen=True)
class Var(ArithExpr):
    name: str


@dataclass(frozen=True)
class Add(ArithExpr):
    left: ArithExpr
    right: ArithExpr


@dataclass(frozen=True)
class Sub(ArithExpr):
    left: ArithExpr
    right: ArithExpr


@dataclass(frozen=True)
class Mul(ArithExpr):
    """Product of two expressions.

    The surface language only promises decidability for products with a
    constant side; general products are admitted syntactically and handed to
    the sound-but-incomplete multinomial normalizer.
    """

    left: ArithExpr
    right: ArithExpr


# ---------------------------------------------------------------------------
# arithmetic propositions
# ---------------------------------------------------------------------------

class ArithProp:
    """Base class for index propositions."""

    __slots__ = ()


@dataclass(frozen=True)
class Top(ArithProp):
    pass


@dataclass(frozen=True)
class Bot(ArithProp):
    pass


@dataclass(frozen=True)
class Eq(ArithProp):
    left: ArithExpr
    right: ArithExpr


@dataclass(frozen=True)
class Gt(ArithProp):
    left: ArithExpr
    right: ArithExpr


@dataclass(frozen=True)
class And(ArithProp):
    left: ArithProp
    right: ArithProp


@dataclass(frozen=True)
class Or(ArithProp):
    left: ArithProp
    right: ArithProp


@dataclass(frozen=True)
class Not(ArithProp):
    body: ArithProp


@dataclass(frozen=True)
class PropExists(ArithProp):
    var: str
    body: ArithProp


@dataclass(frozen=True)
class PropForall(ArithProp):
    var: str
    body: ArithProp


@dataclass(frozen=True)
class Dvd(ArithProp):
    """Divisibility atom d | e with a constant positive divisor."""

    divisor: int
    expr: ArithExpr

    def __post_init__(self) -> None:
        if self.divisor < 1:
            raise ValueError("divisor must be a positive constant")


TOP = Top()
BOT = Bot()


def conj(props: list[ArithProp]) -> ArithProp:
    """Left-associated conjunction; empty list is truth."""
    props = [p for p in props if not isinstance(p, Top)]
    if not props:
        return TOP
    out = props[0]
    for p in props[1:]:
        out = And(out, p)
    return out


def conjuncts(p: ArithProp) -> list[ArithProp]:
    """Flatten a conjunction tree into its leaves."""
    if isinstance(p, And):
        return conjuncts(p.left) + conjuncts(p.right)
    if isinstance(p, Top):
        return []
    return [p]


# ---------------------------------------------------------------------------
# session types
# ---------------------------------------------------------------------------

class SessionType:
    """Base class for session types."""

    __slots__ = ()


Branches = tuple[tuple[str, SessionType], ...]


@dataclass(frozen=True)
class Plus(SessionType):
    """Internal choice: provider sends one of the labels."""

    branches: Branches

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(l for l, _ in self.branches)

    def branch(self, label: str) -> SessionType:
        for l, t in self.branches:
            if l == label:
                return t
        raise KeyError(label)


@dataclass(frozen=True)
class With(SessionType):
    """External choice: provider receives one of the labels."""

    branches: Branches

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(l for l, _ in self.branches)

    def branch(self, label: str) -> SessionType:
        for l, t in self.branches:
            if l == label:
                return t
        raise KeyError(label)


@dataclass(frozen=True)
class Tensor(SessionType):
    left: SessionType
    right: SessionType


@dataclass(frozen=True)
class Lolli(SessionType):
    left: SessionType
    right: SessionType


@dataclass(frozen=True)
class One(SessionType):
    pass


@dataclass(frozen=True)
class Assert(SessionType):
    """?{phi}. A — provider sends a token certifying phi."""

    prop: ArithProp
    cont: SessionType


@dataclass(frozen=True)
class Assume(SessionType):
    """!{phi}. A — provider receives a token certifying phi."""

    prop: ArithProp
    cont: SessionType


@dataclass(frozen=True)
class TExists(SessionType):
    """?n. A — provider sends a natural number for n."""

    var: str
    body: SessionType


@dataclass(frozen=True)
class TForall(SessionType):
    """!n. A — provider receives a natural number for n."""

    var: str
    body: SessionType


@dataclass(frozen=True)
class TVar(SessionType):
    """Instantiation V[e1]...[ek] of a defined type name."""

    name: str
    args: tuple[ArithExpr, ...] = ()


ONE = One()


# ---------------------------------------------------------------------------
# signatures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeDef:
    """V[n1]...[nk | phi] = A.  Each parameter implicitly carries n >= 0."""

    name: str
    params: tuple[str, ...]
    constraint: ArithProp
    body: SessionType

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class EqDecl:
    """Programmer-asserted equality, used to seed the bisimulation."""

    vars: tuple[str, ...]
    constraint: ArithProp
    left: TVar
    right: TVar


@dataclass(frozen=True)
class Signature:
    defs: tuple[TypeDef, ...]
    eqdecls: tuple[EqDecl, ...] = ()

    @cached_property
    def def_map(self) -> dict[str, TypeDef]:
        return {d.name: d for d in self.defs}

    def lookup(self, name: str) -> TypeDef:
        try:
            return self.def_map[name]
        except KeyError:
            raise UnknownTypeName(name) from None


@dataclass(frozen=True)
class Closure:
    """<V; C; lhs == rhs> — one family of ground equations.

    In the equality engine's Gamma both sides are always variable
    instantiations; the generalized form (arbitrary types) appears in the
    closure sets collected from derivations.
    """

    vars: tuple[str, ...]
    constraint: ArithProp
    lhs: SessionType
    rhs: SessionType


GroundSubst = Mapping[str, int]


class UnknownTypeName(Exception):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown type name: {name}")
        self.name = name


class ArityMismatch(Exception):
    def __init__(self, name: str, expected: int, got: int) -> None:
        super().__init__(f"{name} expects {expected} index argument(s), got {got}")
        self.name = name
        self.expected = expected
        self.got = got


# ---------------------------------------------------------------------------
# free variables
# ---------------------------------------------------------------------------

def free_arith_vars(x: Union[ArithExpr, ArithProp, SessionType]) -> set[str]:
    """Free (unbound) arithmetic variables of an expression, proposition or type."""
    out: set[str] = set()
    _collect_free(x, frozenset(), out)
    return out


def _collect_free(x, bound: frozenset[str], out: set[str]) -> None:
    match x:
        case Const() | Top() | Bot() | One():
            pass
        case Var(name):
            if name not in bound:
                out.add(name)
        case Add(l, r) | Sub(l, r) | Mul(l, r):
            _collect_free(l, bound, out)
            _collect_free(r, bound, out)
        case Eq(l, r) | Gt(l, r):
            _collect_free(l, bound, out)
            _collect_free(r, bound, out)
        case And(l, r) | Or(l, r):
            _collect_free(l, bound, out)
            _collect_free(r, bound, out)
        case Not(b):
            _collect_free(b, bound, out)
        case PropExists(v, b) | PropForall(v, b):
            _collect_free(b, bound | {v}, out)
        case Dvd(_, e):
            _collect_free(e, bound, out)
        case Plus(branches) | With(branches):
            for _, t in branches:
                _collect_free(t, bound, out)
        case Tensor(l, r) | Lolli(l, r):
            _collect_free(l, bound, out)
            _collect_free(r, bound, out)
        case Assert(p, c) | Assume(p, c):
            _collect_free(p, bound, out)
            _collect_free(c, bound, out)
        case TExists(v, b) | TForall(v, b):
            _collect_free(b, bound | {v}, out)
        case TVar(_, args):
            for e in args:
                _collect_free(e, bound, out)
        case _:
            raise TypeError(f"not an AST node: {x!r}")


def fresh_name(base: str, avoid) -> str:
    """Smallest primed variant of base not in avoid."""
    name = base
    while name in avoid:
        name += "'"
    return name


# ---------------------------------------------------------------------------
# substitution
# ---------------------------------------------------------------------------

Substitution = Mapping[str, ArithExpr]


def ground_to_exprs(s: GroundSubst) -> dict[str, ArithExpr]:
    return {n: Const(v) for n, v in s.items()}


def subst_arith(x, s: Substitution):
    """Capture-avoiding simultaneous substitution of index expressions.

    Works uniformly on expressions, propositions and session types.  Bound
    ?n/!n (and exists/forall) variables are renamed when they would capture a
    variable free in the substituted expressions.
    """
    if not s:
        return x
    return _subst(x, dict(s))


def _subst(x, s: dict[str, ArithExpr]):
    match x:
        case Const() | Top() | Bot() | One():
            return x
        case Var(name):
            return s.get(name, x)
        case Add(l, r):
            return Add(_subst(l, s), _subst(r, s))
        case Sub(l, r):
            return Sub(_subst(l, s), _subst(r, s))
        case Mul(l, r):
            return Mul(_subst(l, s), _subst(r, s))
        case Eq(l, r):
            return Eq(_subst(l, s), _subst(r, s))
        case Gt(l, r):
            return Gt(_subst(l, s), _subst(r, s))
        case And(l, r):
            return And(_subst(l, s), _subst(r, s))
        case Or(l, r):
            return Or(_subst(l, s), _subst(r, s))
        case Not(b):
            return Not(_subst(b, s))
        case PropExists(v, b):
            v2, b2 = _subst_binder(v, b, s)
            return PropExists(v2, b2)
        case PropForall(v, b):
            v2, b2 = _subst_binder(v, b, s)
            return PropForall(v2, b2)
        case Dvd(d, e):
            return Dvd(d, _subst(e, s))
        case Plus(branches):
            return Plus(tuple((l, _subst(t, s)) for l, t in branches))
        case With(branches):
            return With(tuple((l, _subst(t, s)) for l, t in branches))
        case Tensor(l, r):
            return Tensor(_subst(l, s), _subst(r, s))
        case Lolli(l, r):
            return Lolli(_subst(l, s), _subst(r, s))
        case Assert(p, c):
            return Assert(_subst(p, s), _subst(c, s))
        case Assume(p, c):
            return Assume(_subst(p, s), _subst(c, s))
        case TExists(v, b):
            v2, b2 = _subst_binder(v, b, s)
            return TExists(v2, b2)
        case TForall(v, b):
            v2, b2 = _subst_binder(v, b, s)
            return TForall(v2, b2)
        case TVar(name, args):
            return TVar(name, tuple(_subst(e, s) for e in args))
        case _:
            raise TypeError(f"not an AST node: {x!r}")


def _subst_binder(var: str, body, s: dict[str, ArithExpr]):
    inner = {k: v for k, v in s.items() if k != var}
    if not inner:
        return var, body
    value_fvs = set().union(*(free_arith_vars(e) for e in inner.values()))
    if var in value_fvs:
        renamed = fresh_name(var, value_fvs | set(inner) | free_arith_vars(body))
        body = _subst(body, {var: Var(renamed)})
        var = renamed
    return var, _subst(body, inner)


# ---------------------------------------------------------------------------
# unfolding
# ---------------------------------------------------------------------------

def unfold(sig: Signature, t: SessionType) -> SessionType:
    """One definitional unfolding: V[e..] becomes its body with e.. substituted.

    Non-variables are fixed points.  By contractiveness the result is never a
    variable instantiation.
    """
    if not isinstance(t, TVar):
        return t
    d = sig.lookup(t.name)
    if len(t.args) != d.arity:
        raise ArityMismatch(t.name, d.arity, len(t.args))
    return subst_arith(d.body, dict(zip(d.params, t.args)))


# ---------------------------------------------------------------------------
# observable traces (shared witness format for the oracle and the engine)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceStep:
    """One observable step: ('label', l) | ('component', 0/1) |
    ('token', '?'/'!') | ('numeral', value-or-variable-name)."""

    kind: str
    detail: Union[str, int]


@dataclass(frozen=True)
class TraceDiff:
    """The differing observation at the end of a trace."""

    kind: str  # 'label-sets' | 'constructor' | 'prop-value' | 'close'
    lhs: str
    rhs: str


@dataclass(frozen=True)
class Trace:
    steps: tuple[TraceStep, ...]
    diff: TraceDiff

    def prepend(self, step: TraceStep) -> "Trace":
        return Trace((step,) + self.steps, self.diff)

    def render(self) -> str:
        parts = []
        for s in self.steps:
            match s.kind:
                case "label":
                    parts.append(f"label {s.detail}")
                case "component":
                    parts.append("left" if s.detail == 0 else "right")
                case "token":
                    parts.append(f"token {s.detail}")
                case "numeral":
                    parts.append(f"number {s.detail}")
        path = " ; ".join(parts) if parts else "(root)"
        return f"{path} => {self.diff.kind}: {self.diff.lhs} vs {self.diff.rhs}"
