"""Coinductive type equality on internalized signatures.

The engine attempts to build a bisimulation, deterministically and without
backtracking.  At every goal it first discharges the contradictory-context
rule; on a pair of defined names it tries reflexivity, then closure lookup,
then expansion; on a pair of structural types it applies the matching
structural rule.  Mixed variable/constructor goals cannot occur on
internalized input and raise.

Expansion is refused when the context already holds a closure for the same
ordered pair of names, which bounds every run; the price is incompleteness,
reported as an `unknown` verdict rather than a guess.  Each query gets an
isolated engine instance, so concurrent queries over one shared signature
are safe.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Union

from . import arith
from .core import (
    And, ArithProp, Assert, Assume, Bot, Closure, Const, Eq, EqDecl, Lolli,
    Not, One, Or, Plus, PropExists, SessionType, Signature, TExists, TForall,
    TOP, TVar, Tensor, Top, Trace, TraceDiff, TraceStep, Var, With, conj,
    fresh_name, subst_arith, unfold,
)
from .naming import InternalizedSignature, internalize_query
from .syntax import print_context, print_prop, print_type

DEFAULT_MAX_GOALS = 100_000
MAX_GOALS_ENV = "REFINE_EQ_MAX_GOALS"


def default_max_goals() -> int:
    raw = os.environ.get(MAX_GOALS_ENV, "")
    try:
        return int(raw) if raw else DEFAULT_MAX_GOALS
    except ValueError:
        return DEFAULT_MAX_GOALS


class EngineInvariantError(Exception):
    """A goal shape the internalization pass is supposed to rule out."""


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Entailment:
    """A side condition (forall vars. constraint => prop) that held."""

    vars: tuple[str, ...]
    constraint: ArithProp
    prop: ArithProp

    def holds(self) -> bool:
        return arith.entails(self.vars, self.constraint, self.prop) is True


@dataclass(frozen=True)
class DerivNode:
    rule: str
    vars: tuple[str, ...]
    constraint: ArithProp
    lhs: SessionType
    rhs: SessionType
    conditions: tuple[Entailment, ...] = ()
    premises: tuple["DerivNode", ...] = ()
    closure: Optional[Closure] = None      # added by expd
    def_closure: Optional[Closure] = None  # matched by def


@dataclass(frozen=True)
class Equal:
    derivation: DerivNode
    closures: tuple[Closure, ...] = ()


@dataclass(frozen=True)
class NotEqual:
    trace: Trace
    vars: tuple[str, ...]       # context at the difference point
    constraint: ArithProp       # accumulated path constraint there
    condition: ArithProp        # extra condition exhibiting the difference


@dataclass(frozen=True)
class Unknown:
    reason: str  # 'blocked-expd' | 'arith-unknown' | 'resource-limit'
    goal: str    # rendered frontier goal


Verdict = Union[Equal, NotEqual, Unknown]


def verdict_name(v: Verdict) -> str:
    match v:
        case Equal():
            return "EQUAL"
        case NotEqual():
            return "NOT_EQUAL"
        case Unknown():
            return "UNKNOWN"
    raise TypeError(f"not a verdict: {v!r}")


@dataclass
class EqResult:
    verdict: Verdict
    goals: int
    expds: int
    defs_count: int  # defined names, internal and external, seen by the run


def _render_goal(vars_, constraint, lhs, rhs) -> str:
    return (print_context(tuple(vars_), constraint)
            + f"{print_type(lhs)} == {print_type(rhs)}")


# ---------------------------------------------------------------------------
# the engine
# ---------------------------------------------------------------------------

class _Engine:
    def __init__(self, isig: InternalizedSignature, max_goals: int) -> None:
        self.isig = isig
        self.sig = isig.signature
        self.max_goals = max_goals
        self.max_expds = len(isig.signature.defs) ** 2
        self.goals = 0
        self.expds = 0
        self.memo: dict[tuple, Verdict] = {}

    # -- helpers ------------------------------------------------------------

    def entails(self, vars_, constraint, prop) -> Optional[bool]:
        return arith.entails(tuple(vars_), constraint, prop)

    def _key(self, vars_, constraint, lhs, rhs) -> tuple:
        ren = {v: Var(f"@{i}") for i, v in enumerate(vars_)}
        return (len(vars_),
                print_prop(subst_arith(constraint, ren)),
                print_type(subst_arith(lhs, ren)),
                print_type(subst_arith(rhs, ren)))

    # -- main recursion -------------------------------------------------------

    def check(self, vars_: tuple[str, ...], constraint: ArithProp,
              lhs: SessionType, rhs: SessionType,
              gamma: tuple[Closure, ...]) -> Verdict:
        self.goals += 1
        if self.goals > self.max_goals:
            return Unknown("resource-limit",
                           _render_goal(vars_, constraint, lhs, rhs))
        key = self._key(vars_, constraint, lhs, rhs)
        cached = self.memo.get(key)
        if cached is not None:
            return cached
        verdict = self._apply(vars_, constraint, lhs, rhs, gamma)
        self.memo[key] = verdict
        return verdict

    def _apply(self, vars_, constraint, lhs, rhs, gamma) -> Verdict:
        # rule bot: a contradictory context relates anything
        bot = self.entails(vars_, constraint, Bot())
        if bot is True:
            return Equal(DerivNode(
                "bot", vars_, constraint, lhs, rhs,
                conditions=(Entailment(vars_, constraint, Bot()),)))
        ctx_satisfiable = bot is False

        lvar, rvar = isinstance(lhs, TVar), isinstance(rhs, TVar)
        if lvar and rvar:
            return self._variables(vars_, constraint, lhs, rhs, gamma)
        if lvar or rvar:
            raise EngineInvariantError(
                "variable/constructor goal on internalized input: "
                + _render_goal(vars_, constraint, lhs, rhs))
        return self._structural(vars_, constraint, lhs, rhs, gamma,
                                ctx_satisfiable)

    # -- variable/variable goals: refl, def, expd -------------------------------

    def _variables(self, vars_, constraint, lhs: TVar, rhs: TVar, gamma) -> Verdict:
        saw_unknown = False

        if lhs.name == rhs.name:
            prop = conj([Eq(a, b) for a, b in zip(lhs.args, rhs.args)])
            r = self.entails(vars_, constraint, prop)
            if r is True:
                return Equal(DerivNode(
                    "refl", vars_, constraint, lhs, rhs,
                    conditions=(Entailment(vars_, constraint, prop),)))
            if r is None:
                saw_unknown = True

        for cl in reversed(gamma):
            if not (isinstance(cl.lhs, TVar) and isinstance(cl.rhs, TVar)):
                continue
            if cl.lhs.name != lhs.name or cl.rhs.name != rhs.name:
                continue
            prop = _def_condition(cl, lhs, rhs, vars_)
            r = self.entails(vars_, constraint, prop)
            if r is True:
                return Equal(DerivNode(
                    "def", vars_, constraint, lhs, rhs,
                    conditions=(Entailment(vars_, constraint, prop),),
                    def_closure=cl))
            if r is None:
                saw_unknown = True

        blocked = any(
            isinstance(cl.lhs, TVar) and isinstance(cl.rhs, TVar)
            and cl.lhs.name == lhs.name and cl.rhs.name == rhs.name
            for cl in gamma)
        if blocked:
            return Unknown("arith-unknown" if saw_unknown else "blocked-expd",
                           _render_goal(vars_, constraint, lhs, rhs))

        self.expds += 1
        if self.expds > self.max_expds:
            return Unknown("resource-limit",
                           _render_goal(vars_, constraint, lhs, rhs))
        closure = Closure(tuple(vars_), constraint, lhs, rhs)
        premise = self.check(vars_, constraint,
                             unfold(self.sig, lhs), unfold(self.sig, rhs),
                             gamma + (closure,))
        if isinstance(premise, Equal):
            return Equal(DerivNode(
                "expd", vars_, constraint, lhs, rhs,
                premises=(premise.derivation,), closure=closure))
        return premise

    # -- structural rules ---------------------------------------------------------

    def _structural(self, vars_, constraint, lhs, rhs, gamma,
                    ctx_satisfiable: bool) -> Verdict:
        if type(lhs) is not type(rhs):
            return self._mismatch(
                vars_, constraint, ctx_satisfiable,
                TraceDiff("constructor", _kind(lhs), _kind(rhs)),
                lhs, rhs)

        match lhs:
            case One():
                return Equal(DerivNode("one", vars_, constraint, lhs, rhs))

            case Plus() | With():
                rule = "plus" if isinstance(lhs, Plus) else "with"
                if lhs.labels != rhs.labels:
                    return self._mismatch(
                        vars_, constraint, ctx_satisfiable,
                        TraceDiff("label-sets", _labelset(lhs), _labelset(rhs)),
                        lhs, rhs)
                nodes = []
                for label, ta in lhs.branches:
                    v = self.check(vars_, constraint, ta, rhs.branch(label), gamma)
                    match v:
                        case Equal(derivation=d):
                            nodes.append(d)
                        case NotEqual():
                            return _extend(v, TraceStep("label", label))
                        case _:
                            return v
                return Equal(DerivNode(rule, vars_, constraint, lhs, rhs,
                                       premises=tuple(nodes)))

            case Tensor() | Lolli():
                rule = "tensor" if isinstance(lhs, Tensor) else "lolli"
                nodes = []
                for i, (ta, tb) in enumerate(
                        ((lhs.left, rhs.left), (lhs.right, rhs.right))):
                    v = self.check(vars_, constraint, ta, tb, gamma)
                    match v:
                        case Equal(derivation=d):
                            nodes.append(d)
                        case NotEqual():
                            return _extend(v, TraceStep("component", i))
                        case _:
                            return v
                return Equal(DerivNode(rule, vars_, constraint, lhs, rhs,
                                       premises=tuple(nodes)))

            case Assert(pa, ca) | Assume(pa, ca):
                rule = "assert" if isinstance(lhs, Assert) else "assume"
                token = "?" if rule == "assert" else "!"
                pb, cb = rhs.prop, rhs.cont
                bicond = And(Or(Not(pa), pb), Or(Not(pb), pa))
                r = self.entails(vars_, constraint, bicond)
                if r is None:
                    return Unknown("arith-unknown",
                                   _render_goal(vars_, constraint, lhs, rhs))
                if r is False:
                    # some instance satisfies the context yet splits the
                    # propositions, so one side can send/receive its token
                    # where the other is stuck
                    return NotEqual(
                        Trace((), TraceDiff("prop-value",
                                            f"{token}{{{print_prop(pa)}}}",
                                            f"{token}{{{print_prop(pb)}}}")),
                        tuple(vars_), constraint, Not(bicond))
                v = self.check(vars_, And(constraint, pa), ca, cb, gamma)
                match v:
                    case Equal(derivation=d):
                        return Equal(DerivNode(
                            rule, vars_, constraint, lhs, rhs,
                            conditions=(Entailment(vars_, constraint, bicond),),
                            premises=(d,)))
                    case NotEqual():
                        return _extend(v, TraceStep("token", token))
                    case _:
                        return v

            case TExists(va, ba) | TForall(va, ba):
                rule = "exists" if isinstance(lhs, TExists) else "forall"
                k = fresh_name(va, set(vars_))
                body_a = subst_arith(ba, {va: Var(k)})
                body_b = subst_arith(rhs.body, {rhs.var: Var(k)})
                v = self.check(vars_ + (k,), constraint, body_a, body_b, gamma)
                match v:
                    case Equal(derivation=d):
                        return Equal(DerivNode(rule, vars_, constraint, lhs, rhs,
                                               premises=(d,)))
                    case NotEqual():
                        return _extend(v, TraceStep("numeral", k))
                    case _:
                        return v

            case _:
                raise TypeError(f"not a session type: {lhs!r}")

    def _mismatch(self, vars_, constraint, ctx_satisfiable: bool,
                  diff: TraceDiff, lhs, rhs) -> Verdict:
        if not ctx_satisfiable:
            # the bot rule came back unknown, so the mismatch may be vacuous
            return Unknown("arith-unknown",
                           _render_goal(vars_, constraint, lhs, rhs))
        return NotEqual(Trace((), diff), tuple(vars_), constraint, TOP)


def _extend(v: NotEqual, step: TraceStep) -> NotEqual:
    return NotEqual(v.trace.prepend(step), v.vars, v.constraint, v.condition)


def _kind(t: SessionType) -> str:
    return {
        Plus: "internal choice", With: "external choice", Tensor: "tensor",
        Lolli: "lolli", One: "close", Assert: "assert", Assume: "assume",
        TExists: "exists", TForall: "forall", TVar: "variable",
    }[type(t)]


def _labelset(t) -> str:
    return "{" + ", ".join(sorted(t.labels)) + "}"


def _def_condition(cl: Closure, lhs: TVar, rhs: TVar,
                   outer_vars) -> ArithProp:
    """exists cl.vars. cl.constraint /\\ cl-index = goal-index, renamed apart."""
    avoid = set(outer_vars)
    ren: dict[str, Var] = {}
    fresh_vars: list[str] = []
    for v in cl.vars:
        v2 = fresh_name(v, avoid)
        avoid.add(v2)
        ren[v] = Var(v2)
        fresh_vars.append(v2)
    c = subst_arith(cl.constraint, ren)
    eqs = [Eq(subst_arith(a, ren), b)
           for a, b in zip(cl.lhs.args, lhs.args)]
    eqs += [Eq(subst_arith(a, ren), b)
            for a, b in zip(cl.rhs.args, rhs.args)]
    body = conj([c] + eqs)
    for v in reversed(fresh_vars):
        body = PropExists(v, body)
    return body


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def seed_closures(sig: Signature) -> tuple[Closure, ...]:
    """The Gamma_Sigma seeds: one closure per eqtype declaration."""
    return tuple(Closure(d.vars, d.constraint, d.left, d.right)
                 for d in sig.eqdecls)


def type_equal(isig: InternalizedSignature, vars_: tuple[str, ...],
               constraint: ArithProp, lhs: SessionType, rhs: SessionType,
               seeds: Optional[tuple[Closure, ...]] = None,
               max_goals: Optional[int] = None) -> EqResult:
    """Decide a query; non-variable sides are named into the signature first.

    `seeds` defaults to all eqtype declarations of the signature; pass () to
    start from the empty context.
    """
    if seeds is None:
        seeds = seed_closures(isig.signature)
    isig, lhs = internalize_query(isig, vars_, constraint, lhs)
    isig, rhs = internalize_query(isig, vars_, constraint, rhs)
    engine = _Engine(isig, max_goals or default_max_goals())
    verdict = engine.check(vars_, constraint, lhs, rhs, seeds)
    if isinstance(verdict, Equal):
        verdict = Equal(verdict.derivation, collect_closures(verdict.derivation))
    return EqResult(verdict, engine.goals, engine.expds,
                    len(isig.signature.defs))


def check_eq_decl(isig: InternalizedSignature, index: int,
                  max_goals: Optional[int] = None) -> EqResult:
    """Check one eqtype declaration, seeded with all the other declarations.

    A declaration does not seed its own check; otherwise the def rule would
    close every declaration against itself immediately and certify nothing.
    """
    decl = isig.signature.eqdecls[index]
    all_seeds = seed_closures(isig.signature)
    seeds = all_seeds[:index] + all_seeds[index + 1:]
    return type_equal(isig, decl.vars, decl.constraint, decl.left, decl.right,
                      seeds=seeds, max_goals=max_goals)


def check_eq_decls(isig: InternalizedSignature,
                   max_goals: Optional[int] = None) -> list[EqResult]:
    """Check every eqtype declaration in declaration order."""
    return [check_eq_decl(isig, i, max_goals)
            for i in range(len(isig.signature.eqdecls))]


def collect_closures(root: DerivNode) -> tuple[Closure, ...]:
    """All sequents of a derivation except def-rule conclusions, as closures."""
    out: list[Closure] = []
    seen: set[int] = set()

    def walk(n: DerivNode) -> None:
        if id(n) in seen:
            return
        seen.add(id(n))
        if n.rule != "def":
            out.append(Closure(n.vars, n.constraint, n.lhs, n.rhs))
        for p in n.premises:
            walk(p)

    walk(root)
    return tuple(dict.fromkeys(out))


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def render_derivation(root: DerivNode) -> list[str]:
    """Stable text rendering of a derivation; shared subtrees print once."""
    lines: list[str] = []
    seen: set[int] = set()

    def walk(n: DerivNode, depth: int) -> None:
        pad = "  " * depth
        goal = _render_goal(n.vars, n.constraint, n.lhs, n.rhs)
        if id(n) in seen:
            lines.append(f"{pad}{n.rule}: {goal} (shared)")
            return
        seen.add(id(n))
        lines.append(f"{pad}{n.rule}: {goal}")
        for cond in n.conditions:
            lines.append(f"{pad}  |= {print_prop(cond.prop)}")
        if n.def_closure is not None:
            cl = n.def_closure
            lines.append(
                f"{pad}  via closure "
                + _render_goal(cl.vars, cl.constraint, cl.lhs, cl.rhs))
        for p in n.premises:
            walk(p, depth + 1)

    walk(root, 0)
    return lines


def render_verdict(result: EqResult, with_detail: bool) -> list[str]:
    """Lines describing a verdict: trace for a refutation, derivation on demand."""
    v = result.verdict
    out: list[str] = []
    match v:
        case Equal():
            if with_detail:
                out.extend(render_derivation(v.derivation))
                out.append(f"closures: {len(v.closures)}")
        case NotEqual():
            out.append("trace: " + v.trace.render())
            ctx = print_context(v.vars, v.constraint).strip()
            if ctx:
                out.append(f"under {ctx}")
            if not isinstance(v.condition, Top):
                out.append(f"split by {print_prop(v.condition)}")
        case Unknown():
            out.append(f"reason: {v.reason}")
            out.append(f"at goal {v.goal}")
    return out


# ---------------------------------------------------------------------------
# derivation replay
# ---------------------------------------------------------------------------

def replay_derivation(isig: InternalizedSignature, root: DerivNode) -> bool:
    """Re-validate every rule application and side entailment of a derivation.

    Returns False (rather than raising) on the first node that does not
    check out; used to guard the engine against itself in tests.
    """
    try:
        _replay(isig.signature, root, set())
        return True
    except _ReplayFailure:
        return False


class _ReplayFailure(Exception):
    pass


def _fail(msg: str) -> None:
    raise _ReplayFailure(msg)


def _replay(sig: Signature, n: DerivNode, seen: set[int]) -> None:
    if id(n) in seen:
        return
    seen.add(id(n))
    for cond in n.conditions:
        if not cond.holds():
            _fail(f"side condition does not hold at {n.rule}")
    match n.rule:
        case "bot":
            if not (n.conditions and isinstance(n.conditions[0].prop, Bot)):
                _fail("bot rule without a contradiction condition")
        case "refl":
            if not (isinstance(n.lhs, TVar) and isinstance(n.rhs, TVar)
                    and n.lhs.name == n.rhs.name):
                _fail("refl on different names")
            want = conj([Eq(a, b) for a, b in zip(n.lhs.args, n.rhs.args)])
            if not n.conditions or n.conditions[0].prop != want:
                _fail("refl condition mismatch")
        case "def":
            cl = n.def_closure
            if cl is None:
                _fail("def without a closure")
            want = _def_condition(cl, n.lhs, n.rhs, n.vars)
            if not n.conditions or n.conditions[0].prop != want:
                _fail("def condition mismatch")
        case "expd":
            if n.closure != Closure(n.vars, n.constraint, n.lhs, n.rhs):
                _fail("expd closure mismatch")
            (p,) = n.premises
            if (p.lhs, p.rhs) != (unfold(sig, n.lhs), unfold(sig, n.rhs)):
                _fail("expd premise is not the unfolding")
            if (p.vars, p.constraint) != (n.vars, n.constraint):
                _fail("expd context changed")
        case "one":
            if not (isinstance(n.lhs, One) and isinstance(n.rhs, One)):
                _fail("one rule on non-unit")
        case "plus" | "with":
            if n.lhs.labels != n.rhs.labels:
                _fail("label sets differ")
            if len(n.premises) != len(n.lhs.branches):
                _fail("branch premise count")
            for (label, ta), p in zip(n.lhs.branches, n.premises):
                if (p.lhs, p.rhs) != (ta, n.rhs.branch(label)):
                    _fail("branch premise mismatch")
                if (p.vars, p.constraint) != (n.vars, n.constraint):
                    _fail("branch context changed")
        case "tensor" | "lolli":
            pl, pr = n.premises
            if (pl.lhs, pl.rhs) != (n.lhs.left, n.rhs.left):
                _fail("left premise mismatch")
            if (pr.lhs, pr.rhs) != (n.lhs.right, n.rhs.right):
                _fail("right premise mismatch")
        case "assert" | "assume":
            (p,) = n.premises
            if (p.lhs, p.rhs) != (n.lhs.cont, n.rhs.cont):
                _fail("continuation premise mismatch")
            if p.constraint != And(n.constraint, n.lhs.prop):
                _fail("continuation constraint not strengthened")
            if not n.conditions:
                _fail("missing biconditional condition")
        case "exists" | "forall":
            (p,) = n.premises
            if len(p.vars) != len(n.vars) + 1:
                _fail("quantifier rule must extend the context")
            k = p.vars[-1]
            if p.lhs != subst_arith(n.lhs.body, {n.lhs.var: Var(k)}):
                _fail("left body mismatch")
            if p.rhs != subst_arith(n.rhs.body, {n.rhs.var: Var(k)}):
                _fail("right body mismatch")
        case _:
            _fail(f"unknown rule {n.rule!r}")
    for p in n.premises:
        _replay(sig, p, seen)
