"""Bounded-bisimulation checking on closed types.

This is the testing oracle: it refutes equality by exhibiting a finite
observable difference, and its `no difference up to depth d with numerals
0..N` answer is deliberately weaker than equality.  It shares nothing with
the equality engine beyond the type syntax, unfolding, and the closed-
proposition decision procedure.

A false assert or assume makes the channel stuck: no message can flow, the
continuation is unobservable, and two stuck types of the same polarity match
regardless of their continuations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from . import arith
from .core import (
    Assert, Assume, Const, Lolli, One, Plus, SessionType, Signature, TExists,
    TForall, TVar, Tensor, Trace, TraceDiff, TraceStep, With, subst_arith,
    unfold,
)
from .syntax import print_prop


# ---------------------------------------------------------------------------
# observation trees
# ---------------------------------------------------------------------------

class ObsTree:
    __slots__ = ()


@dataclass(frozen=True)
class ChoiceNode(ObsTree):
    polarity: str  # '+' or '&'
    branches: tuple[tuple[str, ObsTree], ...]


@dataclass(frozen=True)
class ChannelNode(ObsTree):
    kind: str  # '*' or '-o'
    left: ObsTree
    right: ObsTree


@dataclass(frozen=True)
class PropNode(ObsTree):
    polarity: str  # '?' or '!'
    holds: bool
    child: Optional[ObsTree]  # None exactly when the proposition is false


@dataclass(frozen=True)
class NumeralNode(ObsTree):
    polarity: str  # '?' sends, '!' receives
    children: tuple[ObsTree, ...]  # index i holds the subtree for numeral i


@dataclass(frozen=True)
class CloseLeaf(ObsTree):
    pass


@dataclass(frozen=True)
class CutoffLeaf(ObsTree):
    pass


def _decide(prop) -> bool:
    return arith.decide_closed(prop)


def obs_tree(sig: Signature, t: SessionType, depth: int, numerals: int) -> ObsTree:
    """Finite observation tree of a closed type: depth-bounded, with
    quantifier branching enumerated over 0..numerals."""
    if depth <= 0:
        return CutoffLeaf()
    t = unfold(sig, t)
    match t:
        case One():
            return CloseLeaf()
        case Plus(branches):
            return ChoiceNode("+", tuple(
                (l, obs_tree(sig, b, depth - 1, numerals)) for l, b in branches))
        case With(branches):
            return ChoiceNode("&", tuple(
                (l, obs_tree(sig, b, depth - 1, numerals)) for l, b in branches))
        case Tensor(l, r):
            return ChannelNode("*", obs_tree(sig, l, depth - 1, numerals),
                               obs_tree(sig, r, depth - 1, numerals))
        case Lolli(l, r):
            return ChannelNode("-o", obs_tree(sig, l, depth - 1, numerals),
                               obs_tree(sig, r, depth - 1, numerals))
        case Assert(p, c):
            holds = _decide(p)
            child = obs_tree(sig, c, depth - 1, numerals) if holds else None
            return PropNode("?", holds, child)
        case Assume(p, c):
            holds = _decide(p)
            child = obs_tree(sig, c, depth - 1, numerals) if holds else None
            return PropNode("!", holds, child)
        case TExists(v, b):
            return NumeralNode("?", tuple(
                obs_tree(sig, subst_arith(b, {v: Const(i)}), depth - 1, numerals)
                for i in range(numerals + 1)))
        case TForall(v, b):
            return NumeralNode("!", tuple(
                obs_tree(sig, subst_arith(b, {v: Const(i)}), depth - 1, numerals)
                for i in range(numerals + 1)))
        case _:
            raise TypeError(f"not a session type: {t!r}")


# ---------------------------------------------------------------------------
# bounded bisimulation
# ---------------------------------------------------------------------------

_KIND = {
    Plus: "internal choice", With: "external choice", Tensor: "tensor",
    Lolli: "lolli", One: "close", Assert: "assert", Assume: "assume",
    TExists: "exists", TForall: "forall",
}


def _labelset(t) -> str:
    return "{" + ", ".join(sorted(t.labels)) + "}"


def bisim_bounded(sig: Signature, a: SessionType, b: SessionType,
                  depth: int, numerals: int) -> Optional[Trace]:
    """Search for an observable difference between two closed types.

    Returns a replayable trace to the first difference found, or None when
    none is observable within the bounds (which is not a proof of equality).
    """
    matched: set[tuple[SessionType, SessionType, int]] = set()

    def walk(a: SessionType, b: SessionType, d: int) -> Optional[Trace]:
        if d <= 0:
            return None
        key = (a, b, d)
        if key in matched:
            return None
        sa, sb = unfold(sig, a), unfold(sig, b)
        out = _step(sa, sb, d)
        if out is None:
            matched.add(key)
        return out

    def _step(sa, sb, d) -> Optional[Trace]:
        if type(sa) is not type(sb):
            return Trace((), TraceDiff("constructor", _KIND[type(sa)], _KIND[type(sb)]))
        match sa:
            case One():
                return None
            case Plus() | With():
                if sa.labels != sb.labels:
                    return Trace((), TraceDiff("label-sets", _labelset(sa), _labelset(sb)))
                for l, ta in sa.branches:
                    sub = walk(ta, sb.branch(l), d - 1)
                    if sub is not None:
                        return sub.prepend(TraceStep("label", l))
                return None
            case Tensor() | Lolli():
                sub = walk(sa.left, sb.left, d - 1)
                if sub is not None:
                    return sub.prepend(TraceStep("component", 0))
                sub = walk(sa.right, sb.right, d - 1)
                if sub is not None:
                    return sub.prepend(TraceStep("component", 1))
                return None
            case Assert(pa, ca) | Assume(pa, ca):
                pol = "?" if isinstance(sa, Assert) else "!"
                ha, hb = _decide(pa), _decide(sb.prop)
                if ha != hb:
                    return Trace((), TraceDiff(
                        "prop-value",
                        f"{pol}{{{print_prop(pa)}}} is {str(ha).lower()}",
                        f"{pol}{{{print_prop(sb.prop)}}} is {str(hb).lower()}"))
                if not ha:
                    return None  # both stuck: continuations unobservable
                sub = walk(ca, sb.cont, d - 1)
                if sub is not None:
                    return sub.prepend(TraceStep("token", pol))
                return None
            case TExists(va, ba) | TForall(va, ba):
                for i in range(numerals + 1):
                    sub = walk(subst_arith(ba, {va: Const(i)}),
                               subst_arith(sb.body, {sb.var: Const(i)}), d - 1)
                    if sub is not None:
                        return sub.prepend(TraceStep("numeral", i))
                return None
            case _:
                raise TypeError(f"not a session type: {sa!r}")

    return walk(a, b, depth)


# ---------------------------------------------------------------------------
# trace replay
# ---------------------------------------------------------------------------

def replay_trace(sig: Signature, steps: tuple[TraceStep, ...],
                 a: SessionType, b: SessionType) -> bool:
    """Walk concrete observable steps from two closed types and confirm an
    observable difference at the end.

    Every step must be simultaneously possible on both sides (that is what
    makes it a common prefix); the replay succeeds when the final positions
    differ in constructor, label set, or ground truth of their propositions.
    """
    for step in steps:
        sa, sb = unfold(sig, a), unfold(sig, b)
        if type(sa) is not type(sb):
            return False
        match step.kind:
            case "label":
                if not isinstance(sa, (Plus, With)):
                    return False
                if step.detail not in sa.labels or step.detail not in sb.labels:
                    return False
                a, b = sa.branch(step.detail), sb.branch(step.detail)
            case "component":
                if not isinstance(sa, (Tensor, Lolli)):
                    return False
                a = sa.left if step.detail == 0 else sa.right
                b = sb.left if step.detail == 0 else sb.right
            case "token":
                if not isinstance(sa, (Assert, Assume)):
                    return False
                if not (_decide(sa.prop) and _decide(sb.prop)):
                    return False
                a, b = sa.cont, sb.cont
            case "numeral":
                if not isinstance(sa, (TExists, TForall)):
                    return False
                i = step.detail
                assert isinstance(i, int), "replay requires concrete numerals"
                a = subst_arith(sa.body, {sa.var: Const(i)})
                b = subst_arith(sb.body, {sb.var: Const(i)})
            case _:
                return False
    sa, sb = unfold(sig, a), unfold(sig, b)
    if type(sa) is not type(sb):
        return True
    match sa:
        case Plus() | With():
            return sa.labels != sb.labels
        case Assert() | Assume():
            return _decide(sa.prop) != _decide(sb.prop)
        case _:
            return False
