"""Signature validity: contractiveness, arity, and constraint entailments.

A definition V[n..| phi] = A is checked by walking A under the variable
context n.. and constraint phi; asserts and assumes both strengthen the
constraint, quantifiers extend the context, and every instantiation W[e..]
must entail W's constraint (including the implicit e >= 0 per parameter).
Compositional constructors are checked componentwise under an unchanged
context.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from . import arith
from .core import (
    Add, And, ArithProp, Assert, Assume, Const, Gt, Lolli, One, Plus,
    SessionType, Signature, TExists, TForall, TVar, Tensor, Var, With, conj,
    fresh_name, ground_to_exprs, subst_arith,
)
from .syntax import print_prop

COUNTERMODEL_CAP = 10_000  # candidate valuations tried when attaching a witness


@dataclass(frozen=True)
class Violation:
    def_name: str            # definition (or "<query>") being checked
    path: str                # constructor path to the offending position
    kind: str                # 'contractive' | 'arity' | 'unknown-name'
    #                        # | 'entailment' | 'unverifiable'
    message: str
    prop: Optional[ArithProp] = None   # the failed phi[e../n..], if any
    countermodel: Optional[dict[str, int]] = None

    def render(self) -> str:
        loc = f"{self.def_name}" + (f" at {self.path}" if self.path else "")
        s = f"{loc}: {self.message}"
        if self.prop is not None:
            s += f" [{print_prop(self.prop)}]"
        if self.countermodel is not None:
            env = ", ".join(f"{k}={v}" for k, v in sorted(self.countermodel.items()))
            s += f" (countermodel: {env})"
        return s


@dataclass
class ValidityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def unverifiable(self) -> bool:
        return any(v.kind == "unverifiable" for v in self.violations)

    def extend(self, other: "ValidityReport") -> None:
        self.violations.extend(other.violations)

    def render(self) -> str:
        if self.ok:
            return "accepted"
        return "\n".join(v.render() for v in self.violations)


def check_signature(sig: Signature) -> ValidityReport:
    """Validate every definition; violations are collected, never thrown."""
    report = ValidityReport()
    for d in sig.defs:
        if isinstance(d.body, TVar):
            report.violations.append(Violation(
                d.name, "", "contractive",
                "body is itself a type variable (not contractive)"))
            continue
        _check(sig, d.name, "", list(d.params), d.constraint, d.body, report)
    for i, decl in enumerate(sig.eqdecls):
        where = f"eqtype#{i + 1}"
        for side in (decl.left, decl.right):
            _check(sig, where, "", list(decl.vars), decl.constraint, side, report)
    return report


def check_type(vars_: tuple[str, ...], constraint: ArithProp, t: SessionType,
               sig: Signature) -> ValidityReport:
    """Validate a query-supplied type under the given context."""
    report = ValidityReport()
    _check(sig, "<query>", "", list(vars_), constraint, t, report)
    return report


def _check(sig: Signature, name: str, path: str, vars_: list[str],
           constraint: ArithProp, t: SessionType, report: ValidityReport) -> None:
    match t:
        case One():
            return
        case Plus(branches) | With(branches):
            for label, b in branches:
                _check(sig, name, f"{path}.{label}" if path else label,
                       vars_, constraint, b, report)
        case Tensor(l, r) | Lolli(l, r):
            op = "*" if isinstance(t, Tensor) else "-o"
            _check(sig, name, f"{path}<{op}", vars_, constraint, l, report)
            _check(sig, name, f"{path}{op}>", vars_, constraint, r, report)
        case Assert(p, c) | Assume(p, c):
            _check(sig, name, path, vars_, And(constraint, p), c, report)
        case TExists(v, b) | TForall(v, b):
            if v in vars_:
                v2 = fresh_name(v, set(vars_))
                b = subst_arith(b, {v: Var(v2)})
                v = v2
            _check(sig, name, path, vars_ + [v], constraint, b, report)
        case TVar(ref, args):
            d = sig.def_map.get(ref)
            if d is None:
                report.violations.append(Violation(
                    name, path, "unknown-name", f"unknown type name {ref!r}"))
                return
            if len(args) != d.arity:
                report.violations.append(Violation(
                    name, path, "arity",
                    f"{ref} expects {d.arity} index argument(s), got {len(args)}"))
                return
            inst = dict(zip(d.params, args))
            premise = conj(
                [subst_arith(d.constraint, inst)] + [_nonneg(e) for e in args])
            _discharge(name, path, vars_, constraint, premise, report, ref)
        case _:
            raise TypeError(f"not a session type: {t!r}")


def _nonneg(e) -> ArithProp:
    # e >= 0, stated in the > fragment as e+1 > 0
    return Gt(Add(e, Const(1)), Const(0))


def _discharge(name: str, path: str, vars_: list[str], constraint: ArithProp,
               premise: ArithProp, report: ValidityReport, ref: str) -> None:
    result = arith.entails(vars_, constraint, premise)
    if result is True:
        return
    if result is None:
        report.violations.append(Violation(
            name, path, "unverifiable",
            f"could not verify the instantiation constraint of {ref}",
            prop=premise))
        return
    report.violations.append(Violation(
        name, path, "entailment",
        f"instantiation of {ref} violates its definition constraint",
        prop=premise,
        countermodel=_countermodel(vars_, constraint, premise)))


def _countermodel(vars_: list[str], constraint: ArithProp,
                  premise: ArithProp) -> Optional[dict[str, int]]:
    """Bounded search for a valuation satisfying the context but not the premise."""
    if not vars_:
        return {}
    per_var = max(2, int(COUNTERMODEL_CAP ** (1.0 / len(vars_))))
    ranges = [range(per_var)] * len(vars_)
    tried = 0
    for values in itertools.product(*ranges):
        tried += 1
        if tried > COUNTERMODEL_CAP:
            break
        sigma = dict(zip(vars_, values))
        try:
            if not arith.decide_closed(_ground(constraint, sigma)):
                continue
            if not arith.decide_closed(_ground(premise, sigma)):
                return sigma
        except (arith.NonLinearError, arith.BudgetExceeded):
            return None
    return None


def _ground(p: ArithProp, sigma: dict[str, int]) -> ArithProp:
    return subst_arith(p, ground_to_exprs(sigma))
