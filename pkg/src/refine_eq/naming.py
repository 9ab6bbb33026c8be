"""Internal-name introduction.

Rewrites a signature so that defined names and type constructors alternate:
after the pass, every definition body is a single constructor whose type
continuations are all variable instantiations.  Loop detection in the
equality engine then works purely on pairs of defined names.

Each generated name %i is abstracted over the free index variables of the
subterm it names (definition parameters first, then quantifier binders,
outside-in) and carries the constraints known at its origin: the enclosing
definition's constraint plus every dominating assert/assume proposition.
Constraints mentioning variables the name is not abstracted over are
existentially projected onto the kept variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from . import arith
from .core import (
    ArithProp, Assert, Assume, One, Plus, SessionType, Signature, TExists,
    TForall, TOP, TVar, Tensor, Lolli, Top, TypeDef, Var, With, conj,
    free_arith_vars,
)


@dataclass(eq=False)
class InternalizedSignature:
    """A rewritten signature plus provenance for the generated names."""

    signature: Signature
    origins: dict[str, tuple[str, str]]  # internal name -> (source def, path)
    internal_names: frozenset[str]
    next_id: int = 0

    def is_internal(self, name: str) -> bool:
        return name in self.internal_names


class _Pass:
    def __init__(self, counter: int = 0) -> None:
        self.counter = counter
        self.new_defs: list[TypeDef] = []
        self.origins: dict[str, tuple[str, str]] = {}

    def alloc(self, source: str, path: str) -> str:
        name = f"%{self.counter}"
        self.counter += 1
        self.origins[name] = (source, path)
        return name

    def node(self, t: SessionType, source: str, path: str,
             scope: list[str], props: list[ArithProp]) -> SessionType:
        """Rewrite one constructor, naming every non-variable continuation."""
        match t:
            case One() | TVar():
                return t
            case Plus(branches):
                return Plus(tuple(
                    (l, self.child(b, source, f"{path}.{l}" if path else l, scope, props))
                    for l, b in branches))
            case With(branches):
                return With(tuple(
                    (l, self.child(b, source, f"{path}.{l}" if path else l, scope, props))
                    for l, b in branches))
            case Tensor(l, r):
                return Tensor(self.child(l, source, path + "<*", scope, props),
                              self.child(r, source, path + "*>", scope, props))
            case Lolli(l, r):
                return Lolli(self.child(l, source, path + "<-o", scope, props),
                             self.child(r, source, path + "-o>", scope, props))
            case Assert(p, c):
                return Assert(p, self.child(c, source, path, scope, props + [p]))
            case Assume(p, c):
                return Assume(p, self.child(c, source, path, scope, props + [p]))
            case TExists(v, b):
                return TExists(v, self.child(b, source, path, scope + [v], props))
            case TForall(v, b):
                return TForall(v, self.child(b, source, path, scope + [v], props))
            case _:
                raise TypeError(f"not a session type: {t!r}")

    def child(self, t: SessionType, source: str, path: str,
              scope: list[str], props: list[ArithProp]) -> SessionType:
        if isinstance(t, TVar):
            return t
        name = self.alloc(source, path)
        params = tuple(v for v in scope if v in free_arith_vars(t))
        constraint = _project(props, scope, params)
        body = self.node(t, source, path, scope, props)
        self.new_defs.append(TypeDef(name, params, constraint, body))
        return TVar(name, tuple(Var(v) for v in params))


def _project(props: list[ArithProp], scope: list[str],
             params: tuple[str, ...]) -> ArithProp:
    """Restrict the known constraints to the kept parameters."""
    constraint = conj(props)
    if isinstance(constraint, Top):
        return constraint
    dropped = [v for v in scope
               if v not in params and v in free_arith_vars(constraint)]
    if not dropped:
        return constraint
    projected = arith.project_exists(dropped, constraint)
    if projected is not None:
        return projected
    # non-linear constraint: keep the conjuncts that survive verbatim
    from .core import conjuncts
    kept = [p for p in conjuncts(constraint)
            if free_arith_vars(p) <= set(params)]
    return conj(kept)


def internalize(sig: Signature) -> InternalizedSignature:
    """Rewrite every definition into alternating form.

    Generated names are %0, %1, ... in depth-first discovery order, so the
    output is deterministic for a given input signature.
    """
    p = _Pass()
    out: list[TypeDef] = []
    for d in sig.defs:
        p.new_defs = []
        props = [] if isinstance(d.constraint, Top) else [d.constraint]
        body = p.node(d.body, d.name, "", list(d.params), props)
        out.append(replace(d, body=body))
        out.extend(sorted(p.new_defs, key=lambda nd: int(nd.name[1:])))
    internal = frozenset(p.origins)
    return InternalizedSignature(
        Signature(tuple(out), sig.eqdecls), p.origins, internal, p.counter)


def internalize_query(isig: InternalizedSignature, vars_: tuple[str, ...],
                      constraint: ArithProp, t: SessionType,
                      ) -> tuple[InternalizedSignature, TVar]:
    """Name a query type so the equality engine starts at a variable pair.

    A type that is already an instantiation is returned unchanged; anything
    else becomes a fresh definition abstracted over the whole query context.
    """
    if isinstance(t, TVar):
        return isig, t
    p = _Pass(isig.next_id)
    name = p.alloc("<query>", "")
    props = [] if isinstance(constraint, Top) else [constraint]
    body = p.node(t, "<query>", "", list(vars_), props)
    new_defs = [TypeDef(name, vars_, constraint, body)] + \
        sorted(p.new_defs, key=lambda nd: int(nd.name[1:]))
    sig = isig.signature
    out = InternalizedSignature(
        Signature(sig.defs + tuple(new_defs), sig.eqdecls),
        {**isig.origins, **p.origins},
        isig.internal_names | frozenset(p.origins),
        p.counter)
    return out, TVar(name, tuple(Var(v) for v in vars_))
