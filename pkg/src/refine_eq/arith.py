"""Decision procedures for the index arithmetic.

Linear propositions over naturals are decided exactly by quantifier
elimination (Cooper's method).  Two standing optimizations:

* every quantifier ranges over naturals, so each eliminated variable gets a
  lower bound up front and the "minus infinity" disjunct of the classical
  construction vanishes;
* conjuncts of the shape x = e (unit coefficient) are eliminated by
  substituting e for x, to a fixpoint, before the full case analysis runs.

Syntactically non-linear propositions fall back to a normalizer that expands
terms into multinomials: e1 = e2 is affirmed when every coefficient of
e1 - e2 is zero, e1 >= e2 when every coefficient is non-negative.  These
rules are sound over naturals but incomplete; anything they cannot settle is
reported as unknown, never guessed.

All coefficient arithmetic uses Python integers, so there is no overflow to
guard against; the budget caps formula growth instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

from .core import (
    Add, And, ArithExpr, ArithProp, Bot, Const, Dvd, Eq, Gt, GroundSubst, Mul,
    Not, Or, PropExists, PropForall, Sub, Top, Var, conjuncts,
)


class NonLinearError(Exception):
    """A variable-times-variable product reached the linear solver."""


class BudgetExceeded(Exception):
    """An intermediate formula outgrew the configured resource cap."""


@dataclass
class Budget:
    """Per-call resource budget: number of atoms materialized during QE."""

    limit: int = 10 ** 6
    used: int = 0

    def tick(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.limit:
            raise BudgetExceeded(f"formula budget exceeded ({self.used} atoms)")


# ---------------------------------------------------------------------------
# multinomials (non-linear normal form)
# ---------------------------------------------------------------------------

Monomial = tuple[str, ...]  # sorted variable names, with repetition


@dataclass(frozen=True)
class Multinomial:
    """Sum-of-monomials normal form; the empty monomial is the constant."""

    coeffs: tuple[tuple[Monomial, int], ...]

    @property
    def as_dict(self) -> dict[Monomial, int]:
        return dict(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def all_nonnegative(self) -> bool:
        return all(c >= 0 for _, c in self.coeffs)

    def degree(self) -> int:
        return max((len(m) for m, _ in self.coeffs), default=0)

    def constant(self) -> int:
        return self.as_dict.get((), 0)


def _mn(e: ArithExpr) -> dict[Monomial, int]:
    match e:
        case Const(v):
            return {(): v} if v else {}
        case Var(n):
            return {(n,): 1}
        case Add(l, r):
            return _mn_add(_mn(l), _mn(r), 1)
        case Sub(l, r):
            return _mn_add(_mn(l), _mn(r), -1)
        case Mul(l, r):
            return _mn_mul(_mn(l), _mn(r))
        case _:
            raise TypeError(f"not an arithmetic expression: {e!r}")


def _mn_add(a: dict, b: dict, sign: int) -> dict:
    out = dict(a)
    for m, c in b.items():
        v = out.get(m, 0) + sign * c
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def _mn_mul(a: dict, b: dict) -> dict:
    out: dict[Monomial, int] = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = tuple(sorted(ma + mb))
            v = out.get(m, 0) + ca * cb
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def normalize_multinomial(e: ArithExpr) -> Multinomial:
    """Expand an expression (products allowed) into canonical multinomial form."""
    d = _mn(e)
    return Multinomial(tuple(sorted(d.items())))


def affirm_eq(e1: ArithExpr, e2: ArithExpr) -> bool:
    """Sound check that e1 = e2 identically: e1 - e2 normalizes to zero."""
    return normalize_multinomial(Sub(e1, e2)).is_zero()


def affirm_ge(e1: ArithExpr, e2: ArithExpr) -> bool:
    """Sound check that e1 >= e2 over naturals: all coefficients non-negative."""
    return normalize_multinomial(Sub(e1, e2)).all_nonnegative()


# ---------------------------------------------------------------------------
# ground evaluation
# ---------------------------------------------------------------------------

def eval_ground(e: ArithExpr, subst: GroundSubst) -> int:
    """Evaluate a ground-after-substitution expression; differences are over Z."""
    match e:
        case Const(v):
            return v
        case Var(n):
            return subst[n]
        case Add(l, r):
            return eval_ground(l, subst) + eval_ground(r, subst)
        case Sub(l, r):
            return eval_ground(l, subst) - eval_ground(r, subst)
        case Mul(l, r):
            return eval_ground(l, subst) * eval_ground(r, subst)
        case _:
            raise TypeError(f"not an arithmetic expression: {e!r}")


def eval_ground_prop(p: ArithProp, subst: GroundSubst) -> bool:
    """Evaluate a quantifier-free proposition under a total ground substitution."""
    match p:
        case Top():
            return True
        case Bot():
            return False
        case Eq(l, r):
            return eval_ground(l, subst) == eval_ground(r, subst)
        case Gt(l, r):
            return eval_ground(l, subst) > eval_ground(r, subst)
        case And(l, r):
            return eval_ground_prop(l, subst) and eval_ground_prop(r, subst)
        case Or(l, r):
            return eval_ground_prop(l, subst) or eval_ground_prop(r, subst)
        case Not(b):
            return not eval_ground_prop(b, subst)
        case Dvd(d, e):
            return eval_ground(e, subst) % d == 0
        case PropExists() | PropForall():
            raise ValueError("eval_ground_prop is quantifier-free; use decide_closed")
        case _:
            raise TypeError(f"not a proposition: {p!r}")


def is_linear(x: Union[ArithExpr, ArithProp]) -> bool:
    """True when no atom multiplies variables together (after expansion)."""
    try:
        _require_linear(x)
        return True
    except NonLinearError:
        return False


def _require_linear(x) -> None:
    match x:
        case ArithExpr():
            if normalize_multinomial(x).degree() > 1:
                raise NonLinearError(f"non-linear term: {x!r}")
        case Eq(l, r) | Gt(l, r):
            _require_linear(l)
            _require_linear(r)
        case And(l, r) | Or(l, r):
            _require_linear(l)
            _require_linear(r)
        case Not(b):
            _require_linear(b)
        case PropExists(_, b) | PropForall(_, b):
            _require_linear(b)
        case Dvd(_, e):
            _require_linear(e)
        case Top() | Bot():
            pass
        case _:
            raise TypeError(f"not an AST node: {x!r}")


# ---------------------------------------------------------------------------
# linear forms
# ---------------------------------------------------------------------------
# A linear form is (const, ((var, coeff), ...)) with sorted vars, no zeros.

LF = tuple[int, tuple[tuple[str, int], ...]]


def _lf_make(const: int, coeffs: dict[str, int]) -> LF:
    return (const, tuple(sorted((v, c) for v, c in coeffs.items() if c)))


def _lf_from_mn(d: dict[Monomial, int]) -> LF:
    const = 0
    coeffs: dict[str, int] = {}
    for m, c in d.items():
        if len(m) == 0:
            const = c
        elif len(m) == 1:
            coeffs[m[0]] = coeffs.get(m[0], 0) + c
        else:
            raise NonLinearError(f"non-linear monomial {m}")
    return _lf_make(const, coeffs)


def _lf_expr(e: ArithExpr) -> LF:
    return _lf_from_mn(_mn(e))


def _lf_add(a: LF, b: LF, sign: int = 1) -> LF:
    coeffs = dict(a[1])
    for v, c in b[1]:
        coeffs[v] = coeffs.get(v, 0) + sign * c
    return _lf_make(a[0] + sign * b[0], coeffs)


def _lf_neg(a: LF) -> LF:
    return (-a[0], tuple((v, -c) for v, c in a[1]))


def _lf_scale(a: LF, k: int) -> LF:
    if k == 1:
        return a
    return (a[0] * k, tuple((v, c * k) for v, c in a[1]))


def _lf_shift(a: LF, k: int) -> LF:
    return (a[0] + k, a[1])


def _lf_coeff(a: LF, x: str) -> int:
    return dict(a[1]).get(x, 0)


def _lf_drop(a: LF, x: str) -> LF:
    return (a[0], tuple((v, c) for v, c in a[1] if v != x))


def _lf_subst(a: LF, x: str, b: LF) -> LF:
    c = _lf_coeff(a, x)
    if c == 0:
        return a
    return _lf_add(_lf_drop(a, x), _lf_scale(b, c))


def _lf_is_const(a: LF) -> bool:
    return not a[1]


# ---------------------------------------------------------------------------
# solver formula nodes
# ---------------------------------------------------------------------------
# ('true',) ('false',)
# ('and', parts) ('or', parts)
# ('eq', lf)  lf = 0        ('ne', lf)  lf != 0       ('gt', lf)  lf > 0
# ('dvd', d, lf)  d | lf    ('ndvd', d, lf)
# ('exists', x, node) ('forall', x, node)   with x over naturals

TRUE = ("true",)
FALSE = ("false",)


class _Conv:
    """ArithProp -> solver nodes, in negation normal form.

    Bound variables are renamed to solver-private names so nesting and
    shadowing cannot confuse the elimination order.
    """

    def __init__(self) -> None:
        self.counter = 0

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base}#{self.counter}"

    def conv(self, p: ArithProp, pos: bool, env: dict[str, str]) -> tuple:
        match p:
            case Top():
                return TRUE if pos else FALSE
            case Bot():
                return FALSE if pos else TRUE
            case Eq(l, r):
                lf = _lf_add(self.lin(l, env), self.lin(r, env), -1)
                return ("eq", lf) if pos else ("ne", lf)
            case Gt(l, r):
                lf = _lf_add(self.lin(l, env), self.lin(r, env), -1)
                # not (l > r)  <=>  r - l + 1 > 0
                return ("gt", lf) if pos else ("gt", _lf_shift(_lf_neg(lf), 1))
            case And(l, r):
                a, b = self.conv(l, pos, env), self.conv(r, pos, env)
                return _mk_and((a, b)) if pos else _mk_or((a, b))
            case Or(l, r):
                a, b = self.conv(l, pos, env), self.conv(r, pos, env)
                return _mk_or((a, b)) if pos else _mk_and((a, b))
            case Not(b):
                return self.conv(b, not pos, env)
            case PropExists(v, b):
                v2 = self.fresh(v)
                body = self.conv(b, pos, {**env, v: v2})
                return ("exists" if pos else "forall", v2, body)
            case PropForall(v, b):
                v2 = self.fresh(v)
                body = self.conv(b, pos, {**env, v: v2})
                return ("forall" if pos else "exists", v2, body)
            case Dvd(d, e):
                lf = self.lin(e, env)
                return ("dvd", d, lf) if pos else ("ndvd", d, lf)
            case _:
                raise TypeError(f"not a proposition: {p!r}")

    def lin(self, e: ArithExpr, env: dict[str, str]) -> LF:
        lf = _lf_expr(e)
        coeffs = {env.get(v, v): c for v, c in lf[1]}
        return _lf_make(lf[0], coeffs)


def _mk_and(parts) -> tuple:
    flat: list = []
    for p in parts:
        if p == TRUE:
            continue
        if p == FALSE:
            return FALSE
        if p[0] == "and":
            flat.extend(p[1])
        else:
            flat.append(p)
    flat = list(dict.fromkeys(flat))
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return ("and", tuple(flat))


def _mk_or(parts) -> tuple:
    flat: list = []
    for p in parts:
        if p == FALSE:
            continue
        if p == TRUE:
            return TRUE
        if p[0] == "or":
            flat.extend(p[1])
        else:
            flat.append(p)
    flat = list(dict.fromkeys(flat))
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return ("or", tuple(flat))


def _simplify_atom(node: tuple) -> tuple:
    """Constant folding plus pruning justified by the naturals convention.

    Every surface variable denotes a natural, so a form whose variable
    coefficients are all non-negative is bounded below by its constant term,
    and dually.
    """
    tag = node[0]
    lf = node[-1]
    const, coeffs = lf
    if not coeffs:
        match tag:
            case "eq":
                return TRUE if const == 0 else FALSE
            case "ne":
                return TRUE if const != 0 else FALSE
            case "gt":
                return TRUE if const > 0 else FALSE
            case "dvd":
                return TRUE if const % node[1] == 0 else FALSE
            case "ndvd":
                return TRUE if const % node[1] != 0 else FALSE
    lo = const if all(c >= 0 for _, c in coeffs) else None  # value >= lo
    hi = const if all(c <= 0 for _, c in coeffs) else None  # value <= hi
    match tag:
        case "eq":
            if (lo is not None and lo > 0) or (hi is not None and hi < 0):
                return FALSE
            g = math.gcd(*(abs(c) for _, c in coeffs))
            if g > 1:
                if const % g:
                    return FALSE
                return ("eq", (const // g, tuple((v, c // g) for v, c in coeffs)))
        case "ne":
            if (lo is not None and lo > 0) or (hi is not None and hi < 0):
                return TRUE
        case "gt":
            if lo is not None and lo > 0:
                return TRUE
            if hi is not None and hi <= 0:
                return FALSE
        case "dvd" | "ndvd":
            d = node[1]
            if d == 1:
                return TRUE if tag == "dvd" else FALSE
            lf2 = (const % d, lf[1])
            return (tag, d, lf2)
    return node


def _simplify(node: tuple) -> tuple:
    match node[0]:
        case "true" | "false":
            return node
        case "and":
            return _mk_and(tuple(_simplify(p) for p in node[1]))
        case "or":
            return _mk_or(tuple(_simplify(p) for p in node[1]))
        case "exists" | "forall":
            return (node[0], node[1], _simplify(node[2]))
        case _:
            return _simplify_atom(node)


def _negate(node: tuple) -> tuple:
    match node[0]:
        case "true":
            return FALSE
        case "false":
            return TRUE
        case "and":
            return _mk_or(tuple(_negate(p) for p in node[1]))
        case "or":
            return _mk_and(tuple(_negate(p) for p in node[1]))
        case "eq":
            return ("ne", node[1])
        case "ne":
            return ("eq", node[1])
        case "gt":
            return _simplify_atom(("gt", _lf_shift(_lf_neg(node[1]), 1)))
        case "dvd":
            return ("ndvd", node[1], node[2])
        case "ndvd":
            return ("dvd", node[1], node[2])
        case _:
            raise ValueError(f"cannot negate quantified node {node[0]}")


def _node_vars(node: tuple, out: set[str]) -> None:
    match node[0]:
        case "true" | "false":
            pass
        case "and" | "or":
            for p in node[1]:
                _node_vars(p, out)
        case "exists" | "forall":
            _node_vars(node[2], out)
        case _:
            out.update(v for v, _ in node[-1][1])


def _contains_var(node: tuple, x: str) -> bool:
    out: set[str] = set()
    _node_vars(node, out)
    return x in out


def _map_atoms(node: tuple, f) -> tuple:
    match node[0]:
        case "true" | "false":
            return node
        case "and":
            return _mk_and(tuple(_map_atoms(p, f) for p in node[1]))
        case "or":
            return _mk_or(tuple(_map_atoms(p, f) for p in node[1]))
        case _:
            return f(node)


# ---------------------------------------------------------------------------
# Cooper elimination over naturals
# ---------------------------------------------------------------------------

def _eliminate(node: tuple, budget: Budget) -> tuple:
    match node[0]:
        case "true" | "false":
            return node
        case "and":
            return _mk_and(tuple(_eliminate(p, budget) for p in node[1]))
        case "or":
            return _mk_or(tuple(_eliminate(p, budget) for p in node[1]))
        case "exists":
            return _cooper_exists(node[1], _eliminate(node[2], budget), budget)
        case "forall":
            inner = _negate(_eliminate(node[2], budget))
            return _negate(_cooper_exists(node[1], inner, budget))
        case _:
            return _simplify_atom(node)


def _cooper_exists(x: str, matrix: tuple, budget: Budget) -> tuple:
    matrix = _simplify(matrix)
    if not _contains_var(matrix, x):
        return matrix  # the domain of naturals is nonempty
    if matrix[0] == "or":
        return _mk_or(tuple(_cooper_exists(x, p, budget) for p in matrix[1]))
    return _cooper_exists_conj(x, matrix, budget)


def _cooper_exists_conj(x: str, matrix: tuple, budget: Budget) -> tuple:
    # Equality-substitution optimization: a top-level conjunct x = e (unit
    # coefficient) lets us replace x by e outright, keeping the naturals
    # side condition e >= 0.
    parts = list(matrix[1]) if matrix[0] == "and" else [matrix]
    for i, p in enumerate(parts):
        if p[0] == "eq":
            c = _lf_coeff(p[1], x)
            if c in (1, -1):
                rest = _lf_drop(p[1], x)
                repl = _lf_neg(rest) if c == 1 else rest
                budget.tick(len(parts))
                kept = [
                    _map_atoms(q, lambda a: _subst_atom(a, x, repl))
                    for j, q in enumerate(parts) if j != i
                ]
                kept.append(_simplify_atom(("gt", _lf_shift(repl, 1))))
                return _cooper_exists(x, _mk_and(tuple(kept)), budget)

    # Full case analysis.  x over naturals contributes the lower bound
    # x > -1, which kills the minus-infinity disjunct of the classical
    # construction, so only boundary points need to be enumerated.
    parts.append(("gt", _lf_make(1, {x: 1})))
    matrix = _mk_and(tuple(parts))

    lam = 1
    for a in _atoms_of(matrix):
        c = _lf_coeff(a[-1], x)
        if c:
            lam = lam * abs(c) // math.gcd(lam, abs(c))

    def rescale(atom: tuple) -> tuple:
        lf = atom[-1]
        c = _lf_coeff(lf, x)
        if c == 0:
            return atom
        k = lam // abs(c)
        sign = 1 if c > 0 else -1
        r = _lf_scale(_lf_drop(lf, x), k)
        t = _lf_scale(r, sign)
        match atom[0]:
            case "eq":
                return ("eq*", t)      # y + t = 0
            case "ne":
                return ("ne*", t)      # y + t != 0
            case "gt":
                if sign > 0:
                    return ("lo*", _lf_neg(r))   # y > -k*r
                return ("hi*", r)                # y < k*r
            case "dvd":
                return ("dvd*", atom[1] * k, t)  # kd | y + t
            case "ndvd":
                return ("ndvd*", atom[1] * k, t)
        raise AssertionError(atom)

    scaled = _map_atoms(matrix, rescale)

    delta = lam
    bterms: list[LF] = []
    for a in _atoms_of(scaled):
        match a[0]:
            case "dvd*" | "ndvd*":
                delta = delta * a[1] // math.gcd(delta, a[1])
            case "lo*":
                bterms.append(a[1])
            case "eq*":
                bterms.append(_lf_shift(_lf_neg(a[1]), -1))
            case "ne*":
                bterms.append(_lf_neg(a[1]))
    bterms = list(dict.fromkeys(bterms))

    natoms = sum(1 for _ in _atoms_of(scaled))
    budget.tick(len(bterms) * delta * max(natoms, 1))

    def inst(atom: tuple, s: LF) -> tuple:
        match atom[0]:
            case "eq*":
                return _simplify_atom(("eq", _lf_add(s, atom[1])))
            case "ne*":
                return _simplify_atom(("ne", _lf_add(s, atom[1])))
            case "lo*":
                return _simplify_atom(("gt", _lf_add(s, atom[1], -1)))
            case "hi*":
                return _simplify_atom(("gt", _lf_add(atom[1], s, -1)))
            case "dvd*":
                return _simplify_atom(("dvd", atom[1], _lf_add(s, atom[2])))
            case "ndvd*":
                return _simplify_atom(("ndvd", atom[1], _lf_add(s, atom[2])))
        return atom  # x-free atom

    disjuncts = []
    for b in bterms:
        for j in range(1, delta + 1):
            s = _lf_shift(b, j)
            # lam | y constrains y to actual multiples of lam
            head = TRUE
            if lam > 1:
                head = _simplify_atom(("dvd", lam, s))
            part = _mk_and((head, _map_atoms(scaled, lambda a: inst(a, s))))
            disjuncts.append(part)
    return _mk_or(tuple(disjuncts))


def _subst_atom(atom: tuple, x: str, repl: LF) -> tuple:
    lf = atom[-1]
    if _lf_coeff(lf, x) == 0:
        return atom
    lf2 = _lf_subst(lf, x, repl)
    return _simplify_atom(atom[:-1] + (lf2,))


def _atoms_of(node: tuple):
    match node[0]:
        case "true" | "false":
            return
        case "and" | "or":
            for p in node[1]:
                yield from _atoms_of(p)
        case _:
            yield node


def _eval_qf(node: tuple) -> bool:
    match node[0]:
        case "true":
            return True
        case "false":
            return False
        case "and":
            return all(_eval_qf(p) for p in node[1])
        case "or":
            return any(_eval_qf(p) for p in node[1])
        case _:
            a = _simplify_atom(node)
            if a == TRUE:
                return True
            if a == FALSE:
                return False
            raise AssertionError(f"non-ground atom survived elimination: {node}")


# ---------------------------------------------------------------------------
# back-conversion to surface propositions
# ---------------------------------------------------------------------------

def _lf_to_expr(lf: LF) -> ArithExpr:
    e: Optional[ArithExpr] = None
    for v, c in lf[1]:
        term = Var(v) if c == 1 else Mul(Const(c), Var(v))
        e = term if e is None else Add(e, term)
    if lf[0] or e is None:
        ce = Const(lf[0])
        e = ce if e is None else Add(e, ce)
    return e


def _lf_sides(lf: LF) -> tuple[ArithExpr, ArithExpr]:
    """Split lf into (positive part, negated negative part) for readability."""
    pos = (max(lf[0], 0), tuple((v, c) for v, c in lf[1] if c > 0))
    neg = (max(-lf[0], 0), tuple((v, -c) for v, c in lf[1] if c < 0))
    return _lf_to_expr(pos), _lf_to_expr(neg)


def node_to_prop(node: tuple) -> ArithProp:
    match node[0]:
        case "true":
            return Top()
        case "false":
            return Bot()
        case "and":
            out = node_to_prop(node[1][0])
            for p in node[1][1:]:
                out = And(out, node_to_prop(p))
            return out
        case "or":
            out = node_to_prop(node[1][0])
            for p in node[1][1:]:
                out = Or(out, node_to_prop(p))
            return out
        case "eq":
            l, r = _lf_sides(node[1])
            return Eq(l, r)
        case "ne":
            l, r = _lf_sides(node[1])
            return Not(Eq(l, r))
        case "gt":
            l, r = _lf_sides(node[1])
            return Gt(l, r)
        case "dvd":
            return Dvd(node[1], _lf_to_expr(node[2]))
        case "ndvd":
            return Not(Dvd(node[1], _lf_to_expr(node[2])))
        case _:
            raise AssertionError(f"quantifier survived elimination: {node}")


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def eliminate(p: ArithProp, budget: Optional[Budget] = None) -> ArithProp:
    """Quantifier elimination over naturals; requires a linear proposition."""
    budget = budget or Budget()
    node = _Conv().conv(p, True, {})
    return node_to_prop(_simplify(_eliminate(node, budget)))


def decide_closed(p: ArithProp, budget: Optional[Budget] = None) -> bool:
    """Truth over naturals of a proposition with no free variables.

    Ground quantifier-free propositions (including non-linear ones) are
    evaluated directly; quantified ones go through elimination and must be
    linear.
    """
    if free_vars_prop(p):
        raise ValueError(f"decide_closed requires a closed proposition: {p!r}")
    if _quantifier_free(p):
        return eval_ground_prop(p, {})
    budget = budget or Budget()
    node = _Conv().conv(p, True, {})
    return _eval_qf(_eliminate(node, budget))


def _quantifier_free(p: ArithProp) -> bool:
    match p:
        case PropExists() | PropForall():
            return False
        case And(l, r) | Or(l, r):
            return _quantifier_free(l) and _quantifier_free(r)
        case Not(b):
            return _quantifier_free(b)
        case _:
            return True


def free_vars_prop(p: ArithProp) -> set[str]:
    from .core import free_arith_vars
    return free_arith_vars(p)


def entails(vars: Sequence[str], constraint: ArithProp, phi: ArithProp,
            budget: Optional[Budget] = None) -> Optional[bool]:
    """Does forall vars (over naturals), constraint imply phi?

    Returns True/False for linear inputs, None when the non-linear fallback
    cannot settle the question or the budget runs out.
    """
    if budget is None:
        return _entails_cached(tuple(sorted(set(vars))), constraint, phi)
    return _entails(tuple(sorted(set(vars))), constraint, phi, budget)


@lru_cache(maxsize=200_000)
def _entails_cached(vars: tuple[str, ...], constraint: ArithProp,
                    phi: ArithProp) -> Optional[bool]:
    return _entails(vars, constraint, phi, Budget())


def _entails(vars: tuple[str, ...], constraint: ArithProp, phi: ArithProp,
             budget: Budget) -> Optional[bool]:
    try:
        conv = _Conv()
        counter = _mk_and((conv.conv(constraint, True, {}),
                           conv.conv(phi, False, {})))
        node = counter
        for v in vars:
            node = ("exists", v, node)
        return not _eval_qf(_eliminate(node, budget))
    except NonLinearError:
        return _entails_nonlinear(vars, constraint, phi, budget)
    except BudgetExceeded:
        return None


def _entails_nonlinear(vars, constraint, phi, budget) -> Optional[bool]:
    if _affirm(phi):
        return True
    cs = conjuncts(constraint)
    if any(_refute(c) for c in cs):
        return True  # contradictory context entails everything
    if is_linear(constraint):
        try:
            node = _Conv().conv(constraint, True, {})
            for v in vars:
                node = ("exists", v, node)
            sat = _eval_qf(_eliminate(node, budget))
        except BudgetExceeded:
            return None
        if not sat:
            return True
        if _refute(phi):
            return False
    elif all(_affirm(c) for c in cs) and _refute(phi):
        return False
    return None


def _affirm(p: ArithProp) -> bool:
    """Sound affirmation of a (possibly non-linear) quantifier-free proposition."""
    match p:
        case Top():
            return True
        case Eq(l, r):
            return affirm_eq(l, r)
        case Gt(l, r):
            # l > r over naturals iff l - r - 1 >= 0
            return normalize_multinomial(Sub(Sub(l, r), Const(1))).all_nonnegative()
        case And(l, r):
            return _affirm(l) and _affirm(r)
        case Or(l, r):
            return _affirm(l) or _affirm(r)
        case Not(b):
            return _refute(b)
        case _:
            return False


def _refute(p: ArithProp) -> bool:
    """Sound refutation: p is false under every natural valuation."""
    match p:
        case Bot():
            return True
        case Eq(l, r):
            m = normalize_multinomial(Sub(l, r))
            if m.all_nonnegative() and m.constant() > 0:
                return True
            n = normalize_multinomial(Sub(r, l))
            return n.all_nonnegative() and n.constant() > 0
        case Gt(l, r):
            # refuted when l - r <= 0 identically
            return all(c <= 0 for _, c in normalize_multinomial(Sub(l, r)).coeffs)
        case And(l, r):
            return _refute(l) or _refute(r)
        case Or(l, r):
            return _refute(l) and _refute(r)
        case Not(b):
            return _affirm(b)
        case _:
            return False


def project_exists(drop: Sequence[str], p: ArithProp,
                   budget: Optional[Budget] = None) -> Optional[ArithProp]:
    """Existentially project the given variables out of a linear proposition.

    Returns None when the proposition is non-linear or the budget runs out.
    """
    budget = budget or Budget()
    try:
        node = _Conv().conv(p, True, {})
        for v in drop:
            node = ("exists", v, node)
        return node_to_prop(_simplify(_eliminate(node, budget)))
    except (NonLinearError, BudgetExceeded):
        return None
