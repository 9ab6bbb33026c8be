"""Two-counter machines: simulator and the reduction to type equality.

The encoder emits a pair of definition families T1..Tm / T1'..Tm' that agree
on every instruction except halt, where one side loops on label `l` and the
other on `l'`.  Checking T1[c1,c2] == T1'[c1,c2] therefore mirrors
non-halting from (1, c1, c2): a halting run reaches the distinguishable
pair, a diverging one never does.

The halt case inlines one unfolding of the infinite loop (+{l: Tinf}
instead of a bare alias to Tinf) because definitions must be contractive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .core import (
    Add, Assert, Const, Eq, Gt, Plus, Signature, Sub, TOP, TVar, TypeDef, Var,
)


# ---------------------------------------------------------------------------
# machines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Inc:
    counter: int  # 1 or 2
    goto: int


@dataclass(frozen=True)
class IfZeroElseDec:
    counter: int
    goto_zero: int   # target when the counter is zero
    goto_dec: int    # target after decrementing otherwise


@dataclass(frozen=True)
class Halt:
    pass


Instruction = Union[Inc, IfZeroElseDec, Halt]


@dataclass(frozen=True)
class Machine:
    instructions: tuple[Instruction, ...]

    def __post_init__(self) -> None:
        if not self.instructions:
            raise ValueError("a machine needs at least one instruction")
        m = len(self.instructions)
        for i, ins in enumerate(self.instructions, start=1):
            for target in _targets(ins):
                if not 1 <= target <= m:
                    raise ValueError(
                        f"instruction {i}: goto target {target} out of range 1..{m}")
            if isinstance(ins, (Inc, IfZeroElseDec)) and ins.counter not in (1, 2):
                raise ValueError(f"instruction {i}: counter must be 1 or 2")

    def __len__(self) -> int:
        return len(self.instructions)


def _targets(ins: Instruction) -> tuple[int, ...]:
    match ins:
        case Inc(_, k):
            return (k,)
        case IfZeroElseDec(_, k, l):
            return (k, l)
        case Halt():
            return ()
    raise TypeError(ins)


@dataclass(frozen=True)
class Config:
    instr: int  # 1-based
    c1: int
    c2: int


@dataclass(frozen=True)
class RunResult:
    halted: bool
    steps: int  # transitions executed before halting (meaningful when halted)


def step(machine: Machine, cfg: Config) -> Optional[Config]:
    """Execute one instruction; None when the current instruction is halt."""
    ins = machine.instructions[cfg.instr - 1]
    match ins:
        case Halt():
            return None
        case Inc(1, k):
            return Config(k, cfg.c1 + 1, cfg.c2)
        case Inc(2, k):
            return Config(k, cfg.c1, cfg.c2 + 1)
        case IfZeroElseDec(1, k, l):
            if cfg.c1 == 0:
                return Config(k, cfg.c1, cfg.c2)
            return Config(l, cfg.c1 - 1, cfg.c2)
        case IfZeroElseDec(2, k, l):
            if cfg.c2 == 0:
                return Config(k, cfg.c1, cfg.c2)
            return Config(l, cfg.c1, cfg.c2 - 1)
    raise TypeError(ins)


def run(machine: Machine, c1: int, c2: int, max_steps: int) -> RunResult:
    """Iterate from (1, c1, c2); halted=False means still running at the cap."""
    cfg = Config(1, c1, c2)
    for n in range(max_steps + 1):
        nxt = step(machine, cfg)
        if nxt is None:
            return RunResult(True, n)
        cfg = nxt
    return RunResult(False, max_steps)


# ---------------------------------------------------------------------------
# machine text format: INC c1 GOTO k | TEST c2 ZERO k DEC l | HALT
# ---------------------------------------------------------------------------

def parse_machine(text: str) -> Machine:
    out: list[Instruction] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.upper().split()
        try:
            match words:
                case ["INC", cnt, "GOTO", k]:
                    out.append(Inc(_counter(cnt), int(k)))
                case ["TEST", cnt, "ZERO", k, "DEC", l]:
                    out.append(IfZeroElseDec(_counter(cnt), int(k), int(l)))
                case ["HALT"]:
                    out.append(Halt())
                case _:
                    raise ValueError(f"unrecognized instruction {line!r}")
        except ValueError as err:
            raise ValueError(f"line {lineno}: {err}") from None
    return Machine(tuple(out))


def _counter(word: str) -> int:
    if word in ("C1", "1"):
        return 1
    if word in ("C2", "2"):
        return 2
    raise ValueError(f"bad counter {word!r} (want c1 or c2)")


def print_machine(machine: Machine) -> str:
    lines = []
    for ins in machine.instructions:
        match ins:
            case Inc(j, k):
                lines.append(f"INC c{j} GOTO {k}")
            case IfZeroElseDec(j, k, l):
                lines.append(f"TEST c{j} ZERO {k} DEC {l}")
            case Halt():
                lines.append("HALT")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# the reduction
# ---------------------------------------------------------------------------

PARAMS = ("c1", "c2")


def encode(machine: Machine, isorec: bool = False
           ) -> tuple[Signature, TVar, TVar]:
    """Encode a machine as a signature plus the root pair with free counters.

    With `isorec`, every definition body is wrapped in +{unfold: _} so that
    each definitional unfolding is marked by an explicit message.
    """
    c1, c2 = Var("c1"), Var("c2")
    defs: list[TypeDef] = []

    def both(i: int, make) -> None:
        defs.append(TypeDef(f"T{i}", PARAMS, TOP, make(False)))
        defs.append(TypeDef(f"T{i}'", PARAMS, TOP, make(True)))

    for i, ins in enumerate(machine.instructions, start=1):
        match ins:
            case Inc(j, k):
                label = f"inc{j}"
                args = (Add(c1, Const(1)), c2) if j == 1 else (c1, Add(c2, Const(1)))

                def make(primed: bool, label=label, args=args, k=k):
                    return Plus(((label, TVar(_t(k, primed), args)),))
            case IfZeroElseDec(j, k, l):
                cj = c1 if j == 1 else c2
                dec = (Sub(c1, Const(1)), c2) if j == 1 else (c1, Sub(c2, Const(1)))

                def make(primed: bool, j=j, cj=cj, dec=dec, k=k, l=l):
                    return Plus((
                        (f"zero{j}", Assert(Eq(cj, Const(0)),
                                            TVar(_t(k, primed), (c1, c2)))),
                        (f"dec{j}", Assert(Gt(cj, Const(0)),
                                           TVar(_t(l, primed), dec))),
                    ))
            case Halt():
                def make(primed: bool):
                    inf = "Tinf'" if primed else "Tinf"
                    label = "l'" if primed else "l"
                    return Plus(((label, TVar(inf, ())),))
        both(i, make)

    defs.append(TypeDef("Tinf", (), TOP, Plus((("l", TVar("Tinf", ())),))))
    defs.append(TypeDef("Tinf'", (), TOP, Plus((("l'", TVar("Tinf'", ())),))))

    if isorec:
        defs = [TypeDef(d.name, d.params, d.constraint,
                        Plus((("unfold", d.body),))) for d in defs]
        # +{unfold: body} is not in alternating form when body is itself a
        # constructor, but the internalization pass restores that.

    sig = Signature(tuple(defs))
    return sig, TVar("T1", (c1, c2)), TVar("T1'", (c1, c2))


def _t(i: int, primed: bool) -> str:
    return f"T{i}'" if primed else f"T{i}"
