"""Target language: a small RISC instruction set with mutex locks.

Programs are lists of optionally labelled instructions; labels are
naturals.  The virtual machine shares lock and mode-state semantics with the
source language (see :func:`while_lang.lock_acq_step`).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .core import LockInterp, Mem, ModeState
from .while_lang import (OPS, Footprint, NO_FOOTPRINT, SteppedStop, apply_op,
                         lock_acq_step, lock_rel_step)

DEFAULT_REGISTERS = 8


@dataclass(frozen=True)
class Load:
    reg: int
    var: str


@dataclass(frozen=True)
class Store:
    var: str
    reg: int


@dataclass(frozen=True)
class Jmp:
    label: int


@dataclass(frozen=True)
class Jz:
    label: int
    reg: int


@dataclass(frozen=True)
class Nop:
    pass


@dataclass(frozen=True)
class MoveK:
    reg: int
    value: int


@dataclass(frozen=True)
class MoveR:
    dst: int
    src: int


@dataclass(frozen=True)
class Op:
    op: str
    dst: int
    src: int


@dataclass(frozen=True)
class LockAcq:
    lock: str


@dataclass(frozen=True)
class LockRel:
    lock: str


Instr = Union[Load, Store, Jmp, Jz, Nop, MoveK, MoveR, Op, LockAcq, LockRel]
Label = Optional[int]


class UnboundLabel(KeyError):
    pass


class DuplicateLabel(ValueError):
    pass


@dataclass(frozen=True)
class RiscProgram:
    """Labelled instruction list plus its resolved label map.

    ``exit_label`` (if any) resolves to ``len(self)``, the termination
    address.  ``epilogue`` holds the pcs of control-flow-only ``Jmp``/``Nop``
    instructions that close a compiled fragment; they matter only for pacing.
    """

    instrs: tuple
    exit_label: Label = None
    epilogue: frozenset = frozenset()
    labels: dict = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        instrs = tuple((lab, ins) for lab, ins in self.instrs)
        object.__setattr__(self, "instrs", instrs)
        labels = {}
        for i, (lab, _) in enumerate(instrs):
            if lab is None:
                continue
            if lab in labels or lab == self.exit_label:
                raise DuplicateLabel(lab)
            labels[lab] = i
        if self.exit_label is not None:
            labels[self.exit_label] = len(instrs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "epilogue", frozenset(self.epilogue))

    def __len__(self):
        return len(self.instrs)

    def __getitem__(self, pc: int) -> Instr:
        return self.instrs[pc][1]

    @property
    def code(self) -> list:
        return [ins for _, ins in self.instrs]

    def jump_targets(self) -> set:
        return {ins.label for _, ins in self.instrs if isinstance(ins, (Jmp, Jz))}

    def check_labels(self):
        for lab in sorted(self.jump_targets()):
            if lab not in self.labels:
                raise UnboundLabel(lab)


def resolve(prog: RiscProgram, label: int) -> int:
    try:
        return prog.labels[label]
    except KeyError:
        raise UnboundLabel(label) from None


@dataclass(frozen=True)
class RiscConf:
    pc: int
    prog: RiscProgram
    regs: tuple
    mds: ModeState
    mem: Mem

    @property
    def stopped(self) -> bool:
        return stops(self)


def stops(conf: RiscConf) -> bool:
    return conf.pc >= len(conf.prog)


def init_regs(n: int = DEFAULT_REGISTERS) -> tuple:
    return (0,) * n


def _setreg(regs: tuple, r: int, v: int) -> tuple:
    return regs[:r] + (v,) + regs[r + 1:]


def step_risc(conf: RiscConf, interp: LockInterp) -> tuple[RiscConf, Footprint]:
    pc, prog, regs, mds, mem = conf.pc, conf.prog, conf.regs, conf.mds, conf.mem
    if pc >= len(prog):
        raise SteppedStop(f"pc {pc} is past the end of the program")
    ins = prog.instrs[pc][1]
    t = type(ins)
    fp = NO_FOOTPRINT
    if t is Load:
        regs = _setreg(regs, ins.reg, mem[ins.var])
        fp = Footprint(reads=frozenset([ins.var]))
        pc += 1
    elif t is Store:
        mem = mem.set(ins.var, regs[ins.reg])
        fp = Footprint(writes=frozenset([ins.var]))
        pc += 1
    elif t is Jmp:
        pc = resolve(prog, ins.label)
    elif t is Jz:
        pc = resolve(prog, ins.label) if regs[ins.reg] == 0 else pc + 1
    elif t is Nop:
        pc += 1
    elif t is MoveK:
        regs = _setreg(regs, ins.reg, ins.value)
        pc += 1
    elif t is MoveR:
        regs = _setreg(regs, ins.dst, regs[ins.src])
        pc += 1
    elif t is Op:
        regs = _setreg(regs, ins.dst, apply_op(ins.op, regs[ins.dst], regs[ins.src]))
        pc += 1
    elif t is LockAcq:
        ok, mds, mem, fp = lock_acq_step(mds, mem, ins.lock, interp)
        pc += ok
    elif t is LockRel:
        ok, mds, mem, fp = lock_rel_step(mds, mem, ins.lock, interp)
        pc += ok
    else:
        raise TypeError(ins)
    return RiscConf(pc, prog, regs, mds, mem), fp


# -- textual listing --------------------------------------------------------------

def format_instr(ins: Instr, epilogue: bool = False) -> str:
    t = type(ins)
    mark = "'" if epilogue else ""
    if t is Load:
        return f"Load r{ins.reg} {ins.var}"
    if t is Store:
        return f"Store {ins.var} r{ins.reg}"
    if t is Jmp:
        return f"Jmp{mark} L{ins.label}"
    if t is Jz:
        return f"Jz L{ins.label} r{ins.reg}"
    if t is Nop:
        return f"Nop{mark}"
    if t is MoveK:
        return f"MoveK r{ins.reg} {ins.value}"
    if t is MoveR:
        return f"MoveR r{ins.dst} r{ins.src}"
    if t is Op:
        return f"Op {ins.op} r{ins.dst} r{ins.src}"
    if t is LockAcq:
        return f"LockAcq {ins.lock}"
    if t is LockRel:
        return f"LockRel {ins.lock}"
    raise TypeError(ins)


def format_listing(prog: RiscProgram) -> str:
    """One instruction per line; ``Ln:`` prefixes labels, ``'`` marks epilogues."""
    lines = []
    for pc, (lab, ins) in enumerate(prog.instrs):
        prefix = f"L{lab}:" if lab is not None else ""
        lines.append(f"{prefix:<8}{format_instr(ins, pc in prog.epilogue)}")
    if prog.exit_label is not None:
        lines.append(f".exit L{prog.exit_label}")
    return "\n".join(lines) + "\n"


class AsmError(ValueError):
    pass


_REG = re.compile(r"r(\d+)$")
_LAB = re.compile(r"L(\d+)$")


def _reg(tok: str) -> int:
    m = _REG.match(tok)
    if not m:
        raise AsmError(f"expected register, found {tok!r}")
    return int(m.group(1))


def _lab(tok: str) -> int:
    m = _LAB.match(tok)
    if not m:
        raise AsmError(f"expected label, found {tok!r}")
    return int(m.group(1))


def parse_instr(text: str) -> tuple[Instr, bool]:
    parts = text.split()
    if not parts:
        raise AsmError("empty instruction")
    mnem, args = parts[0], parts[1:]
    epilogue = mnem.endswith("'")
    mnem = mnem.rstrip("'")
    arity = {"Load": 2, "Store": 2, "Jmp": 1, "Jz": 2, "Nop": 0, "MoveK": 2,
             "MoveR": 2, "Op": 3, "LockAcq": 1, "LockRel": 1}
    if mnem not in arity:
        raise AsmError(f"unknown mnemonic {mnem!r}")
    if len(args) != arity[mnem]:
        raise AsmError(f"{mnem} takes {arity[mnem]} operands, got {len(args)}")
    if mnem == "Load":
        ins = Load(_reg(args[0]), args[1])
    elif mnem == "Store":
        ins = Store(args[0], _reg(args[1]))
    elif mnem == "Jmp":
        ins = Jmp(_lab(args[0]))
    elif mnem == "Jz":
        ins = Jz(_lab(args[0]), _reg(args[1]))
    elif mnem == "Nop":
        ins = Nop()
    elif mnem == "MoveK":
        ins = MoveK(_reg(args[0]), int(args[1]))
    elif mnem == "MoveR":
        ins = MoveR(_reg(args[0]), _reg(args[1]))
    elif mnem == "Op":
        if args[0] not in OPS:
            raise AsmError(f"unknown operator {args[0]!r}")
        ins = Op(args[0], _reg(args[1]), _reg(args[2]))
    elif mnem == "LockAcq":
        ins = LockAcq(args[0])
    else:
        ins = LockRel(args[0])
    return ins, epilogue


def parse_listing(text: str) -> RiscProgram:
    instrs, epilogue = [], set()
    exit_label = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith(".exit"):
                exit_label = _lab(line.split()[1])
                continue
            label = None
            if ":" in line:
                head, line = line.split(":", 1)
                label = _lab(head.strip())
                line = line.strip()
            ins, epi = parse_instr(line)
        except (AsmError, IndexError, ValueError) as e:
            raise AsmError(f"line {n}: {e}") from None
        if epi:
            epilogue.add(len(instrs))
        instrs.append((label, ins))
    prog = RiscProgram(tuple(instrs), exit_label, frozenset(epilogue))
    prog.check_labels()
    return prog
