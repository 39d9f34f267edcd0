"""Array encoding of RISC systems for the fast stepping kernel.

The compiled extension ``_kernel`` is used when it was built; otherwise the
pure-Python ``_kernel_py`` (same functions, same arguments) is selected.
Set ``WRCOMPILER_PURE=1`` to force the fallback.

Encoding: program variables get indices ``0..nv-1`` (sorted names) and lock
variables ``nv..nv+nk-1`` in one memory array.  Each thread's code is an
``n x 4`` block ``(opcode, a, b, c)`` with jump labels resolved to local pcs.
A thread's mode state is four ``uint64`` bitmasks over variable indices
(AsmNoW, AsmNoRW, GuarNoW, GuarNoRW), so at most 64 program variables.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import (ClassificationPolicy, Level, LockInterp, Mem, ModeState, Static,
                   UnknownVariable)
from .risc import (DEFAULT_REGISTERS, Jmp, Jz, Load, LockAcq, LockRel, MoveK,
                   MoveR, Nop, Op, RiscProgram, Store, resolve)
from .while_lang import OPS, init_mds

if os.environ.get("WRCOMPILER_PURE"):
    from . import _kernel_py as backend
    BACKEND = "python"
else:
    try:
        from . import _kernel as backend
        BACKEND = "compiled"
    except ImportError:
        from . import _kernel_py as backend
        BACKEND = "python"

MAX_VARS = 64
OP_CODES = {op: i for i, op in enumerate(["+", "-", "*", "==", "!=", "<", "<=", "&&", "||"])}
assert set(OP_CODES) == set(OPS)


def _mask(names, index) -> int:
    m = 0
    for n in names:
        m |= 1 << index[n]
    return m


@dataclass
class EncodedSystem:
    var_names: list
    lock_names: list
    code: np.ndarray
    off: np.ndarray
    ln: np.ndarray
    lock_w: np.ndarray
    lock_rw: np.ndarray
    nregs: int
    kind: np.ndarray
    ctrl: np.ndarray
    lo_off: np.ndarray
    lo_vals: np.ndarray
    cset: int
    gov_w: int
    gov_rw: int
    mds0: np.ndarray

    @property
    def nv(self) -> int:
        return len(self.var_names)

    @property
    def nthreads(self) -> int:
        return len(self.off)

    def encode_mem(self, mem: Mem) -> np.ndarray:
        vals = [mem[x] for x in self.var_names] + [mem.lock(k) for k in self.lock_names]
        return np.array(vals, dtype=np.int64)

    def decode_mem(self, arr) -> Mem:
        nv = self.nv
        return Mem({x: int(arr[i]) for i, x in enumerate(self.var_names)},
                   {k: int(arr[nv + i]) for i, k in enumerate(self.lock_names)})

    def decode_mds(self, arr, t: int):
        names = self.var_names

        def unmask(m):
            m = int(m)
            return frozenset(names[i] for i in range(len(names)) if (m >> i) & 1)

        return ModeState(*(unmask(arr[t * 4 + j]) for j in range(4)))

    def address_name(self, idx: int) -> str:
        if idx < self.nv:
            return self.var_names[idx]
        return f"lock:{self.lock_names[idx - self.nv]}"

    def init_state(self):
        pcs = np.zeros(self.nthreads, dtype=np.int64)
        regs = np.zeros(self.nthreads * self.nregs, dtype=np.int64)
        return pcs, regs, self.mds0.copy()

    # -- backend calls --------------------------------------------------------

    def hyper(self, mem1: Mem, mem2: Mem, scheds) -> tuple:
        pcs, regs, mds = self.init_state()
        return backend.hyper(self.code, self.off, self.ln, self.lock_w, self.lock_rw,
                             self.nv, self.nregs, self.kind, self.ctrl, self.lo_off,
                             self.lo_vals, self.cset, self.encode_mem(mem1),
                             self.encode_mem(mem2), pcs, regs, mds, _sched_matrix(scheds))

    def compat(self, mem: Mem, scheds) -> tuple:
        pcs, regs, mds = self.init_state()
        return backend.compat(self.code, self.off, self.ln, self.lock_w, self.lock_rw,
                              self.nv, self.nregs, self.gov_w, self.gov_rw,
                              self.encode_mem(mem), pcs, regs, mds, _sched_matrix(scheds))

    def trace(self, mem: Mem, sched) -> tuple:
        pcs, regs, mds = self.init_state()
        return backend.trace(self.code, self.off, self.ln, self.lock_w, self.lock_rw,
                             self.nv, self.nregs, self.encode_mem(mem), pcs, regs, mds,
                             np.ascontiguousarray(sched, dtype=np.int64))


def _sched_matrix(scheds) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(scheds, dtype=np.int64))
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.size == 0:
        arr = arr.reshape(max(arr.shape[0], 1), 0)
    return arr


def _encode_instr(prog: RiscProgram, ins, vidx, kidx) -> tuple:
    def var(v):
        if v not in vidx:
            raise UnknownVariable(v)
        return vidx[v]

    if isinstance(ins, Load):
        return 0, ins.reg, var(ins.var), 0
    if isinstance(ins, Store):
        return 1, var(ins.var), ins.reg, 0
    if isinstance(ins, Jmp):
        return 2, resolve(prog, ins.label), 0, 0
    if isinstance(ins, Jz):
        return 3, resolve(prog, ins.label), ins.reg, 0
    if isinstance(ins, Nop):
        return 4, 0, 0, 0
    if isinstance(ins, MoveK):
        return 5, ins.reg, ins.value, 0
    if isinstance(ins, MoveR):
        return 6, ins.dst, ins.src, 0
    if isinstance(ins, Op):
        return 7, OP_CODES[ins.op], ins.dst, ins.src
    if isinstance(ins, LockAcq):
        return 8, kidx[ins.lock], 0, 0
    if isinstance(ins, LockRel):
        return 9, kidx[ins.lock], 0, 0
    raise TypeError(ins)


def encode_system(progs, interp: LockInterp, policy: ClassificationPolicy,
                  nregs: int = DEFAULT_REGISTERS) -> EncodedSystem:
    var_names = sorted(policy.classes)
    if len(var_names) > MAX_VARS:
        raise ValueError(f"the kernel supports at most {MAX_VARS} program variables")
    lock_names = sorted(interp)
    vidx = {v: i for i, v in enumerate(var_names)}
    kidx = {k: i for i, k in enumerate(lock_names)}
    rows, off, ln = [], [], []
    for prog in progs:
        off.append(len(rows))
        ln.append(len(prog))
        for ins in prog.code:
            rows.append(_encode_instr(prog, ins, vidx, kidx))
    code = np.array(rows, dtype=np.int64).reshape(-1, 4)

    def gov(names):
        return _mask([n for n in names if n in vidx], vidx)

    lock_w = np.array([gov(interp.no_w(k)) for k in lock_names], dtype=np.uint64)
    lock_rw = np.array([gov(interp.no_rw(k)) for k in lock_names], dtype=np.uint64)
    kind, ctrl, lo_off, lo_vals = [], [], [0], []
    for v in var_names:
        c = policy.classification(v)
        if isinstance(c, Static):
            kind.append(0 if c.level is Level.Low else 1)
            ctrl.append(0)
        else:
            kind.append(2)
            ctrl.append(vidx[c.control])
            lo_vals += sorted(c.low_values)
        lo_off.append(len(lo_vals))
    m0 = init_mds(interp)
    mds_one = [gov(m0.asm_no_w), gov(m0.asm_no_rw), gov(m0.guar_no_w), gov(m0.guar_no_rw)]
    mds0 = np.array(mds_one * len(off), dtype=np.uint64)
    return EncodedSystem(
        var_names, lock_names, np.ascontiguousarray(code), np.array(off, dtype=np.int64),
        np.array(ln, dtype=np.int64), lock_w, lock_rw, nregs,
        np.array(kind, dtype=np.int64), np.array(ctrl, dtype=np.int64),
        np.array(lo_off, dtype=np.int64), np.array(lo_vals, dtype=np.int64),
        _mask(policy.cset, vidx), gov(interp.all_no_w()), gov(interp.all_no_rw()), mds0)
