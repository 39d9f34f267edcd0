"""Global configurations: thread lists over one shared memory, and schedules."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

from ..core import (ClassificationPolicy, Level, LockInterp, Mem, ModeState,
                    Static, low_eq)
from ..risc import DEFAULT_REGISTERS, RiscConf, RiscProgram, init_regs, step_risc
from ..while_lang import (NO_FOOTPRINT, Cmd, Footprint, Stop, WhileConf,
                          init_mds, no_locks_held, step_while)


class RiscPriv(NamedTuple):
    pc: int
    prog: RiscProgram
    regs: tuple


Priv = Union[Cmd, RiscPriv]


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class GlobalConf:
    threads: tuple      # ((priv, mds), ...)
    mem: Mem

    def __len__(self):
        return len(self.threads)

    @property
    def mdss(self) -> list[ModeState]:
        return [mds for _, mds in self.threads]

    def stopped(self, i: int) -> bool:
        priv = self.threads[i][0]
        if isinstance(priv, RiscPriv):
            return priv.pc >= len(priv.prog)
        return isinstance(priv, Stop)

    @property
    def all_stopped(self) -> bool:
        return all(self.stopped(i) for i in range(len(self.threads)))


def while_system(cmds: Sequence[Cmd], interp: LockInterp, mem: Mem) -> GlobalConf:
    mds = init_mds(interp)
    return GlobalConf(tuple((c, mds) for c in cmds), mem)


def risc_system(progs: Sequence[RiscProgram], interp: LockInterp, mem: Mem,
                nregs: int = DEFAULT_REGISTERS) -> GlobalConf:
    mds = init_mds(interp)
    return GlobalConf(tuple((RiscPriv(0, p, init_regs(nregs)), mds) for p in progs), mem)


def step_thread(gc: GlobalConf, i: int, interp: LockInterp) -> tuple[GlobalConf, Footprint]:
    """Step thread ``i``; a stopped thread stutters."""
    if not 0 <= i < len(gc.threads):
        raise ScheduleError(f"thread index {i} out of range (have {len(gc.threads)})")
    priv, mds = gc.threads[i]
    if gc.stopped(i):
        return gc, NO_FOOTPRINT
    if isinstance(priv, RiscPriv):
        rc, fp = step_risc(RiscConf(priv.pc, priv.prog, priv.regs, mds, gc.mem), interp)
        new = (RiscPriv(rc.pc, rc.prog, rc.regs), rc.mds)
        mem = rc.mem
    else:
        wc, fp = step_while(WhileConf(priv, mds, gc.mem), interp)
        new = (wc.cmd, wc.mds)
        mem = wc.mem
    threads = gc.threads[:i] + (new,) + gc.threads[i + 1:]
    return GlobalConf(threads, mem), fp


def run_schedule(gc: GlobalConf, sched: Iterable[int], interp: LockInterp) -> GlobalConf:
    for i in sched:
        gc, _ = step_thread(gc, i, interp)
    return gc


def trace_schedule(gc: GlobalConf, sched: Iterable[int], interp: LockInterp) -> Iterator:
    """Yield ``(index, thread, gc_after, footprint)`` for each scheduled step."""
    for n, i in enumerate(sched):
        gc, fp = step_thread(gc, i, interp)
        yield n, i, gc, fp


def parse_schedule(text: str, nthreads: int) -> list[int]:
    try:
        sched = [int(t) for t in text.replace(" ", "").split(",") if t != ""]
    except ValueError:
        raise ScheduleError(f"malformed schedule {text!r}") from None
    for i in sched:
        if not 0 <= i < nthreads:
            raise ScheduleError(f"thread index {i} out of range (have {nthreads})")
    return sched


def random_schedules(nthreads: int, count: int, length: int, seed: int) -> list[list[int]]:
    rng = random.Random(seed)
    return [[rng.randrange(nthreads) for _ in range(length)] for _ in range(count)]


def all_schedules(nthreads: int, length: int) -> Iterator[tuple]:
    """Every schedule of exactly ``length`` steps (prefixes are covered by checkers)."""
    return itertools.product(range(nthreads), repeat=length)


# -- initial memories -------------------------------------------------------------

def default_domains(policy: ClassificationPolicy) -> dict[str, list[int]]:
    """{0,1} for every variable that can be High or controls a classification."""
    out = {}
    for x, c in policy.classes.items():
        if x in policy.cset or not (isinstance(c, Static) and c.level is Level.Low):
            out[x] = [0, 1]
    return out


def enumerate_mems(domains: dict[str, Sequence[int]],
                   fixed: dict[str, int] | None = None) -> list[Mem]:
    names = sorted(domains)
    base = dict(fixed or {})
    out = []
    for values in itertools.product(*(domains[n] for n in names)):
        m = dict(base)
        m.update(zip(names, values))
        out.append(Mem(m))
    return [m for m in out if no_locks_held(m)]


def low_eq_pairs(policy: ClassificationPolicy, mems: Sequence[Mem]) -> list[tuple[Mem, Mem]]:
    return [(m1, m2) for m1 in mems for m2 in mems if low_eq(policy, m1, m2)]


def sample_mems(domains: dict[str, Sequence[int]], fixed: dict[str, int] | None,
                count: int, seed: int) -> list[Mem]:
    """``count`` memories drawn (with replacement) from the declared domains."""
    rng = random.Random(seed)
    names = sorted(domains)
    out = []
    for _ in range(count):
        m = dict(fixed or {})
        m.update({n: rng.choice(list(domains[n])) for n in names})
        out.append(Mem(m))
    return out
