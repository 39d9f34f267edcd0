"""Whole-system two-run security: paired runs under the same schedule.

Two low-equivalent initial memories (with no locks held) are run under one
schedule; after every prefix the thread lists must have equal length and
equal mode states, and the final memories must agree on every control
variable and on every variable that is Low and readable by all threads.
Evaluation is deterministic, so the matching run for a schedule is that
schedule's run on the other memory.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from ..core import ClassificationPolicy, LockInterp, Mem, readable
from ..kernel import BACKEND, encode_system
from ..risc import DEFAULT_REGISTERS, RiscProgram
from .report import BOUNDED_NOTE, CheckReport, mem_json, violated
from .system import (GlobalConf, all_schedules, risc_system, run_schedule,
                     step_thread, while_system)


def sys_problem(policy: ClassificationPolicy, gc1: GlobalConf,
                gc2: GlobalConf) -> Optional[dict]:
    if len(gc1.threads) != len(gc2.threads):
        return {"predicate": "thread-count"}
    for i, (a, b) in enumerate(zip(gc1.mdss, gc2.mdss)):
        if a != b:
            return {"predicate": "modes", "thread": i}
    m1, m2 = gc1.mem, gc2.mem
    mdss = gc1.mdss
    for x in sorted(policy.classes):
        if m1[x] == m2[x]:
            continue
        if x in policy.cset or (policy.is_low(m1, x)
                                and all(readable(m, x) for m in mdss)):
            return {"predicate": "low-agreement", "variable": x,
                    "value1": m1[x], "value2": m2[x]}
    if m1.locks != m2.locks:
        return {"predicate": "low-agreement", "variable": "locks"}
    return None


def _system(threads, interp, mem, nregs):
    if threads and isinstance(threads[0], RiscProgram):
        return risc_system(threads, interp, mem, nregs)
    return while_system(threads, interp, mem)


def _level(threads) -> str:
    return "risc" if threads and isinstance(threads[0], RiscProgram) else "while"


def check_sys_secure(threads: Sequence, policy: ClassificationPolicy, interp: LockInterp,
                     pairs: Iterable[tuple[Mem, Mem]], sched_len: int | None = None,
                     schedules: Iterable[Sequence[int]] | None = None,
                     backend: str = "auto",
                     nregs: int = DEFAULT_REGISTERS) -> CheckReport:
    """Check every prefix of every schedule for every initial pair.

    ``sched_len`` explores all schedules up to that length; ``schedules``
    supplies explicit (e.g. seeded random) ones.  RISC systems use the
    array kernel unless ``backend="object"``.
    """
    threads = list(threads)
    pairs = list(pairs)
    level = _level(threads)
    scheds = [list(s) for s in schedules] if schedules is not None else []
    use_kernel = level == "risc" and backend in ("auto", "kernel")
    bounds = {"level": level, "sched_len": sched_len, "explicit_schedules": len(scheds),
              "pairs": len(pairs), "backend": BACKEND if use_kernel else "object"}
    name = "hyper"
    if use_kernel:
        found, work = _kernel_search(threads, policy, interp, pairs, sched_len, scheds, nregs)
    else:
        found, work = _object_search(threads, policy, interp, pairs, sched_len, scheds, nregs)
    if found:
        return violated(name, bounds, **found)
    return CheckReport(name, "ok", bounds, stats={"steps": work}, notes=[BOUNDED_NOTE])


def _cex(threads, policy, interp, m1, m2, sched, nregs) -> dict:
    """Replay a violating schedule at object level for a readable counterexample."""
    g1 = run_schedule(_system(threads, interp, m1, nregs), sched, interp)
    g2 = run_schedule(_system(threads, interp, m2, nregs), sched, interp)
    found = sys_problem(policy, g1, g2) or {"predicate": "kernel-only disagreement"}
    found.update({"schedule": list(sched), "mem1": mem_json(m1), "mem2": mem_json(m2),
                  "final1": mem_json(g1.mem), "final2": mem_json(g2.mem)})
    return found


def _object_search(threads, policy, interp, pairs, sched_len, scheds, nregs):
    n = len(threads)
    work = 0
    for m1, m2 in pairs:
        start = (_system(threads, interp, m1, nregs), _system(threads, interp, m2, nregs))
        if sched_len is not None:
            stack = [(start, ())]
            while stack:
                (g1, g2), prefix = stack.pop()
                if sys_problem(policy, g1, g2):
                    return _cex(threads, policy, interp, m1, m2, prefix, nregs), work
                if len(prefix) < sched_len:
                    for i in reversed(range(n)):
                        a, _ = step_thread(g1, i, interp)
                        b, _ = step_thread(g2, i, interp)
                        work += 2
                        stack.append(((a, b), prefix + (i,)))
        for sched in scheds:
            g1, g2 = start
            for k, i in enumerate(sched):
                g1, _ = step_thread(g1, i, interp)
                g2, _ = step_thread(g2, i, interp)
                work += 2
                if sys_problem(policy, g1, g2):
                    return _cex(threads, policy, interp, m1, m2, sched[:k + 1], nregs), work
    return None, work


def _kernel_search(threads, policy, interp, pairs, sched_len, scheds, nregs):
    enc = encode_system(threads, interp, policy, nregs)
    mats = []
    if sched_len is not None:
        if sched_len == 0:
            mats.append(np.zeros((1, 0), dtype=np.int64))
        else:
            mats.append(np.array(list(all_schedules(len(threads), sched_len)), dtype=np.int64))
    if scheds:
        by_len: dict[int, list] = {}
        for s in scheds:
            by_len.setdefault(len(s), []).append(s)
        mats += [np.array(v, dtype=np.int64).reshape(len(v), L) for L, v in by_len.items()]
    work = 0
    for m1, m2 in pairs:
        for mat in mats:
            row, steps, kind, idx = enc.hyper(m1, m2, mat)
            if row >= 0:
                return _cex(threads, policy, interp, m1, m2,
                            [int(x) for x in mat[row, :steps]], nregs), work
            work += 2 * mat.size
    return None, work
