"""Sound mode use: local guarantee compliance and global compatibility."""

from __future__ import annotations

import random
from typing import Callable, Iterable, Optional, Sequence, Union

from ..core import (ClassificationPolicy, LockInterp, Mem, ModeState, ev_lock,
                    writable)
from ..risc import DEFAULT_REGISTERS, RiscProgram
from ..while_lang import Cmd, lock_held_mds_correct, lock_not_held_mds_correct
from .report import BOUNDED_NOTE, CheckReport, mds_json, mem_json, violated
from .system import GlobalConf, risc_system, step_thread, while_system


def _ext(policy: ClassificationPolicy, names: frozenset) -> frozenset:
    """A guarantee on v also covers v's control variables."""
    out = set(names)
    for v in names:
        if v in policy.classes:
            out |= policy.cvars(v)
    return frozenset(out)


def footprint_problem(fp, mds: ModeState, policy: ClassificationPolicy) -> Optional[str]:
    no_rw = _ext(policy, mds.guar_no_rw)
    no_w = _ext(policy, mds.guar_no_w) | no_rw
    bad = sorted(fp.reads & no_rw)
    if bad:
        return f"reads {', '.join(bad)} despite a no-read/write guarantee"
    bad = sorted(fp.writes & no_w)
    if bad:
        return f"writes {', '.join(bad)} despite a no-write guarantee"
    return None


def check_local_compliance(thread: Union[Cmd, RiscProgram], interp: LockInterp,
                           policy: ClassificationPolicy, init_mems: Iterable[Mem],
                           max_steps: int = 2_000, havoc_rate: float = 0.25,
                           havoc_values: Sequence[int] = (0, 1, 2), seed: int = 0,
                           nregs: int = DEFAULT_REGISTERS) -> CheckReport:
    """Run one thread with seeded environment writes; every step's footprint
    must respect the thread's current guarantees."""
    name = "local"
    bounds = {"max_steps": max_steps, "havoc_rate": havoc_rate, "seed": seed}
    rng = random.Random(seed)
    runs = steps = invalid = 0
    for k, mem in enumerate(init_mems):
        runs += 1
        if isinstance(thread, RiscProgram):
            gc = risc_system([thread], interp, mem, nregs)
        else:
            gc = while_system([thread], interp, mem)
        for n in range(max_steps):
            if gc.stopped(0):
                break
            mds = gc.threads[0][1]
            gc, fp = step_thread(gc, 0, interp)
            steps += 1
            if fp.event == "invalid":
                invalid += 1
            problem = footprint_problem(fp, mds, policy)
            if problem:
                return violated(name, bounds, predicate="guarantee", detail=problem,
                                run=k, step=n, init=mem_json(mem), mds=mds_json(mds))
            if havoc_rate > 0 and rng.random() < havoc_rate:
                mds = gc.threads[0][1]
                xs = [x for x in sorted(policy.classes) if writable(mds, x)]
                if xs:
                    gc = GlobalConf(gc.threads, gc.mem.set(rng.choice(xs),
                                                           rng.choice(havoc_values)))
    notes = [BOUNDED_NOTE]
    if invalid:
        notes.append(f"discipline diagnostic: {invalid} release step(s) of a lock "
                     "not held stuttered")
    return CheckReport(name, "ok", bounds,
                       stats={"runs": runs, "steps": steps, "invalid_releases": invalid},
                       notes=notes)


# -- global compatibility -----------------------------------------------------------

def lock_managed_problem(gc: GlobalConf, interp: LockInterp) -> Optional[str]:
    mdss = gc.mdss
    for k in sorted(interp):
        held = [i for i, m in enumerate(mdss) if lock_held_mds_correct(m, k, interp)]
        if ev_lock(gc.mem.lock(k)):
            if len(held) != 1:
                return f"lock {k} is held but {len(held)} threads have modes of a holder"
            others = [j for j in range(len(mdss)) if j != held[0]]
        else:
            others = range(len(mdss))
        for j in others:
            if not lock_not_held_mds_correct(mdss[j], k, interp):
                return f"thread {j} has modes inconsistent with not holding {k}"
    return None


def unmanaged_problem(gc: GlobalConf, interp: LockInterp) -> Optional[str]:
    mdss = gc.mdss
    all_w, all_rw = interp.all_no_w(), interp.all_no_rw()
    for i, m in enumerate(mdss):
        for j, other in enumerate(mdss):
            if i == j:
                continue
            bad = sorted((m.asm_no_rw - all_rw) - other.guar_no_rw)
            if bad:
                return (f"thread {i} assumes no-read/write on unmanaged {bad}, "
                        f"thread {j} does not guarantee it")
            bad = sorted((m.asm_no_w - all_w) - other.guar_no_w)
            if bad:
                return (f"thread {i} assumes no-write on unmanaged {bad}, "
                        f"thread {j} does not guarantee it")
    return None


def lock_mds_problem(gc: GlobalConf, interp: LockInterp) -> Optional[str]:
    locks = set(interp)
    for i, m in enumerate(gc.mdss):
        bad = sorted(locks & (m.asm_no_w | m.asm_no_rw | m.guar_no_w | m.guar_no_rw))
        if bad:
            return f"thread {i} has modes on lock variables {bad}"
    return None


def compatible_modes_problem(mdss: Sequence[ModeState]) -> Optional[str]:
    for i, m in enumerate(mdss):
        for j, other in enumerate(mdss):
            if i == j:
                continue
            bad = sorted(m.asm_no_rw - other.guar_no_rw)
            if bad:
                return f"thread {i} assumes no-read/write on {bad} without thread {j}'s guarantee"
            bad = sorted(m.asm_no_w - other.guar_no_w)
            if bad:
                return f"thread {i} assumes no-write on {bad} without thread {j}'s guarantee"
    return None


def global_problem(gc: GlobalConf, interp: LockInterp) -> Optional[tuple[str, str]]:
    for pred, fn in (("lock-managed-modes", lambda: lock_managed_problem(gc, interp)),
                     ("unmanaged-modes", lambda: unmanaged_problem(gc, interp)),
                     ("no-lock-modes", lambda: lock_mds_problem(gc, interp)),
                     ("compatible-modes", lambda: compatible_modes_problem(gc.mdss))):
        p = fn()
        if p:
            return pred, p
    return None


def explore(gc: GlobalConf, interp: LockInterp, depth: int,
            visit: Callable[[GlobalConf, tuple], Optional[dict]]) -> tuple[Optional[dict], int]:
    """Depth-first walk of every schedule up to ``depth``; ``visit`` sees each prefix.

    Returns the first non-None visit result and the number of nodes seen.
    """
    n = len(gc.threads)
    count = 0
    stack = [(gc, ())]
    while stack:
        g, prefix = stack.pop()
        count += 1
        found = visit(g, prefix)
        if found is not None:
            return found, count
        if len(prefix) < depth:
            for i in reversed(range(n)):
                g2, _ = step_thread(g, i, interp)
                stack.append((g2, prefix + (i,)))
    return None, count


def check_global_compatibility(gc: GlobalConf, interp: LockInterp,
                               sched_len: int | None = None,
                               schedules: Iterable[Sequence[int]] | None = None) -> CheckReport:
    """Management requirements and CompatibleModes along schedules from ``gc``.

    With ``sched_len`` every schedule up to that length is explored; with
    ``schedules`` each given schedule (and each of its prefixes) is checked.
    """
    name = "global"
    bounds = {"sched_len": sched_len,
              "schedules": None if schedules is None else "explicit"}

    def visit(g, prefix):
        p = global_problem(g, interp)
        if p:
            return {"predicate": p[0], "detail": p[1], "schedule": list(prefix),
                    "mem": mem_json(g.mem)}
        return None

    nodes = 0
    if sched_len is not None:
        found, nodes = explore(gc, interp, sched_len, visit)
        if found:
            return violated(name, bounds, **found)
    if schedules is not None:
        count = 0
        for sched in schedules:
            count += 1
            g = gc
            found = visit(g, ())
            for n, i in enumerate(sched):
                if found:
                    break
                g, _ = step_thread(g, i, interp)
                nodes += 1
                found = visit(g, tuple(sched[:n + 1]))
            if found:
                return violated(name, bounds, **found)
        bounds["schedules"] = count
    return CheckReport(name, "ok", bounds, stats={"states": nodes}, notes=[BOUNDED_NOTE])
