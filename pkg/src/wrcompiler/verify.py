"""Run named harness checks over a corpus entry (used by the CLI and the tests)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compiler import finalize
from .core import check_lock_discipline
from .corpus import CorpusEntry
from .harness.hyper import check_sys_secure
from .harness.modes import check_global_compatibility, check_local_compliance
from .harness.refinement import (check_decomposed_side_conditions, check_no_high_branching,
                                 check_refinement)
from .harness.report import BOUNDED_NOTE, CheckReport, merge, violated
from .harness.system import all_schedules, random_schedules, risc_system, sample_mems, while_system
from .kernel import BACKEND, encode_system
from .risc import DEFAULT_REGISTERS

CHECKS = ("discipline", "compile", "refine", "decomp", "nohb", "local", "global", "hyper")


@dataclass
class Bounds:
    """Check bounds; fields left as None fall back to the entry's manifest."""

    sched_len: int | None = None
    init_mems: int | None = None
    max_steps: int | None = None
    seed: int | None = None
    random_schedules: int | None = None
    schedule_length: int | None = None
    registers: int = DEFAULT_REGISTERS
    levels: tuple = ("while", "risc")
    domains: dict = field(default_factory=dict)

    def resolve(self, entry: CorpusEntry) -> "Bounds":
        out = Bounds(registers=self.registers, levels=self.levels, domains=self.domains)
        for k in ("sched_len", "init_mems", "max_steps", "seed", "random_schedules",
                  "schedule_length"):
            v = getattr(self, k)
            setattr(out, k, entry.bound(k) if v is None else v)
        return out


def _with_domains(entry: CorpusEntry, domains: dict) -> CorpusEntry:
    if not domains:
        return entry
    pf = entry.policy_file
    new = type(pf)(pf.policy, pf.interp, {**pf.domains, **domains}, pf.fixed)
    return CorpusEntry(entry.name, entry.path, entry.thread_files, entry.sources,
                       entry.threads, new, entry.expected, entry.bounds,
                       entry.description, entry.reconstruction, entry.secure)


def _compiled(entry, b):
    outs = entry.compile(b.registers)
    bad = [(f, o.reason) for f, o in zip(entry.thread_files, outs) if o.failed]
    return outs, bad


def _per_thread(name, entry, reports):
    for f, r in zip(entry.thread_files, reports):
        if r.counterexample is not None:
            r.counterexample.setdefault("thread", f)
    return merge(reports, name)


def _schedules(entry, b):
    if b.random_schedules:
        return random_schedules(len(entry.threads), b.random_schedules, b.schedule_length, b.seed)
    return None


def check_discipline(entry: CorpusEntry, b: Bounds) -> CheckReport:
    vs = check_lock_discipline(entry.interp, entry.policy)
    if vs:
        return violated("discipline", {}, predicate="lock-discipline",
                        violations=[str(v) for v in vs])
    return CheckReport("discipline", "ok", {}, stats={"locks": len(list(entry.interp))})


def check_compile(entry: CorpusEntry, b: Bounds) -> CheckReport:
    outs, bad = _compiled(entry, b)
    bounds = {"registers": b.registers}
    if bad:
        f, reason = bad[0]
        return violated("compile", bounds, predicate="compile-failed", thread=f, reason=reason)
    return CheckReport("compile", "ok", bounds,
                       stats={"instructions": [len(o.annotated) for o in outs]})


def _need_compiled(name, entry, b):
    outs, bad = _compiled(entry, b)
    if bad:
        return None, CheckReport(name, "error", {}, notes=[f"{bad[0][0]}: {bad[0][1]}"])
    return outs, None


def check_refine(entry: CorpusEntry, b: Bounds) -> CheckReport:
    outs, err = _need_compiled("refine", entry, b)
    if err:
        return err
    mems = sample_mems(entry.policy_file.domains, entry.policy_file.fixed, b.init_mems, b.seed)
    reps = [check_refinement(c, o, mems, entry.interp, entry.policy, max_steps=b.max_steps,
                             nregs=b.registers)
            for c, o in zip(entry.threads, outs)]
    return _per_thread("refine", entry, reps)


def check_decomp(entry: CorpusEntry, b: Bounds) -> CheckReport:
    outs, err = _need_compiled("decomp", entry, b)
    if err:
        return err
    pairs = entry.pairs()
    reps = [check_decomposed_side_conditions(c, o, entry.policy, entry.interp, pairs,
                                             max_steps=b.max_steps, nregs=b.registers)
            for c, o in zip(entry.threads, outs)]
    return _per_thread("decomp", entry, reps)


def check_nohb(entry: CorpusEntry, b: Bounds) -> CheckReport:
    pairs = entry.pairs()
    reps = [check_no_high_branching(c, entry.policy, entry.interp, pairs, max_steps=b.max_steps)
            for c in entry.threads]
    return _per_thread("nohb", entry, reps)


def check_local(entry: CorpusEntry, b: Bounds) -> CheckReport:
    mems = entry.mems()
    reps = []
    if "while" in b.levels:
        reps += [check_local_compliance(c, entry.interp, entry.policy, mems, seed=b.seed)
                 for c in entry.threads]
    if "risc" in b.levels:
        outs, err = _need_compiled("local", entry, b)
        if err:
            return err
        reps += [check_local_compliance(finalize(o), entry.interp, entry.policy, mems,
                                        seed=b.seed, nregs=b.registers)
                 for o in outs]
    return merge(reps, "local")


def check_global(entry: CorpusEntry, b: Bounds) -> CheckReport:
    """While level: every schedule up to sched_len from every initial memory.
    RISC level: the same schedules plus the seeded random ones, on the kernel."""
    mems = entry.mems()
    scheds = _schedules(entry, b)
    reps = []
    if "while" in b.levels:
        for m in mems:
            gc = while_system(entry.threads, entry.interp, m)
            rep = check_global_compatibility(gc, entry.interp, b.sched_len, scheds)
            reps.append(rep)
            if not rep.ok:
                break
    if "risc" in b.levels:
        outs, err = _need_compiled("global", entry, b)
        if err:
            return err
        progs = [finalize(o) for o in outs]
        reps.append(risc_global(progs, entry, mems, b, scheds))
    return merge(reps, "global")


def risc_global(progs, entry, mems, b: Bounds, scheds) -> CheckReport:
    bounds = {"level": "risc", "sched_len": b.sched_len,
              "random_schedules": len(scheds or []), "backend": BACKEND}
    enc = encode_system(progs, entry.interp, entry.policy, b.registers)
    n = len(progs)
    mats = []
    if b.sched_len:
        mats.append(np.array(list(all_schedules(n, b.sched_len)), dtype=np.int64))
    if scheds:
        mats.append(np.array(scheds, dtype=np.int64))
    work = 0
    for m in mems:
        for mat in mats:
            row, steps, kind, idx = enc.compat(m, mat)
            if row >= 0:
                sched = [int(x) for x in mat[row, :steps]]
                gc = risc_system(progs, entry.interp, m, b.registers)
                detail = check_global_compatibility(gc, entry.interp, schedules=[sched])
                cex = dict(detail.counterexample or {})
                cex.setdefault("schedule", sched)
                cex.setdefault("predicate", ["lock-managed-modes", "unmanaged-modes",
                                             "compatible-modes"][kind - 1])
                return violated("global", bounds, **cex)
            work += mat.size
    return CheckReport("global", "ok", bounds, stats={"steps": work}, notes=[BOUNDED_NOTE])


def check_hyper(entry: CorpusEntry, b: Bounds) -> CheckReport:
    """Whole-system check at each requested level; verdicts of the levels must agree."""
    pairs = [(m1, m2) for m1, m2 in entry.pairs()]
    scheds = _schedules(entry, b)
    sched_len = None if scheds else b.sched_len
    reps = {}
    if "while" in b.levels:
        reps["while"] = check_sys_secure(entry.threads, entry.policy, entry.interp, pairs,
                                         sched_len=sched_len, schedules=scheds)
    if "risc" in b.levels:
        outs, err = _need_compiled("hyper", entry, b)
        if err:
            return err
        progs = [finalize(o) for o in outs]
        reps["risc"] = check_sys_secure(progs, entry.policy, entry.interp, pairs,
                                        sched_len=sched_len, schedules=scheds,
                                        nregs=b.registers)
    rep = merge(list(reps.values()), "hyper")
    verdicts = {k: r.verdict for k, r in reps.items()}
    rep.stats["levels"] = verdicts
    if len(set(verdicts.values())) > 1:
        rep.notes.append(f"source and compiled verdicts differ: {verdicts}")
    return rep


RUNNERS = {"discipline": check_discipline, "compile": check_compile, "refine": check_refine,
           "decomp": check_decomp, "nohb": check_nohb, "local": check_local,
           "global": check_global, "hyper": check_hyper}


def run_check(entry: CorpusEntry, name: str, bounds: Bounds | None = None) -> CheckReport:
    if name not in RUNNERS:
        raise KeyError(name)
    b = (bounds or Bounds()).resolve(entry)
    return RUNNERS[name](_with_domains(entry, b.domains), b)
