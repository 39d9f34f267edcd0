"""Per-thread checks relating a While command to its compiled RISC image.

All runs are single-thread: interference by other threads is modelled by
optional seeded "havoc" writes to variables the thread's modes leave
writable.  Runs are deterministic without havoc, so a revisited joint state
means the rest of the run repeats and the check can stop early.
"""

from __future__ import annotations

import random
from typing import Iterable, Optional, Sequence

from ..compiler import (CompileOutput, asmrec_mds_consistent, finalize,
                        regrec_mem_consistent)
from ..core import (ClassificationPolicy, LockInterp, Mem, ModeState,
                    low_eq_mod_modes, writable)
from ..risc import (DEFAULT_REGISTERS, Jmp, Load, MoveK, Nop, Op, RiscConf,
                    format_instr, init_regs, step_risc)
from ..while_lang import (Cmd, If, While, WhileConf, ev_exp, init_mds,
                          leftmost_cmd, short, step_while)
from .report import (BOUNDED_NOTE, CheckReport, mds_json, mem_json, merge,
                     violated)


def abs_steps(w: WhileConf, r: RiscConf) -> int:
    """How many While steps simulate the next RISC step (0 or 1)."""
    if r.pc >= len(r.prog):
        return 0
    ins = r.prog[r.pc]
    if isinstance(ins, (Load, Op, MoveK)):
        return 1 if isinstance(leftmost_cmd(w.cmd), While) else 0
    if isinstance(ins, (Jmp, Nop)) and r.pc in r.prog.epilogue:
        return 0
    return 1


def _record_at(out: CompileOutput, pc: int):
    return out.annotated[pc][1] if pc < len(out.annotated) else out.final_rec


def _consistency_problem(out, r: RiscConf) -> Optional[str]:
    C = _record_at(out, r.pc)
    if not regrec_mem_consistent(C, r.regs, r.mem):
        bad = [f"r{q}" for q, e in sorted(C.regrec.items())
               if r.regs[q] != ev_exp(r.mem, e)]
        return f"register record inconsistent with memory at {', '.join(bad)}"
    if not asmrec_mds_consistent(C, r.mds):
        return "assumption record inconsistent with mode state"
    return None


def _where(w: WhileConf, r: RiscConf) -> dict:
    return {"pc": r.pc,
            "instr": format_instr(r.prog[r.pc]) if r.pc < len(r.prog) else "<end>",
            "while": short(w.cmd)}


class _Havoc:
    """Seeded generator of writes another thread could legitimately make."""

    def __init__(self, policy, rate: float, values: Sequence[int], seed: int):
        self.policy = policy
        self.rate = rate
        self.values = list(values)
        self.rng = random.Random(seed)
        self.count = 0

    def _dma_changes_ok(self, mds, old: Mem, new: Mem) -> bool:
        return all(writable(mds, x) for x in self.policy.classes
                   if self.policy.dma(old, x) != self.policy.dma(new, x))

    def candidates(self, mds: ModeState) -> list[str]:
        return [x for x in sorted(self.policy.classes) if writable(mds, x)]

    def same(self, mds: ModeState, mem: Mem) -> Optional[tuple[str, int]]:
        """Pick one identical write for both sides of a refinement pair."""
        if self.rate <= 0 or self.rng.random() >= self.rate:
            return None
        xs = self.candidates(mds)
        if not xs:
            return None
        x = self.rng.choice(xs)
        v = self.rng.choice(self.values)
        if not self._dma_changes_ok(mds, mem, mem.set(x, v)):
            return None
        self.count += 1
        return x, v

    def pair(self, mds: ModeState, m1: Mem, m2: Mem):
        """Pick a write pair that keeps the memories low-equivalent modulo modes."""
        if self.rate <= 0 or self.rng.random() >= self.rate:
            return None
        xs = self.candidates(mds)
        if not xs:
            return None
        x = self.rng.choice(xs)
        v1 = self.rng.choice(self.values)
        for v2 in (self.rng.choice(self.values), v1):
            n1, n2 = m1.set(x, v1), m2.set(x, v2)
            if (self._dma_changes_ok(mds, m1, n1) and self._dma_changes_ok(mds, m2, n2)
                    and low_eq_mod_modes(self.policy, mds, n1, n2)):
                self.count += 1
                return x, v1, v2
        return None


def check_refinement(c: Cmd, out: CompileOutput, init_mems: Iterable[Mem],
                     interp: LockInterp, policy: ClassificationPolicy | None = None,
                     mds0: ModeState | None = None, max_steps: int = 10_000,
                     nregs: int = DEFAULT_REGISTERS, havoc_rate: float = 0.0,
                     havoc_values: Sequence[int] = (0, 1, 2),
                     seed: int = 0) -> CheckReport:
    """Run the RISC image one step at a time, pacing the While source by abs_steps.

    After every step: equal modes and memory on both sides, and the
    compilation record at the new pc is consistent with the RISC state.
    """
    name = "refine"
    mds0 = init_mds(interp) if mds0 is None else mds0
    bounds = {"max_steps": max_steps, "registers": nregs, "havoc_rate": havoc_rate,
              "seed": seed}
    if out.failed:
        return CheckReport(name, "error", bounds, notes=[f"compilation failed: {out.reason}"])
    prog = finalize(out)
    havoc = _Havoc(policy, havoc_rate, havoc_values, seed) if havoc_rate > 0 else None
    if havoc and policy is None:
        raise ValueError("havoc needs a classification policy")
    runs = steps = cycles = 0
    for k, mem in enumerate(init_mems):
        runs += 1
        w = WhileConf(c, mds0, mem)
        r = RiscConf(0, prog, init_regs(nregs), mds0, mem)
        problem = _consistency_problem(out, r)
        if problem:
            return CheckReport(name, "error", bounds,
                               notes=[f"initial state {k} violates the precondition: {problem}"])
        seen = set()
        for n in range(max_steps):
            if r.pc >= len(prog):
                if not w.stopped:
                    return violated(name, bounds, predicate="stopping",
                                    detail="RISC program stopped but While has not",
                                    init=mem_json(mem), step=n, **_where(w, r))
                break
            if havoc is None:
                key = (w.cmd, r.pc, r.regs, r.mds, r.mem)
                if key in seen:
                    cycles += 1
                    break
                seen.add(key)
            before = _where(w, r)
            a = abs_steps(w, r)
            r, _ = step_risc(r, interp)
            for _ in range(a):
                if w.stopped:
                    return violated(name, bounds, predicate="pacing",
                                    detail="pacing demands a step of a stopped While program",
                                    init=mem_json(mem), step=n, **before)
                w, _ = step_while(w, interp)
            steps += 1
            if w.mds != r.mds:
                return violated(name, bounds, predicate="preserves-modes",
                                init=mem_json(mem), step=n, **before,
                                while_mds=mds_json(w.mds), risc_mds=mds_json(r.mds))
            if w.mem != r.mem:
                return violated(name, bounds, predicate="preserves-memory",
                                init=mem_json(mem), step=n, **before,
                                while_mem=mem_json(w.mem), risc_mem=mem_json(r.mem))
            problem = _consistency_problem(out, r)
            if problem:
                return violated(name, bounds, predicate="record-consistency",
                                detail=problem, init=mem_json(mem), step=n,
                                **_where(w, r))
            if havoc is not None:
                hv = havoc.same(r.mds, r.mem)
                if hv:
                    x, v = hv
                    r = RiscConf(r.pc, r.prog, r.regs, r.mds, r.mem.set(x, v))
                    w = WhileConf(w.cmd, w.mds, w.mem.set(x, v))
    stats = {"runs": runs, "risc_steps": steps, "cycles_closed": cycles}
    if havoc:
        stats["havoc_writes"] = havoc.count
    return CheckReport(name, "ok", bounds, stats=stats, notes=[BOUNDED_NOTE])


def check_decomposed_side_conditions(c: Cmd, out: CompileOutput,
                                     policy: ClassificationPolicy, interp: LockInterp,
                                     pairs: Iterable[tuple[Mem, Mem]],
                                     max_steps: int = 10_000,
                                     nregs: int = DEFAULT_REGISTERS,
                                     mds0: ModeState | None = None,
                                     havoc_rate: float = 0.0,
                                     havoc_values: Sequence[int] = (0, 1),
                                     seed: int = 0) -> CheckReport:
    """Lockstep RISC runs from low-equivalent pairs.

    At every step: equal stopping, equal pacing, coupled (pc, program),
    equal modes; plus the derived-bisimulation membership conditions
    (refinement edges on each side and low-equivalence modulo modes of the
    concrete memories).
    """
    name = "decomp"
    mds0 = init_mds(interp) if mds0 is None else mds0
    bounds = {"max_steps": max_steps, "registers": nregs, "havoc_rate": havoc_rate,
              "seed": seed}
    if out.failed:
        return CheckReport(name, "error", bounds, notes=[f"compilation failed: {out.reason}"])
    prog = finalize(out)
    havoc = _Havoc(policy, havoc_rate, havoc_values, seed) if havoc_rate > 0 else None
    npairs = steps = cycles = 0
    step_counts = []
    for m1, m2 in pairs:
        npairs += 1
        w1 = WhileConf(c, mds0, m1)
        w2 = WhileConf(c, mds0, m2)
        r1 = RiscConf(0, prog, init_regs(nregs), mds0, m1)
        r2 = RiscConf(0, prog, init_regs(nregs), mds0, m2)
        init = {"mem1": mem_json(m1), "mem2": mem_json(m2)}
        seen = set()
        n = 0
        while True:
            s1, s2 = r1.pc >= len(prog), r2.pc >= len(prog)
            where = {"step": n, "pc1": r1.pc, "pc2": r2.pc, **init}
            if s1 != s2:
                return violated(name, bounds, predicate="stopping", **where)
            if r1.pc != r2.pc or r1.prog != r2.prog:
                return violated(name, bounds, predicate="coupling", **where)
            if r1.mds != r2.mds:
                return violated(name, bounds, predicate="modes", **where)
            if not low_eq_mod_modes(policy, r1.mds, r1.mem, r2.mem):
                return violated(name, bounds, predicate="low-eq-mod-modes",
                                mem1_now=mem_json(r1.mem), mem2_now=mem_json(r2.mem),
                                **where)
            for w, r in ((w1, r1), (w2, r2)):
                if w.mem != r.mem or w.mds != r.mds:
                    return violated(name, bounds, predicate="refinement-edge", **where)
            if s1 or n >= max_steps:
                break
            if havoc is None:
                key = (w1.cmd, w2.cmd, r1.pc, r1.regs, r2.regs, r1.mds, r1.mem, r2.mem)
                if key in seen:
                    cycles += 1
                    break
                seen.add(key)
            a1, a2 = abs_steps(w1, r1), abs_steps(w2, r2)
            if a1 != a2:
                return violated(name, bounds, predicate="pacing", **where,
                                abs1=a1, abs2=a2)
            r1, _ = step_risc(r1, interp)
            r2, _ = step_risc(r2, interp)
            for _ in range(a1):
                if w1.stopped or w2.stopped:
                    return violated(name, bounds, predicate="pacing",
                                    detail="pacing demands a step of a stopped While program",
                                    **where)
                w1, _ = step_while(w1, interp)
                w2, _ = step_while(w2, interp)
            n += 1
            steps += 1
            if havoc is not None:
                hv = havoc.pair(r1.mds, r1.mem, r2.mem)
                if hv:
                    x, v1, v2 = hv
                    r1 = RiscConf(r1.pc, prog, r1.regs, r1.mds, r1.mem.set(x, v1))
                    r2 = RiscConf(r2.pc, prog, r2.regs, r2.mds, r2.mem.set(x, v2))
                    w1 = WhileConf(w1.cmd, w1.mds, w1.mem.set(x, v1))
                    w2 = WhileConf(w2.cmd, w2.mds, w2.mem.set(x, v2))
        step_counts.append(n)
    stats = {"pairs": npairs, "lockstep_steps": steps, "cycles_closed": cycles}
    if havoc:
        stats["havoc_writes"] = havoc.count
    notes = [BOUNDED_NOTE, "the bisimulation witness itself is existential; only its "
                           "necessary lockstep consequences are checked"]
    return CheckReport(name, "ok", bounds, stats=stats, notes=notes)


def check_no_high_branching(c: Cmd, policy: ClassificationPolicy, interp: LockInterp,
                            pairs: Iterable[tuple[Mem, Mem]], max_steps: int = 10_000,
                            mds0: ModeState | None = None) -> CheckReport:
    """Lockstep While runs: commands stay equal and no If branches on differing truth."""
    name = "nohb"
    mds0 = init_mds(interp) if mds0 is None else mds0
    bounds = {"max_steps": max_steps}
    npairs = cycles = 0
    for m1, m2 in pairs:
        npairs += 1
        w1, w2 = WhileConf(c, mds0, m1), WhileConf(c, mds0, m2)
        init = {"mem1": mem_json(m1), "mem2": mem_json(m2)}
        seen = set()
        for n in range(max_steps + 1):
            if w1.cmd != w2.cmd:
                return violated(name, bounds, predicate="command-divergence", step=n,
                                cmd1=short(w1.cmd), cmd2=short(w2.cmd), **init)
            if w1.stopped:
                break
            lm = leftmost_cmd(w1.cmd)
            if isinstance(lm, If):
                b1 = ev_exp(w1.mem, lm.cond) != 0
                b2 = ev_exp(w2.mem, lm.cond) != 0
                if b1 != b2:
                    return violated(name, bounds, predicate="high-branching", step=n,
                                    branch=short(lm), **init)
            if n == max_steps:
                break
            key = (w1.cmd, w1.mds, w2.mds, w1.mem, w2.mem)
            if key in seen:
                cycles += 1
                break
            seen.add(key)
            w1, _ = step_while(w1, interp)
            w2, _ = step_while(w2, interp)
    return CheckReport(name, "ok", bounds, stats={"pairs": npairs, "cycles_closed": cycles},
                       notes=[BOUNDED_NOTE])


def check_havoc_closure(relation_kind: str, c: Cmd, out: CompileOutput,
                        policy: ClassificationPolicy, interp: LockInterp,
                        confs, samples: int = 200, seed: int = 0,
                        max_steps: int = 2_000, rate: float = 0.25,
                        nregs: int = DEFAULT_REGISTERS) -> CheckReport:
    """Re-run an enclosing check under seeded environment writes.

    ``relation_kind`` is ``"refinement"`` (``confs`` are initial memories,
    writes identical on both sides) or ``"bisim"`` (``confs`` are memory
    pairs, writes keep the pair low-equivalent modulo modes).  ``samples``
    bounds the number of seeded runs; 0 means the base check without havoc.
    """
    confs = list(confs)
    if relation_kind == "refinement":
        base = check_refinement
        kw = {"init_mems": [], "interp": interp, "policy": policy}
    elif relation_kind in ("bisim", "coupling"):
        base = check_decomposed_side_conditions
        kw = {"pairs": [], "policy": policy, "interp": interp}
    else:
        raise ValueError(f"unknown relation kind {relation_kind!r}")
    key = "init_mems" if relation_kind == "refinement" else "pairs"
    if samples == 0:
        kw[key] = confs
        rep = base(c, out, max_steps=max_steps, nregs=nregs, **kw)
        rep.check = f"havoc-{relation_kind}"
        return rep
    reports = []
    for s in range(samples):
        kw[key] = [confs[s % len(confs)]]
        rep = base(c, out, max_steps=max_steps, nregs=nregs, havoc_rate=rate,
                   seed=seed + s, **kw)
        reports.append(rep)
        if not rep.ok:
            break
    rep = merge(reports, f"havoc-{relation_kind}")
    rep.bounds.update({"samples": samples, "seed": seed, "rate": rate})
    return rep
