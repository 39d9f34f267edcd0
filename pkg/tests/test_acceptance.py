"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import itertools
import operator
import random
import time

import pytest

from conftest import CORPUS_DIR
from gen import INTERP, POLICY, random_expr, random_program
from wrcompiler.compiler import (AsmRec, CompRec, compile_cmd, compile_expr, compile_program,
                                 concat_outputs, finalize, joinable)
from wrcompiler.core import ClassificationPolicy, Level, LockInterp, Mem, Static
from wrcompiler.corpus import load_corpus
from wrcompiler.harness import (GlobalConf, check_global_compatibility, check_sys_secure,
                                random_schedules, risc_system, run_schedule, while_system)
from wrcompiler.harness.hyper import sys_problem
from wrcompiler.risc import (Jmp, Jz, Load, MoveK, Nop, Op, RiscConf, RiscProgram, init_regs,
                             step_risc)
from wrcompiler.verify import Bounds, run_check
from wrcompiler.while_lang import (Const, Skip, Var, ev_exp, expr_depth, init_mds, lock_acq_upd,
                                   parse, parse_expr)

ENTRIES = {e.name: e for e in load_corpus(CORPUS_DIR)}
ACCEPTED = ["worker", "worker-leaky", "high-branch", "cddc"]
SECURE = ["worker", "cddc"]


@pytest.fixture
def report(capsys):
    """Print one PASS/FAIL line for a criterion, then fail the test if it did not hold."""
    def emit(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def _time(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


# 1 -------------------------------------------------------------------------------------

def test_criterion_1_corpus_compilation(report):
    def go():
        res = {}
        for name in ("worker", "cddc", "racy", "if-lock-mismatch"):
            e = ENTRIES[name]
            res[name] = e.compile()
        return res
    res, secs = _time(go)
    problems = []
    for name in ("worker", "cddc"):
        for f, out in zip(ENTRIES[name].thread_files, res[name]):
            if out.failed:
                problems.append(f"{name}/{f} rejected: {out.reason}")
    for name in ("racy", "if-lock-mismatch"):
        want = ENTRIES[name].expected["reason"]
        outs = res[name]
        if not any(o.failed and o.reason.startswith("stability check failed")
                   and want in o.reason for o in outs):
            problems.append(f"{name} not rejected with '{want}'")
    if secs >= 1.0:
        problems.append(f"took {secs:.2f}s")
    n = len(res["worker"]) + len(res["cddc"])
    report(1, not problems,
           f"{n} corpus threads compile, 2 negative variants rejected ({secs:.2f}s)"
           if not problems else "; ".join(problems))


# 2 -------------------------------------------------------------------------------------

def test_criterion_2_if_codegen_shape(report):
    pol = ClassificationPolicy({"v": Static(Level.Low)})
    interp = LockInterp({"k": ({"v"}, set())})
    C = CompRec({}, AsmRec(frozenset({"v"}), frozenset()))
    out = compile_cmd(C, None, 0, parse("if v != 0 then skip else skip fi"), interp, pol)
    # Pe | Jz br | P1 | Jmp ex | P2 (labelled br) | Nop
    golden = [(None, Load(0, "v")), (None, MoveK(1, 0)), (None, Op("!=", 0, 1)),
              (None, Jz(0, 0)),
              (None, Nop()),
              (None, Jmp(1)),
              (0, Nop()),
              (None, Nop())]
    ok = (not out.failed and out.instrs == golden and out.exit_label == 1
          and out.epilogue == {5, 7})
    report(2, ok, "segments Pe, Jz br, P1, Jmp ex, P2, Nop with br=L0 on P2 and ex=L1"
           if ok else f"got {out.instrs} exit={out.exit_label}")


# 3 -------------------------------------------------------------------------------------

def test_criterion_3_refinement_conformance(report):
    def go():
        return {name: run_check(ENTRIES[name], "refine",
                                Bounds(init_mems=100, max_steps=10_000, seed=0))
                for name in ACCEPTED}
    reps, secs = _time(go)
    bad = {n: r.to_json() for n, r in reps.items() if not r.ok}
    runs = sum(r.stats["runs"] for r in reps.values())
    ok = not bad and secs < 30
    report(3, ok, f"{runs} seeded runs over {len(ACCEPTED)} systems refine ({secs:.1f}s)"
           if ok else f"{bad or ''} {secs:.1f}s")


# 4 -------------------------------------------------------------------------------------

def test_criterion_4_lockstep_coupling(report):
    # secure programs must run in lockstep; the two negative controls must be caught
    def go():
        return {name: run_check(ENTRIES[name], "decomp", Bounds(max_steps=10_000))
                for name in ACCEPTED}
    reps, secs = _time(go)
    problems = [f"{n}: {reps[n].to_json()['counterexample']}" for n in SECURE if not reps[n].ok]
    problems += [f"{n}: timing difference missed" for n in ACCEPTED
                 if n not in SECURE and reps[n].verdict != "violated"]
    if secs >= 60:
        problems.append(f"took {secs:.1f}s")
    pairs = sum(reps[n].stats.get("pairs", 0) for n in SECURE)
    report(4, not problems,
           f"{pairs} initial pairs of secure systems couple; negative controls flagged "
           f"({secs:.1f}s)" if not problems else "; ".join(problems))


# 5 -------------------------------------------------------------------------------------

def test_criterion_5_whole_system(report):
    def go():
        w = run_check(ENTRIES["worker"], "hyper", Bounds(sched_len=8, random_schedules=0))
        c = run_check(ENTRIES["cddc"], "hyper",
                      Bounds(random_schedules=200, schedule_length=40, seed=7))
        return w, c
    (w, c), secs = _time(go)
    problems = []
    for name, rep in (("worker", w), ("cddc", c)):
        levels = rep.stats["levels"]
        if set(levels) != {"while", "risc"} or len(set(levels.values())) != 1:
            problems.append(f"{name}: level verdicts differ {levels}")
        if not rep.ok:
            problems.append(f"{name}: {rep.counterexample}")
    if secs >= 300:
        problems.append(f"took {secs:.0f}s")
    report(5, not problems,
           f"worker (all schedules <= 8) and cddc (200 x 40 seeded) secure at both levels "
           f"({secs:.1f}s)" if not problems else "; ".join(problems))


# 6 -------------------------------------------------------------------------------------

def test_criterion_6_mode_use(report):
    bad = {}
    for name in ACCEPTED:
        rep = run_check(ENTRIES[name], "global", Bounds(sched_len=8))
        if not rep.ok:
            bad[name] = rep.counterexample
    interp = ENTRIES["worker"].interp
    held = lock_acq_upd(init_mds(interp), "source_lock", interp)
    two = GlobalConf(((Skip(), held), (Skip(), held)), Mem().set_lock("source_lock", 1))
    flagged = check_global_compatibility(two, interp, sched_len=0)
    ok = not bad and flagged.verdict == "violated"
    report(6, ok, f"{len(ACCEPTED)} systems compatible at both levels; two-holder state "
                  f"flagged ({flagged.counterexample['predicate']})"
           if ok else f"{bad} two-holder={flagged.verdict}")


# 7 -------------------------------------------------------------------------------------

NAMES = ("a", "b", "c")
STABLE_LOCKS = LockInterp({"k": (set(NAMES), set())})
STABLE_REC = CompRec({}, AsmRec(frozenset(NAMES), frozenset()))
MEMS = [Mem(dict(zip(NAMES, vals))) for vals in itertools.product([0, 1, 2], repeat=3)]

# independent reference semantics: Python operators plus signed 64-bit wrap-around
PY_OPS = {"+": operator.add, "-": operator.sub, "*": operator.mul,
          "==": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le,
          "&&": lambda a, b: bool(a) and bool(b), "||": lambda a, b: bool(a) or bool(b)}


def _oracle(e, env: dict) -> int:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    v = int(PY_OPS[e.op](_oracle(e.left, env), _oracle(e.right, env)))
    return (v + 2**63) % 2**64 - 2**63


def _run_expr(rec, e, mems, interp):
    out = compile_expr(rec, set(), None, e)
    assert not out.failed
    prog = RiscProgram(tuple(li for li, _ in out.code))
    mds = init_mds(interp)
    for mem in mems:
        conf = RiscConf(0, prog, init_regs(), mds, mem)
        while conf.pc < len(prog):
            conf, _ = step_risc(conf, interp)
        yield mem, conf.regs[out.reg]


def test_criterion_7_expression_oracle(report):
    rng = random.Random(2024)
    mismatches = []
    count = 0
    while count < 1000:
        e = random_expr(rng, 4, NAMES)
        assert expr_depth(e) <= 4
        count += 1
        for mem, got in _run_expr(STABLE_REC, e, MEMS, STABLE_LOCKS):
            want = _oracle(e, {n: mem[n] for n in NAMES})
            if got != want or ev_exp(mem, e) != want:
                mismatches.append((e, mem))
    reg = parse_expr("v + (v + 1)")
    rec = CompRec({}, AsmRec(frozenset({"v"}), frozenset()))
    interp = LockInterp({"k": ({"v"}, set())})
    for mem, got in _run_expr(rec, reg, [Mem({"v": v}) for v in range(-5, 6)], interp):
        if got != 2 * mem["v"] + 1:
            mismatches.append((reg, mem))
    report(7, not mismatches,
           f"{count} expressions x {len(MEMS)} memories match the reference semantics; "
           "v+(v+1) = 2v+1" if not mismatches else f"{len(mismatches)} mismatches, "
                                                   f"first {mismatches[0]}")


# 8 -------------------------------------------------------------------------------------

def test_criterion_8_joinable(report):
    rng = random.Random(8)
    problems = []
    for n in range(500):
        c1, c2 = random_program(rng), random_program(rng)
        o1 = compile_program(c1, INTERP, POLICY)
        o2 = compile_cmd(o1.final_rec, o1.exit_label, o1.next_label, c2, INTERP, POLICY)
        if o1.failed or o2.failed:
            problems.append(f"pair {n} rejected")
            continue
        if not joinable(o1.annotated, o2.annotated):
            problems.append(f"pair {n} not joinable")
            continue
        try:
            finalize(concat_outputs(o1, o2))
        except KeyError as exc:
            problems.append(f"pair {n}: unbound label {exc}")
    report(8, not problems, "500 consecutively compiled pairs are joinable and finalize"
           if not problems else "; ".join(problems[:3]))


# 9 -------------------------------------------------------------------------------------

def test_criterion_9_leak_detection(report):
    e = ENTRIES["worker-leaky"]
    scheds = random_schedules(len(e.threads), e.bound("random_schedules"),
                              e.bound("schedule_length"), e.bound("seed"))
    progs = [finalize(o) for o in e.compiled]
    problems, details = [], []
    for level, threads in (("while", e.threads), ("risc", progs)):
        rep = check_sys_secure(threads, e.policy, e.interp, e.pairs(), schedules=scheds)
        if rep.verdict != "violated":
            problems.append(f"{level}: leak missed")
            continue
        cex = rep.counterexample
        m1, m2 = Mem(_vars(cex["mem1"])), Mem(_vars(cex["mem2"]))
        build = (lambda m: while_system(e.threads, e.interp, m)) if level == "while" else \
            (lambda m: risc_system(progs, e.interp, m))
        g1 = run_schedule(build(m1), cex["schedule"], e.interp)
        g2 = run_schedule(build(m2), cex["schedule"], e.interp)
        if sys_problem(e.policy, g1, g2) is None:
            problems.append(f"{level}: counterexample does not replay")
        details.append(f"{level}: {cex['predicate']} on {cex.get('variable', '-')} after "
                       f"{len(cex['schedule'])} steps")
    report(9, not problems, "; ".join(details) if not problems else "; ".join(problems))


def _vars(j: dict) -> dict:
    return {k: v for k, v in j.items() if not k.startswith("lock:")}
