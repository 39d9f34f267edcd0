import random

import pytest

from conftest import CORPUS_DIR
from gen import INTERP, POLICY, random_program
from wrcompiler.compiler import (INIT_COMPREC, AsmRec, CompRec, annotated_json, compile_cmd,
                                 compile_expr, compile_program, concat_outputs, finalize,
                                 joinable, labels_of, reg_alloc, reg_alloc_cached, regrec_stable,
                                 stability_problem, var_stable)
from wrcompiler.core import ClassificationPolicy, Level, LockInterp, Mem, Static, ValueDep
from wrcompiler.corpus import load_corpus
from wrcompiler.risc import (Jmp, Jz, Load, LockAcq, LockRel, MoveK, Nop, Op, RiscConf,
                             RiscProgram, Store, init_regs, step_risc)
from wrcompiler.while_lang import Var, init_mds, parse, parse_expr

POL = ClassificationPolicy({"v": Static(Level.Low), "c": Static(Level.Low),
                            "s": ValueDep("c", frozenset({0})), "y": Static(Level.Low),
                            "z": Static(Level.Low), "free": Static(Level.Low)})
LOCKS = LockInterp({"k": ({"v", "y", "z"}, set()), "j": ({"s", "c"}, set())})
STABLE = CompRec({}, AsmRec(frozenset({"v", "y", "z"})))


def test_var_stable():
    S = AsmRec(frozenset({"s"}), frozenset())
    assert not var_stable(S, POL, "s")          # control variable c is not covered
    assert var_stable(AsmRec(frozenset({"s"}), frozenset({"c"})), POL, "s")
    assert var_stable(AsmRec(frozenset(), frozenset({"v"})), POL, "v")
    assert not var_stable(AsmRec(), POL, "v")


def test_reg_alloc():
    assert reg_alloc({}, set()) == 0
    assert reg_alloc({0: Var("x")}, set()) == 1
    assert reg_alloc({0: Var("x")}, {1}) == 2
    assert reg_alloc({0: Var("x"), 1: Var("y")}, set(), nregs=2) == 0
    assert reg_alloc({}, {0, 1}, nregs=2) is None
    assert reg_alloc_cached({3: Var("x")}, set(), "x") == 3
    assert reg_alloc_cached({3: Var("x")}, {3}, "x") is None


def test_compile_expr_sum():
    out = compile_expr(STABLE, set(), None, parse_expr("y + z"))
    assert [ins for (_, ins), _ in out.code] == [Load(0, "y"), Load(1, "z"), Op("+", 0, 1)]
    assert out.reg == 0 and not out.failed
    assert out.rec.regrec == {0: parse_expr("y + z"), 1: Var("z")}


def test_compile_expr_cache_hit_emits_nothing():
    C = CompRec({2: Var("y")}, STABLE.asmrec)
    out = compile_expr(C, set(), 5, Var("y"))
    assert out.code == [] and out.reg == 2 and out.rec == C


def test_compile_expr_repeated_variable():
    # the cached copy of v is clobbered by the outer Op, so the inner use reloads
    e = parse_expr("v + (v + 1)")
    out = compile_expr(STABLE, set(), None, e)
    for v in range(-3, 4):
        regs = _run_code(out.code, Mem({"v": v}))
        assert regs[out.reg] == 2 * v + 1


def test_compile_expr_register_exhaustion():
    e = parse_expr("y + (z + (v + y))")
    assert compile_expr(STABLE, set(), None, e, nregs=3).failed
    assert not compile_expr(STABLE, set(), None, e, nregs=4).failed
    out = compile_cmd(STABLE, None, 0, parse("free := y + (z + (v + y))"), LOCKS, POL, nregs=2)
    assert out.failed and "needs more than 2 registers" in out.reason


def _run_code(code, mem, nregs=8):
    prog = RiscProgram(tuple(li for li, _ in code))
    c = RiscConf(0, prog, init_regs(nregs), init_mds(LOCKS), mem)
    while c.pc < len(prog):
        c, _ = step_risc(c, LOCKS)
    return c.regs


def test_skip_compiles_to_nop():
    out = compile_cmd(INIT_COMPREC, 4, 5, parse("skip"), LOCKS, POL)
    assert out.instrs == [(4, Nop())] and out.exit_label is None and out.next_label == 5


def test_assign_caches_stable_target():
    out = compile_cmd(STABLE, None, 0, parse("v := y"), LOCKS, POL)
    assert [i for _, i in out.instrs] == [Load(0, "y"), Store("v", 0)]
    assert out.final_rec.regrec == {0: Var("v")}
    out = compile_cmd(STABLE, None, 0, parse("free := y"), LOCKS, POL)
    assert out.final_rec.regrec == {0: Var("y")}


def test_assign_drops_stale_entries():
    C = CompRec({0: parse_expr("v + 1"), 1: Var("y")}, STABLE.asmrec)
    out = compile_cmd(C, None, 0, parse("v := 2"), LOCKS, POL)
    assert 0 not in out.final_rec.regrec or out.final_rec.regrec[0] != parse_expr("v + 1")
    assert out.final_rec.regrec[1] == Var("y")


def test_lock_instructions_and_release_flush():
    out = compile_program(parse("acquire(k); free := v; release(k)"), LOCKS, POL)
    assert [i for _, i in out.instrs] == [LockAcq("k"), Load(0, "v"), Store("free", 0),
                                          LockRel("k")]
    assert out.records[1].asmrec.no_w == {"v", "y", "z"}
    assert out.final_rec == INIT_COMPREC


@pytest.mark.parametrize("src,reason", [
    ("free := v", "reads unstable variable"),
    ("acquire(k); if v then release(k) else skip fi", "branches of an if end with different"),
    ("acquire(k); while v do release(k) od", "while body does not restore"),
    ("v := 1", "lock-governed variable v without holding its lock"),
    ("acquire(j); free := s; release(j)", None),
    ("acquire(nope)", "unknown lock nope"),
])
def test_stability_examples(src, reason):
    problem = stability_problem(parse(src), INIT_COMPREC, LOCKS, POL)
    if reason is None:
        assert problem is None
    else:
        assert reason in problem
        out = compile_program(parse(src), LOCKS, POL)
        assert out.failed and out.reason.startswith("stability check failed: ")
        assert out.annotated == []


def test_control_variable_needed_for_stability():
    pol = ClassificationPolicy({**POL.classes})
    locks = LockInterp({"j": ({"s"}, set()), "q": ({"c"}, set())})
    assert stability_problem(parse("acquire(j); free := s; release(j)"), INIT_COMPREC,
                             locks, pol)
    assert stability_problem(parse("acquire(j); acquire(q); free := s; release(q); release(j)"),
                             INIT_COMPREC, locks, pol) is None


def test_bad_incoming_label_is_rejected():
    out = compile_cmd(INIT_COMPREC, 3, 3, parse("skip"), LOCKS, POL)
    assert out.failed


def test_if_shape():
    out = compile_cmd(STABLE, None, 0, parse("if v != 0 then skip else skip fi"), LOCKS, POL)
    code = [i for _, i in out.instrs]
    assert code == [Load(0, "v"), MoveK(1, 0), Op("!=", 0, 1), Jz(0, 0), Nop(), Jmp(1), Nop(),
                    Nop()]
    assert out.instrs[6][0] == 0 and out.exit_label == 1 and out.next_label == 2
    assert out.epilogue == {5, 7}


def test_while_shape():
    out = compile_cmd(STABLE, None, 0, parse("while v do skip od"), LOCKS, POL)
    code = out.instrs
    assert code[0] == (0, Load(0, "v"))
    assert code[1] == (None, Jz(1, 0))
    assert code[-1] == (None, Jmp(0))
    assert out.exit_label == 1 and out.epilogue == {3}
    # with an incoming label the loop head reuses it
    out = compile_cmd(STABLE, 0, 1, parse("while v do skip od"), LOCKS, POL)
    assert out.instrs[0][0] == 0 and out.instrs[-1][1] == Jmp(0) and out.exit_label == 1


def test_joinable_examples():
    p1 = [(None, Jz(3, 0)), (None, Nop())]
    assert joinable(p1, [(3, Nop())])
    assert not joinable(p1, [(None, Nop())])
    assert not joinable([(2, Nop())], [(None, Jmp(2))])
    assert joinable([(2, Nop()), (None, Jmp(2))], [(None, Nop())])


def test_finalize_binds_exit_label():
    out = compile_cmd(STABLE, None, 0, parse("if v then skip else skip fi"), LOCKS, POL)
    prog = finalize(out)
    assert prog.labels[out.exit_label] == len(prog)
    with pytest.raises(ValueError):
        finalize(compile_program(parse("free := v"), LOCKS, POL))


def test_annotated_json_shape():
    out = compile_program(parse("acquire(k); if v then skip else skip fi; release(k)"), LOCKS, POL)
    doc = annotated_json(out)
    assert doc["failed"] is False and len(doc["code"]) == len(out.annotated)
    assert {"pc", "label", "instr", "regrec", "asmrec"} <= set(doc["code"][0])
    assert any(row["instr"] == "Nop'" for row in doc["code"])


# -- properties over the corpus and generated programs ------------------------------

def _accepted():
    items = []
    for entry in load_corpus(CORPUS_DIR):
        for c, out in zip(entry.threads, entry.compiled):
            if not out.failed:
                items.append((c, out, entry.policy))
    rng = random.Random(21)
    for _ in range(150):
        c = random_program(rng)
        items.append((c, compile_program(c, INTERP, POLICY), POLICY))
    return items


ACCEPTED = _accepted()


def test_generated_programs_are_accepted():
    assert all(not out.failed for _, out, _ in ACCEPTED)


def test_every_annotation_is_stable():
    for _, out, policy in ACCEPTED:
        for C in out.records + [out.final_rec]:
            assert regrec_stable(C, policy)


def test_labels_are_fresh_and_bounded():
    for _, out, _ in ACCEPTED:
        labs = [lab for lab, _ in out.instrs if lab is not None]
        assert len(labs) == len(set(labs))
        assert all(0 <= lab < out.next_label for lab in labs)
        if out.exit_label is not None:
            assert out.exit_label not in labs and out.exit_label < out.next_label
        finalize(out).check_labels()


def test_epilogue_marks_only_control_flow():
    for _, out, _ in ACCEPTED:
        for pc in out.epilogue:
            assert isinstance(out.instrs[pc][1], (Jmp, Nop))


def test_consecutive_compilation_is_joinable():
    rng = random.Random(22)
    for _ in range(100):
        c1, c2 = random_program(rng), random_program(rng)
        o1 = compile_program(c1, INTERP, POLICY)
        o2 = compile_cmd(o1.final_rec, o1.exit_label, o1.next_label, c2, INTERP, POLICY)
        assert not o2.failed
        assert joinable(o1.annotated, o2.annotated)
        prog = finalize(concat_outputs(o1, o2))
        assert labels_of(prog.instrs) | {prog.exit_label} >= prog.jump_targets()
