"""Single-pass compiler from While to RISC.

Every emitted instruction is annotated with the compilation record that holds
*before* it executes: a register record (which registers are known to hold
which expressions) and an assumption record (which variables the thread has
exclusive-access assumptions on, mirroring AsmNoW/AsmNoRW).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from . import risc
from .core import ClassificationPolicy, LockInterp, Mem, ModeState, UnknownLock
from .risc import DEFAULT_REGISTERS, RiscProgram
from .while_lang import (Assign, Cmd, Const, Expr, If, LockAcq, LockRel,
                         Seq, Skip, Stop, Var, While, ev_exp, expr_vars,
                         pretty_expr)


class AsmRec(NamedTuple):
    no_w: frozenset = frozenset()
    no_rw: frozenset = frozenset()

    @property
    def covered(self) -> frozenset:
        return self.no_w | self.no_rw


@dataclass(frozen=True)
class CompRec:
    regrec: dict = field(default_factory=dict)    # reg -> Expr
    asmrec: AsmRec = AsmRec()

    def to_json(self) -> dict:
        return {"regrec": {f"r{r}": pretty_expr(e) for r, e in sorted(self.regrec.items())},
                "asmrec": {"no_w": sorted(self.asmrec.no_w),
                           "no_rw": sorted(self.asmrec.no_rw)}}


INIT_COMPREC = CompRec()


def var_stable(S: AsmRec, policy: ClassificationPolicy, v: str) -> bool:
    cov = S.covered
    return v in cov and all(c in cov for c in policy.cvars(v))


def regrec_stable(C: CompRec, policy: ClassificationPolicy) -> bool:
    return all(var_stable(C.asmrec, policy, v)
               for e in C.regrec.values() for v in expr_vars(e))


def regrec_mem_consistent(C: CompRec, regs, mem: Mem) -> bool:
    return all(regs[r] == ev_exp(mem, e) for r, e in C.regrec.items())


def asmrec_mds_consistent(C: CompRec, mds: ModeState) -> bool:
    return C.asmrec.no_w == mds.asm_no_w and C.asmrec.no_rw == mds.asm_no_rw


def config_consistent(C: CompRec, regs, mds: ModeState, mem: Mem) -> bool:
    return regrec_mem_consistent(C, regs, mem) and asmrec_mds_consistent(C, mds)


# -- register allocation --------------------------------------------------------

def reg_alloc(phi: dict, A, nregs: int = DEFAULT_REGISTERS) -> Optional[int]:
    """Lowest free register outside ``A``, preferring ones with no record entry."""
    free = [r for r in range(nregs) if r not in A]
    for r in free:
        if r not in phi:
            return r
    return free[0] if free else None


def reg_alloc_cached(phi: dict, A, v: str, nregs: int = DEFAULT_REGISTERS) -> Optional[int]:
    for r in range(nregs):
        if r not in A and phi.get(r) == Var(v):
            return r
    return None


# -- expressions ----------------------------------------------------------------

class ExprOutput(NamedTuple):
    code: list          # [((label, instr), CompRec)]
    reg: Optional[int]
    rec: CompRec
    failed: bool


def _with(phi: dict, r: int, e: Expr) -> dict:
    phi = dict(phi)
    phi[r] = e
    return phi


def compile_expr(C: CompRec, A, l, e: Expr, nregs: int = DEFAULT_REGISTERS) -> ExprOutput:
    """Compile ``e`` into a register outside ``A``.

    The label ``l`` goes on the first emitted instruction; when nothing is
    emitted (a cache hit) the caller still owns it.
    """
    phi, S = C.regrec, C.asmrec
    if isinstance(e, Const):
        r = reg_alloc(phi, A, nregs)
        if r is None:
            return ExprOutput([], None, C, True)
        return ExprOutput([((l, risc.MoveK(r, e.value)), C)], r,
                          CompRec(_with(phi, r, e), S), False)
    if isinstance(e, Var):
        r = reg_alloc_cached(phi, A, e.name, nregs)
        if r is not None:
            return ExprOutput([], r, C, False)
        r = reg_alloc(phi, A, nregs)
        if r is None:
            return ExprOutput([], None, C, True)
        return ExprOutput([((l, risc.Load(r, e.name)), C)], r,
                          CompRec(_with(phi, r, e), S), False)
    p1, r1, C1, f1 = compile_expr(C, A, l, e.left, nregs)
    if f1:
        return ExprOutput([], None, C, True)
    p2, r2, C2, f2 = compile_expr(C1, set(A) | {r1}, l if not p1 else None,
                                  e.right, nregs)
    if f2:
        return ExprOutput([], None, C, True)
    lab = l if not p1 and not p2 else None
    code = p1 + p2 + [((lab, risc.Op(e.op, r1, r2)), C2)]
    return ExprOutput(code, r1, CompRec(_with(C2.regrec, r1, e), C2.asmrec), False)


# -- stability checks -----------------------------------------------------------

def acq_asmrec(S: AsmRec, k: str, interp: LockInterp) -> AsmRec:
    return AsmRec(S.no_w | interp.no_w(k), S.no_rw | interp.no_rw(k))


def rel_asmrec(S: AsmRec, k: str, interp: LockInterp) -> AsmRec:
    return AsmRec(S.no_w - interp.no_w(k), S.no_rw - interp.no_rw(k))


class StabilityError(Exception):
    pass


def _check(c: Cmd, S: AsmRec, interp, policy) -> AsmRec:
    def exprs_stable(e, what):
        bad = sorted(v for v in expr_vars(e) if not var_stable(S, policy, v))
        if bad:
            raise StabilityError(f"{what} reads unstable variable(s) {', '.join(bad)}; "
                                 "hold a lock covering them (and their control "
                                 "variables) first")

    if isinstance(c, Skip):
        return S
    if isinstance(c, Stop):
        raise StabilityError("a terminated command has no compilation")
    if isinstance(c, Assign):
        exprs_stable(c.expr, f"assignment to {c.var}")
        if not var_stable(S, policy, c.var) and c.var in interp.governed():
            raise StabilityError(f"assignment to lock-governed variable {c.var} "
                                 "without holding its lock")
        return S
    if isinstance(c, Seq):
        return _check(c.second, _check(c.first, S, interp, policy), interp, policy)
    if isinstance(c, If):
        exprs_stable(c.cond, "if-condition")
        S1 = _check(c.then, S, interp, policy)
        S2 = _check(c.orelse, S, interp, policy)
        if S1 != S2:
            raise StabilityError("branches of an if end with different locks held")
        return S1
    if isinstance(c, While):
        exprs_stable(c.cond, "while-condition")
        if _check(c.body, S, interp, policy) != S:
            raise StabilityError("while body does not restore the locks held on entry")
        return S
    if isinstance(c, (LockAcq, LockRel)):
        if c.lock not in interp:
            raise StabilityError(f"unknown lock {c.lock}")
        if isinstance(c, LockAcq):
            return acq_asmrec(S, c.lock, interp)
        return rel_asmrec(S, c.lock, interp)
    raise TypeError(c)


def stability_problem(c: Cmd, C: CompRec, interp: LockInterp,
                      policy: ClassificationPolicy) -> Optional[str]:
    """The first stability-check failure for ``c`` from record ``C``, if any."""
    try:
        _check(c, C.asmrec, interp, policy)
    except StabilityError as e:
        return str(e)
    return None


def stability_checks(c: Cmd, C: CompRec, interp: LockInterp,
                     policy: ClassificationPolicy) -> bool:
    return stability_problem(c, C, interp, policy) is None


# -- commands -------------------------------------------------------------------

@dataclass
class CompileOutput:
    annotated: list                 # [((label, instr), CompRec)]
    exit_label: Optional[int]
    next_label: int
    final_rec: CompRec
    failed: bool = False
    reason: Optional[str] = None
    epilogue: frozenset = frozenset()   # indices of control-flow-only Jmp/Nop

    @property
    def instrs(self) -> list:
        return [li for li, _ in self.annotated]

    @property
    def records(self) -> list:
        return [C for _, C in self.annotated]


class CompileFailure(Exception):
    pass


def _fail(C, nl, reason) -> CompileOutput:
    return CompileOutput([], None, nl, C, True, reason)


def _shift(s, k):
    return frozenset(i + k for i in s)


class _Compiler:
    def __init__(self, interp, policy, nregs):
        self.interp = interp
        self.policy = policy
        self.nregs = nregs

    def expr(self, C, l, e):
        out = compile_expr(C, set(), l, e, self.nregs)
        if out.failed:
            raise CompileFailure(f"expression {pretty_expr(e)} needs more than "
                                 f"{self.nregs} registers")
        return out

    def cmd(self, C: CompRec, l, nl: int, c: Cmd):
        """Returns (annotated, exit_label, next_label, final_rec, epilogue)."""
        if isinstance(c, Skip):
            return [((l, risc.Nop()), C)], None, nl, C, frozenset()
        if isinstance(c, Assign):
            pe, r, C1, _ = self.expr(C, l, c.expr)
            code = pe + [((l if not pe else None, risc.Store(c.var, r)), C1)]
            phi = {q: e for q, e in C1.regrec.items() if c.var not in expr_vars(e)}
            if var_stable(C1.asmrec, self.policy, c.var):
                phi[r] = Var(c.var)
            return code, None, nl, CompRec(phi, C1.asmrec), frozenset()
        if isinstance(c, Seq):
            p1, l1, nl1, C1, ep1 = self.cmd(C, l, nl, c.first)
            p2, l2, nl2, C2, ep2 = self.cmd(C1, l1, nl1, c.second)
            return p1 + p2, l2, nl2, C2, ep1 | _shift(ep2, len(p1))
        if isinstance(c, If):
            pe, r, C1, _ = self.expr(C, l, c.cond)
            br, ex = nl, nl + 1
            p1, l1, nl1, C2, ep1 = self.cmd(C1, None, nl + 2, c.then)
            p2, l2, nl2, C3, ep2 = self.cmd(C1, br, nl1, c.orelse)
            if C2.asmrec != C3.asmrec:
                raise CompileFailure("branches of an if end with different locks held")
            meet = {q: e for q, e in C2.regrec.items() if C3.regrec.get(q) == e}
            code = (pe + [((l if not pe else None, risc.Jz(br, r)), C1)]
                    + p1 + [((l1, risc.Jmp(ex)), C2)]
                    + p2 + [((l2, risc.Nop()), C3)])
            o1 = len(pe) + 1
            o2 = o1 + len(p1) + 1
            ep = (_shift(ep1, o1) | _shift(ep2, o2)
                  | {o1 + len(p1), len(code) - 1})
            return code, ex, nl2, CompRec(meet, C2.asmrec), ep
        if isinstance(c, While):
            S = C.asmrec
            C0 = CompRec({}, S)
            if l is None:
                lh, ex, nl1 = nl, nl + 1, nl + 2
            else:
                lh, ex, nl1 = l, nl, nl + 1
            pe, r, C1, _ = self.expr(C0, lh, c.cond)
            pb, lb, nl2, Cb, epb = self.cmd(C1, None, nl1, c.body)
            if Cb.asmrec != S:
                raise CompileFailure("while body does not restore the locks held on entry")
            code = (pe + [((lh if not pe else None, risc.Jz(ex, r)), C1)]
                    + pb + [((lb, risc.Jmp(lh)), Cb)])
            ep = _shift(epb, len(pe) + 1) | {len(code) - 1}
            return code, ex, nl2, C0, ep
        if isinstance(c, LockAcq):
            S1 = acq_asmrec(C.asmrec, c.lock, self.interp)
            return [((l, risc.LockAcq(c.lock)), C)], None, nl, CompRec(C.regrec, S1), frozenset()
        if isinstance(c, LockRel):
            S1 = rel_asmrec(C.asmrec, c.lock, self.interp)
            phi = {q: e for q, e in C.regrec.items()
                   if all(var_stable(S1, self.policy, v) for v in expr_vars(e))}
            return [((l, risc.LockRel(c.lock)), C)], None, nl, CompRec(phi, S1), frozenset()
        if isinstance(c, Stop):
            raise CompileFailure("a terminated command has no compilation")
        raise TypeError(c)


def compile_cmd(C: CompRec, l: Optional[int], nl: int, c: Cmd, interp: LockInterp,
                policy: ClassificationPolicy,
                nregs: int = DEFAULT_REGISTERS) -> CompileOutput:
    """Compile ``c`` starting at label counter ``nl`` with incoming label ``l``.

    Rejections are reported through ``failed``/``reason``; the annotated
    list is then empty.
    """
    if isinstance(c, Stop):
        return _fail(C, nl, "a terminated command has no compilation")
    if l is not None and l >= nl:
        return _fail(C, nl, f"incoming label {l} is not below the label counter {nl}")
    if not regrec_stable(C, policy):
        return _fail(C, nl, "input register record mentions unstable variables")
    try:
        problem = stability_problem(c, C, interp, policy)
    except UnknownLock as e:
        problem = f"unknown lock {e.args[0]}"
    if problem:
        return _fail(C, nl, f"stability check failed: {problem}")
    try:
        code, ex, nl2, C2, ep = _Compiler(interp, policy, nregs).cmd(C, l, nl, c)
    except CompileFailure as e:
        return _fail(C, nl, str(e))
    return CompileOutput(code, ex, nl2, C2, False, None, ep)


def compile_program(c: Cmd, interp: LockInterp, policy: ClassificationPolicy,
                    nregs: int = DEFAULT_REGISTERS) -> CompileOutput:
    return compile_cmd(INIT_COMPREC, None, 0, c, interp, policy, nregs)


def labels_of(instrs) -> set:
    return {lab for lab, _ in instrs if lab is not None}


def _targets(instrs) -> set:
    return {ins.label for _, ins in instrs if isinstance(ins, (risc.Jmp, risc.Jz))}


def joinable_fwd(p1, p2) -> bool:
    allowed = labels_of(p1)
    if p2 and p2[0][0] is not None:
        allowed = allowed | {p2[0][0]}
    return _targets(p1) <= allowed


def joinable_bwd(p1, p2) -> bool:
    return not (_targets(p2) & labels_of(p1))


def joinable(p1, p2) -> bool:
    """Whether two instruction lists may be concatenated without cross-jumps.

    Accepts ``[(label, instr)]`` lists or annotated ``[((label, instr), C)]``.
    """
    p1, p2 = _plain(p1), _plain(p2)
    return joinable_fwd(p1, p2) and joinable_bwd(p1, p2)


def _plain(p):
    if isinstance(p, RiscProgram):
        return list(p.instrs)
    return [x[0] if isinstance(x[0], tuple) else x for x in p]


def finalize(out: CompileOutput) -> RiscProgram:
    """Strip annotations and bind the dangling exit label to the end."""
    if out.failed:
        raise ValueError(f"cannot finalize a failed compilation: {out.reason}")
    prog = RiscProgram(tuple(out.instrs), out.exit_label, out.epilogue)
    prog.check_labels()
    return prog


def concat_outputs(o1: CompileOutput, o2: CompileOutput) -> CompileOutput:
    """Join two consecutively compiled outputs (``o2`` started from ``o1``'s exit)."""
    ep = o1.epilogue | _shift(o2.epilogue, len(o1.annotated))
    return CompileOutput(o1.annotated + o2.annotated, o2.exit_label, o2.next_label,
                         o2.final_rec, o1.failed or o2.failed,
                         o1.reason or o2.reason, ep)


def annotated_json(out: CompileOutput) -> dict:
    rows = []
    for i, ((lab, ins), C) in enumerate(out.annotated):
        rows.append({"pc": i, "label": lab,
                     "instr": risc.format_instr(ins, i in out.epilogue),
                     **C.to_json()})
    return {"failed": out.failed, "reason": out.reason,
            "exit_label": out.exit_label, "next_label": out.next_label,
            "final": out.final_rec.to_json(), "code": rows}
