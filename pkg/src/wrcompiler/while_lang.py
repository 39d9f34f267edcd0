"""Source language: While with mutex locks.

Expressions are ``n | v | e op e``; commands add skip, sequencing,
conditionals, loops, assignment and lock acquire/release.  The small-step
semantics is deterministic and threads the assume/guarantee mode state
through the lock primitives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Union

from .core import (LOCK_FALSE, LOCK_TRUE, LockInterp, Mem, ModeState,
                   UnknownLock, ev_lock, wrap)

# Operators, loosest binding first.
PRECEDENCE = [("||",), ("&&",), ("==", "!="), ("<", "<="), ("+", "-"), ("*",)]
OPS = tuple(op for level in PRECEDENCE for op in level)


def apply_op(op: str, a: int, b: int) -> int:
    if op == "+":
        return wrap(a + b)
    if op == "-":
        return wrap(a - b)
    if op == "*":
        return wrap(a * b)
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == "&&":
        return int(a != 0 and b != 0)
    if op == "||":
        return int(a != 0 or b != 0)
    raise ValueError(f"unknown operator {op!r}")


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


Expr = Union[Const, Var, BinOp]


def expr_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    return frozenset()


def expr_depth(e: Expr) -> int:
    if isinstance(e, BinOp):
        return 1 + max(expr_depth(e.left), expr_depth(e.right))
    return 1


def ev_exp(mem: Mem, e: Expr) -> int:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return mem[e.name]
    return apply_op(e.op, ev_exp(mem, e.left), ev_exp(mem, e.right))


# -- commands ----------------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class Seq:
    first: "Cmd"
    second: "Cmd"


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Cmd"
    orelse: "Cmd"


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Cmd"


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr


@dataclass(frozen=True)
class LockAcq:
    lock: str


@dataclass(frozen=True)
class LockRel:
    lock: str


Cmd = Union[Skip, Stop, Seq, If, While, Assign, LockAcq, LockRel]
STOP = Stop()


def seq(*cmds: Cmd) -> Cmd:
    """Right-nested sequence of one or more commands."""
    if not cmds:
        return Skip()
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Seq(c, out)
    return out


def leftmost_cmd(c: Cmd) -> Cmd:
    while isinstance(c, Seq):
        c = c.first
    return c


def cmd_vars(c: Cmd) -> frozenset:
    if isinstance(c, Seq):
        return cmd_vars(c.first) | cmd_vars(c.second)
    if isinstance(c, If):
        return expr_vars(c.cond) | cmd_vars(c.then) | cmd_vars(c.orelse)
    if isinstance(c, While):
        return expr_vars(c.cond) | cmd_vars(c.body)
    if isinstance(c, Assign):
        return frozenset([c.var]) | expr_vars(c.expr)
    return frozenset()


def cmd_locks(c: Cmd) -> frozenset:
    if isinstance(c, Seq):
        return cmd_locks(c.first) | cmd_locks(c.second)
    if isinstance(c, If):
        return cmd_locks(c.then) | cmd_locks(c.orelse)
    if isinstance(c, While):
        return cmd_locks(c.body)
    if isinstance(c, (LockAcq, LockRel)):
        return frozenset([c.lock])
    return frozenset()


# -- parsing -----------------------------------------------------------------

class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


KEYWORDS = {"skip", "if", "then", "else", "fi", "while", "do", "od",
            "acquire", "release"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*|//[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<=|&&|\|\||[+\-*<;()])
""", re.VERBOSE)


class _Tok(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}",
                             line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        found = tok.text or "end of input"
        raise ParseError(f"{msg}, found {found!r}", tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text or t.kind not in ("kw", "op"):
            self.error(f"expected {text!r}")
        return self.next()

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "ident":
            self.error("expected identifier")
        return self.next().text

    def cmd(self) -> Cmd:
        stmts = [self.stmt()]
        while self.peek().text == ";":
            self.next()
            stmts.append(self.stmt())
        return seq(*stmts)

    def stmt(self) -> Cmd:
        t = self.peek()
        if t.kind == "kw":
            if t.text == "skip":
                self.next()
                return Skip()
            if t.text == "if":
                self.next()
                e = self.expr()
                self.expect("then")
                c1 = self.cmd()
                self.expect("else")
                c2 = self.cmd()
                self.expect("fi")
                return If(e, c1, c2)
            if t.text == "while":
                self.next()
                e = self.expr()
                self.expect("do")
                body = self.cmd()
                self.expect("od")
                return While(e, body)
            if t.text in ("acquire", "release"):
                self.next()
                self.expect("(")
                k = self.ident()
                self.expect(")")
                return LockAcq(k) if t.text == "acquire" else LockRel(k)
            self.error("expected a command")
        if t.kind == "ident":
            v = self.next().text
            self.expect(":=")
            return Assign(v, self.expr())
        self.error("expected a command")

    def expr(self, level: int = 0) -> Expr:
        if level == len(PRECEDENCE):
            return self.atom()
        left = self.expr(level + 1)
        while self.peek().kind == "op" and self.peek().text in PRECEDENCE[level]:
            op = self.next().text
            left = BinOp(op, left, self.expr(level + 1))
        return left

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return Const(wrap(int(t.text)))
        if t.kind == "ident":
            self.next()
            return Var(t.text)
        if t.text == "-" and self.toks[self.i + 1].kind == "num":
            self.next()
            return Const(wrap(-int(self.next().text)))
        if t.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected an expression")


def parse(src: str) -> Cmd:
    p = _Parser(src)
    c = p.cmd()
    if p.peek().kind != "eof":
        p.error("expected ';' or end of input")
    return c


def parse_expr(src: str) -> Expr:
    p = _Parser(src)
    e = p.expr()
    if p.peek().kind != "eof":
        p.error("trailing input after expression")
    return e


# -- pretty printing -----------------------------------------------------------

def _prec(op: str) -> int:
    for i, level in enumerate(PRECEDENCE):
        if op in level:
            return i
    raise ValueError(op)


def pretty_expr(e: Expr, level: int = 0) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    p = _prec(e.op)
    # operators are left-associative: the right operand needs a tighter level
    s = f"{pretty_expr(e.left, p)} {e.op} {pretty_expr(e.right, p + 1)}"
    return f"({s})" if p < level else s


def pretty(c: Cmd, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(c, Seq):
        return pretty(c.first, indent) + ";\n" + pretty(c.second, indent)
    if isinstance(c, Skip):
        return pad + "skip"
    if isinstance(c, Stop):
        return pad + "<stop>"
    if isinstance(c, Assign):
        return f"{pad}{c.var} := {pretty_expr(c.expr)}"
    if isinstance(c, LockAcq):
        return f"{pad}acquire({c.lock})"
    if isinstance(c, LockRel):
        return f"{pad}release({c.lock})"
    if isinstance(c, If):
        return (f"{pad}if {pretty_expr(c.cond)} then\n{pretty(c.then, indent + 1)}\n"
                f"{pad}else\n{pretty(c.orelse, indent + 1)}\n{pad}fi")
    if isinstance(c, While):
        return (f"{pad}while {pretty_expr(c.cond)} do\n{pretty(c.body, indent + 1)}\n"
                f"{pad}od")
    raise TypeError(c)


def short(c: Cmd) -> str:
    """One-line rendering of the leftmost command, for traces."""
    lm = leftmost_cmd(c)
    if isinstance(lm, If):
        return f"if {pretty_expr(lm.cond)} ..."
    if isinstance(lm, While):
        return f"while {pretty_expr(lm.cond)} ..."
    return pretty(lm)


# -- lock and mode-state helpers ----------------------------------------------

def lock_acq_upd(mds: ModeState, k: str, interp: LockInterp) -> ModeState:
    w, rw = interp.no_w(k), interp.no_rw(k)
    return ModeState(asm_no_w=mds.asm_no_w | w,
                     asm_no_rw=mds.asm_no_rw | rw,
                     guar_no_w=mds.guar_no_w - w,
                     guar_no_rw=mds.guar_no_rw - rw)


def lock_rel_upd(mds: ModeState, k: str, interp: LockInterp) -> ModeState:
    w, rw = interp.no_w(k), interp.no_rw(k)
    return ModeState(asm_no_w=mds.asm_no_w - w,
                     asm_no_rw=mds.asm_no_rw - rw,
                     guar_no_w=mds.guar_no_w | w,
                     guar_no_rw=mds.guar_no_rw | rw)


def lock_held_mds_correct(mds: ModeState, k: str, interp: LockInterp) -> bool:
    w, rw = interp.no_w(k), interp.no_rw(k)
    return (w <= mds.asm_no_w and not (w & mds.guar_no_w)
            and rw <= mds.asm_no_rw and not (rw & mds.guar_no_rw))


def lock_not_held_mds_correct(mds: ModeState, k: str, interp: LockInterp) -> bool:
    w, rw = interp.no_w(k), interp.no_rw(k)
    return (w <= mds.guar_no_w and not (w & mds.asm_no_w)
            and rw <= mds.guar_no_rw and not (rw & mds.asm_no_rw))


def init_mds(interp: LockInterp) -> ModeState:
    return ModeState(guar_no_w=interp.all_no_w(), guar_no_rw=interp.all_no_rw())


def no_locks_held(mem: Mem) -> bool:
    return not any(ev_lock(v) for v in mem.locks.values())


class Footprint(NamedTuple):
    """What one step touched: program variables read/written and lock events."""

    reads: frozenset = frozenset()
    writes: frozenset = frozenset()
    lock: str | None = None
    event: str | None = None    # acquire | spin | release | invalid


NO_FOOTPRINT = Footprint()


def lock_acq_step(mds: ModeState, mem: Mem, k: str, interp: LockInterp):
    """Shared acquire semantics: returns (progressed, mds', mem', footprint)."""
    if k not in interp:
        raise UnknownLock(k)
    if not ev_lock(mem.lock(k)):
        return (True, lock_acq_upd(mds, k, interp), mem.set_lock(k, LOCK_TRUE),
                Footprint(lock=k, event="acquire"))
    return False, mds, mem, Footprint(lock=k, event="spin")


def lock_rel_step(mds: ModeState, mem: Mem, k: str, interp: LockInterp):
    if lock_held_mds_correct(mds, k, interp):
        return (True, lock_rel_upd(mds, k, interp), mem.set_lock(k, LOCK_FALSE),
                Footprint(lock=k, event="release"))
    return False, mds, mem, Footprint(lock=k, event="invalid")


# -- small-step semantics -------------------------------------------------------

class SteppedStop(RuntimeError):
    pass


@dataclass(frozen=True)
class WhileConf:
    cmd: Cmd
    mds: ModeState
    mem: Mem

    @property
    def stopped(self) -> bool:
        return isinstance(self.cmd, Stop)


def _step(c: Cmd, mds: ModeState, mem: Mem, interp: LockInterp):
    if isinstance(c, Assign):
        v = ev_exp(mem, c.expr)
        return STOP, mds, mem.set(c.var, v), Footprint(expr_vars(c.expr),
                                                       frozenset([c.var]))
    if isinstance(c, Seq):
        c1, mds1, mem1, fp = _step(c.first, mds, mem, interp)
        if isinstance(c1, Stop):
            return c.second, mds1, mem1, fp
        return Seq(c1, c.second), mds1, mem1, fp
    if isinstance(c, Skip):
        return STOP, mds, mem, NO_FOOTPRINT
    if isinstance(c, If):
        branch = c.then if ev_exp(mem, c.cond) != 0 else c.orelse
        return branch, mds, mem, Footprint(expr_vars(c.cond))
    if isinstance(c, While):
        return If(c.cond, Seq(c.body, c), STOP), mds, mem, NO_FOOTPRINT
    if isinstance(c, LockAcq):
        ok, mds1, mem1, fp = lock_acq_step(mds, mem, c.lock, interp)
        return (STOP if ok else c), mds1, mem1, fp
    if isinstance(c, LockRel):
        ok, mds1, mem1, fp = lock_rel_step(mds, mem, c.lock, interp)
        return (STOP if ok else c), mds1, mem1, fp
    if isinstance(c, Stop):
        raise SteppedStop("cannot step a stopped command")
    raise TypeError(c)


def step_while(conf: WhileConf, interp: LockInterp) -> tuple[WhileConf, Footprint]:
    c, mds, mem, fp = _step(conf.cmd, conf.mds, conf.mem, interp)
    return WhileConf(c, mds, mem), fp
