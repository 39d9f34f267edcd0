"""Seeded generators of expressions and of programs the compiler accepts."""

import random

from wrcompiler.core import ClassificationPolicy, Level, LockInterp, Static, ValueDep
from wrcompiler.while_lang import BinOp, Const, Var, parse, pretty_expr

OPS = ["+", "-", "*", "==", "!=", "<", "<=", "&&", "||"]

# d controls s; k gives exclusive write access to s, d and a, m exclusive
# access to h; x and y are ungoverned scratch variables.
POLICY = ClassificationPolicy({
    "d": Static(Level.Low), "s": ValueDep("d", frozenset({0})), "a": Static(Level.Low),
    "h": Static(Level.High), "x": Static(Level.Low), "y": Static(Level.High),
})
INTERP = LockInterp({"k": (frozenset({"s", "d", "a"}), frozenset()),
                     "m": (frozenset(), frozenset({"h"}))})
FREE = ["x", "y"]


def random_expr(rng: random.Random, depth: int, names) -> object:
    """An expression of depth at most ``depth`` over ``names`` and small constants."""
    if depth <= 1 or rng.random() < 0.3:
        if names and rng.random() < 0.6:
            return Var(rng.choice(list(names)))
        return Const(rng.randint(0, 3))
    return BinOp(rng.choice(OPS), random_expr(rng, depth - 1, names),
                 random_expr(rng, depth - 1, names))


def _expr_text(rng, names, depth=3) -> str:
    return pretty_expr(random_expr(rng, depth, names))


def _stable(held) -> list:
    out = []
    for k in sorted(held):
        out += sorted(INTERP.no_w(k) | INTERP.no_rw(k))
    return out


def _block(rng, depth, held, protected) -> str:
    n = rng.randint(1, 3)
    return "; ".join(_stmt(rng, depth, held, protected) for _ in range(n))


def _stmt(rng, depth, held, protected) -> str:
    stable = _stable(held)
    choices = ["skip", "assign"]
    if depth > 0:
        choices += ["if", "lock"] + (["loop"] if "k" in held and "a" not in protected else [])
    kind = rng.choice(choices)
    if kind == "skip":
        return "skip"
    if kind == "assign":
        targets = [v for v in FREE + stable if v not in protected]
        return f"{rng.choice(targets)} := {_expr_text(rng, stable)}"
    if kind == "if":
        return (f"if {_expr_text(rng, stable, 2)} then {_block(rng, depth - 1, held, protected)} "
                f"else {_block(rng, depth - 1, held, protected)} fi")
    if kind == "loop":
        body = _block(rng, depth - 1, held, protected | {"a"})
        return f"a := {rng.randint(0, 2)}; while a != 0 do {body}; a := a - 1 od"
    free = [k for k in ("k", "m") if k not in held]
    if not free:
        return "skip"
    k = rng.choice(free)
    return f"acquire({k}); {_block(rng, depth - 1, held | {k}, protected)}; release({k})"


def random_program_text(rng: random.Random, depth: int = 3) -> str:
    return _block(rng, depth, frozenset(), frozenset())


def random_program(rng: random.Random, depth: int = 3):
    return parse(random_program_text(rng, depth))
