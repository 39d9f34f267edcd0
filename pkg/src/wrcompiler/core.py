"""Shared domain types: values, addresses, memory, modes, classification.

Everything here is immutable so configurations can be hashed, compared and
shared freely between checkers.
"""

from __future__ import annotations

import enum
from functools import cached_property
from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple, Union

MASK64 = (1 << 64) - 1
LOCK_TRUE = 1
LOCK_FALSE = 0


def wrap(n: int) -> int:
    """Reduce an integer to signed 64-bit two's complement."""
    n &= MASK64
    return n - (1 << 64) if n >> 63 else n


def ev_lock(v: int) -> bool:
    return v != 0


class UnknownVariable(KeyError):
    pass


class UnknownLock(KeyError):
    pass


@dataclass(frozen=True, order=True)
class ProgVar:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True, order=True)
class LockVar:
    name: str

    def __str__(self):
        return f"lock:{self.name}"


Addr = Union[ProgVar, LockVar]


class Mem(Mapping):
    """Total map from addresses to values; unmapped addresses read as 0.

    Program variables and lock variables live in separate namespaces, so
    ``mem["x"]`` and ``mem.lock("x")`` never alias.
    """

    __slots__ = ("_vars", "_locks", "_hash")

    def __init__(self, vars: Mapping[str, int] | None = None,
                 locks: Mapping[str, int] | None = None):
        self._vars = {k: wrap(v) for k, v in (vars or {}).items() if v != 0}
        self._locks = {k: wrap(v) for k, v in (locks or {}).items() if v != 0}
        self._hash = None

    @classmethod
    def _raw(cls, vars, locks):
        m = cls.__new__(cls)
        m._vars = vars
        m._locks = locks
        m._hash = None
        return m

    # Mapping interface over program variables
    def __getitem__(self, name: str) -> int:
        return self._vars.get(name, 0)

    def __iter__(self) -> Iterator[str]:
        return iter(self._vars)

    def __len__(self) -> int:
        return len(self._vars)

    def __contains__(self, name) -> bool:
        return True

    def lock(self, name: str) -> int:
        return self._locks.get(name, 0)

    def read(self, a: Addr) -> int:
        if isinstance(a, LockVar):
            return self._locks.get(a.name, 0)
        return self._vars.get(a.name, 0)

    def set(self, name: str, value: int) -> "Mem":
        vars = dict(self._vars)
        value = wrap(value)
        if value:
            vars[name] = value
        else:
            vars.pop(name, None)
        return Mem._raw(vars, self._locks)

    def set_lock(self, name: str, value: int) -> "Mem":
        locks = dict(self._locks)
        if value:
            locks[name] = wrap(value)
        else:
            locks.pop(name, None)
        return Mem._raw(self._vars, locks)

    def update(self, **values: int) -> "Mem":
        m = self
        for k, v in values.items():
            m = m.set(k, v)
        return m

    @property
    def locks(self) -> dict[str, int]:
        return dict(self._locks)

    def as_dict(self) -> dict[str, int]:
        return dict(self._vars)

    def __eq__(self, other):
        if not isinstance(other, Mem):
            return NotImplemented
        return self._vars == other._vars and self._locks == other._locks

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self._vars.items()),
                               frozenset(self._locks.items())))
        return self._hash

    def __repr__(self):
        parts = [f"{k}={v}" for k, v in sorted(self._vars.items())]
        parts += [f"lock:{k}={v}" for k, v in sorted(self._locks.items())]
        return "Mem(" + ", ".join(parts) + ")"


class Mode(enum.Enum):
    AsmNoW = "AsmNoW"
    AsmNoRW = "AsmNoRW"
    GuarNoW = "GuarNoW"
    GuarNoRW = "GuarNoRW"


class ModeState(NamedTuple):
    asm_no_w: frozenset = frozenset()
    asm_no_rw: frozenset = frozenset()
    guar_no_w: frozenset = frozenset()
    guar_no_rw: frozenset = frozenset()

    def __getitem__(self, key):
        if isinstance(key, Mode):
            return getattr(self, _MODE_FIELD[key])
        return tuple.__getitem__(self, key)

    def describe(self) -> str:
        return "; ".join(f"{m.value}={{{','.join(sorted(self[m]))}}}"
                         for m in Mode)


_MODE_FIELD = {
    Mode.AsmNoW: "asm_no_w",
    Mode.AsmNoRW: "asm_no_rw",
    Mode.GuarNoW: "guar_no_w",
    Mode.GuarNoRW: "guar_no_rw",
}


def readable(mds: ModeState, x: str) -> bool:
    return x not in mds.asm_no_rw


def writable(mds: ModeState, x: str) -> bool:
    return x not in mds.asm_no_w and x not in mds.asm_no_rw


class Level(enum.Enum):
    High = "High"
    Low = "Low"


@dataclass(frozen=True)
class Static:
    level: Level


@dataclass(frozen=True)
class ValueDep:
    control: str
    low_values: frozenset


Classification = Union[Static, ValueDep]


@dataclass(frozen=True)
class LockInterp:
    """Lock name -> (no_w vars, no_rw vars)."""

    locks: Mapping[str, tuple[frozenset, frozenset]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "locks", {k: (frozenset(w), frozenset(rw))
                                           for k, (w, rw) in self.locks.items()})

    def __hash__(self):
        return hash(tuple(sorted(self.locks.items())))

    def __contains__(self, k):
        return k in self.locks

    def __iter__(self):
        return iter(self.locks)

    def no_w(self, k: str) -> frozenset:
        try:
            return self.locks[k][0]
        except KeyError:
            raise UnknownLock(k) from None

    def no_rw(self, k: str) -> frozenset:
        try:
            return self.locks[k][1]
        except KeyError:
            raise UnknownLock(k) from None

    def all_no_w(self) -> frozenset:
        return frozenset().union(*(w for w, _ in self.locks.values()))

    def all_no_rw(self) -> frozenset:
        return frozenset().union(*(rw for _, rw in self.locks.values()))

    def governed(self) -> frozenset:
        return self.all_no_w() | self.all_no_rw()

    def lock_of(self, v: str) -> str | None:
        for k, (w, rw) in self.locks.items():
            if v in w or v in rw:
                return k
        return None


@dataclass(frozen=True)
class ClassificationPolicy:
    classes: Mapping[str, Classification]

    def __hash__(self):
        return hash(tuple(sorted(self.classes.items(), key=lambda kv: kv[0])))

    @property
    def variables(self) -> list[str]:
        return sorted(self.classes)

    def classification(self, x: str) -> Classification:
        try:
            return self.classes[x]
        except KeyError:
            raise UnknownVariable(x) from None

    def cvars(self, x: str) -> frozenset:
        c = self.classification(x)
        return frozenset([c.control]) if isinstance(c, ValueDep) else frozenset()

    @cached_property
    def cset(self) -> frozenset:
        return frozenset(c.control for c in self.classes.values()
                         if isinstance(c, ValueDep))

    def dma(self, mem: Mem, a: Addr | str) -> Level:
        if isinstance(a, LockVar):
            return Level.Low
        name = a.name if isinstance(a, ProgVar) else a
        c = self.classification(name)
        if isinstance(c, Static):
            return c.level
        return Level.Low if mem[c.control] in c.low_values else Level.High

    def is_low(self, mem: Mem, x: str) -> bool:
        return self.dma(mem, x) is Level.Low


def dma(policy: ClassificationPolicy, mem: Mem, a: Addr | str) -> Level:
    return policy.dma(mem, a)


def low_eq(policy: ClassificationPolicy, mem1: Mem, mem2: Mem) -> bool:
    """Memories agree on every variable classified Low in ``mem1``.

    Lock variables are Low statically, so they are compared too.
    """
    for x in policy.classes:
        if policy.is_low(mem1, x) and mem1[x] != mem2[x]:
            return False
    return mem1._locks == mem2._locks


def low_eq_mod_modes(policy: ClassificationPolicy, mds: ModeState,
                     mem1: Mem, mem2: Mem) -> bool:
    cset = policy.cset
    for x in policy.classes:
        if x in cset or (policy.is_low(mem1, x) and readable(mds, x)):
            if mem1[x] != mem2[x]:
                return False
    return mem1._locks == mem2._locks


@dataclass(frozen=True)
class Violation:
    restriction: int
    message: str
    names: tuple = ()

    def __str__(self):
        return f"restriction {self.restriction}: {self.message}"


def check_lock_discipline(interp: LockInterp,
                          policy: ClassificationPolicy) -> list[Violation]:
    """Report every breach of the seven locking-discipline restrictions."""
    out: list[Violation] = []
    lock_names = set(interp)
    declared = set(policy.classes)
    for k, (w, rw) in sorted(interp.locks.items()):
        governed = w | rw
        bad = sorted(v for v in governed if v in lock_names or v not in declared)
        if bad:
            out.append(Violation(1, f"lock {k} governs non-program variables {bad}",
                                 (k, *bad)))
    for x, c in sorted(policy.classes.items()):
        if isinstance(c, ValueDep) and c.control in lock_names:
            out.append(Violation(2, f"lock {c.control} is a control variable of {x}",
                                 (c.control, x)))
        if isinstance(c, ValueDep):
            cc = policy.classes.get(c.control)
            if cc != Static(Level.Low):
                out.append(Violation(0, f"control variable {c.control} of {x} "
                                        "is not statically Low", (c.control, x)))
    for k in sorted(lock_names):
        # lock variables have no declared classification; re-assert they are
        # not shadowed by a program-variable declaration of another level
        c = policy.classes.get(k)
        if c is not None and c != Static(Level.Low):
            out.append(Violation(3, f"lock variable {k} is not statically Low", (k,)))
    for v in sorted(declared):
        for c in sorted(policy.cvars(v)):
            for k, (w, rw) in sorted(interp.locks.items()):
                if (c in w) != (v in w) or (c in rw) != (v in rw):
                    out.append(Violation(
                        4, f"lock {k} does not govern {v} and its control "
                           f"variable {c} the same way", (k, v, c)))
    owners: dict[str, list[str]] = {}
    for k, (w, rw) in interp.locks.items():
        for v in w | rw:
            owners.setdefault(v, []).append(k)
    for v, ks in sorted(owners.items()):
        if len(ks) > 1:
            out.append(Violation(5, f"{v} is managed by several locks {sorted(ks)}",
                                 (v, *sorted(ks))))
    for k, (w, rw) in sorted(interp.locks.items()):
        if not (w | rw):
            out.append(Violation(6, f"lock {k} is vacuous", (k,)))
        if w & rw:
            out.append(Violation(7, f"lock {k} has overlapping no_w/no_rw sets "
                                    f"{sorted(w & rw)}", (k, *sorted(w & rw))))
    return out
