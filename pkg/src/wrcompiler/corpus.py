"""Corpus entries: thread sources, a policy file and a manifest per directory.

Layout of one entry directory::

    manifest.json   name, description, thread file list, expected verdicts, bounds
    policy.json     variables, locks and initial-memory domains (see ``load_policy``)
    *.wl            one While source per thread, in manifest order

Policy file grammar (JSON)::

    {"variables": {NAME: {"dma": "low" | "high" | {"control": NAME, "low": [INT, ...]}}},
     "locks":     {NAME: {"no_w": [NAME, ...], "no_rw": [NAME, ...]}},
     "init":      {"domains": {NAME: [INT, ...]}, "fixed": {NAME: INT}}}

``init`` is optional; without ``domains`` every variable that can be High or
is a control variable ranges over {0, 1} and the rest are 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .compiler import CompileOutput, compile_program
from .core import (ClassificationPolicy, Level, LockInterp, Mem, Static, ValueDep,
                   check_lock_discipline, low_eq_mod_modes)
from .harness.system import default_domains, enumerate_mems, low_eq_pairs
from .risc import DEFAULT_REGISTERS
from .while_lang import Cmd, ParseError, cmd_locks, cmd_vars, init_mds, parse


class CorpusError(ValueError):
    """A corpus entry or policy file is malformed; ``problems`` lists every issue."""

    def __init__(self, where: str, problems: list[str]):
        self.where = where
        self.problems = problems
        super().__init__(f"{where}: " + "; ".join(problems))


@dataclass(frozen=True)
class PolicyFile:
    policy: ClassificationPolicy
    interp: LockInterp
    domains: dict
    fixed: dict


def _classification(name: str, spec, problems: list) -> Static | ValueDep | None:
    dma = spec.get("dma") if isinstance(spec, dict) else None
    if dma == "low":
        return Static(Level.Low)
    if dma == "high":
        return Static(Level.High)
    if isinstance(dma, dict) and isinstance(dma.get("control"), str):
        low = dma.get("low", [])
        if not all(isinstance(v, int) for v in low):
            problems.append(f"variable {name}: low values must be integers")
            return None
        return ValueDep(dma["control"], frozenset(low))
    problems.append(f"variable {name}: dma must be \"low\", \"high\" or a control spec")
    return None


def parse_policy(data: dict, where: str = "policy") -> PolicyFile:
    problems: list[str] = []
    variables = data.get("variables")
    if not isinstance(variables, dict) or not variables:
        raise CorpusError(where, ["\"variables\" must be a non-empty object"])
    classes = {}
    for name, spec in variables.items():
        c = _classification(name, spec, problems)
        if c is not None:
            classes[name] = c
    for name, c in classes.items():
        if isinstance(c, ValueDep):
            ctrl = classes.get(c.control)
            if ctrl is None:
                problems.append(f"variable {name}: control variable {c.control} is undeclared")
            elif ctrl != Static(Level.Low):
                problems.append(f"control variable {c.control} must be statically low")
    locks = {}
    for k, spec in (data.get("locks") or {}).items():
        no_w, no_rw = spec.get("no_w", []), spec.get("no_rw", [])
        for v in list(no_w) + list(no_rw):
            if v not in classes:
                problems.append(f"lock {k} governs undeclared variable {v}")
        locks[k] = (frozenset(no_w), frozenset(no_rw))
    init = data.get("init") or {}
    policy = ClassificationPolicy(classes)
    domains = init.get("domains")
    fixed = dict(init.get("fixed") or {})
    for v in list(domains or {}) + list(fixed):
        if v not in classes:
            problems.append(f"init mentions undeclared variable {v}")
    if problems:
        raise CorpusError(where, problems)
    interp = LockInterp(locks)
    problems = [str(v) for v in check_lock_discipline(interp, policy)]
    if problems:
        raise CorpusError(where, problems)
    if domains is None:
        domains = default_domains(policy)
    return PolicyFile(policy, interp, {k: list(v) for k, v in domains.items()}, fixed)


def load_policy(path) -> PolicyFile:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(str(path), [str(exc)]) from None
    return parse_policy(data, str(path))


DEFAULT_BOUNDS = {"sched_len": 8, "init_mems": 100, "max_steps": 10_000, "seed": 0,
                  "random_schedules": 0, "schedule_length": 0}


@dataclass
class CorpusEntry:
    name: str
    path: Path
    thread_files: list
    sources: list
    threads: list
    policy_file: PolicyFile
    expected: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    description: str = ""
    reconstruction: str = ""
    secure: bool = True

    @property
    def policy(self) -> ClassificationPolicy:
        return self.policy_file.policy

    @property
    def interp(self) -> LockInterp:
        return self.policy_file.interp

    def bound(self, key: str):
        return self.bounds.get(key, DEFAULT_BOUNDS[key])

    def mems(self) -> list[Mem]:
        return enumerate_mems(self.policy_file.domains, self.policy_file.fixed)

    def pairs(self) -> list[tuple[Mem, Mem]]:
        """Low-equivalent initial pairs, also equal modulo the initial modes."""
        mds = init_mds(self.interp)
        return [(a, b) for a, b in low_eq_pairs(self.policy, self.mems())
                if low_eq_mod_modes(self.policy, mds, a, b)]

    def compile(self, nregs: int = DEFAULT_REGISTERS) -> list[CompileOutput]:
        return [compile_program(c, self.interp, self.policy, nregs) for c in self.threads]

    @cached_property
    def compiled(self) -> list[CompileOutput]:
        return self.compile()


def load_entry(path) -> CorpusEntry:
    path = Path(path)
    where = str(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(where, [f"manifest: {exc}"]) from None
    pf = load_policy(path / "policy.json")
    files = manifest.get("threads") or sorted(p.name for p in path.glob("*.wl"))
    sources, threads, problems = [], [], []
    for f in files:
        try:
            src = (path / f).read_text()
        except OSError as exc:
            problems.append(str(exc))
            continue
        try:
            threads.append(parse(src))
            sources.append(src)
        except ParseError as exc:
            problems.append(f"{f}: {exc}")
    if problems:
        raise CorpusError(where, problems)
    for f, c in zip(files, threads):
        undeclared = _undeclared(c, pf)
        if undeclared:
            problems.append(f"{f}: undeclared names {', '.join(undeclared)}")
    if problems:
        raise CorpusError(where, problems)
    return CorpusEntry(manifest.get("name", path.name), path, list(files), sources, threads,
                       pf, manifest.get("expected", {}), manifest.get("bounds", {}),
                       manifest.get("description", ""), manifest.get("reconstruction", ""),
                       manifest.get("secure", True))


def _undeclared(c: Cmd, pf: PolicyFile) -> list[str]:
    bad = sorted(v for v in cmd_vars(c) if v not in pf.policy.classes)
    bad += sorted(k for k in cmd_locks(c) if k not in pf.interp)
    return bad


def load_corpus(path) -> list[CorpusEntry]:
    """Every entry directory (one holding a manifest) under ``path``, sorted by name."""
    path = Path(path)
    if (path / "manifest.json").exists():
        return [load_entry(path)]
    dirs = sorted(p for p in path.iterdir() if (p / "manifest.json").exists())
    return [load_entry(d) for d in dirs]
