"""Command-line front end: ``wrcomp compile | run | verify | corpus``.

Exit codes: 0 ok, 1 rejected or violated, 2 usage, I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import FORMAT_VERSION, __version__
from .compiler import annotated_json, compile_program, finalize
from .core import Mem
from .corpus import CorpusError, load_corpus, load_entry, load_policy
from .harness.report import mds_json
from .harness.system import (RiscPriv, ScheduleError, parse_schedule, random_schedules,
                             risc_system, step_thread, while_system)
from .risc import DEFAULT_REGISTERS, AsmError, format_instr, format_listing, parse_listing
from .verify import CHECKS, Bounds, run_check
from .while_lang import ParseError, parse, short

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    pass


def _err(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def _policy_for(src: Path, given: str | None):
    path = Path(given) if given else src.parent / "policy.json"
    if not path.exists():
        raise CliError(f"policy file {path} not found")
    return load_policy(path)


def _parse_domains(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, vals = item.partition("=")
        if not sep or not name:
            raise CliError(f"malformed --domain {item!r}; expected v=0,1")
        try:
            out[name] = [int(v) for v in vals.split(",") if v != ""]
        except ValueError:
            raise CliError(f"malformed --domain {item!r}; values must be integers") from None
        if not out[name]:
            raise CliError(f"--domain {name} has no values")
    return out


def _parse_init(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, val = item.partition("=")
        try:
            if not sep or not name:
                raise ValueError
            out[name] = int(val)
        except ValueError:
            raise CliError(f"malformed --init {item!r}; expected v=INT") from None
    return out


# -- compile --------------------------------------------------------------------------

def cmd_compile(args) -> int:
    src = Path(args.source)
    try:
        pf = _policy_for(src, args.policy)
        prog = parse(src.read_text())
    except (CliError, CorpusError, OSError) as exc:
        return _err(str(exc))
    except ParseError as exc:
        return _err(f"{src}: {exc}")
    out = compile_program(prog, pf.interp, pf.policy, args.registers)
    if out.failed:
        print(f"{src}: rejected: {out.reason}")
        return EXIT_FAIL
    out_dir = Path(args.out_dir) if args.out_dir else src.parent
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        risc = finalize(out)
        (out_dir / f"{src.stem}.risc").write_text(format_listing(risc))
        doc = annotated_json(out)
        doc["format_version"] = FORMAT_VERSION
        (out_dir / f"{src.stem}.json").write_text(json.dumps(doc, indent=1) + "\n")
    except OSError as exc:
        return _err(str(exc))
    print(f"{src}: {len(risc)} instructions -> {out_dir / (src.stem + '.risc')}")
    return EXIT_OK


# -- run ------------------------------------------------------------------------------

def _load_system(target: Path, policy: str | None, level: str, nregs: int):
    """Thread list, policy file and level for a corpus directory, .wl or .risc file."""
    if target.is_dir():
        entry = load_entry(target)
        if level == "risc":
            outs = entry.compile(nregs)
            bad = [o.reason for o in outs if o.failed]
            if bad:
                raise CliError(f"compilation failed: {bad[0]}")
            return [finalize(o) for o in outs], entry.policy_file, "risc"
        return list(entry.threads), entry.policy_file, "while"
    pf = _policy_for(target, policy)
    text = target.read_text()
    if target.suffix == ".risc":
        return [parse_listing(text)], pf, "risc"
    cmd = parse(text)
    if level == "risc":
        out = compile_program(cmd, pf.interp, pf.policy, nregs)
        if out.failed:
            raise CliError(f"compilation failed: {out.reason}")
        return [finalize(out)], pf, "risc"
    return [cmd], pf, "while"


def _mds_delta(old, new) -> str:
    parts = []
    for name, a, b in zip(("AsmNoW", "AsmNoRW", "GuarNoW", "GuarNoRW"), old, new):
        added, removed = sorted(b - a), sorted(a - b)
        if added:
            parts.append(f"+{name}{{{','.join(added)}}}")
        if removed:
            parts.append(f"-{name}{{{','.join(removed)}}}")
    return " ".join(parts)


def _describe(priv) -> str:
    if isinstance(priv, RiscPriv):
        if priv.pc >= len(priv.prog):
            return f"pc={priv.pc} (stopped)"
        return f"pc={priv.pc} {format_instr(priv.prog[priv.pc])}"
    return short(priv)


def cmd_run(args) -> int:
    target = Path(args.target)
    try:
        threads, pf, level = _load_system(target, args.policy, args.level, args.registers)
        init = {**pf.fixed, **_parse_init(args.init)}
        mem = Mem(init)
        if args.schedule is not None:
            sched = parse_schedule(args.schedule, len(threads))
        else:
            sched = random_schedules(len(threads), 1, args.steps, args.seed)[0]
    except (CliError, CorpusError, ScheduleError, AsmError, OSError) as exc:
        return _err(str(exc))
    except ParseError as exc:
        return _err(f"{target}: {exc}")
    if level == "risc":
        gc = risc_system(threads, pf.interp, mem, args.registers)
    else:
        gc = while_system(threads, pf.interp, mem)
    # keep stdout parseable when the JSON trace goes there
    log = sys.stderr if args.json == "-" else sys.stdout
    trace = []
    for n, i in enumerate(sched):
        before = gc
        desc = _describe(before.threads[i][0])
        gc, fp = step_thread(gc, i, pf.interp)
        writes = {x: gc.mem[x] for x in sorted(fp.writes)}
        if fp.lock:
            writes[f"lock:{fp.lock}"] = gc.mem.lock(fp.lock)
        delta = _mds_delta(before.threads[i][1], gc.threads[i][1])
        event = f" [{fp.event} {fp.lock}]" if fp.event else ""
        step = {"step": n, "thread": i, "at": desc, "writes": writes, "mds": delta,
                "event": fp.event}
        trace.append(step)
        w = " ".join(f"{k}={v}" for k, v in writes.items())
        line = f"{n:4d} t{i} {desc}{event}" + (f"  {w}" if w else "")
        print(line + (f"  {delta}" if delta else ""), file=log)
    final = {k: gc.mem[k] for k in pf.policy.variables}
    print("final: " + " ".join(f"{k}={v}" for k, v in final.items()), file=log)
    if args.json:
        doc = {"level": level, "schedule": sched, "trace": trace, "final": final,
               "final_mds": [mds_json(m) for m in gc.mdss]}
        _write_json(args.json, doc)
    return EXIT_OK


def _write_json(dest: str, doc) -> None:
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text)


# -- verify -----------------------------------------------------------------------------

def _bounds(args) -> Bounds:
    levels = ("while", "risc") if args.level == "both" else (args.level,)
    return Bounds(sched_len=args.sched_len, init_mems=args.init_mems, max_steps=args.steps,
                  seed=args.seed, random_schedules=args.random_schedules,
                  schedule_length=args.schedule_length, registers=args.registers,
                  levels=levels, domains=_parse_domains(args.domain))


def _selected(args) -> list[str]:
    names = [c for c in CHECKS if getattr(args, f"check_{c}", False)]
    if args.checks:
        for c in args.checks.split(","):
            if c not in CHECKS:
                raise CliError(f"unknown check {c!r}; choose from {', '.join(CHECKS)}")
            names.append(c)
    if args.all or not names:
        return list(CHECKS)
    return [c for c in CHECKS if c in names]


def _run_one(path: str, name: str, bounds: Bounds) -> dict:
    return run_check(load_entry(path), name, bounds).to_json()


def cmd_verify(args) -> int:
    try:
        entry = load_entry(Path(args.entry))
        names = _selected(args)
        bounds = _bounds(args)
    except (CliError, CorpusError) as exc:
        return _err(str(exc))
    if args.jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            futs = [pool.submit(_run_one, str(entry.path), n, bounds) for n in names]
            reports = [f.result() for f in futs]
    else:
        reports = [run_check(entry, n, bounds).to_json() for n in names]
    log = sys.stderr if args.json == "-" else sys.stdout
    code = EXIT_OK
    for r in reports:
        line = f"{entry.name} {r['check']}: {r['verdict']}"
        cex = r["counterexample"]
        if cex:
            line += f" ({cex.get('predicate', '')})"
        print(line, file=log)
        if cex:
            for key in ("thread", "detail", "reason", "variable", "schedule", "mem1", "mem2"):
                if key in cex:
                    print(f"    {key}: {json.dumps(cex[key])}", file=log)
        code = max(code, {"ok": 0, "violated": 1, "error": 2}[r["verdict"]])
    if args.json:
        _write_json(args.json, {"entry": entry.name, "format_version": FORMAT_VERSION,
                                "reports": reports})
    return code


def cmd_corpus(args) -> int:
    """Verify every entry against the verdicts its manifest predicts."""
    try:
        entries = load_corpus(Path(args.path))
    except CorpusError as exc:
        return _err(str(exc))
    mismatches = 0
    for e in entries:
        for name in CHECKS:
            want = e.expected.get(name)
            if want is None:
                continue
            got = run_check(e, name).verdict
            if name == "compile":
                got = "ok" if got == "ok" else "rejected"
            mark = "ok " if got == want else "MISMATCH"
            mismatches += got != want
            print(f"{mark} {e.name:18s} {name:10s} expected={want:9s} got={got}")
    print(f"{len(entries)} entries, {mismatches} mismatches")
    return EXIT_OK if mismatches == 0 else EXIT_FAIL


# -- entry point ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wrcomp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"wrcomp {__version__} (format {FORMAT_VERSION})")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a .wl file to a listing and annotated JSON")
    c.add_argument("source")
    c.add_argument("--policy", help="policy JSON (default: policy.json next to the source)")
    c.add_argument("-o", "--out-dir")
    c.add_argument("--registers", type=int, default=DEFAULT_REGISTERS)
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser("run", help="execute a system under a schedule and print a trace")
    r.add_argument("target", help="corpus entry directory, .wl or .risc file")
    r.add_argument("--policy")
    r.add_argument("--schedule", help="comma-separated thread indices")
    r.add_argument("--seed", type=int, default=0, help="seed for a random schedule")
    r.add_argument("--steps", type=int, default=50, help="random schedule length")
    r.add_argument("--level", choices=("while", "risc"), default="while",
                   help="for .wl and corpus targets: run the source or its compiled image")
    r.add_argument("--init", action="append", metavar="v=N", help="initial value")
    r.add_argument("--registers", type=int, default=DEFAULT_REGISTERS)
    r.add_argument("--json", metavar="OUT", help="write the trace as JSON ('-' for stdout)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run harness checks on a corpus entry")
    v.add_argument("entry")
    v.add_argument("--all", action="store_true", help="every check")
    for name in CHECKS:
        v.add_argument(f"--{name}", dest=f"check_{name}", action="store_true")
    v.add_argument("--checks", help="comma-separated check names")
    v.add_argument("--sched-len", type=int)
    v.add_argument("--random-schedules", type=int)
    v.add_argument("--schedule-length", type=int)
    v.add_argument("--init-mems", type=int)
    v.add_argument("--steps", type=int, help="per-run step bound")
    v.add_argument("--seed", type=int)
    v.add_argument("--domain", action="append", metavar="v=0,1")
    v.add_argument("--level", choices=("while", "risc", "both"), default="both")
    v.add_argument("--registers", type=int, default=DEFAULT_REGISTERS)
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--json", metavar="OUT")
    v.set_defaults(func=cmd_verify)

    k = sub.add_parser("corpus", help="check every entry's manifest verdicts")
    k.add_argument("path", nargs="?", default="corpus")
    k.set_defaults(func=cmd_corpus)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
