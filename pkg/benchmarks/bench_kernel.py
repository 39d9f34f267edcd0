"""Compiled kernel vs pure-Python fallback on the whole-system RISC check.

Runs the worker system's compiled image over every schedule of a given
length for all low-equivalent initial pairs, once per backend, and checks
that both backends return the same result.

    python3 benchmarks/bench_kernel.py [--sched-len 7] [--entry corpus/worker]
"""

import argparse
import time
from pathlib import Path

import numpy as np

from wrcompiler import _kernel_py
from wrcompiler.compiler import finalize
from wrcompiler.corpus import load_entry
from wrcompiler.harness.system import all_schedules
from wrcompiler.kernel import encode_system

try:
    from wrcompiler import _kernel
except ImportError:
    _kernel = None

ROOT = Path(__file__).resolve().parent.parent


def run(mod, enc, pairs, mat):
    results = []
    t = time.perf_counter()
    for m1, m2 in pairs:
        pcs, regs, mds = enc.init_state()
        results.append(mod.hyper(enc.code, enc.off, enc.ln, enc.lock_w, enc.lock_rw, enc.nv,
                                 enc.nregs, enc.kind, enc.ctrl, enc.lo_off, enc.lo_vals,
                                 enc.cset, enc.encode_mem(m1), enc.encode_mem(m2), pcs, regs,
                                 mds, mat))
    return time.perf_counter() - t, results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--entry", default=str(ROOT / "corpus" / "worker"))
    ap.add_argument("--sched-len", type=int, default=7)
    ap.add_argument("--pairs", type=int, default=4, help="pairs timed on the fallback")
    args = ap.parse_args()

    entry = load_entry(args.entry)
    progs = [finalize(o) for o in entry.compile()]
    enc = encode_system(progs, entry.interp, entry.policy)
    mat = np.array(list(all_schedules(len(progs), args.sched_len)), dtype=np.int64)
    pairs = entry.pairs()[:args.pairs]
    steps = 2 * mat.size * len(pairs)
    print(f"{entry.name}: {len(pairs)} pairs x {mat.shape[0]} schedules x {mat.shape[1]} steps"
          f" = {steps} thread steps")
    tp, rp = run(_kernel_py, enc, pairs, mat)
    print(f"python fallback: {tp:8.3f} s  ({steps / tp:12.0f} steps/s)")
    if _kernel is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation`")
        return
    tc, rc = run(_kernel, enc, pairs, mat)
    print(f"compiled kernel: {tc:8.3f} s  ({steps / tc:12.0f} steps/s)")
    print(f"speedup: {tp / tc:.1f}x; results identical: {rp == [tuple(r) for r in rc]}")


if __name__ == "__main__":
    main()
