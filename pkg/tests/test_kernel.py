import os
import random
import subprocess
import sys

import numpy as np
import pytest

from conftest import CORPUS_DIR
from gen import INTERP, POLICY, random_program
from wrcompiler import _kernel_py, kernel
from wrcompiler.compiler import compile_program, finalize
from wrcompiler.core import ClassificationPolicy, Level, LockInterp, Mem, Static
from wrcompiler.corpus import load_entry
from wrcompiler.harness import check_global_compatibility, check_sys_secure
from wrcompiler.harness.system import (random_schedules, risc_system, run_schedule,
                                       sample_mems, step_thread)
from wrcompiler.kernel import encode_system

try:
    from wrcompiler import _kernel
except ImportError:
    _kernel = None

BACKENDS = [_kernel_py] + ([_kernel] if _kernel is not None else [])
DOMAINS = {v: [0, 1, 2] for v in "dsahxy"}


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def backend(request, monkeypatch):
    monkeypatch.setattr(kernel, "backend", request.param)
    return request.param


def _system(seed, n=3):
    rng = random.Random(seed)
    return [finalize(compile_program(random_program(rng), INTERP, POLICY)) for _ in range(n)]


def test_compiled_extension_is_selected_when_built():
    if _kernel is None:
        pytest.skip("extension not built")
    assert kernel.BACKEND == "compiled"


def test_pure_fallback_can_be_forced():
    env = dict(os.environ, WRCOMPILER_PURE="1")
    out = subprocess.run([sys.executable, "-c",
                          "import wrcompiler.kernel as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_mem_encoding_round_trip():
    progs = _system(1)
    enc = encode_system(progs, INTERP, POLICY)
    mem = Mem({"s": 2, "h": -1}).set_lock("m", 1)
    assert enc.decode_mem(enc.encode_mem(mem)) == mem
    assert enc.address_name(enc.nv) == "lock:k"


def test_too_many_variables_rejected():
    pol = ClassificationPolicy({f"v{i}": Static(Level.Low) for i in range(65)})
    with pytest.raises(ValueError):
        encode_system([], LockInterp({}), pol)


@pytest.mark.parametrize("seed", range(12))
def test_trace_matches_object_level(backend, seed):
    progs = _system(seed)
    enc = encode_system(progs, INTERP, POLICY)
    rng = random.Random(seed)
    for mem in sample_mems(DOMAINS, None, 3, seed):
        sched = [rng.randrange(3) for _ in range(60)]
        mems, pcs, regs, mds = enc.trace(mem, sched)
        gc = risc_system(progs, INTERP, mem)
        for n, i in enumerate(sched):
            gc, _ = step_thread(gc, i, INTERP)
            assert enc.decode_mem(mems[n + 1]) == gc.mem
            assert [int(p) for p in pcs[n + 1]] == [priv.pc for priv, _ in gc.threads]
            for t, (priv, m) in enumerate(gc.threads):
                assert enc.decode_mds(mds[n + 1], t) == m
                assert tuple(int(x) for x in regs[n + 1][t * enc.nregs:(t + 1) * enc.nregs]) \
                    == priv.regs


def test_backends_agree_on_hyper_and_compat():
    if _kernel is None:
        pytest.skip("extension not built")
    entry = load_entry(CORPUS_DIR / "worker-leaky")
    progs = [finalize(o) for o in entry.compiled]
    enc = encode_system(progs, entry.interp, entry.policy)
    mat = np.array(random_schedules(len(progs), 60, 40, 3), dtype=np.int64)
    for m1, m2 in entry.pairs():
        a = _kernel_py.hyper(*_hyper_args(enc, m1, m2, mat))
        b = _kernel.hyper(*_hyper_args(enc, m1, m2, mat))
        assert tuple(a) == tuple(b)
        assert tuple(_compat(_kernel_py, enc, m1, mat)) == tuple(_compat(_kernel, enc, m1, mat))


def _hyper_args(enc, m1, m2, mat):
    pcs, regs, mds = enc.init_state()
    return (enc.code, enc.off, enc.ln, enc.lock_w, enc.lock_rw, enc.nv, enc.nregs, enc.kind,
            enc.ctrl, enc.lo_off, enc.lo_vals, enc.cset, enc.encode_mem(m1),
            enc.encode_mem(m2), pcs, regs, mds, mat)


def _compat(mod, enc, m, mat):
    pcs, regs, mds = enc.init_state()
    return mod.compat(enc.code, enc.off, enc.ln, enc.lock_w, enc.lock_rw, enc.nv, enc.nregs,
                      enc.gov_w, enc.gov_rw, enc.encode_mem(m), pcs, regs, mds, mat)


@pytest.mark.parametrize("name", ["worker-leaky", "high-branch", "worker"])
def test_kernel_hyper_matches_object_search(backend, name):
    entry = load_entry(CORPUS_DIR / name)
    progs = [finalize(o) for o in entry.compiled]
    scheds = random_schedules(len(progs), 40, 40, 1) if name == "worker-leaky" else None
    sched_len = None if scheds else 5
    pairs = entry.pairs()[:12]
    k = check_sys_secure(progs, entry.policy, entry.interp, pairs, sched_len, scheds)
    o = check_sys_secure(progs, entry.policy, entry.interp, pairs, sched_len, scheds,
                         backend="object")
    assert k.verdict == o.verdict
    assert k.bounds["backend"] != "object" and o.bounds["backend"] == "object"
    if not k.ok:
        cex = k.counterexample
        assert all(isinstance(i, int) for i in cex["schedule"])
        g1 = run_schedule(risc_system(progs, entry.interp, Mem(cex["mem1"])), cex["schedule"],
                          entry.interp)
        assert g1.mem.as_dict() == Mem(cex["final1"]).as_dict()


def test_kernel_compat_matches_object_level(backend):
    entry = load_entry(CORPUS_DIR / "cddc")
    progs = [finalize(o) for o in entry.compiled]
    enc = encode_system(progs, entry.interp, entry.policy)
    scheds = random_schedules(len(progs), 30, 30, 2)
    mat = np.array(scheds, dtype=np.int64)
    for m in entry.mems()[:4]:
        row = enc.compat(m, mat)[0]
        gc = risc_system(progs, entry.interp, m)
        assert (row < 0) == check_global_compatibility(gc, entry.interp, schedules=scheds).ok
