"""Pure-Python reference for the RISC system kernel.

Same entry points and argument layout as the compiled ``_kernel`` module;
``kernel.py`` picks whichever is available.  See ``kernel.py`` for the
array encoding.
"""

import numpy as np

MASK64 = (1 << 64) - 1

LOAD, STORE, JMP, JZ, NOP, MOVEK, MOVER, OP, ACQ, REL = range(10)


def _wrap(n):
    n &= MASK64
    return n - (1 << 64) if n >> 63 else n


def _apply(op, a, b):
    if op == 0:
        return _wrap(a + b)
    if op == 1:
        return _wrap(a - b)
    if op == 2:
        return _wrap(a * b)
    if op == 3:
        return int(a == b)
    if op == 4:
        return int(a != b)
    if op == 5:
        return int(a < b)
    if op == 6:
        return int(a <= b)
    if op == 7:
        return int(a != 0 and b != 0)
    return int(a != 0 or b != 0)


def _step(code, off, ln, lock_w, lock_rw, nv, nregs, mem, pcs, regs, mds, t):
    pc = pcs[t]
    if pc >= ln[t]:
        return
    row = code[off[t] + pc]
    opc, a, b, c = int(row[0]), int(row[1]), int(row[2]), int(row[3])
    rb = t * nregs
    mb = t * 4
    if opc == LOAD:
        regs[rb + a] = mem[b]
        pcs[t] = pc + 1
    elif opc == STORE:
        mem[a] = regs[rb + b]
        pcs[t] = pc + 1
    elif opc == JMP:
        pcs[t] = a
    elif opc == JZ:
        pcs[t] = a if regs[rb + b] == 0 else pc + 1
    elif opc == NOP:
        pcs[t] = pc + 1
    elif opc == MOVEK:
        regs[rb + a] = b
        pcs[t] = pc + 1
    elif opc == MOVER:
        regs[rb + a] = regs[rb + b]
        pcs[t] = pc + 1
    elif opc == OP:
        regs[rb + b] = _apply(a, int(regs[rb + b]), int(regs[rb + c]))
        pcs[t] = pc + 1
    elif opc == ACQ:
        if mem[nv + a] == 0:
            w, rw = int(lock_w[a]), int(lock_rw[a])
            mem[nv + a] = 1
            mds[mb] = int(mds[mb]) | w
            mds[mb + 1] = int(mds[mb + 1]) | rw
            mds[mb + 2] = int(mds[mb + 2]) & ~w & MASK64
            mds[mb + 3] = int(mds[mb + 3]) & ~rw & MASK64
            pcs[t] = pc + 1
    elif opc == REL:
        w, rw = int(lock_w[a]), int(lock_rw[a])
        if _held(mds, mb, w, rw):
            mem[nv + a] = 0
            mds[mb] = int(mds[mb]) & ~w & MASK64
            mds[mb + 1] = int(mds[mb + 1]) & ~rw & MASK64
            mds[mb + 2] = int(mds[mb + 2]) | w
            mds[mb + 3] = int(mds[mb + 3]) | rw
            pcs[t] = pc + 1


def _held(mds, mb, w, rw):
    aw, arw, gw, grw = (int(mds[mb + i]) for i in range(4))
    return (w & ~aw) == 0 and (w & gw) == 0 and (rw & ~arw) == 0 and (rw & grw) == 0


def _not_held(mds, mb, w, rw):
    aw, arw, gw, grw = (int(mds[mb + i]) for i in range(4))
    return (w & ~gw) == 0 and (w & aw) == 0 and (rw & ~grw) == 0 and (rw & arw) == 0


def _low_agree(nv, kind, ctrl, lo_off, lo_vals, cset, nthreads, nlocks,
               mem1, mem2, mds1, mds2):
    """0 if the two states agree per the whole-system clause, else (kind, index)."""
    for i in range(nthreads * 4):
        if mds1[i] != mds2[i]:
            return 1, i // 4
    unread = 0
    for t in range(nthreads):
        unread |= int(mds1[t * 4 + 1])
    for x in range(nv):
        if mem1[x] == mem2[x]:
            continue
        if (cset >> x) & 1:
            return 2, x
        k = kind[x]
        if k == 0:
            low = True
        elif k == 1:
            low = False
        else:
            cv = mem1[ctrl[x]]
            low = False
            for j in range(lo_off[x], lo_off[x + 1]):
                if lo_vals[j] == cv:
                    low = True
                    break
        if low and not (unread >> x) & 1:
            return 2, x
    for k in range(nlocks):
        if mem1[nv + k] != mem2[nv + k]:
            return 2, nv + k
    return 0, 0


def hyper(code, off, ln, lock_w, lock_rw, nv, nregs, kind, ctrl, lo_off, lo_vals,
          cset, mem1, mem2, pcs0, regs0, mds0, scheds):
    """Run both memories under every schedule row; check every prefix.

    Returns (schedule row, steps taken, kind, index) of the first
    disagreement, or (-1, -1, 0, 0).
    """
    nthreads = len(off)
    nlocks = len(lock_w)
    lock_w = [int(x) for x in lock_w]
    lock_rw = [int(x) for x in lock_rw]
    cset = int(cset)
    for s in range(scheds.shape[0]):
        m1, m2 = [int(x) for x in mem1], [int(x) for x in mem2]
        p1, p2 = [int(x) for x in pcs0], [int(x) for x in pcs0]
        r1, r2 = [int(x) for x in regs0], [int(x) for x in regs0]
        d1, d2 = [int(x) for x in mds0], [int(x) for x in mds0]
        res = _low_agree(nv, kind, ctrl, lo_off, lo_vals, cset, nthreads, nlocks,
                         m1, m2, d1, d2)
        if res[0]:
            return s, 0, res[0], res[1]
        for n in range(scheds.shape[1]):
            t = int(scheds[s, n])
            _step(code, off, ln, lock_w, lock_rw, nv, nregs, m1, p1, r1, d1, t)
            _step(code, off, ln, lock_w, lock_rw, nv, nregs, m2, p2, r2, d2, t)
            res = _low_agree(nv, kind, ctrl, lo_off, lo_vals, cset, nthreads, nlocks,
                             m1, m2, d1, d2)
            if res[0]:
                return s, n + 1, res[0], res[1]
    return -1, -1, 0, 0


def _compat(nthreads, nlocks, nv, lock_w, lock_rw, gov_w, gov_rw, mem, mds):
    for k in range(nlocks):
        w, rw = lock_w[k], lock_rw[k]
        holders = 0
        holder = -1
        for t in range(nthreads):
            if _held(mds, t * 4, w, rw):
                holders += 1
                holder = t
        if mem[nv + k] != 0:
            if holders != 1:
                return 1, k
        else:
            holder = -1
        for t in range(nthreads):
            if t != holder and not _not_held(mds, t * 4, w, rw):
                return 1, k
    for i in range(nthreads):
        aw, arw = int(mds[i * 4]), int(mds[i * 4 + 1])
        for j in range(nthreads):
            if i == j:
                continue
            gw, grw = int(mds[j * 4 + 2]), int(mds[j * 4 + 3])
            if (arw & ~gov_rw & ~grw) or (aw & ~gov_w & ~gw):
                return 2, i
            if (arw & ~grw) or (aw & ~gw):
                return 3, i
    return 0, 0


def compat(code, off, ln, lock_w, lock_rw, nv, nregs, gov_w, gov_rw,
           mem0, pcs0, regs0, mds0, scheds):
    """Check the mode-management requirements at every prefix of every row.

    Returns (row, steps, kind, index) of the first failure or (-1, -1, 0, 0);
    kind 1 = lock-managed modes, 2 = unmanaged modes, 3 = compatible modes.
    """
    nthreads = len(off)
    nlocks = len(lock_w)
    lock_w = [int(x) for x in lock_w]
    lock_rw = [int(x) for x in lock_rw]
    gov_w, gov_rw = int(gov_w), int(gov_rw)
    for s in range(scheds.shape[0]):
        m = [int(x) for x in mem0]
        p = [int(x) for x in pcs0]
        r = [int(x) for x in regs0]
        d = [int(x) for x in mds0]
        res = _compat(nthreads, nlocks, nv, lock_w, lock_rw, gov_w, gov_rw, m, d)
        if res[0]:
            return s, 0, res[0], res[1]
        for n in range(scheds.shape[1]):
            _step(code, off, ln, lock_w, lock_rw, nv, nregs, m, p, r, d, int(scheds[s, n]))
            res = _compat(nthreads, nlocks, nv, lock_w, lock_rw, gov_w, gov_rw, m, d)
            if res[0]:
                return s, n + 1, res[0], res[1]
    return -1, -1, 0, 0


def trace(code, off, ln, lock_w, lock_rw, nv, nregs, mem0, pcs0, regs0, mds0, sched):
    """States after each step of one schedule: (mems, pcs, regs, mds) arrays."""
    nthreads = len(off)
    lock_w = [int(x) for x in lock_w]
    lock_rw = [int(x) for x in lock_rw]
    m = [int(x) for x in mem0]
    p = [int(x) for x in pcs0]
    r = [int(x) for x in regs0]
    d = [int(x) for x in mds0]
    L = len(sched)
    mems = np.zeros((L + 1, len(m)), dtype=np.int64)
    pcs = np.zeros((L + 1, nthreads), dtype=np.int64)
    regs = np.zeros((L + 1, len(r)), dtype=np.int64)
    mds = np.zeros((L + 1, len(d)), dtype=np.uint64)
    mems[0], pcs[0], regs[0], mds[0] = m, p, r, d
    for n in range(L):
        _step(code, off, ln, lock_w, lock_rw, nv, nregs, m, p, r, d, int(sched[n]))
        mems[n + 1], pcs[n + 1], regs[n + 1], mds[n + 1] = m, p, r, d
    return mems, pcs, regs, mds
