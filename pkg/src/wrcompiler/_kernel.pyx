# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RISC system kernel; mirrors ``_kernel_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

cnp.import_array()

cdef enum:
    LOAD, STORE, JMP, JZ, NOP, MOVEK, MOVER, OP, ACQ, REL


cdef inline int64_t _apply(int64_t op, int64_t a, int64_t b) nogil:
    if op == 0:
        return <int64_t>(<uint64_t>a + <uint64_t>b)
    if op == 1:
        return <int64_t>(<uint64_t>a - <uint64_t>b)
    if op == 2:
        return <int64_t>(<uint64_t>a * <uint64_t>b)
    if op == 3:
        return a == b
    if op == 4:
        return a != b
    if op == 5:
        return a < b
    if op == 6:
        return a <= b
    if op == 7:
        return a != 0 and b != 0
    return a != 0 or b != 0


cdef inline bint _held(uint64_t* d, uint64_t w, uint64_t rw) nogil:
    return ((w & ~d[0]) == 0 and (w & d[2]) == 0
            and (rw & ~d[1]) == 0 and (rw & d[3]) == 0)


cdef inline bint _not_held(uint64_t* d, uint64_t w, uint64_t rw) nogil:
    return ((w & ~d[2]) == 0 and (w & d[0]) == 0
            and (rw & ~d[3]) == 0 and (rw & d[1]) == 0)


cdef inline void _step(const int64_t[:, ::1] code, const int64_t[::1] off,
                       const int64_t[::1] ln, const uint64_t[::1] lock_w,
                       const uint64_t[::1] lock_rw, Py_ssize_t nv, Py_ssize_t nregs,
                       int64_t* mem, int64_t* pcs, int64_t* regs, uint64_t* mds,
                       Py_ssize_t t) nogil:
    cdef int64_t pc = pcs[t]
    if pc >= ln[t]:
        return
    cdef Py_ssize_t row = off[t] + pc
    cdef int64_t opc = code[row, 0], a = code[row, 1], b = code[row, 2], c = code[row, 3]
    cdef int64_t* rg = regs + t * nregs
    cdef uint64_t* d = mds + t * 4
    cdef uint64_t w, rw
    if opc == LOAD:
        rg[a] = mem[b]
        pcs[t] = pc + 1
    elif opc == STORE:
        mem[a] = rg[b]
        pcs[t] = pc + 1
    elif opc == JMP:
        pcs[t] = a
    elif opc == JZ:
        pcs[t] = a if rg[b] == 0 else pc + 1
    elif opc == NOP:
        pcs[t] = pc + 1
    elif opc == MOVEK:
        rg[a] = b
        pcs[t] = pc + 1
    elif opc == MOVER:
        rg[a] = rg[b]
        pcs[t] = pc + 1
    elif opc == OP:
        rg[b] = _apply(a, rg[b], rg[c])
        pcs[t] = pc + 1
    elif opc == ACQ:
        if mem[nv + a] == 0:
            w = lock_w[a]
            rw = lock_rw[a]
            mem[nv + a] = 1
            d[0] |= w
            d[1] |= rw
            d[2] &= ~w
            d[3] &= ~rw
            pcs[t] = pc + 1
    elif opc == REL:
        w = lock_w[a]
        rw = lock_rw[a]
        if _held(d, w, rw):
            mem[nv + a] = 0
            d[0] &= ~w
            d[1] &= ~rw
            d[2] |= w
            d[3] |= rw
            pcs[t] = pc + 1


cdef inline int _low_agree(Py_ssize_t nv, const int64_t[::1] kind, const int64_t[::1] ctrl,
                           const int64_t[::1] lo_off, const int64_t[::1] lo_vals,
                           uint64_t cset, Py_ssize_t nthreads, Py_ssize_t nlocks,
                           int64_t* m1, int64_t* m2, uint64_t* d1, uint64_t* d2,
                           Py_ssize_t* where) nogil:
    cdef Py_ssize_t i, x, j, k
    cdef uint64_t unread = 0
    cdef bint low
    cdef int64_t cv
    for i in range(nthreads * 4):
        if d1[i] != d2[i]:
            where[0] = i // 4
            return 1
    for i in range(nthreads):
        unread |= d1[i * 4 + 1]
    for x in range(nv):
        if m1[x] == m2[x]:
            continue
        if (cset >> x) & 1:
            where[0] = x
            return 2
        if kind[x] == 0:
            low = True
        elif kind[x] == 1:
            low = False
        else:
            cv = m1[ctrl[x]]
            low = False
            for j in range(lo_off[x], lo_off[x + 1]):
                if lo_vals[j] == cv:
                    low = True
                    break
        if low and not ((unread >> x) & 1):
            where[0] = x
            return 2
    for k in range(nlocks):
        if m1[nv + k] != m2[nv + k]:
            where[0] = nv + k
            return 2
    return 0


def hyper(const int64_t[:, ::1] code, const int64_t[::1] off, const int64_t[::1] ln,
          const uint64_t[::1] lock_w, const uint64_t[::1] lock_rw,
          Py_ssize_t nv, Py_ssize_t nregs,
          const int64_t[::1] kind, const int64_t[::1] ctrl,
          const int64_t[::1] lo_off, const int64_t[::1] lo_vals, uint64_t cset,
          const int64_t[::1] mem1, const int64_t[::1] mem2, const int64_t[::1] pcs0,
          const int64_t[::1] regs0, const uint64_t[::1] mds0,
          const int64_t[:, ::1] scheds):
    cdef Py_ssize_t nthreads = off.shape[0], nlocks = lock_w.shape[0]
    cdef Py_ssize_t M = mem1.shape[0], R = regs0.shape[0], D = mds0.shape[0]
    cdef Py_ssize_t s, n, where = 0
    cdef int res = 0
    cdef Py_ssize_t bad_s = -1, bad_n = -1
    cdef int64_t* m1 = <int64_t*>malloc(M * sizeof(int64_t) + 1)
    cdef int64_t* m2 = <int64_t*>malloc(M * sizeof(int64_t) + 1)
    cdef int64_t* p1 = <int64_t*>malloc(nthreads * sizeof(int64_t) + 1)
    cdef int64_t* p2 = <int64_t*>malloc(nthreads * sizeof(int64_t) + 1)
    cdef int64_t* r1 = <int64_t*>malloc(R * sizeof(int64_t) + 1)
    cdef int64_t* r2 = <int64_t*>malloc(R * sizeof(int64_t) + 1)
    cdef uint64_t* d1 = <uint64_t*>malloc(D * sizeof(uint64_t) + 1)
    cdef uint64_t* d2 = <uint64_t*>malloc(D * sizeof(uint64_t) + 1)
    try:
        with nogil:
            for s in range(scheds.shape[0]):
                memcpy(m1, &mem1[0], M * sizeof(int64_t))
                memcpy(m2, &mem2[0], M * sizeof(int64_t))
                memcpy(p1, &pcs0[0], nthreads * sizeof(int64_t))
                memcpy(p2, &pcs0[0], nthreads * sizeof(int64_t))
                if R:
                    memcpy(r1, &regs0[0], R * sizeof(int64_t))
                    memcpy(r2, &regs0[0], R * sizeof(int64_t))
                memcpy(d1, &mds0[0], D * sizeof(uint64_t))
                memcpy(d2, &mds0[0], D * sizeof(uint64_t))
                res = _low_agree(nv, kind, ctrl, lo_off, lo_vals, cset, nthreads, nlocks,
                                 m1, m2, d1, d2, &where)
                if res:
                    bad_s = s
                    bad_n = 0
                    break
                for n in range(scheds.shape[1]):
                    _step(code, off, ln, lock_w, lock_rw, nv, nregs, m1, p1, r1, d1, scheds[s, n])
                    _step(code, off, ln, lock_w, lock_rw, nv, nregs, m2, p2, r2, d2, scheds[s, n])
                    res = _low_agree(nv, kind, ctrl, lo_off, lo_vals, cset, nthreads, nlocks,
                                     m1, m2, d1, d2, &where)
                    if res:
                        bad_s = s
                        bad_n = n + 1
                        break
                if res:
                    break
    finally:
        free(m1); free(m2); free(p1); free(p2)
        free(r1); free(r2); free(d1); free(d2)
    if res:
        return bad_s, bad_n, res, where
    return -1, -1, 0, 0


cdef inline int _compat(Py_ssize_t nthreads, Py_ssize_t nlocks, Py_ssize_t nv,
                        const uint64_t[::1] lock_w, const uint64_t[::1] lock_rw,
                        uint64_t gov_w, uint64_t gov_rw, int64_t* mem, uint64_t* mds,
                        Py_ssize_t* where) nogil:
    cdef Py_ssize_t k, t, i, j, holders, holder
    cdef uint64_t w, rw, aw, arw, gw, grw
    for k in range(nlocks):
        w = lock_w[k]
        rw = lock_rw[k]
        holders = 0
        holder = -1
        for t in range(nthreads):
            if _held(mds + t * 4, w, rw):
                holders += 1
                holder = t
        if mem[nv + k] != 0:
            if holders != 1:
                where[0] = k
                return 1
        else:
            holder = -1
        for t in range(nthreads):
            if t != holder and not _not_held(mds + t * 4, w, rw):
                where[0] = k
                return 1
    for i in range(nthreads):
        aw = mds[i * 4]
        arw = mds[i * 4 + 1]
        for j in range(nthreads):
            if i == j:
                continue
            gw = mds[j * 4 + 2]
            grw = mds[j * 4 + 3]
            if (arw & ~gov_rw & ~grw) or (aw & ~gov_w & ~gw):
                where[0] = i
                return 2
            if (arw & ~grw) or (aw & ~gw):
                where[0] = i
                return 3
    return 0


def compat(const int64_t[:, ::1] code, const int64_t[::1] off, const int64_t[::1] ln,
           const uint64_t[::1] lock_w, const uint64_t[::1] lock_rw,
           Py_ssize_t nv, Py_ssize_t nregs, uint64_t gov_w, uint64_t gov_rw,
           const int64_t[::1] mem0, const int64_t[::1] pcs0, const int64_t[::1] regs0,
           const uint64_t[::1] mds0, const int64_t[:, ::1] scheds):
    cdef Py_ssize_t nthreads = off.shape[0], nlocks = lock_w.shape[0]
    cdef Py_ssize_t M = mem0.shape[0], R = regs0.shape[0], D = mds0.shape[0]
    cdef Py_ssize_t s, n, where = 0
    cdef int res = 0
    cdef Py_ssize_t bad_s = -1, bad_n = -1
    cdef int64_t* m = <int64_t*>malloc(M * sizeof(int64_t) + 1)
    cdef int64_t* p = <int64_t*>malloc(nthreads * sizeof(int64_t) + 1)
    cdef int64_t* r = <int64_t*>malloc(R * sizeof(int64_t) + 1)
    cdef uint64_t* d = <uint64_t*>malloc(D * sizeof(uint64_t) + 1)
    try:
        with nogil:
            for s in range(scheds.shape[0]):
                memcpy(m, &mem0[0], M * sizeof(int64_t))
                memcpy(p, &pcs0[0], nthreads * sizeof(int64_t))
                if R:
                    memcpy(r, &regs0[0], R * sizeof(int64_t))
                memcpy(d, &mds0[0], D * sizeof(uint64_t))
                res = _compat(nthreads, nlocks, nv, lock_w, lock_rw, gov_w, gov_rw, m, d, &where)
                if res:
                    bad_s = s
                    bad_n = 0
                    break
                for n in range(scheds.shape[1]):
                    _step(code, off, ln, lock_w, lock_rw, nv, nregs, m, p, r, d, scheds[s, n])
                    res = _compat(nthreads, nlocks, nv, lock_w, lock_rw, gov_w, gov_rw,
                                  m, d, &where)
                    if res:
                        bad_s = s
                        bad_n = n + 1
                        break
                if res:
                    break
    finally:
        free(m); free(p); free(r); free(d)
    if res:
        return bad_s, bad_n, res, where
    return -1, -1, 0, 0


def trace(const int64_t[:, ::1] code, const int64_t[::1] off, const int64_t[::1] ln,
          const uint64_t[::1] lock_w, const uint64_t[::1] lock_rw,
          Py_ssize_t nv, Py_ssize_t nregs, const int64_t[::1] mem0,
          const int64_t[::1] pcs0, const int64_t[::1] regs0, const uint64_t[::1] mds0,
          const int64_t[::1] sched):
    cdef Py_ssize_t L = sched.shape[0], n
    mems = np.zeros((L + 1, mem0.shape[0]), dtype=np.int64)
    pcs = np.zeros((L + 1, pcs0.shape[0]), dtype=np.int64)
    regs = np.zeros((L + 1, regs0.shape[0]), dtype=np.int64)
    mds = np.zeros((L + 1, mds0.shape[0]), dtype=np.uint64)
    cdef int64_t[:, ::1] mv = mems
    cdef int64_t[:, ::1] pv = pcs
    cdef int64_t[:, ::1] rv = regs
    cdef uint64_t[:, ::1] dv = mds
    mv[0, :] = mem0
    pv[0, :] = pcs0
    rv[0, :] = regs0
    dv[0, :] = mds0
    for n in range(L):
        mv[n + 1, :] = mv[n, :]
        pv[n + 1, :] = pv[n, :]
        rv[n + 1, :] = rv[n, :]
        dv[n + 1, :] = dv[n, :]
        _step(code, off, ln, lock_w, lock_rw, nv, nregs,
              &mv[n + 1, 0] if mv.shape[1] else NULL, &pv[n + 1, 0],
              &rv[n + 1, 0] if rv.shape[1] else NULL, &dv[n + 1, 0], sched[n])
    return mems, pcs, regs, mds
