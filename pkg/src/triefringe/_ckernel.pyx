# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fringe counting kernel; see ``_pykernel.py`` for the reference."""

from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport uint64_t, int64_t

from .errors import PrefixBudgetExceeded

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0

cdef enum:
    EMPTY = -1
    EXTERNAL = -2


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline int symbol(uint64_t key, int depth, const double* cdf) noexcept nogil:
    cdef double u = <double>(mix64(key + <uint64_t>(depth + 1) * GOLDEN) >> 11) * INV_2_53
    cdef int j = 0
    while u >= cdf[j]:
        j += 1
    return j


cdef struct Ctx:
    const uint64_t* keys
    const double* cdf
    int m
    const int* child
    const int* node_size
    int* sym
    int* scratch
    int* cnt
    int* start


cdef int match(Ctx* c, int node, int* buf, int n, int depth, int level) noexcept nogil:
    cdef int m = c.m
    cdef int i, j, code, expected, pos
    cdef int base = node * m
    # per-level bucket counters; sym and scratch are reused across levels
    # because each level is done with them before recursing
    cdef int* cnt = c.cnt + level * m
    cdef int* start = c.start + level * m
    for j in range(m):
        cnt[j] = 0
    for i in range(n):
        c.sym[i] = symbol(c.keys[buf[i]], depth, c.cdf)
        cnt[c.sym[i]] += 1
    for j in range(m):
        code = c.child[base + j]
        if code == EMPTY:
            expected = 0
        elif code == EXTERNAL:
            expected = 1
        else:
            expected = c.node_size[code]
        if cnt[j] != expected:
            return 0
    pos = 0
    for j in range(m):
        start[j] = pos
        pos += cnt[j]
    for i in range(n):
        j = c.sym[i]
        c.scratch[start[j]] = buf[i]
        start[j] += 1
    for i in range(n):
        buf[i] = c.scratch[i]
    pos = 0
    for j in range(m):
        start[j] = pos
        pos += cnt[j]
    for j in range(m):
        code = c.child[base + j]
        if code >= 0:
            if not match(c, code, buf + start[j], cnt[j], depth + 1, level + 1):
                return 0
    return 1


cdef int count_kernel(const uint64_t* keys, int n, const double* cdf, int m,
                      const int* child, const int* node_size,
                      const int* roots, const int* sizes, int k,
                      int max_tau, int max_height, int max_depth,
                      int64_t* counts) noexcept nogil:
    """0 on success, 1 on prefix budget exhaustion, 2 on allocation failure."""
    cdef int i, j, t, lo, hi, depth, cnt_c, pos
    cdef int min_tau = sizes[0]
    cdef int status = 0
    cdef int* order = <int*>malloc(n * sizeof(int))
    cdef int* tmp = <int*>malloc(n * sizeof(int))
    cdef int* sym = <int*>malloc(n * sizeof(int))
    cdef int* mbuf = <int*>malloc(max_tau * sizeof(int))
    cdef int* mscratch = <int*>malloc(max_tau * sizeof(int))
    cdef int* msym = <int*>malloc(max_tau * sizeof(int))
    cdef int* mcnt = <int*>malloc((max_height + 1) * m * sizeof(int))
    cdef int* mstart = <int*>malloc((max_height + 1) * m * sizeof(int))
    cdef int bcnt[64]
    cdef int bstart[64]
    cdef int cap = 1024
    cdef int top = 0
    cdef int* stack = <int*>malloc(3 * cap * sizeof(int))
    cdef int* grown
    cdef Ctx ctx
    for t in range(k):
        if sizes[t] < min_tau:
            min_tau = sizes[t]
    if (order == NULL or tmp == NULL or sym == NULL or mbuf == NULL or mscratch == NULL
            or msym == NULL or mcnt == NULL or mstart == NULL or stack == NULL or m > 64):
        status = 2
    else:
        ctx.keys = keys
        ctx.cdf = cdf
        ctx.m = m
        ctx.child = child
        ctx.node_size = node_size
        ctx.sym = msym
        ctx.scratch = mscratch
        ctx.cnt = mcnt
        ctx.start = mstart
        for i in range(n):
            order[i] = i
        stack[0] = 0
        stack[1] = n
        stack[2] = 0
        top = 1
        while top > 0:
            top -= 1
            lo = stack[3 * top]
            hi = stack[3 * top + 1]
            depth = stack[3 * top + 2]
            cnt_c = hi - lo
            for t in range(k):
                if sizes[t] == cnt_c:
                    for i in range(cnt_c):
                        mbuf[i] = order[lo + i]
                    if match(&ctx, roots[t], mbuf, cnt_c, depth, 0):
                        counts[t] += 1
                        break
            if cnt_c < min_tau:
                continue
            if depth >= max_depth:
                status = 1
                break
            for j in range(m):
                bcnt[j] = 0
            for i in range(lo, hi):
                sym[i] = symbol(keys[order[i]], depth, cdf)
                bcnt[sym[i]] += 1
            pos = lo
            for j in range(m):
                bstart[j] = pos
                pos += bcnt[j]
            for i in range(lo, hi):
                j = sym[i]
                tmp[bstart[j]] = order[i]
                bstart[j] += 1
            for i in range(lo, hi):
                order[i] = tmp[i]
            if top + m > cap:
                cap = 2 * (top + m)
                grown = <int*>realloc(stack, 3 * cap * sizeof(int))
                if grown == NULL:
                    status = 2
                    break
                stack = grown
            pos = hi
            for j in range(m - 1, -1, -1):
                pos -= bcnt[j]
                if bcnt[j] >= min_tau:
                    stack[3 * top] = pos
                    stack[3 * top + 1] = pos + bcnt[j]
                    stack[3 * top + 2] = depth + 1
                    top += 1
    free(order)
    free(tmp)
    free(sym)
    free(mbuf)
    free(mscratch)
    free(msym)
    free(mcnt)
    free(mstart)
    free(stack)
    return status


def _stream_key(uint64_t seed, uint64_t stream_id):
    return mix64(mix64(seed + GOLDEN) ^ stream_id)


def fringe_counts(seed, stream_base, int n, cdf, int m, child, node_size, roots, sizes, int max_height,
                  int max_depth):
    cdef int k = len(roots)
    counts_out = [0] * k
    if n < 2 or k == 0:
        return counts_out
    cdef uint64_t useed = (<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF))
    cdef uint64_t ubase = (<uint64_t>(stream_base & 0xFFFFFFFFFFFFFFFF))
    cdef uint64_t skey = mix64(useed + GOLDEN)
    cdef int nnodes = len(node_size)
    cdef uint64_t* keys = <uint64_t*>malloc(n * sizeof(uint64_t))
    cdef double* ccdf = <double*>malloc(m * sizeof(double))
    cdef int* cchild = <int*>malloc((nnodes * m + 1) * sizeof(int))
    cdef int* csize = <int*>malloc((nnodes + 1) * sizeof(int))
    cdef int* croots = <int*>malloc(k * sizeof(int))
    cdef int* csizes = <int*>malloc(k * sizeof(int))
    cdef int64_t* counts = <int64_t*>malloc(k * sizeof(int64_t))
    cdef int i, status
    cdef int max_tau = max(sizes)
    if (keys == NULL or ccdf == NULL or cchild == NULL or csize == NULL or croots == NULL
            or csizes == NULL or counts == NULL):
        free(keys); free(ccdf); free(cchild); free(csize); free(croots); free(csizes); free(counts)
        raise MemoryError()
    try:
        for i in range(n):
            keys[i] = mix64(skey ^ (ubase + <uint64_t>i))
        for i in range(m):
            ccdf[i] = cdf[i]
        for i in range(nnodes * m):
            cchild[i] = child[i]
        for i in range(nnodes):
            csize[i] = node_size[i]
        for i in range(k):
            croots[i] = roots[i]
            csizes[i] = sizes[i]
            counts[i] = 0
        with nogil:
            status = count_kernel(keys, n, ccdf, m, cchild, csize, croots, csizes, k,
                                  max_tau, max_height, max_depth, counts)
        if status == 1:
            raise PrefixBudgetExceeded(f"strings still collide at depth {max_depth}")
        if status == 2:
            raise MemoryError()
        for i in range(k):
            counts_out[i] = counts[i]
    finally:
        free(keys); free(ccdf); free(cchild); free(csize); free(croots); free(csizes); free(counts)
    return counts_out
