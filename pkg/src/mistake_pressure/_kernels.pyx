# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled mismatch-count kernels over bit-plane packed words.

Same contracts as ``_kernels_py``; see there for the definitions.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline uint64_t _low_mask(int n) noexcept nogil:
    if n >= 64:
        return <uint64_t>0xFFFFFFFFFFFFFFFF
    return ((<uint64_t>1) << n) - 1


cdef inline int _count(const uint64_t[:, ::1] t, Py_ssize_t a, Py_ssize_t b,
                       Py_ssize_t planes, int w, uint64_t mask) noexcept nogil:
    cdef uint64_t diff = 0
    cdef uint64_t ex
    cdef Py_ssize_t p
    cdef int s
    for p in range(planes):
        diff |= t[a, p] ^ t[b, p]
    ex = diff
    for s in range(1, w):
        ex |= diff >> s
    return __builtin_popcountll(ex & mask)


def mismatch_counts(center, table, int n, int w):
    cdef const uint64_t[:, ::1] t = np.ascontiguousarray(table, dtype=np.uint64)
    cdef const uint64_t[::1] c = np.ascontiguousarray(center, dtype=np.uint64)
    cdef Py_ssize_t N = t.shape[0], planes = t.shape[1], i, p
    cdef uint64_t mask = _low_mask(n), diff, ex
    cdef int s
    out = np.empty(N, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(N):
            diff = 0
            for p in range(planes):
                diff |= t[i, p] ^ c[p]
            ex = diff
            for s in range(1, w):
                ex |= diff >> s
            o[i] = __builtin_popcountll(ex & mask)
    return out


def greedy_separated(table, order, int n, int w, long long g):
    cdef const uint64_t[:, ::1] t = np.ascontiguousarray(table, dtype=np.uint64)
    cdef int64_t[::1] alive = np.array(order, dtype=np.int64, copy=True)
    cdef Py_ssize_t planes = t.shape[1]
    cdef Py_ssize_t remaining = alive.shape[0], k, keep, chosen_count = 0
    cdef int64_t pick
    cdef uint64_t mask = _low_mask(n)
    chosen = np.empty(remaining, dtype=np.int64)
    cdef int64_t[::1] ch = chosen
    with nogil:
        while remaining > 0:
            pick = alive[0]
            ch[chosen_count] = pick
            chosen_count += 1
            keep = 0
            for k in range(1, remaining):
                if _count(t, pick, alive[k], planes, w, mask) > g:
                    alive[keep] = alive[k]
                    keep += 1
            remaining = keep
    return chosen[:chosen_count].copy()


def ball_lists(table, int n, int w, long long g, long long max_entries):
    cdef const uint64_t[:, ::1] t = np.ascontiguousarray(table, dtype=np.uint64)
    cdef Py_ssize_t N = t.shape[0], planes = t.shape[1], i, j
    cdef uint64_t mask = _low_mask(n)
    counts = np.zeros(N, dtype=np.int64)
    cdef int64_t[::1] cnt = counts
    cdef long long total = 0
    with nogil:
        for i in range(N):
            cnt[i] += 1
            for j in range(i + 1, N):
                if _count(t, i, j, planes, w, mask) <= g:
                    cnt[i] += 1
                    cnt[j] += 1
        for i in range(N):
            total += cnt[i]
    if total > max_entries:
        return None
    indptr = np.zeros(N + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.empty(total, dtype=np.int64)
    cursor = indptr[:-1].copy()
    cdef int64_t[::1] ind = indices
    cdef int64_t[::1] cur = cursor
    with nogil:
        for i in range(N):
            ind[cur[i]] = i
            cur[i] += 1
            for j in range(i + 1, N):
                if _count(t, i, j, planes, w, mask) <= g:
                    ind[cur[i]] = j
                    cur[i] += 1
                    ind[cur[j]] = i
                    cur[j] += 1
    return indptr, indices
