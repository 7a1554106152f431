"""Pure numpy versions of the mismatch-count kernels.

Words arrive bit-plane packed (see :func:`symbolic.pack_words`). For two
words with difference mask ``D`` (bit ``j`` set iff position ``j`` differs),
index ``i`` is a mismatch at window ``w`` iff ``D`` has a set bit in
``[i, i + w)``; the mismatch count is the number of such ``i < n``.
"""

import numpy as np


def _mask(n):
    return np.uint64(0xFFFFFFFFFFFFFFFF) if n >= 64 else np.uint64((1 << n) - 1)


def _exceed(diff, n, w):
    ex = diff.copy()
    for s in range(1, w):
        ex |= diff >> np.uint64(s)
    return ex & _mask(n)


def mismatch_counts(center, table, n, w):
    table = np.asarray(table, dtype=np.uint64)
    center = np.asarray(center, dtype=np.uint64)
    diff = np.bitwise_or.reduce(table ^ center[None, :], axis=1)
    return np.bitwise_count(_exceed(diff, n, w)).astype(np.int64)


def greedy_separated(table, order, n, w, g):
    table = np.asarray(table, dtype=np.uint64)
    alive = np.array(order, dtype=np.int64)
    chosen = []
    while alive.size:
        pick = alive[0]
        chosen.append(pick)
        rest = alive[1:]
        alive = rest[mismatch_counts(table[pick], table[rest], n, w) > g]
    return np.array(chosen, dtype=np.int64)


def ball_lists(table, n, w, g, max_entries):
    table = np.asarray(table, dtype=np.uint64)
    rows = []
    total = 0
    for i in range(table.shape[0]):
        members = np.flatnonzero(mismatch_counts(table[i], table, n, w) <= g)
        total += members.size
        if total > max_entries:
            return None
        rows.append(members)
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum([r.size for r in rows], out=indptr[1:])
    indices = np.concatenate(rows).astype(np.int64) if rows else np.zeros(0, dtype=np.int64)
    return indptr, indices
