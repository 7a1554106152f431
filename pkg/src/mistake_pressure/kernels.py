"""Kernel backend selection.

The compiled extension is used when importable; setting the environment
variable ``MISTAKE_PRESSURE_PURE=1`` forces the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MISTAKE_PRESSURE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def mismatch_counts(center, table, n, w):
    """Windowed mismatch count of ``center`` against every row of ``table``."""
    return _impl.mismatch_counts(center, table, int(n), int(w))


def greedy_separated(table, order, n, w, g):
    """Scan ``order``; keep a row iff its mismatch count exceeds ``g`` against every kept row."""
    return _impl.greedy_separated(table, order, int(n), int(w), int(g))


def ball_lists(table, n, w, g, max_entries=50_000_000):
    """CSR adjacency ``(indptr, indices)`` of pairs with mismatch count <= ``g``.

    Rows are sorted and include the row itself. Returns ``None`` when the
    total number of entries would exceed ``max_entries``.
    """
    return _impl.ball_lists(table, int(n), int(w), int(g), int(max_entries))
