"""Mistake functions and mistake dynamical balls.

A mistake function ``g(n, eps)`` grants ``g`` time indices in ``[0, n)`` at
which two orbits may fail to be ``eps``-close. The mistake ball of ``x`` is
the union of the balls ``B_L(x, eps)`` over index sets ``L`` of size at least
``n - g(n, eps)``. The index sets are never enumerated: with

    mismatch(x, y) = #{i < n : d(T^i x, T^i y) > eps}

``y`` lies in the mistake ball of ``x`` iff ``mismatch(x, y) <= g`` (take
``L`` = the matching indices; conversely any witnessing ``L`` consists of
matching indices), and ``x, y`` are ``(g; n, eps)``-separated iff
``mismatch(x, y) > g``. Because distances are dyadic and the radius is
canonicalised to its window, ``d = eps`` never occurs, so non-mismatching
indices are strict matches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .symbolic import EpsilonWindow, SymbolicWord, orbit_distance_exceeds

__all__ = [
    "MismatchProfile",
    "MistakeFunction",
    "are_g_separated",
    "eval_mistake",
    "in_mistake_ball",
    "mismatch_profile",
    "mistake_ball_members",
]

KINDS = ("zero", "constant", "logarithmic", "power")


@dataclass(frozen=True)
class MistakeFunction:
    """Integer-valued mistake allowance.

    kinds (``c >= 0``; values are floored):

    * ``zero``:        ``g = 0`` (plain Bowen balls)
    * ``constant``:    ``g = c``
    * ``logarithmic``: ``g = c * log(n)``
    * ``power``:       ``g = c * n**alpha`` with ``0 < alpha < 1``

    ``scale`` multiplies the floored value, so ``2g`` is ``g.scaled(2)``.
    For ``eps > epsilon0`` the value at ``epsilon0`` is used.
    """

    kind: str = "zero"
    c: float = 0.0
    alpha: float = 0.5
    epsilon0: float = 1.0
    scale: int = 1

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValueError(f"unknown mistake kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.c < 0:
            raise ValueError("mistake coefficient c must be >= 0")
        if kind == "power" and not 0 < self.alpha < 1:
            raise ValueError("power mistake functions need 0 < alpha < 1")
        if self.epsilon0 <= 0:
            raise ValueError("epsilon0 must be > 0")
        if int(self.scale) < 0:
            raise ValueError("scale must be >= 0")

    @classmethod
    def zero(cls) -> "MistakeFunction":
        return cls("zero")

    @classmethod
    def constant(cls, c, epsilon0: float = 1.0) -> "MistakeFunction":
        return cls("constant", c=float(c), epsilon0=epsilon0)

    @classmethod
    def logarithmic(cls, c, epsilon0: float = 1.0) -> "MistakeFunction":
        return cls("logarithmic", c=float(c), epsilon0=epsilon0)

    @classmethod
    def power(cls, c, alpha, epsilon0: float = 1.0) -> "MistakeFunction":
        return cls("power", c=float(c), alpha=float(alpha), epsilon0=epsilon0)

    def scaled(self, factor: int) -> "MistakeFunction":
        return MistakeFunction(self.kind, self.c, self.alpha, self.epsilon0, self.scale * int(factor))

    def __call__(self, n: int, eps=0.5) -> int:
        return eval_mistake(self, n, eps)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.c == 0 or self.scale == 0

    def label(self) -> str:
        base = {
            "zero": "zero",
            "constant": f"constant({self.c:g})",
            "logarithmic": f"logarithmic({self.c:g})",
            "power": f"power({self.c:g},{self.alpha:g})",
        }[self.kind]
        return base if self.scale == 1 else f"{self.scale}*{base}"

    def is_sublinear(self, eps=0.5, j_max: int = 20, min_tail: int = 6) -> bool:
        """Sampled surrogate for ``g(n)/n -> 0``.

        Looks at ``r_j = g(2**j)/2**j`` for ``j <= j_max`` and asks for a
        strictly decreasing tail of at least ``min_tail`` samples (an
        identically zero sequence counts as sublinear).
        """
        r = [eval_mistake(self, 2**j, eps) / 2**j for j in range(j_max + 1)]
        if not any(r):
            return True
        start = j_max
        while start > 0 and r[start - 1] > r[start]:
            start -= 1
        return j_max - start + 1 >= min_tail


def eval_mistake(g: MistakeFunction, n: int, eps=0.5) -> int:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    eps = eps.epsilon if isinstance(eps, EpsilonWindow) else float(eps)
    if eps <= 0:
        raise ValueError("eps must be > 0")
    eps = min(eps, g.epsilon0)  # values above epsilon0 are clamped; the kinds ignore eps below it
    if g.kind == "zero":
        raw = 0.0
    elif g.kind == "constant":
        raw = g.c
    elif g.kind == "logarithmic":
        raw = g.c * math.log(n)
    else:
        raw = g.c * n**g.alpha
    # guard against representation error just under an integer
    return g.scale * int(math.floor(raw + 1e-9))


@dataclass(frozen=True)
class MismatchProfile:
    n: int
    mismatch_count: int
    match_count_strict: int


def _check_lengths(x: SymbolicWord, y: SymbolicWord, n: int, w: int):
    need = n + w - 1
    if len(x) < need or len(y) < need:
        raise ValueError(f"words need length >= n + window - 1 = {need}, got {len(x)} and {len(y)}")


def mismatch_profile(x, y, n: int, eps) -> MismatchProfile:
    x, y = SymbolicWord.parse(x), SymbolicWord.parse(y)
    ew = EpsilonWindow.coerce(eps)
    _check_lengths(x, y, n, ew.window)
    bad = sum(orbit_distance_exceeds(x, y, i, ew) for i in range(n))
    return MismatchProfile(n, bad, n - bad)


def in_mistake_ball(x, y, n: int, eps, g: MistakeFunction) -> bool:
    """``y`` in ``B_n(g; x, eps)``: at least ``n - g(n, eps)`` strict matches."""
    prof = mismatch_profile(x, y, n, eps)
    return prof.match_count_strict >= n - eval_mistake(g, n, eps)


def are_g_separated(x, y, n: int, eps, g: MistakeFunction) -> bool:
    """``d_L(x, y) > eps`` for every admissible index set ``L``."""
    return mismatch_profile(x, y, n, eps).mismatch_count > eval_mistake(g, n, eps)


def mistake_ball_members(x, candidates, n: int, eps, g: MistakeFunction) -> list[SymbolicWord]:
    """Candidates lying in the mistake ball of ``x``, order preserved."""
    from . import kernels
    from .symbolic import pack_words, words_to_array

    candidates = [SymbolicWord.parse(c) for c in candidates]
    if not candidates:
        return []
    x = SymbolicWord.parse(x)
    ew = EpsilonWindow.coerce(eps)
    for c in candidates:
        _check_lengths(x, c, n, ew.window)
    span = n + ew.window - 1
    k = max(max(x.symbols), max(max(c.symbols) for c in candidates)) + 1
    table = pack_words(words_to_array([c.prefix(span) for c in candidates]), k)
    center = pack_words(words_to_array([x.prefix(span)]), k)[0]
    counts = kernels.mismatch_counts(center, table, n, ew.window)
    limit = eval_mistake(g, n, ew)
    return [c for c, m in zip(candidates, counts.tolist()) if m <= limit]


def brute_force_ball_and_separation(x, y, n: int, eps, g: MistakeFunction) -> tuple[bool, bool]:
    """Membership and separation by enumerating every index set (small ``n`` only).

    Uses the definitions directly: ``d(T^i x, T^i y) = 2**-(j - i)`` with ``j``
    the first disagreement at or after ``i`` (0 if none within the words).
    """
    x, y = SymbolicWord.parse(x), SymbolicWord.parse(y)
    ew = EpsilonWindow.coerce(eps)
    dist = []
    for i in range(n):
        j = next((j for j in range(i, len(x)) if x[j] != y[j]), None)
        dist.append(0.0 if j is None else 2.0 ** -(j - i))
    radius = EpsilonWindow.from_window(ew.window).epsilon
    need = n - eval_mistake(g, n, ew)
    in_ball = False
    separated = True
    for mask in range(1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        if len(idx) < need:
            continue
        d_lam = max((dist[i] for i in idx), default=0.0)
        if d_lam < radius:
            in_ball = True
        if not d_lam > radius:
            separated = False
    return in_ball, separated


def mismatch_array(center_row: np.ndarray, table_rows: np.ndarray, n: int, w: int) -> np.ndarray:
    """Mismatch counts by direct symbol comparison (unpacked oracle)."""
    diff = table_rows[:, : n + w - 1] != center_row[None, : n + w - 1]
    out = np.zeros(len(table_rows), dtype=np.int64)
    for i in range(n):
        out += diff[:, i : i + w].any(axis=1)
    return out
