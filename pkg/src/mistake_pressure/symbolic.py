"""Subshifts of finite type, words/cylinders and the Bowen metric.

Points of the shift space are handled at finite resolution: a point is a
word long enough for every quantity evaluated at scale ``(n, eps)``. The
metric on the full sequence space is ``d(x, y) = 2**-j`` where ``j`` is the
first index at which ``x`` and ``y`` disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BudgetExceeded",
    "EpsilonWindow",
    "ShiftSystem",
    "SymbolicWord",
    "admissible_array",
    "admissible_words",
    "bowen_distance",
    "full_shift",
    "golden_mean_shift",
    "orbit_distance_exceeds",
    "pack_words",
]

DEFAULT_MAX_WORDS = 1 << 21


class BudgetExceeded(RuntimeError):
    """An enumeration or search would exceed its configured size budget."""


@dataclass(frozen=True, order=True)
class SymbolicWord:
    """A finite word over ``{0, ..., k-1}``; also read as the cylinder it spans."""

    symbols: tuple[int, ...]

    def __post_init__(self):
        symbols = tuple(int(s) for s in self.symbols)
        if not symbols:
            raise ValueError("a word needs at least one symbol")
        if min(symbols) < 0:
            raise ValueError("symbols must be nonnegative")
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def parse(cls, text: str | Sequence[int] | "SymbolicWord") -> "SymbolicWord":
        if isinstance(text, SymbolicWord):
            return text
        if isinstance(text, str):
            return cls(tuple(int(c) for c in text))
        return cls(tuple(text))

    @property
    def length(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, item):
        return self.symbols[item]

    def shift(self, i: int = 1) -> "SymbolicWord":
        """``T**i`` applied to the word (drops the first ``i`` symbols)."""
        return SymbolicWord(self.symbols[i:])

    def prefix(self, length: int) -> "SymbolicWord":
        return SymbolicWord(self.symbols[:length])

    def __str__(self) -> str:
        if max(self.symbols) < 10:
            return "".join(map(str, self.symbols))
        return "-".join(map(str, self.symbols))


def _as_word(x) -> SymbolicWord:
    return SymbolicWord.parse(x)


@dataclass(frozen=True)
class EpsilonWindow:
    """Radius ``epsilon`` together with its integer window.

    ``window`` is the least ``w`` with ``2**-w <= epsilon``; under the dyadic
    metric ``d(x, y) > epsilon`` holds iff ``x`` and ``y`` differ among their
    first ``window`` symbols. All computations depend on ``window`` only.
    """

    epsilon: float
    window: int = field(init=False)

    def __post_init__(self):
        eps = float(self.epsilon)
        if not 0.0 < eps < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {eps!r}")
        # eps = m * 2**e with m in [0.5, 1) gives least w = 1 - e
        _, e = math.frexp(eps)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "window", 1 - e)

    @classmethod
    def from_window(cls, window: int) -> "EpsilonWindow":
        """Canonical radius strictly inside ``[2**-w, 2**-(w-1))``."""
        if int(window) < 1:
            raise ValueError(f"window must be >= 1, got {window!r}")
        return cls(1.5 * 2.0 ** -int(window))

    @classmethod
    def coerce(cls, eps) -> "EpsilonWindow":
        if isinstance(eps, EpsilonWindow):
            return eps
        return cls(float(eps))

    def halved(self) -> "EpsilonWindow":
        return EpsilonWindow.from_window(self.window + 1)

    def __str__(self) -> str:
        return f"eps={self.epsilon:g} (window {self.window})"


class ShiftSystem:
    """Subshift of finite type given by a 0/1 transition matrix.

    Entry ``(a, b)`` is 1 iff ``b`` may follow ``a``. The matrix must have no
    dead symbols and must be irreducible; the dynamics is the left shift.
    """

    def __init__(self, transitions, name: str | None = None):
        t = np.array(transitions, dtype=np.int64)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 1:
            raise ValueError("transitions must be a non-empty square matrix")
        if not np.isin(t, (0, 1)).all():
            raise ValueError("transitions must contain only 0 and 1")
        if (t.sum(axis=1) == 0).any() or (t.sum(axis=0) == 0).any():
            raise ValueError("every symbol needs a successor and a predecessor")
        if not _strongly_connected(t):
            raise ValueError("transition graph is not irreducible")
        self.transitions = t.astype(np.uint8)
        self.transitions.setflags(write=False)
        self.alphabet_size = int(t.shape[0])
        self.name = name
        self._succ = [np.flatnonzero(row) for row in t]

    @classmethod
    def from_forbidden(cls, alphabet_size: int, forbidden: Iterable[Sequence[int]] = (), name=None):
        t = np.ones((alphabet_size, alphabet_size), dtype=np.int64)
        for a, b in forbidden:
            if not (0 <= a < alphabet_size and 0 <= b < alphabet_size):
                raise ValueError(f"forbidden pair {(a, b)} outside alphabet")
            t[a, b] = 0
        return cls(t, name=name)

    def __eq__(self, other):
        return isinstance(other, ShiftSystem) and np.array_equal(self.transitions, other.transitions)

    def __hash__(self):
        return hash(self.transitions.tobytes())

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<ShiftSystem{label} k={self.alphabet_size} forbidden={self.forbidden_pairs()}>"

    def forbidden_pairs(self) -> list[tuple[int, int]]:
        return [tuple(map(int, p)) for p in np.argwhere(self.transitions == 0)]

    def is_admissible(self, word) -> bool:
        s = _as_word(word).symbols
        if max(s) >= self.alphabet_size:
            return False
        return all(self.transitions[a, b] for a, b in zip(s, s[1:]))

    def validate(self, word) -> SymbolicWord:
        w = _as_word(word)
        if max(w.symbols) >= self.alphabet_size:
            raise ValueError(f"word {w} uses a symbol outside the alphabet of size {self.alphabet_size}")
        for i, (a, b) in enumerate(zip(w.symbols, w.symbols[1:])):
            if not self.transitions[a, b]:
                raise ValueError(f"word {w} has forbidden transition {a}->{b} at index {i}")
        return w

    def word(self, symbols) -> SymbolicWord:
        return self.validate(symbols)

    def successors(self, a: int) -> np.ndarray:
        return self._succ[a]

    def higher_block(self, r: int) -> tuple["ShiftSystem", np.ndarray]:
        """The ``r``-block presentation and its states (admissible ``r``-words)."""
        states = admissible_array(self, r)
        if r == 1:
            return self, states
        index = {tuple(s): i for i, s in enumerate(states)}
        t = np.zeros((len(states), len(states)), dtype=np.int64)
        for i, s in enumerate(states):
            for b in self._succ[s[-1]]:
                t[i, index[tuple(s[1:]) + (int(b),)]] = 1
        return ShiftSystem(t), states


def _strongly_connected(t: np.ndarray) -> bool:
    k = t.shape[0]

    def reach(adj):
        seen = {0}
        stack = [0]
        while stack:
            a = stack.pop()
            for b in np.flatnonzero(adj[a]):
                if int(b) not in seen:
                    seen.add(int(b))
                    stack.append(int(b))
        return len(seen) == k

    return reach(t) and reach(t.T)


def full_shift(k: int = 2) -> ShiftSystem:
    return ShiftSystem(np.ones((k, k), dtype=np.int64), name=f"full-{k}-shift")


def golden_mean_shift() -> ShiftSystem:
    return ShiftSystem([[1, 1], [1, 0]], name="golden-mean")


def admissible_array(system: ShiftSystem, length: int, max_words: int = DEFAULT_MAX_WORDS) -> np.ndarray:
    """All admissible words of ``length`` as a lexicographically sorted uint8 array."""
    length = int(length)
    if length < 1:
        raise ValueError(f"word length must be >= 1, got {length}")
    k = system.alphabet_size
    deg = system.transitions.sum(axis=1).astype(np.int64)
    succ = np.zeros((k, int(deg.max())), dtype=np.uint8)
    for a in range(k):
        succ[a, : deg[a]] = system.successors(a)
    words = np.arange(k, dtype=np.uint8)[:, None]
    for _ in range(length - 1):
        last = words[:, -1]
        counts = deg[last]
        total = int(counts.sum())
        if total > max_words:
            raise BudgetExceeded(f"{total} admissible words of length {words.shape[1] + 1} exceed budget {max_words}")
        rows = np.repeat(np.arange(len(words)), counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        pos = np.arange(total) - starts
        nxt = succ[last[rows], pos]
        words = np.concatenate([words[rows], nxt[:, None]], axis=1)
    if len(words) > max_words:
        raise BudgetExceeded(f"{len(words)} admissible words exceed budget {max_words}")
    return np.ascontiguousarray(words)


def admissible_words(system: ShiftSystem, n: int) -> list[SymbolicWord]:
    if int(n) < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return [SymbolicWord(tuple(row)) for row in admissible_array(system, n).tolist()]


def words_to_array(words: Sequence) -> np.ndarray:
    ws = [_as_word(w).symbols for w in words]
    if not ws:
        return np.zeros((0, 0), dtype=np.uint8)
    if len({len(s) for s in ws}) != 1:
        raise ValueError("words must share one length")
    return np.array(ws, dtype=np.uint8)


def pack_words(words: np.ndarray, alphabet_size: int) -> np.ndarray:
    """Bit-plane packing: row ``i``, plane ``p`` holds bit ``p`` of each symbol.

    Bit ``j`` of a plane corresponds to position ``j`` of the word, so the
    positions where two words differ are the OR over planes of their XOR.
    """
    words = np.asarray(words, dtype=np.uint8)
    if words.ndim != 2:
        raise ValueError("expected a 2-d array of words")
    if words.shape[1] > 64:
        raise ValueError("packed words are limited to 64 symbols")
    planes = max(1, int(alphabet_size - 1).bit_length())
    out = np.zeros((words.shape[0], planes), dtype=np.uint64)
    weights = np.left_shift(np.uint64(1), np.arange(words.shape[1], dtype=np.uint64))
    for p in range(planes):
        bits = ((words >> p) & 1).astype(np.uint64)
        out[:, p] = (bits * weights).sum(axis=1, dtype=np.uint64)
    return np.ascontiguousarray(out)


def first_difference(x, y) -> int | None:
    xs, ys = _as_word(x).symbols, _as_word(y).symbols
    for j, (a, b) in enumerate(zip(xs, ys)):
        if a != b:
            return j
    return None


def orbit_distance_exceeds(x, y, i: int, eps) -> bool:
    """Whether ``d(T**i x, T**i y) > eps``."""
    x, y = _as_word(x), _as_word(y)
    w = EpsilonWindow.coerce(eps).window
    if i < 0:
        raise ValueError("index must be nonnegative")
    if len(x) < i + w or len(y) < i + w:
        raise ValueError(f"words of length {len(x)}, {len(y)} too short for index {i} and window {w}")
    return x.symbols[i : i + w] != y.symbols[i : i + w]


def bowen_distance(x, y, n: int) -> float:
    """``d_n(x, y) = max_{i<n} d(T**i x, T**i y)``; 0 if no stored symbol differs."""
    x, y = _as_word(x), _as_word(y)
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if n < 1:
        raise ValueError("n must be >= 1")
    j = first_difference(x, y)
    if j is None:
        return 0.0
    return 2.0 ** -max(0, j - (n - 1))
