"""Potential sequences ``F = {f_n}`` on a subshift.

Three kinds are provided:

* :class:`AdditivePotential` -- Birkhoff sums of a locally constant site
  function on ``m`` coordinates (exactly additive).
* :class:`MatrixCocycle` -- ``f_n(x) = log ||A_{x_{n-1}} ... A_{x_0}||`` with
  the operator 2-norm (sub-additive by sub-multiplicativity).
* :class:`PerturbedPotential` -- ``base_n + c * n**beta`` with ``0 < beta < 1``,
  asymptotically sub-additive with approximating family ``base``.

All ``values`` methods take a uint8 array of words (one per row) and return
``f_n`` for every row; rows must hold at least ``n + horizon`` symbols.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mistake import MistakeFunction, eval_mistake
from .symbolic import (
    EpsilonWindow,
    ShiftSystem,
    SymbolicWord,
    BudgetExceeded,
    admissible_array,
    pack_words,
)

__all__ = [
    "AdditivePotential",
    "ApproximatingFamily",
    "Lemma21Result",
    "MatrixCocycle",
    "PerturbedPotential",
    "Potential",
    "PreconditionError",
    "SubadditivityViolation",
    "asp_defect",
    "check_subadditive",
    "continuity_epsilon",
    "continuity_window",
    "eval_potential",
    "cylinder_sup",
    "lemma21_check",
    "lemma21_sweep",
]


class PreconditionError(ValueError):
    """A finite-scale precondition does not hold.

    ``reason`` is ``"epsilon too large"`` or ``"n too small"``.
    """

    def __init__(self, reason: str, detail: str):
        super().__init__(f"{reason}: {detail}")
        self.reason = reason


class Potential:
    horizon: int = 0
    subadditive: bool = True

    def values(self, words: np.ndarray, n: int) -> np.ndarray:
        raise NotImplementedError

    def perturbation_exponents(self) -> tuple[float, ...]:
        """Exponents ``beta`` of sublinear ``n**beta`` terms (used by extrapolation)."""
        return ()

    def _check(self, words: np.ndarray, n: int) -> np.ndarray:
        words = np.asarray(words, dtype=np.uint8)
        if words.ndim == 1:
            words = words[None, :]
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        if words.shape[1] < n + self.horizon:
            raise ValueError(f"words of length {words.shape[1]} too short for n={n} (horizon {self.horizon})")
        return words


class AdditivePotential(Potential):
    """``f_n(x) = sum_{i<n} phi(x_i, ..., x_{i+m-1})``.

    ``site_values`` lists ``phi`` over all ``m``-blocks in lexicographic order
    (length ``k**m``); for ``m = 1`` it is simply one value per symbol.
    """

    subadditive = True

    def __init__(self, site_values, alphabet_size: int | None = None, m: int = 1):
        vals = np.asarray(site_values, dtype=float).ravel()
        if m < 1:
            raise ValueError("m must be >= 1")
        k = alphabet_size if alphabet_size is not None else round(len(vals) ** (1.0 / m))
        if k**m != len(vals):
            raise ValueError(f"expected {k}**{m} = {k ** m} site values, got {len(vals)}")
        if not np.isfinite(vals).all():
            raise ValueError("site values must be finite")
        self.site_values = vals
        self.site_values.setflags(write=False)
        self.alphabet_size = int(k)
        self.m = int(m)
        self.horizon = self.m - 1

    @classmethod
    def zero(cls, alphabet_size: int = 2) -> "AdditivePotential":
        return cls(np.zeros(alphabet_size), alphabet_size)

    @classmethod
    def log_weights(cls, weights) -> "AdditivePotential":
        return cls(np.log(np.asarray(weights, dtype=float)))

    def __repr__(self):
        return f"AdditivePotential(m={self.m}, site_values={self.site_values.tolist()})"

    def site(self, words: np.ndarray, i: int) -> np.ndarray:
        code = np.zeros(len(words), dtype=np.int64)
        for t in range(self.m):
            code = code * self.alphabet_size + words[:, i + t]
        return self.site_values[code]

    def values(self, words, n):
        words = self._check(words, n)
        total = np.zeros(len(words))
        for i in range(n):  # fixed left-to-right order
            total = total + self.site(words, i)
        return total


class MatrixCocycle(Potential):
    """``f_n(x) = log ||A_{x_{n-1}} ... A_{x_0}||_2``; ``-inf`` for a zero product."""

    subadditive = True
    horizon = 0

    def __init__(self, matrices):
        mats = np.asarray(matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("matrices must have shape (k, d, d)")
        if not np.isfinite(mats).all():
            raise ValueError("matrix entries must be finite")
        if (np.abs(mats).sum(axis=(1, 2)) == 0).any():
            raise ValueError("cocycle matrices must be nonzero")
        self.matrices = mats
        self.matrices.setflags(write=False)
        self.alphabet_size = mats.shape[0]
        self.dim = mats.shape[1]

    def __repr__(self):
        return f"MatrixCocycle({self.matrices.tolist()})"

    def products(self, words: np.ndarray, n: int) -> np.ndarray:
        words = self._check(words, n)
        prod = self.matrices[words[:, 0]]
        for i in range(1, n):
            prod = np.matmul(self.matrices[words[:, i]], prod)
        return prod

    def values(self, words, n):
        return log_norm(self.products(words, n))


def log_norm(products: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(products, ord=2, axis=(-2, -1))
    with np.errstate(divide="ignore"):
        return np.log(norms)


class PerturbedPotential(Potential):
    """``f_n = base_n + c * n**beta``; ASP but in general not sub-additive."""

    def __init__(self, base: Potential, c: float, beta: float):
        if not 0 < beta < 1:
            raise ValueError("perturbation exponent beta must lie in (0, 1)")
        self.base = base
        self.c = float(c)
        self.beta = float(beta)
        self.horizon = base.horizon
        # c * n**beta is concave for c > 0, so the sum stays sub-additive then
        self.subadditive = base.subadditive and self.c >= 0
        self.alphabet_size = getattr(base, "alphabet_size", None)

    def __repr__(self):
        return f"PerturbedPotential({self.base!r}, c={self.c}, beta={self.beta})"

    def values(self, words, n):
        return self.base.values(words, n) + self.c * n**self.beta

    def perturbation_exponents(self):
        return (self.beta,) + self.base.perturbation_exponents()


def eval_potential(F: Potential, system: ShiftSystem, x, n: int) -> float:
    x = system.validate(x)
    if len(x) < n + F.horizon:
        raise ValueError(f"word of length {len(x)} too short for n={n} (horizon {F.horizon})")
    return float(F.values(np.array([x.symbols], dtype=np.uint8), n)[0])


@dataclass(frozen=True)
class SubadditivityViolation:
    word: SymbolicWord
    n: int
    m: int
    gap: float


def check_subadditive(F: Potential, system: ShiftSystem, n_max: int, tol: float = 1e-12) -> list[SubadditivityViolation]:
    """All ``(x, n, m)`` with ``f_{n+m}(x) > f_n(x) + f_m(T^n x)`` beyond ``tol``.

    ``tol`` is relative to the magnitude of the terms and only absorbs
    floating-point rounding.
    """
    words = admissible_array(system, n_max + F.horizon)
    cache = {}

    def f(j, start):
        key = (j, start)
        if key not in cache:
            cache[key] = F.values(words[:, start:], j)
        return cache[key]

    out = []
    for total in range(2, n_max + 1):
        for n in range(1, total):
            m = total - n
            lhs = f(total, 0)
            rhs = f(n, 0) + f(m, n)
            with np.errstate(invalid="ignore"):
                gap = lhs - rhs
            scale = tol * (1.0 + np.abs(np.where(np.isfinite(lhs), lhs, 0.0)) + np.abs(np.where(np.isfinite(rhs), rhs, 0.0)))
            for r in np.flatnonzero(~np.isnan(gap) & (gap > scale)).tolist():
                out.append(SubadditivityViolation(SymbolicWord(tuple(words[r].tolist())), n, m, float(gap[r])))
    return out


@dataclass(frozen=True)
class ApproximatingFamily:
    """A sub-additive sequence ``phi`` approximating ``F`` at rate ``1/k``."""

    k: float
    phi: Potential

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be > 0")
        if not self.phi.subadditive or isinstance(self.phi, PerturbedPotential):
            raise ValueError("approximating family must be additive or a matrix cocycle")


def asp_defect(F: Potential, Phi: ApproximatingFamily, n: int, system: ShiftSystem | None = None) -> float:
    """``max_x |f_n(x) - phi_n(x)| / n``.

    Uses the closed form when ``F`` is ``Phi.phi`` itself or a perturbation of
    it; otherwise enumerates admissible words of ``system``.
    """
    if F is Phi.phi:
        return 0.0
    if isinstance(F, PerturbedPotential) and F.base is Phi.phi:
        return abs(F.c) * n ** (F.beta - 1.0)
    if system is None:
        raise ValueError("a system is needed to enumerate the defect")
    words = admissible_array(system, n + max(F.horizon, Phi.phi.horizon))
    diff = np.abs(F.values(words, n) - Phi.phi.values(words, n))
    return float(np.max(diff)) / n


def sup_norm(phi: Potential, system: ShiftSystem, j: int) -> float:
    words = admissible_array(system, j + phi.horizon)
    vals = phi.values(words, j)
    return float(np.max(np.abs(vals)))


def continuity_window(phi: Potential, system: ShiftSystem, l: int, eta: float) -> int:
    """Least window ``w`` such that agreeing on ``w`` symbols moves ``phi_l / l`` by < ``eta``.

    Exact for locally constant potentials; ``w = l + horizon`` always works.
    """
    span = l + phi.horizon
    words = admissible_array(system, span)
    vals = phi.values(words, l) / l
    for w in range(1, span + 1):
        prefix = words[:, :w]
        starts = np.flatnonzero(np.r_[True, (prefix[1:] != prefix[:-1]).any(axis=1)])
        hi = np.maximum.reduceat(vals, starts)
        lo = np.minimum.reduceat(vals, starts)
        with np.errstate(invalid="ignore"):
            spread = np.where(np.isfinite(hi) & np.isfinite(lo), hi - lo, np.where(hi == lo, 0.0, np.inf))
        if np.max(spread) < eta:
            return w
    return span


def continuity_epsilon(phi: Potential, system: ShiftSystem, l: int, eta: float) -> EpsilonWindow:
    """Largest canonical radius meeting the continuity precondition."""
    return EpsilonWindow.from_window(continuity_window(phi, system, l, eta))


@dataclass(frozen=True)
class Lemma21Result:
    holds: bool
    slack: float
    lhs: float
    rhs: float
    C1: float
    C2: float
    C: float
    g_value: int
    window: int

    def __bool__(self):
        return self.holds


def lemma21_constants(phi: Potential, system: ShiftSystem, l: int, eta: float) -> tuple[float, float, float]:
    """``C1 = 2(||phi_l / l|| + eta)``, ``C2 = max_{j<=2l} ||phi_j||``, ``C = max(C1, 4 C2)``."""
    c1 = 2.0 * (sup_norm(phi, system, l) / l + eta)
    c2 = max(sup_norm(phi, system, j) for j in range(1, 2 * l + 1))
    return c1, c2, max(c1, 4.0 * c2)


def cylinder_sup(F: Potential, system: ShiftSystem, n: int, w: int, max_words: int | None = None):
    """Admissible ``(n + w - 1)``-words and the sup of ``f_n`` over each cylinder.

    Separation and mistake balls at scale ``(n, w)`` only see these prefixes;
    when ``f_n`` looks further ahead the sup runs over all admissible
    extensions (finite words of an irreducible SFT always extend).
    """
    span = n + w - 1
    kw = {} if max_words is None else {"max_words": max_words}
    full = max(span, n + F.horizon)
    words = admissible_array(system, full, **kw)
    vals = F.values(words, n)
    if full == span:
        return words, vals
    prefix = words[:, :span]
    starts = np.flatnonzero(np.r_[True, (prefix[1:] != prefix[:-1]).any(axis=1)])
    return np.ascontiguousarray(prefix[starts]), np.maximum.reduceat(vals, starts)


def ball_sup_by_class(classes: np.ndarray, weights: np.ndarray, n: int, w: int, gv: int, alphabet_size: int) -> np.ndarray:
    """For each class, the max weight over its mistake ball (mismatch <= gv)."""
    from . import kernels

    if gv >= n:
        return np.full(len(classes), np.max(weights))
    if gv <= 0:
        return weights.copy()
    lists = kernels.ball_lists(pack_words(classes, alphabet_size), n, w, gv)
    if lists is None:
        raise BudgetExceeded("mistake-ball adjacency exceeds its memory budget")
    indptr, indices = lists
    return np.maximum.reduceat(weights[indices], indptr[:-1])


def _class_index(classes: np.ndarray, centres: np.ndarray, span: int) -> np.ndarray:
    lookup = {row.tobytes(): i for i, row in enumerate(classes)}
    prefixes = np.ascontiguousarray(centres[:, :span])
    return np.array([lookup[row.tobytes()] for row in prefixes], dtype=np.int64)


def lemma21_sweep(
    F: Potential,
    Phi: ApproximatingFamily,
    l: int,
    eta: float,
    n: int,
    eps,
    g: MistakeFunction,
    system: ShiftSystem,
    k: float | None = None,
    centres=None,
) -> list[tuple[SymbolicWord, Lemma21Result]]:
    """Check the mistake-ball bound on ``sup f_n`` at many centres ``x``::

        sup_{y in B_n(g;x,eps)} f_n(y)
            <= sum_{i<n} phi_l(T^i x) / l + C (g(n, eps) + 1) + n (1/k + eta)

    with ``C1 = 2(||phi_l / l|| + eta)``, ``C2 = max_{j <= 2l} ||phi_j||`` and
    ``C = max(C1, 4 C2)``. Preconditions are verified, not assumed: the
    window of ``eps`` must reach :func:`continuity_window` and
    ``asp_defect(F, Phi, n) <= 1/k``. Without ``centres`` every admissible
    word of the needed length is used.
    """
    k = Phi.k if k is None else k
    ew = EpsilonWindow.coerce(eps)
    phi = Phi.phi
    w = ew.window
    w0 = continuity_window(phi, system, l, eta)
    if w < w0:
        raise PreconditionError("epsilon too large", f"window {w} < required {w0} for l={l}, eta={eta}")
    defect = asp_defect(F, Phi, n, system)
    if defect > 1.0 / k:
        raise PreconditionError("n too small", f"asp defect {defect:.6g} > 1/k = {1.0 / k:.6g} at n={n}")
    need = max(n - 1 + l + phi.horizon, n + w - 1, n + F.horizon)
    if centres is None:
        xs = admissible_array(system, need)
    else:
        ws = [system.validate(c) for c in centres]
        if any(len(c) < need for c in ws):
            raise ValueError(f"centre words need length >= {need}")
        xs = np.array([c.symbols[:need] for c in ws], dtype=np.uint8)
    c1, c2, c = lemma21_constants(phi, system, l, eta)
    gv = eval_mistake(g, n, ew)

    birkhoff = np.zeros(len(xs))
    for i in range(n):
        birkhoff = birkhoff + phi.values(xs[:, i:], l) / l
    rhs = birkhoff + c * (gv + 1) + n * (1.0 / k + eta)

    classes, weights = cylinder_sup(F, system, n, w)
    sup = ball_sup_by_class(classes, weights, n, w, gv, system.alphabet_size)
    lhs = sup[_class_index(classes, xs, n + w - 1)]
    out = []
    for row, a, b in zip(xs.tolist(), lhs.tolist(), rhs.tolist()):
        out.append((SymbolicWord(tuple(row)), Lemma21Result(a <= b, b - a, a, b, c1, c2, c, gv, w)))
    return out


def lemma21_check(
    F: Potential,
    Phi: ApproximatingFamily,
    l: int,
    eta: float,
    x,
    n: int,
    eps,
    g: MistakeFunction,
    system: ShiftSystem,
    k: float | None = None,
) -> Lemma21Result:
    """Single-centre form of :func:`lemma21_sweep`; ``x`` is a long enough admissible word."""
    return lemma21_sweep(F, Phi, l, eta, n, eps, g, system, k=k, centres=[x])[0][1]
