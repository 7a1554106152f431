"""Markov measures, the energy functional ``F_*`` and measure-theoretic pressures."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mistake import MistakeFunction, eval_mistake
from .potentials import (
    AdditivePotential,
    MatrixCocycle,
    PerturbedPotential,
    Potential,
    ball_sup_by_class,
    cylinder_sup,
    log_norm,
)
from .pressure import _ball_lists, extrapolate, log_sum_exp
from .symbolic import BudgetExceeded, EpsilonWindow, ShiftSystem, SymbolicWord, admissible_array

log = logging.getLogger(__name__)

__all__ = [
    "MarkovMeasure",
    "MeasurePressureEstimate",
    "VariationalResult",
    "cylinder_mass",
    "cylinder_masses",
    "entropy",
    "f_star",
    "katok_exact_cover",
    "katok_mistake_pressure",
    "transfer_pressure",
    "variational_search",
]

ROW_TOL = 1e-12


def _encode(words: np.ndarray, k: int) -> np.ndarray:
    code = np.zeros(len(words), dtype=np.int64)
    for j in range(words.shape[1]):
        code = code * k + words[:, j]
    return code


class MarkovMeasure:
    """Stationary Markov measure of order ``r`` on a subshift.

    ``transition`` is indexed by the admissible ``r``-words of ``system`` in
    lexicographic order (for ``r = 1``: by symbols). The chain must have a
    single recurrent class, so its stationary vector is unique; transient
    states get mass 0.
    """

    def __init__(self, system: ShiftSystem, transition, order: int = 1):
        if order < 1:
            raise ValueError("order must be >= 1")
        block, states = system.higher_block(order)
        P = np.array(transition, dtype=float)
        S = len(states)
        if P.shape != (S, S):
            raise ValueError(f"transition must be {S}x{S} for order {order}, got shape {P.shape}")
        if not np.isfinite(P).all() or (P < 0).any():
            raise ValueError("transition entries must be finite and >= 0")
        if np.abs(P.sum(axis=1) - 1.0).max() > ROW_TOL:
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if (P[block.transitions == 0] != 0).any():
            raise ValueError("transition puts mass on a forbidden transition")
        self.system = system
        self.order = int(order)
        self.states = states
        self.transition = P
        self.stationary = _stationary(P)
        self.transition.setflags(write=False)
        self.stationary.setflags(write=False)
        k = system.alphabet_size
        self._state_of = np.full(k**order, -1, dtype=np.int64)
        self._state_of[_encode(states, k)] = np.arange(S)

    @classmethod
    def bernoulli(cls, system: ShiftSystem, p) -> "MarkovMeasure":
        p = np.asarray(p, dtype=float)
        return cls(system, np.tile(p, (len(p), 1)))

    @classmethod
    def parry(cls, system: ShiftSystem) -> "MarkovMeasure":
        """Maximal-entropy measure ``P_ab = A_ab v_b / (lambda v_a)``."""
        A = system.transitions.astype(float)
        vals, vecs = np.linalg.eig(A)
        i = int(np.argmax(vals.real))
        lam, v = vals[i].real, np.abs(vecs[:, i].real)
        P = A * v[None, :] / (lam * v[:, None])
        return cls(system, P / P.sum(axis=1, keepdims=True))

    def __repr__(self):
        return f"MarkovMeasure(order={self.order}, transition={self.transition.tolist()})"

    def state_index(self, words: np.ndarray) -> np.ndarray:
        """State of the ``r``-block starting at each row; ``-1`` if inadmissible."""
        return self._state_of[_encode(words[:, : self.order], self.system.alphabet_size)]


def _stationary(P: np.ndarray) -> np.ndarray:
    S = len(P)
    if (P == P[0]).all():  # Bernoulli: exact
        return P[0].copy()
    M = P.T - np.eye(S)
    if np.linalg.matrix_rank(M, tol=1e-10) != S - 1:
        raise ValueError("chain has more than one recurrent class; stationary vector not unique")
    A = np.vstack([M, np.ones(S)])
    b = np.zeros(S + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def entropy(mu: MarkovMeasure) -> float:
    P = mu.transition
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P), 0.0)
    return float(-math.fsum((mu.stationary[:, None] * terms).ravel().tolist()))


def cylinder_masses(mu: MarkovMeasure, words: np.ndarray) -> np.ndarray:
    """``mu([w])`` for each row; inadmissible rows get 0."""
    words = np.asarray(words, dtype=np.uint8)
    if words.ndim == 1:
        words = words[None, :]
    k, r = mu.system.alphabet_size, mu.order
    L = words.shape[1]
    if L < r:
        # marginal of the stationary law on the first L symbols
        prefix_code = _encode(mu.states[:, :L], k)
        table = np.zeros(k**L)
        np.add.at(table, prefix_code, mu.stationary)
        return table[_encode(words, k)]
    s = mu.state_index(words)
    ok = s >= 0
    mass = np.where(ok, mu.stationary[np.where(ok, s, 0)], 0.0)
    for i in range(1, L - r + 1):
        t = mu.state_index(words[:, i:])
        ok &= t >= 0
        mass = np.where(ok, mass * mu.transition[np.where(s >= 0, s, 0), np.where(t >= 0, t, 0)], 0.0)
        s = t
    return mass


def cylinder_mass(mu: MarkovMeasure, word) -> float:
    w = SymbolicWord.parse(word)
    if not mu.system.is_admissible(w):
        return 0.0
    return float(cylinder_masses(mu, np.array([w.symbols], dtype=np.uint8))[0])


def f_star(mu: MarkovMeasure, F: Potential, n_max: int = 24, max_states: int = 1 << 18) -> float:
    """``lim (1/n) E_mu[f_n]``.

    Additive potentials integrate exactly; perturbations do not change the
    limit. For cocycles ``E_mu[f_n]`` is computed exactly for ``n <= n_max``
    by propagating the distribution of (chain state, product matrix), merging
    equal pairs, and then extrapolated linearly in ``1/n``.
    """
    if isinstance(F, PerturbedPotential):
        return f_star(mu, F.base, n_max, max_states)
    if isinstance(F, AdditivePotential):
        words = admissible_array(mu.system, F.m)
        mass = cylinder_masses(mu, words)
        vals = F.values(words, 1)
        return math.fsum((mass * vals).tolist())
    if isinstance(F, MatrixCocycle):
        ns, means = cocycle_expectations(mu, F, n_max, max_states)
        return _extrapolate_energy(ns, means)
    raise TypeError(f"f_star is not available for {type(F).__name__}")


def cocycle_expectations(mu: MarkovMeasure, F: MatrixCocycle, n_max: int = 24, max_states: int = 1 << 18):
    """``(ns, E[f_n]/n)`` for ``n = 1 .. n_reached`` by exact propagation."""
    r = mu.order
    ns, means = [], []

    def record(n, prob, prods):
        vals = log_norm(prods)
        live = prob > 0
        if np.isneginf(vals[live]).any():
            means.append(-math.inf)
        else:
            means.append(math.fsum((prob[live] * vals[live]).tolist()) / n)
        ns.append(n)

    for n in range(1, min(r, n_max + 1)):
        words = admissible_array(mu.system, n)
        record(n, cylinder_masses(mu, words), F.products(words, n))
    if r > n_max:
        return ns, means
    state = np.arange(len(mu.states))
    prob = mu.stationary.copy()
    prods = F.products(mu.states, r)
    record(r, prob, prods)
    P = mu.transition
    A = F.matrices
    for n in range(r + 1, n_max + 1):
        keep = prob > 0
        state, prob, prods = state[keep], prob[keep], prods[keep]
        src, dst = np.nonzero(P)
        # expand every (state, product) along every positive transition
        pick = [np.flatnonzero(state == s) for s in range(len(P))]
        rows = np.concatenate([pick[s] for s in src])
        nxt = np.concatenate([np.full(len(pick[s]), d) for s, d in zip(src, dst)])
        pw = prob[rows] * P[state[rows], nxt]
        sym = mu.states[nxt, -1]
        new = np.matmul(A[sym], prods[rows])
        key = np.concatenate([nxt[:, None].astype(float), new.reshape(len(new), -1)], axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        if len(uniq) > max_states:
            log.info("cocycle expectation stopped at n=%d (%d states)", n - 1, len(uniq))
            break
        state = uniq[:, 0].astype(np.int64)
        prods = uniq[:, 1:].reshape(-1, *A.shape[1:])
        prob = np.bincount(inv, weights=pw, minlength=len(uniq))
        record(n, prob, prods)
    return ns, means


def _extrapolate_energy(ns, means) -> float:
    if any(np.isneginf(m) for m in means):
        return -math.inf
    # linear in 1/n through the two largest n, i.e. the last increment of E[f_n]
    return extrapolate(ns, means)[0]


@dataclass(frozen=True, eq=False)
class MeasurePressureEstimate:
    n: int
    eps: EpsilonWindow
    g: MistakeFunction
    g_value: int
    delta: float
    log_sum: float
    cover_mass: float
    size: int
    method: str = "greedy-cover"
    centres: np.ndarray | None = None

    def __post_init__(self):
        if not self.cover_mass > 1.0 - self.delta:
            raise ValueError(f"cover mass {self.cover_mass} does not exceed 1 - delta = {1.0 - self.delta}")

    @property
    def normalized(self) -> float:
        return self.log_sum / self.n

    @property
    def window(self) -> int:
        return self.eps.window


def _katok_setup(mu, system, F, g, n, eps, delta):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if mu.system != system:
        raise ValueError("measure lives on a different system")
    ew = EpsilonWindow.coerce(eps)
    classes, weights = cylinder_sup(F, system, n, ew.window)
    masses = cylinder_masses(mu, classes)
    gv = eval_mistake(g, n, ew)
    indptr, indices = _ball_lists(classes, n, ew.window, gv, system.alphabet_size)
    cost = ball_sup_by_class(classes, weights, n, ew.window, gv, system.alphabet_size)
    return ew, classes, masses, gv, indptr, indices, cost


def katok_mistake_pressure(mu: MarkovMeasure, system: ShiftSystem, F: Potential, g: MistakeFunction, n: int, eps, delta: float):
    """Upper bound on the ``(g; n, eps, delta)`` Katok-type pressure.

    Greedy weighted cover: repeatedly add the centre whose mistake ball adds
    the most uncovered mass per unit ``exp(sup_ball f_n)`` until the covered
    mass exceeds ``1 - delta``. Ties go to the lexicographically first centre.
    """
    ew, classes, masses, gv, indptr, indices, cost = _katok_setup(mu, system, F, g, n, eps, delta)
    target = 1.0 - delta
    finite = np.isfinite(cost)
    base = float(cost[finite].min()) if finite.any() else 0.0
    price = np.exp(cost - base)  # relative ball prices, inf-safe for -inf costs
    covered = np.zeros(len(classes), dtype=bool)

    def gain(i):
        members = indices[indptr[i] : indptr[i + 1]]
        fresh = members[~covered[members]]
        return math.fsum(masses[fresh].tolist()), fresh

    def ratio(m, i):
        if m <= 0:
            return 0.0
        return math.inf if price[i] == 0 else m / price[i]

    heap = []
    for i in range(len(classes)):
        m, _ = gain(i)
        heap.append((-ratio(m, i), i))
    heapq.heapify(heap)
    chosen, running = [], 0.0
    while heap:
        neg, i = heapq.heappop(heap)
        m, fresh = gain(i)
        key = (-ratio(m, i), i)
        if heap and key > heap[0]:
            heapq.heappush(heap, key)
            continue
        if m <= 0:
            break
        chosen.append(i)
        covered[fresh] = True
        running += m
        if running > target - 1e-9 and math.fsum(masses[covered].tolist()) > target:
            break
    cover = math.fsum(masses[covered].tolist())
    if not cover > target:
        raise RuntimeError(f"cover reached mass {cover} only; cannot exceed {target}")
    chosen = np.array(chosen, dtype=np.int64)
    return MeasurePressureEstimate(
        n, ew, g, gv, float(delta), log_sum_exp(cost[chosen]), cover, len(chosen), "greedy-cover", classes[np.sort(chosen)]
    )


def katok_exact_cover(
    mu: MarkovMeasure, system: ShiftSystem, F: Potential, g: MistakeFunction, n: int, eps, delta: float,
    max_candidates: int = 64, node_budget: int = 1_000_000,
) -> float:
    """Exact ``log`` of the min cover cost, by branch-and-bound (small pools only).

    Centres are tried in order of decreasing mass-per-price; a branch is cut
    once its cost reaches the incumbent or the remaining balls cannot lift the
    covered mass past ``1 - delta``.
    """
    ew, classes, masses, gv, indptr, indices, cost = _katok_setup(mu, system, F, g, n, eps, delta)
    N = len(classes)
    if N > max_candidates:
        raise BudgetExceeded(f"{N} candidates exceed the exact cover budget of {max_candidates}")
    target = 1.0 - delta
    balls = []
    for i in range(N):
        mask = 0
        for j in indices[indptr[i] : indptr[i + 1]].tolist():
            mask |= 1 << j
        balls.append(mask)
    price = np.exp(cost - np.max(cost[np.isfinite(cost)]))
    mass = masses.tolist()

    def covered_mass(mask):
        return math.fsum(mass[j] for j in range(N) if mask >> j & 1)

    order = sorted(range(N), key=lambda i: (-covered_mass(balls[i]) / max(price[i], 1e-300), i))
    best = [math.inf]
    nodes = [0]

    def dfs(pos, mask, spent):
        nodes[0] += 1
        if nodes[0] > node_budget:
            raise BudgetExceeded(f"exact cover exceeded {node_budget} nodes")
        if spent >= best[0]:
            return
        if covered_mass(mask) > target:
            best[0] = spent
            return
        if pos == N:
            return
        rest = mask
        for i in order[pos:]:
            rest |= balls[i]
        if not covered_mass(rest) > target:
            return
        i = order[pos]
        if balls[i] & ~mask:
            dfs(pos + 1, mask | balls[i], spent + price[i])
        dfs(pos + 1, mask, spent)

    dfs(0, 0, 0.0)
    return math.log(best[0]) + float(np.max(cost[np.isfinite(cost)]))


def transfer_pressure(system: ShiftSystem, phi, m: int | None = None, tol: float = 1e-12, max_iter: int = 1_000_000) -> float:
    """``log`` spectral radius of the weighted transition matrix.

    ``phi`` is an :class:`AdditivePotential` or one value per ``m``-block.
    States are the admissible ``m``-blocks, ``B_uv = exp(phi(u))`` when ``v``
    may follow ``u``. Power iteration runs on ``B + sI`` (primitive for any
    ``s > 0``) until the Collatz-Wielandt bounds agree to ``tol``.
    """
    if isinstance(phi, AdditivePotential):
        m, site = phi.m, phi.site_values
    else:
        m = 1 if m is None else int(m)
        site = np.asarray(phi, dtype=float).ravel()
    k = system.alphabet_size
    if len(site) != k**m:
        raise ValueError(f"expected {k ** m} site values for m={m}, got {len(site)}")
    block, states = system.higher_block(m)
    weights = site[_encode(states, k)]
    shift = weights.max()
    B = block.transitions * np.exp(weights - shift)[:, None]
    s = float(B.sum(axis=1).min())
    M = B + s * np.eye(len(B))
    v = np.ones(len(M))
    for _ in range(max_iter):
        u = M @ v
        q = u / v
        lo, hi = q.min(), q.max()
        v = u / u.max()
        if hi - lo <= tol * (lo - s):
            break
    else:
        log.warning("power iteration did not reach tolerance %g", tol)
    return float(math.log(0.5 * (lo + hi) - s) + shift)


class VariationalResult(NamedTuple):
    measure: MarkovMeasure
    value: float
    evaluations: int
    converged: bool


def variational_search(
    system: ShiftSystem, F: Potential, order: int = 1, budget: int = 20_000, seed: int = 0,
    n_max: int = 24, step_tol: float = 1e-9,
) -> VariationalResult:
    """Maximise ``entropy(mu) + f_star(mu, F)`` over order-``r`` Markov measures.

    Each row of the transition matrix is a softmax of free logits (the first
    admissible entry of each row is pinned to 0). Compass search: try
    ``+-step`` on each coordinate, accept any improvement, halve the step
    when none helps. Measures with ``f_star = -inf`` are skipped.
    """
    block, _ = system.higher_block(order)
    T = block.transitions.astype(bool)
    free = [(a, b) for a in range(len(T)) for b in np.flatnonzero(T[a])[1:].tolist()]
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, 0.01, size=len(free))

    def measure(th):
        logits = np.where(T, 0.0, -np.inf)
        for (a, b), t in zip(free, th):
            logits[a, b] = t
        logits -= logits.max(axis=1, keepdims=True)
        P = np.exp(logits)
        return MarkovMeasure(system, P / P.sum(axis=1, keepdims=True), order)

    evals = 0

    def value(th):
        nonlocal evals
        evals += 1
        mu = measure(th)
        e = f_star(mu, F, n_max)
        return (entropy(mu) + e if np.isfinite(e) else -math.inf), mu

    best, mu_best = value(theta)
    step = 1.0
    while step > step_tol and evals < budget:
        improved = False
        for j in range(len(free)):
            for sgn in (1.0, -1.0):
                trial = theta.copy()
                trial[j] += sgn * step
                v, mu = value(trial)
                if v > best:
                    theta, best, mu_best, improved = trial, v, mu, True
                    break
            if evals >= budget:
                break
        if not improved:
            step /= 2
    converged = step <= step_tol
    if not converged:
        log.warning("variational search stopped after %d evaluations (step %g)", evals, step)
    return VariationalResult(mu_best, float(best), evals, converged)
