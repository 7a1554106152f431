"""Finite-scale estimators of the topological pressures.

At scale ``(n, eps)`` with window ``w`` every quantity depends on points only
through their ``(n + w - 1)``-prefix (their *class*), so the estimators work on
the admissible classes, each weighted by the sup of ``f_n`` over the class:

* ``P(n, eps)``: sum over ``(n, eps)``-separated sets; distinct classes are
  separated, so the sup is a plain sum over classes (``exact-cylinder``).
* ``P(g; n, eps)``: max-weight set of classes with pairwise mismatch count
  ``> g(n, eps)`` -- a max-weight code problem. Solved exactly by
  branch-and-bound for small pools (``exact-search``) and bounded from below
  by the sup-first greedy construction (``greedy-separated``).
* ``P*(g; n, eps)``: min cost mistake-ball cover, each ball costing
  ``exp(sup f_n)`` over the ball. Solved exactly by branch-and-bound for
  small pools (``exact-spanning``); greedy max-coverage gives a feasible
  cover, hence an upper bound (``greedy-spanning``).
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csc_array

from . import kernels
from .mistake import MistakeFunction, eval_mistake
from .potentials import Potential, ball_sup_by_class, cylinder_sup
from .symbolic import BudgetExceeded, EpsilonWindow, ShiftSystem, SymbolicWord, pack_words

log = logging.getLogger(__name__)

__all__ = [
    "ChainCheck",
    "ConvergenceSeries",
    "PressureEstimate",
    "convergence_series",
    "extrapolate",
    "log_sum_exp",
    "max_weight_independent_set",
    "min_weight_set_cover",
    "pressure_separated_exact",
    "pressure_separated_exact_search",
    "pressure_separated_greedy",
    "pressure_spanning_exact",
    "pressure_spanning_greedy",
    "prop23_check",
    "prop24_check",
]

METHODS = ("exact-cylinder", "exact-search", "greedy-separated", "exact-spanning", "greedy-spanning")
MAX_SEARCH_CANDIDATES = 512
MAX_COVER_CANDIDATES = 256
# log-sums are fsum-rounded floats; ties closer than this count as equal
ROUNDING = 1e-12
DEFAULT_NODE_BUDGET = 2_000_000
CERTIFY_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class PressureEstimate:
    n: int
    eps: EpsilonWindow
    g: MistakeFunction | None
    g_value: int | None
    delta: float | None
    log_sum: float
    method: str
    size: int
    members: np.ndarray | None = field(default=None, repr=False)
    certificate: dict | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method in ("exact-search", "exact-spanning") and not (self.certificate or {}).get("optimal"):
            raise ValueError(f"{self.method} estimates need an optimality certificate")

    @property
    def normalized(self) -> float:
        return self.log_sum / self.n

    @property
    def window(self) -> int:
        return self.eps.window

    def words(self) -> list[SymbolicWord]:
        if self.members is None:
            return []
        return [SymbolicWord(tuple(r)) for r in self.members.tolist()]


def log_sum_exp(values) -> float:
    """``log sum exp(v)``, skipping ``-inf``; order independent (uses ``fsum``)."""
    v = np.asarray(values, dtype=float).ravel()
    v = v[~np.isneginf(v)]
    if v.size == 0:
        return -math.inf
    top = float(v.max())
    return top + math.log(math.fsum(np.exp(v - top).tolist()))


def _setup(system, F, n, eps, g, max_words=None):
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    ew = EpsilonWindow.coerce(eps)
    classes, weights = cylinder_sup(F, system, n, ew.window, max_words)
    gv = None if g is None else eval_mistake(g, n, ew)
    return ew, classes, weights, gv


def pressure_separated_exact(system: ShiftSystem, F: Potential, n: int, eps, max_words=None) -> PressureEstimate:
    """``log P(T, F, n, eps)``: one sup-point per ``(n + w - 1)``-cylinder."""
    ew, classes, weights, _ = _setup(system, F, n, eps, None, max_words)
    return PressureEstimate(n, ew, None, 0, None, log_sum_exp(weights), "exact-cylinder", len(classes))


def _priority(weights: np.ndarray) -> np.ndarray:
    # largest f_n first, lexicographic among ties (classes are lex sorted)
    return np.argsort(-weights, kind="stable")


def _certify_separated(table, chosen, n, w, gv) -> dict:
    counts_ok = True
    covered = np.zeros(len(table), dtype=bool)
    for i in chosen.tolist():
        m = kernels.mismatch_counts(table[i], table, n, w)
        others = m[chosen]
        counts_ok &= bool((others[chosen != i] > gv).all())
        covered |= m <= gv
    return {"pairwise_separated": counts_ok, "maximal": bool(covered.all())}


def pressure_separated_greedy(
    system: ShiftSystem, F: Potential, n: int, eps, g: MistakeFunction, certify: bool | None = None, max_words=None
) -> PressureEstimate:
    """Lower bound on ``log P(g; T, F, n, eps)`` from a maximal separated set.

    Picks the class with the largest ``f_n``, discards its mistake ball and
    repeats. The result is pairwise ``(g; n, eps)``-separated and maximal,
    hence also ``(g; n, eps)``-spanning.
    """
    ew, classes, weights, gv = _setup(system, F, n, eps, g, max_words)
    order = _priority(weights)
    if gv <= 0:
        chosen = order
    elif gv >= n:
        chosen = order[:1]
    else:
        table = pack_words(classes, system.alphabet_size)
        chosen = kernels.greedy_separated(table, order, n, ew.window, gv)
    chosen = np.asarray(chosen, dtype=np.int64)
    if certify is None:
        certify = len(classes) <= CERTIFY_LIMIT
    cert = None
    if certify:
        cert = _certify_separated(pack_words(classes, system.alphabet_size), chosen, n, ew.window, gv)
        if not all(cert.values()):
            raise AssertionError(f"greedy separated set failed certification: {cert}")
    return PressureEstimate(
        n, ew, g, gv, None, log_sum_exp(weights[chosen]), "greedy-separated", len(chosen), classes[np.sort(chosen)], cert
    )


def _conflict_bitsets(classes, n, w, gv, alphabet_size) -> list[int]:
    table = pack_words(classes, alphabet_size)
    out = []
    for i in range(len(classes)):
        row = kernels.mismatch_counts(table[i], table, n, w) <= gv
        row[i] = False
        out.append(int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little"))
    return out


def max_weight_independent_set(weights, conflicts, node_budget: int = DEFAULT_NODE_BUDGET):
    """Exact maximum-weight independent set by branch-and-bound.

    ``weights`` must be positive and sorted in nonincreasing order (vertex 0
    heaviest); ``conflicts[v]`` is an int bitmask of the neighbours of ``v``
    (without ``v``). The bound at each node is a greedy clique partition of
    the remaining candidates: an independent set uses at most one vertex per
    clique. Returns ``(best_weight, best_mask, certificate)``.
    """
    w = [float(x) for x in weights]
    conflicts = [int(c) for c in conflicts]
    N = len(w)
    if any(b > a for a, b in zip(w, w[1:])):
        raise ValueError("weights must be sorted in nonincreasing order")

    def bound(P, limit):
        total = 0.0
        while P:
            low = P & -P
            v = low.bit_length() - 1
            clique = low
            cand = P & conflicts[v]
            while cand:
                lb = cand & -cand
                clique |= lb
                cand &= conflicts[lb.bit_length() - 1]
            total += w[v]
            if total > limit:
                return total
            P &= ~clique
        return total

    best, best_mask = 0.0, 0
    taken = 0
    for v in range(N):  # greedy incumbent
        if not taken & conflicts[v]:
            taken |= 1 << v
            best += w[v]
    best_mask = taken
    full = (1 << N) - 1
    root_bound = bound(full, math.inf)
    nodes = 0
    stack = [(full, 0.0, 0)]
    while stack:
        P, cur, chosen = stack.pop()
        nodes += 1
        if nodes > node_budget:
            raise BudgetExceeded(f"branch-and-bound exceeded {node_budget} nodes")
        if not P:
            if cur > best:
                best, best_mask = cur, chosen
            continue
        if cur + bound(P, best - cur) <= best:
            continue
        low = P & -P
        v = low.bit_length() - 1
        stack.append((P & ~low, cur, chosen))
        stack.append((P & ~low & ~conflicts[v], cur + w[v], chosen | low))
    cert = {"optimal": True, "exhausted": True, "nodes": nodes, "root_bound": root_bound, "value": best}
    return best, best_mask, cert


def pressure_separated_exact_search(
    system: ShiftSystem,
    F: Potential,
    n: int,
    eps,
    g: MistakeFunction,
    max_candidates: int = MAX_SEARCH_CANDIDATES,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> PressureEstimate:
    """Exact ``log P(g; T, F, n, eps)`` for at most ``max_candidates`` classes.

    Raises :class:`BudgetExceeded` for larger pools or when the search tree
    outgrows ``node_budget``; callers fall back to the greedy bound then.
    """
    ew, classes, weights, gv = _setup(system, F, n, eps, g)
    N = len(classes)
    if N > max_candidates:
        raise BudgetExceeded(f"{N} candidate classes exceed the exact-search budget of {max_candidates}")
    order = _priority(weights)
    live = order[np.isfinite(weights[order])]
    if live.size == 0:
        cert = {"optimal": True, "exhausted": True, "nodes": 0, "root_bound": 0.0, "value": 0.0}
        return PressureEstimate(n, ew, g, gv, None, -math.inf, "exact-search", 0, classes[:0], cert)
    if gv <= 0:
        chosen = live
        cert = {"optimal": True, "exhausted": True, "nodes": 0, "reason": "no conflicts between distinct classes"}
    else:
        top = float(weights[live[0]])
        scaled = np.exp(weights[live] - top)
        conf = _conflict_bitsets(classes[live], n, ew.window, gv, system.alphabet_size)
        _, mask, cert = max_weight_independent_set(scaled, conf, node_budget)
        chosen = live[[i for i in range(len(live)) if mask >> i & 1]]
    chosen = np.sort(np.asarray(chosen, dtype=np.int64))
    return PressureEstimate(
        n, ew, g, gv, None, log_sum_exp(weights[chosen]), "exact-search", len(chosen), classes[chosen], cert
    )


def _ball_lists(classes, n, w, gv, alphabet_size):
    N = len(classes)
    if gv <= 0:
        return np.arange(N + 1, dtype=np.int64), np.arange(N, dtype=np.int64)
    if gv >= n:
        return np.arange(0, N * N + 1, N, dtype=np.int64), np.tile(np.arange(N, dtype=np.int64), N)
    lists = kernels.ball_lists(pack_words(classes, alphabet_size), n, w, gv)
    if lists is None:
        raise BudgetExceeded("mistake-ball adjacency exceeds its memory budget")
    return lists


def pressure_spanning_greedy(system: ShiftSystem, F: Potential, n: int, eps, g: MistakeFunction) -> PressureEstimate:
    """Upper bound on ``log P*(g; T, F, n, eps)`` from a greedy mistake-ball cover.

    Each round takes the centre whose ball covers the most uncovered classes,
    breaking ties by the smaller ball cost ``exp(sup_ball f_n)`` and then
    lexicographically.
    """
    ew, classes, weights, gv = _setup(system, F, n, eps, g)
    N = len(classes)
    indptr, indices = _ball_lists(classes, n, ew.window, gv, system.alphabet_size)
    cost = ball_sup_by_class(classes, weights, n, ew.window, gv, system.alphabet_size)
    sizes = np.diff(indptr)
    covered = np.zeros(N, dtype=bool)
    heap = [(-int(sizes[i]), float(cost[i]), i) for i in range(N)]
    heapq.heapify(heap)
    chosen = []
    left = N
    while left:
        neg, c, i = heapq.heappop(heap)
        members = indices[indptr[i] : indptr[i + 1]]
        fresh = int(np.count_nonzero(~covered[members]))
        key = (-fresh, c, i)
        if heap and key > heap[0]:
            heapq.heappush(heap, key)
            continue
        chosen.append(i)
        covered[members] = True
        left -= fresh
    chosen = np.array(chosen, dtype=np.int64)
    cert = {"feasible": bool(covered.all()), "centres_in_pick_order": chosen.tolist() if N <= CERTIFY_LIMIT else None}
    return PressureEstimate(
        n, ew, g, gv, None, log_sum_exp(cost[chosen]), "greedy-spanning", len(chosen), classes[np.sort(chosen)], cert
    )


def min_weight_set_cover(costs, indptr, indices, n_elements: int, node_limit: int = DEFAULT_NODE_BUDGET):
    """Exact minimum-cost set cover as a 0/1 integer program (HiGHS via scipy).

    Set ``s`` covers ``indices[indptr[s]:indptr[s + 1]]`` at cost
    ``costs[s] >= 0``. The returned cover is re-verified here; optimality rests
    on the solver closing the gap to zero (its dual bound is recorded).
    Returns ``(best_cost, chosen, certificate)``.
    """
    c = np.asarray(costs, dtype=float)
    if (c < 0).any() or not np.isfinite(c).all():
        raise ValueError("costs must be finite and nonnegative")
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    m = len(c)
    # column s of A marks the elements covered by set s
    A = csc_array((np.ones(len(indices)), indices, indptr), shape=(n_elements, m))
    res = milp(
        c,
        constraints=LinearConstraint(A, lb=1),
        integrality=np.ones(m),
        bounds=Bounds(0, 1),
        options={"mip_rel_gap": 0.0, "node_limit": node_limit},
    )
    if res.status != 0 or res.x is None:
        raise BudgetExceeded(f"set-cover solve did not prove optimality: {res.message}")
    chosen = np.flatnonzero(res.x > 0.5)
    covered = np.zeros(n_elements, dtype=bool)
    for s in chosen.tolist():
        covered[indices[indptr[s] : indptr[s + 1]]] = True
    if not covered.all():
        raise RuntimeError("solver returned an infeasible cover")
    best = math.fsum(c[chosen].tolist())
    cert = {
        "optimal": True,
        "solver": "highs",
        "dual_bound": float(res.mip_dual_bound),
        "gap": float(res.mip_gap),
        "nodes": int(res.mip_node_count),
        "value": best,
    }
    return best, chosen, cert


def pressure_spanning_exact(
    system: ShiftSystem,
    F: Potential,
    n: int,
    eps,
    g: MistakeFunction,
    max_candidates: int = MAX_COVER_CANDIDATES,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> PressureEstimate:
    """Exact ``log P*(g; T, F, n, eps)`` for at most ``max_candidates`` classes.

    Centres range over all points, but a ball and its cost depend on the centre
    only through its class, so the classes are the candidate centres. Raises
    :class:`BudgetExceeded` for larger pools or when the search tree outgrows
    ``node_budget`` solver nodes.
    """
    ew, classes, weights, gv = _setup(system, F, n, eps, g)
    N = len(classes)
    if N > max_candidates:
        raise BudgetExceeded(f"{N} candidate classes exceed the exact-cover budget of {max_candidates}")
    indptr, indices = _ball_lists(classes, n, ew.window, gv, system.alphabet_size)
    cost = ball_sup_by_class(classes, weights, n, ew.window, gv, system.alphabet_size)
    finite = np.isfinite(cost)
    top = float(cost[finite].max()) if finite.any() else 0.0
    scaled = np.where(finite, np.exp(np.where(finite, cost, top) - top), 0.0)
    # mistake balls are symmetric, so ball i also lists the centres covering i
    _, chosen, cert = min_weight_set_cover(scaled, indptr, indices, N, node_budget)
    return PressureEstimate(
        n, ew, g, gv, None, log_sum_exp(cost[chosen]), "exact-spanning", len(chosen), classes[chosen], cert
    )


@dataclass
class ChainCheck:
    """Outcome of an inequality chain; truthy iff every strict comparison held."""

    name: str
    ok: bool
    comparisons: list[dict]
    advisory: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _leq(a: float, b: float) -> bool:
    return a <= b + ROUNDING * max(1.0, abs(b))


def _spanning(system, F, n, ew, g, advisory, search_kw):
    try:
        return pressure_spanning_exact(system, F, n, ew, g, **search_kw).log_sum, True
    except BudgetExceeded as exc:
        advisory.append(f"exact cover unavailable for w={ew.window} {g.label()}: {exc}; using greedy upper bound")
        return pressure_spanning_greedy(system, F, n, ew, g).log_sum, False


def _separated(system, F, n, ew, g, advisory, search_kw):
    try:
        return pressure_separated_exact_search(system, F, n, ew, g, **search_kw).log_sum, True
    except BudgetExceeded as exc:
        advisory.append(f"exact search unavailable for {g.label()}: {exc}; using greedy lower bound")
        return pressure_separated_greedy(system, F, n, ew, g).log_sum, False


def _chain(name, comps, advisory) -> ChainCheck:
    ok = True
    for c in comps:
        if not c["holds"]:
            if c["exact"]:
                ok = False
            else:
                advisory.append(f"advisory: {c['label']} not confirmed ({c['lhs']:.6g} vs {c['rhs']:.6g})")
    return ChainCheck(name, ok, comps, advisory)


def prop23_check(system: ShiftSystem, F: Potential, n: int, eps) -> ChainCheck:
    """Separated versus spanning pressure at one ``(n, eps)``.

    * injection: spanning at ``eps/2`` >= separated at ``eps``
    * maximality: spanning at ``eps`` <= separated at ``eps``

    Without mistakes every ball is a single class, so both optima are plain
    sums and the check is always exact.
    """
    ew = EpsilonWindow.coerce(eps)
    zero = MistakeFunction.zero()
    sep = pressure_separated_exact(system, F, n, ew).log_sum
    span_half = pressure_spanning_greedy(system, F, n, ew.halved(), zero).log_sum
    span = pressure_spanning_greedy(system, F, n, ew, zero).log_sum
    comps = [
        {"label": "spanning(eps/2) >= separated(eps)", "lhs": span_half, "rhs": sep,
         "holds": _leq(sep, span_half), "exact": True},
        {"label": "spanning(eps) <= separated(eps)", "lhs": span, "rhs": sep, "holds": _leq(span, sep), "exact": True},
    ]
    return _chain(f"prop23 n={n} w={ew.window}", comps, [])


def prop24_check(system: ShiftSystem, F: Potential, n: int, eps, g: MistakeFunction, **search_kw) -> ChainCheck:
    """Separated versus spanning mistake pressure at one ``(n, eps)``.

    * injection: separated optimum for ``2g`` at ``eps`` <= spanning optimum for ``g`` at ``eps/2``
    * maximality: spanning optimum for ``g`` at ``eps`` <= separated optimum for ``g`` at ``eps``

    Both sides are exact optima. When a solve is over budget the greedy bound
    stands in and a failing comparison is reported as advisory only.
    ``search_kw`` (``max_candidates``, ``node_budget``) go to both solvers.
    """
    ew = EpsilonWindow.coerce(eps)
    advisory = []
    sep2, exact2 = _separated(system, F, n, ew, g.scaled(2), advisory, search_kw)
    sep1, exact1 = _separated(system, F, n, ew, g, advisory, search_kw)
    span_half, exact_h = _spanning(system, F, n, ew.halved(), g, advisory, search_kw)
    span, exact_s = _spanning(system, F, n, ew, g, advisory, search_kw)
    comps = [
        {"label": "separated(2g, eps) <= spanning(g, eps/2)", "lhs": sep2, "rhs": span_half,
         "holds": _leq(sep2, span_half), "exact": exact2 and exact_h},
        {"label": "spanning(g, eps) <= separated(g, eps)", "lhs": span, "rhs": sep1,
         "holds": _leq(span, sep1), "exact": exact1 and exact_s},
    ]
    return _chain(f"prop24 n={n} w={ew.window} g={g.label()}", comps, advisory)


def extrapolate(ns, values, exponents=()) -> tuple[float, float]:
    """Fit ``v(n) = P + a/n (+ sum_j b_j n**(beta_j - 1))`` through the largest ``n``.

    Uses as many of the largest ``n`` as there are basis terms (two without
    perturbation exponents), least squares on those points. Returns
    ``(P, a)``; ``a`` is ``nan`` when only one finite point exists.
    """
    pts = [(float(n), float(v)) for n, v in zip(ns, values) if np.isfinite(v)]
    if not pts:
        return -math.inf, math.nan
    pts.sort()
    powers = [0.0, -1.0] + sorted({b - 1.0 for b in exponents} - {0.0, -1.0})
    p = min(len(powers), len(pts))
    use = pts[-p:]
    A = np.array([[n**e for e in powers[:p]] for n, _ in use])
    y = np.array([v for _, v in use])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(coef[1]) if p > 1 else math.nan


@dataclass(frozen=True)
class ConvergenceSeries:
    estimates: tuple
    extrapolated: float
    slope: float

    @property
    def ns(self) -> list[int]:
        return [e.n for e in self.estimates]

    @property
    def normalized(self) -> list[float]:
        return [e.normalized for e in self.estimates]


def best_estimate(system, F, n, eps, g: MistakeFunction | None, method: str = "auto") -> PressureEstimate:
    """Dispatch for one grid point: exact when available, greedy otherwise."""
    if g is None or g.is_zero:
        if method in ("auto", "exact", "exact-cylinder"):
            return pressure_separated_exact(system, F, n, eps)
    if method in ("greedy", "greedy-separated"):
        return pressure_separated_greedy(system, F, n, eps, g or MistakeFunction.zero())
    if method == "greedy-spanning":
        return pressure_spanning_greedy(system, F, n, eps, g or MistakeFunction.zero())
    if method in ("auto", "exact", "exact-search"):
        try:
            return pressure_separated_exact_search(system, F, n, eps, g or MistakeFunction.zero())
        except BudgetExceeded as exc:
            if method != "auto":
                raise
            log.info("n=%d: %s; falling back to greedy", n, exc)
            return pressure_separated_greedy(system, F, n, eps, g)
    raise ValueError(f"unknown method {method!r}")


def convergence_series(system, F: Potential, eps, g: MistakeFunction | None, n_list, method: str = "auto") -> ConvergenceSeries:
    """Estimates at increasing ``n`` and their extrapolation in ``1/n``.

    The fit also carries an ``n**(beta - 1)`` term for every sublinear
    perturbation ``c n**beta`` of ``F``, whose contribution to ``(1/n) log P``
    decays at exactly that rate.
    """
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list must not be empty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    ests = tuple(best_estimate(system, F, n, eps, g, method) for n in n_list)
    p, a = extrapolate(n_list, [e.normalized for e in ests], F.perturbation_exponents())
    return ConvergenceSeries(ests, p, a)
