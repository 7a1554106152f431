import itertools
import math

import numpy as np
import pytest

from mistake_pressure.mistake import MistakeFunction, mismatch_array
from mistake_pressure.potentials import AdditivePotential, cylinder_sup
from mistake_pressure.pressure import (
    PressureEstimate,
    best_estimate,
    convergence_series,
    extrapolate,
    log_sum_exp,
    max_weight_independent_set,
    min_weight_set_cover,
    pressure_separated_exact,
    pressure_separated_exact_search,
    pressure_separated_greedy,
    pressure_spanning_exact,
    pressure_spanning_greedy,
    prop23_check,
    prop24_check,
)
from mistake_pressure.symbolic import BudgetExceeded, EpsilonWindow, ShiftSystem, admissible_array

W1 = EpsilonWindow.from_window(1)
G0, G1, G2 = (MistakeFunction.constant(c) for c in (0, 1, 2))


def brute_separated(system, F, n, w, g):
    """Max over all subsets of classes with pairwise mismatch > g."""
    classes, weights = cylinder_sup(F, system, n, w)
    gv = g(n, EpsilonWindow.from_window(w))
    N = len(classes)
    conflict = np.array([mismatch_array(classes[i], classes, n, w) <= gv for i in range(N)])
    best = -math.inf
    for mask in range(1, 1 << N):
        idx = [i for i in range(N) if mask >> i & 1]
        if any(conflict[a, b] for a, b in itertools.combinations(idx, 2)):
            continue
        best = max(best, log_sum_exp(weights[idx]))
    return best


def brute_spanning(system, F, n, w, g):
    """Min over all covers by mistake balls of sum exp(sup over ball)."""
    classes, weights = cylinder_sup(F, system, n, w)
    gv = g(n, EpsilonWindow.from_window(w))
    N = len(classes)
    balls = [mismatch_array(classes[i], classes, n, w) <= gv for i in range(N)]
    cost = [weights[b].max() for b in balls]
    best = math.inf
    for mask in range(1, 1 << N):
        idx = [i for i in range(N) if mask >> i & 1]
        if np.logical_or.reduce([balls[i] for i in idx]).all():
            best = min(best, log_sum_exp([cost[i] for i in idx]))
    return best


def test_log_sum_exp_order_independent():
    rng = np.random.default_rng(0)
    v = rng.normal(scale=30, size=1000)
    assert log_sum_exp(v) == log_sum_exp(v[::-1]) == log_sum_exp(rng.permutation(v))
    assert log_sum_exp([-math.inf, -math.inf]) == -math.inf
    assert log_sum_exp([0.0, -math.inf]) == 0.0


def test_exact_examples(fs, gm, zero, logw):
    for n in range(1, 11):
        assert pressure_separated_exact(fs, zero, n, W1).normalized == pytest.approx(math.log(2), abs=1e-15)
        assert abs(pressure_separated_exact(fs, logw, n, W1).normalized - math.log(5)) <= 1e-12
    assert pressure_separated_exact(gm, zero, 4, W1).log_sum == pytest.approx(math.log(8), abs=1e-15)
    est = pressure_separated_exact(fs, zero, 5, EpsilonWindow.from_window(3))
    assert est.size == 2**7
    with pytest.raises(BudgetExceeded):
        pressure_separated_exact(fs, zero, 12, W1, max_words=100)


def test_greedy_examples(fs, zero, logw):
    for n in (3, 5):
        assert pressure_separated_greedy(fs, logw, n, W1, G0).log_sum == pytest.approx(
            pressure_separated_exact(fs, logw, n, W1).log_sum, rel=1e-14)
    est = pressure_separated_greedy(fs, zero, 4, W1, G1)
    assert est.size == 8
    assert est.certificate == {"pairwise_separated": True, "maximal": True}
    # the lexicographic greedy code is the even-weight code
    assert all(sum(w) % 2 == 0 for w in est.members.tolist())
    single = ShiftSystem([[1]])
    one = pressure_separated_greedy(single, AdditivePotential([0.7]), 4, W1, G1)
    assert one.size == 1 and one.log_sum == pytest.approx(4 * 0.7)


def test_exact_search_examples(fs, zero, diag):
    for n in (3, 4, 5):
        est = pressure_separated_exact_search(fs, zero, n, W1, G1)
        assert est.size == 2 ** (n - 1) and est.certificate["exhausted"]
        assert est.normalized == pytest.approx((n - 1) / n * math.log(2), abs=1e-15)
    assert pressure_separated_exact_search(fs, zero, 5, W1, G0).size == 32
    everything = MistakeFunction.constant(5)
    est = pressure_separated_exact_search(fs, diag, 5, W1, everything)
    assert est.size == 1 and est.log_sum == pytest.approx(5 * math.log(2))
    with pytest.raises(BudgetExceeded):
        pressure_separated_exact_search(fs, zero, 10, W1, G1)
    with pytest.raises(BudgetExceeded):
        pressure_separated_exact_search(fs, zero, 6, W1, G2, node_budget=3)


@pytest.mark.parametrize("n,w,c", [(2, 1, 1), (3, 1, 1), (3, 2, 1), (4, 1, 1), (4, 1, 2), (3, 1, 2)])
def test_exact_search_matches_subset_enumeration(gm, fs, logw, diag, n, w, c):
    g = MistakeFunction.constant(c)
    for system, F in ((fs, logw), (gm, diag), (gm, logw)):
        if len(admissible_array(system, n + w - 1)) > 16:
            continue
        exact = pressure_separated_exact_search(system, F, n, EpsilonWindow.from_window(w), g).log_sum
        assert exact == pytest.approx(brute_separated(system, F, n, w, g), rel=1e-13)


@pytest.mark.parametrize("n,w,c", [(2, 1, 1), (3, 1, 1), (3, 2, 1), (4, 1, 1), (4, 1, 2)])
def test_spanning_greedy_is_an_upper_bound(gm, fs, logw, n, w, c):
    g = MistakeFunction.constant(c)
    for system in (fs, gm):
        if len(admissible_array(system, n + w - 1)) > 16:
            continue
        greedy = pressure_spanning_greedy(system, logw, n, EpsilonWindow.from_window(w), g)
        assert greedy.certificate["feasible"]
        assert greedy.log_sum >= brute_spanning(system, logw, n, w, g) - 1e-12


def test_spanning_examples(fs, zero, logw):
    assert pressure_spanning_greedy(fs, logw, 4, W1, G0).log_sum == pytest.approx(
        pressure_separated_exact(fs, logw, 4, W1).log_sum, rel=1e-14)
    est = pressure_spanning_greedy(fs, logw, 4, W1, MistakeFunction.constant(4))
    assert est.size == 1 and est.log_sum == pytest.approx(4 * math.log(3))
    est = pressure_spanning_greedy(fs, zero, 3, W1, G1)
    assert est.size == 2 and est.log_sum == pytest.approx(math.log(2))
    assert [str(w) for w in est.words()] == ["000", "111"]


@pytest.mark.parametrize("n,w,c", [(2, 1, 1), (3, 1, 1), (3, 2, 1), (4, 1, 1), (4, 1, 2)])
def test_spanning_exact_matches_enumeration(gm, fs, logw, n, w, c):
    g = MistakeFunction.constant(c)
    eps = EpsilonWindow.from_window(w)
    for system in (fs, gm):
        if len(admissible_array(system, n + w - 1)) > 16:
            continue
        est = pressure_spanning_exact(system, logw, n, eps, g)
        assert est.certificate["optimal"] and est.method == "exact-spanning"
        assert est.log_sum == pytest.approx(brute_spanning(system, logw, n, w, g), abs=1e-12)
        assert est.log_sum <= pressure_spanning_greedy(system, logw, n, eps, g).log_sum + 1e-12


def test_spanning_exact_beats_greedy_on_golden_cocycle(gm, diag):
    # greedy pays 40 here; the optimum 32 ties the separated optimum
    greedy = pressure_spanning_greedy(gm, diag, 4, W1, G1)
    exact = pressure_spanning_exact(gm, diag, 4, W1, G1)
    assert math.exp(greedy.log_sum) == pytest.approx(40)
    assert math.exp(exact.log_sum) == pytest.approx(32)
    assert prop24_check(gm, diag, 4, W1, G1)


def test_set_cover_against_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(30):
        N, m = int(rng.integers(1, 9)), int(rng.integers(1, 10))
        member = rng.random((m, N)) < 0.35
        member[rng.integers(0, m, size=N), np.arange(N)] = True
        cost = rng.uniform(0.0, 1.0, size=m)
        indptr = np.concatenate([[0], np.cumsum(member.sum(axis=1))])
        indices = np.concatenate([np.flatnonzero(r) for r in member])
        best, chosen, cert = min_weight_set_cover(cost, indptr, indices, N)
        brute = min(
            math.fsum(cost[[i for i in range(m) if k >> i & 1]])
            for k in range(1, 1 << m)
            if member[[i for i in range(m) if k >> i & 1]].any(axis=0).all()
        )
        assert best == pytest.approx(brute, abs=1e-9) and cert["optimal"]
        assert member[chosen].any(axis=0).all()


def test_mwis_against_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(30):
        N = int(rng.integers(1, 13))
        w = np.sort(rng.uniform(0.1, 1.0, size=N))[::-1]
        adj = np.triu(rng.random((N, N)) < 0.35, 1)
        adj = adj | adj.T
        conf = [sum(1 << int(j) for j in np.flatnonzero(adj[i])) for i in range(N)]
        best, mask, cert = max_weight_independent_set(w, conf)
        brute = max(
            sum(w[i] for i in range(N) if m >> i & 1)
            for m in range(1 << N)
            if not any(adj[a, b] for a in range(N) for b in range(N) if m >> a & 1 and m >> b & 1)
        )
        assert best == pytest.approx(brute, rel=1e-12) and cert["optimal"]
        chosen = [i for i in range(N) if mask >> i & 1]
        assert not any(adj[a, b] for a in chosen for b in chosen)


def test_exact_search_requires_certificate():
    with pytest.raises(ValueError):
        PressureEstimate(3, W1, G1, 1, None, 0.0, "exact-search", 1, certificate=None)
    with pytest.raises(ValueError):
        PressureEstimate(3, W1, G1, 1, None, 0.0, "exact-spanning", 1, certificate={})


def test_prop23(fs, gm, zero, logw):
    for n in range(1, 7):
        assert prop23_check(fs, zero, n, W1)
        assert prop23_check(gm, logw, n, W1)
    single = ShiftSystem([[1]])
    chk = prop23_check(single, AdditivePotential([0.3]), 4, W1)
    assert chk and all(c["lhs"] == c["rhs"] for c in chk.comparisons)


def test_prop24_examples(fs, zero):
    assert prop24_check(fs, zero, 4, W1, G1)
    assert prop24_check(fs, zero, 5, W1, G2)
    zero_chain = prop24_check(fs, zero, 4, W1, MistakeFunction.zero())
    plain = prop23_check(fs, zero, 4, W1)
    # with g = 0 both chains compare the same four numbers
    a, b = zero_chain.comparisons
    c, d = plain.comparisons
    assert (a["lhs"], a["rhs"], b["lhs"], b["rhs"]) == (c["rhs"], c["lhs"], d["lhs"], d["rhs"])
    assert zero_chain.ok == plain.ok


def test_prop24_maximality_can_fail_at_finite_n(fs, logw):
    # separated optimum 81 + 24 (words 1111, 1000); any cover costs at least 81 + 36
    chk = prop24_check(fs, logw, 4, W1, G2)
    bad = [c for c in chk.comparisons if not c["holds"]]
    assert not chk and len(bad) == 1 and bad[0]["exact"]
    assert math.exp(bad[0]["lhs"]) == pytest.approx(117) and math.exp(bad[0]["rhs"]) == pytest.approx(105)


def test_prop24_advisory_fallback(fs, zero):
    chk = prop24_check(fs, zero, 6, W1, G2, node_budget=2)
    assert chk.advisory
    assert chk.ok == all(c["holds"] or not c["exact"] for c in chk.comparisons)


def test_convergence_series(fs, zero):
    s = convergence_series(fs, zero, W1, None, [4, 8, 12])
    assert s.extrapolated == pytest.approx(math.log(2), abs=1e-14)
    s = convergence_series(fs, zero, W1, G1, [6, 8, 10], method="greedy")
    assert s.normalized == pytest.approx([(n - 1) / n * math.log(2) for n in (6, 8, 10)], abs=1e-14)
    assert s.extrapolated == pytest.approx(math.log(2), abs=1e-6)
    with pytest.raises(ValueError):
        convergence_series(fs, zero, W1, None, [])
    with pytest.raises(ValueError):
        convergence_series(fs, zero, W1, None, [5, 4])


def test_auto_falls_back_to_greedy(fs, zero):
    assert best_estimate(fs, zero, 10, W1, G1).method == "greedy-separated"
    assert best_estimate(fs, zero, 4, W1, G1).method == "exact-search"
    assert best_estimate(fs, zero, 4, W1, None).method == "exact-cylinder"


def test_extrapolate_with_perturbation_term():
    ns = [8, 12, 16]
    vals = [0.5 + 2 / n + 0.7 * n**-0.5 for n in ns]
    assert extrapolate(ns, vals, (0.5,))[0] == pytest.approx(0.5, abs=1e-12)
    assert extrapolate([5], [1.5]) == (1.5, pytest.approx(math.nan, nan_ok=True))
    assert extrapolate([4, 8], [-math.inf, -math.inf])[0] == -math.inf


def test_greedy_is_deterministic_under_threads(fs, logw):
    from concurrent.futures import ThreadPoolExecutor

    def run(_):
        est = pressure_separated_greedy(fs, logw, 9, EpsilonWindow.from_window(2), G2)
        return est.log_sum, est.members.tobytes()

    with ThreadPoolExecutor(4) as pool:
        outs = list(pool.map(run, range(8)))
    assert len(set(outs)) == 1
