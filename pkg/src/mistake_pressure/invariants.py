"""Randomised property suites, shared by the test-suite and ``verify``.

Each suite returns a list of :class:`Check`; inputs are drawn from
``numpy.random.default_rng(seed)`` so every run is reproducible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .measures import (
    MarkovMeasure,
    cylinder_masses,
    entropy,
    f_star,
    katok_mistake_pressure,
    transfer_pressure,
    variational_search,
)
from .mistake import (
    MistakeFunction,
    are_g_separated,
    brute_force_ball_and_separation,
    eval_mistake,
    in_mistake_ball,
    mismatch_profile,
)
from .potentials import (
    AdditivePotential,
    ApproximatingFamily,
    MatrixCocycle,
    PerturbedPotential,
    PreconditionError,
    asp_defect,
    continuity_epsilon,
    lemma21_constants,
    lemma21_sweep,
)
from .pressure import (
    convergence_series,
    pressure_separated_exact,
    pressure_separated_exact_search,
    pressure_separated_greedy,
    pressure_spanning_exact,
    pressure_spanning_greedy,
)
from .symbolic import (
    EpsilonWindow,
    admissible_array,
    bowen_distance,
    full_shift,
    golden_mean_shift,
    orbit_distance_exceeds,
)

__all__ = ["Check", "run_all", "SUITES"]


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    ok: bool
    detail: str = ""

    def __bool__(self):
        return self.ok


def _words(system, length):
    return [tuple(r) for r in admissible_array(system, length).tolist()]


def _mistake_functions():
    return [
        MistakeFunction.zero(),
        MistakeFunction.constant(1),
        MistakeFunction.constant(2),
        MistakeFunction.logarithmic(1),
        MistakeFunction.power(1, 0.5),
    ]


def symbolic_suite(rng: np.random.Generator) -> list[Check]:
    out = []
    fs, gm = full_shift(2), golden_mean_shift()
    words = admissible_array(fs, 8)
    pairs = rng.integers(0, len(words), size=(200, 2))
    mono = sym = True
    for a, b in pairs.tolist():
        x, y = tuple(words[a]), tuple(words[b])
        d = [bowen_distance(x, y, n) for n in range(1, 8)]
        mono &= all(p <= q for p, q in zip(d, d[1:]))
        i = int(rng.integers(0, 6))
        sym &= orbit_distance_exceeds(x, y, i, 0.375) == orbit_distance_exceeds(y, x, i, 0.375)
    out.append(Check("symbolic", "bowen distance monotone in n", mono))
    out.append(Check("symbolic", "orbit_distance_exceeds symmetric", sym))

    equiv = True
    for n in range(1, 7):
        for w in (1, 2, 3):
            eps = EpsilonWindow.from_window(w)
            span = n + w - 1
            ws = admissible_array(fs, span + 1)  # one extra symbol past the window
            for x, y in itertools.combinations(ws.tolist(), 2):
                sep = bowen_distance(tuple(x), tuple(y), n) > eps.epsilon
                equiv &= sep == (x[:span] != y[:span])
    out.append(Check("symbolic", "separation iff window-cylinders differ (n<=6, w<=3)", equiv))

    prefix = True
    for system in (fs, gm):
        for n in range(1, 9):
            longer = {w[:n] for w in _words(system, n + 1)}
            prefix &= longer <= set(_words(system, n))
    out.append(Check("symbolic", "admissible prefixes nest", prefix))
    return out


def mistake_suite(rng: np.random.Generator) -> list[Check]:
    out = []
    fs = full_shift(2)
    gs = _mistake_functions()
    brute = True
    for n in range(1, 7):
        for w in (1, 2):
            if n + w - 1 > 6:
                continue
            eps = EpsilonWindow.from_window(w)
            ws = _words(fs, n + w - 1)
            g = gs[int(rng.integers(0, len(gs)))]
            for x, y in itertools.product(ws, ws):
                ball, sep = brute_force_ball_and_separation(x, y, n, eps, g)
                brute &= ball == in_mistake_ball(x, y, n, eps, g)
                brute &= sep == are_g_separated(x, y, n, eps, g)
    out.append(Check("mistake", "mismatch counts agree with index-set enumeration (n<=6)", brute))

    nest = bowen = excl = True
    ws = admissible_array(fs, 10)
    for _ in range(300):
        a, b = rng.integers(0, len(ws), size=2)
        x, y = tuple(ws[a]), tuple(ws[b])
        n = int(rng.integers(1, 9))
        eps = EpsilonWindow.from_window(int(rng.integers(1, 11 - n)))
        g1, g2 = sorted(rng.integers(0, 4, size=2).tolist())
        G1, G2 = MistakeFunction.constant(g1), MistakeFunction.constant(g2)
        nest &= (not in_mistake_ball(x, y, n, eps, G1)) or in_mistake_ball(x, y, n, eps, G2)
        nest &= (not are_g_separated(x, y, n, eps, G2)) or are_g_separated(x, y, n, eps, G1)
        in_bowen = mismatch_profile(x, y, n, eps).mismatch_count == 0
        bowen &= (not in_bowen) or in_mistake_ball(x, y, n, eps, G2)
        excl &= not (are_g_separated(x, y, n, eps, G1) and in_mistake_ball(x, y, n, eps, G1))
    out.append(Check("mistake", "balls nest and separation reverses with g", nest))
    out.append(Check("mistake", "Bowen ball inside every mistake ball", bowen))
    out.append(Check("mistake", "separated points are outside the mistake ball", excl))

    mono = clamp = sub = True
    for g in gs + [MistakeFunction.power(2, 0.7, epsilon0=0.25), MistakeFunction.logarithmic(3, epsilon0=0.1)]:
        vals = [eval_mistake(g, n, 0.05) for n in range(1, 300)]
        mono &= all(p <= q for p, q in zip(vals, vals[1:]))
        for eps in rng.uniform(g.epsilon0, 1.0, size=5) if g.epsilon0 < 1 else ():
            clamp &= all(eval_mistake(g, n, eps) == eval_mistake(g, n, g.epsilon0) for n in (1, 7, 50))
        sub &= g.is_sublinear()
    out.append(Check("mistake", "eval_mistake monotone in n", mono))
    out.append(Check("mistake", "clamp above epsilon0", clamp))
    out.append(Check("mistake", "sampled sublinearity", sub))
    return out


def _random_additive(rng, k=2, m=1):
    return AdditivePotential(rng.normal(0.0, 1.0, size=k**m), k, m)


def _random_cocycle(rng, k=2, d=2):
    return MatrixCocycle(rng.uniform(0.1, 2.0, size=(k, d, d)))


def potentials_suite(rng: np.random.Generator) -> list[Check]:
    out = []
    fs, gm = full_shift(2), golden_mean_shift()
    add = True
    for system in (fs, gm):
        for m in (1, 2):
            F = _random_additive(rng, 2, m)
            words = admissible_array(system, 12 + F.horizon)
            for n in range(1, 11):
                for j in range(1, 12 - n):
                    gap = F.values(words, n + j) - F.values(words, n) - F.values(words[:, n:], j)
                    add &= bool(np.max(np.abs(gap)) <= 1e-12 * (1 + n + j))
    out.append(Check("potentials", "additive: f_{n+m} = f_n + f_m o T^n", add, "rounding-level tolerance"))

    chain = True
    worst = math.inf
    for A in (MatrixCocycle([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])]), _random_cocycle(rng)):
        for system in (fs, gm):
            words = admissible_array(system, 12 + 4)
            lhs = [A.values(words, n) for n in range(1, 13)]
            for l in (1, 2, 3, 4):
                _, c2, _ = lemma21_constants(A, system, l, 0.1)
                birkhoff = np.cumsum([A.values(words[:, i:], l) / l for i in range(12)], axis=0)
                for n in range(1, 13):
                    slack = float(np.min(4 * c2 + birkhoff[n - 1] - lhs[n - 1]))
                    worst = min(worst, slack)
                    chain &= slack >= 0
    out.append(Check("potentials", "cocycle chain bound (n<=12, l<=4)", chain, f"min slack {worst:.4g}"))

    rate = True
    base = AdditivePotential.zero(2)
    for c, beta in ((1.0, 0.5), (-0.7, 0.3), (2.0, 0.9)):
        F = PerturbedPotential(base, c, beta)
        Phi = ApproximatingFamily(1.0, base)
        for n in (1, 4, 9):
            exact = asp_defect(F, Phi, n)
            enum = asp_defect(F, ApproximatingFamily(1.0, AdditivePotential.zero(2)), n, fs)
            rate &= math.isclose(exact, abs(c) * n ** (beta - 1)) and math.isclose(exact, enum, rel_tol=1e-12)
    out.append(Check("potentials", "perturbation defect decays at rate |c| n^(beta-1)", rate))

    lemma = True
    detail = []
    for phi in (MatrixCocycle([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])]), _random_cocycle(rng)):
        Phi = ApproximatingFamily(10.0, phi)
        for l in (1, 2):
            eps = continuity_epsilon(phi, fs, l, 0.1)
            for g in (MistakeFunction.zero(), MistakeFunction.constant(1)):
                try:
                    res = lemma21_sweep(phi, Phi, l, 0.1, 8, eps, g, fs)
                except PreconditionError as exc:
                    detail.append(str(exc))
                    continue
                lemma &= all(r.holds for _, r in res)
    out.append(Check("potentials", "mistake-ball sup bound holds under its preconditions", lemma, "; ".join(detail)))
    return out


def pressure_suite(rng: np.random.Generator) -> list[Check]:
    out = []
    systems = (full_shift(2), golden_mean_shift())
    order = feasible = det = mono = cover = True
    for system in systems:
        for F in (AdditivePotential.zero(2), _random_additive(rng), _random_cocycle(rng)):
            for n in (3, 4, 5):
                for w in (1, 2):
                    eps = EpsilonWindow.from_window(w)
                    cyl = pressure_separated_exact(system, F, n, eps).log_sum
                    prev = math.inf
                    for c in (0, 1, 2, 3):
                        g = MistakeFunction.constant(c)
                        ex = pressure_separated_exact_search(system, F, n, eps, g)
                        gr = pressure_separated_greedy(system, F, n, eps, g)
                        tol = 1e-12 * (1 + abs(cyl))
                        order &= gr.log_sum <= ex.log_sum + tol and ex.log_sum <= cyl + tol
                        mono &= ex.log_sum <= prev + tol
                        prev = ex.log_sum
                        sp = pressure_spanning_greedy(system, F, n, eps, g)
                        feasible &= bool(sp.certificate["feasible"])
                        cover &= pressure_spanning_exact(system, F, n, eps, g).log_sum <= sp.log_sum + tol
                        again = pressure_separated_greedy(system, F, n, eps, g)
                        det &= np.array_equal(again.members, gr.members) and again.log_sum == gr.log_sum
    out.append(Check("pressure", "greedy <= exact-search <= exact-cylinder", order))
    out.append(Check("pressure", "exact-search nonincreasing in g", mono))
    out.append(Check("pressure", "greedy spanning covers every class", feasible))
    out.append(Check("pressure", "exact spanning <= greedy spanning", cover))
    out.append(Check("pressure", "estimators are deterministic", det))
    return out


def _random_markov(rng, system):
    T = system.transitions.astype(bool)
    P = np.where(T, rng.uniform(0.05, 1.0, size=T.shape), 0.0)
    return MarkovMeasure(system, P / P.sum(axis=1, keepdims=True))


def measures_suite(rng: np.random.Generator) -> list[Check]:
    out = []
    fs, gm = full_shift(2), golden_mean_shift()
    total = True
    for system in (fs, gm, full_shift(3)):
        mu = _random_markov(rng, system)
        for L in range(1, 9):
            total &= bool(abs(cylinder_masses(mu, admissible_array(system, L)).sum() - 1.0) <= 1e-10)
    out.append(Check("measures", "cylinder masses sum to 1", total))

    delta_mono = g_mono = True
    Z = AdditivePotential.zero(2)
    for system in (fs, gm):
        mu = _random_markov(rng, system)
        for n in (4, 6):
            vals = [katok_mistake_pressure(mu, system, Z, MistakeFunction.zero(), n, 0.75, d).log_sum for d in (0.1, 0.3, 0.6)]
            delta_mono &= all(a >= b for a, b in zip(vals, vals[1:]))
            byg = [katok_mistake_pressure(mu, system, Z, MistakeFunction.constant(c), n, 0.75, 0.3).log_sum for c in (0, 1, 2)]
            g_mono &= all(a >= b for a, b in zip(byg, byg[1:]))
    out.append(Check("measures", "katok pressure nonincreasing in delta", delta_mono))
    out.append(Check("measures", "katok pressure nonincreasing in g (F = 0)", g_mono))

    var = True
    worst = -math.inf
    for system in (fs, gm):
        for F in (Z, _random_additive(rng), MatrixCocycle([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])])):
            series = convergence_series(system, F, 0.75, None, [10, 12])
            for _ in range(3):
                mu = _random_markov(rng, system)
                e = f_star(mu, F, n_max=12)
                if not np.isfinite(e):
                    continue
                gap = entropy(mu) + e - series.extrapolated
                worst = max(worst, gap)
                var &= gap <= 0.05
    out.append(Check("measures", "entropy + energy <= extrapolated pressure", var, f"max gap {worst:.4g}"))

    tv = True
    for system in (fs, gm):
        phi = _random_additive(rng)
        res = variational_search(system, phi, budget=5000)
        tv &= abs(res.value - transfer_pressure(system, phi)) <= 1e-4
    out.append(Check("measures", "transfer pressure equals variational value", tv))
    return out


SUITES = {
    "symbolic": symbolic_suite,
    "mistake": mistake_suite,
    "potentials": potentials_suite,
    "pressure": pressure_suite,
    "measures": measures_suite,
}


def run_all(seed: int = 0, suites=None) -> list[Check]:
    out = []
    for i, name in enumerate(suites or SUITES):
        out.extend(SUITES[name](np.random.default_rng([seed, i])))
    return out
