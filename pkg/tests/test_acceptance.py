"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Tolerances are pinned below and never loosened to make a run green.
"""

import itertools
import json
import math
import subprocess
import sys
import time
from math import comb

import numpy as np
import pytest
from conftest import ACCEPTANCE

from mistake_pressure import invariants
from mistake_pressure.measures import (
    MarkovMeasure,
    entropy,
    f_star,
    katok_mistake_pressure,
    transfer_pressure,
    variational_search,
)
from mistake_pressure.mistake import MistakeFunction
from mistake_pressure.potentials import (
    AdditivePotential,
    ApproximatingFamily,
    MatrixCocycle,
    PerturbedPotential,
    continuity_epsilon,
    lemma21_sweep,
)
from mistake_pressure.pressure import (
    convergence_series,
    extrapolate,
    pressure_separated_exact,
    pressure_separated_exact_search,
    prop24_check,
)
from mistake_pressure.symbolic import EpsilonWindow, full_shift, golden_mean_shift

LOG2, LOG3, LOG5 = math.log(2), math.log(3), math.log(5)
GOLDEN = math.log((1 + math.sqrt(5)) / 2)
W1 = EpsilonWindow.from_window(1)

TOL_EXACT = 1e-12
TOL_TRANSFER = 1e-9
TOL_VAR_VALUE = 1e-4
TOL_VAR_MEASURE = 1e-3
TOL_SFT = 0.02
TOL_CODE_EXTRAP = 1e-6
TOL_KATOK_H = 0.08
TOL_KATOK_PAIR = 0.05
TOL_COCYCLE = 0.1
TOL_VARIATIONAL_GAP = 0.05
TOL_ASP = 0.03
RUNTIME_N16 = 5.0
RUNTIME_VERIFY = 60.0


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def diag_cocycle():
    return MatrixCocycle([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])])


def test_criterion_01_entropy_oracle():
    fs, Z = full_shift(2), AdditivePotential.zero(2)
    errs = {}
    for n in (4, 8, 16):
        t0 = time.perf_counter()
        est = pressure_separated_exact(fs, Z, n, W1)
        dt = time.perf_counter() - t0
        errs[n] = abs(est.normalized - LOG2)
    ok = max(errs.values()) <= TOL_EXACT and dt < RUNTIME_N16
    record(1, ok, f"max |normalized - log 2| = {max(errs.values()):.2e}, n=16 in {dt:.3f}s")


def test_criterion_02_sft_oracle():
    gm = golden_mean_shift()
    A = gm.transitions.astype(float)
    oracle = math.log(max(abs(np.linalg.eigvals(A))))
    assert oracle == pytest.approx(GOLDEN, abs=1e-14)
    s = convergence_series(gm, AdditivePotential.zero(2), W1, None, [8, 12, 16])
    err = abs(s.extrapolated - oracle)
    record(2, err <= TOL_SFT, f"extrapolated {s.extrapolated:.6f} vs {oracle:.6f} (err {err:.2e})")


def test_criterion_03_additive_gibbs():
    fs = full_shift(2)
    F = AdditivePotential.log_weights([2.0, 3.0])
    # oracle: the weighted sum over n-words factorises as (2 + 3)^n
    exact_err = max(abs(pressure_separated_exact(fs, F, n, W1).normalized - LOG5) for n in range(1, 17))
    tp_err = abs(transfer_pressure(fs, F) - LOG5)
    res = variational_search(fs, F, order=1, seed=0)
    var_err = abs(res.value - LOG5)
    mu_err = float(np.abs(res.measure.transition - np.array([[0.4, 0.6], [0.4, 0.6]])).max())
    ok = exact_err <= TOL_EXACT and tp_err <= TOL_TRANSFER and var_err <= TOL_VAR_VALUE and mu_err <= TOL_VAR_MEASURE
    record(3, ok, f"exact {exact_err:.1e}, transfer {tp_err:.1e}, variational {var_err:.1e}, measure {mu_err:.1e}")


def test_criterion_04_code_case():
    fs, Z, g1 = full_shift(2), AdditivePotential.zero(2), MistakeFunction.constant(1)
    parts, ok = [], True
    for n in (3, 4, 5):
        est = pressure_separated_exact_search(fs, Z, n, W1, g1)
        good = (est.size == 2 ** (n - 1) and est.certificate["exhausted"]
                and abs(est.normalized - (n - 1) / n * LOG2) <= TOL_EXACT)
        ok &= good
        parts.append(f"n={n}: {est.size}")
    s = convergence_series(fs, Z, W1, g1, [8, 12, 16], method="greedy")
    sizes_ok = [e.size for e in s.estimates] == [2**7, 2**11, 2**15]
    plain = pressure_separated_exact(fs, Z, 16, W1).normalized
    err = abs(s.extrapolated - LOG2)
    ok &= sizes_ok and err <= TOL_CODE_EXTRAP and abs(s.extrapolated - plain) <= TOL_CODE_EXTRAP
    record(4, ok, f"exact sizes {', '.join(parts)}; greedy sizes ok={sizes_ok}; extrapolation err {err:.1e}")


def test_criterion_05_separated_spanning_chain():
    systems = {"full": full_shift(2), "golden": golden_mean_shift()}
    potentials = {"zero": AdditivePotential.zero(2), "logw": AdditivePotential.log_weights([2.0, 3.0]),
                  "diag": diag_cocycle()}
    failures, total = [], 0
    for (sn, S), (fn, F), c, n in itertools.product(systems.items(), potentials.items(), (0, 1, 2), (4, 5)):
        total += 1
        chk = prop24_check(S, F, n, W1, MistakeFunction.constant(c))
        if not chk:
            bad = [x["label"] for x in chk.comparisons if not x["holds"]]
            failures.append(f"{sn}/{fn}/g={c}/n={n}: {'; '.join(bad)}")
    record(5, not failures, f"{total - len(failures)}/{total} combinations hold" + (f"; failing {failures}" if failures else ""))


def test_criterion_06_mistake_ball_bound():
    fs, A = full_shift(2), diag_cocycle()
    Phi = ApproximatingFamily(10.0, A)
    worst, count, ok = math.inf, 0, True
    for l, c in itertools.product((1, 2, 4), (0, 1)):
        eps = continuity_epsilon(A, fs, l, 0.1)
        res = lemma21_sweep(A, Phi, l, 0.1, 10, eps, MistakeFunction.constant(c), fs, k=10.0)
        count += len(res)
        ok &= all(r.holds and r.slack > 0 for _, r in res)
        worst = min(worst, min(r.slack for _, r in res))
    record(6, ok, f"{count} centre checks, min slack {worst:.4f}")


def test_criterion_07_katok_independence():
    fs, Z = full_shift(2), AdditivePotential.zero(2)
    mu = MarkovMeasure.bernoulli(fs, [0.7, 0.3])
    p = 0.7
    h = -(p * math.log(p) + (1 - p) * math.log(1 - p))
    assert entropy(mu) == pytest.approx(h, abs=1e-15)
    ns = [10, 12, 14]
    ext = {}
    for d, g in itertools.product((0.25, 0.5), (MistakeFunction.zero(), MistakeFunction.constant(1))):
        vals = [katok_mistake_pressure(mu, fs, Z, g, n, W1, d).normalized for n in ns]
        ext[(d, g.label())] = extrapolate(ns, vals)[0]
    near_h = all(abs(v - h) <= TOL_KATOK_H for v in ext.values())
    spread = max(ext.values()) - min(ext.values())
    ok = near_h and spread <= TOL_KATOK_PAIR
    detail = ", ".join(f"d={d} {g}: {v:.4f}" for (d, g), v in ext.items())
    record(7, ok, f"h={h:.4f}; {detail}; within {TOL_KATOK_H} of h: {near_h}; pairwise spread {spread:.4f}")


def test_criterion_08_cocycle_pressure():
    fs, A = full_shift(2), diag_cocycle()
    est = pressure_separated_exact(fs, A, 14, W1)
    # oracle: ||A_w|| = 2^max(k, 14-k) with k ones, summed directly
    direct = math.log(sum(comb(14, k) * 2.0 ** max(k, 14 - k) for k in range(15))) / 14
    mu = MarkovMeasure.bernoulli(fs, [0.5, 0.5])
    lhs = entropy(mu) + f_star(mu, A)
    ok = (abs(est.normalized - direct) <= 1e-12 and abs(est.normalized - LOG3) <= TOL_COCYCLE
          and lhs <= est.normalized + TOL_VARIATIONAL_GAP)
    record(8, ok, f"n=14 normalized {est.normalized:.4f} (direct {direct:.4f}, log 3 = {LOG3:.4f}); "
                  f"h + F_* = {lhs:.4f}")


def test_criterion_09_asp_robustness():
    F = PerturbedPotential(AdditivePotential.zero(2), 1.0, 0.5)
    s = convergence_series(full_shift(2), F, W1, None, [8, 12, 16])
    err = abs(s.extrapolated - LOG2)
    record(9, err <= TOL_ASP, f"extrapolated {s.extrapolated:.6f} (err {err:.1e})")


def test_criterion_10_property_suites_and_verify(tmp_path):
    checks = invariants.run_all(seed=0)
    failed = [f"{c.suite}: {c.name}" for c in checks if not c.ok]
    cfg = tmp_path / "verify.json"
    cfg.write_text(json.dumps({"command": "verify"}))
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "mistake_pressure", "--config", str(cfg), "--out", str(tmp_path / "v")],
                          capture_output=True, text=True)
    dt = time.perf_counter() - t0
    ok = not failed and proc.returncode == 0 and dt < RUNTIME_VERIFY
    record(10, ok, f"{len(checks) - len(failed)}/{len(checks)} invariants hold; verify exit {proc.returncode} "
                   f"in {dt:.1f}s" + (f"; failing {failed}" if failed else ""))
