"""Batch experiment runner.

Usage::

    mistake-pressure --config experiment.json --out results/ [--threads K] [--seed S]

The config is a JSON document (``schema_version`` 1). Outputs are
``results.csv`` (one row per grid point) and ``summary.json``.
Exit codes: 0 success, 1 invalid config, 2 failed check, 3 every grid point
over budget.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .invariants import run_all
from .measures import (
    MarkovMeasure,
    entropy,
    f_star,
    katok_mistake_pressure,
    transfer_pressure,
    variational_search,
)
from .mistake import KINDS, MistakeFunction
from .potentials import (
    AdditivePotential,
    ApproximatingFamily,
    MatrixCocycle,
    PerturbedPotential,
    PreconditionError,
    continuity_epsilon,
    lemma21_sweep,
)
from .pressure import best_estimate, extrapolate, prop23_check, prop24_check
from .symbolic import BudgetExceeded, EpsilonWindow, ShiftSystem

log = logging.getLogger("mistake_pressure")

SCHEMA_VERSION = 1
COMMANDS = ("pressure", "mistake-pressure", "katok", "variational", "verify")
CSV_COLUMNS = (
    "command", "n", "window", "g_kind", "g_value_at_n", "delta", "method", "log_sum", "normalized", "runtime_ms",
)
EXIT_OK, EXIT_INVALID, EXIT_CHECK, EXIT_BUDGET = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    command: str
    system: ShiftSystem
    potential: object
    mistake: MistakeFunction
    n_list: list[int]
    windows: list[int]
    deltas: list[float]
    measure: MarkovMeasure | None = None
    method: str = "auto"
    order: int = 1
    budget: int = 20_000
    seed: int = 0
    output: str = "results"
    raw: dict = field(default_factory=dict)


def _require(cond, name, message):
    if not cond:
        raise ConfigError(name, message)


def _int_list(value, name, minimum):
    _require(isinstance(value, list) and value, name, "must be a non-empty list")
    for i, v in enumerate(value):
        _require(isinstance(v, int) and not isinstance(v, bool), f"{name}[{i}]", "must be an integer")
        _require(v >= minimum, f"{name}[{i}]", f"must be >= {minimum}")
    return list(value)


def _parse_system(spec, name="system") -> ShiftSystem:
    spec = spec or {}
    _require(isinstance(spec, dict), name, "must be an object")
    k = spec.get("alphabet_size", 2)
    _require(isinstance(k, int) and k >= 1, f"{name}.alphabet_size", "must be a positive integer")
    forbidden = spec.get("forbidden", [])
    _require(isinstance(forbidden, list), f"{name}.forbidden", "must be a list of [a, b] pairs")
    for i, pair in enumerate(forbidden):
        _require(
            isinstance(pair, list) and len(pair) == 2 and all(isinstance(s, int) and 0 <= s < k for s in pair),
            f"{name}.forbidden[{i}]", f"must be a pair of symbols in [0, {k})",
        )
    try:
        return ShiftSystem.from_forbidden(k, [tuple(p) for p in forbidden], name=spec.get("name"))
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def _parse_potential(spec, k, name="potential"):
    spec = spec or {"kind": "zero"}
    _require(isinstance(spec, dict), name, "must be an object")
    kind = spec.get("kind", "zero")
    try:
        if kind == "zero":
            return AdditivePotential.zero(k)
        if kind == "additive":
            m = spec.get("m", 1)
            _require(isinstance(m, int) and m >= 1, f"{name}.m", "must be a positive integer")
            vals = spec.get("values")
            _require(isinstance(vals, list) and len(vals) == k**m, f"{name}.values", f"must list {k ** m} numbers")
            return AdditivePotential(vals, k, m)
        if kind == "cocycle":
            mats = spec.get("matrices")
            _require(isinstance(mats, list) and len(mats) == k, f"{name}.matrices", f"must list {k} matrices")
            arr = np.asarray(mats, dtype=float)
            _require(arr.ndim == 3 and arr.shape[1] == arr.shape[2], f"{name}.matrices", "matrices must be square and equal-sized")
            return MatrixCocycle(arr)
        if kind == "perturbed":
            base = _parse_potential(spec.get("base"), k, f"{name}.base")
            return PerturbedPotential(base, float(spec.get("c", 1.0)), float(spec.get("beta", 0.5)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(name, str(exc)) from None
    raise ConfigError(f"{name}.kind", f"unknown potential kind {kind!r}")


def _parse_mistake(spec, name="mistake") -> MistakeFunction:
    spec = spec or {"kind": "zero"}
    _require(isinstance(spec, dict), name, "must be an object")
    kind = spec.get("kind", "zero")
    _require(kind in KINDS, f"{name}.kind", f"must be one of {', '.join(KINDS)}")
    try:
        return MistakeFunction(
            kind, float(spec.get("c", 0.0)), float(spec.get("alpha", 0.5)), float(spec.get("epsilon0", 1.0))
        )
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def _parse_measure(spec, system, name="measure"):
    if spec is None:
        return None
    _require(isinstance(spec, dict), name, "must be an object")
    kind = spec.get("kind", "markov")
    try:
        if kind == "bernoulli":
            p = spec.get("p")
            _require(isinstance(p, list) and len(p) == system.alphabet_size, f"{name}.p",
                     f"must list {system.alphabet_size} probabilities")
            return MarkovMeasure.bernoulli(system, p)
        if kind == "parry":
            return MarkovMeasure.parry(system)
        if kind == "markov":
            return MarkovMeasure(system, spec.get("transition"), spec.get("order", 1))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(name, str(exc)) from None
    raise ConfigError(f"{name}.kind", f"unknown measure kind {kind!r}")


def parse_config(raw: dict) -> ExperimentConfig:
    _require(isinstance(raw, dict), "config", "must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, "schema_version", f"unsupported version {version!r}; expected {SCHEMA_VERSION}")
    command = raw.get("command")
    _require(command in COMMANDS, "command", f"must be one of {', '.join(COMMANDS)}")
    system = _parse_system(raw.get("system"))
    potential = _parse_potential(raw.get("potential"), system.alphabet_size)
    mistake = _parse_mistake(raw.get("mistake"))
    grid = raw.get("grid", {})
    _require(isinstance(grid, dict), "grid", "must be an object")
    default_ns = [4, 5] if command == "verify" else [4, 8, 12]
    n_list = _int_list(grid.get("n_list", default_ns), "grid.n_list", 1)
    for i in range(1, len(n_list)):
        _require(n_list[i] > n_list[i - 1], f"grid.n_list[{i}]", "n_list must be strictly increasing")
    windows = _int_list(grid.get("windows", [1]), "grid.windows", 1)
    deltas = grid.get("deltas", [0.25])
    _require(isinstance(deltas, list) and deltas, "grid.deltas", "must be a non-empty list")
    for i, d in enumerate(deltas):
        _require(isinstance(d, (int, float)) and not isinstance(d, bool) and 0 < d < 1,
                 f"grid.deltas[{i}]", "delta must lie in (0, 1)")
    measure = _parse_measure(raw.get("measure"), system)
    if command == "katok":
        _require(measure is not None, "measure", "the katok command needs a measure")
    method = raw.get("method", "auto")
    _require(method in ("auto", "exact", "greedy", "greedy-spanning"), "method",
             "must be one of auto, exact, greedy, greedy-spanning")
    var = raw.get("variational", {})
    _require(isinstance(var, dict), "variational", "must be an object")
    order = var.get("order", 1)
    budget = var.get("budget", 20_000)
    _require(isinstance(order, int) and order >= 1, "variational.order", "must be a positive integer")
    _require(isinstance(budget, int) and budget >= 1, "variational.budget", "must be a positive integer")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and 0 <= seed < 2**64, "seed", "must be an unsigned 64-bit integer")
    return ExperimentConfig(
        command, system, potential, mistake, n_list, windows, [float(d) for d in deltas], measure, method,
        order, budget, seed, str(raw.get("output", "results")), raw,
    )


@dataclass
class Row:
    command: str
    n: int | str
    window: int | str
    g_kind: str
    g_value_at_n: int | str
    delta: float | str
    method: str
    log_sum: float
    normalized: float
    runtime_ms: float

    def csv(self) -> list[str]:
        return [v if isinstance(v, str) else repr(v) if isinstance(v, float) else str(v) for v in asdict(self).values()]


def _point(cfg: ExperimentConfig, n: int, w: int, delta: float | None):
    eps = EpsilonWindow.from_window(w)
    t0 = time.perf_counter()
    if cfg.command == "pressure":
        est = best_estimate(cfg.system, cfg.potential, n, eps, None, "exact")
        g_kind, gv, d = "zero", 0, ""
    elif cfg.command == "mistake-pressure":
        est = best_estimate(cfg.system, cfg.potential, n, eps, cfg.mistake, cfg.method)
        g_kind, gv, d = cfg.mistake.label(), est.g_value, ""
    else:
        est = katok_mistake_pressure(cfg.measure, cfg.system, cfg.potential, cfg.mistake, n, eps, delta)
        g_kind, gv, d = cfg.mistake.label(), est.g_value, delta
    ms = (time.perf_counter() - t0) * 1e3
    return Row(cfg.command, n, w, g_kind, gv, d, est.method, float(est.log_sum), float(est.normalized), round(ms, 3))


def _grid(cfg):
    deltas = cfg.deltas if cfg.command == "katok" else [None]
    return [(w, d, n) for w in cfg.windows for d in deltas for n in cfg.n_list]


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _json_safe(obj.item())
    return obj


def run_estimates(cfg: ExperimentConfig, threads: int):
    points = _grid(cfg)

    def work(p):
        w, d, n = p
        try:
            return _point(cfg, n, w, d)
        except BudgetExceeded as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(work, points))
    rows, errors = [], []
    for (w, d, n), r in zip(points, results):
        if isinstance(r, Row):
            rows.append(r)
        else:
            errors.append({"n": n, "window": w, "delta": d, "error": f"budget exceeded: {r}"})
            print(f"error: n={n} window={w} delta={d}: {r}", file=sys.stderr)
    series = []
    for w in cfg.windows:
        for d in (cfg.deltas if cfg.command == "katok" else [None]):
            pts = [r for r in rows if r.window == w and (d is None or r.delta == d)]
            if not pts:
                continue
            p, a = extrapolate([r.n for r in pts], [r.normalized for r in pts], cfg.potential.perturbation_exponents())
            series.append({"window": w, "delta": d, "ns": [r.n for r in pts], "extrapolated": p, "slope": a})
    status = EXIT_BUDGET if points and not rows else EXIT_OK
    return rows, {"series": series, "errors": errors}, status


def run_variational(cfg: ExperimentConfig):
    t0 = time.perf_counter()
    res = variational_search(cfg.system, cfg.potential, order=cfg.order, budget=cfg.budget, seed=cfg.seed)
    ms = (time.perf_counter() - t0) * 1e3
    row = Row("variational", "", "", "", "", "", "compass-search", res.value, res.value, round(ms, 3))
    info = {
        "value": res.value,
        "evaluations": res.evaluations,
        "converged": res.converged,
        "transition": res.measure.transition.tolist(),
        "entropy": entropy(res.measure),
        "energy": f_star(res.measure, cfg.potential),
    }
    if isinstance(cfg.potential, AdditivePotential):
        info["transfer_pressure"] = transfer_pressure(cfg.system, cfg.potential)
    return [row], {"variational": info}, EXIT_OK


def _approximating(F):
    base = F.base if isinstance(F, PerturbedPotential) else F
    if isinstance(base, (AdditivePotential, MatrixCocycle)):
        return base
    return None


def run_verify(cfg: ExperimentConfig):
    checks = []
    zero_g = MistakeFunction.zero()
    for w in cfg.windows:
        for n in cfg.n_list:
            r = prop23_check(cfg.system, cfg.potential, n, EpsilonWindow.from_window(w))
            checks.append({"check": r.name, "ok": r.ok, "comparisons": r.comparisons})
            for g in (zero_g, MistakeFunction.constant(1), MistakeFunction.constant(2)):
                r = prop24_check(cfg.system, cfg.potential, n, EpsilonWindow.from_window(w), g)
                checks.append({"check": r.name, "ok": r.ok, "comparisons": r.comparisons, "advisory": r.advisory})
    phi = _approximating(cfg.potential)
    if phi is not None:
        for l in (1, 2):
            eps = continuity_epsilon(phi, cfg.system, l, 0.1)
            for g in (zero_g, MistakeFunction.constant(1)):
                name = f"lemma21 l={l} g={g.label()}"
                try:
                    res = lemma21_sweep(cfg.potential, ApproximatingFamily(10.0, phi), l, 0.1, 10, eps, g, cfg.system)
                except PreconditionError as exc:
                    checks.append({"check": name, "ok": True, "skipped": str(exc)})
                    continue
                checks.append({"check": name, "ok": all(r.holds for _, r in res),
                               "min_slack": min(r.slack for _, r in res)})
    for c in run_all(cfg.seed):
        checks.append({"check": f"{c.suite}: {c.name}", "ok": bool(c.ok), "detail": c.detail})
    ok = all(c["ok"] for c in checks)
    for c in checks:
        if not c["ok"]:
            print(f"check failed: {c['check']}", file=sys.stderr)
    return [], {"checks": checks, "all_ok": ok}, EXIT_OK if ok else EXIT_CHECK


def run(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> int:
    if cfg.command == "variational":
        rows, extra, status = run_variational(cfg)
    elif cfg.command == "verify":
        rows, extra, status = run_verify(cfg)
    else:
        rows, extra, status = run_estimates(cfg, threads)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow(r.csv())
    summary = {"version": __version__, "schema_version": SCHEMA_VERSION, "command": cfg.command,
               "config": cfg.raw, "exit_status": status, **extra}
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(_json_safe(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mistake-pressure", description="Finite-scale pressure experiments on subshifts.")
    p.add_argument("--config", required=True, help="path to the JSON experiment config")
    p.add_argument("--out", default=None, help="output directory (overrides the config's output)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for grid points")
    p.add_argument("--seed", type=int, default=None, help="seed (overrides the config's seed)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.threads < 1:
        print("error: --threads: must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = parse_config(raw)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out if args.out is not None else cfg.output)
    return run(cfg, out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
