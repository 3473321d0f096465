"""Scenario configs, report bundles and table output."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import estimators as est
from ._parallel import DEFAULT_BLOCK, resolve_workers
from .distributions import LatticePolyTail, model_from_json, model_to_json
from .errors import ConfigInvalid, ReportIOError
from .lattice_oracle import MAX_LEVEL
from .rules import FixedN, MinOf, Tau, flatten, rule_from_json, rule_to_json
from .tail_analysis import TailProperty, TailVerdict, Trend, classify_tail

__all__ = [
    "TASKS",
    "ScenarioConfig",
    "ReportBundle",
    "validate_config",
    "load_config",
    "run_scenario",
    "render_tables",
    "CSV_COLUMNS",
]

TASKS = ("classify", "tail_ratio", "split", "downcross", "windows", "ladder", "two_sum", "positive_drift",
         "oracle_compare")

CSV_COLUMNS = ("x", "n_effective", "point", "ci_low", "ci_high", "target")

_NEEDS_RULE = {"tail_ratio", "split", "positive_drift", "oracle_compare"}
_NEEDS_N = {"tail_ratio", "split", "downcross", "windows", "ladder", "two_sum", "positive_drift", "oracle_compare"}

_DEFAULTS = {
    "k_ci": 3.0,
    "tol": 0.15,
    "property": "sstar",
    "statistic": "MaxOverSigma",
    "cap": 10**6,
    "a2_limit": 0.05,
    "bias_limit": 1e-4,
    "n_compare": 100_000,
    "pcond_limit": 0.01,
    "two_sum_limit": 0.1,
    "block_size": DEFAULT_BLOCK,
}

_KNOWN = {
    "task", "model", "rule", "x_grid", "t_grid", "n", "c", "floor_L", "cap", "seed", "x_barrier", "tol",
    "property", "statistic", "k_ci", "a2_limit", "bias_limit", "n_compare", "pcond_limit", "expect_trend",
    "require", "two_sum_limit", "block_size", "name",
}


@dataclass(frozen=True)
class ScenarioConfig:
    task: str
    model: object
    seed: int
    raw: dict
    rule: object = None
    x_grid: tuple = ()
    t_grid: tuple = ()
    n: int = 0
    c: float = 1.0
    floor_L: float = 0.0
    x_barrier: float = 0.0
    options: dict = field(default_factory=dict)

    def opt(self, key):
        return self.options.get(key, _DEFAULTS.get(key))


def _increasing(values):
    return all(b > a for a, b in zip(values, values[1:]))


def validate_config(raw, seed=None):
    """Check every field against the preconditions of the chosen task and
    return a :class:`ScenarioConfig`.  ``seed`` overrides the config's seed.
    All problems are collected into one :class:`ConfigInvalid`."""
    if not isinstance(raw, dict):
        raise ConfigInvalid({"": "config must be a JSON object"})
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = int(seed)
    errors = {}
    for key in sorted(set(raw) - _KNOWN):
        errors[key] = "unknown field"

    task = raw.get("task")
    if task not in TASKS:
        errors["task"] = f"must be one of {list(TASKS)}"

    model = None
    try:
        model = model_from_json(raw.get("model"))
    except Exception as exc:
        errors["model"] = str(exc)

    s = raw.get("seed")
    if not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < 2**64:
        errors["seed"] = "must be an integer in [0, 2^64)"

    rule = None
    if task in _NEEDS_RULE:
        try:
            rule = rule_from_json(raw.get("rule"))
        except Exception as exc:
            errors["rule"] = str(exc) if raw.get("rule") is not None else "required for this task"
    elif raw.get("rule") is not None:
        try:
            rule = rule_from_json(raw["rule"])
        except Exception as exc:
            errors["rule"] = str(exc)

    def grid(key, required):
        g = raw.get(key)
        if g is None:
            if required:
                errors[key] = "required for this task"
            return ()
        if not isinstance(g, list) or not g or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in g):
            errors[key] = "must be a nonempty list of numbers"
            return ()
        g = [float(v) for v in g]
        if not all(math.isfinite(v) and v > 0 for v in g):
            errors[key] = "values must be finite and > 0"
        elif not _increasing(g):
            errors[key] = "must be strictly increasing"
        return tuple(g)

    x_grid = grid("x_grid", task != "downcross" and task in TASKS)
    t_grid = grid("t_grid", task == "downcross")

    def number(key, required, positive=True, integer=False, minimum=None):
        v = raw.get(key)
        if v is None:
            if required:
                errors[key] = "required for this task"
            return None
        ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
        if ok and integer:
            ok = float(v).is_integer()
        if not ok:
            errors[key] = "must be a finite " + ("integer" if integer else "number")
            return None
        if positive and not v > 0:
            errors[key] = "must be > 0"
            return None
        if minimum is not None and v < minimum:
            errors[key] = f"must be >= {minimum}"
            return None
        return int(v) if integer else float(v)

    n = number("n", task in _NEEDS_N, integer=True, minimum=est.MIN_REPLICATIONS)
    c = number("c", task in {"windows", "ladder"})
    floor_l = number("floor_L", task in {"windows", "ladder"})
    x_barrier = number("x_barrier", task == "downcross")
    options = {}
    for key in ("tol", "k_ci", "a2_limit", "bias_limit", "pcond_limit", "two_sum_limit"):
        v = number(key, False)
        if v is not None:
            options[key] = v
    for key in ("cap", "n_compare", "block_size"):
        v = number(key, False, integer=True)
        if v is not None:
            options[key] = v

    if "property" in raw:
        try:
            options["property"] = TailProperty.parse(raw["property"]).value
        except ValueError as exc:
            errors["property"] = str(exc)
    if "statistic" in raw:
        try:
            options["statistic"] = est.Statistic(raw["statistic"]).value
        except ValueError:
            errors["statistic"] = f"must be one of {[s.value for s in est.Statistic]}"
    if "expect_trend" in raw:
        try:
            options["expect_trend"] = Trend(raw["expect_trend"]).value
        except ValueError:
            errors["expect_trend"] = f"must be one of {[t.value for t in Trend]}"
    if "require" in raw:
        req = raw["require"]
        if not isinstance(req, list) or not all(isinstance(v, str) for v in req):
            errors["require"] = "must be a list of verdict names"
        else:
            options["require"] = list(req)

    # task-specific preconditions
    if model is not None and task in TASKS:
        negative = model.mean() < 0
        if task not in {"classify", "two_sum", "positive_drift"} and not negative:
            errors["model"] = "this task needs a model with negative mean"
        if task == "classify" and len(x_grid) < 4 and "x_grid" not in errors:
            errors["x_grid"] = "classification needs at least 4 grid points"
        if task == "downcross" and t_grid and x_barrier is not None and not x_barrier > max(t_grid):
            errors["x_barrier"] = "must exceed max(t_grid)"
        if task == "oracle_compare":
            if not isinstance(model, LatticePolyTail):
                errors["model"] = "oracle_compare needs the lattice_poly_tail family"
            if x_grid and not all(v.is_integer() and v <= MAX_LEVEL for v in x_grid):
                errors["x_grid"] = f"oracle levels must be integers <= {MAX_LEVEL}"
            if rule is not None and not _oracle_rule(rule):
                errors["rule"] = "oracle_compare supports tau, fixed and min(tau, fixed)"
        if task in {"windows", "ladder"} and isinstance(model, LatticePolyTail) and c is not None \
                and not float(c).is_integer():
            errors["c"] = "lattice windows need an integer c"
        if rule is not None and task in {"tail_ratio", "split"}:
            flat = flatten(rule)
            if task == "split" and flat.expected_sigma() == math.inf:
                errors["rule"] = "the split needs a rule with finite mean"
            if options.get("statistic") == est.Statistic.VALUE_AT_SIGMA.value and flat.walk_dependent:
                errors["statistic"] = "ValueAtSigma needs a rule independent of the walk"
        if task == "positive_drift" and rule is not None and flatten(rule).walk_dependent:
            errors["rule"] = "positive_drift needs a rule independent of the walk"
    if errors:
        raise ConfigInvalid(errors)
    return ScenarioConfig(task=task, model=model, seed=int(raw["seed"]), raw=raw, rule=rule, x_grid=x_grid,
                          t_grid=t_grid, n=n or 0, c=c if c is not None else 1.0, floor_L=floor_l or 0.0,
                          x_barrier=x_barrier or 0.0, options=options)


def _oracle_rule(rule):
    if isinstance(rule, (Tau, FixedN)):
        return True
    return isinstance(rule, MinOf) and {type(rule.first), type(rule.second)} == {Tau, FixedN}


def load_config(path, seed=None):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ReportIOError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid({"": f"not valid JSON: {exc}"}) from exc
    return validate_config(raw, seed)


@dataclass
class ReportBundle:
    meta: dict
    curves: list
    oracle: list
    verdicts: dict
    required: list

    @property
    def passed(self):
        return all(self.verdicts[name] for name in self.required)

    def ratio_curves(self):
        out = []
        for item in self.curves:
            if isinstance(item, est.RatioCurve):
                out.append(item)
            elif isinstance(item, est.LadderStats):
                out.extend([item.window_ratio, item.t2_window])
        return out

    def to_json(self, include_timing=True):
        meta = dict(self.meta)
        if not include_timing:
            meta.pop("wall_clock_seconds", None)
            meta.pop("workers", None)
        return {
            "meta": meta,
            "curves": [c.to_json() for c in self.curves],
            "oracle": [o.to_json() for o in self.oracle],
            "verdicts": dict(self.verdicts),
            "required": list(self.required),
            "passed": self.passed,
        }

    def dumps(self, include_timing=True):
        return json.dumps(self.to_json(include_timing), indent=2, sort_keys=True, allow_nan=False)


def _last_within(curve, k):
    return bool(curve.within(k)[-1])


def _run_task(cfg, workers):
    """Returns (curves, oracle results, verdicts)."""
    k = cfg.opt("k_ci")
    block = cfg.opt("block_size")
    common = {"workers": workers, "block_size": block}
    m, task = cfg.model, cfg.task
    if task == "classify":
        v = classify_tail(m, cfg.x_grid, cfg.opt("tol"), cfg.opt("property"))
        expect = Trend(cfg.options.get("expect_trend", Trend.CONVERGING.value))
        return [v], [], {"trend": v.trend is expect}

    if task == "tail_ratio":
        curve = est.estimate_tail_ratio(m, cfg.rule, cfg.x_grid, cfg.n, cfg.seed, cfg.opt("statistic"),
                                        cap=cfg.opt("cap"), **common)
        if math.isinf(curve.target):
            return [curve], [], {"increasing": bool(np.all(np.diff(curve.point) > 0))}
        return [curve], [], {"within_ci_last": _last_within(curve, k)}

    if task == "split":
        out = est.estimate_split_ratios(m, cfg.rule, cfg.x_grid, cfg.n, cfg.seed, cap=cfg.opt("cap"), **common)
        a1, a2, total = out["a1"], out["a2"], out["total"]
        a2.extras["delta_proxy"] = out["delta_proxy"]
        verdicts = {
            "partition_exact": bool(np.all(a1.hits + a2.hits == total.hits)),
            "total_within_ci_last": _last_within(total, k),
            "a2_below_limit": bool(a2.point[-1] < cfg.opt("a2_limit")),
        }
        return [total, a1, a2], [], verdicts

    if task == "downcross":
        curve = est.estimate_downcrossings(m, cfg.t_grid, cfg.x_barrier, cfg.n, cfg.seed, **common)
        verdicts = {"within_ci_all": bool(np.all(curve.within(k)))}
        if "exact" in curve.extras:
            verdicts["exact_within_ci_all"] = bool(np.all(curve.within(k, curve.extras["exact"], 0.0)))
        return [curve], [], verdicts

    if task == "windows":
        out = est.estimate_supremum_windows(m, cfg.x_grid, cfg.c, cfg.n, cfg.floor_L, cfg.seed, **common)
        w, g = out["window"], out["global_tail"]
        verdicts = {
            "window_within_ci_last": _last_within(w, k),
            "global_within_ci_last": _last_within(g, k),
            "bias_bound_small": bool(w.extras["bias_bound_relative"] < cfg.opt("bias_limit")),
        }
        return [w, g], [], verdicts

    if task == "ladder":
        ls = est.estimate_ladder_decomposition(m, cfg.n, cfg.floor_L, cfg.c, cfg.x_grid, cfg.seed,
                                               n_compare=cfg.opt("n_compare"), **common)
        verdicts = {
            "ks_below_critical": bool(ls.ks_distance < ls.ks_critical),
            "window_within_ci_all": bool(np.all(ls.window_ratio.within(k))),
        }
        return [ls], [], verdicts

    if task == "two_sum":
        curve = est.subexp_two_sum_ratio(m, cfg.x_grid, cfg.n, cfg.seed, **common)
        quad = np.asarray(curve.extras["quadrature"])
        verdicts = {
            "quadrature_within_ci_all": bool(np.all(curve.within(k, quad, 0.0))),
            "near_limit_last": bool(abs(curve.point[-1] - 2.0) < cfg.opt("two_sum_limit")
                                    and abs(quad[-1] - 2.0) < cfg.opt("two_sum_limit")),
        }
        return [curve], [], verdicts

    if task == "positive_drift":
        curve = est.positive_drift_ratio(m, cfg.rule, cfg.x_grid, cfg.n, cfg.seed,
                                         pcond_limit=cfg.opt("pcond_limit"), cap=cfg.opt("cap"), **common)
        return [curve], [], {"within_ci_last": _last_within(curve, k)}

    # oracle_compare
    curve = est.estimate_tail_ratio(m, cfg.rule, cfg.x_grid, cfg.n, cfg.seed, cap=cfg.opt("cap"), **common)
    oracle = [est.exact_lattice_oracle(m, cfg.rule, int(x)) for x in cfg.x_grid]
    ref = np.array([o.ratio for o in oracle])
    ok = curve.within(k, ref, 0.0)
    return [curve], oracle, {f"oracle_x={int(x)}": bool(v) for x, v in zip(cfg.x_grid, ok)}


def run_scenario(config, workers=None):
    """Run one scenario (a :class:`ScenarioConfig` or a raw dict) and return its bundle."""
    cfg = config if isinstance(config, ScenarioConfig) else validate_config(config)
    workers = resolve_workers(workers)
    start = time.perf_counter()
    curves, oracle, verdicts = _run_task(cfg, workers)
    elapsed = time.perf_counter() - start
    required = cfg.options.get("require", sorted(verdicts))
    unknown = [r for r in required if r not in verdicts]
    if unknown:
        raise ConfigInvalid({"require": f"unknown verdicts {unknown}; available {sorted(verdicts)}"})
    echo = dict(cfg.raw)
    echo["model"] = model_to_json(cfg.model)
    if cfg.rule is not None:
        echo["rule"] = rule_to_json(cfg.rule)
    meta = {
        "seed": cfg.seed,
        "config": echo,
        "tool_version": __version__,
        "wall_clock_seconds": elapsed,
        "workers": workers,
    }
    return ReportBundle(meta, curves, oracle, verdicts, list(required))


def _fmt(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def _safe(name):
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


def render_tables(bundle, out_dir):
    """Write report.json and one CSV per ratio curve; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        report = out / "report.json"
        with open(report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(bundle.dumps())
            fh.write("\n")
        paths.append(report)
        for i, curve in enumerate(bundle.ratio_curves()):
            path = out / f"{i:02d}_{_safe(curve.name)}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for row in zip(curve.x_grid, curve.n_effective, curve.point, curve.ci_low, curve.ci_high):
                    x, n_eff, p, lo, hi = row
                    w.writerow([_fmt(x), str(int(n_eff)), _fmt(p), _fmt(lo), _fmt(hi), _fmt(curve.target)])
            paths.append(path)
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {out}: {exc}") from exc
    return paths
