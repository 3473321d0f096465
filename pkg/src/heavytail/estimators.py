"""Monte Carlo estimates of tail ratios, with confidence intervals and targets.

All estimators are crude Monte Carlo on top of :mod:`heavytail.walk_engine`;
each returns point estimates on an x-grid next to the value the asymptotic
theory predicts, so a caller can judge agreement in CI half-widths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import walk_engine as we
from ._parallel import DEFAULT_BLOCK, block_plan, derive_seed, merge_int, run_blocks, stream
from .distributions import LatticePolyTail, insensitivity_h, moments, sample_array, second_tail, tail
from .errors import DegeneratePHat, DriftNotNegative, PcondViolated, RuleNotIndependent
from .lattice_oracle import LatticeOracleResult, exact_lattice_oracle, lattice_downcrossings
from .rules import IndependentGeometric, IndependentPareto, flatten
from .stats import Z95, ks_two_sample, mean_se, proportion_ci
from .tail_analysis import Trend, subexp_ratio, trend_of

__all__ = [
    "MIN_REPLICATIONS",
    "Statistic",
    "RatioCurve",
    "LadderStats",
    "estimate_tail_ratio",
    "estimate_split_ratios",
    "estimate_downcrossings",
    "estimate_downcrossing_rates",
    "estimate_supremum_windows",
    "estimate_ladder_decomposition",
    "subexp_two_sum_ratio",
    "positive_drift_ratio",
    "check_pcond",
    "curve_trend",
    "exact_lattice_oracle",
    "LatticeOracleResult",
]

MIN_REPLICATIONS = 10_000


class Statistic(str, Enum):
    MAX_OVER_SIGMA = "MaxOverSigma"
    VALUE_AT_SIGMA = "ValueAtSigma"


@dataclass
class RatioCurve:
    """Ratio estimates on a grid.  ``point[i]`` estimates a quantity whose
    limit is ``target``; ``ci_low``/``ci_high`` bound a 95% interval."""

    name: str
    x_grid: np.ndarray
    point: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_effective: np.ndarray
    n_requested: int
    target: float
    target_ref: str
    target_half_width: float = 0.0
    hits: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)

    def deviation(self, reference=None, reference_half_width=None):
        """|point - reference| in units of the combined CI half-width."""
        ref = self.target if reference is None else np.asarray(reference, dtype=float)
        rhw = self.target_half_width if reference_half_width is None else reference_half_width
        scale = np.sqrt(self.half_width**2 + np.asarray(rhw, dtype=float) ** 2)
        diff = np.abs(self.point - ref)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(diff == 0, 0.0, diff / scale)

    def within(self, k=3.0, reference=None, reference_half_width=None):
        return self.deviation(reference, reference_half_width) <= k

    def renormalized(self, name, denominators, target, target_ref, target_half_width=0.0):
        """Same hit counts over a different per-x normaliser."""
        if self.hits is None:
            raise ValueError("renormalising needs hit counts")
        return _proportion_curve(name, self.x_grid, self.hits, self.n_effective, self.n_requested,
                                 np.asarray(denominators, dtype=float), target, target_ref, target_half_width)

    def to_json(self):
        def num(v):
            v = float(v)
            return v if math.isfinite(v) else ("Infinity" if v > 0 else "-Infinity" if v < 0 else "NaN")

        out = {
            "kind": "RatioCurve",
            "name": self.name,
            "x_grid": [float(v) for v in self.x_grid],
            "point": [num(v) for v in self.point],
            "half_width": [num(v) for v in self.half_width],
            "ci_low": [num(v) for v in self.ci_low],
            "ci_high": [num(v) for v in self.ci_high],
            "n_effective": [int(v) for v in self.n_effective],
            "n_requested": int(self.n_requested),
            "target": num(self.target),
            "target_half_width": num(self.target_half_width),
            "target_ref": self.target_ref,
        }
        if self.hits is not None:
            out["hits"] = [int(v) for v in self.hits]
        if self.extras:
            out["extras"] = _jsonable(self.extras)
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("Infinity" if v > 0 else "-Infinity" if v < 0 else "NaN")
    if isinstance(obj, Enum):
        return obj.value
    return obj


def _proportion_curve(name, grid, hits, n_eff, n_req, denom, target, target_ref, target_half_width=0.0, extras=None):
    hits = np.asarray(hits, dtype=np.int64)
    n_eff = np.broadcast_to(np.asarray(n_eff, dtype=np.int64), hits.shape).copy()
    point, lo, hi = (np.empty(hits.size) for _ in range(3))
    for i, (h, n) in enumerate(zip(hits, n_eff)):
        p, a, b = proportion_ci(h, n)
        point[i], lo[i], hi[i] = p / denom[i], a / denom[i], b / denom[i]
    return RatioCurve(name, np.asarray(grid, dtype=float), point, lo, hi, n_eff, int(n_req), float(target),
                      target_ref, float(target_half_width), hits, dict(extras or {}))


def _mean_curve(name, grid, means, ses, n_eff, n_req, target, target_ref, extras=None):
    means = np.asarray(means, dtype=float)
    hw = Z95 * np.asarray(ses, dtype=float)
    return RatioCurve(name, np.asarray(grid, dtype=float), means, means - hw, means + hw,
                      np.broadcast_to(np.asarray(n_eff, dtype=np.int64), means.shape).copy(), int(n_req),
                      float(target), target_ref, 0.0, None, dict(extras or {}))


def _grid(values, name="x_grid"):
    g = np.asarray(values, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError(f"{name} must be a nonempty list")
    if np.any(np.diff(g) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if g[0] <= 0:
        raise ValueError(f"{name} must be positive")
    return g


def _check_n(n):
    if int(n) != n or n < MIN_REPLICATIONS:
        raise ValueError(f"n must be an integer >= {MIN_REPLICATIONS}, got {n!r}")
    return int(n)


def _require_negative_drift(model):
    if not model.mean() < 0:
        raise DriftNotNegative(f"{type(model).__name__} has mean {model.mean():g} >= 0")


def _sigma_target(flat, stats):
    """(target, half width, reference text) for E sigma."""
    exact = flat.expected_sigma()
    if exact is not None:
        if math.isinf(exact):
            return math.inf, 0.0, "E sigma = infinity (independent power-law clock with index <= 1)"
        return float(exact), 0.0, "exact E sigma"
    mean, se = stats.sigma_mean_se
    return float(mean), Z95 * float(se), "Monte Carlo mean of sigma from the same replications"


def _stopped_extras(stats, flat):
    smean, sse = stats.sigma_mean_se
    dmean, dse = stats.wald_mean_se
    return {
        "n_capped": stats.n_capped,
        "sigma_mean": smean,
        "sigma_se": sse,
        "wald_residual_mean": dmean if flat.expected_sigma() != math.inf else math.nan,
        "wald_residual_se": dse if flat.expected_sigma() != math.inf else math.nan,
        "h_grid": [float(v) for v in stats.h_grid],
    }


def estimate_tail_ratio(model, rule, x_grid, n, seed, statistic=Statistic.MAX_OVER_SIGMA, *,
                        cap=we.DEFAULT_CAP, workers=None, block_size=DEFAULT_BLOCK):
    """P(M_sigma > x) / tail(x), or P(S_sigma > x) / tail(x) for ``ValueAtSigma``.

    Replications that hit ``cap`` are dropped from numerator and denominator.
    """
    _require_negative_drift(model)
    statistic = Statistic(statistic)
    flat = flatten(rule)
    if statistic is Statistic.VALUE_AT_SIGMA and flat.walk_dependent:
        raise RuleNotIndependent("the value-at-sigma ratio needs a stopping time independent of the walk")
    return _tail_ratio(model, rule, flat, x_grid, n, seed, statistic, cap, workers, block_size)[0]


def _tail_ratio(model, rule, flat, x_grid, n, seed, statistic, cap, workers, block_size, name=None):
    grid = _grid(x_grid)
    n = _check_n(n)
    stats = we.run_stopped(model, rule, grid, n, seed, cap=cap, workers=workers, block_size=block_size)
    target, thw, ref = _sigma_target(flat, stats)
    hits = stats.hits_m if statistic is Statistic.MAX_OVER_SIGMA else stats.hits_s
    denom = np.asarray(tail(model, grid), dtype=float)
    label = name or ("max_over_sigma" if statistic is Statistic.MAX_OVER_SIGMA else "value_at_sigma")
    curve = _proportion_curve(label, grid, hits, stats.n_done, n, denom, target, ref, thw,
                              _stopped_extras(stats, flat))
    return curve, stats


def estimate_split_ratios(model, rule, x_grid, n, seed, *, cap=we.DEFAULT_CAP, workers=None,
                          block_size=DEFAULT_BLOCK):
    """Split P(M_sigma > x) by the walk's level just before it first exceeds x.

    Returns a dict with curves ``a1`` (pre-jump level <= h(x), target E sigma),
    ``a2`` (target 0), ``total`` and ``delta_proxy`` = max of ``a2`` over the
    grid, a finite-grid stand-in for its supremum beyond x.
    """
    _require_negative_drift(model)
    flat = flatten(rule)
    total, stats = _tail_ratio(model, rule, flat, x_grid, n, seed, Statistic.MAX_OVER_SIGMA, cap, workers,
                               block_size, name="max_over_sigma")
    denom = np.asarray(tail(model, total.x_grid), dtype=float)
    a1 = _proportion_curve("a1", total.x_grid, stats.hits_a1, stats.n_done, n, denom, total.target,
                           total.target_ref, total.target_half_width, {"h_grid": total.extras["h_grid"]})
    a2 = _proportion_curve("a2", total.x_grid, stats.hits_a2, stats.n_done, n, denom, 0.0,
                           "anomalous passages are negligible on S*", 0.0)
    return {"a1": a1, "a2": a2, "total": total, "delta_proxy": float(np.max(a2.point))}


def curve_trend(curve, tol, target=None):
    """Endpoint trend of a curve's points relative to ``target`` (default: its own)."""
    return trend_of(curve.point, curve.target if target is None else target, tol)


def estimate_downcrossings(model, t_grid, x_barrier, n, seed, *, cap=10**8, workers=None,
                           block_size=DEFAULT_BLOCK):
    """Mean number of downcrossings of -t while the running minimum stays above
    -t - x_barrier.  Target m_minus / m; ``extras`` carries the grid maximum
    and, for the lattice family, the exact expectation."""
    _require_negative_drift(model)
    grid = _grid(t_grid, "t_grid")
    if not x_barrier > grid[-1]:
        raise ValueError("x_barrier must exceed max(t_grid)")
    n = _check_n(n)
    c_sum, c_sq, done, capped = we.run_downcross(model, grid, x_barrier, n, seed, cap=cap, workers=workers,
                                                 block_size=block_size)
    ms = [mean_se(float(s), float(q), done) for s, q in zip(c_sum, c_sq)]
    mom = moments(model)
    extras = {"n_capped": capped, "K_hat": max(m for m, _ in ms), "x_barrier": float(x_barrier)}
    if isinstance(model, LatticePolyTail) and float(x_barrier).is_integer() and np.all(grid == np.round(grid)):
        extras["exact"] = lattice_downcrossings(model, int(x_barrier))
    return _mean_curve("downcrossings", grid, [m for m, _ in ms], [s for _, s in ms], done, n,
                       mom.m_minus / mom.m_abs, "m_minus / m", extras)


def estimate_downcrossing_rates(model, levels, n_cycles, n_steps, seed, *, n_batches=32, workers=None):
    """Downcrossings of x per unit time, two ways.

    ``cycle``: E N(x) / E tau over independent busy cycles (ratio estimator).
    ``stationary``: long-run Lindley average of 1{W > x} P(xi <= x - W), with
    batch-means intervals.  Both estimate the same stationary rate.
    """
    _require_negative_drift(model)
    levels = _grid(levels, "levels")
    cyc = we.run_cycles(model, levels, n_cycles, derive_seed(seed, 1), workers=workers)
    k = cyc.n_done
    tau_bar = cyc.tau_sum / k
    rate = cyc.n_sum / cyc.tau_sum
    # variance of the ratio estimator: Var(N - R tau) / (k tau_bar^2)
    e_n2 = cyc.n_sumsq / k
    e_nt = cyc.n_tau / k
    e_t2 = cyc.tau_sumsq / k
    e_n = cyc.n_sum / k
    var = (e_n2 - 2 * rate * e_nt + rate**2 * e_t2) - (e_n - rate * tau_bar) ** 2
    se = np.sqrt(np.maximum(var, 0.0) / (k - 1)) / tau_bar
    cycle = _mean_curve("cycle_rate", levels, rate, se, k, n_cycles, math.nan, "E N(x) / E tau",
                        {"tau_mean": tau_bar, "n_capped": cyc.n_capped})
    _, rb = we.run_lindley(model, levels, n_steps, derive_seed(seed, 2), n_batches=n_batches, workers=workers)
    st_mean = rb.mean(axis=0)
    st_se = rb.std(axis=0, ddof=1) / math.sqrt(n_batches)
    stationary = _mean_curve("stationary_rate", levels, st_mean, st_se, n_batches * n_steps, n_batches * n_steps,
                             math.nan, "long-run Lindley average of 1{W > x} F(x - W)",
                             {"n_batches": n_batches, "steps_per_batch": int(n_steps)})
    return {"cycle": cycle, "stationary": stationary}


def estimate_supremum_windows(model, x_grid, c, n, floor_L, seed, *, cap=10**8, workers=None,
                              block_size=DEFAULT_BLOCK, store=0):
    """Local and global tails of the all-time maximum M.

    M is taken as the running maximum until the walk first drops below
    -floor_L; the neglected part is bounded by second_tail(floor_L) / m.
    ``window`` estimates P(M in (x, x+c]) / tail(x) with target c/m;
    ``global_tail`` estimates P(M > x) / second_tail(x) with target 1/m.
    """
    _require_negative_drift(model)
    grid = _grid(x_grid)
    if not c > 0:
        raise ValueError("c must be > 0")
    if not floor_L > 0:
        raise ValueError("floor_L must be > 0")
    if isinstance(model, LatticePolyTail) and not float(c).is_integer():
        raise ValueError("lattice windows need an integer c")
    n = _check_n(n)
    edges = np.unique(np.concatenate([grid, grid + c]))
    sup = we.run_supremum(model, edges, n, floor_L, seed, store=store, cap=cap, workers=workers,
                          block_size=block_size)
    idx = {float(e): j for j, e in enumerate(edges)}
    above = np.array([sup.exceed[idx[float(x)]] for x in grid])
    above_c = np.array([sup.exceed[idx[float(x + c)]] for x in grid])
    m = moments(model).m_abs
    bias = float(second_tail(model, floor_L)) / m
    extras = {"c": float(c), "floor_L": float(floor_L), "bias_bound": bias, "n_capped": sup.n_capped}
    window = _proportion_curve("window", grid, above - above_c, sup.n_done, n, np.asarray(tail(model, grid)),
                               c / m, "c / m", 0.0, {**extras, "bias_bound_relative": bias / (c / m)})
    glob = _proportion_curve("global_tail", grid, above, sup.n_done, n, np.asarray(second_tail(model, grid)),
                             1.0 / m, "1 / m", 0.0, {**extras, "bias_bound_relative": bias * m})
    out = {"window": window, "global_tail": glob, "bias_bound": bias}
    if store:
        out["samples"] = sup.samples
    return out


@dataclass
class LadderStats:
    p_hat: float
    p_half_width: float
    psi_samples: np.ndarray
    window_ratio: RatioCurve
    ks_distance: float
    ks_critical: float
    n_compare: int
    t2_window: RatioCurve
    p_flagged: bool = False
    extras: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "kind": "LadderStats",
            "p_hat": self.p_hat,
            "p_half_width": self.p_half_width,
            "n_psi": int(self.psi_samples.size),
            "psi_mean": float(self.psi_samples.mean()) if self.psi_samples.size else math.nan,
            "ks_distance": self.ks_distance,
            "ks_critical": self.ks_critical,
            "n_compare": self.n_compare,
            "p_flagged": self.p_flagged,
            "window_ratio": self.window_ratio.to_json(),
            "t2_window": self.t2_window.to_json(),
            **({"extras": _jsonable(self.extras)} if self.extras else {}),
        }


def _geometric_compound(psi, p, size, rng):
    """``size`` draws of sum_{i <= nu} psi_i with P(nu = k) = p (1 - p)^k, psi resampled."""
    nu = rng.geometric(p, size) - 1
    total = int(nu.sum())
    picks = psi[rng.integers(0, psi.size, total)]
    ends = np.cumsum(nu)
    csum = np.concatenate([[0.0], np.cumsum(picks)])
    return csum[ends] - csum[ends - nu]


def estimate_ladder_decomposition(model, n_cycles, floor_L, c, x_grid, seed, *, n_compare=100_000,
                                  cap=10**8, workers=None, block_size=DEFAULT_BLOCK):
    """Ladder-height view of the maximum.

    Excursions from 0 end at the first strict ascent (height psi recorded) or
    below -floor_L (counted towards p = P(M = 0); this overstates p slightly).
    The psi window ratio has target p c / ((1 - p) m).  A two-sample KS test
    compares directly simulated maxima with geometric compounds of resampled
    psi.  ``t2_window`` does the same window for the sum of two heights,
    whose limit is twice as large.
    """
    _require_negative_drift(model)
    grid = _grid(x_grid)
    if not c > 0 or not floor_L > 0:
        raise ValueError("c and floor_L must be > 0")
    n_cycles = _check_n(n_cycles)
    exc = we.run_excursions(model, n_cycles, floor_L, derive_seed(seed, 1), cap=cap, workers=workers,
                            block_size=block_size)
    done = exc.n_done - exc.n_capped
    p_hat = exc.n_floored / done
    if p_hat <= 0.0 or p_hat >= 1.0:
        raise DegeneratePHat(f"p_hat = {p_hat} from {done} excursions")
    _, p_lo, p_hi = proportion_ci(exc.n_floored, done)
    p_hw = 0.5 * (p_hi - p_lo)
    psi = exc.psi
    m = moments(model).m_abs
    odds = p_hat / (1.0 - p_hat)
    odds_hw = p_hw / (1.0 - p_hat) ** 2
    denom = np.asarray(tail(model, grid), dtype=float)

    def window(name, values, mult):
        s = np.sort(values)
        hits = np.searchsorted(s, grid + c, side="right") - np.searchsorted(s, grid, side="right")
        return _proportion_curve(name, grid, hits, s.size, n_cycles, denom, mult * odds * c / m,
                                 f"{mult} p c / ((1 - p) m) with p = p_hat", mult * odds_hw * c / m,
                                 {"c": float(c), "p_hat": p_hat})

    win = window("psi_window", psi, 1)
    t2 = window("t2_window", psi[0 : psi.size - 1 : 2] + psi[1::2], 2)

    sup = we.run_supremum(model, np.zeros(0), n_compare, floor_L, derive_seed(seed, 2), store=n_compare,
                          cap=cap, workers=workers, block_size=block_size)
    composed = _geometric_compound(psi, p_hat, n_compare, stream(derive_seed(seed, 3), 0))
    ks = ks_two_sample(sup.samples[: sup.n_done], composed)
    crit = 1.36 * math.sqrt(2.0 / n_compare)
    extras = {"n_excursions": done, "n_floored": exc.n_floored, "floor_L": float(floor_L),
              "p_bias_bound": float(second_tail(model, floor_L)) / m}
    return LadderStats(p_hat, p_hw, psi, win, ks, crit, int(n_compare), t2, False, extras)


def subexp_two_sum_ratio(model, x_grid, n, seed, *, workers=None, block_size=DEFAULT_BLOCK):
    """P(phi_1 + phi_2 > x) / P(phi_1 > x) for i.i.d. phi_i = max(X_i, 0), X the
    model's unshifted base law; target 2.  ``extras`` holds the quadrature
    value at each x and the inclusion-exclusion counts."""
    base = model.base() if not isinstance(model, LatticePolyTail) else model
    grid = _grid(x_grid)
    n = _check_n(n)
    chunk = 1 << 18

    def block(index, size):
        rng = stream(seed, index, 0)
        counts = np.zeros((4, grid.size), dtype=np.int64)
        left = size
        while left:
            k = min(left, chunk)
            a = np.maximum(sample_array(base, rng, k), 0.0)
            b = np.maximum(sample_array(base, rng, k), 0.0)
            s = np.sort(a + b)
            sa, sb = np.sort(a), np.sort(b)
            both = np.minimum(a, b)
            sboth = np.sort(both)
            for row, arr in enumerate((s, sa, sb, sboth)):
                counts[row] += arr.size - np.searchsorted(arr, grid, side="right")
            left -= k
        return counts

    counts = merge_int([c.ravel() for c in run_blocks(block, block_plan(n, block_size), workers)])
    counts = counts.reshape(4, grid.size)
    gbar = np.asarray(tail(base, grid), dtype=float)
    extras = {
        "quadrature": [subexp_ratio(base, float(x)) for x in grid],
        "hits_phi1": counts[1].tolist(),
        "hits_phi2": counts[2].tolist(),
        "hits_both": counts[3].tolist(),
    }
    return _proportion_curve("two_sum", grid, counts[0], n, n, gbar, 2.0, "2 (subexponential limit)", 0.0, extras)


def check_pcond(model, rule, x_grid, limit=0.01):
    """P(sigma > h(x)) / tail(x) along the grid; PcondViolated if it exceeds
    ``limit`` at the largest x."""
    flat = flatten(rule)
    grid = _grid(x_grid)
    h = np.asarray(insensitivity_h(model, grid), dtype=float)
    surv = np.asarray(flat.survival(np.floor(h)), dtype=float)
    ratio = surv / np.asarray(tail(model, grid), dtype=float)
    if ratio[-1] > limit:
        raise PcondViolated(f"P(sigma > h(x)) / tail(x) = {ratio[-1]:.3g} > {limit} at x = {grid[-1]:g}")
    return ratio


def positive_drift_ratio(model, rule, x_grid, n, seed, *, pcond_limit=0.01, cap=we.DEFAULT_CAP, workers=None,
                         block_size=DEFAULT_BLOCK):
    """P(M_sigma > x) / tail(x) for a model of any drift sign, where sigma is a
    clock independent of the walk whose tail is negligible at scale h(x)."""
    flat = flatten(rule)
    if flat.walk_dependent:
        raise RuleNotIndependent("positive-drift ratios need a rule that does not look at the walk")
    pc = check_pcond(model, rule, x_grid, pcond_limit)
    curve, _ = _tail_ratio(model, rule, flat, x_grid, n, seed, Statistic.MAX_OVER_SIGMA, cap, workers,
                           block_size, name="positive_drift")
    curve.extras["pcond_ratio"] = pc.tolist()
    return curve
