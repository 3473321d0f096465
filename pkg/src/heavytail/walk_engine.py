"""Random walk, Lindley workload and stopping-rule simulation.

Two layers live here.  The per-replication functions (``simulate_stopped``,
``simulate_cycle``, ``first_passage_split``) are plain Python, easy to read and
able to replay a given increment sequence.  The ``run_*`` drivers push many
replications through compiled kernels in reproducible blocks and return
sufficient statistics (integer counts and compensated float sums).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels as K
from ._parallel import (
    AUX_STREAM,
    DEFAULT_BLOCK,
    DEFAULT_BUFFER,
    WALK_STREAM,
    block_plan,
    merge_float,
    merge_int,
    run_blocks,
    stream,
)
from .distributions import fill_increments, insensitivity_h, moments, sample
from .rules import draw_independent, flatten

__all__ = [
    "MuHit",
    "StoppedSummary",
    "CycleRecord",
    "Passage",
    "simulate_stopped",
    "simulate_cycle",
    "first_passage_split",
    "lindley_path",
    "ladder_times",
    "StoppedStats",
    "CycleStats",
    "run_stopped",
    "run_cycles",
    "run_downcross",
    "run_supremum",
    "run_excursions",
    "run_lindley",
]

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class MuHit:
    mu: int
    pre_jump: float
    overshoot: float


@dataclass(frozen=True)
class StoppedSummary:
    sigma: int | None
    M_sigma: float
    S_sigma: float | None
    mu_x_hit: MuHit | None
    capped: bool


@dataclass(frozen=True)
class CycleRecord:
    tau: int
    M_tau: float
    S_tau: float
    downcrossings: dict


class Passage(str, Enum):
    A1 = "A1"
    A2 = "A2"
    NO_PASSAGE = "NoPassage"


class _Source:
    """Increment supplier that records the index of every read."""

    def __init__(self, model, rng, increments, log):
        self.model = model
        self.rng = rng
        self.increments = None if increments is None else np.asarray(increments, dtype=float)
        self.log = log
        self.reads = 0

    def next(self):
        if self.increments is not None:
            if self.reads >= self.increments.size:
                raise IndexError("replayed increment sequence exhausted before the rule fired")
            xi = float(self.increments[self.reads])
        else:
            xi = sample(self.model, self.rng)
        self.reads += 1
        if self.log is not None:
            self.log.append(("read", self.reads))
        return xi


def _independent_sigma(flat, aux_rng, cap):
    if not flat.has_independent:
        return -1
    return int(draw_independent(flat, aux_rng, 1, cap)[0])


def simulate_stopped(model, rule, x_probe=None, cap=DEFAULT_CAP, rng=None, *,
                     aux_rng=None, increments=None, log=None):
    """One replication of the walk stopped by ``rule``.

    Independent clocks are drawn up front from ``aux_rng`` (spawned from
    ``rng`` when omitted).  Passing ``increments`` replays a fixed sequence
    instead of sampling.  ``log`` receives ("read", n) / ("stop", n) events.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    flat = flatten(rule)
    if flat.has_independent and aux_rng is None:
        if rng is None:
            raise ValueError("an independent clock needs rng or aux_rng")
        aux_rng = rng.spawn(1)[0]
    sig = _independent_sigma(flat, aux_rng, cap)
    src = _Source(model, rng, increments, log)

    S = M = 0.0
    n = 0
    lad, ladc = 0.0, 0
    hit = None
    stop = flat.fixed_n == 0 or sig == 0
    while not stop:
        if n >= cap:
            if log is not None:
                log.append(("cap", n))
            return StoppedSummary(None, M, None, hit, True)
        prev = S
        S += src.next()
        n += 1
        if S > M:
            M = S
        if x_probe is not None and hit is None and S > x_probe:
            hit = MuHit(n, prev, S - x_probe)
        if flat.fixed_n is not None and n >= flat.fixed_n:
            stop = True
        if flat.ladder_k is not None and S <= lad:
            ladc += 1
            lad = S
            if ladc >= flat.ladder_k:
                stop = True
        if flat.mu_level is not None and S > flat.mu_level:
            stop = True
        if sig >= 0 and n >= sig:
            stop = True
    if log is not None:
        log.append(("stop", n))
    return StoppedSummary(n, M, S, hit, False)


def simulate_cycle(model, level_grid, rng=None, *, increments=None, cap=DEFAULT_CAP):
    """One busy cycle [0, tau] with downcrossing counts at each level."""
    levels = np.asarray(level_grid, dtype=float)
    if levels.size == 0 or np.any(np.diff(levels) <= 0) or np.any(levels <= 0):
        raise ValueError("level_grid must be nonempty, strictly increasing and positive")
    src = _Source(model, rng, increments, None)
    counts = np.zeros(levels.size, dtype=np.int64)
    S = M = 0.0
    n = 0
    while True:
        prev = S
        S += src.next()
        n += 1
        M = max(M, S)
        if S < prev:
            counts += (prev > levels) & (S <= levels)
        if S <= 0:
            break
        if n >= cap:
            raise RuntimeError(f"cycle exceeded cap={cap} steps")
    return CycleRecord(n, M, S, {float(x): int(c) for x, c in zip(levels, counts)})


def first_passage_split(model, rule, x, cap=DEFAULT_CAP, rng=None, **kw):
    """Classify one replication as A1 (small pre-jump state), A2 or no passage."""
    if not x > 0:
        raise ValueError("x must be > 0")
    out = simulate_stopped(model, rule, x_probe=x, cap=cap, rng=rng, **kw)
    if out.mu_x_hit is None or out.capped:
        return Passage.NO_PASSAGE
    if out.mu_x_hit.pre_jump <= insensitivity_h(model, x):
        return Passage.A1
    return Passage.A2


def lindley_path(increments):
    """W_0 = 0, W_n = max(0, W_{n-1} + xi_n)."""
    xi = np.asarray(increments, dtype=float)
    w = np.empty(xi.size + 1)
    w[0] = 0.0
    for i, v in enumerate(xi):
        w[i + 1] = max(0.0, w[i] + v)
    return w


def ladder_times(increments, k):
    """First ``k`` weak decreasing ladder times of the walk (fewer if the path ends)."""
    S = np.concatenate([[0.0], np.cumsum(np.asarray(increments, dtype=float))])
    times, level = [], 0.0
    for n in range(1, S.size):
        if S[n] <= level:
            times.append(n)
            level = S[n]
            if len(times) == k:
                break
    return times


# --- batch drivers -----------------------------------------------------------


def _drive(kernel_call, model, rng, bufsize):
    buf = np.empty(0)
    if kernel_call(buf):
        return
    buf = np.empty(bufsize)
    while True:
        fill_increments(model, rng, buf)
        if kernel_call(buf):
            return


@dataclass
class StoppedStats:
    x_grid: np.ndarray
    h_grid: np.ndarray
    n_requested: int
    n_done: int
    n_capped: int
    sigma_sum: int
    sigma_sumsq: float
    s_sum: float
    s_sumsq: float
    d_sum: float
    d_sumsq: float
    hits_m: np.ndarray
    hits_a1: np.ndarray
    hits_a2: np.ndarray
    hits_s: np.ndarray

    @property
    def n_effective(self):
        return self.n_done

    def _mean_se(self, s, ss):
        n = self.n_done
        if n == 0:
            return math.nan, math.nan
        mean = s / n
        var = max(ss / n - mean * mean, 0.0) * n / max(n - 1, 1)
        return mean, math.sqrt(var / n)

    @property
    def sigma_mean_se(self):
        return self._mean_se(float(self.sigma_sum), self.sigma_sumsq)

    @property
    def s_mean_se(self):
        return self._mean_se(self.s_sum, self.s_sumsq)

    @property
    def wald_mean_se(self):
        """Mean and standard error of S_sigma + m sigma (zero in expectation)."""
        return self._mean_se(self.d_sum, self.d_sumsq)


def run_stopped(model, rule, x_grid, n, seed, *, cap=DEFAULT_CAP, workers=None,
                block_size=DEFAULT_BLOCK, bufsize=DEFAULT_BUFFER):
    grid = np.asarray(x_grid, dtype=float)
    if grid.size and (np.any(np.diff(grid) <= 0) or grid[0] <= 0):
        raise ValueError("x_grid must be strictly increasing and positive")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    flat = flatten(rule)
    hgrid = np.asarray(insensitivity_h(model, grid), dtype=float) if grid.size else grid.copy()
    drift = -model.mean()
    fixed_n = -1 if flat.fixed_n is None else flat.fixed_n
    ladder_k = -1 if flat.ladder_k is None else flat.ladder_k
    has_mu = flat.mu_level is not None
    mu_level = flat.mu_level if has_mu else 0.0
    G = grid.size

    def block(index, size):
        rng = stream(seed, index, WALK_STREAM)
        sig = draw_independent(flat, stream(seed, index, AUX_STREAM), size, cap)
        st = np.zeros(K.STATE_LEN)
        pre = np.zeros(G)
        icnt = np.zeros(3, dtype=np.int64)
        fsum = np.zeros(5)
        hits = [np.zeros(G, dtype=np.int64) for _ in range(4)]
        _drive(lambda buf: K.stopped_kernel(buf, st, sig, fixed_n, ladder_k, has_mu, mu_level,
                                            cap, drift, grid, hgrid, pre, icnt, fsum, *hits),
               model, rng, bufsize)
        return icnt, fsum, hits

    parts = run_blocks(block, block_plan(n, block_size), workers)
    icnt = merge_int([p[0] for p in parts])
    fsum = merge_float([p[1] for p in parts])
    hits = [merge_int([p[2][k] for p in parts]) if G else np.zeros(0, dtype=np.int64) for k in range(4)]
    return StoppedStats(grid, hgrid, int(n), int(icnt[0]), int(icnt[1]), int(icnt[2]),
                        float(fsum[2]), float(fsum[0]), float(fsum[1]), float(fsum[3]), float(fsum[4]), *hits)


@dataclass
class CycleStats:
    levels: np.ndarray
    n_done: int
    n_capped: int
    tau_sum: int
    tau_sumsq: float
    s_tau_sum: float
    n_sum: np.ndarray
    n_sumsq: np.ndarray
    n_tau: np.ndarray
    m_hits: np.ndarray

    @property
    def tau_mean(self):
        return self.tau_sum / self.n_done


def run_cycles(model, level_grid, n, seed, *, cap=DEFAULT_CAP, workers=None,
               block_size=DEFAULT_BLOCK, bufsize=DEFAULT_BUFFER):
    levels = np.asarray(level_grid, dtype=float)
    if levels.size == 0 or np.any(np.diff(levels) <= 0) or levels[0] <= 0:
        raise ValueError("level_grid must be nonempty, strictly increasing and positive")
    G = levels.size

    def block(index, size):
        rng = stream(seed, index, WALK_STREAM)
        st = np.zeros(K.STATE_LEN)
        cur = np.zeros(G, dtype=np.int64)
        icnt = np.zeros(3, dtype=np.int64)
        fsum = np.zeros(2)
        n_sum = np.zeros(G, dtype=np.int64)
        n_sq = np.zeros(G, dtype=np.int64)
        n_tau = np.zeros(G)
        m_hits = np.zeros(G, dtype=np.int64)
        _drive(lambda buf: K.cycle_kernel(buf, st, size, cap, levels, cur, icnt, fsum,
                                          n_sum, n_sq, n_tau, m_hits),
               model, rng, bufsize)
        return icnt, fsum, n_sum, n_sq, n_tau, m_hits

    parts = run_blocks(block, block_plan(n, block_size), workers)
    icnt = merge_int([p[0] for p in parts])
    fsum = merge_float([p[1] for p in parts])
    return CycleStats(levels, int(icnt[0]), int(icnt[1]), int(icnt[2]), float(fsum[0]), float(fsum[1]),
                      merge_int([p[2] for p in parts]), merge_int([p[3] for p in parts]),
                      merge_float([p[4] for p in parts]), merge_int([p[5] for p in parts]))


def run_downcross(model, t_grid, x_barrier, n, seed, *, cap=10**8, workers=None,
                  block_size=DEFAULT_BLOCK, bufsize=DEFAULT_BUFFER):
    """Per-level (count sum, count sum of squares, done, capped)."""
    tg = np.asarray(t_grid, dtype=float)
    if tg.size == 0 or np.any(np.diff(tg) <= 0) or tg[0] <= 0:
        raise ValueError("t_grid must be nonempty, strictly increasing and positive")
    G = tg.size

    def block(index, size):
        rng = stream(seed, index, WALK_STREAM)
        st = np.zeros(K.STATE_LEN)
        cur = np.zeros(G, dtype=np.int64)
        icnt = np.zeros(2, dtype=np.int64)
        c_sum = np.zeros(G, dtype=np.int64)
        c_sq = np.zeros(G, dtype=np.int64)
        _drive(lambda buf: K.downcross_kernel(buf, st, size, cap, tg, float(x_barrier), cur, icnt, c_sum, c_sq),
               model, rng, bufsize)
        return icnt, c_sum, c_sq

    parts = run_blocks(block, block_plan(n, block_size), workers)
    icnt = merge_int([p[0] for p in parts])
    return (merge_int([p[1] for p in parts]), merge_int([p[2] for p in parts]), int(icnt[0]), int(icnt[1]))


@dataclass
class SupremumStats:
    edges: np.ndarray
    n_done: int
    n_capped: int
    exceed: np.ndarray  # exceed[j] = #{M > edges[j]}
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0))


def run_supremum(model, edges, n, floor_l, seed, *, store=0, cap=10**8, workers=None,
                 block_size=DEFAULT_BLOCK, bufsize=DEFAULT_BUFFER):
    """Running maximum until first passage below -floor_l, binned against ``edges``.

    ``store`` keeps the first ``store`` maxima (in replication order).
    """
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing")
    if not floor_l > 0:
        raise ValueError("floor_L must be > 0")
    E = edges.size
    plan = block_plan(n, block_size)

    def block(index, size):
        rng = stream(seed, index, WALK_STREAM)
        st = np.zeros(K.STATE_LEN)
        hist = np.zeros(E + 1, dtype=np.int64)
        start = index * block_size
        keep = np.zeros(max(0, min(size, store - start)))
        icnt = np.zeros(2, dtype=np.int64)
        _drive(lambda buf: K.supremum_kernel(buf, st, size, cap, float(floor_l), edges, hist, keep, icnt),
               model, rng, bufsize)
        return icnt, hist, keep

    parts = run_blocks(block, plan, workers)
    icnt = merge_int([p[0] for p in parts])
    hist = merge_int([p[1] for p in parts])
    exceed = np.cumsum(hist[::-1])[::-1][1:]
    samples = np.concatenate([p[2] for p in parts]) if parts else np.zeros(0)
    return SupremumStats(edges, int(icnt[0]), int(icnt[1]), exceed, samples)


@dataclass
class ExcursionStats:
    n_done: int
    n_floored: int
    n_capped: int
    psi: np.ndarray


def run_excursions(model, n, floor_l, seed, *, cap=10**8, workers=None,
                   block_size=DEFAULT_BLOCK, bufsize=DEFAULT_BUFFER):
    """Excursions from 0 ending at the first strict ascent or below -floor_l."""
    if not floor_l > 0:
        raise ValueError("floor_L must be > 0")

    def block(index, size):
        rng = stream(seed, index, WALK_STREAM)
        st = np.zeros(K.STATE_LEN)
        psi = np.zeros(size)
        icnt = np.zeros(4, dtype=np.int64)
        _drive(lambda buf: K.excursion_kernel(buf, st, size, cap, float(floor_l), psi, icnt),
               model, rng, bufsize)
        return icnt, psi[: icnt[2]]

    parts = run_blocks(block, block_plan(n, block_size), workers)
    icnt = merge_int([p[0] for p in parts])
    psi = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
    return ExcursionStats(int(icnt[0]), int(icnt[1]), int(icnt[3]), psi)


def run_lindley(model, level_grid, n_steps, seed, *, n_batches=32, workers=None, bufsize=DEFAULT_BUFFER):
    """Independent Lindley runs from W_0 = 0, ``n_steps`` each, one per batch.

    Returns per-batch arrays (cross_rate, rb_rate), each of shape (n_batches, G):
    the fraction of steps that downcross each level, directly and in
    conditional-expectation form.
    """
    levels = np.asarray(level_grid, dtype=float)
    code = model.kernel_code
    params = model.kernel_params()
    G = levels.size

    def block(index, _size):
        rng = stream(seed, index, WALK_STREAM)
        st = np.zeros(K.STATE_LEN)
        cross = np.zeros(G, dtype=np.int64)
        rb = np.zeros(G)
        buf = np.empty(bufsize)
        left = int(n_steps)
        while left > 0:
            take = min(left, bufsize)
            view = buf[:take]
            fill_increments(model, rng, view)
            K.lindley_kernel(view, st, code, params, levels, cross, rb)
            left -= take
        return cross / n_steps, rb / n_steps

    parts = run_blocks(block, [(i, 1) for i in range(n_batches)], workers)
    return np.array([p[0] for p in parts]), np.array([p[1] for p in parts])


def drift_of(model):
    return moments(model).m_abs
