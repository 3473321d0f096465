"""Exact first-passage probabilities for the skip-free lattice family.

Because the walk only moves down one unit at a time, the chance of dropping
from level s to s - 1 before exceeding x depends only on the headroom
d = x - s.  Writing g(d) for it, a first-step analysis gives

    g(d) = q / (1 - sum_{k=0}^{d} p_k g(d-1) ... g(d-k))

which fills the whole table in O(x^2) without a linear solve.  Horizon
limited rules use a forward pass over (time, level) in which every jump
that clears x is absorbed at once through the exact tail mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import LatticePolyTail, tail
from .errors import StateSpaceTooLarge
from .rules import FixedN, MinOf, Tau, rule_to_json

__all__ = [
    "MAX_LEVEL",
    "LatticeOracleResult",
    "descent_table",
    "exact_lattice_oracle",
    "lattice_downcrossings",
]

MAX_LEVEL = 10_000


@dataclass(frozen=True)
class LatticeOracleResult:
    x: int
    probability: float
    rule: object
    expected_sigma: float
    tail_x: float

    @property
    def ratio(self):
        return self.probability / self.tail_x

    def to_json(self):
        return {
            "kind": "LatticeOracleResult",
            "x": self.x,
            "probability": self.probability,
            "rule": rule_to_json(self.rule),
            "expected_sigma": self.expected_sigma,
            "tail_x": self.tail_x,
            "ratio": self.ratio,
        }


def descent_table(model, depth):
    """g[d] for d = 0..depth-1: P(hit s-1 before exceeding s+d), from s."""
    q = model.q
    p = model.pmf(np.arange(0, depth)).astype(float)
    g = np.empty(depth)
    for d in range(depth):
        # products g(d-1), g(d-1) g(d-2), ... for jumps of 1..d
        prods = np.cumprod(g[d - 1 :: -1]) if d else np.empty(0)
        stay = p[0] + float(np.dot(p[1 : d + 1], prods))
        g[d] = q / (1.0 - stay)
    return g


def _tau_probability(model, x):
    g = descent_table(model, x)
    # start at k in 1..x: fail iff the walk steps down k times, i.e. g(x-1) ... g(x-k)
    down = np.cumprod(g[::-1])
    p = model.pmf(np.arange(1, x + 1)).astype(float)
    return math.fsum(p * (1.0 - down)) + tail(model, float(x))


def _advance(model, dist, lo, hi):
    """One step of the level distribution on lo..hi; mass leaving the range is dropped."""
    size = hi - lo + 1
    kernel = np.concatenate([[model.q], model.pmf(np.arange(0, size)).astype(float)])
    full = np.convolve(dist, kernel)
    # full[i] sits at level lo + i - 1
    return full[1 : size + 1]


def _horizon_probability(model, x, steps, absorb_at_zero):
    """P(max_{n <= steps} S_n > x), optionally stopped at the first n >= 1 with S_n <= 0."""
    if steps == 0:
        return 0.0
    lo = 1 if absorb_at_zero else -steps
    levels = np.arange(lo, x + 1, dtype=float)
    exceed = tail(model, x - levels)
    # time 1 from S_0 = 0
    success = [tail(model, float(x))]
    dist = np.where(levels >= -1, model.pmf(levels.astype(np.int64)), 0.0)
    for _ in range(steps - 1):
        success.append(float(np.dot(dist, exceed)))
        dist = _advance(model, dist, lo, x)
    return math.fsum(success)


def _expected_min_tau(model, steps):
    """E min(tau, steps) = sum_{n < steps} P(tau > n).

    tau = k >= 2 needs S_{k-1} = 1 followed by a down step, and a path above
    level ``steps`` cannot get back to 1 in time, so levels 1..steps suffice.
    """
    if steps == 0:
        return 0.0
    dist = model.pmf(np.arange(1, steps + 1)).astype(float)
    survive = [1.0, 1.0 - model.q - float(model.pmf(0))]
    for _ in range(steps - 2):
        survive.append(survive[-1] - model.q * dist[0])
        dist = _advance(model, dist, 1, steps)
    return math.fsum(survive[:steps])


def exact_lattice_oracle(model, rule, x):
    """Exact P(max_{n <= sigma} S_n > x) for Tau, FixedN(N) and min(Tau, N)."""
    if not isinstance(model, LatticePolyTail):
        raise TypeError("the exact oracle needs a LatticePolyTail model")
    if int(x) != x or x < 1:
        raise ValueError(f"x must be a positive integer, got {x!r}")
    x = int(x)
    if x > MAX_LEVEL:
        raise StateSpaceTooLarge(f"x={x} exceeds the oracle limit {MAX_LEVEL}")
    fx = tail(model, float(x))
    if model.q == 1:
        # every step is -1: tau = 1 and the maximum is S_0 = 0
        esig = float(rule.n) if isinstance(rule, FixedN) else 1.0
        if isinstance(rule, MinOf):
            fixed = rule.first if isinstance(rule.first, FixedN) else rule.second
            esig = float(min(1, getattr(fixed, "n", 1)))
        return LatticeOracleResult(x, 0.0, rule, esig, fx)

    if isinstance(rule, Tau):
        prob = _tau_probability(model, x)
        esig = model.q / -model.mean()
    elif isinstance(rule, FixedN):
        prob = _horizon_probability(model, x, int(rule.n), absorb_at_zero=False)
        esig = float(rule.n)
    elif isinstance(rule, MinOf) and {type(rule.first), type(rule.second)} == {Tau, FixedN}:
        fixed = rule.first if isinstance(rule.first, FixedN) else rule.second
        prob = _horizon_probability(model, x, int(fixed.n), absorb_at_zero=True)
        esig = _expected_min_tau(model, int(fixed.n))
    else:
        raise ValueError(f"oracle supports Tau, FixedN and min(Tau, FixedN); got {rule!r}")
    return LatticeOracleResult(x, min(1.0, max(0.0, prob)), rule, float(esig), fx)


def lattice_downcrossings(model, barrier):
    """Expected downcrossings of any integer level -t before the walk first
    reaches -t - barrier (integer barrier >= 1).

    Every visit to -t from above is followed either by a climb above -t,
    which forces another visit, or by a run down to the barrier; so the
    count is geometric with success chance prod_{d < barrier} g(d).
    """
    barrier = int(barrier)
    if barrier < 1:
        raise ValueError("barrier must be a positive integer")
    if barrier > MAX_LEVEL:
        raise StateSpaceTooLarge(f"barrier={barrier} exceeds the oracle limit {MAX_LEVEL}")
    g = descent_table(model, barrier)
    return float(1.0 / np.prod(g))
