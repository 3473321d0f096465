"""Stopping rules over walk paths.

A rule is a small immutable tree.  ``MinOf`` nests arbitrarily, but since
``min`` is associative every rule flattens to at most one fixed horizon, one
ladder index, one first-passage level and one independent clock.  Independent
clocks compose in closed form: the minimum of independent geometrics is
geometric, and the minimum of independent power laws ``P(s > n) = (n+1)^-a``
is a power law with the summed index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "StoppingRule",
    "FixedN",
    "Tau",
    "LadderK",
    "MuX",
    "IndependentGeometric",
    "IndependentPareto",
    "MinOf",
    "FlatRule",
    "flatten",
    "rule_from_json",
    "rule_to_json",
    "parse_rule",
]


class StoppingRule:
    def __or__(self, other):
        return MinOf(self, other)


@dataclass(frozen=True)
class FixedN(StoppingRule):
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"FixedN needs an integer n >= 0, got {self.n!r}")


@dataclass(frozen=True)
class Tau(StoppingRule):
    """First weak descending time min{n >= 1: S_n <= 0}."""


@dataclass(frozen=True)
class LadderK(StoppingRule):
    """k-th weak decreasing ladder time; ``LadderK(1)`` is ``Tau``."""

    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"LadderK needs an integer k >= 1, got {self.k!r}")


@dataclass(frozen=True)
class MuX(StoppingRule):
    """First passage time min{n: S_n > x}."""

    x: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and self.x >= 0):
            raise ValueError(f"MuX needs a finite level x >= 0, got {self.x!r}")


@dataclass(frozen=True)
class IndependentGeometric(StoppingRule):
    """sigma on {0, 1, ...} with P(sigma = n) = q (1 - q)^n, drawn apart from the walk."""

    success_prob: float

    def __post_init__(self):
        if not 0 < self.success_prob <= 1:
            raise ValueError(f"success_prob must lie in (0, 1], got {self.success_prob!r}")


@dataclass(frozen=True)
class IndependentPareto(StoppingRule):
    """sigma on {1, 2, ...} with P(sigma > n) = (n + 1)^-a; E sigma is infinite for a <= 1."""

    index: float

    def __post_init__(self):
        if not (np.isfinite(self.index) and self.index > 0):
            raise ValueError(f"index must be a positive real, got {self.index!r}")


@dataclass(frozen=True)
class MinOf(StoppingRule):
    first: StoppingRule
    second: StoppingRule


@dataclass(frozen=True)
class FlatRule:
    fixed_n: int | None = None
    ladder_k: int | None = None
    mu_level: float | None = None
    geom_q: float | None = None
    pareto_a: float | None = None

    @property
    def has_independent(self):
        return self.geom_q is not None or self.pareto_a is not None

    @property
    def walk_dependent(self):
        return self.ladder_k is not None or self.mu_level is not None

    @property
    def never_stops(self):
        return not (self.walk_dependent or self.has_independent or self.fixed_n is not None)

    def survival(self, n):
        """P(sigma > n) for rules that do not look at the walk."""
        if self.walk_dependent:
            raise ValueError("survival function needs a rule independent of the walk")
        n = np.asarray(n, dtype=float)
        out = np.ones_like(n)
        if self.fixed_n is not None:
            out = np.where(n >= self.fixed_n, 0.0, out)
        if self.geom_q is not None:
            out = out * np.power(1.0 - self.geom_q, np.floor(n) + 1.0)
        if self.pareto_a is not None:
            out = out * np.power(np.floor(n) + 1.0, -self.pareto_a)
        return out

    def expected_sigma(self):
        """Exact E sigma, or None when sigma depends on the walk."""
        if self.walk_dependent:
            return None
        if self.never_stops:
            return math.inf
        if self.fixed_n is not None:
            if self.fixed_n == 0:
                return 0.0
            return math.fsum(self.survival(np.arange(self.fixed_n)))
        if self.geom_q is None:
            a = self.pareto_a
            return float(special.zeta(a, 1.0)) if a > 1 else math.inf
        if self.pareto_a is None:
            return (1.0 - self.geom_q) / self.geom_q
        # geometric damping makes the series converge fast
        rho = 1.0 - self.geom_q
        if rho == 0:
            return 0.0
        n_terms = int(min(10**7, math.ceil(40.0 / -math.log(rho)) + 1))
        return math.fsum(self.survival(np.arange(n_terms)))


def flatten(rule):
    """Collapse a rule tree into a :class:`FlatRule`."""
    if isinstance(rule, FlatRule):
        return rule
    if isinstance(rule, FixedN):
        return FlatRule(fixed_n=int(rule.n))
    if isinstance(rule, Tau):
        return FlatRule(ladder_k=1)
    if isinstance(rule, LadderK):
        return FlatRule(ladder_k=int(rule.k))
    if isinstance(rule, MuX):
        return FlatRule(mu_level=float(rule.x))
    if isinstance(rule, IndependentGeometric):
        return FlatRule(geom_q=float(rule.success_prob))
    if isinstance(rule, IndependentPareto):
        return FlatRule(pareto_a=float(rule.index))
    if isinstance(rule, MinOf):
        a, b = flatten(rule.first), flatten(rule.second)

        def lo(u, v):
            if u is None:
                return v
            if v is None:
                return u
            return min(u, v)

        geom = None
        if a.geom_q is not None or b.geom_q is not None:
            geom = 1.0 - (1.0 - (a.geom_q or 0.0)) * (1.0 - (b.geom_q or 0.0))
        par = None
        if a.pareto_a is not None or b.pareto_a is not None:
            par = (a.pareto_a or 0.0) + (b.pareto_a or 0.0)
        return FlatRule(
            fixed_n=lo(a.fixed_n, b.fixed_n),
            ladder_k=lo(a.ladder_k, b.ladder_k),
            mu_level=lo(a.mu_level, b.mu_level),
            geom_q=geom,
            pareto_a=par,
        )
    raise TypeError(f"not a stopping rule: {rule!r}")


def draw_independent(flat, rng, size, cap):
    """Pre-draw the independent clock for ``size`` replications (-1 if none).

    Values above ``cap`` are clipped to ``cap + 1``; such replications are
    capped by the engine anyway.
    """
    if not flat.has_independent:
        return np.full(size, -1, dtype=np.int64)
    limit = float(cap) + 1.0
    sig = np.full(size, limit)
    if flat.geom_q is not None:
        if flat.geom_q >= 1:
            g = np.zeros(size)
        else:
            g = rng.geometric(flat.geom_q, size).astype(float) - 1.0
        sig = np.minimum(sig, g)
    if flat.pareto_a is not None:
        w = 1.0 - rng.random(size)
        with np.errstate(over="ignore"):
            p = np.floor(np.power(w, -1.0 / flat.pareto_a))
        sig = np.minimum(sig, p)
    return sig.astype(np.int64)


# --- serialisation ------------------------------------------------------------


def rule_to_json(rule):
    if isinstance(rule, FixedN):
        return {"kind": "fixed", "n": int(rule.n)}
    if isinstance(rule, Tau):
        return {"kind": "tau"}
    if isinstance(rule, LadderK):
        return {"kind": "ladder", "k": int(rule.k)}
    if isinstance(rule, MuX):
        return {"kind": "mu", "x": float(rule.x)}
    if isinstance(rule, IndependentGeometric):
        return {"kind": "geometric", "success_prob": float(rule.success_prob)}
    if isinstance(rule, IndependentPareto):
        return {"kind": "pareto", "index": float(rule.index)}
    if isinstance(rule, MinOf):
        return {"kind": "min", "rules": [rule_to_json(rule.first), rule_to_json(rule.second)]}
    raise TypeError(f"not a stopping rule: {rule!r}")


def rule_from_json(obj):
    if isinstance(obj, str):
        return parse_rule(obj)
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("rule must be a string or an object with a 'kind' key")
    kind = obj["kind"]
    if kind == "fixed":
        return FixedN(int(obj["n"]))
    if kind == "tau":
        return Tau()
    if kind == "ladder":
        return LadderK(int(obj["k"]))
    if kind == "mu":
        return MuX(float(obj["x"]))
    if kind == "geometric":
        return IndependentGeometric(float(obj["success_prob"]))
    if kind == "pareto":
        return IndependentPareto(float(obj["index"]))
    if kind == "min":
        parts = [rule_from_json(r) for r in obj["rules"]]
        if len(parts) < 2:
            raise ValueError("'min' needs at least two rules")
        out = parts[0]
        for p in parts[1:]:
            out = MinOf(out, p)
        return out
    raise ValueError(f"unknown rule kind {kind!r}")


def parse_rule(text):
    """Parse the compact CLI form: ``tau``, ``fixed:N``, ``min:N``, ``ladder:K``,
    ``mu:X``, ``geometric:Q``, ``pareto:A``.  ``min:N`` means min(tau, N)."""
    text = text.strip().lower()
    head, _, arg = text.partition(":")
    if head == "tau" and not arg:
        return Tau()
    if not arg:
        raise ValueError(f"cannot parse rule {text!r}")
    if head == "fixed":
        return FixedN(int(arg))
    if head == "min":
        return MinOf(Tau(), FixedN(int(arg)))
    if head == "ladder":
        return LadderK(int(arg))
    if head == "mu":
        return MuX(float(arg))
    if head == "geometric":
        return IndependentGeometric(float(arg))
    if head == "pareto":
        return IndependentPareto(float(arg))
    raise ValueError(f"cannot parse rule {text!r}")
