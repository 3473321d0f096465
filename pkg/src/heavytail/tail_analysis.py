"""Numerical membership checks for long-tailed, subexponential and S* tails.

Each ratio is a finite-x evaluation of a quantity whose limit characterises
the class.  ``classify_tail`` turns a ratio sequence into a verdict with an
explicit endpoint rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from .distributions import LatticePolyTail, insensitivity_h, log_tail, moments, tail
from .errors import GridTooSmall, NonpositiveX

__all__ = [
    "TailProperty",
    "Trend",
    "TailVerdict",
    "sstar_ratio",
    "sstar_integral",
    "long_tail_ratio",
    "subexp_ratio",
    "two_sum_tail",
    "trend_of",
    "classify_tail",
]

_EPSREL = 1e-11
_LIMIT = 400


class TailProperty(str, Enum):
    LT = "LT"
    SUBEXPONENTIAL = "Subexponential"
    SSTAR = "SStar"

    @classmethod
    def parse(cls, text):
        key = str(text).strip().lower()
        aliases = {"lt": cls.LT, "subexp": cls.SUBEXPONENTIAL, "subexponential": cls.SUBEXPONENTIAL,
                   "sstar": cls.SSTAR, "s*": cls.SSTAR}
        if key not in aliases:
            raise ValueError(f"unknown tail property {text!r}; expected lt, subexp or sstar")
        return aliases[key]


class Trend(str, Enum):
    CONVERGING = "ConvergingToTarget"
    DIVERGING = "Diverging"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class TailVerdict:
    property: TailProperty
    grid: list
    ratios: list
    target: float
    trend: Trend
    tol: float = math.nan
    extras: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "kind": "TailVerdict",
            "property": self.property.value,
            "grid": [float(v) for v in self.grid],
            "ratios": [float(v) for v in self.ratios],
            "target": float(self.target),
            "tol": float(self.tol),
            "trend": self.trend.value,
            **({"extras": self.extras} if self.extras else {}),
        }


def _pieces(lo, hi, cuts):
    pts = sorted({lo, hi, *(c for c in cuts if lo < c < hi)})
    return list(zip(pts[:-1], pts[1:]))


def _geometric_cuts(lo, hi, factor=4.0):
    out = []
    c = max(lo, 1.0) * factor
    while c < hi:
        out.append(c)
        c *= factor
    return out


def _lattice_conv(model, x, upto):
    """sum over the piecewise-constant cells of int_0^upto tail(x-y) tail(y) dy / tail(x)."""
    # tail(y) jumps at integer y, tail(x - y) where x - y is an integer
    ks = np.arange(0, math.floor(max(x, upto)) + 1, dtype=float)
    cuts = np.unique(np.concatenate([[0.0, upto], ks, x - ks]))
    cuts = cuts[(cuts >= 0) & (cuts <= upto)]
    mid = 0.5 * (cuts[:-1] + cuts[1:])
    w = np.diff(cuts)
    vals = np.exp(log_tail(model, x - mid) - log_tail(model, x)) * tail(model, mid)
    return math.fsum(w * vals)


def sstar_integral(model, x, lo=0.0, hi=None):
    """int_lo^hi tail(x - y) tail(y) dy divided by tail(x); default range [0, x/2]."""
    hi = x / 2.0 if hi is None else hi
    if hi <= lo:
        return 0.0
    if isinstance(model, LatticePolyTail):
        if lo != 0.0:
            return _lattice_conv(model, x, hi) - _lattice_conv(model, x, lo)
        return _lattice_conv(model, x, hi)
    lx = log_tail(model, x)

    def f(y):
        return math.exp(log_tail(model, x - y) - lx + log_tail(model, y))

    kinks = [model.support_min, x - model.support_min]
    h = insensitivity_h(model, x)
    cuts = kinks + [h, x - h, x / 2.0] + _geometric_cuts(lo, hi)
    total = []
    for a, b in _pieces(lo, hi, cuts):
        val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=_EPSREL, limit=_LIMIT)
        total.append(val)
    return math.fsum(total)


def sstar_ratio(model, x):
    """int_0^x tail(x-y) tail(y) dy / (2 m_plus tail(x)); tends to 1 on S*."""
    if not x > 0:
        raise NonpositiveX(f"x must be > 0, got {x!r}")
    m_plus = moments(model).m_plus
    if not np.isfinite(log_tail(model, x)):
        return math.inf
    # the integrand is symmetric about x/2
    return 2.0 * sstar_integral(model, x) / (2.0 * m_plus)


def long_tail_ratio(model, x, h):
    """tail(x - h) / tail(x)."""
    if h < 0:
        raise ValueError(f"shift h must be >= 0, got {h!r}")
    if h == 0:
        return 1.0
    return math.exp(log_tail(model, x - h) - log_tail(model, x))


def _gplus_tail(model, t):
    # G+ is the law of max(xi, 0): same tail on t >= 0, certain to exceed t < 0
    return 1.0 if t < 0 else tail(model, t)


def two_sum_tail(model, x):
    """P(phi_1 + phi_2 > x) for i.i.d. phi_i = max(xi_i, 0), with x > 0.

    Uses P = 2 int_[0, x/2] Gbar(x - y) dG(y) + Gbar(x/2)^2, the atom of G+
    at zero contributing F(0) Gbar(x) exactly.  The continuous part is
    integrated over the tail quantile v = tail(y), which keeps the
    integrand bounded and smooth.
    """
    if not x > 0:
        raise NonpositiveX(f"x must be > 0, got {x!r}")
    half = x / 2.0
    if isinstance(model, LatticePolyTail):
        ks = np.arange(0, math.floor(x) + 1)
        g = model.pmf(ks).astype(float)
        g[0] += model.q  # G+ folds the -1 atom into 0
        rest = np.array([_gplus_tail(model, x - k) for k in ks])
        return math.fsum(g * rest) + tail(model, x)
    f0 = 1.0 - tail(model, 0.0)
    v_lo = tail(model, half)
    v_hi = tail(model, 0.0)
    gx = tail(model, x)
    body = 0.0
    if v_hi > v_lo:
        def f(w):
            y = float(model._isf(math.exp(w)))
            return math.exp(w) * _gplus_tail(model, x - y)

        a, b = math.log(v_lo), math.log(v_hi)
        cuts = list(np.linspace(a, b, 9)[1:-1])
        v_h = tail(model, insensitivity_h(model, x))
        if v_lo < v_h < v_hi:
            cuts.append(math.log(v_h))
        body = math.fsum(
            integrate.quad(f, lo, hi, epsabs=0.0, epsrel=_EPSREL, limit=_LIMIT)[0] for lo, hi in _pieces(a, b, cuts)
        )
    return 2.0 * (f0 * gx + body) + tail(model, half) ** 2


def subexp_ratio(model, x):
    """P(phi_1 + phi_2 > x) / P(phi_1 > x); tends to 2 for subexponential G+."""
    if not x > 0:
        raise NonpositiveX(f"x must be > 0, got {x!r}")
    gx = tail(model, x)
    if gx == 0:
        return math.inf
    return two_sum_tail(model, x) / gx


def trend_of(ratios, target, tol):
    """Endpoint rule: converging if the last ratio is closer to the target
    than the first and within ``tol`` (or exactly on target); diverging if it
    is at least ``tol`` away and no closer than the first."""
    r = np.asarray(ratios, dtype=float)
    d = np.where(np.isfinite(r), np.abs(r - target), np.inf)
    first, last = d[0], d[-1]
    if last == 0 or (last < first and last < tol):
        return Trend.CONVERGING
    if last >= tol and last >= first:
        return Trend.DIVERGING
    return Trend.INCONCLUSIVE


def classify_tail(model, grid, tol, prop=TailProperty.SSTAR, *, shift=1.0):
    """Evaluate the property's ratio along ``grid`` and classify the trend.

    ``shift`` is the fixed offset used by the long-tail ratio.
    """
    prop = TailProperty.parse(prop) if not isinstance(prop, TailProperty) else prop
    grid = [float(v) for v in grid]
    if len(grid) < 4:
        raise GridTooSmall(f"classification needs at least 4 grid points, got {len(grid)}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol!r}")
    if prop is TailProperty.LT:
        ratios = [long_tail_ratio(model, x, shift) for x in grid]
        target = 1.0
    elif prop is TailProperty.SUBEXPONENTIAL:
        ratios = [subexp_ratio(model, x) for x in grid]
        target = 2.0
    else:
        ratios = [sstar_ratio(model, x) for x in grid]
        target = 1.0
    extras = {"shift": shift} if prop is TailProperty.LT else {}
    return TailVerdict(prop, grid, ratios, target, trend_of(ratios, target, tol), tol, extras)
