"""Increment laws for the random walk.

Every family is a nonnegative base law ``X`` shifted down by ``b`` (the
lattice family has its own support ``{-1, 0, 1, ...}``).  Tails are exact
closed forms; sampling is by inverse tail, so a uniform draw of 0 maps to
the infimum of the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import ClassVar

import numpy as np
from scipy import integrate, special

from .errors import DriftNotNegative, InfiniteMean, NegativeArgument

__all__ = [
    "Family",
    "IncrementModel",
    "ParetoShift",
    "WeibullShift",
    "LognormalShift",
    "ExponentialShift",
    "LatticePolyTail",
    "MomentSummary",
    "tail",
    "log_tail",
    "cdf",
    "sample",
    "sample_array",
    "moments",
    "second_tail",
    "insensitivity_h",
    "model_from_json",
    "model_to_json",
]


class Family(str, Enum):
    PARETO = "pareto_shift"
    WEIBULL = "weibull_shift"
    LOGNORMAL = "lognormal_shift"
    EXPONENTIAL = "exponential_shift"
    LATTICE = "lattice_poly_tail"


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    m_abs: float
    m_plus: float
    m_minus: float


@dataclass(frozen=True)
class IncrementModel:
    """Base class; concrete families are frozen dataclasses below.

    ``negative_drift=True`` (the default) enforces ``E xi < 0`` at
    construction.  The unchecked mode exists for positive-drift scenarios.
    """

    family: ClassVar[Family]
    kernel_code: ClassVar[int]
    # exponent of the canonical insensitivity function h(x) = min(x/2, x**g)
    h_exponent: ClassVar[float] = 0.5

    def __post_init__(self):
        self._validate()
        if self.negative_drift:
            mean = self.mean()
            if not mean < 0:
                raise DriftNotNegative(
                    f"{type(self).__name__} has mean {mean:.6g} >= 0; "
                    "pass negative_drift=False for the unchecked mode"
                )

    # --- per-family hooks -------------------------------------------------
    def _validate(self):
        raise NotImplementedError

    def _tail(self, x):
        raise NotImplementedError

    def _log_tail(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self._tail(x))

    def _isf(self, v):
        """Inverse tail: smallest y with P(xi > y) <= v, for v in (0, 1]."""
        raise NotImplementedError

    def mean(self):
        raise NotImplementedError

    def _excess(self, x):
        """E[(xi - x)^+] = integral of the tail over (x, inf)."""
        raise NotImplementedError

    def _shortfall(self):
        """E[(-xi)^+] = m^-."""
        raise NotImplementedError

    def kernel_params(self):
        raise NotImplementedError

    # ---------------------------------------------------------------------
    @property
    def support_min(self):
        raise NotImplementedError

    def base(self):
        """The unshifted nonnegative law (b = 0), in unchecked mode."""
        return replace(self, b=0.0, negative_drift=False)

    def shifted(self, c):
        """Model of ``xi + c``."""
        return replace(self, b=self.b - c, negative_drift=False)

    def params(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "negative_drift"}


def _finite_positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a finite positive real, got {value!r}")


@dataclass(frozen=True)
class ParetoShift(IncrementModel):
    alpha: float
    xm: float
    b: float = 0.0
    negative_drift: bool = field(default=True, compare=True)

    family: ClassVar[Family] = Family.PARETO
    kernel_code: ClassVar[int] = 0

    def _validate(self):
        _finite_positive("alpha", self.alpha)
        _finite_positive("xm", self.xm)
        if not (np.isfinite(self.b) and self.b >= 0):
            raise ValueError(f"b must be >= 0, got {self.b!r}")
        if self.alpha <= 1:
            raise InfiniteMean(f"Pareto tail index alpha={self.alpha} <= 1 has infinite mean")

    @property
    def support_min(self):
        return self.xm - self.b

    def _tail(self, x):
        y = np.asarray(x, dtype=float) + self.b
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.power(np.maximum(y, self.xm) / self.xm, -self.alpha)
        return np.where(y >= self.xm, t, 1.0)

    def _log_tail(self, x):
        y = np.asarray(x, dtype=float) + self.b
        with np.errstate(divide="ignore", invalid="ignore"):
            lt = -self.alpha * np.log(np.maximum(y, self.xm) / self.xm)
        return np.where(y >= self.xm, lt, 0.0)

    def _isf(self, v):
        return self.xm * np.power(v, -1.0 / self.alpha) - self.b

    def mean(self):
        return self.alpha * self.xm / (self.alpha - 1.0) - self.b

    def _excess(self, x):
        x = float(x)
        a, xm = self.alpha, self.xm
        if x + self.b >= xm:
            return xm**a * (x + self.b) ** (1.0 - a) / (a - 1.0)
        return (xm - self.b - x) + xm / (a - 1.0)

    def _shortfall(self):
        a, xm, b = self.alpha, self.xm, self.b
        if b <= xm:
            return 0.0
        return (b - xm) - xm**a * (xm ** (1.0 - a) - b ** (1.0 - a)) / (a - 1.0)

    def kernel_params(self):
        return np.array([self.alpha, self.xm, self.b, 0.0])


@dataclass(frozen=True)
class WeibullShift(IncrementModel):
    beta: float
    scale: float = 1.0
    b: float = 0.0
    negative_drift: bool = True

    family: ClassVar[Family] = Family.WEIBULL
    kernel_code: ClassVar[int] = 1

    @property
    def h_exponent(self):
        # F(x - x**g)/F(x) -> 1 needs g < 1 - beta
        return 0.5 * (1.0 - self.beta)

    def _validate(self):
        _finite_positive("scale", self.scale)
        if not 0 < self.beta < 1:
            raise ValueError(f"Weibull shape beta must lie in (0, 1), got {self.beta!r}")
        if not (np.isfinite(self.b) and self.b >= 0):
            raise ValueError(f"b must be >= 0, got {self.b!r}")

    @property
    def support_min(self):
        return -self.b

    def _log_tail(self, x):
        y = np.maximum(np.asarray(x, dtype=float) + self.b, 0.0)
        return -np.power(y / self.scale, self.beta)

    def _tail(self, x):
        return np.exp(self._log_tail(x))

    def _isf(self, v):
        return self.scale * np.power(-np.log(v), 1.0 / self.beta) - self.b

    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.beta) - self.b

    def _excess(self, x):
        c = float(x) + self.b
        mu = self.scale * math.gamma(1.0 + 1.0 / self.beta)
        if c <= 0:
            return mu - c
        return mu * special.gammaincc(1.0 / self.beta, (c / self.scale) ** self.beta)

    def _shortfall(self):
        b = self.b
        if b <= 0:
            return 0.0
        mu = self.scale * math.gamma(1.0 + 1.0 / self.beta)
        return b - mu * special.gammainc(1.0 / self.beta, (b / self.scale) ** self.beta)

    def kernel_params(self):
        return np.array([self.beta, self.scale, self.b, 0.0])


@dataclass(frozen=True)
class LognormalShift(IncrementModel):
    mu_log: float
    sigma_log: float
    b: float = 0.0
    negative_drift: bool = True

    family: ClassVar[Family] = Family.LOGNORMAL
    kernel_code: ClassVar[int] = 2

    def _validate(self):
        _finite_positive("sigma_log", self.sigma_log)
        if not np.isfinite(self.mu_log):
            raise ValueError("mu_log must be finite")
        if not (np.isfinite(self.b) and self.b >= 0):
            raise ValueError(f"b must be >= 0, got {self.b!r}")

    @property
    def support_min(self):
        return -self.b

    def _z(self, x):
        y = np.asarray(x, dtype=float) + self.b
        with np.errstate(divide="ignore", invalid="ignore"):
            return (np.log(np.maximum(y, 0.0)) - self.mu_log) / self.sigma_log

    def _tail(self, x):
        z = self._z(x)
        return np.where(np.isneginf(z), 1.0, 0.5 * special.erfc(z / math.sqrt(2.0)))

    def _log_tail(self, x):
        z = self._z(x)
        return np.where(np.isneginf(z), 0.0, special.log_ndtr(-z))

    def _isf(self, v):
        return np.exp(self.mu_log - self.sigma_log * special.ndtri(v)) - self.b

    def mean(self):
        return math.exp(self.mu_log + 0.5 * self.sigma_log**2) - self.b

    def _excess(self, x):
        c = float(x) + self.b
        if c <= 0:
            return self.mean() - float(x)
        mu, s = self.mu_log, self.sigma_log
        u0 = math.log(c)

        def integrand(u):
            return math.exp(special.log_ndtr(-(u - mu) / s) + u)

        # substitute t + b = e^u; the integrand then has a Gaussian tail
        split = max(u0, mu + s * s) + 4.0 * s
        val = 0.0
        if split > u0:
            val += integrate.quad(integrand, u0, split, epsabs=0.0, epsrel=1e-10, limit=200)[0]
        val += integrate.quad(integrand, max(u0, split), np.inf, epsabs=0.0, epsrel=1e-10, limit=200)[0]
        return val

    def _shortfall(self):
        b = self.b
        if b <= 0:
            return 0.0
        mu, s = self.mu_log, self.sigma_log
        d1 = (mu + s * s - math.log(b)) / s
        d2 = d1 - s
        return b * special.ndtr(-d2) - math.exp(mu + 0.5 * s * s) * special.ndtr(-d1)

    def kernel_params(self):
        return np.array([self.mu_log, self.sigma_log, self.b, 0.0])


@dataclass(frozen=True)
class ExponentialShift(IncrementModel):
    rate: float
    b: float = 0.0
    negative_drift: bool = True

    family: ClassVar[Family] = Family.EXPONENTIAL
    kernel_code: ClassVar[int] = 3

    def _validate(self):
        _finite_positive("rate", self.rate)
        if not (np.isfinite(self.b) and self.b >= 0):
            raise ValueError(f"b must be >= 0, got {self.b!r}")

    @property
    def support_min(self):
        return -self.b

    def _log_tail(self, x):
        y = np.asarray(x, dtype=float) + self.b
        return np.where(y > 0, -self.rate * y, 0.0)

    def _tail(self, x):
        return np.exp(self._log_tail(x))

    def _isf(self, v):
        return -np.log(v) / self.rate - self.b

    def mean(self):
        return 1.0 / self.rate - self.b

    def _excess(self, x):
        c = float(x) + self.b
        if c <= 0:
            return 1.0 / self.rate - c
        return math.exp(-self.rate * c) / self.rate

    def _shortfall(self):
        b = self.b
        return b - (1.0 - math.exp(-self.rate * b)) / self.rate if b > 0 else 0.0

    def kernel_params(self):
        return np.array([self.rate, self.b, 0.0, 0.0])


# table length for the lattice inverse-tail sampler; draws beyond it use an
# exact rejection step against a continuous power-law envelope
_LATTICE_TABLE = 1 << 16


@dataclass(frozen=True)
class LatticePolyTail(IncrementModel):
    """Skip-free-downward lattice law on ``{-1, 0, 1, 2, ...}``.

    ``P(xi = -1) = q`` and ``P(xi = k) = (1 - q) (k + 2)^-r / (zeta(r) - 1)``
    for ``k >= 0``.  ``q = 1`` is allowed as a degenerate control.
    """

    q: float
    r: float
    negative_drift: bool = True

    family: ClassVar[Family] = Family.LATTICE
    kernel_code: ClassVar[int] = 4

    def _validate(self):
        if not 0 < self.q <= 1:
            raise ValueError(f"down-probability q must lie in (0, 1], got {self.q!r}")
        if not (np.isfinite(self.r) and self.r > 1):
            raise ValueError(f"tail exponent r must be > 1, got {self.r!r}")
        if self.r <= 2 and self.q < 1:
            raise InfiniteMean(f"lattice tail exponent r={self.r} <= 2 has infinite mean")

    @property
    def b(self):
        return 0.0

    def base(self):
        raise ValueError("the lattice family has no shifted base law")

    def shifted(self, c):
        raise ValueError("the lattice family cannot be shifted")

    @property
    def support_min(self):
        return -1.0

    @property
    def _c(self):
        return (1.0 - self.q) / (special.zeta(self.r, 2.0))

    def pmf(self, k):
        """P(xi = k) for integer k."""
        k = np.asarray(k)
        with np.errstate(divide="ignore", invalid="ignore"):
            up = self._c * np.power(np.maximum(k, 0) + 2.0, -self.r)
        return np.where(k == -1, self.q, np.where(k >= 0, up, 0.0))

    def tail_from(self, k):
        """P(xi >= k) for integer k >= 0, via the Hurwitz zeta function."""
        k = np.asarray(k, dtype=float)
        return self._c * special.zeta(self.r, k + 2.0)

    def _tail(self, x):
        x = np.asarray(x, dtype=float)
        k0 = np.floor(np.maximum(x, 0.0)) + 1.0
        with np.errstate(invalid="ignore"):
            up = self._c * special.zeta(self.r, np.where(np.isfinite(k0), k0, 1.0) + 2.0)
        up = np.where(np.isposinf(x), 0.0, up)
        return np.where(x < -1, 1.0, np.where(x < 0, 1.0 - self.q, up))

    def mean(self):
        return -self.q + self._excess_pos()

    def _excess_pos(self):
        if self.q == 1:
            return 0.0
        r = self.r
        return self._c * (special.zeta(r - 1.0, 2.0) - 2.0 * special.zeta(r, 2.0))

    def _excess(self, x):
        x = float(x)
        if x < -1:
            return self.mean() - x
        if x < 0:
            return self._excess_pos() - x * (1.0 - self.q)
        if self.q == 1:
            return 0.0
        k = math.floor(x)
        r = self.r
        return self._c * (special.zeta(r - 1.0, k + 3.0) - (2.0 + x) * special.zeta(r, k + 3.0))

    def _shortfall(self):
        return self.q

    @property
    def _tail_table(self):
        # T[i] = P(xi > i - 1) for i = 0..L-1, i.e. support values -1..L-2
        cached = self.__dict__.get("_tt")
        if cached is None:
            ks = np.arange(-1, _LATTICE_TABLE - 1)
            cached = self._tail(ks.astype(float))
            cached = np.minimum.accumulate(cached)
            object.__setattr__(self, "_tt", cached)
        return cached

    def _isf(self, v):
        return self._isf_with_rng(v, None)

    def _isf_with_rng(self, v, rng):
        v = np.asarray(v, dtype=float)
        table = self._tail_table
        idx = np.searchsorted(-table, -v, side="left")
        out = (idx - 1).astype(float)
        beyond = idx >= table.size
        if np.any(beyond):
            if rng is None:
                rng = np.random.default_rng(0)
            out[beyond] = self._sample_far_tail(rng, int(beyond.sum()))
        return out

    def _sample_far_tail(self, rng, count):
        # pmf proportional to j^-r on j >= j0 (j = k + 2), rejection from the
        # discretised continuous power law; acceptance probability >= (1+1/j0)^-r
        r = self.r
        j0 = float(_LATTICE_TABLE + 1)

        def cell(j):
            return (j ** (1.0 - r) - (j + 1.0) ** (1.0 - r)) / (r - 1.0)

        ref = j0**-r / cell(j0)
        out = np.empty(count)
        filled = 0
        while filled < count:
            w = 1.0 - rng.random(count - filled)
            j = np.floor(j0 * np.power(w, -1.0 / (r - 1.0)))
            accept = rng.random(j.size) * ref <= j**-r / cell(j)
            got = j[accept]
            out[filled : filled + got.size] = got - 2.0
            filled += got.size
        return out

    def kernel_params(self):
        return np.array([self.q, self.r, float(self.pmf(0)), 0.0])


_FAMILIES = {cls.family: cls for cls in (ParetoShift, WeibullShift, LognormalShift, ExponentialShift, LatticePolyTail)}


# --- module-level operations ----------------------------------------------


def _scalar_or_array(value, like):
    return float(value) if np.ndim(like) == 0 else value


def tail(model, x):
    """P(xi > x); total on the extended reals."""
    return _scalar_or_array(model._tail(x), x)


def log_tail(model, x):
    return _scalar_or_array(model._log_tail(x), x)


def cdf(model, x):
    return _scalar_or_array(1.0 - model._tail(x), x)


def sample_array(model, rng, size):
    """``size`` i.i.d. increments by inverse tail from ``rng`` (a numpy Generator)."""
    v = 1.0 - rng.random(size)
    if isinstance(model, LatticePolyTail):
        return model._isf_with_rng(v, rng)
    return model._isf(v)


def fill_increments(model, rng, out):
    """In-place variant of :func:`sample_array` used by the simulation engine."""
    rng.random(out=out)
    np.subtract(1.0, out, out=out)
    if isinstance(model, ParetoShift):
        np.power(out, -1.0 / model.alpha, out=out)
        out *= model.xm
        out -= model.b
    elif isinstance(model, ExponentialShift):
        np.log(out, out=out)
        out *= -1.0 / model.rate
        out -= model.b
    elif isinstance(model, LatticePolyTail):
        out[:] = model._isf_with_rng(out, rng)
    else:
        out[:] = model._isf(out)
    return out


def sample(model, rng):
    """One increment; advances ``rng`` deterministically."""
    return float(sample_array(model, rng, 1)[0])


def moments(model):
    mean = float(model.mean())
    m_plus = float(model._excess(0.0))
    m_minus = float(model._shortfall())
    vals = (mean, m_plus, m_minus)
    if not all(np.isfinite(v) for v in vals):
        raise InfiniteMean(f"non-finite moments for {model!r}")
    return MomentSummary(mean=mean, m_abs=-mean, m_plus=m_plus, m_minus=m_minus)


def second_tail(model, x):
    """Integrated tail min(1, int_x^inf P(xi > t) dt)."""
    if np.ndim(x):
        return np.array([second_tail(model, xi) for xi in np.ravel(x)]).reshape(np.shape(x))
    x = float(x)
    if x == np.inf:
        return 0.0
    if x == -np.inf:
        return 1.0
    return min(1.0, float(model._excess(x)))


def insensitivity_h(model, x):
    """h(x) = min(x/2, x**g) with the family's exponent g.

    The choice satisfies h(x) <= x/2, h -> inf, h(x+t) <= h(x) + t and,
    for long-tailed families, tail(x - h(x)) / tail(x) -> 1.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise NegativeArgument(f"h is defined on x >= 0, got {x!r}")
    h = np.minimum(arr / 2.0, np.power(arr, model.h_exponent))
    return _scalar_or_array(h, x)


# --- JSON schema ------------------------------------------------------------

_JSON_KEYS = {
    Family.PARETO: ("alpha", "xm", "b"),
    Family.WEIBULL: ("beta", "scale", "b"),
    Family.LOGNORMAL: ("mu_log", "sigma_log", "b"),
    Family.EXPONENTIAL: ("rate", "b"),
    Family.LATTICE: ("q", "r"),
}


def model_from_json(obj):
    """Build a model from ``{"family": "pareto_shift", "alpha": 2.5, ...}``."""
    if not isinstance(obj, dict):
        raise ValueError("model spec must be a JSON object")
    try:
        family = Family(obj.get("family"))
    except ValueError:
        raise ValueError(f"unknown family {obj.get('family')!r}; expected one of {[f.value for f in Family]}") from None
    keys = _JSON_KEYS[family]
    unknown = set(obj) - set(keys) - {"family", "negative_drift"}
    if unknown:
        raise ValueError(f"unknown keys for {family.value}: {sorted(unknown)}")
    kwargs = {}
    for k in keys:
        if k in obj:
            kwargs[k] = float(obj[k])
        elif k != "b":
            raise ValueError(f"{family.value} requires key {k!r}")
    kwargs["negative_drift"] = bool(obj.get("negative_drift", True))
    return _FAMILIES[family](**kwargs)


def model_to_json(model):
    out = {"family": model.family.value}
    for k in _JSON_KEYS[model.family]:
        out[k] = float(getattr(model, k))
    if not model.negative_drift:
        out["negative_drift"] = False
    return out
