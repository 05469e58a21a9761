"""Log-domain special functions and a signed log-domain scalar.

Everything that can overflow a double at moderate ``N`` (sphere areas,
polynomial normalizations like ``N**((N+2)/2) / 2**(N-1)``) is handled as a
logarithm here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2.0 * math.pi)


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _check_positive(name, x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} requires finite positive arguments, got {x!r}")
    return arr


def log_gamma(x):
    """ln Gamma(x) for positive real ``x`` (scalar or array)."""
    arr = _check_positive("log_gamma", x)
    if arr.ndim == 0:
        return math.lgamma(float(arr))
    return special.gammaln(arr)


def stirling_log_gamma(z):
    """Stirling series ``(z-1/2) ln z - z + ln(2 pi)/2 + 1/(12 z)``."""
    z = _check_positive("stirling_log_gamma", z)
    out = (z - 0.5) * np.log(z) - z + 0.5 * LOG_2PI + 1.0 / (12.0 * z)
    return float(out) if out.ndim == 0 else out


def log_beta(a, b):
    """ln B(a, b) through the Gamma function."""
    _check_positive("log_beta", a)
    _check_positive("log_beta", b)
    return log_gamma(a) + log_gamma(b) - log_gamma(np.add(a, b))


def sphere_log_area(n):
    """ln |S^{n-1}| for the unit sphere in R^n, i.e. ln(2 pi^{n/2} / Gamma(n/2))."""
    arr = np.asarray(n)
    if np.any(arr < 1):
        raise DomainError(f"sphere_log_area needs n >= 1, got {n!r}")
    return math.log(2.0) + 0.5 * arr * LOG_PI - log_gamma(0.5 * arr)


class GammaRatio(NamedTuple):
    """ln[Gamma(N/2) / Gamma((N+m)/2)] together with its power-law asymptotic."""

    exact: float
    asymptotic: float

    @property
    def residual(self) -> float:
        """The relative correction eps_N in ``ratio = (1 + eps_N) (N/2)^{-m/2}``."""
        return math.expm1(self.exact - self.asymptotic)


def gamma_ratio_log(N, m) -> GammaRatio:
    if N < 1 or N + m <= 0:
        raise DomainError(f"gamma_ratio_log needs N >= 1 and N + m > 0, got N={N}, m={m}")
    exact = log_gamma(0.5 * N) - log_gamma(0.5 * (N + m))
    asymptotic = -0.5 * m * math.log(0.5 * N)
    return GammaRatio(float(exact), asymptotic)


@dataclass(frozen=True)
class LogScalar:
    """A real number stored as ``sign * exp(log_magnitude)``.

    ``sign == 0`` encodes an exact zero; the magnitude is then ignored.
    """

    log_magnitude: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if self.sign != 0 and math.isnan(self.log_magnitude):
            raise ValueError("log_magnitude is NaN")
        if self.sign != 0 and self.log_magnitude == -math.inf:
            object.__setattr__(self, "sign", 0)
        if self.sign == 0:
            object.__setattr__(self, "log_magnitude", -math.inf)

    @classmethod
    def zero(cls) -> LogScalar:
        return cls(-math.inf, 0)

    @classmethod
    def from_float(cls, x: float) -> LogScalar:
        if x == 0:
            return cls.zero()
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    @classmethod
    def from_log(cls, log_value: float) -> LogScalar:
        return cls(float(log_value), 1)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def log(self) -> float:
        """Natural log of a non-negative value (``-inf`` for zero)."""
        if self.sign < 0:
            raise DomainError("log of a negative LogScalar")
        return self.log_magnitude

    def __neg__(self) -> LogScalar:
        return LogScalar(self.log_magnitude, -self.sign)

    def __mul__(self, other) -> LogScalar:
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return LogScalar.zero()
        return LogScalar(self.log_magnitude + other.log_magnitude, self.sign * other.sign)

    __rmul__ = __mul__

    def __truediv__(self, other) -> LogScalar:
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogScalar")
        if self.sign == 0:
            return LogScalar.zero()
        return LogScalar(self.log_magnitude - other.log_magnitude, self.sign * other.sign)

    def __rtruediv__(self, other) -> LogScalar:
        return _coerce(other) / self

    def __pow__(self, p: float) -> LogScalar:
        if self.sign < 0:
            raise DomainError("real power of a negative LogScalar")
        if self.sign == 0:
            return LogScalar.zero() if p > 0 else LogScalar(0.0, 1)
        return LogScalar(p * self.log_magnitude, 1)

    def __add__(self, other) -> LogScalar:
        other = _coerce(other)
        if other.sign == 0:
            return self
        if self.sign == 0:
            return other
        # order operands by magnitude so that a + b and b + a run the same arithmetic
        hi, lo = (self, other) if self.log_magnitude >= other.log_magnitude else (other, self)
        diff = lo.log_magnitude - hi.log_magnitude
        if hi.sign == lo.sign:
            return LogScalar(hi.log_magnitude + math.log1p(math.exp(diff)), hi.sign)
        if diff == 0.0:
            return LogScalar.zero()
        return LogScalar(hi.log_magnitude + math.log(-math.expm1(diff)), hi.sign)

    __radd__ = __add__

    def __sub__(self, other) -> LogScalar:
        return self + (-_coerce(other))

    def __rsub__(self, other) -> LogScalar:
        return _coerce(other) - self


def _coerce(x) -> LogScalar:
    if isinstance(x, LogScalar):
        return x
    return LogScalar.from_float(float(x))
