"""Normalization functions Z_N(f, sqrt(u)) and the polynomial normalizations.

``Z_N(f, sqrt(u))`` is the average of prod f(v_i) over S^{N-1}(sqrt(u)). It is
tied to the law of ``W = sum v_i^2`` under i.i.d. ``f`` by

    p_W(u) = |S^{N-1}| u^{(N-2)/2} Z_N(f, sqrt(u)) / 2,

so the exact route computes p_W on a grid: the law of one ``v^2`` is binned
onto a lattice by linear (tent) binning, which keeps each cell's mean, and
the N-fold convolution is done by binary powering with zero-padded FFTs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .specfun import LogScalar, log_gamma, sphere_log_area

VARYING = "varying"
Power = Union[float, str]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)

ALIAS_TOL = 1e-6


class GridAliasingError(ArithmeticError):
    """Mass of W beyond the grid end exceeds the tolerance; enlarge grid_max."""


@dataclass(frozen=True, eq=False)
class SquaredLawGrid:
    """Density of W = sum of N i.i.d. squares on the grid ``k * h``, ``k < n_points``."""

    N: int
    grid_max: float
    n_points: int
    log_density: np.ndarray
    lost_mass: float

    @property
    def h(self) -> float:
        return self.grid_max / (self.n_points - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_points) * self.h

    @property
    def density(self) -> np.ndarray:
        return np.exp(self.log_density)

    def trapezoid_mass(self) -> float:
        d = self.density
        return float(self.h * (d.sum() - 0.5 * (d[0] + d[-1])))

    def log_pdf(self, u) -> np.ndarray:
        """ln p_W(u), log-linear interpolation between grid nodes."""
        u = np.asarray(u, dtype=float)
        if np.any(u < 0) or np.any(u > self.grid_max):
            raise ValueError(f"u outside the grid [0, {self.grid_max}]")
        t = u / self.h
        k = np.minimum(np.floor(t).astype(int), self.n_points - 2)
        frac = t - k
        lo, hi = self.log_density[k], self.log_density[k + 1]
        with np.errstate(invalid="ignore"):
            out = np.where(
                np.isfinite(lo) & np.isfinite(hi),
                (1.0 - frac) * lo + frac * hi,
                np.where(frac == 0, lo, np.where(frac == 1, hi, -np.inf)),
            )
        return out

    def log_znorm(self, u) -> np.ndarray:
        """ln Z_N(f, sqrt(u)) = ln 2 + ln p_W(u) - ln|S^{N-1}| - (N-2)/2 ln u."""
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0):
            raise ValueError("u must be positive")
        return (math.log(2.0) + self.log_pdf(u) - sphere_log_area(self.N)
                - 0.5 * (self.N - 2) * np.log(u))


def _square_lattice_masses(f, grid_max, n_points):
    """Tent-binned masses of v^2 on the lattice k*h, plus the mass beyond grid_max."""
    h = grid_max / (n_points - 1)
    edges_w = np.arange(n_points) * h
    lo_v = np.sqrt(edges_w[:-1])
    hi_v = np.sqrt(edges_w[1:])
    half = 0.5 * (hi_v - lo_v)
    mid = 0.5 * (hi_v + lo_v)
    v = mid[:, None] + half[:, None] * _GL_X[None, :]
    dens = np.exp(f.log_eval(v)) + np.exp(f.log_eval(-v))
    frac = (v * v - edges_w[:-1, None]) / h
    right = half * ((dens * frac) @ _GL_W)
    total = half * (dens @ _GL_W)
    masses = np.zeros(n_points)
    masses[:-1] += total - right
    masses[1:] += right
    lost = max(0.0, 1.0 - float(masses.sum()))
    return masses, lost


def _convolve_truncated(a, b, n):
    size = 1 << int(math.ceil(math.log2(2 * n)))
    out = np.fft.irfft(np.fft.rfft(a, size) * np.fft.rfft(b, size), size)[:n]
    return np.clip(out, 0.0, None)


def squared_law(f, N: int, grid_max: float = None, n_points: int = 1 << 16) -> SquaredLawGrid:
    """Density of ``sum_{i<=N} v_i^2`` for i.i.d. ``v_i ~ f`` on ``[0, grid_max]``."""
    if N < 1:
        raise ValueError("need N >= 1")
    if grid_max is None:
        grid_max = 4.0 * N
    if grid_max < 2 * N:
        raise ValueError("grid_max must be at least 2N")
    if n_points < 16 or n_points & (n_points - 1):
        raise ValueError("n_points must be a power of two >= 16")
    single, _ = _square_lattice_masses(f, grid_max, n_points)
    result = None
    base = single
    k = N
    # binary powering; truncation is exact on [0, grid_max] since all mass is >= 0
    while k:
        if k & 1:
            result = base if result is None else _convolve_truncated(result, base, n_points)
        k >>= 1
        if k:
            base = _convolve_truncated(base, base, n_points)
    total = float(result.sum())
    lost = max(0.0, 1.0 - total)
    if lost > ALIAS_TOL:
        raise GridAliasingError(
            f"mass {lost:.3g} of W lies beyond grid_max={grid_max}; enlarge the grid")
    pmf = result / total
    h = grid_max / (n_points - 1)
    density = pmf / h
    density[0] *= 2.0  # node 0 only collects mass from half a cell
    with np.errstate(divide="ignore"):
        log_density = np.log(density)
    return SquaredLawGrid(N, float(grid_max), n_points, log_density, lost)


_LAW_CACHE: dict = {}


def law_for(f, N: int, grid_max: float = None, n_points: int = 1 << 16,
            max_points: int = 1 << 21) -> SquaredLawGrid:
    """Cached :func:`squared_law`, doubling the grid until aliasing is gone."""
    gm = float(4.0 * N if grid_max is None else grid_max)
    n = int(n_points)
    key = (id(f), N, gm, n)
    hit = _LAW_CACHE.get(key)
    if hit is not None and hit[0] is f:
        return hit[1]
    while True:
        try:
            law = squared_law(f, N, gm, n)
            break
        except GridAliasingError:
            if 2 * n > max_points:
                raise
            gm, n = 2.0 * gm, 2 * n
    if len(_LAW_CACHE) > 64:
        _LAW_CACHE.clear()
    # keep a reference to f so its id cannot be recycled while cached
    _LAW_CACHE[key] = (f, law)
    return law


def log_znorm_exact(f, N: int, u) -> np.ndarray:
    """Vectorized ln Z_N(f, sqrt(u)) through the FFT squared law."""
    u = np.asarray(u, dtype=float)
    # grids come in a fixed doubling ladder from 4N so different u share the cache
    gm, n = 4.0 * N, 1 << 16
    while gm < float(np.max(u)):
        gm, n = 2 * gm, 2 * n
    return law_for(f, N, grid_max=gm, n_points=n).log_znorm(u)


def znorm_exact(f, N: int, u: float) -> LogScalar:
    val = float(log_znorm_exact(f, N, u))
    return LogScalar.zero() if val == -math.inf else LogScalar.from_log(val)


def gaussian_log_znorm(a: float, N: int, u) -> np.ndarray:
    """Closed form for f = M_a: prod f is constant on the sphere of radius sqrt(u)."""
    return -0.5 * N * math.log(2 * math.pi * a) - np.asarray(u, dtype=float) / (2 * a)


def log_znorm_asymptotic(sigma_sq: float, N: int, u) -> np.ndarray:
    """Local-CLT approximation of ln Z_N(f_N, sqrt(u)) with the remainder set to zero."""
    u = np.asarray(u, dtype=float)
    sig = math.sqrt(sigma_sq)
    return (math.log(2.0) - 0.5 * math.log(N) - math.log(sig) - sphere_log_area(N)
            - 0.5 * (N - 2) * np.log(np.abs(u))
            - (u - N) ** 2 / (2 * N * sigma_sq) - 0.5 * math.log(2 * math.pi))


def znorm_asymptotic(params, N: int, u: float) -> LogScalar:
    return LogScalar.from_log(float(log_znorm_asymptotic(params.sigma_N_sq, N, u)))


def moment_integral_log(N: int, r: float, m: float) -> float:
    """ln of the average of |v_1|^m over S^{N-1}(r)."""
    if m <= -1:
        raise ValueError(f"moment exponent must exceed -1, got {m}")
    if N < 2:
        raise ValueError("need N >= 2")
    return (m * math.log(r) + log_gamma(0.5 * N) + log_gamma(0.5 * (m + 1))
            - 0.5 * math.log(math.pi) - log_gamma(0.5 * (N + m)))


def poly_exponent(N: int, power: Power) -> float:
    if power == VARYING:
        return float(N)
    m = float(power)
    if not m > 0:
        raise ValueError(f"polynomial power must be positive, got {power!r}")
    return m


def zpoly(N: int, power: Power) -> LogScalar:
    """Normalization of sum_i |v_i|^m on Kac's sphere (m = N when varying)."""
    if N < 2:
        raise ValueError("need N >= 2")
    if power == VARYING:
        return LogScalar.from_log(0.5 * (N + 2) * math.log(N) - (N - 1) * math.log(2.0))
    m = poly_exponent(N, power)
    return LogScalar.from_log(math.log(N) + moment_integral_log(N, math.sqrt(N), m))


def zpoly_gamma_route(N: int) -> float:
    """ln of the varying normalization through Gamma functions, without duplication."""
    return (0.5 * (N + 2) * math.log(N) + log_gamma(0.5 * N) + log_gamma(0.5 * (N + 1))
            - 0.5 * math.log(math.pi) - log_gamma(float(N)))
