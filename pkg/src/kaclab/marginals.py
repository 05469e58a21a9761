"""k-th marginals of symmetric families on Kac's sphere and chaoticity gaps.

The marginal of the uniform measure on S^{N-1}(sqrt(N)) in the first k
coordinates is

    |S^{N-k-1}| / |S^{N-1}| * (N - |v|^2)_+^{(N-k-2)/2} / N^{(N-2)/2},

and a family's marginal is that prefactor times the average of F_N over the
inner sphere of radius sqrt(N - |v|^2). Conditioned tensors and polynomial
families have closed forms for that average; other families fall back on
histograms of exact draws.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .densities import DensityFamily, FamilyError
from .montecarlo import as_generator
from .normalization import moment_integral_log
from .quadrature import integrate
from .specfun import log_gamma, sphere_log_area

HIST_BINS = 200
HIST_HALF_WIDTH = 4.0 * math.sqrt(2.0)
HIST_SAMPLES = 100_000


def _check_nk(N, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    if N < k + 3:
        raise ValueError(
            f"marginal of order k={k} needs N >= k+3 = {k + 3} (got N={N}); the boundary "
            "exponent (N-k-2)/2 must stay positive")


def _sq(v, k):
    v = np.asarray(v, dtype=float)
    if k == 1 and (v.ndim == 0 or v.shape[-1] != 1):
        v = v[..., None]
    if v.shape[-1] != k:
        raise ValueError(f"points must have {k} coordinates on the last axis")
    return v, np.sum(v * v, axis=-1)


def marginal_prefactor_log(N: int, k: int, v) -> np.ndarray:
    """ln of the k-th marginal of the uniform measure on Kac's sphere."""
    _check_nk(N, k)
    _, s = _sq(v, k)
    gap = N - s
    with np.errstate(divide="ignore", invalid="ignore"):
        body = np.where(gap > 0, 0.5 * (N - k - 2) * np.log(np.where(gap > 0, gap, 1.0)), -np.inf)
    return sphere_log_area(N - k) - sphere_log_area(N) - 0.5 * (N - 2) * math.log(N) + body


def marginal_conditioned_tensor(family: DensityFamily, k: int, v, mode: Optional[str] = None):
    """Pi_k of a conditioned tensor: prefactor * Z_{N-k}(sqrt(N-|v|^2)) / Z_N(sqrt(N)) * prod f.

    ``mode`` selects the normalization accessor of a mixture family
    ("exact"/"asymptotic"); by default the family's own accessor is used.
    """
    if family.kind not in ("tensor", "mixture"):
        raise FamilyError(f"{family.name} is not a conditioned tensor")
    N = family.N
    _check_nk(N, k)
    v, s = _sq(v, k)
    f = family.params["f"]
    znorm = family.params["znorm"]
    log_Z = family.params["log_Z"]
    if mode is not None and family.kind == "mixture" and mode != family.params.get("znorm_mode"):
        from .densities import make_mixture_family
        other = make_mixture_family(N, family.params["mixture"].eta, mode)
        znorm, log_Z = other.params["znorm"], other.params["log_Z"]
    out = np.zeros(s.shape)
    inside = s < N
    if np.any(inside):
        vi, si = v[inside], s[inside]
        logval = (marginal_prefactor_log(N, k, vi) + znorm(N - k, N - si) - log_Z
                  + np.sum(f.log_eval(vi), axis=-1))
        out[inside] = np.exp(logval)
    return out


def marginal_mixture_asymptotic_closed(family: DensityFamily, k: int, v):
    """sqrt(N/(N-k)) exp(-(k-|v|^2)^2 / (2 (N-k) Sigma^2)) prod f, the simplified asymptotic form."""
    N = family.N
    _check_nk(N, k)
    v, s = _sq(v, k)
    sig2 = family.params["mixture"].sigma_N_sq
    f = family.params["f"]
    val = (0.5 * math.log(N / (N - k)) - (k - s) ** 2 / (2 * (N - k) * sig2)
           + np.sum(f.log_eval(v), axis=-1))
    return np.where(s < N, np.exp(val), 0.0)


def marginal_polynomial(N: int, k: int, v, power) -> np.ndarray:
    """Pi_k of sum |v_i|^m / z: prefactor * [sum_{i<=k} |v_i|^m + (N-k) E|w_1|^m] / z,
    with the inner moment taken over S^{N-k-1}(sqrt(N-|v|^2))."""
    from .normalization import poly_exponent, zpoly
    _check_nk(N, k)
    m = poly_exponent(N, power)
    log_z = zpoly(N, power).log()
    v, s = _sq(v, k)
    out = np.zeros(s.shape)
    inside = s < N
    if np.any(inside):
        vi, si = v[inside], s[inside]
        with np.errstate(divide="ignore"):
            outer = np.logaddexp.reduce(m * np.log(np.abs(vi)), axis=-1)
        inner = np.array([moment_integral_log(N - k, math.sqrt(N - x), m) if x < N else -np.inf
                          for x in si])
        logval = (marginal_prefactor_log(N, k, vi) - log_z
                  + np.logaddexp(outer, math.log(N - k) + inner))
        out[inside] = np.exp(logval)
    return out


def marginal_concentration(family: DensityFamily, v) -> np.ndarray:
    """Pi_1 of the cap mixture by one-dimensional quadrature over the elevation.

    The two caps on the v_1 axis put v_1 = +-sqrt(N) cos(xi); on each of the
    other 2(N-1) caps v_1 = sqrt(N) sin(xi) u with u the first coordinate of
    a uniform point of S^{N-2}, whose density is proportional to
    (1 - u^2)^{(N-4)/2}.
    """
    if family.kind != "concentration":
        raise FamilyError(f"{family.name} is not a concentration family")
    N = family.N
    _check_nk(N, 1)
    phi_eps = family.params["phi_eps"]
    lo, hi = phi_eps.support
    R = math.sqrt(N)
    # density of the first coordinate of a uniform point on S^{N-2}(1)
    log_cu = log_gamma(0.5 * (N - 1)) - log_gamma(0.5 * (N - 2)) - 0.5 * math.log(math.pi)
    x = np.atleast_1d(np.asarray(v, dtype=float)).reshape(-1)
    out = np.zeros(x.size)
    for j, xv in enumerate(x):
        def off_axis(xi):
            r = R * np.sin(xi)
            u = xv / r
            ok = np.abs(u) < 1
            with np.errstate(divide="ignore", invalid="ignore"):
                lp = log_cu + 0.5 * (N - 4) * np.log1p(-np.where(ok, u * u, 0.0)) - np.log(r)
            return np.where(ok, np.exp(lp + phi_eps.log_eval(xi)), 0.0)
        val = integrate(off_axis, lo, hi, abs_tol=1e-13, rel_tol=1e-10).value
        total = (N - 1) / N * val
        # on-axis caps: v_1 = +-R cos(xi) has density phi_eps(xi) / (R sin xi)
        a = abs(xv)
        if R * math.cos(hi) < a < R:
            xi = math.acos(a / R)
            total += (1.0 / (2 * N)) * float(np.exp(phi_eps.log_eval(xi))) / (R * math.sin(xi))
        out[j] = total
    return out.reshape(np.shape(v)) if np.ndim(v) else out


def analytic_evaluator(family: DensityFamily, k: int):
    """A function ``v -> Pi_k(v)`` when a closed form exists, else None."""
    kind = family.kind
    N = family.N
    if kind == "uniform":
        return lambda v: np.exp(marginal_prefactor_log(N, k, v))
    if kind in ("tensor", "mixture"):
        return lambda v: marginal_conditioned_tensor(family, k, v)
    if kind == "polynomial":
        power = "varying" if family.params["varying"] else family.params["m"]
        return lambda v: marginal_polynomial(N, k, v, power)
    if kind == "concentration" and k == 1:
        return lambda v: marginal_concentration(family, v)
    if kind == "convex":
        G = analytic_evaluator(family.params["G"], k)
        F = analytic_evaluator(family.params["F"], k)
        if G is None or F is None:
            return None
        a = family.params["alpha"]
        # components may return (n,) or (n, 1); flatten before mixing
        return lambda v: ((1 - a) * np.asarray(G(v), dtype=float).reshape(-1)
                          + a * np.asarray(F(v), dtype=float).reshape(-1))
    return None


@dataclass
class MarginalGrid:
    k: int
    N: int
    points: np.ndarray        # (n, k), lexicographically sorted
    values: np.ndarray
    limit_values: np.ndarray
    std_error: Optional[np.ndarray] = None
    route: str = "analytic"
    spacing: tuple = ()

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ValueError("marginal values must be non-negative")

    @property
    def abs_gap(self) -> np.ndarray:
        return np.abs(self.values - self.limit_values)

    @property
    def sup_gap(self) -> float:
        return float(np.max(self.abs_gap))

    @property
    def l1_gap(self) -> float:
        """Trapezoidal integral of |Pi_k - f^{(x)k}| over the grid box."""
        g = self.abs_gap
        if self.k == 1:
            return float(np.trapezoid(g, self.points[:, 0]))
        n = int(round(math.sqrt(g.size)))
        xs = self.points[::n, 0]
        ys = self.points[:n, 1]
        return float(np.trapezoid(np.trapezoid(g.reshape(n, n), ys, axis=1), xs))

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ",".join(f"v{i + 1}" for i in range(self.k))
        buf.write(f"k,N,{cols},pi_k,limit,abs_gap\n")
        for p, val, lim, gap in zip(self.points, self.values, self.limit_values, self.abs_gap):
            coords = ",".join(f"{c:.12g}" for c in p)
            buf.write(f"{self.k},{self.N},{coords},{val:.12g},{lim:.12g},{gap:.12g}\n")
        return buf.getvalue()


def default_grid(k: int) -> np.ndarray:
    if k == 1:
        return np.linspace(-4.0, 4.0, 161)[:, None]
    if k == 2:
        x = np.linspace(-3.0, 3.0, 41)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)
    raise ValueError("default grids exist for k = 1, 2 only")


def histogram_marginal(family: DensityFamily, k: int = 1, n: int = HIST_SAMPLES, rng=0,
                       bins: int = HIST_BINS, half_width: float = HIST_HALF_WIDTH):
    """Binned density of the first k coordinates from exact draws.

    Returns (centers, density, std_error) with centers of shape (m, k).
    """
    if family.exact_sampler is None:
        raise FamilyError(f"{family.name} has neither a marginal formula nor an exact sampler")
    if k not in (1, 2):
        raise ValueError("histogram route supports k = 1, 2")
    gen = as_generator(rng)
    draws = family.sample(gen, n)[:, :k]
    edges = np.linspace(-half_width, half_width, bins + 1)
    width = edges[1] - edges[0]
    centers = 0.5 * (edges[:-1] + edges[1:])
    if k == 1:
        counts, _ = np.histogram(draws[:, 0], edges)
        pts = centers[:, None]
        area = width
    else:
        counts, _, _ = np.histogram2d(draws[:, 0], draws[:, 1], [edges, edges])
        counts = counts.ravel()
        xx, yy = np.meshgrid(centers, centers, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
        area = width * width
    dens = counts / (n * area)
    err = np.sqrt(counts * (1 - counts / n)) / (n * area)
    return pts, dens, err


def chaoticity_gap(family: DensityFamily, k: int = 1, grid=None, limit=None,
                   route: str = "auto", n_samples: int = HIST_SAMPLES, rng=0) -> MarginalGrid:
    """Compare Pi_k(F_N) with limit^{(x)k} on a grid.

    ``route`` is "analytic", "histogram" or "auto" (analytic when available).
    The histogram route evaluates at its own bin centers.
    """
    limit = family.claimed_limit if limit is None else limit
    if limit is None:
        raise FamilyError(f"{family.name} has no claimed limit")
    evaluator = analytic_evaluator(family, k) if route in ("auto", "analytic") else None
    if route == "analytic" and evaluator is None:
        raise FamilyError(f"no closed-form marginal of order {k} for {family.name}")
    if evaluator is not None:
        pts = default_grid(k) if grid is None else np.asarray(grid, dtype=float).reshape(-1, k)
        order = np.lexsort(pts.T[::-1])
        pts = pts[order]
        values = np.asarray(evaluator(pts), dtype=float).reshape(-1)
        err = None
        used = "analytic"
    else:
        pts, values, err = histogram_marginal(family, k, n_samples, rng)
        used = "histogram"
    lim = np.exp(np.sum(limit.log_eval(pts), axis=-1))
    return MarginalGrid(k, family.N, pts, values, lim, err, used)
