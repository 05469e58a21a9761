"""Geometry of the sphere S^{N-1}(R): sampling, dimensional reduction,
elevation-angle integrals and stereographic charts.

Point batches are plain arrays whose last axis holds the coordinates;
:class:`SpherePoint` and :class:`EuclideanPoint` are validated single-point
wrappers for API edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .montecarlo import as_generator
from .quadrature import QuadratureError, integrate, integrate_2d
from .specfun import log_gamma, sphere_log_area

SOUTH_POLE_GUARD = 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SpherePoint:
    coords: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise GeometryError("a sphere point needs at least 2 coordinates")
        if not self.radius > 0:
            raise GeometryError("radius must be positive")
        r2 = self.radius ** 2
        if abs(float(c @ c) - r2) > 1e-10 * r2:
            raise GeometryError(f"|v|^2 = {float(c @ c)!r} is off the sphere of radius^2 {r2!r}")
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return self.coords.size


@dataclass(frozen=True)
class EuclideanPoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=float))
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise GeometryError("Euclidean point needs finite 1-d coordinates")
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return self.coords.size


def _coords(v):
    return v.coords if isinstance(v, (SpherePoint, EuclideanPoint)) else np.asarray(v, dtype=float)


def project_to_radius(x: np.ndarray, R: float) -> np.ndarray:
    norm = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    out = x * (R / norm)
    # one Newton-style correction makes |v|^2 = R^2 to ~1 ulp
    norm2 = np.sum(out * out, axis=-1, keepdims=True)
    return out * np.sqrt(R * R / norm2)


def sample_uniform(N: int, R: float, rng, size: Optional[int] = None):
    """Uniform draws from S^{N-1}(R).

    Returns a :class:`SpherePoint` when ``size`` is None and an array of shape
    ``(size, N)`` otherwise.
    """
    if N < 2:
        raise GeometryError("need N >= 2")
    gen = as_generator(rng)
    m = 1 if size is None else int(size)
    x = gen.standard_normal((m, N))
    norm2 = np.sum(x * x, axis=1)
    # an all-zero normal vector has probability zero; redraw if it ever happens
    while np.any(norm2 < 1e-300):
        bad = norm2 < 1e-300
        x[bad] = gen.standard_normal((int(bad.sum()), N))
        norm2 = np.sum(x * x, axis=1)
    pts = project_to_radius(x, R)
    if size is None:
        return SpherePoint(pts[0], R)
    return pts


def sphere_sampler(N: int, R: Optional[float] = None):
    """A ``(stream, size) -> array`` sampler of the uniform law on S^{N-1}(R)."""
    radius = math.sqrt(N) if R is None else R
    return lambda stream, size: sample_uniform(N, radius, stream, size)


def marginal_weight_log(N: int, R: float, j: int, sq: np.ndarray) -> np.ndarray:
    """ln of the density of (v_1..v_j) under the uniform law on S^{N-1}(R).

    ``sq`` is sum v_i^2; the result is -inf outside the ball.
    """
    sq = np.asarray(sq, dtype=float)
    const = sphere_log_area(N - j) - sphere_log_area(N) - (N - 2) * math.log(R)
    gap = R * R - sq
    expo = 0.5 * (N - j - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        if expo == 0:
            body = np.where(gap > 0, 0.0, -np.inf)
        else:
            body = np.where(gap > 0, expo * np.log(np.where(gap > 0, gap, 1.0)), -np.inf)
    return const + body


def inner_marginal(F: Callable[[np.ndarray], np.ndarray], N: int, j: int):
    """Inner-sphere evaluator for an ``F`` that only reads the first ``j`` coordinates.

    The inner average is then ``F`` itself; the point is completed by putting
    the residual radius on coordinate ``j+1``.
    """
    def inner(v_outer, rho):
        pts = np.zeros(v_outer.shape[:-1] + (N,))
        pts[..., :j] = v_outer
        pts[..., j] = rho
        return F(pts)
    return inner


def inner_monte_carlo(F, N: int, j: int, n: int = 256, rng=0):
    """Inner-sphere evaluator averaging ``F`` over ``n`` fixed uniform draws of the tail."""
    directions = sample_uniform(N - j, 1.0, rng, n)

    def inner(v_outer, rho):
        v_outer = np.atleast_2d(v_outer)
        out = np.empty(v_outer.shape[0])
        for i in range(v_outer.shape[0]):
            pts = np.empty((n, N))
            pts[:, :j] = v_outer[i]
            pts[:, j:] = rho[i] * directions
            out[i] = np.mean(F(pts))
        return out
    return inner


def fubini_reduce(F, N: int, R: float, j: int = 1, inner=None, abs_tol=1e-10, rel_tol=1e-8) -> float:
    """Average of ``F`` over S^{N-1}(R) by the dimensional-reduction formula.

    The outer ``j``-dimensional integral over the ball of radius R carries the
    marginal weight ``|S^{N-j-1}|/|S^{N-1}| R^{2-N} (R^2-|v|^2)^{(N-j-2)/2}``;
    ``inner(v_outer, rho)`` must return the average of ``F`` over the inner
    sphere of radius ``rho`` (default: :func:`inner_marginal`).
    """
    if j < 1:
        raise GeometryError("j must be >= 1")
    if j > 3:
        raise GeometryError("fubini_reduce supports j <= 3; use Monte Carlo for larger j")
    if j > N - 2:
        raise GeometryError(
            f"j={j} > N-2={N - 2}: the boundary weight exponent (N-j-2)/2 is negative")
    if inner is None:
        inner = inner_marginal(F, N, j)
    R2 = R * R

    def weighted(v_outer):
        sq = np.sum(v_outer * v_outer, axis=-1)
        w = np.exp(marginal_weight_log(N, R, j, sq))
        rho = np.sqrt(np.clip(R2 - sq, 0.0, None))
        return w * inner(v_outer, rho)

    tol = dict(abs_tol=abs_tol, rel_tol=rel_tol)
    if j == 1:
        return integrate(lambda x: weighted(x[:, None]), -R, R, points=[0.0], **tol).value
    if j == 2:
        def f2(x, y):
            return weighted(np.stack([x, y], axis=-1))
        return integrate_2d(
            f2, -R, R,
            lambda x: -math.sqrt(max(R2 - x * x, 0.0)),
            lambda x: math.sqrt(max(R2 - x * x, 0.0)),
            **tol).value
    # j == 3: spherical shells, radius s, polar angle t, azimuth p
    def shell(s_values):
        out = np.empty(np.shape(s_values))
        for i, s in enumerate(np.ravel(s_values)):
            if s == 0:
                out.flat[i] = 0.0
                continue

            def polar(t_values):
                res = np.empty(np.shape(t_values))
                for k, t in enumerate(np.ravel(t_values)):
                    def azim(p):
                        pts = np.stack([
                            s * np.sin(t) * np.cos(p),
                            s * np.sin(t) * np.sin(p),
                            np.full_like(p, s * np.cos(t)),
                        ], axis=-1)
                        return weighted(pts)
                    res.flat[k] = integrate(azim, 0.0, 2 * math.pi,
                                            abs_tol=abs_tol * 0.01, rel_tol=rel_tol * 0.01).value * np.sin(t)
                return res
            out.flat[i] = s * s * integrate(polar, 0.0, math.pi,
                                            abs_tol=abs_tol * 0.1, rel_tol=rel_tol * 0.1).value
        return out
    return integrate(shell, 0.0, R, **tol).value


def elevation_integral(g: Callable[[np.ndarray], np.ndarray], k: int, R: float = 1.0,
                       points=None, abs_tol=1e-12, rel_tol=1e-10) -> float:
    """Average over S^{k-1}(R) of a function of the elevation angle only.

    Computes ``Gamma(k/2)/(Gamma((k-1)/2) sqrt(pi)) int_0^pi g(phi) sin^{k-2}(phi) dphi``.
    """
    if k < 3:
        raise GeometryError("elevation_integral needs k >= 3")
    const = math.exp(log_gamma(0.5 * k) - log_gamma(0.5 * (k - 1)) - 0.5 * math.log(math.pi))
    try:
        res = integrate(lambda phi: g(phi) * np.sin(phi) ** (k - 2), 0.0, math.pi,
                        abs_tol=abs_tol, rel_tol=rel_tol, points=points)
    except QuadratureError as exc:
        raise QuadratureError(f"elevation integral did not converge: {exc}", exc.value, exc.error)
    return const * res.value


# --- stereographic charts ---------------------------------------------------

def stereo_forward(x, R: float) -> np.ndarray:
    """Map chart points x in R^n to S^n(R), north pole = image of the origin."""
    x = _coords(x)
    sq = np.sum(x * x, axis=-1, keepdims=True)
    denom = R * R + sq
    head = 2.0 * R * R * x / denom
    tail = R * (R * R - sq) / denom
    return np.concatenate([head, tail], axis=-1)


def stereo_inverse(v, R: float) -> np.ndarray:
    """Chart coordinates ``x_i = R v_i / (R + v_{n+1})``; the south pole is excluded."""
    v = _coords(v)
    last = v[..., -1:]
    if np.any(last <= -R + SOUTH_POLE_GUARD * R):
        raise GeometryError("point too close to the south pole for the stereographic chart")
    return R * v[..., :-1] / (R + last)


def stereo_log_jacobian(x, R: float) -> np.ndarray:
    """``n ln(2R^2/(R^2+|x|^2))``: log surface element w.r.t. chart Lebesgue measure."""
    x = _coords(x)
    n = x.shape[-1]
    sq = np.sum(x * x, axis=-1)
    return n * (math.log(2.0 * R * R) - np.log(R * R + sq))


def _swap_last(a, axis):
    out = np.array(a, dtype=float, copy=True)
    if axis != out.shape[-1] - 1:
        out[..., [axis, -1]] = out[..., [-1, axis]]
    return out


def stereo_forward_axis(x, R: float, axis: int) -> np.ndarray:
    """Stereographic map whose symmetry axis is coordinate ``axis`` (0-based).

    The standard map composed with the swap of ``axis`` and the last coordinate.
    """
    return _swap_last(stereo_forward(x, R), axis)


def stereo_inverse_axis(v, R: float, axis: int) -> np.ndarray:
    return stereo_inverse(_swap_last(_coords(v), axis), R)
