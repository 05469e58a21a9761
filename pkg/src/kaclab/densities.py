"""One-dimensional densities and the symmetric families on Kac's sphere.

A family's ``log_density`` takes an array whose last axis holds the N
coordinates of points on S^{N-1}(sqrt(N)) and returns the log of the density
with respect to the normalized uniform measure (``-inf`` off the support).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .montecarlo import as_generator
from .normalization import (
    VARYING, gaussian_log_znorm, log_znorm_asymptotic, log_znorm_exact,
    poly_exponent, zpoly,
)
from .quadrature import QuadratureError, integrate
from .specfun import log_gamma, sphere_log_area
from .sphere import sample_uniform, stereo_forward_axis


class FamilyError(ValueError):
    pass


def logsumexp(a, axis=-1):
    """Log-sum-exp along ``axis``; all ``-inf`` slices give ``-inf``."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


# --- one-dimensional densities ----------------------------------------------

@dataclass(eq=False)
class Density1D:
    """A probability density on (part of) the real line, stored by its log.

    ``log_eval`` must accept arrays of any shape. ``sampler(rng, size)``
    returns ``size`` draws. Mass and second moment are checked by
    quadrature on construction.
    """

    log_eval: Callable[[np.ndarray], np.ndarray]
    support: tuple
    second_moment: float
    sampler: Optional[Callable] = None
    name: str = "f"
    breakpoints: tuple = ()

    def __post_init__(self):
        lo, hi = self.support
        if not lo < hi:
            raise FamilyError(f"empty support {self.support}")
        mass = self.expect(lambda x: np.ones_like(x))
        if abs(mass - 1.0) > 1e-8:
            raise FamilyError(f"{self.name}: density integrates to {mass!r}, not 1")
        m2 = self.expect(lambda x: x * x)
        if abs(m2 - self.second_moment) > 1e-6 * max(1.0, abs(m2)):
            raise FamilyError(
                f"{self.name}: stated second moment {self.second_moment} but quadrature gives {m2}")

    def pdf(self, x):
        return np.exp(self.log_eval(np.asarray(x, dtype=float)))

    def expect(self, g, abs_tol=1e-12, rel_tol=1e-11) -> float:
        """``int g(x) f(x) dx`` over the support by adaptive quadrature."""
        def integrand(x):
            lf = self.log_eval(x)
            with np.errstate(invalid="ignore"):
                return np.where(np.isfinite(lf), g(x) * np.exp(lf), 0.0)
        lo, hi = self.support
        return integrate(integrand, lo, hi, abs_tol=abs_tol, rel_tol=rel_tol,
                         points=self.breakpoints).value

    def entropy_integral(self) -> float:
        """``int f ln f``."""
        def g(x):
            lf = self.log_eval(x)
            return np.where(np.isfinite(lf), lf, 0.0)
        return self.expect(g)

    def sample(self, rng, size: int) -> np.ndarray:
        if self.sampler is None:
            raise FamilyError(f"{self.name} has no sampler")
        return self.sampler(as_generator(rng), size)


def make_gaussian(a: float) -> Density1D:
    """M_a, the centred normal law with variance ``a``; ``make_gaussian(1)`` is gamma."""
    if not a > 0:
        raise FamilyError(f"variance must be positive, got {a}")
    c = -0.5 * math.log(2 * math.pi * a)
    sd = math.sqrt(a)
    return Density1D(
        log_eval=lambda x: c - np.asarray(x, dtype=float) ** 2 / (2 * a),
        support=(-math.inf, math.inf),
        second_moment=a,
        sampler=lambda gen, size: sd * gen.standard_normal(size),
        name="gamma" if a == 1 else f"M_{a:g}",
        breakpoints=(-sd, 0.0, sd),
    )


def make_gaussian_mixture(weights, variances, name="mixture") -> Density1D:
    """Mixture of centred normals, evaluated with log-sum-exp."""
    w = np.asarray(weights, dtype=float)
    var = np.asarray(variances, dtype=float)
    if w.shape != var.shape or np.any(w <= 0) or np.any(var <= 0):
        raise FamilyError("mixture needs positive weights and variances of equal length")
    if abs(w.sum() - 1.0) > 1e-12:
        raise FamilyError("mixture weights must sum to 1")
    logc = np.log(w) - 0.5 * np.log(2 * math.pi * var)

    def log_eval(x):
        x = np.asarray(x, dtype=float)
        terms = logc - x[..., None] ** 2 / (2 * var)
        return logsumexp(terms, axis=-1)

    def sampler(gen, size):
        comp = gen.choice(w.size, size=size, p=w)
        return np.sqrt(var[comp]) * gen.standard_normal(size)

    sds = np.sqrt(var)
    return Density1D(log_eval, (-math.inf, math.inf), float(w @ var), sampler, name,
                     breakpoints=tuple(sorted(set(np.concatenate([-sds, [0.0], sds]).tolist()))))


@dataclass(frozen=True)
class MixtureParams:
    """Parameters of the two-Gaussian mixture f_N; ``delta_N = N^-eta``."""

    eta: float
    N: int

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise FamilyError(f"eta must lie in (0, 1], got {self.eta}")
        if self.N < 2:
            raise FamilyError("need N >= 2")

    @property
    def delta_N(self) -> float:
        return self.N ** (-self.eta)

    @property
    def sigma_N_sq(self) -> float:
        d = self.delta_N
        return 3.0 / (4.0 * d * (1.0 - d)) - 1.0


def mixture_density(params: MixtureParams) -> Density1D:
    """f_N = delta M_{1/(2 delta)} + (1 - delta) M_{1/(2(1 - delta))}."""
    d = params.delta_N
    return make_gaussian_mixture([d, 1.0 - d], [1.0 / (2 * d), 1.0 / (2 * (1.0 - d))],
                                 name=f"f_N(N={params.N},eta={params.eta:g})")


def make_uniform(lo: float = 0.0, hi: float = 1.0) -> Density1D:
    width = hi - lo

    def log_eval(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= lo) & (x <= hi), -math.log(width), -np.inf)

    return Density1D(log_eval, (lo, hi), (hi ** 3 - lo ** 3) / (3 * width),
                     lambda gen, size: lo + width * gen.random(size), f"U[{lo:g},{hi:g}]")


def from_log_unnormalized(log_g, support, name="f", n_table=4097) -> Density1D:
    """Normalize ``exp(log_g)`` on a bounded support and attach an inverse-CDF sampler.

    The CDF is tabulated on ``n_table`` nodes with 8-point Gauss-Legendre per
    cell; sampling inverts it by linear interpolation.
    """
    lo, hi = map(float, support)
    x = np.linspace(lo, hi, n_table)
    gx, gw = np.polynomial.legendre.leggauss(8)
    half = 0.5 * (x[1] - x[0])
    pts = 0.5 * (x[:-1] + x[1:])[:, None] + half * gx[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = log_g(pts)
    shift = float(np.max(lg))
    cell = half * (np.exp(lg - shift) @ gw)
    cdf = np.concatenate([[0.0], np.cumsum(cell)])
    # refine the normalizer by adaptive quadrature; the table only drives sampling
    def scaled(t):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = log_g(t)
        return np.where(np.isfinite(v), np.exp(v - shift), 0.0)
    total = integrate(scaled, lo, hi, abs_tol=1e-14 * cdf[-1], rel_tol=1e-12).value
    log_norm = shift + math.log(total)
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    cdf_k, x_k = cdf[keep], x[keep]

    def log_eval(t):
        t = np.asarray(t, dtype=float)
        inside = (t > lo) & (t < hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = log_g(np.where(inside, t, 0.5 * (lo + hi)))
        return np.where(inside, v - log_norm, -np.inf)

    def sampler(gen, size):
        return np.interp(gen.random(size), cdf_k, x_k)

    def m2_integrand(t):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = log_g(t)
        return np.where(np.isfinite(v), t * t * np.exp(v - log_norm), 0.0)
    m2 = integrate(m2_integrand, lo, hi, abs_tol=1e-14, rel_tol=1e-12).value
    return Density1D(log_eval, (lo, hi), m2, sampler, name)


def make_bump() -> Density1D:
    """The normalized smooth bump ``exp(-1/(x(1/2 - x)))`` on (0, 1/2)."""
    def log_g(x):
        x = np.asarray(x, dtype=float)
        return -1.0 / (x * (0.5 - x))
    return from_log_unnormalized(log_g, (0.0, 0.5), name="bump")


def scaled_density(phi: Density1D, eps: float) -> Density1D:
    """phi_eps(x) = phi(x / eps) / eps."""
    if not eps > 0:
        raise FamilyError("scale must be positive")
    lo, hi = phi.support
    base = phi.sampler
    return Density1D(
        log_eval=lambda x: phi.log_eval(np.asarray(x, dtype=float) / eps) - math.log(eps),
        support=(lo * eps, hi * eps),
        second_moment=phi.second_moment * eps * eps,
        sampler=None if base is None else (lambda gen, size: eps * base(gen, size)),
        name=f"{phi.name}_eps",
        breakpoints=tuple(p * eps for p in phi.breakpoints),
    )


GAMMA = None  # filled lazily by standard_gaussian()


def standard_gaussian() -> Density1D:
    global GAMMA
    if GAMMA is None:
        GAMMA = make_gaussian(1.0)
    return GAMMA


# --- families on Kac's sphere -----------------------------------------------

@dataclass(eq=False)
class DensityFamily:
    """A symmetric probability density on S^{N-1}(sqrt(N)) w.r.t. the uniform measure."""

    name: str
    N: int
    log_density: Callable[[np.ndarray], np.ndarray]
    exact_sampler: Optional[Callable] = None
    claimed_limit: Optional[Density1D] = None
    params: dict = field(default_factory=dict)
    kind: str = "generic"

    def __post_init__(self):
        if self.N < 2:
            raise FamilyError("need N >= 2")

    @property
    def radius(self) -> float:
        return math.sqrt(self.N)

    def density(self, v):
        return np.exp(self.log_density(np.asarray(v, dtype=float)))

    def sample(self, rng, size: int) -> np.ndarray:
        """``size`` exact draws as an array of shape (size, N)."""
        if self.exact_sampler is None:
            raise FamilyError(f"family {self.name} has no exact sampler")
        return self.exact_sampler(as_generator(rng), int(size))


def _check_N(N, least=3):
    if int(N) != N or N < least:
        raise FamilyError(f"need integer N >= {least}, got {N}")


def make_uniform_family(N: int) -> DensityFamily:
    _check_N(N, 2)
    return DensityFamily(
        "uniform", N,
        log_density=lambda v: np.zeros(np.shape(v)[:-1]),
        exact_sampler=lambda gen, size: sample_uniform(N, math.sqrt(N), gen, size),
        claimed_limit=standard_gaussian(),
        kind="uniform",
    )


def _product_log_bound(f: Density1D, N: int) -> float:
    """Upper bound of ``sum_i ln f(v_i)`` on Kac's sphere.

    With ``g(w) = max ln f(+-sqrt(w))`` and any multiplier ``lam``,
    ``sum g(w_i) <= N sup_{0<=w<=N} [g(w) + lam (w - 1)]`` since ``sum w_i = N``;
    the bound is minimized over ``lam``.
    """
    w = np.linspace(0.0, float(N), 20001)
    r = np.sqrt(w)
    g = np.maximum(f.log_eval(r), f.log_eval(-r))
    g = np.where(np.isfinite(g), g, -np.inf)
    step = w[1] - w[0]

    def upper(lam):
        vals = g + lam * (w - 1.0)
        k = int(np.argmax(vals))
        a, b = w[max(k - 1, 0)], w[min(k + 1, w.size - 1)]

        def neg(t):
            rt = math.sqrt(t)
            gt = max(float(f.log_eval(rt)), float(f.log_eval(-rt)))
            return -(gt + lam * (t - 1.0))
        res = optimize.minimize_scalar(neg, bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12 * max(1.0, b)})
        return max(float(vals[k]), -float(res.fun))

    res = optimize.minimize_scalar(upper, bounds=(-50.0, 50.0), method="bounded")
    best = min(upper(float(res.x)), upper(0.0))
    # safety margin for the grid/optimizer
    return N * best + 1e-9 * N * max(1.0, abs(best)) + 1e-6 * step


def make_conditioned_tensor(f: Density1D, N: int, znorm=None, name=None,
                            max_rejection: float = 1e4) -> DensityFamily:
    """prod f(v_i) / Z_N(f, sqrt(N)) on Kac's sphere.

    ``znorm(n, u)`` returns ln Z_n(f, sqrt(u)) (vectorized in u); the default
    is the FFT route. An exact rejection sampler from the uniform measure is
    attached when the expected number of proposals per draw is below
    ``max_rejection``.
    """
    _check_N(N)
    try:
        m4 = f.expect(lambda x: x ** 4)
    except QuadratureError as exc:
        raise FamilyError(f"{f.name}: fourth moment does not converge ({exc})") from exc
    if not math.isfinite(m4):
        raise FamilyError(f"{f.name}: infinite fourth moment")
    if znorm is None:
        znorm = lambda n, u: log_znorm_exact(f, n, u)
    log_Z = float(znorm(N, float(N)))
    if not math.isfinite(log_Z):
        raise FamilyError(f"Z_N({f.name}) is not positive and finite")

    def log_density(v):
        v = np.asarray(v, dtype=float)
        return np.sum(f.log_eval(v), axis=-1) - log_Z

    bound = _product_log_bound(f, N)
    log_accept = log_Z - bound
    sampler = None
    if log_accept > -math.log(max_rejection):
        def sampler(gen, size):
            out = np.empty((size, N))
            filled = 0
            batch = max(16, int(min(1e6 / N, 2 * size * math.exp(-log_accept) + 16)))
            while filled < size:
                prop = sample_uniform(N, math.sqrt(N), gen, batch)
                logp = np.sum(f.log_eval(prop), axis=-1) - bound
                acc = prop[np.log(gen.random(batch)) < logp]
                take = min(acc.shape[0], size - filled)
                out[filled:filled + take] = acc[:take]
                filled += take
            return out

    limit = f if abs(f.second_moment - 1.0) < 1e-6 else None
    return DensityFamily(
        name or f"tensor({f.name})", N, log_density, sampler, limit,
        params={"f": f, "znorm": znorm, "log_Z": log_Z, "log_accept": log_accept},
        kind="tensor",
    )


def make_mixture_family(N: int, eta: float = 0.9, znorm="exact") -> DensityFamily:
    """Conditioned tensorization of the mixture f_N; chaotic towards M_{1/2}.

    ``znorm`` is "exact" (FFT), "asymptotic" (local-CLT form) or a callable.
    """
    _check_N(N)
    params = MixtureParams(eta, N)
    f = mixture_density(params)
    mode = znorm if isinstance(znorm, str) else "custom"
    if znorm == "exact":
        znorm = None
    elif znorm == "asymptotic":
        znorm = lambda n, u: log_znorm_asymptotic(params.sigma_N_sq, n, u)
    elif isinstance(znorm, str):
        raise FamilyError(f"unknown normalization mode {znorm!r}")
    fam = make_conditioned_tensor(f, N, znorm, name=f"mixture(eta={eta:g})")
    fam.claimed_limit = make_gaussian(0.5)
    fam.params.update(mixture=params, znorm_mode=mode)
    fam.kind = "mixture"
    return fam


def make_gaussian_tensor(a: float, N: int) -> DensityFamily:
    """Conditioned tensor of M_a with the constant-on-sphere normalization."""
    f = make_gaussian(a)
    return make_conditioned_tensor(f, N, znorm=lambda n, u: gaussian_log_znorm(a, n, u),
                                   name=f"tensor(M_{a:g})")


def _uniform_on_subsphere(gen, size, n, radius):
    """``size`` points uniform on S^{n-1}(radius) with per-row radii."""
    x = gen.standard_normal((size, n))
    x /= np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    return x * np.asarray(radius, dtype=float).reshape(-1, 1)


def _place_axis(gen, size, N, axis_val, rest_radius, index):
    """Assemble points with coordinate ``index[r]`` = ``axis_val[r]`` and the rest uniform."""
    rest = _uniform_on_subsphere(gen, size, N - 1, rest_radius)
    out = np.empty((size, N))
    out[:, :-1] = rest
    out[:, -1] = axis_val
    rows = np.arange(size)
    # move the last column into position ``index`` by a swap (the rest is exchangeable)
    tmp = out[rows, index].copy()
    out[rows, index] = out[:, -1]
    out[:, -1] = tmp
    return out


def make_polynomial_family(N: int, power=2) -> DensityFamily:
    """sum_i |v_i|^m / z on Kac's sphere; ``power`` is m > 0 or ``"varying"`` (m = N)."""
    _check_N(N, 2)
    m = poly_exponent(N, power)
    log_z = zpoly(N, power).log()

    def log_density(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            return logsumexp(m * np.log(np.abs(v)), axis=-1) - log_z

    def sampler(gen, size):
        index = gen.integers(0, N, size)
        t = gen.beta(0.5 * (m + 1), 0.5 * (N - 1), size)
        sign = np.where(gen.random(size) < 0.5, -1.0, 1.0)
        vi = sign * np.sqrt(N * t)
        rest = np.sqrt(np.clip(N * (1.0 - t), 0.0, None))
        return _place_axis(gen, size, N, vi, rest, index)

    varying = power == VARYING
    return DensityFamily(
        "poly(varying)" if varying else f"poly(m={m:g})", N, log_density, sampler,
        make_gaussian(0.5) if varying else standard_gaussian(),
        params={"m": m, "varying": varying, "log_z": log_z},
        kind="polynomial",
    )


def default_eps(N: int) -> float:
    return 1.0 / math.log(N + math.e)


def make_concentration_family(N: int, phi: Density1D = None, eps: float = None) -> DensityFamily:
    """Equal mixture over the 2N poles +-sqrt(N) e_i of caps with elevation law phi_eps.

    The cap density at elevation ``xi`` from its pole is
    ``Gamma((N-1)/2) sqrt(pi) / Gamma(N/2) * phi_eps(xi) / sin^{N-2}(xi)``.
    """
    _check_N(N)
    phi = make_bump() if phi is None else phi
    eps = default_eps(N) if eps is None else float(eps)
    lo, hi = phi.support
    if lo < 0 or hi > 0.5:
        raise FamilyError("phi must be supported in (0, 1/2)")
    if not 0 < eps < math.pi / 2:
        raise FamilyError(f"eps must lie in (0, pi/2), got {eps}")
    phi_eps = scaled_density(phi, eps)
    log_c = log_gamma(0.5 * (N - 1)) + 0.5 * math.log(math.pi) - log_gamma(0.5 * N)
    log_poles = math.log(2 * N)

    def log_density(v):
        v = np.asarray(v, dtype=float)
        sq = np.sum(v * v, axis=-1, keepdims=True)
        rest = np.clip(sq - v * v, 0.0, None)
        # elevation from the nearer pole on each axis; the far pole is outside its cap
        xi = np.arctan2(np.sqrt(rest), np.abs(v))
        # exactly on a pole the 0/0 is treated as zero density (the bump vanishes there)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_sin = 0.5 * (np.log(rest) - np.log(sq))
            lb = log_c + phi_eps.log_eval(xi) - (N - 2) * log_sin
        lb = np.where(np.isfinite(lb), lb, -np.inf)
        return logsumexp(lb, axis=-1) - log_poles

    def sampler(gen, size):
        index = gen.integers(0, N, size)
        sign = np.where(gen.random(size) < 0.5, -1.0, 1.0)
        xi = phi_eps.sample(gen, size)
        R = math.sqrt(N)
        return _place_axis(gen, size, N, sign * R * np.cos(xi), R * np.sin(xi), index)

    return DensityFamily(
        f"concentration(eps={eps:.6g})", N, log_density, sampler, None,
        params={"phi": phi, "eps": eps, "phi_eps": phi_eps, "log_c": log_c},
        kind="concentration",
    )


def beta_rule(rule, N: int) -> float:
    if rule in ("sqrt", None):
        return math.sqrt(N)
    if rule == "log":
        return math.log(N)
    return float(rule)


def make_stereographic_family(N: int, zeta: Density1D = None, beta=None) -> DensityFamily:
    """Average over axes i of the extensions J_{i,sqrt(N)} of the chart density
    ``prod_{j<N} zeta(x_j - beta)``.

    ``J_{i,R}(v) = |S^{N-1}| R^{2N-2} (R + v_i)^{1-N} zeta_N(x)``, with x the
    axis-i stereographic chart coordinates of v.
    """
    _check_N(N)
    zeta = make_uniform(0.0, 1.0) if zeta is None else zeta
    lo, hi = zeta.support
    if lo < 0 or hi > 1:
        raise FamilyError("zeta must be supported in [0, 1]")
    probe = np.linspace(0.01, 0.49, 49)
    if np.any(np.abs(np.exp(zeta.log_eval(probe)) - np.exp(zeta.log_eval(1.0 - probe)))
              > 1e-10 * np.maximum(1.0, np.exp(zeta.log_eval(probe)))):
        raise FamilyError("zeta must be symmetric about 1/2")
    if zeta.sampler is None:
        raise FamilyError("zeta needs a sampler")
    beta = beta_rule(beta, N)
    R = math.sqrt(N)
    log_const = sphere_log_area(N) + (2 * N - 2) * math.log(R)

    def log_density(v):
        v = np.asarray(v, dtype=float)
        flat = v.reshape(-1, N)
        terms = np.full(flat.shape, -np.inf)
        for i in range(N):
            denom = R + flat[:, i]
            ok = denom > 1e-9 * R
            safe = np.where(ok, denom, 1.0)
            x = R * np.delete(flat, i, axis=1) / safe[:, None]
            lz = np.sum(zeta.log_eval(x - beta), axis=1)
            with np.errstate(invalid="ignore"):
                ti = log_const - (N - 1) * np.log(safe) + lz
            terms[:, i] = np.where(ok & np.isfinite(lz), ti, -np.inf)
        return (logsumexp(terms, axis=1) - math.log(N)).reshape(v.shape[:-1])

    def sampler(gen, size):
        index = gen.integers(0, N, size)
        x = beta + zeta.sample(gen, size * (N - 1)).reshape(size, N - 1)
        out = np.empty((size, N))
        for i in np.unique(index):
            rows = index == i
            out[rows] = stereo_forward_axis(x[rows], R, int(i))
        return out

    return DensityFamily(
        f"stereo(beta={beta:.6g})", N, log_density, sampler, None,
        params={"zeta": zeta, "beta": beta},
        kind="stereographic",
    )


def make_convex_combination(G: DensityFamily, F: DensityFamily, alpha: float) -> DensityFamily:
    """(1 - alpha) G + alpha F."""
    if G.N != F.N:
        raise FamilyError(f"components live on different spheres: N={G.N} vs N={F.N}")
    if not 0 < alpha < 1:
        raise FamilyError(f"alpha must lie in (0, 1), got {alpha}")
    la, lb = math.log1p(-alpha), math.log(alpha)

    def log_density(v):
        return np.logaddexp(la + G.log_density(v), lb + F.log_density(v))

    sampler = None
    if G.exact_sampler is not None and F.exact_sampler is not None:
        def sampler(gen, size):
            pick_f = gen.random(size) < alpha
            out = np.empty((size, G.N))
            nf = int(pick_f.sum())
            if nf:
                out[pick_f] = F.exact_sampler(gen, nf)
            if nf < size:
                out[~pick_f] = G.exact_sampler(gen, size - nf)
            return out

    return DensityFamily(
        f"convex({G.name},{F.name},alpha={alpha:.6g})", G.N, log_density, sampler,
        G.claimed_limit, params={"G": G, "F": F, "alpha": alpha}, kind="convex",
    )


def alpha_rule(h_per_particle: float) -> float:
    """min(1/2, h^{-1/2}); h <= 0 gives 1/2."""
    if not h_per_particle > 0:
        return 0.5
    return min(0.5, h_per_particle ** -0.5)


# --- descriptor grammar -------------------------------------------------------

def _kv(parts):
    out = {}
    for p in parts:
        if not p:
            continue
        if "=" not in p:
            raise FamilyError(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_family(descriptor: str, N: int, entropy_hook=None) -> DensityFamily:
    """Build a family from a descriptor such as ``poly:m=2`` or
    ``convex:G=uniform,F=concentration:eps=auto,alpha=auto``.

    ``entropy_hook(F)`` returns the per-particle entropy used by
    ``alpha=auto``; by default the entropy module's best estimate is used.
    """
    desc = descriptor.strip()
    head, _, rest = desc.partition(":")
    if head == "uniform":
        return make_uniform_family(N)
    if head == "tensor":
        base, _, opts = rest.partition(":")
        kv = _kv(opts.split(","))
        if base == "mixture":
            return make_mixture_family(N, float(kv.get("eta", 0.9)), kv.get("znorm", "exact"))
        if base == "gaussian":
            return make_gaussian_tensor(float(kv.get("a", 1.0)), N)
        raise FamilyError(f"unknown tensor base {base!r}")
    if head == "poly":
        if rest == "varying":
            return make_polynomial_family(N, VARYING)
        kv = _kv(rest.split(","))
        return make_polynomial_family(N, float(kv.get("m", 2)))
    if head == "concentration":
        kv = _kv(rest.split(","))
        eps = kv.get("eps", "auto")
        return make_concentration_family(N, eps=None if eps == "auto" else float(eps))
    if head == "stereo":
        kv = _kv(rest.split(","))
        return make_stereographic_family(N, beta=kv.get("beta", "sqrt"))
    if head == "convex":
        kv = _kv(re.split(r",(?=(?:G|F|alpha)=)", rest))
        if "G" not in kv or "F" not in kv:
            raise FamilyError("convex descriptor needs G= and F=")
        G = parse_family(kv["G"], N, entropy_hook)
        F = parse_family(kv["F"], N, entropy_hook)
        alpha = kv.get("alpha", "auto")
        if alpha == "auto":
            if entropy_hook is None:
                from .entropy import per_particle_entropy
                entropy_hook = per_particle_entropy
            alpha = alpha_rule(entropy_hook(F))
        return make_convex_combination(G, F, float(alpha))
    raise FamilyError(f"unknown family descriptor {descriptor!r}")
