"""Entropy functionals on Kac's sphere.

``H_N(F) = int F ln F dsigma`` is computed by exact one-dimensional reduction
where the family allows it, by closed forms plus Monte Carlo for the chart
families, and by plain Monte Carlo otherwise.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .densities import (
    Density1D, DensityFamily, FamilyError, beta_rule, default_eps,
    make_bump, make_mixture_family, make_uniform, scaled_density,
)
from .marginals import marginal_conditioned_tensor
from .montecarlo import EntropyEstimate, estimate_mean
from .normalization import zpoly
from .quadrature import integrate
from .specfun import log_gamma, sphere_log_area
from .sphere import sphere_sampler

LN2_HALF = 0.5 * math.log(2.0)
# H(M_{1/2} | gamma)
M_HALF_REL_ENTROPY = LN2_HALF - 0.25
ESS_FLOOR = 100.0
POLY_ALPHA = 2.0 / math.log(2.0)


def rel_entropy_1d(f: Density1D, g: Density1D) -> float:
    """H(f | g) = int f ln(f/g); +inf when f charges a set where g vanishes."""
    lo, hi = f.support
    glo, ghi = g.support
    if lo < glo or hi > ghi:
        # check on a probe grid whether f has mass outside supp g
        probe = np.linspace(max(lo, -50.0), min(hi, 50.0), 10001)
        lf, lg = f.log_eval(probe), g.log_eval(probe)
        if np.any(np.isfinite(lf) & ~np.isfinite(lg)):
            return math.inf

    def integrand(x):
        lf = f.log_eval(x)
        lg = g.log_eval(x)
        ok = np.isfinite(lf)
        if np.any(ok & ~np.isfinite(lg)):
            raise _Infinite()
        with np.errstate(invalid="ignore"):
            return np.where(ok, np.exp(lf) * (lf - lg), 0.0)

    try:
        return integrate(integrand, lo, hi, abs_tol=1e-13, rel_tol=1e-12,
                         points=f.breakpoints).value
    except _Infinite:
        return math.inf


class _Infinite(Exception):
    pass


def entropy_mc(family: DensityFamily, n: int, strategy: str = "self-sampled", seed: int = 0,
               shards: int = 1) -> EntropyEstimate:
    """Monte Carlo H_N: ``E_sigma[F ln F]`` (uniform-weighted) or ``E_F[ln F]`` (self-sampled).

    The uniform-weighted estimate carries the importance-sampling effective
    sample size ``(sum F)^2 / sum F^2`` and is flagged unreliable below 100.
    """
    N = family.N
    if strategy == "self-sampled":
        if family.exact_sampler is None:
            raise FamilyError(f"{family.name} has no exact sampler for self-sampled entropy")
        est = estimate_mean(family.log_density, lambda s, size: family.sample(s, size),
                            n, shards, seed, "self-sampled")
        return EntropyEstimate(est.value, est.std_error, est.n_samples, est.method, float(n))
    if strategy != "uniform-weighted":
        raise ValueError(f"unknown strategy {strategy!r}")
    sampler = sphere_sampler(N)

    def f_ln_f(v):
        ld = family.log_density(v)
        return np.where(np.isfinite(ld), np.exp(ld) * np.where(np.isfinite(ld), ld, 0.0), 0.0)

    est = estimate_mean(f_ln_f, sampler, n, shards, seed, "uniform-weighted")
    # the weights themselves, for the effective sample size
    wts = estimate_mean(lambda v: np.exp(family.log_density(v)), sampler, n, shards, seed)
    w2 = estimate_mean(lambda v: np.exp(2 * family.log_density(v)), sampler, n, shards, seed)
    ess = n * wts.value ** 2 / w2.value if w2.value > 0 else 0.0
    return EntropyEstimate(est.value, est.std_error, est.n_samples, "uniform-weighted",
                           ess, reliable=ess >= ESS_FLOOR)


def entropy_mixture_reduced(N: int, eta: float = 0.9, mode: str = "exact") -> float:
    """H_N/N of the mixture family by reduction to the first marginal.

    ``H_N / N = int Pi_1(v) ln f_N(v) dv - ln Z_N(f_N, sqrt(N)) / N``.
    """
    if N < 4:
        raise ValueError("need N >= 4")
    fam = make_mixture_family(N, eta, mode)
    f = fam.params["f"]
    R = math.sqrt(N)

    def integrand(x):
        return marginal_conditioned_tensor(fam, 1, x) * f.log_eval(x)

    pts = [p for p in f.breakpoints if -R < p < R]
    val = integrate(integrand, -R, R, abs_tol=1e-12, rel_tol=1e-10, points=pts).value
    return val - fam.params["log_Z"] / N


def concentration_terms(N: int, phi: Density1D, eps: float) -> dict:
    """The pieces of the concentration-family entropy, each by quadrature."""
    if not 0 < eps < math.pi / 2:
        raise FamilyError("caps overlap unless 0 < eps < pi/2")
    phi_eps = scaled_density(phi, eps)
    h_phi_eps = phi_eps.entropy_integral()
    # int phi(t) ln sin(eps t) dt, written in the unscaled variable
    ln_sin = phi.expect(lambda t: np.log(np.sin(eps * np.maximum(t, 1e-300))))
    log_c = log_gamma(0.5 * (N - 1)) + 0.5 * math.log(math.pi) - log_gamma(0.5 * N)
    return {"h_phi_eps": h_phi_eps, "log_c": log_c, "ln_sin": ln_sin, "log_poles": math.log(2 * N)}


def entropy_concentration_exact(N: int, phi: Density1D = None, eps: float = None) -> float:
    """H_N of the 2N-cap family:
    ``int phi_eps ln phi_eps + ln C_N - (N-2) int phi_eps ln sin - ln(2N)``."""
    phi = make_bump() if phi is None else phi
    eps = default_eps(N) if eps is None else eps
    t = concentration_terms(N, phi, eps)
    return t["h_phi_eps"] + t["log_c"] - (N - 2) * t["ln_sin"] - t["log_poles"]


def concentration_lower_reference(eps: float, phi: Density1D = None) -> float:
    """-ln eps - ln 2 - int phi ln xi - 1, the finite-N reference for the per-particle entropy."""
    phi = make_bump() if phi is None else phi
    return -math.log(eps) - math.log(2.0) - phi.expect(np.log) - 1.0


def stereo_deterministic(N: int, zeta: Density1D) -> float:
    """The translation-invariant part of H_N(J_{1,sqrt(N)}):
    ``(N-1) int zeta ln zeta + ln|S^{N-1}| - (N-1) ln(2 sqrt(N))``."""
    return ((N - 1) * zeta.entropy_integral() + sphere_log_area(N)
            - (N - 1) * math.log(2.0 * math.sqrt(N)))


class StereoEntropy(NamedTuple):
    h_J: EntropyEstimate          # H_N(J_{1,sqrt(N)})
    lower_bound: float            # H_N(J) - ln N, a lower bound for H_N(F_N)


def entropy_stereo(N: int, zeta: Density1D = None, beta=None, n: int = 20_000,
                   seed: int = 0) -> StereoEntropy:
    """H_N(J) = deterministic part + (N-1) E[ln(|x|^2 + N)], x ~ prod zeta(x_j - beta)."""
    zeta = make_uniform(0.0, 1.0) if zeta is None else zeta
    beta = beta_rule(beta, N)

    def sampler(stream, size):
        gen = stream.generator()
        return beta + zeta.sample(gen, size * (N - 1)).reshape(size, N - 1)

    def integrand(x):
        return np.log(np.sum(x * x, axis=1) + N)

    est = estimate_mean(integrand, sampler, n, master_seed=seed, method="self-sampled")
    total = est.scaled(N - 1, stereo_deterministic(N, zeta))
    return StereoEntropy(total, total.value - math.log(N))


def stereo_reference(N: int, zeta: Density1D = None, beta=None) -> float:
    """ln(1 + (beta_N - 1)^2) - 2, the finite-N reference for the per-particle bound."""
    beta = beta_rule(beta, N)
    return math.log(1.0 + (abs(beta) - 1.0) ** 2) - 2.0


def poly_tail_term(N: int, alpha: float = POLY_ALPHA) -> float:
    """ln of Gamma((N-alpha+1)/2) Gamma(N/2) / (sqrt(pi) alpha e Gamma(N - alpha/2))."""
    return (log_gamma(0.5 * (N - alpha + 1)) + log_gamma(0.5 * N) - 0.5 * math.log(math.pi)
            - math.log(alpha) - 1.0 - log_gamma(N - 0.5 * alpha))


def entropy_poly_bound(N: int) -> float:
    """Finite-N lower bound for H_N/N of the varying polynomial family.

    ``ln N / 2 - N^{N/2+1} T_N / z_N - ln z_N / N`` where T_N is the
    Gamma-ratio tail term at alpha = 2/ln 2.
    """
    if N < 4:
        raise ValueError("need N >= 4")
    log_z = zpoly(N, "varying").log()
    tail = math.exp((0.5 * N + 1) * math.log(N) + poly_tail_term(N) - log_z)
    return 0.5 * math.log(N) - tail - log_z / N


def entropy_poly_fixed_bound(N: int, m: float = 2.0) -> float:
    """Upper bound ``m ln N / 2 - ln z_{N,m}`` for H_N of the fixed-power family."""
    if N < 4:
        raise ValueError("need N >= 4")
    if not m > 0:
        raise ValueError("m must be positive")
    return 0.5 * m * math.log(N) - zpoly(N, m).log()


class ConvexBounds(NamedTuple):
    lower: float
    upper: float


def entropy_convex_bounds(hG: float, hF: float, alpha: float) -> ConvexBounds:
    """Bounds for H_N((1-alpha) G + alpha F) from the component entropies."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not (math.isfinite(hG) and math.isfinite(hF)):
        raise ValueError("component entropies must be finite")
    upper = (1 - alpha) * hG + alpha * hF
    lower = upper + (1 - alpha) * math.log1p(-alpha) + alpha * math.log(alpha)
    return ConvexBounds(lower, upper)


def tv_mc(family: DensityFamily, n: int, seed: int = 0) -> EntropyEstimate:
    """``int |F - 1| dsigma = 2 E_sigma[(1 - F)_+]``; the positive part keeps the variance bounded."""
    est = estimate_mean(lambda v: 2.0 * np.clip(1.0 - np.exp(family.log_density(v)), 0.0, None),
                        sphere_sampler(family.N), n, master_seed=seed, method="uniform-weighted")
    return est


def cklp_check(tv: float, H: float, sigma_tv: float = 0.0, sigma_H: float = 0.0) -> bool:
    """tv^2 <= 2 H, each side relaxed by 3 of its standard errors."""
    if tv < 0 or tv > 2 + 3 * sigma_tv:
        raise ValueError(f"total variation must lie in [0, 2], got {tv}")
    t = max(tv - 3.0 * sigma_tv, 0.0)
    return t * t <= 2.0 * (max(H, 0.0) + 3.0 * sigma_H) + 1e-12


def per_particle_entropy(family: DensityFamily, n: int = 20_000, seed: int = 0) -> float:
    """Best available H_N/N for a family (used by the alpha = auto rule)."""
    N = family.N
    kind = family.kind
    if kind == "uniform":
        return 0.0
    if kind == "concentration":
        return entropy_concentration_exact(N, family.params["phi"], family.params["eps"]) / N
    if kind == "stereographic":
        return entropy_stereo(N, family.params["zeta"], family.params["beta"], n, seed).lower_bound / N
    if kind == "mixture" and N >= 4:
        return entropy_mixture_reduced(N, family.params["mixture"].eta,
                                       family.params.get("znorm_mode", "exact"))
    return entropy_mc(family, n, "self-sampled", seed).value / N


# --- reports --------------------------------------------------------------------

REPORT_HEADER = "family,N,method,h_per_particle,std_error_per_particle,target,bound_lower,ess"


def _fmt(x) -> str:
    return "" if x is None else f"{x:.12g}"


@dataclass
class EntropyReport:
    family: str
    N: int
    estimate: EntropyEstimate
    target: Optional[float] = None
    bound_lower: Optional[float] = None
    limit_entropy: Optional[float] = None

    @property
    def respects_bound(self) -> bool:
        """h >= bound_lower - 3 se (per particle); closed-form rows must meet the bound exactly."""
        if self.bound_lower is None:
            return True
        slack = 0.0 if self.estimate.method == "closed-form" else 3 * self.std_error_per_particle
        return self.h_per_particle >= self.bound_lower - slack - 1e-12

    @property
    def h_per_particle(self) -> float:
        return self.estimate.value / self.N

    @property
    def std_error_per_particle(self) -> float:
        return self.estimate.std_error / self.N

    @property
    def entropically_chaotic_consistent(self) -> str:
        """"yes"/"no"/"undetermined" against H(claimed limit | gamma)."""
        if self.limit_entropy is None:
            return "undetermined"
        slack = 3 * self.std_error_per_particle + 1e-3
        return "yes" if abs(self.h_per_particle - self.limit_entropy) <= slack else "no"

    def csv_row(self) -> str:
        ess = self.estimate.ess
        return ",".join([
            self.family, str(self.N), self.estimate.method, _fmt(self.h_per_particle),
            _fmt(self.std_error_per_particle), _fmt(self.target), _fmt(self.bound_lower),
            _fmt(ess),
        ])


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    buf.write(REPORT_HEADER + "\n")
    for r in reports:
        buf.write(r.csv_row() + "\n")
    return buf.getvalue()
