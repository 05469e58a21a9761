"""Per-family numerical experiments: build a family for each N, measure its
marginal gap and entropy, and check the expected finite-N trends.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import entropy as ent
from .densities import (
    VARYING, default_eps, make_bump, make_concentration_family, make_convex_combination,
    make_gaussian, make_mixture_family, make_polynomial_family, make_stereographic_family,
    make_uniform_family, alpha_rule, scaled_density, standard_gaussian,
)
from .entropy import EntropyReport, LN2_HALF, M_HALF_REL_ENTROPY
from .marginals import chaoticity_gap
from .montecarlo import EntropyEstimate

SCENARIOS = ("thm-mixture", "thm-polynomial", "thm-concentration", "thm-stereographic",
             "thm-convex", "verify")
MC_SCENARIOS = ("thm-polynomial", "thm-stereographic", "thm-convex")

DEFAULT_N = {
    "thm-mixture": (100, 1000, 10000),
    "thm-polynomial": (50, 100, 200),
    "thm-concentration": (10, 100, 1000, 10000),
    "thm-stereographic": (100, 1000),
    "thm-convex": (100, 1000),
    "verify": (50, 100, 200),
}


class ConfigError(ValueError):
    pass


class ScenarioError(RuntimeError):
    def __init__(self, scenario, N, stage, cause):
        super().__init__(f"{scenario}: N={N}, stage '{stage}': {cause}")
        self.N, self.stage = N, stage


@dataclass
class ScenarioConfig:
    scenario: str
    N_list: tuple = ()
    eta: float = 0.9
    eps_rule: str = "invlog"
    beta_rule: str = "sqrt"
    alpha_rule: str = "adaptive"
    m: float = 2.0
    samples: int = 100_000
    seed: int = 7
    csv: Optional[str] = None
    svg: Optional[str] = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if not self.N_list:
            self.N_list = DEFAULT_N[self.scenario]
        self.N_list = tuple(int(n) for n in self.N_list)
        if any(b <= a for a, b in zip(self.N_list, self.N_list[1:])):
            raise ConfigError(f"N list must be strictly increasing, got {self.N_list}")
        if self.N_list[0] < 4:
            raise ConfigError("every N must be >= 4")
        if self.scenario in MC_SCENARIOS and self.samples < 1000:
            raise ConfigError("Monte Carlo scenarios need samples >= 1000")
        if not 0 < self.eta <= 1:
            raise ConfigError("eta must lie in (0, 1]")

    def eps(self, N: int) -> float:
        if self.eps_rule == "invlog":
            return default_eps(N)
        return float(self.eps_rule)

    def alpha(self, h_F: float) -> float:
        if self.alpha_rule == "adaptive":
            return alpha_rule(h_F)
        return float(self.alpha_rule)


@dataclass
class Row:
    N: int
    report: Optional[EntropyReport] = None
    sup_gap: Optional[float] = None
    l1_gap: Optional[float] = None
    extra: dict = field(default_factory=dict)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    rows: list
    assertions: list          # (name, bool)
    wall_time: float = 0.0
    target: Optional[float] = None
    limit_entropy: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.assertions)

    @property
    def verdict(self) -> str:
        failed = [name for name, ok in self.assertions if not ok]
        if not failed:
            return f"PASS ({len(self.assertions)} assertions)"
        return "FAIL: " + "; ".join(failed)

    def to_csv(self) -> str:
        """Entropy rows, then marginal-gap rows, then assertion footer lines."""
        buf = io.StringIO()
        buf.write(ent.REPORT_HEADER + "\n")
        for r in self.rows:
            if r.report is not None:
                buf.write(r.report.csv_row() + "\n")
        gap_rows = [r for r in self.rows if r.sup_gap is not None]
        if gap_rows:
            buf.write("\nN,k,sup_gap,l1_gap\n")
            for r in gap_rows:
                buf.write(f"{r.N},1,{r.sup_gap:.12g},{r.l1_gap:.12g}\n")
        buf.write("\n")
        for name, ok in self.assertions:
            buf.write(f"#assert,{name},{'PASS' if ok else 'FAIL'}\n")
        buf.write(f"#verdict,{'PASS' if self.passed else 'FAIL'}\n")
        return buf.getvalue()


def strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def strictly_increasing(xs) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


def _stage(cfg, N, stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:  # name the failing N and stage
        raise ScenarioError(cfg.scenario, N, stage, exc) from exc


def _closed(value, n=1, method="exact-reduction"):
    return EntropyEstimate(float(value), 0.0, n, method)


# --- scenarios ---------------------------------------------------------------

def run_mixture(cfg: ScenarioConfig) -> ScenarioResult:
    rows, tv_pairs = [], []
    for N in cfg.N_list:
        h = _stage(cfg, N, "entropy", ent.entropy_mixture_reduced, N, cfg.eta, "asymptotic")
        fam = _stage(cfg, N, "family", make_mixture_family, N, cfg.eta, "exact")
        gap = _stage(cfg, N, "marginal", chaoticity_gap, fam, 1)
        rep = EntropyReport(fam.name, N, _closed(h * N), LN2_HALF, None, M_HALF_REL_ENTROPY)
        rows.append(Row(N, rep, gap.sup_gap, gap.l1_gap, {"h_asym": h}))
        # first-marginal TV to the uniform marginal is below the full TV
        tv_pairs.append((_marginal_tv_to_uniform(fam), h * N))
    dist = [abs(r.report.h_per_particle - LN2_HALF) for r in rows]
    asserts = [
        ("entropy_gap_to_ln2_half_decreasing", strictly_decreasing(dist)),
        ("sup_gap_to_M_half_decreasing", strictly_decreasing([r.sup_gap for r in rows])),
        ("target_exceeds_limit_entropy_by_quarter", abs(LN2_HALF - M_HALF_REL_ENTROPY - 0.25) < 1e-15),
        ("cklp", all(ent.cklp_check(tv, H) for tv, H in tv_pairs)),
    ]
    return ScenarioResult(cfg, rows, asserts, target=LN2_HALF, limit_entropy=M_HALF_REL_ENTROPY)


def _marginal_tv_to_uniform(fam) -> float:
    from .marginals import analytic_evaluator, marginal_prefactor_log
    from .quadrature import integrate
    ev = analytic_evaluator(fam, 1)
    R = math.sqrt(fam.N)
    return integrate(lambda x: np.abs(ev(x) - np.exp(marginal_prefactor_log(fam.N, 1, x))),
                     -R, R, abs_tol=1e-9, rel_tol=1e-7, points=[0.0]).value


def run_polynomial(cfg: ScenarioConfig) -> ScenarioResult:
    rows, fixed_gaps, tv_pairs = [], [], []
    for N in cfg.N_list:
        fam = _stage(cfg, N, "family", make_polynomial_family, N, VARYING)
        gap = _stage(cfg, N, "marginal", chaoticity_gap, fam, 1)
        est = _stage(cfg, N, "entropy", ent.entropy_mc, fam, cfg.samples, "self-sampled", cfg.seed)
        bound = ent.entropy_poly_bound(N)
        rep = EntropyReport(fam.name, N, est, LN2_HALF, bound, M_HALF_REL_ENTROPY)
        rows.append(Row(N, rep, gap.sup_gap, gap.l1_gap))
        fixed = make_polynomial_family(N, cfg.m)
        fixed_gaps.append(chaoticity_gap(fixed, 1).sup_gap)
        tv = ent.tv_mc(fam, cfg.samples, cfg.seed + 1)
        tv_pairs.append((tv.value, est.value, tv.std_error, est.std_error))
    big = 10_000
    asserts = [
        ("varying_sup_gap_to_M_half_decreasing", strictly_decreasing([r.sup_gap for r in rows])),
        ("varying_entropy_above_bound", all(r.report.respects_bound for r in rows)),
        ("varying_bound_near_ln2_half_at_1e4", abs(ent.entropy_poly_bound(big) - LN2_HALF) < 0.02),
        (f"fixed_m{cfg.m:g}_sup_gap_to_gamma_decreasing", strictly_decreasing(fixed_gaps)),
        (f"fixed_m{cfg.m:g}_bound_per_particle_below_0.01_at_1e4",
         ent.entropy_poly_fixed_bound(big, cfg.m) / big < 0.01),
        ("cklp", all(ent.cklp_check(tv, H, st, sH) for tv, H, st, sH in tv_pairs)),
    ]
    for r, g in zip(rows, fixed_gaps):
        r.extra["fixed_sup_gap"] = g
    return ScenarioResult(cfg, rows, asserts, target=LN2_HALF, limit_entropy=M_HALF_REL_ENTROPY)


def run_concentration(cfg: ScenarioConfig) -> ScenarioResult:
    phi = make_bump()
    rows = []
    for N in cfg.N_list:
        eps = cfg.eps(N)
        H = _stage(cfg, N, "entropy", ent.entropy_concentration_exact, N, phi, eps)
        ref = ent.concentration_lower_reference(eps, phi)
        rep = EntropyReport(f"concentration(eps={eps:.6g})", N, _closed(H), None, None, 0.0)
        rows.append(Row(N, rep, extra={"reference": ref}))
    h = [r.report.h_per_particle for r in rows]
    last = rows[-1]
    eps = 0.05
    scale_err = abs(scaled_density(phi, eps).entropy_integral()
                    - (phi.entropy_integral() - math.log(eps)))
    asserts = [
        ("h_per_particle_increasing", strictly_increasing(h)),
        (f"h_exceeds_reference_at_N{last.N}", last.report.h_per_particle > last.extra["reference"]),
        ("scale_identity", scale_err < 1e-8),
        # TV to uniform is at most 2, so tv^2 <= 2H holds once H >= 2
        ("cklp", all(ent.cklp_check(2.0, r.report.estimate.value) for r in rows)),
    ]
    return ScenarioResult(cfg, rows, asserts)


def run_stereographic(cfg: ScenarioConfig) -> ScenarioResult:
    rows = []
    for N in cfg.N_list:
        s = _stage(cfg, N, "entropy", ent.entropy_stereo, N, None, cfg.beta_rule, cfg.samples, cfg.seed)
        lb = s.h_J.scaled(1.0, -math.log(N))
        ref = ent.stereo_reference(N, beta=cfg.beta_rule)
        rep = EntropyReport(f"stereo(beta={cfg.beta_rule})", N, lb, None, ref, None)
        rows.append(Row(N, rep, extra={"reference": ref}))
    h = [r.report.h_per_particle for r in rows]
    asserts = [
        ("lower_bound_increasing", strictly_increasing(h)),
        ("lower_bound_exceeds_reference", all(
            r.report.h_per_particle > r.extra["reference"] for r in rows)),
        ("cklp", all(ent.cklp_check(2.0, r.report.estimate.value, 0.0, r.report.estimate.std_error)
                     for r in rows)),
    ]
    return ScenarioResult(cfg, rows, asserts)


def convex_sandwich(N: int, alpha: float, n: int, seed: int, eps=None):
    """Direct Monte Carlo entropy of (1-alpha) uniform + alpha concentration
    against the bounds from the component entropies."""
    G = make_uniform_family(N)
    F = make_concentration_family(N, eps=eps)
    C = make_convex_combination(G, F, alpha)
    hF = ent.entropy_concentration_exact(N, F.params["phi"], F.params["eps"])
    bounds = ent.entropy_convex_bounds(0.0, hF, alpha)
    est = ent.entropy_mc(C, n, "self-sampled", seed)
    ok = bounds.lower - 3 * est.std_error <= est.value <= bounds.upper + 3 * est.std_error
    return ok, est, bounds


def run_convex(cfg: ScenarioConfig) -> ScenarioResult:
    rows, tv_pairs = [], []
    for N in cfg.N_list:
        eps = cfg.eps(N)
        G = make_uniform_family(N)
        F = _stage(cfg, N, "family", make_concentration_family, N, None, eps)
        hF = _stage(cfg, N, "entropy", ent.entropy_concentration_exact, N, F.params["phi"], eps)
        alpha = cfg.alpha(hF / N)
        C = make_convex_combination(G, F, alpha)
        gap = _stage(cfg, N, "marginal", chaoticity_gap, C, 1)
        b = ent.entropy_convex_bounds(0.0, hF, alpha)
        rep = EntropyReport(C.name, N, _closed(b.lower, method="closed-form"), None, b.lower / N, 0.0)
        rows.append(Row(N, rep, gap.sup_gap, gap.l1_gap, {"alpha": alpha, "upper": b.upper / N}))
        # int |C - 1| = alpha int |F - 1| <= 2 alpha, against the certified lower bound
        tv_pairs.append((2 * alpha, b.lower))
    lows = [r.report.h_per_particle for r in rows]
    n_sw = 20
    ok, est, bounds = convex_sandwich(n_sw, 0.3, max(cfg.samples // 5, 1000), cfg.seed)
    asserts = [
        ("sup_gap_to_gamma_decreasing", strictly_decreasing([r.sup_gap for r in rows])),
        ("lower_bound_increase_at_least_0.5", all(b - a >= 0.5 for a, b in zip(lows, lows[1:]))),
        (f"sandwich_N{n_sw}", ok),
        ("cklp", all(ent.cklp_check(tv, H) for tv, H in tv_pairs)),
    ]
    return ScenarioResult(cfg, rows, asserts)


def run_verify(cfg: ScenarioConfig) -> ScenarioResult:
    """Fast invariant checks across all modules."""
    from . import specfun, sphere
    from .normalization import gaussian_log_znorm, log_znorm_exact, zpoly, zpoly_gamma_route
    checks = []
    lg = specfun.log_gamma
    checks.append(("duplication", max(abs(lg(x) + lg(x + 0.5) - (1 - 2 * x) * math.log(2)
                                          - 0.5 * math.log(math.pi) - lg(2 * x))
                                      for x in np.linspace(0.1, 50, 40)) < 1e-12))
    gen = np.random.default_rng(cfg.seed)
    x = gen.normal(size=(200, 3)) * 3
    back = sphere.stereo_inverse(sphere.stereo_forward(x, 2.0), 2.0)
    checks.append(("stereo_roundtrip", float(np.max(np.abs(back - x))) < 1e-10))
    g = standard_gaussian()
    err = abs(math.expm1(float(log_znorm_exact(g, 10, 10.0)) - float(gaussian_log_znorm(1.0, 10, 10.0))))
    checks.append(("znorm_gamma", err < 1e-5))
    checks.append(("zpoly_gamma_route", max(abs(zpoly(N, VARYING).log() - zpoly_gamma_route(N))
                                            for N in range(3, 201)) < 1e-10))
    grids = [chaoticity_gap(make_uniform_family(N), 1) for N in cfg.N_list]
    checks.append(("uniform_sup_gap_decreasing", strictly_decreasing([g.sup_gap for g in grids])))
    checks.append(("rel_entropy_M_half", abs(ent.rel_entropy_1d(make_gaussian(0.5), g)
                                             - M_HALF_REL_ENTROPY) < 1e-9))
    fam = make_polynomial_family(10, VARYING)
    pts = fam.sample(gen, 20)
    perm = gen.permutation(10)
    checks.append(("symmetry", float(np.max(np.abs(fam.log_density(pts) - fam.log_density(pts[:, perm]))))
                   < 1e-10))
    rows = [Row(g.N, sup_gap=g.sup_gap, l1_gap=g.l1_gap) for g in grids]
    return ScenarioResult(cfg, rows, checks)


RUNNERS = {
    "thm-mixture": run_mixture,
    "thm-polynomial": run_polynomial,
    "thm-concentration": run_concentration,
    "thm-stereographic": run_stereographic,
    "thm-convex": run_convex,
    "verify": run_verify,
}


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    t0 = time.perf_counter()
    result = RUNNERS[cfg.scenario](cfg)
    result.wall_time = time.perf_counter() - t0
    if cfg.csv:
        with open(cfg.csv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(result.to_csv())
    if cfg.svg:
        from .plotting import emit_plot
        emit_plot(result, cfg.svg)
    return result
