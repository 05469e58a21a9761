import math

import numpy as np
import pytest

from kaclab.densities import (
    VARYING, FamilyError, make_concentration_family, make_convex_combination,
    make_gaussian_tensor, make_mixture_family, make_polynomial_family, make_stereographic_family,
    make_uniform_family,
)
from kaclab.marginals import (
    MarginalGrid, analytic_evaluator, chaoticity_gap, default_grid, histogram_marginal,
    marginal_concentration, marginal_conditioned_tensor, marginal_mixture_asymptotic_closed,
    marginal_polynomial, marginal_prefactor_log,
)
from kaclab.quadrature import integrate, integrate_2d
from kaclab.sphere import sample_uniform
from oracles import mixture_marginal_at

GAMMA0 = 1 / math.sqrt(2 * math.pi)
MHALF0 = 1 / math.sqrt(math.pi)


def _mass(fn, N, **kw):
    R = math.sqrt(N)
    return integrate(fn, -R, R, points=[0.0], **kw).value


def test_prefactor_values():
    assert float(marginal_prefactor_log(4, 1, 0.0)) == pytest.approx(-math.log(math.pi), rel=1e-14)
    assert abs(math.exp(float(marginal_prefactor_log(200, 1, 0.0))) - GAMMA0) < 0.01
    assert marginal_prefactor_log(10, 1, math.sqrt(10)) == -np.inf
    with pytest.raises(ValueError):
        marginal_prefactor_log(4, 2, np.zeros(2))


def test_prefactor_vs_histogram():
    pts = sample_uniform(4, 2.0, 0, 400_000)[:, 0]
    h = 0.05
    frac = np.mean(np.abs(pts) < h) / (2 * h)
    exact = integrate(lambda x: np.exp(marginal_prefactor_log(4, 1, x)), -h, h).value / (2 * h)
    se = math.sqrt(frac * 2 * h * (1 - frac * 2 * h) / pts.size) / (2 * h)
    assert abs(frac - exact) <= 3 * se
    assert exact == pytest.approx(1 / math.pi, rel=1e-3)


@pytest.mark.parametrize("N", [4, 10, 100])
def test_prefactor_mass(N):
    assert _mass(lambda x: np.exp(marginal_prefactor_log(N, 1, x)), N) == pytest.approx(1.0, abs=1e-8)
    R = math.sqrt(N)
    if N >= 5:
        m2 = integrate_2d(lambda x, y: np.exp(marginal_prefactor_log(N, 2, np.stack([x, y], -1))),
                          -R, R, lambda x: -math.sqrt(max(N - x * x, 0)),
                          lambda x: math.sqrt(max(N - x * x, 0)), abs_tol=1e-9, rel_tol=1e-7).value
        assert m2 == pytest.approx(1.0, abs=1e-6)


def test_m_half_tensor_marginal_is_prefactor():
    fam = make_gaussian_tensor(0.5, 30)
    v = np.linspace(-5, 5, 41)
    got = marginal_conditioned_tensor(fam, 1, v)
    np.testing.assert_allclose(got, np.exp(marginal_prefactor_log(30, 1, v)), rtol=1e-8)
    v2 = np.stack([v, v[::-1]], axis=1)
    np.testing.assert_allclose(marginal_conditioned_tensor(fam, 2, v2),
                               np.exp(marginal_prefactor_log(30, 2, v2)), rtol=1e-8)


@pytest.mark.parametrize("N", [20, 100])
def test_mixture_marginal_mass_and_energy(N):
    fam = make_mixture_family(N, 0.9)
    ev = lambda x: marginal_conditioned_tensor(fam, 1, x)
    assert _mass(ev, N) == pytest.approx(1.0, abs=1e-6)
    assert _mass(lambda x: x * x * ev(x), N) == pytest.approx(1.0, abs=1e-5)


def test_mixture_asymptotic_forms_agree():
    fam = make_mixture_family(500, 0.9, "asymptotic")
    v = np.linspace(-4, 4, 33)
    np.testing.assert_allclose(marginal_conditioned_tensor(fam, 1, v),
                               marginal_mixture_asymptotic_closed(fam, 1, v), rtol=1e-9)
    exact = make_mixture_family(500, 0.9, "exact")
    np.testing.assert_allclose(marginal_conditioned_tensor(exact, 1, v, mode="asymptotic"),
                               marginal_conditioned_tensor(fam, 1, v), rtol=1e-12)


@pytest.mark.slow
def test_mixture_marginal_at_zero_vs_conditional_mc():
    fam = make_mixture_family(100, 0.9)
    got = float(marginal_conditioned_tensor(fam, 1, 0.0)[()])
    ref, se = mixture_marginal_at(0.0, 100, 0.9, 1_000_000, seed=5)
    assert abs(got - ref) <= 3 * se


def test_polynomial_values():
    ev = lambda x: marginal_polynomial(10, 1, x, VARYING)
    assert _mass(ev, 10) == pytest.approx(1.0, abs=1e-8)
    assert _mass(lambda x: x * x * ev(x), 10) == pytest.approx(1.0, abs=1e-8)
    assert abs(float(marginal_polynomial(200, 1, 0.0, VARYING)[()]) - MHALF0) < 0.01
    assert abs(float(marginal_polynomial(200, 1, 0.0, 2)[()]) - GAMMA0) < 0.01


def test_polynomial_vs_histogram():
    fam = make_polynomial_family(12, VARYING)
    pts, dens, err = histogram_marginal(fam, 1, 200_000, rng=4, bins=40, half_width=3.0)
    # compare bin averages of the analytic marginal
    edges = np.linspace(-3, 3, 41)
    avg = np.array([integrate(lambda x: marginal_polynomial(12, 1, x, VARYING), a, b).value / (b - a)
                    for a, b in zip(edges[:-1], edges[1:])])
    z = (dens - avg) / np.maximum(err, 1e-12)
    assert np.mean(np.abs(z) > 3) < 0.02


@pytest.mark.parametrize("kind", ["uniform", "poly"])
def test_marginal_chain(kind):
    N = 12
    if kind == "uniform":
        m1 = lambda x: np.exp(marginal_prefactor_log(N, 1, x))
        m2 = lambda p: np.exp(marginal_prefactor_log(N, 2, p))
    else:
        m1 = lambda x: marginal_polynomial(N, 1, x, VARYING)
        m2 = lambda p: marginal_polynomial(N, 2, p, VARYING)
    for x in np.linspace(-3, 3, 10):
        r = math.sqrt(N - x * x)
        val = integrate(lambda y: m2(np.stack([np.full_like(y, x), y], -1)), -r, r,
                        points=[0.0], abs_tol=1e-12, rel_tol=1e-10).value
        assert val == pytest.approx(float(np.ravel(m1(x))[0]), abs=1e-5)


def test_support_zero():
    for ev in (lambda x: marginal_polynomial(10, 1, x, 3.0),
               lambda x: marginal_conditioned_tensor(make_mixture_family(10), 1, x)):
        assert np.all(ev(np.array([math.sqrt(10), 4.0, -5.0])) == 0)


def test_energy_deficit_reported():
    # Pi_1 has second moment 1, the claimed limit M_{1/2} only 1/2
    fam = make_polynomial_family(100, VARYING)
    ev = analytic_evaluator(fam, 1)
    assert _mass(lambda x: x * x * ev(x), 100) == pytest.approx(1.0, abs=1e-8)
    assert fam.claimed_limit.second_moment == 0.5


def test_concentration_marginal():
    fam = make_concentration_family(20)
    ev = lambda x: marginal_concentration(fam, x)
    R = math.sqrt(20)
    eps = fam.params["eps"]
    assert _mass(ev, 20, abs_tol=1e-9, rel_tol=1e-7) == pytest.approx(1.0, abs=1e-6)
    assert float(ev(np.array([R * math.cos(eps) - 1e-9]))[0]) == 0.0
    # histogram cross-check on bin averages; empty bins must carry negligible mass
    centers, dens, err = histogram_marginal(fam, 1, 200_000, rng=1, bins=40, half_width=3.0)
    edges = np.linspace(-3, 3, 41)
    avg = np.array([integrate(ev, a, b, abs_tol=1e-9, rel_tol=1e-7).value / (b - a)
                    for a, b in zip(edges[:-1], edges[1:])])
    hit = err > 0
    assert np.all(avg[~hit] * 0.15 * 200_000 < 1e-2)
    z = (dens[hit] - avg[hit]) / err[hit]
    assert np.all(np.abs(z) < 4)


def test_marginal_grid_csv_and_gaps():
    fam = make_uniform_family(50)
    g = chaoticity_gap(fam, 1)
    lines = g.to_csv().splitlines()
    assert lines[0] == "k,N,v1,pi_k,limit,abs_gap" and len(lines) == 162
    assert g.sup_gap == pytest.approx(np.max(np.abs(g.values - g.limit_values)))
    g2 = chaoticity_gap(fam, 2)
    assert g2.to_csv().splitlines()[0] == "k,N,v1,v2,pi_k,limit,abs_gap"
    assert np.all(np.diff(g2.points[:, 0]) >= 0)
    with pytest.raises(ValueError):
        MarginalGrid(1, 5, np.zeros((1, 1)), np.array([-1.0]), np.array([0.0]))


def test_uniform_gap_trend():
    gaps = [chaoticity_gap(make_uniform_family(N), 1).sup_gap for N in (50, 100, 200)]
    assert gaps[-1] < 0.01 and gaps[0] > gaps[1] > gaps[2]


def test_poly_gap_trend():
    gaps = [chaoticity_gap(make_polynomial_family(N, VARYING), 1).sup_gap for N in (50, 100, 200)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_convex_gap_inequality():
    N = 100
    G, F = make_uniform_family(N), make_concentration_family(N)
    C = make_convex_combination(G, F, 0.3)
    gC = chaoticity_gap(C, 1).sup_gap
    gG = chaoticity_gap(G, 1).sup_gap
    grid = default_grid(1)[:, 0]
    supF = float(np.max(marginal_concentration(F, grid)))
    assert gC <= gG + 0.3 * (supF + GAMMA0) + 1e-12


def test_histogram_route_and_errors():
    fam = make_stereographic_family(20, beta=0.0)
    g = chaoticity_gap(fam, 1, limit=make_uniform_family(20).claimed_limit, route="auto", n_samples=20_000)
    assert g.route == "histogram" and g.std_error is not None
    with pytest.raises(FamilyError):
        chaoticity_gap(fam, 1)
    with pytest.raises(FamilyError):
        chaoticity_gap(fam, 1, limit=make_uniform_family(20).claimed_limit, route="analytic")
