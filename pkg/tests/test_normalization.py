import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kaclab.densities import MixtureParams, make_gaussian, mixture_density, standard_gaussian
from kaclab.normalization import (
    VARYING, GridAliasingError, gaussian_log_znorm, log_znorm_exact, moment_integral_log,
    squared_law, znorm_asymptotic, znorm_exact, zpoly, zpoly_gamma_route,
)
from kaclab.specfun import sphere_log_area
from oracles import chi2_pdf, mixture_znorm_conditional_mc, mixture_znorm_uniform_mc, moment_abs

GAMMA = standard_gaussian()


def test_chi2_two_dof():
    law = squared_law(GAMMA, 2, grid_max=64.0)
    u = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(np.exp(law.log_pdf(u)), chi2_pdf(u, 2), rtol=1e-6)
    assert law.trapezoid_mass() == pytest.approx(1.0, abs=1e-6)
    assert np.all(law.density >= 0)


def test_chi2_ten_dof():
    # the default 4N grid drops ~1.7e-5 of chi2_10 mass and is rejected
    with pytest.raises(GridAliasingError):
        squared_law(GAMMA, 10)
    law = squared_law(GAMMA, 10, grid_max=120.0)
    # frozen oracle: u^4 e^{-u/2} / (2^5 Gamma(5)) at u = 10
    expect = 10 ** 4 * math.exp(-5) / (2 ** 5 * 24)
    assert chi2_pdf(10.0, 10) == pytest.approx(expect, rel=1e-14)
    assert float(np.exp(law.log_pdf(10.0))) == pytest.approx(expect, rel=1e-6)


def test_aliasing_detected():
    with pytest.raises(GridAliasingError):
        squared_law(GAMMA, 2, grid_max=4.0)
    with pytest.raises(ValueError):
        squared_law(GAMMA, 10, grid_max=5.0)
    with pytest.raises(ValueError):
        squared_law(GAMMA, 10, n_points=1000)


def test_log_pdf_outside_grid():
    law = squared_law(GAMMA, 4, grid_max=64.0)
    with pytest.raises(ValueError):
        law.log_pdf(law.grid_max * 1.5)


@pytest.mark.parametrize("u", [5.0, 10.0, 20.0])
def test_znorm_gamma_constant_on_sphere(u):
    got = znorm_exact(GAMMA, 10, u).log()
    expect = -5 * math.log(2 * math.pi) - u / 2
    assert math.expm1(got - expect) == pytest.approx(0.0, abs=1e-5)
    assert float(gaussian_log_znorm(1.0, 10, u)) == pytest.approx(expect, rel=1e-14)


@pytest.mark.parametrize("N", [10, 20])
def test_znorm_m_half(N):
    got = znorm_exact(make_gaussian(0.5), N, float(N)).log()
    expect = -N / 2 * math.log(math.pi) - N
    assert math.expm1(got - expect) == pytest.approx(0.0, abs=1e-5)


def test_znorm_continuous_and_positive():
    f = mixture_density(MixtureParams(0.9, 30))
    u = np.linspace(5, 60, 400)
    lz = log_znorm_exact(f, 30, u)
    assert np.all(np.isfinite(lz))
    # log-linear interpolation: no jumps larger than the local slope allows
    assert np.max(np.abs(np.diff(lz))) < 2.0


@pytest.mark.parametrize("N", [10, 30])
def test_znorm_mixture_vs_uniform_mc(N):
    z = math.exp(znorm_exact(mixture_density(MixtureParams(0.9, N)), N, float(N)).log())
    m, se = mixture_znorm_uniform_mc(N, 0.9, 1_000_000, seed=N + 1)
    assert abs(z - m) <= 3 * se


@pytest.mark.slow
def test_znorm_mixture_vs_conditional_mc_n100():
    N = 100
    z = math.exp(znorm_exact(mixture_density(MixtureParams(0.9, N)), N, float(N)).log())
    m, se = mixture_znorm_conditional_mc(N, 0.9, 1_000_000, seed=N)
    assert abs(z - m) <= 3 * se


def test_znorm_asymptotic():
    p = MixtureParams(0.9, 100)
    lz = znorm_asymptotic(p, 100, 100.0).log()
    const = math.log(2) - 0.5 * math.log(100 * p.sigma_N_sq) - sphere_log_area(100) - 49 * math.log(100)
    assert lz == pytest.approx(const - 0.5 * math.log(2 * math.pi), rel=1e-13)
    ratios = []
    for N in (100, 300, 1000):
        q = MixtureParams(0.9, N)
        r = math.exp(znorm_exact(mixture_density(q), N, float(N)).log() - znorm_asymptotic(q, N, float(N)).log())
        ratios.append(r)
    assert 0.5 <= ratios[0] <= 2
    dist = [abs(r - 1) for r in ratios]
    assert dist[-1] < dist[0]


@given(st.floats(min_value=0.05, max_value=1.0), st.integers(3, 10**6))
def test_sigma_positive(eta, N):
    p = MixtureParams(eta, N)
    assert 0 < p.delta_N < 1 and p.sigma_N_sq > 0


def test_mixture_delta():
    assert MixtureParams(0.9, 10_000).delta_N == pytest.approx(10 ** -3.6, rel=1e-12)
    assert MixtureParams(0.9, 10_000).delta_N == pytest.approx(2.512e-4, rel=1e-3)


def test_zpoly_anchors():
    assert zpoly(2, VARYING).log() == pytest.approx(math.log(2), rel=1e-14)
    assert zpoly(2, 2).log() == pytest.approx(math.log(2), rel=1e-13)
    for N in (3, 10, 1000):
        assert zpoly(N, 2).log() == pytest.approx(math.log(N), rel=1e-12)


def test_zpoly_circle_quadrature():
    # direct angular integral on the circle of radius sqrt(2) of v1^2 + v2^2
    from scipy.integrate import quad
    r = math.sqrt(2)
    val = quad(lambda t: (r * math.cos(t)) ** 2 + (r * math.sin(t)) ** 2, 0, 2 * math.pi)[0] / (2 * math.pi)
    assert val == pytest.approx(2.0, rel=1e-12)
    assert math.exp(zpoly(2, VARYING).log()) == pytest.approx(val, rel=1e-12)


def test_zpoly_gamma_route():
    for N in range(3, 201):
        closed = (N + 2) / 2 * math.log(N) - (N - 1) * math.log(2)
        assert abs(zpoly_gamma_route(N) - closed) < 1e-10
        assert abs(zpoly(N, VARYING).log() - closed) < 1e-10


def test_zpoly_overflow_safe():
    # 101 ln 200 - 199 ln 2 = 397.2 nats, about 10^172.5; N = 2000 overflows a double
    assert zpoly(200, VARYING).log() / math.log(10) == pytest.approx(172.499, abs=1e-3)
    big = zpoly(2000, VARYING)
    assert big.log() > 709.8 and math.isfinite(big.log())


def test_moment_integral():
    assert moment_integral_log(7, math.sqrt(7), 0) == pytest.approx(0.0, abs=1e-14)
    assert moment_integral_log(9, 3.0, 2) == pytest.approx(0.0, abs=1e-13)
    assert moment_integral_log(3, math.sqrt(3), 3) == pytest.approx(math.log(3 ** 1.5 / 4), rel=1e-12)
    with pytest.raises(ValueError):
        moment_integral_log(5, 1.0, -1)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.floats(min_value=-0.9, max_value=6.0))
def test_moment_integral_vs_quadrature(N, m):
    r = math.sqrt(N)
    assert math.exp(moment_integral_log(N, r, m)) == pytest.approx(moment_abs(N, r, m), rel=1e-7)
