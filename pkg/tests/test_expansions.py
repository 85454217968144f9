import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import mpmath as mp

from conftest import FIG1, FIG2, FIG4
from oracles import bs_call_mpmath
from roughsmile.basis import BasisSpec
from roughsmile.blackscholes import bs_price
from roughsmile.expansions import (
    Curvature,
    atm_coefficients,
    atm_term_structure,
    call_price_asymptotic,
    call_price_moderate,
    curvature_sign,
    curvature_threshold,
    implied_variance_moderate,
    kernel_constants,
    log_strike,
    moderate_order,
    skew_curvature_finite_difference,
    smile_fully_expanded,
    smile_large_deviation,
    smile_moderate_deviation,
)
from roughsmile.kernels import RiemannLiouvilleKernel, kfunc_closed_form
from roughsmile.kl import kl_correction
from roughsmile.montecarlo import MCConfig, price_options, simulate
from roughsmile.ritz import rate_function, sigma_level
from roughsmile.volmodel import RBergomiParams, VolModel, make_rbergomi

HAAR8 = BasisSpec("haar", 8)


def atm_for(p, H=None):
    H = p.H if H is None else H
    return atm_coefficients(make_rbergomi(p), kfunc_closed_form(H), p.rho, H)


def with_(p, **kw):
    d = dict(sigma0=p.sigma0, eta=p.eta, rho=p.rho, H=p.H, theta=p.theta)
    d.update(kw)
    return RBergomiParams(**d)


params = st.builds(RBergomiParams, sigma0=st.floats(0.05, 1.0), eta=st.floats(0.01, 3.0),
                   rho=st.floats(-0.99, 0.99), H=st.floats(0.01, 0.5), theta=st.floats(0.0, 1.0))


@given(params)
def test_energy_second_derivative(p):
    assert atm_for(p).lambda2 == pytest.approx(1 / p.sigma0**2, rel=1e-15)


@given(params)
def test_uncorrelated_kills_odd_terms(p):
    a = atm_for(with_(p, rho=0.0))
    assert a.lambda3 == 0.0 and a.sigma_prime0 == 0.0


@given(st.floats(0.01, 0.5), st.floats(-0.99, 0.99))
def test_kernel_constants_depend_on_kernel_and_rho_only(H, rho):
    kf = kfunc_closed_form(H)
    a = atm_coefficients(make_rbergomi(RBergomiParams(0.1, 0.5, rho, H)), kf, rho, H)
    b = atm_coefficients(make_rbergomi(RBergomiParams(0.7, 2.5, rho, H, 1.0)), kf, rho, H)
    assert (a.C_K_rho, a.Cbar_K_rho, a.D_K_rho, a.Dbar_K_rho) == (b.C_K_rho, b.Cbar_K_rho, b.D_K_rho, b.Dbar_K_rho)
    assert kernel_constants(kf, rho) == (a.C_K_rho, a.Cbar_K_rho, a.D_K_rho, a.Dbar_K_rho)


def test_skew_formula():
    a = atm_for(FIG1)
    assert a.sigma_prime0 == pytest.approx(FIG1.rho * 0.15 * kfunc_closed_form(0.3).k1_1 / 0.2, rel=1e-15)


def test_constant_vol_is_flat():
    a = atm_for(RBergomiParams(0.2, 0.0, -0.5, 0.3, 0.0))
    assert a.sigma_prime0 == a.sigma_second0 == a.a0 == 0.0


BROWNIAN_FIG4 = pytest.mark.xfail(
    strict=True,
    reason="at H=1/2 the Brownian term rho sigma0' sigma0^2 <K1,1> (negative for rho<0) outweighs the rest "
           "for the FIG4 parameter set, so a0 < 0 even without damping; the positive-a0 law is a rough-regime statement")


@pytest.mark.parametrize("p", [FIG1, FIG2, FIG4], ids=["fig1", "fig2", "fig4"])
@pytest.mark.parametrize("H", [None, 0.07, 0.1, 0.3])
def test_damping_sign_law(p, H):
    q = p if H is None else with_(p, H=H)
    assert atm_for(with_(q, theta=0.0)).a0 > 0
    assert atm_for(with_(q, theta=1.0)).a0 < 0


@pytest.mark.parametrize("p", [FIG1, FIG2, pytest.param(FIG4, marks=BROWNIAN_FIG4)], ids=["fig1", "fig2", "fig4"])
def test_damping_sign_law_brownian_undamped(p):
    assert atm_for(with_(p, H=0.5, theta=0.0)).a0 > 0


@pytest.mark.parametrize("p", [FIG1, FIG2, FIG4], ids=["fig1", "fig2", "fig4"])
def test_damping_sign_law_brownian_damped(p):
    assert atm_for(with_(p, H=0.5, theta=1.0)).a0 < 0


def test_brownian_indicator_term():
    p = RBergomiParams(0.2, 1.0, -0.5, 0.5, 0.3)
    m = make_rbergomi(p)
    kf = kfunc_closed_form(0.5)
    a = atm_for(p)
    no_ind = m.sigma0_prime**2 * a.D_K_rho + p.sigma0 * m.sigma0_second * a.Dbar_K_rho + p.sigma0 * m.sigma0_dot
    assert a.a0 - no_ind == pytest.approx(p.rho * m.sigma0_prime * p.sigma0**2 * 0.5, rel=1e-13)
    np.testing.assert_allclose(kf.as_array(), [0.5, 0.5, 1 / 3, 1 / 3, 1 / 6])


# -- curvature ---------------------------------------------------------------


def test_uncorrelated_curvature_positive():
    m = make_rbergomi(FIG1)
    assert curvature_sign(m, kfunc_closed_form(0.3), 0.0) is Curvature.POSITIVE


def test_curvature_consistent_with_coefficient():
    p = FIG2
    m = make_rbergomi(p)
    kf = kfunc_closed_form(0.07)
    want = Curvature.POSITIVE if atm_for(p).sigma_second0 > 0 else Curvature.NEGATIVE
    assert curvature_sign(m, kf, p.rho) is want


def test_curvature_zero_at_threshold():
    m = make_rbergomi(RBergomiParams(0.2, 1.5, 0.0, 0.3))
    kf = kfunc_closed_form(0.3)
    r2 = curvature_threshold(m, kf)
    assert 0 < r2 < 1
    assert curvature_sign(m, kf, -math.sqrt(r2)) is Curvature.ZERO
    assert curvature_sign(m, kf, -math.sqrt(r2) * 1.01) is Curvature.NEGATIVE
    assert curvature_sign(m, kf, -math.sqrt(r2) * 0.99) is Curvature.POSITIVE


def test_curvature_needs_slope():
    with pytest.raises(ValueError):
        curvature_sign(VolModel.constant(0.2), kfunc_closed_form(0.3), -0.5)


# -- smiles ------------------------------------------------------------------


@pytest.fixture(scope="module")
def sol_fig1():
    return rate_function(0.1, make_rbergomi(FIG1), RiemannLiouvilleKernel(0.3), HAAR8, FIG1.rho)


def test_short_time_limit_is_level(sol_fig1):
    pt = smile_large_deviation(1e-30, 0.1, 0.3, sol_fig1, a_x=-0.01)
    assert pt.vol == pytest.approx(sigma_level(sol_fig1), abs=1e-15) and pt.mode == "kl"


def test_atm_fallback():
    a = atm_for(FIG1)
    pt = smile_large_deviation(0.1, 0.0, 0.3, atm=a)
    assert pt.vol == a.sigma0 + 0.1**0.6 * a.a0 / (2 * a.sigma0) and pt.mode == "a0"


def test_a0_mode_away_from_money(sol_fig1):
    a = atm_for(FIG1)
    pt = smile_large_deviation(0.1, 0.1, 0.3, sol_fig1, None, a)
    assert pt.mode == "a0" and pt.vol == sigma_level(sol_fig1) + 0.1**0.6 * a.a0 / 0.4


def test_fully_expanded_at_origin():
    a = atm_for(FIG1)
    assert smile_fully_expanded(0.0, 0.0, a).vol == a.sigma0


@given(st.sampled_from([FIG1, FIG2, FIG4]), st.floats(-0.99, 0.99).filter(lambda r: abs(r) > 1e-3))
def test_fully_expanded_slope(p, rho):
    a = atm_for(with_(p, rho=rho))
    h = 1e-6
    slope = (smile_fully_expanded(0.0, h, a).vol - smile_fully_expanded(0.0, -h, a).vol) / (2 * h)
    assert slope == pytest.approx(a.sigma_prime0, rel=1e-6)
    assert np.sign(slope) == np.sign(rho)


def test_fig2_atm_consistency():
    a = atm_for(FIG2)
    v = smile_fully_expanded(0.05, 0.0, a).vol
    assert math.isfinite(v)
    assert v == smile_large_deviation(0.05, 0.0, 0.07, atm=a).vol == atm_term_structure(0.05, a)


def test_level_taylor_slope():
    m = make_rbergomi(FIG1)
    k = RiemannLiouvilleKernel(0.3)
    a = atm_for(FIG1)
    xs = np.array([0.01, 0.02, 0.04, 0.08])
    res = [abs(sigma_level(rate_function(x, m, k, HAAR8, FIG1.rho)) - a.level_taylor(x)) for x in xs]
    slope = np.polyfit(np.log(xs), np.log(res), 1)[0]
    assert slope >= 2.5


# -- moderate deviations -----------------------------------------------------


@pytest.mark.parametrize("H,beta,n", [(0.1, 0.06, 3), (0.1, 0.2, 1), (0.1, 0.1, 2), (0.3, 0.15, 4), (0.3, 0.59, 1)])
def test_moderate_order(H, beta, n):
    assert moderate_order(H, beta) == n
    assert 2 * H / (n + 1) < beta <= 2 * H / n


@pytest.mark.parametrize("beta", [0.0, -0.1, 0.25])
def test_moderate_order_domain(beta):
    with pytest.raises(ValueError):
        moderate_order(0.1, beta)


def test_moderate_at_the_money():
    a = atm_for(FIG4)
    assert smile_moderate_deviation(0.05, 0.0, 0.06, a, False).vol == a.sigma0
    assert smile_moderate_deviation(0.05, 0.0, 0.06, a, True).vol == atm_term_structure(0.05, a)


def test_moderate_curvature_is_small():
    a = atm_for(FIG4)
    for t in (0.01, 0.05, 0.1):
        for x in (-0.1, 0.1):
            d2 = abs(smile_moderate_deviation(t, x, 0.06, a, False, 2).vol - smile_moderate_deviation(t, x, 0.06, a, False, 1).vol)
            ts = abs(t ** (2 * a.H) * a.a0 / (2 * a.sigma0))
            assert d2 < 0.1 * ts


def test_moderate_meets_large_deviation_seam():
    a = atm_for(FIG4)
    y = 0.08
    for beta in (1e-3, 1e-6):
        t = 0.05
        md = smile_moderate_deviation(t, y / t**beta, beta, a, True).vol
        assert abs(md - smile_fully_expanded(t, y, a).vol) <= 1e-6


def test_variance_form_first_order():
    a = atm_for(FIG1)
    beta = 0.15  # n = 4
    for t in (1e-4, 1e-6):
        y = 0.1 * t**beta
        v = math.sqrt(implied_variance_moderate(t, 0.1, beta, a))
        assert abs(v - (a.sigma0 + a.sigma_prime0 * y)) <= 20 * y * y


def test_variance_form_order_cap():
    a = atm_for(FIG4)
    with pytest.raises(ValueError, match="beyond the fourth"):
        implied_variance_moderate(0.01, 0.1, 0.035, a)


def test_moderate_rejects_brownian():
    with pytest.raises(ValueError):
        smile_moderate_deviation(0.1, 0.1, 0.5, atm_for(RBergomiParams(H=0.5)))


# -- prices ------------------------------------------------------------------


def test_black_scholes_decay():
    s0, x = 0.2, 0.1
    sol = rate_function(x, VolModel.constant(s0), RiemannLiouvilleKernel(0.5), HAAR8, 0.0)
    corr = kl_correction(sol)
    for t in (2e-3, 5e-4):
        c = call_price_asymptotic(t, x, sol, corr.A_x, corr.sigma_x_sq, 0.5)
        exact = bs_call_mpmath(s0, t, x)
        assert math.log(c) / float(mp.log(exact)) == pytest.approx(1.0, abs=1e-3)
        assert c / float(exact) == pytest.approx(1.0, abs=0.05)


def test_price_decreasing_in_x():
    m = make_rbergomi(FIG1)
    k = RiemannLiouvilleKernel(0.3)
    prices = []
    for x in np.linspace(0.05, 0.3, 6):
        sol = rate_function(x, m, k, HAAR8, FIG1.rho)
        corr = kl_correction(sol, 128)
        prices.append(call_price_asymptotic(0.01, x, sol, corr.A_x, corr.sigma_x_sq, 0.3))
    assert np.all(np.diff(prices) < 0)


def test_price_against_monte_carlo(sol_fig1):
    # Fails by design: at t=0.1, x=0.1 the leading price asymptotic is not yet
    # accurate (even the flat-vol analogue overshoots the exact price 2.6x).
    t, x = 0.1, 0.1
    corr = kl_correction(sol_fig1)
    c = call_price_asymptotic(t, x, sol_fig1, corr.A_x, corr.sigma_x_sq, 0.3)
    k = log_strike(t, x, 0.3)
    bundle = simulate(FIG1, MCConfig(200_000, 256, "exact", 3, True, (t,), (k,)))
    mc = price_options(bundle)[0].call
    assert 0.5 <= c / mc <= 2.0


def test_price_guards(sol_fig1):
    with pytest.raises(ValueError):
        call_price_asymptotic(0.1, 0.0, sol_fig1, 1.0, 0.04, 0.3)
    with pytest.raises(ValueError):
        call_price_moderate(0.1, 0.0, 0.06, atm_for(FIG4))


def test_moderate_price_uncorrelated_closed_form():
    p = with_(FIG4, rho=0.0)
    a = atm_for(p)
    H, beta = p.H, 0.06  # n = 3; the cubic term vanishes without correlation
    for t in (1e-3, 1e-2):
        for x in (0.05, 0.2):
            want = (math.exp(-x * x * t ** (2 * beta - 2 * H) / (2 * p.sigma0**2)) * t ** (0.5 + 2 * H - 2 * beta)
                    * p.sigma0**3 / (x * x * math.sqrt(2 * math.pi)))
            assert call_price_moderate(t, x, beta, a) == pytest.approx(want, rel=1e-13)


def test_moderate_price_decreasing():
    a = atm_for(FIG4)
    prices = [call_price_moderate(0.01, x, 0.06, a) for x in np.linspace(0.05, 0.3, 6)]
    assert np.all(np.diff(prices) < 0)


# -- skew and curvature ------------------------------------------------------


def test_skew_of_expanded_smile():
    a = atm_for(FIG1)
    t = 1e-8
    fn = lambda tt, xx: a.level_taylor(xx)
    for x in (1e-2, 1e-4):
        sc = skew_curvature_finite_difference(t, x, 0.3, fn)
        assert sc.skew_fd * t ** (0.5 - 0.3) == pytest.approx(a.sigma_prime0, rel=1e-9)


def test_symmetric_smile_has_no_skew():
    a = atm_for(with_(FIG1, rho=0.0))
    sc = skew_curvature_finite_difference(0.1, 0.05, 0.3, lambda t, x: smile_fully_expanded(t, x, a).vol)
    assert sc.skew_fd == 0.0


def test_curvature_from_ritz_levels():
    m = make_rbergomi(FIG1)
    k = RiemannLiouvilleKernel(0.3)
    a = atm_for(FIG1)
    level = lambda x: FIG1.sigma0 if x == 0 else sigma_level(rate_function(x, m, k, HAAR8, FIG1.rho))
    t = 0.01
    sc = skew_curvature_finite_difference(t, 0.02, 0.3, lambda tt, x: level(x), level)
    assert sc.curvature_fd * t ** (1 - 0.6) == pytest.approx(a.sigma_second0, rel=0.05)
    assert sc.curvature_pred == pytest.approx(sc.curvature_fd, rel=1e-12)
