import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import kfunc_mpmath, rl_convolve_mpmath
from roughsmile.kernels import (
    QuadratureError,
    RiemannLiouvilleKernel,
    StepFunction,
    TabulatedKernel,
    adjoint_k1,
    convolve,
    kbar1_integral_quadrature,
    kfunc_closed_form,
    kfunc_quadrature,
    kfunctionals,
)

HALF = np.array([0.5, 0.5, 1 / 3, 1 / 3, 1 / 6])
hurst = st.floats(0.02, 0.5)


def test_closed_form_elementary_at_half():
    np.testing.assert_allclose(kfunc_closed_form(0.5).as_array(), HALF, atol=1e-15)


def test_quadrature_elementary_at_half():
    np.testing.assert_allclose(kfunc_quadrature(RiemannLiouvilleKernel(0.5)).as_array(), HALF, atol=1e-12)


@given(hurst)
def test_k2_closed_form(H):
    assert kfunc_closed_form(H).k2_1 == pytest.approx(1 / (2 * H + 1), rel=1e-15)


@given(st.floats(1e-4, 0.5))
def test_closed_form_positive_and_symmetric(H):
    kf = kfunc_closed_form(H)
    assert np.all(kf.as_array() > 0)
    assert kf.k1sq_1 == kf.kbar1sq_1


@pytest.mark.parametrize("H", [0.3, 0.5])
def test_closed_form_against_arbitrary_precision(H):
    np.testing.assert_allclose(kfunc_closed_form(H).as_array(), kfunc_mpmath(H), atol=1e-12)


def test_quadrature_small_hurst():
    q = kfunc_quadrature(RiemannLiouvilleKernel(0.1)).as_array()
    np.testing.assert_allclose(q, kfunc_closed_form(0.1).as_array(), atol=1e-8)


def test_quadrature_tight_tolerance():
    q = kfunc_quadrature(RiemannLiouvilleKernel(0.3), tol=1e-10).as_array()
    np.testing.assert_allclose(q, kfunc_closed_form(0.3).as_array(), atol=1e-8)


def test_tabulated_constant_shape_matches_rl():
    H = 0.3
    tab = TabulatedKernel.from_function(H, lambda r: np.full_like(r, math.sqrt(2 * H)))
    np.testing.assert_allclose(kfunc_quadrature(tab).as_array(), kfunc_quadrature(RiemannLiouvilleKernel(H)).as_array(),
                               atol=1e-13)


def test_fubini_identity():
    k = RiemannLiouvilleKernel(0.2)
    assert abs(kbar1_integral_quadrature(k) - kfunc_quadrature(k, tol=1e-10).k1_1) <= 1e-10


def test_dispatch_uses_quadrature_for_tabulated():
    tab = TabulatedKernel.from_function(0.25, lambda r: math.sqrt(0.5) * (1 + 0.1 * r))
    kf = kfunctionals(tab)
    assert kf.k1_1 > kfunc_closed_form(0.25).k1_1


def test_quadrature_continuous_in_hurst():
    Hs = np.geomspace(0.02, 0.5, 20)
    fine = np.linspace(0.02, 0.5, 4001)
    slope = np.abs(np.diff([kfunc_closed_form(H).as_array() for H in fine], axis=0)).max(axis=0) / np.diff(fine)[0]
    vals = np.array([kfunc_quadrature(RiemannLiouvilleKernel(H)).as_array() for H in Hs])
    jumps = np.abs(np.diff(vals, axis=0))
    assert np.all(jumps <= 1.05 * slope * np.diff(Hs)[:, None] + 1e-8)


@pytest.mark.parametrize("H", [0.0, -0.1, 0.6, float("nan")])
def test_domain_errors(H):
    with pytest.raises(ValueError):
        kfunc_closed_form(H)


def test_quadrature_rejects_tiny_hurst():
    with pytest.raises(ValueError):
        kfunc_quadrature(RiemannLiouvilleKernel(0.01))


def test_quadrature_error_reports_estimate():
    err = QuadratureError("k1", 1e-3, 1e-8)
    assert err.estimate == 1e-3 and "1.000e-03" in str(err)


@given(hurst, st.floats(0.0, 1.0))
def test_convolve_one(H, t):
    k = RiemannLiouvilleKernel(H)
    expect = math.sqrt(2 * H) / (H + 0.5) * t ** (H + 0.5)
    assert convolve(k, StepFunction.indicator(0.0, 1.0), t) == pytest.approx(expect, rel=1e-13, abs=1e-15)
    assert convolve(k, lambda s: np.ones_like(s), t) == pytest.approx(expect, rel=1e-10, abs=1e-14)


def test_convolve_indicator_half():
    assert convolve(RiemannLiouvilleKernel(0.5), StepFunction.indicator(0.0, 1.0), 1.0) == pytest.approx(1.0, abs=1e-15)


def test_convolve_haar_atom():
    H = 0.3
    atom = StepFunction(np.array([0.0, 0.5, 1.0]), np.array([1.0, -1.0]))
    ref = rl_convolve_mpmath(lambda s: 1.0 if s < 0.5 else -1.0, 1.0, H, breaks=(0.5,))
    assert abs(convolve(RiemannLiouvilleKernel(H), atom, 1.0) - ref) <= 1e-10


def test_convolve_smooth_against_arbitrary_precision():
    H = 0.2
    k = RiemannLiouvilleKernel(H)
    for t in (0.1, 0.5, 1.0):
        ref = rl_convolve_mpmath(lambda s: math.cos(3 * s), t, H)
        assert abs(convolve(k, lambda s: np.cos(3 * s), t) - ref) <= 1e-12


def test_convolve_tabulated_matches_rl():
    H = 0.35
    tab = TabulatedKernel.from_function(H, lambda r: np.full_like(r, math.sqrt(2 * H)))
    rl = RiemannLiouvilleKernel(H)
    f = StepFunction(np.array([0.0, 0.3, 0.7, 1.0]), np.array([1.0, -2.0, 0.5]))
    for t in (0.2, 0.5, 0.9):
        assert convolve(tab, f, t) == pytest.approx(convolve(rl, f, t), abs=1e-12)


def test_convolve_domain():
    with pytest.raises(ValueError):
        convolve(RiemannLiouvilleKernel(0.3), StepFunction.indicator(0, 1), 1.5)


def test_adjoint_values():
    assert adjoint_k1(RiemannLiouvilleKernel(0.5), 0.25) == pytest.approx(0.75, abs=1e-15)
    assert adjoint_k1(RiemannLiouvilleKernel(0.3), 0.0) == pytest.approx(0.9682458365518543, abs=1e-15)
    assert adjoint_k1(RiemannLiouvilleKernel(0.3), 1.0) == 0.0
    with pytest.raises(ValueError):
        adjoint_k1(RiemannLiouvilleKernel(0.3), -0.1)


@given(hurst, st.floats(0.0, 1.0))
def test_adjoint_generic_matches_closed(H, u):
    H_tab = TabulatedKernel.from_function(H, lambda r: np.full_like(r, math.sqrt(2 * H)))
    assert adjoint_k1(H_tab, u) == pytest.approx(adjoint_k1(RiemannLiouvilleKernel(H), u), rel=1e-10, abs=1e-13)


@given(hurst, st.sampled_from([0.5, 2.0]), st.floats(0.01, 0.5), st.floats(0.0, 0.99))
def test_scaling(H, lam, t, frac):
    k = RiemannLiouvilleKernel(H)
    s = frac * t
    assert abs(k(lam * t, lam * s) - lam ** (H - 0.5) * k(t, s)) <= 1e-12 * max(1.0, abs(k(t, s)))


def test_kernel_vanishes_above_diagonal():
    k = RiemannLiouvilleKernel(0.3)
    assert k(0.2, 0.5) == 0.0


def test_kernel_file_round_trip(tmp_path):
    tab = TabulatedKernel.from_function(0.2, lambda r: 0.6 + 0.1 * r * r)
    path = tmp_path / "fk.txt"
    tab.to_file(path)
    back = TabulatedKernel.from_file(path)
    assert back.H == 0.2
    r = np.linspace(0, 1, 17)
    np.testing.assert_array_equal(back.shape(r), tab.shape(r))


def test_kernel_file_needs_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 1\n1 1\n")
    with pytest.raises(ValueError, match="header"):
        TabulatedKernel.from_file(path)
