import math

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given
from hypothesis import strategies as st

from oracles import haar_dot, haar_rl_hat, rl_convolve_mpmath
from roughsmile.basis import BasisSpec, haar_support
from roughsmile.grid import QuadGrid, grid_for
from roughsmile.kernels import RiemannLiouvilleKernel


@pytest.mark.parametrize("kind,N", [("haar", 1), ("haar", 8), ("haar", 16), ("haar", 13), ("fourier", 1),
                                    ("fourier", 9), ("fourier", 17)])
def test_gram_is_identity(kind, N):
    b = BasisSpec(kind, N)
    G = b.gram(grid_for(b.resolution, 64))
    np.testing.assert_allclose(G, np.eye(N), atol=1e-10)


def test_haar_layout():
    assert haar_support(2) == (0.0, 0.5, 1.0, 1.0)
    assert haar_support(3) == (0.0, 0.25, 0.5, math.sqrt(2))
    assert haar_support(4) == (0.5, 0.75, 1.0, math.sqrt(2))
    assert haar_support(5) == (0.0, 0.125, 0.25, 2.0)


def test_fourier_atoms():
    s = np.array([0.1, 0.37])
    E = BasisSpec("fourier", 5).edot(s)
    np.testing.assert_allclose(E[0], 1.0)
    np.testing.assert_allclose(E[1], math.sqrt(2) * np.cos(2 * np.pi * s))
    np.testing.assert_allclose(E[2], math.sqrt(2) * np.sin(2 * np.pi * s))
    np.testing.assert_allclose(E[4], math.sqrt(2) * np.sin(4 * np.pi * s))


@pytest.mark.parametrize("kind", ["haar", "fourier"])
def test_primitive_matches_quadrature(kind):
    b = BasisSpec(kind, 9)
    for si in (0.0, 0.2, 0.55, 1.0):
        got = b.e(si)[:, 0]
        for i in range(9):
            want = integrate.quad(lambda u: b.edot(u)[i, 0], 0, si, points=[j / 16 for j in range(1, 16)], limit=200)[0]
            assert abs(got[i] - want) <= 1e-12


@given(st.floats(0.05, 0.5))
def test_haar_hat_against_longhand(H):
    s = np.linspace(0, 1, 33)
    k = RiemannLiouvilleKernel(H)
    got = BasisSpec("haar", 8).ehat(s, k)
    want = np.array([haar_rl_hat(i, s, H) for i in range(1, 9)])
    np.testing.assert_allclose(got, want, atol=1e-13)


def test_haar_dot_against_longhand():
    s = (np.arange(64) + 0.5) / 64
    np.testing.assert_allclose(BasisSpec("haar", 8).edot(s), [haar_dot(i, s) for i in range(1, 9)], atol=0)


def test_fourier_hat_against_arbitrary_precision():
    H = 0.3
    b = BasisSpec("fourier", 5)
    s = np.array([0.3, 1.0])
    got = b.ehat(s, RiemannLiouvilleKernel(H))
    for j, t in enumerate(s):
        ref = rl_convolve_mpmath(lambda u: math.sqrt(2) * math.sin(4 * math.pi * u), t, H)
        assert abs(got[4, j] - ref) <= 1e-10


def test_resolution():
    assert BasisSpec("haar", 8).resolution == 8
    assert BasisSpec("haar", 9).resolution == 16
    assert BasisSpec("fourier", 9).resolution == 9


@pytest.mark.parametrize("kw", [dict(kind="legendre"), dict(N=0), dict(N=2.5)])
def test_basis_validation(kw):
    with pytest.raises(ValueError):
        BasisSpec(**kw)


@given(st.integers(1, 64), st.sampled_from([1.0, 3.0, 6.0]))
def test_grid_integrates_polynomials(n_cells, grading):
    g = QuadGrid(n_cells, 12, grading)
    assert g.integrate(g.nodes**3) == pytest.approx(0.25, rel=1e-13)
    assert g.weights.sum() == pytest.approx(1.0, rel=1e-14)


def test_grid_handles_breakpoint_power():
    g = grid_for(8)
    H = 0.1
    vals = np.maximum(g.nodes - 0.375, 0) ** (H + 0.5)
    assert g.integrate(vals) == pytest.approx(0.625 ** (H + 1.5) / (H + 1.5), rel=1e-12)
