"""Closed-form short-maturity expansions: energy derivatives, ATM coefficients,
smiles in the large- and moderate-deviation regimes, and price asymptotics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

from .kernels import KFunctionals
from .ritz import RitzSolution, rate_derivative, sigma_level
from .volmodel import VolModel

ZERO_CURVATURE_TOL = 1e-12
SQRT_2PI = math.sqrt(2.0 * math.pi)


def _is_half(H) -> bool:
    return H == 0.5


@dataclass(frozen=True)
class AtmCoefficients:
    """Coefficients of the small-``x`` expansions of the energy, level and term structure."""

    sigma0: float
    sigma_prime0: float
    sigma_second0: float
    a0: float
    lambda2: float
    lambda3: float
    lambda4: float
    C_K_rho: float
    Cbar_K_rho: float
    D_K_rho: float
    Dbar_K_rho: float
    H: float
    rho: float
    s1: float
    s2: float
    sdot: float
    k1_1: float

    def energy_taylor(self, x):
        """``Lambda''(0) x^2/2 + Lambda'''(0) x^3/6 + Lambda''''(0) x^4/24``."""
        return self.lambda2 * x**2 / 2 + self.lambda3 * x**3 / 6 + self.lambda4 * x**4 / 24

    def level_taylor(self, x):
        """``sigma0 + Sigma'(0) x + Sigma''(0) x^2 / 2``."""
        return self.sigma0 + self.sigma_prime0 * x + 0.5 * self.sigma_second0 * x**2

    def A_expansion(self, x):
        """Second-order small-``x`` expansion of ``A(x)``."""
        s0 = self.sigma0
        quad = (self.s1**2 / s0**4 * self.C_K_rho + self.s2 / s0**3 * self.Cbar_K_rho
                + self.sdot / ((2 * self.H + 1) * s0**3))
        out = 1.0 - x * self.rho * self.s1 * self.k1_1 / s0**2 + x**2 * quad
        if _is_half(self.H):
            out += x / 2 + x**2 / 8
        return out

    def lambda_derivative(self, i: int) -> float:
        if i == 2:
            return self.lambda2
        if i == 3:
            return self.lambda3
        if i == 4:
            return self.lambda4
        raise ValueError(f"Lambda derivative of order {i} not available (orders 2..4)")


def kernel_constants(kf: KFunctionals, rho: float):
    """``(C, Cbar, D, Dbar)`` built from the K-functionals and ``rho``."""
    r2 = rho * rho
    k1, k2, k11, kb, kk = kf.k1_1, kf.k2_1, kf.k1sq_1, kf.kbar1sq_1, kf.k1_kbar1
    C = k2 / 2 - 1.5 * kb + r2 * (8.5 * k1**2 - 1.5 * k11 - 3 * kk)
    Cbar = k2 / 2 - 1.5 * r2 * k11
    D = k2 - kb + r2 * (3 * k1**2 - k11 - 2 * kk)
    Dbar = k2 - r2 * k11
    return C, Cbar, D, Dbar


def atm_coefficients(model: VolModel, kf: KFunctionals, rho: float, H: float) -> AtmCoefficients:
    """All at-the-money coefficients for ``model`` with kernel functionals ``kf``."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")
    if not 0.0 < H <= 0.5:
        raise ValueError(f"H must lie in (0, 1/2], got {H}")
    s0, s1, s2, sd = model.sigma0, model.sigma0_prime, model.sigma0_second, model.sigma0_dot
    r2 = rho * rho
    k1, k11, kb, kk = kf.k1_1, kf.k1sq_1, kf.kbar1sq_1, kf.k1_kbar1
    C, Cbar, D, Dbar = kernel_constants(kf, rho)

    lam2 = 1.0 / s0**2
    lam3 = -6.0 * rho * s1 / s0**4 * k1
    lam4 = (12.0 * s1**2 / s0**6 * (9 * r2 * k1**2 - r2 * k11 - kb - 2 * r2 * kk)
            - 12.0 * s2 / s0**5 * r2 * k11)
    d1 = rho * s1 * k1 / s0
    half_d2 = (s1**2 / s0**3 * (-3 * r2 * k1**2 + 0.5 * r2 * k11 + 0.5 * kb + r2 * kk)
               + s2 / s0**2 * 0.5 * r2 * k11)
    a0 = s1**2 * D + s0 * s2 * Dbar + s0 * sd / (H + 0.5)
    if _is_half(H):
        a0 += rho * s1 * s0**2 * k1
    return AtmCoefficients(s0, d1, 2 * half_d2, a0, lam2, lam3, lam4, C, Cbar, D, Dbar,
                           float(H), float(rho), s1, s2, sd, k1)


class Curvature(enum.Enum):
    NEGATIVE = "Negative"
    ZERO = "Zero"
    POSITIVE = "Positive"


def curvature_threshold(model: VolModel, kf: KFunctionals) -> float:
    """Critical ``rho**2`` at which ``Sigma''(0)`` changes sign (``inf`` if it never does)."""
    s0, s1, s2 = model.sigma0, model.sigma0_prime, model.sigma0_second
    if s1 == 0.0:
        raise ValueError("curvature test needs sigma0' != 0")
    den = 6 * kf.k1_1**2 - kf.k1sq_1 - 2 * kf.k1_kbar1 - s2 * s0 / s1**2 * kf.k1sq_1
    if den == 0.0:
        raise ZeroDivisionError("degenerate denominator in the curvature threshold")
    return kf.kbar1sq_1 / den if den > 0 else math.inf


def curvature_sign(model: VolModel, kf: KFunctionals, rho: float) -> Curvature:
    """Sign of ``Sigma''(0)``; values within ``1e-12`` of zero count as ``Zero``."""
    if model.sigma0_prime == 0.0:
        raise ValueError("curvature test needs sigma0' != 0")
    # H only enters a0, not the curvature
    c = atm_coefficients(model, kf, rho, 0.25).sigma_second0
    if abs(c) <= ZERO_CURVATURE_TOL:
        return Curvature.ZERO
    return Curvature.POSITIVE if c > 0 else Curvature.NEGATIVE


# -- smiles ------------------------------------------------------------------


@dataclass(frozen=True)
class SmilePoint:
    """An implied-vol approximation at maturity ``t`` and log-strike ``k``."""

    t: float
    x: float
    k: float
    vol: float
    mode: str


def log_strike(t, x, H, beta=0.0):
    """``k_t = x t**(1/2 - H + beta)``."""
    return x * t ** (0.5 - H + beta)


def smile_large_deviation(t: float, x: float, H: float, sol: RitzSolution | None = None,
                          a_x: float | None = None, atm: AtmCoefficients | None = None) -> SmilePoint:
    """Large-deviation smile with term structure.

    Uses the KL coefficient ``a(x)`` when ``a_x`` is given and ``x != 0``,
    otherwise the at-the-money value ``a0`` from ``atm``.  The ``mode`` field of
    the result records which one was used.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    k = log_strike(t, x, H)
    level = atm.sigma0 if x == 0.0 and atm is not None else None
    if level is None:
        if sol is None:
            raise ValueError("a Ritz solution is needed away from the money")
        level = sigma_level(sol)
    if a_x is not None and x != 0.0:
        return SmilePoint(t, x, k, level + t ** (2 * H) * a_x / abs(x) * math.sqrt(sol.Lambda / 2), "kl")
    if atm is None:
        raise ValueError("need either a(x) or the ATM coefficients")
    return SmilePoint(t, x, k, level + t ** (2 * H) * atm.a0 / (2 * atm.sigma0), "a0")


def smile_fz(t: float, x: float, H: float, sol: RitzSolution | None, sigma0: float) -> SmilePoint:
    """Leading-order level ``Sigma(x)`` without term structure."""
    level = sigma0 if x == 0.0 else sigma_level(sol)
    return SmilePoint(t, x, log_strike(t, x, H), level, "fz")


def smile_fully_expanded(t: float, x: float, atm: AtmCoefficients) -> SmilePoint:
    """Quadratic-in-``x`` level plus the ``a0`` term structure."""
    vol = atm.level_taylor(x) + t ** (2 * atm.H) * atm.a0 / (2 * atm.sigma0)
    return SmilePoint(t, x, log_strike(t, x, atm.H), vol, "expanded")


def atm_term_structure(t, atm: AtmCoefficients):
    """``sigma0 + t**(2H) a0 / (2 sigma0)``."""
    return atm.sigma0 + t ** (2 * atm.H) * atm.a0 / (2 * atm.sigma0)


def moderate_order(H: float, beta: float) -> int:
    """The ``n`` with ``2H/(n+1) < beta <= 2H/n``."""
    if not 0.0 < beta <= 2 * H:
        raise ValueError(f"beta must lie in (0, 2H]={2 * H}, got {beta}")
    n = math.floor(2 * H / beta)
    # guard against 2H/beta landing a hair below an integer
    if 2 * H / (n + 1) >= beta:
        n += 1
    return n


def smile_moderate_deviation(t: float, x: float, beta: float, atm: AtmCoefficients,
                             include_term_structure: bool = True, order: int = 2) -> SmilePoint:
    """Practical moderate-deviation smile at ``k_t = x t**(1/2 - H + beta)``.

    ``order`` 1 keeps the skew term, 2 adds the curvature term;
    ``include_term_structure`` adds ``a0 t**(2H) / (2 sigma0)``.
    """
    H = atm.H
    if not H < 0.5:
        raise ValueError("moderate deviations need H < 1/2")
    moderate_order(H, beta)
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    y = x * t**beta
    vol = atm.sigma0 + atm.sigma_prime0 * y
    if order == 2:
        vol += 0.5 * atm.sigma_second0 * y * y
    if include_term_structure:
        vol += t ** (2 * H) * atm.a0 / (2 * atm.sigma0)
    mode = f"md{order}" + ("+ts" if include_term_structure else "")
    return SmilePoint(t, x, log_strike(t, x, H, beta), vol, mode)


def implied_variance_moderate(t: float, x: float, beta: float, atm: AtmCoefficients) -> float:
    """Implied variance from the series in powers of the energy derivatives (``n <= 4``)."""
    n = moderate_order(atm.H, beta)
    if n > 4:
        raise ValueError(f"order n={n} needs Lambda derivatives beyond the fourth")
    S = sum(atm.lambda_derivative(i) / math.factorial(i) * x ** (i - 2) * t ** ((i - 2) * beta)
            for i in range(3, n + 1))
    s0sq = atm.sigma0**2
    return sum((-1) ** j * 2**j * s0sq ** (j + 1) * S**j for j in range(0, n - 1))


# -- prices ------------------------------------------------------------------


def call_price_asymptotic(t: float, x: float, sol: RitzSolution, A_x: float, sigma_x_sq: float, H: float) -> float:
    """Leading asymptotic of the out-of-the-money price at ``k_t = x t**(1/2 - H)``.

    A call for ``x > 0``, the mirrored put for ``x < 0``.
    """
    if x == 0.0:
        raise ValueError("x must be nonzero (call for x > 0, put for x < 0)")
    if t <= 0:
        raise ValueError("t must be positive")
    dlam = rate_derivative(sol, sigma_x_sq)
    return (math.exp(-sol.Lambda / t ** (2 * H)) * t ** (0.5 + 2 * H) * A_x
            / (dlam**2 * math.sqrt(sigma_x_sq) * SQRT_2PI))


def call_price_moderate(t: float, x: float, beta: float, atm: AtmCoefficients) -> float:
    """Moderate-deviation price asymptotic at ``k_t = x t**(1/2 - H + beta)``."""
    if x == 0.0:
        raise ValueError("x must be nonzero")
    H = atm.H
    n = moderate_order(H, beta)
    if n > 4:
        raise ValueError(f"order n={n} needs Lambda derivatives beyond the fourth")
    expo = sum(atm.lambda_derivative(i) / math.factorial(i) * x**i * t ** (i * beta - 2 * H) for i in range(2, n + 1))
    return math.exp(-expo) * t ** (0.5 + 2 * H - 2 * beta) * atm.sigma0**3 / (x * x * SQRT_2PI)


# -- skew and curvature ------------------------------------------------------


@dataclass(frozen=True)
class SkewCurvature:
    skew_fd: float
    curvature_fd: float
    skew_pred: float | None
    curvature_pred: float | None


def skew_curvature_finite_difference(t: float, x: float, H: float, smile_fn: Callable,
                                     level_fn: Callable | None = None) -> SkewCurvature:
    """Finite-difference skew and curvature at ``k_t = x t**(1/2 - H)``.

    Parameters
    ----------
    smile_fn : callable
        ``smile_fn(t, x)`` returning the implied vol at ``k_t``.
    level_fn : callable, optional
        ``level_fn(x)`` returning ``Sigma(x)``; enables the predicted equivalents.
    """
    if x == 0.0:
        raise ValueError("x must be nonzero")
    k = log_strike(t, x, H)
    up, dn, mid = smile_fn(t, x), smile_fn(t, -x), smile_fn(t, 0.0)
    skew = (up - dn) / (2 * k)
    curv = (up + dn - 2 * mid) / (k * k)
    sp = cp = None
    if level_fn is not None:
        lu, ld, l0 = level_fn(x), level_fn(-x), level_fn(0.0)
        sp = (lu - ld) / (2 * x) * t ** (H - 0.5)
        cp = (lu + ld - 2 * l0) / (x * x) * t ** (2 * H - 1)
    return SkewCurvature(skew, curv, sp, cp)
