"""Black-Scholes prices and implied volatility with ``S0 = 1`` and zero rates.

Out-of-the-money prices are evaluated through the scaled complementary error
function so that deep-wing prices keep full relative accuracy; inversion works
on the out-of-the-money side for the same reason.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize, special

_SQRT2 = math.sqrt(2.0)
PRICE_TOL = 1e-10


class BandError(ValueError):
    """Price outside the no-arbitrage band."""


def _otm_call(k, w):
    """Call price for ``k >= 0`` (or any ``k`` with ``d1 <= 0``) given total vol ``w``."""
    k = np.asarray(k, float)
    w = np.asarray(w, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = -k / w + 0.5 * w
        d2 = d1 - w
        tail = 0.5 * np.exp(-0.5 * d1 * d1) * (special.erfcx(-d1 / _SQRT2) - special.erfcx(-d2 / _SQRT2))
        body = special.ndtr(d1) - np.exp(k) * special.ndtr(d2)
    return np.where(d1 <= 0, tail, body)


def _call(k, w):
    k, w = np.broadcast_arrays(np.asarray(k, float), np.asarray(w, float))
    intrinsic = np.maximum(1.0 - np.exp(k), 0.0)
    # put-call symmetry p(k, w) = e^k c(-k, w) keeps the in-the-money side accurate
    itm = k < 0
    otm = np.where(itm, np.exp(k) * _otm_call(-k, w) + 1.0 - np.exp(k), _otm_call(k, w))
    return np.where(w > 0, otm, intrinsic)


def bs_price(sigma, t, k, is_call=True):
    """Black-Scholes price of a call or put with log-strike ``k``.

    Parameters
    ----------
    sigma : float or array
        Volatility, ``>= 0``; ``inf`` gives the upper bound.
    t : float or array
        Maturity in years.
    k : float or array
        Log-strike.
    is_call : bool
    """
    sigma = np.asarray(sigma, float)
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    w = sigma * np.sqrt(np.asarray(t, float))
    k = np.asarray(k, float)
    with np.errstate(invalid="ignore"):
        c = np.where(np.isinf(w), 1.0, _call(k, np.where(np.isinf(w), 1.0, w)))
    out = c if is_call else c - 1.0 + np.exp(k)
    if not is_call:
        # direct OTM put for accuracy when k <= 0
        kk, ww = np.broadcast_arrays(k, w)
        direct = np.exp(kk) * _otm_call(-kk, np.where(ww > 0, ww, 1.0))
        put_lim = np.where(np.isinf(ww), np.exp(kk), np.maximum(np.exp(kk) - 1.0, 0.0))
        out = np.where((kk <= 0) & (ww > 0) & np.isfinite(ww), direct, np.where(np.isfinite(ww) & (ww > 0), out, put_lim))
    return float(out) if out.ndim == 0 else out


def bs_vega(sigma, t, k):
    """``d price / d sigma`` (same for calls and puts)."""
    st = np.sqrt(np.asarray(t, float))
    w = np.asarray(sigma, float) * st
    d1 = -np.asarray(k, float) / w + 0.5 * w
    return np.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi) * st


def implied_vol(price: float, t: float, k: float, is_call: bool = True, tol: float = PRICE_TOL) -> float:
    """Invert the Black-Scholes price.

    The price is moved to the out-of-the-money option by parity, the root is
    bracketed in total vol ``w = sigma sqrt(t)`` and found by Brent's method on
    the log price, then polished by Newton steps.

    Raises
    ------
    BandError
        If the price is outside the no-arbitrage band.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    ek = math.exp(k)
    lo_band = max(1.0 - ek, 0.0) if is_call else max(ek - 1.0, 0.0)
    hi_band = 1.0 if is_call else ek
    if not (lo_band < price < hi_band):
        kind = "call" if is_call else "put"
        raise BandError(f"{kind} price {price!r} outside ({lo_band!r}, {hi_band!r}) at t={t}, k={k}")
    if k >= 0:
        otm = price if is_call else price - ek + 1.0
    else:
        otm = price - 1.0 + ek if is_call else price
    if not otm > 0:
        raise BandError(f"time value {otm!r} lost to rounding at t={t}, k={k}")

    def f_otm(w):
        return float(_otm_call(k, w)) if k >= 0 else float(ek * _otm_call(-k, w))

    target = math.log(otm)

    def g(w):
        v = f_otm(w)
        return (math.log(v) if v > 0 else -math.inf) - target

    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
        if hi > 1e3:
            raise BandError(f"no volatility below {hi} reproduces the price at t={t}, k={k}")
    lo = hi / 2
    while g(lo) > 0:
        lo /= 2
    w = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        v = f_otm(w)
        d1 = -k / w + 0.5 * w
        dv = math.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi)
        if v <= 0 or dv <= 0:
            break
        step = (math.log(v) - target) * v / dv
        if abs(step) < 1e-17 * w:
            break
        w -= step
    sigma = w / math.sqrt(t)
    if abs(f_otm(w) - otm) > tol:
        raise RuntimeError(f"inversion residual above {tol} at t={t}, k={k}")
    return sigma
