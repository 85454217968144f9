"""Volatility functions sigma(x, y) and the generalized rough Bergomi instance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FD_STEP = 1e-5
FD_RTOL = 1e-6


@dataclass(frozen=True)
class VolModel:
    """Volatility surface ``sigma(x, y)`` with analytic partial derivatives.

    ``x`` is the driving Gaussian (the Volterra process) and ``y`` the time
    argument.  All callables must broadcast over numpy arrays.

    Parameters
    ----------
    sigma, dsigma_dx, d2sigma_dx2, dsigma_dy : callable
        ``(x, y) -> array``.
    name : str, optional
        Label used in reports.
    """

    sigma: Callable
    dsigma_dx: Callable
    d2sigma_dx2: Callable
    dsigma_dy: Callable
    name: str = "custom"
    sigma0: float = field(init=False)
    sigma0_prime: float = field(init=False)
    sigma0_second: float = field(init=False)
    sigma0_dot: float = field(init=False)

    def __post_init__(self):
        vals = [float(f(0.0, 0.0)) for f in (self.sigma, self.dsigma_dx, self.d2sigma_dx2, self.dsigma_dy)]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("volatility or a derivative is not finite at the origin")
        if vals[0] <= 0.0:
            raise ValueError(f"sigma(0, 0) must be positive, got {vals[0]}")
        for name, v in zip(("sigma0", "sigma0_prime", "sigma0_second", "sigma0_dot"), vals):
            object.__setattr__(self, name, v)

    @classmethod
    def constant(cls, sigma0: float) -> "VolModel":
        zero = lambda x, y: np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        const = lambda x, y: np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(sigma0))
        return cls(const, zero, zero, zero, name="constant")


@dataclass(frozen=True)
class RBergomiParams:
    """Parameters of ``sigma(x, y) = sigma0 exp(eta x / 2 - theta eta**2 y / 4)``."""

    sigma0: float = 0.2
    eta: float = 1.5
    rho: float = -0.7
    H: float = 0.3
    theta: float = 0.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if not 0.0 < self.H <= 0.5:
            raise ValueError(f"H must lie in (0, 1/2], got {self.H}")
        if not (math.isfinite(self.eta) and math.isfinite(self.theta)):
            raise ValueError("eta and theta must be finite")

    @property
    def rho_bar(self) -> float:
        return math.sqrt(1.0 - self.rho**2)


def make_rbergomi(params: RBergomiParams) -> VolModel:
    """Generalized rough Bergomi volatility function with analytic derivatives."""
    s0, eta, th = params.sigma0, params.eta, params.theta
    cx = 0.5 * eta
    cy = -0.25 * th * eta**2

    def sigma(x, y):
        return s0 * np.exp(cx * np.asarray(x, float) + cy * np.asarray(y, float))

    return VolModel(
        sigma=sigma,
        dsigma_dx=lambda x, y: cx * sigma(x, y),
        d2sigma_dx2=lambda x, y: cx * cx * sigma(x, y),
        dsigma_dy=lambda x, y: cy * sigma(x, y),
        name="rbergomi",
    )


@dataclass(frozen=True)
class SelfCheckReport:
    """Outcome of :func:`derivative_selfcheck`."""

    max_rel_error: float
    errors: dict
    points: np.ndarray
    tol: float = FD_RTOL

    @property
    def ok(self) -> bool:
        return self.max_rel_error <= self.tol

    @property
    def flagged(self) -> list:
        return [k for k, v in self.errors.items() if v > self.tol]


def _rel(a, b, level):
    # differences of sigma carry rounding noise ~ eps |sigma| / h, so tiny
    # derivatives are measured against a floor proportional to |sigma|
    scale = np.maximum(np.abs(b), 1e-4 * np.abs(level))
    return float(np.max(np.abs(a - b) / scale))


def derivative_selfcheck(model: VolModel, n_random: int = 8, seed: int = 0, h: float = FD_STEP) -> SelfCheckReport:
    """Compare the analytic derivatives against centered finite differences.

    The second derivative is checked against differences of the analytic first
    derivative, which keeps the truncation error at ``O(h**2)`` instead of
    amplifying rounding by ``1/h**2``.  Points are the origin plus ``n_random``
    draws from ``[-1, 1] x [0, 1]``; ``y`` differences are centered too, so the
    model must accept slightly negative ``y``.
    """
    rng = np.random.default_rng(seed)
    pts = np.vstack([[0.0, 0.0], np.column_stack([rng.uniform(-1, 1, n_random), rng.uniform(0, 1, n_random)])])
    x, y = pts[:, 0], pts[:, 1]
    fd_x = (model.sigma(x + h, y) - model.sigma(x - h, y)) / (2 * h)
    fd_xx = (model.dsigma_dx(x + h, y) - model.dsigma_dx(x - h, y)) / (2 * h)
    fd_y = (model.sigma(x, y + h) - model.sigma(x, y - h)) / (2 * h)
    level = model.sigma(x, y)
    errors = {
        "dsigma_dx": _rel(model.dsigma_dx(x, y), fd_x, level),
        "d2sigma_dx2": _rel(model.d2sigma_dx2(x, y), fd_xx, level),
        "dsigma_dy": _rel(model.dsigma_dy(x, y), fd_y, level),
    }
    return SelfCheckReport(max(errors.values()), errors, pts)
