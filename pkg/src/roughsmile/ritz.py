"""Rate function by Ritz minimization over a finite orthonormal basis.

For a path ``h`` with ``hdot = sum_i a_i edot_i`` and ``hhat = K hdot`` the
energy after optimizing out the orthogonal direction is::

    J(a) = (x - rho G)**2 / (2 rho_bar**2 F) + |a|**2 / 2,
    F = int sigma(hhat, 0)**2,   G = int sigma(hhat, 0) hdot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .basis import BasisSpec
from .grid import QuadGrid, grid_for
from .kernels import KernelSpec
from .volmodel import VolModel

X_CAP = 2.0
GRAD_TOL = 1e-9


class RitzConvergenceError(RuntimeError):
    """Minimizer not found to tolerance; ``best`` holds the best solution seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class _Problem:
    """Ritz objective on a fixed quadrature grid."""

    def __init__(self, x, model, kernel, basis, rho, grid):
        self.x = float(x)
        self.model = model
        self.rho = float(rho)
        self.rho_bar = math.sqrt(1.0 - rho * rho)
        self.grid = grid
        s = grid.nodes
        self.w = grid.weights
        self.Edot = basis.edot(s)
        self.Ehat = basis.ehat(s, kernel)

    def parts(self, a):
        hdot = a @ self.Edot
        hhat = a @ self.Ehat
        sig = self.model.sigma(hhat, 0.0)
        if not np.all(np.isfinite(sig)):
            raise FloatingPointError("volatility overflow along the path")
        F = self.w @ (sig * sig)
        G = self.w @ (sig * hdot)
        return hdot, hhat, sig, F, G

    def value(self, a):
        _, _, _, F, G = self.parts(a)
        r = self.x - self.rho * G
        return r * r / (2 * self.rho_bar**2 * F) + 0.5 * a @ a

    def value_grad(self, a):
        hdot, hhat, sig, F, G = self.parts(a)
        dsig = self.model.dsigma_dx(hhat, 0.0)
        dF = self.Ehat @ (self.w * 2.0 * sig * dsig)
        dG = self.Ehat @ (self.w * dsig * hdot) + self.Edot @ (self.w * sig)
        r = self.x - self.rho * G
        c = self.rho_bar**2
        val = r * r / (2 * c * F) + 0.5 * a @ a
        grad = -self.rho * r * dG / (c * F) - r * r * dF / (2 * c * F * F) + a
        return val, grad


@dataclass(frozen=True)
class RitzSolution:
    """Minimizer of the Ritz objective at one ``x``.

    Path arrays are sampled on ``grid.nodes``; the methods ``h``, ``hdot``,
    ``hhat``, ``hbar``, ``htilde`` evaluate the paths at arbitrary points.
    """

    x: float
    coeffs: np.ndarray
    Lambda: float
    F_val: float
    G_val: float
    grad_norm: float
    rho: float
    model: VolModel = field(repr=False)
    kernel: KernelSpec = field(repr=False)
    basis: BasisSpec
    grid: QuadGrid = field(repr=False)

    @property
    def rho_bar(self) -> float:
        return math.sqrt(1.0 - self.rho**2)

    @property
    def hbar_rate(self) -> float:
        """``c`` in ``hbar_dot(s) = c sigma(hhat(s), 0)``."""
        return (self.x - self.rho * self.G_val) / (self.rho_bar * self.F_val)

    def hdot(self, s):
        return self.coeffs @ self.basis.edot(s)

    def h(self, s):
        return self.coeffs @ self.basis.e(s)

    def hhat(self, s):
        return self.coeffs @ self.basis.ehat(s, self.kernel)

    def hbar_dot(self, s):
        return self.hbar_rate * self.model.sigma(self.hhat(s), 0.0)

    def hbar(self, s):
        """``int_0^s hbar_dot`` by a graded rule on ``[0, s]`` per point."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        g = self.grid
        pts = s[:, None] * g.nodes[None, :]
        vals = self.hbar_dot(pts.ravel()).reshape(pts.shape)
        return s * (vals @ g.weights)

    def htilde(self, s):
        return self.rho * self.h(s) + self.rho_bar * self.hbar(s)

    def htilde_dot(self, s):
        return self.rho * self.hdot(s) + self.rho_bar * self.hbar_dot(s)

    def on_grid(self):
        """Dict of path samples on the solution grid (``hdot, hhat, hbar_dot, htilde_dot``)."""
        s = self.grid.nodes
        hdot = self.coeffs @ self.basis.edot(s)
        hhat = self.coeffs @ self.basis.ehat(s, self.kernel)
        hbar_dot = self.hbar_rate * self.model.sigma(hhat, 0.0)
        return {
            "s": s,
            "hdot": hdot,
            "hhat": hhat,
            "hbar_dot": hbar_dot,
            "htilde_dot": self.rho * hdot + self.rho_bar * hbar_dot,
        }

    def energy(self) -> float:
        """``(|hdot|^2 + |hbar_dot|^2) / 2`` recomputed from the reconstructed paths."""
        p = self.on_grid()
        w = self.grid.weights
        return 0.5 * (w @ p["hdot"] ** 2 + w @ p["hbar_dot"] ** 2)


def _newton_polish(prob, a, steps=3):
    """A few Newton steps with a finite-difference Hessian of the analytic gradient."""
    best_val, best_g = prob.value_grad(a)
    for _ in range(steps):
        n = a.size
        eps = 1e-6
        Hm = np.empty((n, n))
        for j in range(n):
            d = np.zeros(n)
            d[j] = eps
            Hm[:, j] = (prob.value_grad(a + d)[1] - prob.value_grad(a - d)[1]) / (2 * eps)
        Hm = 0.5 * (Hm + Hm.T)
        try:
            step = np.linalg.solve(Hm, best_g)
        except np.linalg.LinAlgError:
            break
        trial = a - step
        val, g = prob.value_grad(trial)
        if not (np.isfinite(val) and np.linalg.norm(g) < np.linalg.norm(best_g) and val <= best_val + 1e-15):
            break
        a, best_val, best_g = trial, val, g
    return a, best_val, best_g


def rate_function(
    x: float,
    model: VolModel,
    kernel: KernelSpec,
    basis: BasisSpec = BasisSpec("haar", 8),
    rho: float = 0.0,
    grid: QuadGrid | None = None,
    x_cap: float = X_CAP,
    grad_tol: float = GRAD_TOL,
) -> RitzSolution:
    """Minimize the Ritz objective at ``x``.

    Parameters
    ----------
    x : float
        Large-deviation moneyness scale.
    model : VolModel
    kernel : KernelSpec
    basis : BasisSpec
        Truncated basis for ``hdot``.
    rho : float
        Spot-vol correlation in (-1, 1).
    grid : QuadGrid, optional
        Quadrature grid; defaults to one aligned with the basis breakpoints.
    x_cap : float
        Largest ``|x|`` accepted.
    grad_tol : float
        Gradient-norm tolerance for the returned minimizer.

    Returns
    -------
    RitzSolution

    Raises
    ------
    RitzConvergenceError
        If no start reaches ``grad_tol``; the best solution is attached.
    """
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")
    if not math.isfinite(x) or abs(x) > x_cap:
        raise ValueError(f"|x|={abs(x)} exceeds the cap {x_cap}; asymptotic regime not trusted there")
    if grid is None:
        grid = grid_for(basis.resolution, 256)
    prob = _Problem(x, model, kernel, basis, rho, grid)

    def pack(a, val, g):
        _, _, _, F, G = prob.parts(a)
        return RitzSolution(float(x), a, float(val), float(F), float(G), float(np.linalg.norm(g)),
                            float(rho), model, kernel, basis, grid)

    if x == 0.0:
        a = np.zeros(basis.N)
        val, g = prob.value_grad(a)
        return pack(a, val, g)

    starts = [np.zeros(basis.N)]
    first = np.zeros(basis.N)
    first[0] = rho * x / model.sigma0
    starts.append(first)
    best = None
    for a0 in starts:
        res = optimize.minimize(prob.value_grad, a0, jac=True, method="BFGS",
                                options={"gtol": grad_tol * 0.1, "maxiter": 2000})
        a, val, g = _newton_polish(prob, res.x)
        if best is None or val < best[1] - 1e-14 or (abs(val - best[1]) <= 1e-14 and np.linalg.norm(g) < np.linalg.norm(best[2])):
            best = (a, val, g)
    sol = pack(*best)
    if not sol.grad_norm <= grad_tol:
        raise RitzConvergenceError(f"gradient norm {sol.grad_norm:.2e} above {grad_tol:.0e} at x={x}", sol)
    return sol


def sigma_level(sol: RitzSolution) -> float:
    """Leading-order implied vol ``|x| / sqrt(2 Lambda(x))``."""
    if sol.x == 0.0:
        raise ValueError("level undefined at x=0; use the at-the-money coefficients")
    if sol.Lambda <= 1e-14:
        raise ZeroDivisionError(f"Lambda(x)={sol.Lambda:.3e} too small to divide by")
    return abs(sol.x) / math.sqrt(2.0 * sol.Lambda)


def rate_derivative(sol: RitzSolution, sigma_x_sq: float) -> float:
    """``Lambda'(x) = sgn(x) sqrt(2 Lambda(x) / sigma_x^2)``."""
    if sol.x == 0.0:
        raise ValueError("x must be nonzero")
    if not sigma_x_sq > 0:
        raise ValueError("sigma_x_sq must be positive")
    return math.copysign(math.sqrt(2.0 * sol.Lambda / sigma_x_sq), sol.x)


def rate_derivative_fd(x, model, kernel, basis, rho, h=1e-3, **kw) -> float:
    """Centered finite difference of the Ritz rate function in ``x``."""
    up = rate_function(x + h, model, kernel, basis, rho, **kw).Lambda
    dn = rate_function(x - h, model, kernel, basis, rho, **kw).Lambda
    return (up - dn) / (2 * h)
