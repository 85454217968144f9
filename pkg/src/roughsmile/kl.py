"""Second-order correction ``A(x)`` and term-structure coefficient ``a(x)``.

The Brownian pair is expanded on an orthonormal basis,
``W = sum gamma_i e_i`` and ``Wbar = sum gammabar_i e_i``.  With the
coefficients of ``g_1`` on ``Gamma = (gamma, gammabar)`` written ``w = (g, gbar)``,
the residual processes ``Vhat`` and ``Vtilde`` have basis coefficients

    xi   = P_xi   Gamma,  P_xi   = [I - g g^T / s2,        -g gbar^T / s2],
    zeta = P_zeta Gamma,  P_zeta = [rho I - gt g^T / s2,  rho_bar I - gt gbar^T / s2],

with ``s2 = |w|^2`` and ``gt = rho g + rho_bar gbar``.  The quadratic part of
``Delta_2`` is ``Gamma^T Q Gamma`` with ``Q = P_xi^T (alpha/2) P_xi + P_xi^T beta P_zeta``.
The stochastic integral is of Ito type, so its Wick-ordered part is
``Gamma^T Q Gamma - tr Q`` and the constant is ``tr Q - rho tr beta`` plus the
deterministic integrals.  ``tr beta`` grows without bound with the basis size;
only the regularized (Carleman-Fredholm) determinant is finite.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import BasisSpec
from .grid import grid_for
from .ritz import RitzSolution, rate_derivative

KL_SMALL_H = 0.2


class DegeneracyError(ArithmeticError):
    """An eigenvalue of the chaos matrix reached 1/2."""

    def __init__(self, index, value):
        super().__init__(f"eigenvalue {index} equals {value:.6g} >= 1/2; minimizer is degenerate")
        self.index = index
        self.value = value


class RegimeError(ArithmeticError):
    """The logarithm in ``a(x)`` has a non-positive argument."""


@dataclass(frozen=True)
class KLCoefficients:
    g: np.ndarray
    g_bar: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sigma_dot_integral: float
    sigma_sq_integral: float

    @property
    def sigma_x_sq(self) -> float:
        return float(self.g @ self.g + self.g_bar @ self.g_bar)


def kl_coefficients(sol: RitzSolution, N_kl: int = 256, basis_kind: str = "haar") -> KLCoefficients:
    """KL coefficients of ``g_1`` and the matrices of ``Delta_2`` along the Ritz minimizer.

    All time integrals use the graded rule shared with the Ritz step, refined
    so that every breakpoint of the KL basis is a cell boundary.
    """
    if N_kl < 1:
        raise ValueError("N_kl must be positive")
    basis = BasisSpec(basis_kind, N_kl)
    grid = grid_for(basis.resolution, sol.basis.resolution, sol.grid.n_cells)
    s, w = grid.nodes, grid.weights
    model, kernel, rho = sol.model, sol.kernel, sol.rho
    rho_bar = math.sqrt(1.0 - rho * rho)

    hdot = sol.coeffs @ sol.basis.edot(s)
    hhat = sol.coeffs @ sol.basis.ehat(s, kernel)
    sig = model.sigma(hhat, 0.0)
    d1 = model.dsigma_dx(hhat, 0.0)
    d2 = model.d2sigma_dx2(hhat, 0.0)
    dy = model.dsigma_dy(hhat, 0.0)
    ht_dot = rho * hdot + rho_bar * sol.hbar_rate * sig

    Ed = basis.edot(s)
    Eh = basis.ehat(s, kernel)
    sig_e = Ed @ (w * sig)
    g = Eh @ (w * d1 * ht_dot) + rho * sig_e
    g_bar = rho_bar * sig_e
    alpha = (Eh * (w * d2 * ht_dot)) @ Eh.T
    beta = (Eh * (w * d1)) @ Ed.T
    sdot = float(w @ (dy * s ** (2 * kernel.H) * ht_dot))
    ssq = float(w @ (sig * sig))
    return KLCoefficients(g, g_bar, alpha, beta, sdot, ssq)


def chaos_matrix(g, g_bar, alpha, beta, rho):
    """``Q`` such that the quadratic part of ``Delta_2`` is ``Gamma^T Q Gamma``."""
    g = np.asarray(g, float)
    g_bar = np.asarray(g_bar, float)
    rho_bar = math.sqrt(1.0 - rho * rho)
    n = g.size
    s2 = g @ g + g_bar @ g_bar
    gt = rho * g + rho_bar * g_bar
    I = np.eye(n)
    P_xi = np.hstack([I - np.outer(g, g) / s2, -np.outer(g, g_bar) / s2])
    P_zeta = np.hstack([rho * I - np.outer(gt, g) / s2, rho_bar * I - np.outer(gt, g_bar) / s2])
    return P_xi.T @ (0.5 * alpha) @ P_xi + P_xi.T @ beta @ P_zeta


@dataclass(frozen=True)
class Delta2Parts:
    """Coefficients of ``Delta_2 = sum (gamma_i gamma_j - d_ij) eta0 + gamma_i gammabar_j eta1
    + (gammabar_i gammabar_j - d_ij) eta2 + C``."""

    eta0: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    C: float


def delta2_assembly(g, g_bar, alpha, beta, rho, sigma_x_sq=None, sigma_dot_integral=0.0,
                    sigma_sq_integral=None) -> Delta2Parts:
    """Closed-form sums for ``eta0, eta1, eta2`` and ``C``.

    ``eta1`` is the full coefficient of ``gamma_i gammabar_j``.  Pass
    ``sigma_sq_integral`` only in the Brownian case ``H = 1/2``, where it
    contributes ``-1/2`` times itself to ``C``.
    """
    g = np.asarray(g, float)
    gb = np.asarray(g_bar, float)
    alpha = np.asarray(alpha, float)
    beta = np.asarray(beta, float)
    n = g.size
    if gb.shape != (n,) or alpha.shape != (n, n) or beta.shape != (n, n):
        raise ValueError("dimension mismatch between g, g_bar, alpha, beta")
    rho_bar = math.sqrt(1.0 - rho * rho)
    s2 = float(g @ g + gb @ gb) if sigma_x_sq is None else float(sigma_x_sq)
    gt = rho * g + rho_bar * gb
    ag = alpha @ g          # sum_k alpha_ik g_k
    gaa = g @ ag            # sum_kl g_k g_l alpha_kl
    bgt = beta @ gt         # sum_k beta_ik gt_k
    btg = beta.T @ g        # sum_k g_k beta_kj
    gbg = g @ beta @ gt     # sum_kl g_k gt_l beta_kl

    eta0 = (0.5 * alpha - np.outer(g, ag) / s2 + 0.5 * np.outer(g, g) * gaa / s2**2
            + rho * beta - np.outer(g, bgt) / s2 - rho * np.outer(g, btg) / s2
            + np.outer(g, g) * gbg / s2**2)
    eta1 = (rho_bar * beta - np.outer(ag, gb) / s2 + np.outer(g, gb) * gaa / s2**2
            - np.outer(bgt, gb) / s2 - rho_bar * np.outer(g, btg) / s2
            - rho * np.outer(btg, gb) / s2 + 2.0 * np.outer(g, gb) * gbg / s2**2)
    eta2 = (0.5 * np.outer(gb, gb) * gaa / s2**2 - rho_bar * np.outer(gb, btg) / s2
            + np.outer(gb, gb) * gbg / s2**2)
    C = sigma_dot_integral + 0.5 * np.trace(alpha) - 0.5 * gaa / s2 - gbg / s2
    if sigma_sq_integral is not None:
        C -= 0.5 * sigma_sq_integral
    return Delta2Parts(eta0, eta1, eta2, float(C))


def assemble_M(parts: Delta2Parts, dlam: float) -> np.ndarray:
    """Symmetric matrix ``M`` with ``Lambda' Delta_2^(2) = Gamma^T M Gamma - tr M``."""
    e0 = 0.5 * (parts.eta0 + parts.eta0.T)
    e2 = 0.5 * (parts.eta2 + parts.eta2.T)
    off = 0.5 * parts.eta1
    M = dlam * np.block([[e0, off], [off.T, e2]])
    return 0.5 * (M + M.T)


def carleman_fredholm(eigenvalues) -> float:
    """``prod_k (1 - 2 lambda_k)**(-1/2) exp(-lambda_k)``, accumulated in log space."""
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    bad = np.flatnonzero(lam >= 0.5)
    if bad.size:
        raise DegeneracyError(int(bad[0]), float(lam[bad[0]]))
    return float(np.exp(np.sum(-0.5 * np.log1p(-2.0 * lam) - lam)))


@dataclass(frozen=True)
class KLCorrection:
    """Everything computed by the KL step at one ``x``."""

    x: float
    N_kl: int
    g: np.ndarray = field(repr=False)
    g_bar: np.ndarray = field(repr=False)
    sigma_x_sq: float
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    eta0: np.ndarray = field(repr=False)
    eta1: np.ndarray = field(repr=False)
    eta2: np.ndarray = field(repr=False)
    C: float
    M: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    dlam: float
    A_x: float
    a_x: float

    def to_json(self, path=None):
        """Serialize to the JSON schema described in the README."""
        doc = {
            "x": self.x, "N_kl": self.N_kl, "sigma_x_sq": self.sigma_x_sq, "C": self.C,
            "lambda_prime": self.dlam, "A": self.A_x, "a": self.a_x,
            "g": self.g.tolist(), "g_bar": self.g_bar.tolist(),
            "alpha": self.alpha.tolist(), "beta": self.beta.tolist(),
            "eta0": self.eta0.tolist(), "eta1": self.eta1.tolist(), "eta2": self.eta2.tolist(),
            "M": self.M.tolist(), "eigenvalues": self.eigenvalues.tolist(),
        }
        text = json.dumps(doc)
        if path is not None:
            Path(path).write_text(text)
        return text


def a_correction(x: float, sol: RitzSolution, dlam: float, A_x: float, Lambda: float | None = None, H: float = 0.3) -> float:
    """Term-structure coefficient ``a(x)`` from ``A(x)``, ``Lambda(x)`` and ``Lambda'(x)``."""
    if x == 0.0:
        raise ValueError("a(x) is 0/0 at x=0; use the at-the-money a0")
    lam = sol.Lambda if Lambda is None else Lambda
    arg = 2.0 * A_x * lam / (dlam * x)
    if H == 0.5:
        arg /= math.exp(x / 2)
    if not arg > 0:
        raise RegimeError(f"log argument {arg:.3e} <= 0 at x={x}: outside the asymptotic regime")
    return x * x / (2.0 * lam * lam) * math.log(arg)


def kl_correction(sol: RitzSolution, N_kl: int = 256, basis_kind: str = "haar") -> KLCorrection:
    """Full KL pipeline at the Ritz minimizer ``sol``."""
    x = sol.x
    if x == 0.0:
        raise ValueError("KL correction is not defined at x=0; use the at-the-money a0")
    H = sol.kernel.H
    if H < KL_SMALL_H:
        warnings.warn(f"H={H} < {KL_SMALL_H}: the KL product converges slowly, N_kl={N_kl} may be far from enough",
                      RuntimeWarning, stacklevel=2)
    co = kl_coefficients(sol, N_kl, basis_kind)
    s2 = co.sigma_x_sq
    parts = delta2_assembly(co.g, co.g_bar, co.alpha, co.beta, sol.rho, s2, co.sigma_dot_integral,
                            co.sigma_sq_integral if H == 0.5 else None)
    dlam = rate_derivative(sol, s2)
    M = assemble_M(parts, dlam)
    eig = np.linalg.eigvalsh(M)
    A = math.exp(dlam * parts.C) * carleman_fredholm(eig)
    if H == 0.5:
        A *= math.exp(x)
    a = a_correction(x, sol, dlam, A, H=H)
    return KLCorrection(x, N_kl, co.g, co.g_bar, s2, co.alpha, co.beta, parts.eta0, parts.eta1, parts.eta2,
                        parts.C, M, eig, dlam, A, a)
