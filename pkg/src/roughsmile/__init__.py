"""Short-maturity implied-volatility asymptotics under rough volatility."""

from .basis import BasisSpec
from .blackscholes import bs_price, implied_vol
from .expansions import (
    AtmCoefficients,
    Curvature,
    atm_coefficients,
    call_price_asymptotic,
    call_price_moderate,
    curvature_sign,
    skew_curvature_finite_difference,
    smile_fully_expanded,
    smile_large_deviation,
    smile_moderate_deviation,
)
from .kernels import (
    KernelSpec,
    KFunctionals,
    RiemannLiouvilleKernel,
    StepFunction,
    TabulatedKernel,
    adjoint_k1,
    convolve,
    kfunc_closed_form,
    kfunc_quadrature,
)
from .kl import KLCorrection, a_correction, carleman_fredholm, delta2_assembly, kl_coefficients, kl_correction
from .montecarlo import MCConfig, PathBundle, price_options, simulate
from .ritz import RitzSolution, rate_derivative, rate_function, sigma_level
from .volmodel import RBergomiParams, VolModel, derivative_selfcheck, make_rbergomi

__version__ = "0.1.0"
