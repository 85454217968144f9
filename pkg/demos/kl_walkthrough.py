"""One pass through the KL step at x=0.05, printing each intermediate quantity."""

import json

import numpy as np

from roughsmile import (
    BasisSpec,
    RBergomiParams,
    RiemannLiouvilleKernel,
    atm_coefficients,
    kfunc_closed_form,
    kl_correction,
    make_rbergomi,
    rate_function,
)

p = RBergomiParams(sigma0=0.2, eta=1.5, rho=-0.7, H=0.3, theta=1.0)
model = make_rbergomi(p)
sol = rate_function(0.05, model, RiemannLiouvilleKernel(p.H), BasisSpec("haar", 8), p.rho)
print(f"Lambda(x) = {sol.Lambda:.8f}   Ritz coefficients = {np.round(sol.coeffs, 5)}")

corr = kl_correction(sol, 256)
lam = corr.eigenvalues
print(f"sigma_x^2 = {corr.sigma_x_sq:.6e}   Lambda'(x) = {corr.dlam:.6f}   C = {corr.C:+.6e}")
print(f"largest |eigenvalues| of M: {lam[np.argsort(-np.abs(lam))[:4]]}")
print(f"A(x) = {corr.A_x:.6f}   a(x) = {corr.a_x:+.6f}")
print(f"a0   = {atm_coefficients(model, kfunc_closed_form(p.H), p.rho, p.H).a0:+.6f}")
doc = json.loads(corr.to_json())
print("dump keys:", ", ".join(doc))
