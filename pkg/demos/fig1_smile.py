"""Smile approximations against Monte Carlo for rBergomi at H=0.3, t=0.1.

Prints the FZ level, the KL-corrected smile and the Monte Carlo smile across
the scaled log-moneyness grid. Pass a path count to trade speed for noise:

    python demos/fig1_smile.py 200000
"""

import sys
import warnings

import numpy as np

from roughsmile import (
    BasisSpec,
    MCConfig,
    RBergomiParams,
    RiemannLiouvilleKernel,
    atm_coefficients,
    kfunc_closed_form,
    kl_correction,
    make_rbergomi,
    price_options,
    rate_function,
    sigma_level,
    simulate,
    smile_large_deviation,
)

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
p = RBergomiParams(sigma0=0.2, eta=1.5, rho=-0.7, H=0.3, theta=1.0)
model, kernel, basis = make_rbergomi(p), RiemannLiouvilleKernel(p.H), BasisSpec("haar", 8)
atm = atm_coefficients(model, kfunc_closed_form(p.H), p.rho, p.H)

t = 0.1
xs = np.linspace(-0.15, 0.15, 7)
ks = xs * t ** (0.5 - p.H)
mc = price_options(simulate(p, MCConfig(n_paths, 256, "exact", 11, True, (t,), tuple(ks))))

print(f"{'x':>7} {'k':>8} {'FZ':>8} {'KL':>8} {'MC':>8} {'MC se':>8}")
for x, k, r in zip(xs, ks, mc):
    if x == 0:
        fz, kl = p.sigma0, smile_large_deviation(t, 0.0, p.H, atm=atm).vol
    else:
        sol = rate_function(x, model, kernel, basis, p.rho)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            a = kl_correction(sol, 256).a_x
        fz, kl = sigma_level(sol), smile_large_deviation(t, x, p.H, sol, a).vol
    print(f"{x:+7.3f} {k:+8.4f} {fz:8.5f} {kl:8.5f} {r.ivol:8.5f} {r.ivol_se:8.5f}")
