"""Moderate-deviation smile with and without the a0 t^(2H) term (H=0.1, beta=0.06)."""

import sys

import numpy as np

from roughsmile import MCConfig, RBergomiParams, atm_coefficients, kfunc_closed_form, make_rbergomi, price_options, simulate
from roughsmile import smile_moderate_deviation

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
p = RBergomiParams(sigma0=0.2557, eta=0.2928, rho=-0.7571, H=0.1, theta=0.0)
atm = atm_coefficients(make_rbergomi(p), kfunc_closed_form(p.H), p.rho, p.H)
beta = 0.06
ts, xs = (0.01, 0.025, 0.05, 0.075, 0.1), (-0.1, 0.0, 0.1)
scale = 0.5 - p.H + beta
ks = sorted({x * t**scale for t in ts for x in xs})
bundle = simulate(p, MCConfig(n_paths, 256, "exact", 5, True, ts, tuple(ks)))

err_with, err_without = [], []
print(f"{'t':>6} {'x':>5} {'MC':>8} {'with':>8} {'without':>8}")
for t in ts:
    for x in xs:
        r = price_options(bundle, [x * t**scale], [t])[0]
        w = smile_moderate_deviation(t, x, beta, atm, True).vol
        wo = smile_moderate_deviation(t, x, beta, atm, False).vol
        err_with.append(abs(w - r.ivol))
        err_without.append(abs(wo - r.ivol))
        print(f"{t:6.3f} {x:+5.2f} {r.ivol:8.5f} {w:8.5f} {wo:8.5f}")
print(f"mean abs error: with {np.mean(err_with):.5f}, without {np.mean(err_without):.5f}")
