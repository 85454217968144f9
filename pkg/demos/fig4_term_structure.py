"""ATM term structure from the expansion against Monte Carlo for theta=0 and 1."""

import sys

from roughsmile import MCConfig, RBergomiParams, atm_coefficients, kfunc_closed_form, make_rbergomi, price_options, simulate
from roughsmile.expansions import atm_term_structure

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
ts = (0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
for theta in (0.0, 1.0):
    p = RBergomiParams(sigma0=0.2557, eta=0.2928, rho=-0.7571, H=0.1, theta=theta)
    atm = atm_coefficients(make_rbergomi(p), kfunc_closed_form(p.H), p.rho, p.H)
    rows = price_options(simulate(p, MCConfig(n_paths, 256, "exact", 3, True, ts, (0.0,))))
    trend = "increasing" if atm.a0 > 0 else "decreasing"
    print(f"theta={theta:g}  a0={atm.a0:+.5f}  ({trend})")
    for r in rows:
        print(f"  t={r.t:4.2f}  expansion={atm_term_structure(r.t, atm):.5f}  mc={r.ivol:.5f} +- {r.ivol_se:.5f}")
