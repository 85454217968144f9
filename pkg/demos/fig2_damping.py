"""How the damping parameter theta moves the short-dated smile (H=0.07).

For small H the KL step is skipped and the a0-corrected smile is shown;
a0 changes sign between theta=0 and theta=1.
"""

import numpy as np

from roughsmile import (
    BasisSpec,
    RBergomiParams,
    RiemannLiouvilleKernel,
    atm_coefficients,
    kfunc_closed_form,
    make_rbergomi,
    rate_function,
    smile_large_deviation,
)

t = 0.05
xs = np.array([-0.2, -0.1, 0.1, 0.2])
kernel, basis = RiemannLiouvilleKernel(0.07), BasisSpec("haar", 8)
print(f"{'theta':>5} {'a0':>9} " + " ".join(f"x={x:+.2f}" for x in xs))
for theta in np.linspace(0, 1, 5):
    p = RBergomiParams(sigma0=0.15, eta=1.8, rho=-0.78, H=0.07, theta=theta)
    model = make_rbergomi(p)
    atm = atm_coefficients(model, kfunc_closed_form(p.H), p.rho, p.H)
    vols = [smile_large_deviation(t, x, p.H, rate_function(x, model, kernel, basis, p.rho), None, atm).vol for x in xs]
    print(f"{theta:5.2f} {atm.a0:+9.5f} " + " ".join(f"{v:7.4f}" for v in vols))
