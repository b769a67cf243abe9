"""Error profile of the boundary-layer problem xi u'' = (u + 1) u - exp(-2x/sqrt(xi)).

The straight branch carries almost the whole interval; the error peaks
where the solution is still O(1) and decays in the far field.

    python3 demos/bvpt21_profile.py [xi]
"""

import sys

import numpy as np

from sibvp.hybrid import solve
from sibvp.problems import make_bvpt21
from sibvp.shooting import ShootConfig
from sibvp.verification import Bvpt21Reference, kappa_profiles

xi = float(sys.argv[1]) if len(sys.argv) > 1 else 1e-2
h = 1e-4
mesh, _ = solve(make_bvpt21(xi), ShootConfig(h=h))
rep = kappa_profiles(mesh, Bvpt21Reference(xi))
s = rep.straight.samples
print(f"xi={xi:g}: c={mesh.critical:.6f}, N_S={mesh.n_straight}, N_I={mesh.n_inverse}")
print(f"sup kappa0 straight {rep.straight.kappa0_sup:.4g}, inverse {rep.inverse.kappa0_sup:.4g}")
print(f"{'x':>8} {'|u-u_exact|/h^2':>16}")
for x in np.linspace(s[0, 0], s[-1, 0], 11):
    i = int(np.argmin(np.abs(s[:, 0] - x)))
    print(f"{s[i, 0]:8.4f} {s[i, 1]:16.4g}")
