"""Interior-layer problem solved by continuation in xi.

Each solution seeds the next, stiffer one.  Below xi = 5e-3 the problem
exceeds what double precision can resolve and the solver reports failure.

    python3 demos/bvpt30_continuation.py
"""

from sibvp.hybrid import SolveError, solve
from sibvp.problems import make_bvpt30
from sibvp.shooting import ShootConfig

H = 1e-4
seed = None
for xi in (5e-2, 2e-2, 1e-2):
    try:
        mesh, _ = solve(make_bvpt30(xi), ShootConfig(h=H, u_crit=2.0), seed=seed)
    except SolveError as exc:
        print(f"xi={xi:g}: {exc}")
        break
    c1, c2 = mesh.critical
    print(f"xi={xi:g}: layer between c1={c1:.6f} and c2={c2:.6f}, "
          f"knots {mesh.n_straight}+{mesh.n_inverse}+{len(mesh.tt)}")
    seed = mesh
