"""Second-order convergence of the hybrid scheme on a mesh-refinement ladder.

    python3 demos/convergence.py
"""

from sibvp.problems import make_bvpt21
from sibvp.verification import Bvpt21Reference, convergence_order

rep = convergence_order(make_bvpt21(1e-2), [4e-3, 2e-3, 1e-3, 5e-4], Bvpt21Reference(1e-2))
for row in rep.rows:
    print(row)
print(f"fitted order {rep.fitted_order:.3f} (straight {rep.order_straight:.3f}, inverse {rep.order_inverse:.3f})")
