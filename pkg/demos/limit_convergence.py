"""Solutions on the rounded domains approach the solution on the polygon itself.

u_n is evaluated at the nodes of a graded mesh of the polygon and compared in L^2.
"""

import sys

from roundoff.harness import ExperimentConfig, convergence_study

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
config = ExperimentConfig(polygon="square", n_list=[1, 2, 4, 8], source="sine", h_max=0.1, output=out)
table = convergence_study(config)
print(f"||u_inf|| = {table.l2_inf:.6f}")
prev = None
for r in table.rows:
    rate = "" if prev is None else f"  (x{prev / r.l2_diff:.2f})"
    print(f"n={r.n:2d}  ||u_n - u_inf|| = {r.l2_diff:.6f}{rate}{'  mesh floor' if r.floor else ''}")
    prev = r.l2_diff
