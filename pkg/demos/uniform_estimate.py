"""Sweep the family and watch ||u_n||_{K^2_{1+a}} / ||f||_{L^2} stay bounded.

Below the corner threshold pi / alpha_max (2/3 for the L-shape) the ratio
levels off; a = 0.9 is shown for comparison.  Takes about a minute.
"""

import sys

from roundoff.harness import ExperimentConfig, emit_plots, run_sweep

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
config = ExperimentConfig(polygon="lshape", n_list=[1, 2, 4, 8, 16], a_list=[0.3, 0.9], source="one", output=out)
table = run_sweep(config)
for a in table.a_values():
    ratios = table.column("ratio", a)
    print(f"a = {a:g}: " + "  ".join(f"{v:.4f}" for v in ratios) + f"   max/min {ratios.max() / ratios.min():.3f}")
print("lambda_min:", "  ".join(f"{v:.5f}" for v in table.column("lambda_min", 0.3)))
emit_plots(table, out, config)
print(f"results.csv and plots in {out}/")
