"""Method-of-lines heat equation with almost periodic diffusion and weighted forcing.

Run with ``python demos/04_heat_equation.py``.  Takes about half a minute.
"""

# %% Second-order convergence of the single-mode benchmark
import numpy as np

from wpap import HeatDemoConfig, run_demo
from wpap.heat import single_mode_error

errs = {n: single_mode_error(n, eigenvalue=-np.pi**2)[0] for n in (15, 31, 63)}
for n, e in errs.items():
    print(f"n = {n:3d}: sup error {e:.3e}")
print("ratios:", errs[15] / errs[31], errs[31] / errs[63])

# %% The full problem under rho_2
res = run_demo(HeatDemoConfig())
print(f"delta {res.dichotomy['delta']:.2f}, contraction {res.report.contraction_estimate:.3f}, "
      f"iterates {res.report.iterates}")
dev = res.wpap.deviation
print("rho_2 deviations:", [f"{v:.2e}" for v in dev.values], "ratios:",
      [f"{r:.2f}" for r in dev.ratios])
print("rho_0 ratios:", [f"{r:.2f}" for r in res.deviation_rho0.ratios])
