"""Evolution families, exponential dichotomy and the four decay estimates.

Run with ``python demos/02_dichotomy_and_estimates.py``.
"""

# %% A quasi-periodically modulated saddle
import numpy as np

from wpap import APSignal, EvolutionFamily, LinearFamily, check_AT, dichotomy, fit_estimate

d = APSignal.sin(1.0) + APSignal.sin(np.sqrt(2.0))
family = LinearFamily.modulated(np.diag([-1.0, 1.0]), d, offset=3.0)
ef = EvolutionFamily(family)
dd = dichotomy(ef)
print("projection:\n", dd.P)
print(f"N = {dd.N:.3f}, delta = {dd.delta:.4f} (inf of the modulation is 1)")
print("cocycle defect:", ef.cocycle_defect(4.0, 1.5, -2.0))

# %% Sectorial resolvent bound and Hoelder continuity in time
at = check_AT(family)
print(f"resolvent constant {at.resolvent_constant:.3f}, "
      f"fitted Hoelder exponent {at.fitted_exponent:.2f}, passed {at.passed}")

# %% Fitted constants and rates for the interpolation-norm estimates
alpha, beta, mu = 0.6, 0.8, 0.1
for target in ("eq1.1", "eq2.1", "beta1", "beta2"):
    fit = fit_estimate(ef, dd, target, alpha, beta, mu)
    print(f"{target:>6}: prefactor {fit.prefactor:8.3f}  rate {fit.decay_rate:6.3f} "
          f"(needs {fit.required_rate:.3f})  ok={fit.rate_ok}")
