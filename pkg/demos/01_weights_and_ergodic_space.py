"""Weights, their equivalence classes, and the weighted ergodic space.

Run with ``python demos/01_weights_and_ergodic_space.py``.
"""

# %% Ergodic mass of polynomial weights grows like T^(2m+1)
import numpy as np

from wpap import (Weight, classify_weight, ergodic_mass, equivalence_transfers_pap0,
                  is_pap0, weights_equivalent)

for m in range(4):
    w = Weight.polynomial(m)
    masses = [ergodic_mass(w, T).value for T in (10.0, 20.0, 40.0)]
    growth = np.log2(masses[2] / masses[1])
    print(f"rho_{m}: m(40) = {masses[2]:.4g}, doubling exponent {growth:.2f}")

# %% Classification: unbounded mass, boundedness, translation invariance
for w in (Weight.constant(1.0), Weight.polynomial(2),
          Weight.expression(lambda t: np.exp(t**2), name="exp(t^2)")):
    horizons = [4.0, 8.0, 16.0] if w.name == "exp(t^2)" else [100.0, 200.0, 400.0]
    wc = classify_weight(w, horizons)
    print(f"{w.name:>9}: U_inf={wc.in_U_infinity} U_B={wc.in_U_B} "
          f"shift-invariant={wc.translation_invariant}")

# %% Equivalent weights see the same ergodic space
v = weights_equivalent(Weight.polynomial(1), Weight.expression(lambda t: 2 + t**2),
                       [500.0, 1000.0, 2000.0])
print("1+t^2 ~ 2+t^2:", v.equivalent, "ratio limits", v.liminf_ratio_12, v.limsup_ratio_12)

corpus = {"exp(-|t|)": lambda t: np.exp(-np.abs(t)), "sin t": np.sin,
          "1/(1+t^2)": lambda t: 1 / (1 + t**2)}
rep = equivalence_transfers_pap0(Weight.polynomial(1), Weight.expression(lambda t: 2 + t**2),
                                 corpus)
print("decisions:", rep.decisions_1, "agree:", rep.agree)

# %% Deviation curves: a decaying bump against a sine
for name, fn in corpus.items():
    dev = is_pap0(fn, Weight.polynomial(2))
    vals = ", ".join(f"{v:.2e}" for v in dev.values)
    print(f"{name:>10} under rho_2: [{vals}] -> {dev.decays_to_zero}")
