"""Frozen heat kernel of the Cauchy process against its closed form.

J(z) = 1/(pi z^2) with kappa = 1 has symbol |xi| and the heat kernel
t / (pi (t^2 + u^2)).  Prints the kernel, the closed form and the relative
error at a few points.
"""
import numpy as np

from levy_parametrix import build_model, build_symbol, frozen_kernel

model = build_model({"name": "cauchy", "nu": {"family": "stable", "alpha": 1.0, "scale": 1 / np.pi}})
sym = build_symbol(model, 0.0)

print(f"{'t':>5} {'u':>6} {'kernel':>14} {'closed form':>14} {'rel err':>9}")
for t in (0.25, 1.0):
    for u in (0.0, 0.5, 2.0, 5.0):
        k = frozen_kernel(sym, t, 0.0, u)
        ref = t / (np.pi * (t**2 + u**2))
        print(f"{t:5.2f} {u:6.2f} {k:14.10f} {ref:14.10f} {abs(k - ref) / ref:9.1e}")
