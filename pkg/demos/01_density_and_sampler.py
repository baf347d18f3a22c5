"""One-dimensional stable laws: density, sampler, and the product kernel.

Run:  python3 demos/01_density_and_sampler.py
"""

import math

import numpy as np
from scipy.special import gamma

from cylstable import AlphaParam, density_1d, product_kernel, sample_increments, stream

# At alpha = 1 the coordinate law is Cauchy, so the quadrature has a closed form to hit.
z = np.linspace(-5, 5, 11)
print("alpha=1 density vs Cauchy, max rel err:",
      np.max(np.abs(density_1d(1.0, 1.0, z) * math.pi * (1 + z**2) - 1)))

for a in (0.5, 1.3):
    print(f"alpha={a}: f(0) = {density_1d(a, 1.0, 0.0):.12f}, "
          f"Gamma(1+1/a)/pi = {gamma(1 + 1 / a) / math.pi:.12f}")

# Increments come from counter-based streams: the same (seed, path, coord) always
# gives the same numbers, whatever the batch size or thread count.
xi = np.array([0.5, 1.0, 2.0])
for a in (0.6, 1.7):
    x = sample_increments(a, 1.0, stream(seed=7, path_index=0, coord=0), 200_000)
    ecf = np.exp(1j * np.outer(xi, x)).mean(axis=1).real
    print(f"alpha={a}: empirical CF {np.round(ecf, 4)} vs exp(-|xi|^a) {np.round(np.exp(-xi**a), 4)}")

# The d-dimensional kernel is a product of 1-D laws, hence not rotation invariant:
# a displacement along an axis is far more likely than the same length on the diagonal.
p = AlphaParam(1.0, 2)
r = 3.0
print("p(1, 0, r e1)        =", product_kernel(p, 1.0, [0, 0], [r, 0]))
print("p(1, 0, r (1,1)/sqrt2) =", product_kernel(p, 1.0, [0, 0], [r / math.sqrt(2)] * 2))
