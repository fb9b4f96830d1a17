"""
Blind restoration
=================

Blur a small image, detect the blur zeros, deflate them and transform back.
The blur mass (sum of kernel entries) fixes the overall scale.
"""

import numpy as np

from cedeconv import CEConfig, CESize, convolve, restore, verify

rng = np.random.default_rng(7)
f = rng.integers(0, 256, (7, 7)).astype(float)

# A 1x2 kernel followed by a 2x1 kernel: one v-zero and one u-zero
h_row = np.array([[1.0, 2.0]])
h_col = np.array([[2.0], [1.0]])
g = convolve(convolve(f, h_row), h_col)
mass = h_row.sum() * h_col.sum()
print("observed:", g.shape, " blur mass:", mass)

cfg = CEConfig(size=CESize(2, 2), sweep_count=8)
result = restore(g, cfg, "sequential", blur_mass=mass)
print("detected zeros:", result.counts)
print("restored:", result.restored.shape, " imaginary residual:", f"{result.max_imag_residual:.1e}")
print("comparison with the original:", verify(result.restored, f))
