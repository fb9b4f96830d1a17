"""
Counting blur zeros with conditional expressions
================================================

A random image is blurred by a 2x3 kernel. Along each zero-value branch of the
observed image the 2x3 CE vanishes exactly when the branch belongs to the
kernel, so the flagged count equals the kernel's number of v-zeros (2).
The v form counts the kernel's u-zeros the same way (1).
"""

import numpy as np

from cedeconv import CEConfig, CESize, convolve, detect
from cedeconv.cedetect import U_FORM, V_FORM

rng = np.random.default_rng(4)
f = rng.integers(0, 256, (8, 8)).astype(float)
h = np.array([[1.0, 2.0, 1.0],
              [2.0, 1.0, 1.0]])
g = convolve(f, h)
print("observed image:", g.shape)

# A short sweep keeps this quick; the CLI default is 64 angles
cfg = CEConfig(size=CESize(2, 3), sweep_count=8)

for form in (U_FORM, V_FORM):
    rep = detect(g, cfg, form)
    print(f"{form}: consensus {rep.consensus_count}, agreement {rep.agreement():.2f}")

# Scores at the first angle: zeros of the kernel score 0, the rest far above tau
rep = detect(g, cfg, U_FORM)
for e in rep.entries:
    if e.phi_index == 0:
        print(f"  branch {e.branch}: score {e.score:6.2f}  flagged={e.flagged}")
