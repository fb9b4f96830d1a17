"""
Extended-precision polynomial tools
===================================

Roots, deflation and determinants at 120 decimal digits.
"""

import numpy as np
from gmpy2 import mpc

from cedeconv.numerics import PrecisionContext, Poly, det, poly_deflate, poly_eval, poly_mul, poly_roots

ctx = PrecisionContext(digits=120)
print("working precision:", ctx.digits, "digits,", ctx.bits, "bits")

# A polynomial with known roots: (z - 1/2)(z + 2)(z - i)
p = Poly.from_values([1], ctx)
for r in (0.5, -2, 1j):
    p = poly_mul(p, Poly.from_values([-r, 1], ctx), ctx)
roots = poly_roots(p, ctx)
for r in roots:
    print("root", complex(r), " residual", float(abs(poly_eval(p, r, ctx))))

# Dividing out every root leaves the leading coefficient
q = p
for r in roots:
    q = poly_deflate(q, r, ctx)
print("after deflation:", [complex(c) for c in q.coeffs])

# Arithmetic has to happen inside ctx.local(); outside it gmpy2 rounds to 53 bits
with ctx.local():
    third = mpc(1) / 3
print("1/3 carries", third.real.precision, "bits")

# A Vandermonde determinant equals the product of pairwise differences
xs = [2, 3, 5]
rows = [[mpc(x) ** k for k in range(3)] for x in xs]
print("det:", complex(det(rows, ctx)), " expected:", np.prod([b - a for i, a in enumerate(xs) for b in xs[i + 1:]]))
