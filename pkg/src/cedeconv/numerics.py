"""Extended-precision complex scalars, polynomials and determinants.

Every quantity that feeds a conditional-expression determinant lives here at
``PrecisionContext.digits`` significant digits. Scalars are plain
``gmpy2.mpc`` values; polynomials are immutable :class:`Poly` objects holding
ascending coefficient tuples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

CBig = mpc

__all__ = [
    "CBig",
    "PrecisionContext",
    "NumericsError",
    "RootFindingError",
    "DeflationError",
    "DEFAULT_CONTEXT",
    "cbig",
    "cplx_arith",
    "Poly",
    "poly_eval",
    "poly_mul",
    "poly_roots",
    "poly_deflate",
    "det",
]


class NumericsError(ArithmeticError):
    """Base class for failures of the extended-precision layer."""


class RootFindingError(NumericsError):
    def __init__(self, message: str, worst_residual: float):
        super().__init__(f"{message} (worst residual {worst_residual:.3e})")
        self.worst_residual = worst_residual


class DeflationError(NumericsError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision and the two tolerances derived from it.

    ``root_tol`` bounds the backward residual of a computed root and
    ``trim_tol`` marks a coefficient as negligible relative to the largest one.
    When left as ``None`` they default to ``10**-(5*digits/6)`` and
    ``10**-(3*digits/4)``, i.e. 1e-100 and 1e-90 at 120 digits.
    """

    digits: int = 120
    root_tol: float | None = None
    trim_tol: float | None = None
    bits: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.digits < 30:
            raise ValueError(f"digits must be >= 30, got {self.digits}")
        if self.root_tol is None:
            object.__setattr__(self, "root_tol", 10.0 ** (-(5 * self.digits) / 6))
        if self.trim_tol is None:
            object.__setattr__(self, "trim_tol", 10.0 ** (-(3 * self.digits) / 4))
        if not 0 < self.root_tol < 10.0 ** (-self.digits / 2):
            raise ValueError("root_tol must lie in (0, 10**-(digits/2))")
        if not self.trim_tol > self.root_tol:
            raise ValueError("trim_tol must exceed root_tol")
        object.__setattr__(self, "bits", math.ceil(self.digits * math.log2(10)) + 8)

    def local(self):
        """Context manager that switches gmpy2 to this working precision."""
        return gmpy2.context(gmpy2.get_context(), precision=self.bits)

    def eps(self, power: float = 1.0) -> float:
        """``10**-(digits*power)``, the scale used by most tolerances."""
        return 10.0 ** (-self.digits * power)


DEFAULT_CONTEXT = PrecisionContext()


def _ctx(ctx: PrecisionContext | None) -> PrecisionContext:
    return DEFAULT_CONTEXT if ctx is None else ctx


def cbig(value, ctx: PrecisionContext | None = None) -> mpc:
    """Convert a Python/numpy number (or pair) to an ``mpc`` at working precision."""
    ctx = _ctx(ctx)
    with ctx.local():
        if isinstance(value, tuple):
            return mpc(mpfr(value[0]), mpfr(value[1]))
        if isinstance(value, (np.floating, np.integer)):
            value = value.item()
        elif isinstance(value, np.complexfloating):
            value = complex(value)
        if isinstance(value, complex):
            return mpc(value.real, value.imag)
        return mpc(value)


def _abs(z) -> mpfr:
    return abs(z)


def cplx_arith(a, b, op: str, ctx: PrecisionContext | None = None) -> mpc:
    """Apply ``op`` in {add, sub, mul, div, pow_int} at working precision.

    For ``pow_int`` the second operand must be a non-negative integer.
    """
    ctx = _ctx(ctx)
    with ctx.local():
        a = mpc(a)
        if op == "pow_int":
            if int(b) != b or b < 0:
                raise ValueError(f"pow_int needs a non-negative integer exponent, got {b!r}")
            result = mpc(1)
            base, e = a, int(b)
            while e:
                if e & 1:
                    result *= base
                base *= base
                e >>= 1
            return result
        b = mpc(b)
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if op == "div":
            if b == 0:
                raise ZeroDivisionError("complex division by a zero-magnitude value")
            return a / b
    raise ValueError(f"unknown operation {op!r}")


@dataclass(frozen=True)
class Poly:
    """Univariate polynomial with ascending ``mpc`` coefficients.

    ``Poly(())`` is the zero polynomial. Trailing (leading-degree) zeros are
    only removed by :meth:`trim`, so a slice keeps its nominal degree until a
    caller decides a coefficient is negligible.
    """

    coeffs: tuple

    @classmethod
    def from_values(cls, values: Iterable, ctx: PrecisionContext | None = None) -> "Poly":
        return cls(tuple(cbig(v, ctx) for v in values))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __getitem__(self, k):
        return self.coeffs[k]

    def __call__(self, z, ctx: PrecisionContext | None = None):
        return poly_eval(self, z, ctx)

    def __mul__(self, other: "Poly") -> "Poly":
        return poly_mul(self, other)

    def max_abs(self) -> mpfr:
        return max((_abs(c) for c in self.coeffs), default=mpfr(0))

    def trim(self, tol: float) -> "Poly":
        """Drop leading coefficients with ``|c| <= tol * max|c|``."""
        scale = self.max_abs()
        if scale == 0:
            return Poly(())
        cut = scale * tol
        n = len(self.coeffs)
        while n and _abs(self.coeffs[n - 1]) <= cut:
            n -= 1
        return Poly(self.coeffs[:n])

    def to_complex(self) -> np.ndarray:
        return np.array([complex(c) for c in self.coeffs], dtype=complex)


def poly_eval(p: Poly, z, ctx: PrecisionContext | None = None) -> mpc:
    """Horner evaluation of ``p`` at ``z``."""
    with _ctx(ctx).local():
        z = mpc(z)
        acc = mpc(0)
        for c in reversed(p.coeffs):
            acc = acc * z + c
        return acc


def _eval_with_derivative(coeffs: Sequence, z) -> tuple:
    p = coeffs[-1]
    dp = mpc(0)
    for c in coeffs[-2::-1]:
        dp = dp * z + p
        p = p * z + c
    return p, dp


def poly_mul(p: Poly, q: Poly, ctx: PrecisionContext | None = None) -> Poly:
    """Coefficient convolution of ``p`` and ``q``."""
    if not p.coeffs or not q.coeffs:
        return Poly(())
    with _ctx(ctx).local():
        out = [mpc(0)] * (len(p.coeffs) + len(q.coeffs) - 1)
        for i, a in enumerate(p.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(q.coeffs):
                out[i + j] += a * b
        return Poly(tuple(out))


def _residual_scale(max_coeff, z, degree: int):
    # Backward-error scale: equals max|coeff| for roots inside the unit disc.
    r = _abs(z)
    return max_coeff * (r ** degree if r > 1 else 1)


def _seed_roots(coeffs: Sequence, rng: np.random.Generator, max_iter: int) -> np.ndarray | None:
    """Double-precision Aberth iteration from a perturbed circle."""
    n = len(coeffs) - 1
    try:
        c = np.array([complex(x) for x in coeffs], dtype=complex)
    except OverflowError:
        return None
    if not np.all(np.isfinite(c)) or c[-1] == 0:
        return None
    radius = 1.0
    if c[0] != 0:
        radius = float(np.abs(c[0] / c[-1]) ** (1.0 / n))
    if not np.isfinite(radius) or radius == 0:
        radius = 1.0
    angles = 2 * np.pi * np.arange(n) / n + 0.4 + rng.uniform(-0.1, 0.1, n)
    z = radius * (1 + rng.uniform(-0.05, 0.05, n)) * np.exp(1j * angles)
    desc = c[::-1]
    ddesc = np.polyder(desc)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            pz = np.polyval(desc, z)
            dpz = np.polyval(ddesc, z)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            s = np.sum(1.0 / diff, axis=1)
            ratio = pz / dpz
            w = ratio / (1 - ratio * s)
            w[~np.isfinite(w)] = 0
            z = z - w
            if np.max(np.abs(w) / np.maximum(1, np.abs(z))) < 1e-14:
                break
    if not np.all(np.isfinite(z)):
        return None
    return z


def poly_roots(
    p: Poly,
    ctx: PrecisionContext | None = None,
    *,
    max_iter: int = 500,
    seed: int = 0,
) -> list:
    """All roots of ``p`` with multiplicity.

    Aberth-Ehrlich simultaneous iteration: a double-precision pass from a
    randomly perturbed circle supplies starting values, the full-precision pass
    drives every root to ``|p(r)| <= root_tol * max|c| * max(1, |r|)**deg``,
    and a guarded Newton step polishes the result.

    Raises :class:`RootFindingError` carrying the worst residual when the
    iteration cap is reached.
    """
    ctx = _ctx(ctx)
    p = p.trim(ctx.trim_tol)
    n = p.degree
    if n < 1:
        raise ValueError("poly_roots needs degree >= 1 after trimming")
    rng = np.random.default_rng(seed)
    with ctx.local():
        coeffs = tuple(mpc(c) for c in p.coeffs)
        lead = coeffs[-1]
        if n == 1:
            return [-coeffs[0] / lead]
        scale = max(_abs(c) for c in coeffs)
        tol = mpfr(ctx.root_tol)
        seeds = _seed_roots(coeffs, rng, max_iter)
        if seeds is None:
            radius = float(_abs(coeffs[0] / lead)) ** (1.0 / n) if coeffs[0] != 0 else 1.0
            angles = 2 * np.pi * np.arange(n) / n + 0.4 + rng.uniform(-0.1, 0.1, n)
            seeds = radius * np.exp(1j * angles)
        z = [mpc(complex(s)) for s in seeds]
        # Exactly coincident seeds would make the Aberth sum singular.
        for i in range(n):
            for j in range(i):
                if z[i] == z[j]:
                    z[i] += mpc(1e-8 * (i + 1), 1e-8)
        done = [False] * n
        worst = mpfr("inf")
        for _ in range(max_iter):
            worst = mpfr(0)
            moved = False
            for k in range(n):
                if done[k]:
                    continue
                zk = z[k]
                pz, dpz = _eval_with_derivative(coeffs, zk)
                res = _abs(pz) / _residual_scale(scale, zk, n)
                if res <= tol:
                    done[k] = True
                    continue
                worst = max(worst, res)
                s = mpc(0)
                for j in range(n):
                    if j != k:
                        d = zk - z[j]
                        if d != 0:
                            s += 1 / d
                if dpz == 0:
                    step = pz / lead
                else:
                    ratio = pz / dpz
                    denom = 1 - ratio * s
                    step = ratio / denom if denom != 0 else ratio
                z[k] = zk - step
                moved = True
            if all(done):
                break
            if not moved:
                break
        else:
            raise RootFindingError(
                f"Aberth iteration did not converge in {max_iter} steps", float(worst)
            )
        if not all(done):
            raise RootFindingError("Aberth iteration stalled", float(worst))
        for k in range(n):
            pz, dpz = _eval_with_derivative(coeffs, z[k])
            if dpz == 0:
                continue
            cand = z[k] - pz / dpz
            pc = poly_eval(p, cand, ctx)
            if _abs(pc) < _abs(pz):
                z[k] = cand
        return z


def poly_deflate(p: Poly, root, ctx: PrecisionContext | None = None) -> Poly:
    """Divide ``p`` by ``(z - root)`` and return the quotient.

    Uses forward synthetic division for ``|root| <= 1`` and the reversed
    (constant-term first) recurrence otherwise, which keeps the error
    growth bounded by 1 per step in both cases.
    """
    ctx = _ctx(ctx)
    if p.degree < 1:
        raise ValueError("cannot deflate a constant polynomial")
    with ctx.local():
        root = mpc(root)
        coeffs = [mpc(c) for c in p.coeffs]
        n = len(coeffs) - 1
        scale = max(_abs(c) for c in coeffs)
        residual = _abs(poly_eval(p, root, ctx))
        if residual > scale * mpfr(ctx.eps(0.25)):
            raise DeflationError(
                f"value {complex(root):.6g} is not a root of the polynomial",
                float(residual / scale) if scale else float(residual),
            )
        q = [mpc(0)] * n
        if _abs(root) <= 1:
            acc = coeffs[n]
            q[n - 1] = acc
            for k in range(n - 1, 0, -1):
                acc = coeffs[k] + root * acc
                q[k - 1] = acc
        else:
            # p(z) = (z - r) q(z): a_0 = -r q_0, a_k = q_{k-1} - r q_k
            q[0] = -coeffs[0] / root
            for k in range(1, n):
                q[k] = (q[k - 1] - coeffs[k]) / root
        return Poly(tuple(q))


def det(rows: Sequence[Sequence], ctx: PrecisionContext | None = None) -> mpc:
    """Determinant by LU factorization with partial pivoting.

    Returns exactly zero when every candidate pivot in a column falls below
    ``trim_tol * max|entry|`` of the input matrix.
    """
    ctx = _ctx(ctx)
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("determinant needs a square matrix")
    if n == 0:
        return mpc(1)
    with ctx.local():
        a = [[mpc(x) for x in r] for r in rows]
        biggest = max(gmpy2.norm(x) for r in a for x in r)
        if biggest == 0:
            return mpc(0)
        # norms are squared magnitudes, so the cutoff is squared too
        cut = biggest * mpfr(ctx.trim_tol) ** 2
        result = mpc(1)
        for k in range(n):
            piv = max(range(k, n), key=lambda i: gmpy2.norm(a[i][k]))
            if gmpy2.norm(a[piv][k]) <= cut:
                return mpc(0)
            if piv != k:
                a[k], a[piv] = a[piv], a[k]
                result = -result
            pivot_row = a[k]
            pk = pivot_row[k]
            result *= pk
            for i in range(k + 1, n):
                row = a[i]
                f = row[k] / pk
                if f == 0:
                    continue
                for j in range(k + 1, n):
                    row[j] -= f * pivot_row[j]
        return result
