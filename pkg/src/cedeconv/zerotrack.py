"""Multi-point sampling near a base point and branch tracking of slice zeros.

A conditional expression needs the *same* zero-value at every sample point,
but a root solver returns roots in arbitrary order. :func:`branches` solves
each slice independently and stitches the roots into branches by
nearest-neighbour matching between consecutive sample points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr
from scipy.optimize import linear_sum_assignment

from .imagez import uslice, vslice
from .numerics import DEFAULT_CONTEXT, PrecisionContext, poly_eval, poly_roots

__all__ = [
    "SamplingPlan",
    "RootBranch",
    "DegreeDropError",
    "sample_points",
    "match_roots",
    "branches",
    "nominal_degree",
]

V_ROOTS = "v_roots"
U_ROOTS = "u_roots"


class DegreeDropError(ArithmeticError):
    """A slice lost its leading coefficient at one of the sample points."""

    def __init__(self, point_index: int, point, degree: int, expected: int):
        super().__init__(
            f"slice degree dropped to {degree} (expected {expected}) at sample point "
            f"{point_index} ({complex(point):.6g})"
        )
        self.point_index = point_index
        self.point = point


@dataclass(frozen=True)
class SamplingPlan:
    """Where the ``count`` sample points sit relative to a base angle.

    ``stepping='rotational'`` (default) places them on the circle of radius
    ``rho`` at angles ``phi - l*dphi`` (``+`` when counterclockwise).
    ``stepping='additive'`` takes the literal ``u_l = u_0 + l*du`` with
    ``du = rho*exp(-i*dphi)``; those steps have magnitude ``rho``.
    """

    rho: float = 1.0
    dphi: float = math.pi / 2150
    count: int = 6
    direction: str = "clockwise"
    stepping: str = "rotational"

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("a sampling plan needs at least two points")
        if self.rho <= 0 or self.dphi <= 0:
            raise ValueError("rho and dphi must be positive")
        if self.dphi * self.count >= 2 * math.pi:
            raise ValueError("dphi * count must stay below 2*pi")
        if self.direction not in ("clockwise", "counterclockwise"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.stepping not in ("rotational", "additive"):
            raise ValueError(f"unknown stepping {self.stepping!r}")


@dataclass
class RootBranch:
    points: list
    values: list
    residuals: list
    branch_index: int
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.values)


def sample_points(phi, plan: SamplingPlan, ctx: PrecisionContext | None = None) -> list:
    """``rho * exp(i*(phi - l*dphi))`` for ``l = 0 .. count-1`` (rotational)."""
    ctx = ctx or DEFAULT_CONTEXT
    sign = -1 if plan.direction == "clockwise" else 1
    with ctx.local():
        phi = mpfr(phi)
        rho = mpfr(plan.rho)
        dphi = mpfr(plan.dphi)
        if plan.stepping == "rotational":
            return [rho * gmpy2.exp(mpc(0, phi + sign * l * dphi)) for l in range(plan.count)]
        base = rho * gmpy2.exp(mpc(0, phi))
        step = rho * gmpy2.exp(mpc(0, sign * dphi))
        return [base + l * step for l in range(plan.count)]


def _distance_matrix(prev, nxt) -> list:
    return [[abs(a - b) for b in nxt] for a in prev]


def match_roots(prev, nxt, ctx: PrecisionContext | None = None, warnings: list | None = None) -> list:
    """Permutation ``perm`` pairing ``prev[i]`` with ``nxt[perm[i]]``.

    Greedy assignment, smallest distance first, followed by pairwise swaps
    until no swap shortens the total matched distance. If some root has two
    candidates within ``10**-(digits/4)`` of each other the greedy result is
    replaced by an optimal assignment and a note is appended to ``warnings``.
    """
    ctx = ctx or DEFAULT_CONTEXT
    n = len(prev)
    if len(nxt) != n:
        raise ValueError("root lists must have equal length")
    if n == 0:
        return []
    with ctx.local():
        dist = _distance_matrix(prev, nxt)
    fdist = np.array([[float(d) for d in row] for row in dist])
    order = sorted(((dist[i][j], i, j) for i in range(n) for j in range(n)), key=lambda t: t[0])
    perm = [-1] * n
    taken = [False] * n
    left = n
    for _, i, j in order:
        if perm[i] < 0 and not taken[j]:
            perm[i] = j
            taken[j] = True
            left -= 1
            if not left:
                break
    improved = True
    while improved:
        improved = False
        for i in range(n):
            for k in range(i + 1, n):
                a, b = perm[i], perm[k]
                if fdist[i, b] + fdist[k, a] < fdist[i, a] + fdist[k, b] - 1e-300:
                    perm[i], perm[k] = b, a
                    improved = True
    if n > 1:
        gap = mpfr(ctx.eps(0.25))
        ambiguous = []
        for i in range(n):
            best = dist[i][perm[i]]
            rival = min(dist[i][j] for j in range(n) if j != perm[i])
            if abs(rival - best) <= gap:
                ambiguous.append(i)
        if ambiguous:
            rows, cols = linear_sum_assignment(fdist)
            perm = [int(c) for _, c in sorted(zip(rows, cols))]
            if warnings is not None:
                warnings.append(f"ambiguous match for roots {ambiguous}; optimal assignment used")
    return perm


def nominal_degree(img: np.ndarray, axis: str) -> int:
    """Highest power with a nonzero coefficient column (v) or row (u)."""
    img = np.asarray(img)
    lines = img.T if axis == V_ROOTS else img
    nz = [k for k in range(lines.shape[0]) if any(bool(val) for val in lines[k])]
    return nz[-1] if nz else -1


def _slice(img, z, axis, ctx):
    return vslice(img, z, ctx) if axis == V_ROOTS else uslice(img, z, ctx)


def branches(
    img: np.ndarray,
    phi,
    plan: SamplingPlan,
    axis: str = V_ROOTS,
    ctx: PrecisionContext | None = None,
) -> list:
    """Zero-value branches of the image's slices over the sample points.

    ``axis='v_roots'`` tracks the zeros ``beta(u)`` of the slice in ``v`` at
    the sampled ``u``; ``axis='u_roots'`` tracks ``gamma(v)``. An image whose
    slices are constant (an ``r x 1`` image for ``v_roots``) has no branches.
    """
    ctx = ctx or DEFAULT_CONTEXT
    if axis not in (V_ROOTS, U_ROOTS):
        raise ValueError(f"unknown axis {axis!r}")
    degree = nominal_degree(img, axis)
    if degree < 1:
        return []
    points = sample_points(phi, plan, ctx)
    solved = []
    for idx, z in enumerate(points):
        poly = _slice(img, z, axis, ctx)
        poly = type(poly)(poly.coeffs[: degree + 1])
        trimmed = poly.trim(ctx.trim_tol)
        if trimmed.degree != degree:
            raise DegreeDropError(idx, z, trimmed.degree, degree)
        roots = poly_roots(trimmed, ctx)
        scale = trimmed.max_abs()
        with ctx.local():
            res = [abs(poly_eval(trimmed, r, ctx)) for r in roots]
        solved.append((roots, res, scale))

    out = [
        RootBranch(points=list(points), values=[r], residuals=[float(s)], branch_index=i)
        for i, (r, s) in enumerate(zip(solved[0][0], solved[0][1]))
    ]
    for roots, res, _ in solved[1:]:
        notes: list = []
        perm = match_roots([b.values[-1] for b in out], roots, ctx, notes)
        for b, j in zip(out, perm):
            b.values.append(roots[j])
            b.residuals.append(float(res[j]))
            b.warnings.extend(notes)
    return out
