"""Remove detected blur zeros from an observed image and invert the transform.

Two modes:

``sequential`` (default)
    Deflate the detected ``v``-zeros from every ``vslice`` on the row grid,
    inverse-DFT back to an intermediate image (the true image convolved with a
    purely vertical residual kernel), detect the now constant ``u``-zeros of
    that intermediate and deflate them along the other axis. Exact for any
    kernels.

``literal``
    Divide the observed transform on the restored-size grid by the linear
    factors of both zero sets at once and apply a single 2-D inverse DFT.
    Exact only when the total blur is separable.

Blind deflation recovers the image only up to a scalar. The scalar is fixed by
the total blur mass (``blur_mass``, 1 for normalized kernels): the restored
image is scaled so that ``sum(observed) == sum(restored) * blur_mass``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .cedetect import U_FORM, V_FORM, CEConfig, detect, score_branches
from .imagez import idft_axis, real_part, to_mp, unit_root, uslice, vslice
from .numerics import DEFAULT_CONTEXT, PrecisionContext, poly_deflate, poly_eval
from .zerotrack import U_ROOTS, V_ROOTS, branches

__all__ = [
    "BlurZeroSet",
    "RestorationResult",
    "RestorationError",
    "collect_zeros",
    "deflate_axis",
    "restore",
    "verify",
]

V_ZEROS = "v_zeros"
U_ZEROS = "u_zeros"
_FORM = {V_ZEROS: U_FORM, U_ZEROS: V_FORM}
_ROOTS = {V_ZEROS: V_ROOTS, U_ZEROS: U_ROOTS}


class RestorationError(RuntimeError):
    pass


@dataclass
class BlurZeroSet:
    """Blur zeros at each grid point ``exp(2*pi*i*j/grid_len)``."""

    axis: str
    grid_len: int
    expected_count: int
    zeros: list
    coerced: list = field(default_factory=list)


@dataclass
class RestorationResult:
    restored: np.ndarray
    max_imag_residual: float
    normalization: mpc
    mode: str
    skipped_points: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "rows": int(self.restored.shape[0]),
            "cols": int(self.restored.shape[1]),
            "max_imag_residual": self.max_imag_residual,
            "normalization": {
                "re": format(self.normalization.real, ".29e"),
                "im": format(self.normalization.imag, ".29e"),
            },
            "counts": self.counts,
            "skipped_points": self.skipped_points,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _grid_angle(j: int, n: int, ctx: PrecisionContext):
    with ctx.local():
        return 2 * gmpy2.const_pi() * j / n


def collect_zeros(img: np.ndarray, cfg: CEConfig, axis: str, expected_count: int,
                  ctx: PrecisionContext | None = None, grid_len: int | None = None) -> BlurZeroSet:
    """Blur zeros of every slice on the ``grid_len`` roots of unity.

    The grid defaults to ``rows(img)`` for ``v_zeros`` and ``cols(img)`` for
    ``u_zeros``. Each grid point is the first sample point of its branches; the
    ``expected_count`` branches with the lowest CE scores are kept, and points
    where the flagged count disagrees are listed in ``coerced``.
    """
    ctx = ctx or DEFAULT_CONTEXT
    if expected_count < 1:
        raise RestorationError(f"no blur zeros to collect on {axis}")
    img = np.asarray(img)
    if grid_len is None:
        grid_len = img.shape[0] if axis == V_ZEROS else img.shape[1]
    out = BlurZeroSet(axis=axis, grid_len=grid_len, expected_count=expected_count, zeros=[])
    for j in range(grid_len):
        brs = branches(img, _grid_angle(j, grid_len, ctx), cfg.plan, _ROOTS[axis], ctx)
        if len(brs) < expected_count:
            raise RestorationError(
                f"grid point {j} of {axis} has {len(brs)} branches, fewer than {expected_count}"
            )
        scored = score_branches(brs, cfg, _FORM[axis], ctx)
        ranked = sorted(range(len(brs)), key=lambda i: scored[i][1])
        flagged = sum(s < cfg.tau for _, s in scored)
        if flagged != expected_count:
            out.coerced.append({"axis": axis, "index": j, "flagged": flagged})
        out.zeros.append([brs[i].values[0] for i in ranked[:expected_count]])
    return out


def deflate_axis(img: np.ndarray, zeros: BlurZeroSet, ctx: PrecisionContext | None = None) -> np.ndarray:
    """Deflate the zero set from the image's slices and transform back.

    For ``v_zeros`` the result has ``cols - K`` columns, for ``u_zeros``
    ``rows - K`` rows. Returned as a full-precision object array.
    """
    ctx = ctx or DEFAULT_CONTEXT
    img = np.asarray(img)
    rows, cols = img.shape
    along_v = zeros.axis == V_ZEROS
    length = rows if along_v else cols
    if zeros.grid_len != length:
        raise ValueError(f"zero set grid has {zeros.grid_len} points, image axis has {length}")
    k = zeros.expected_count if zeros.zeros else 0
    if k == 0:
        return to_mp(img, ctx)
    table = []
    for j, zs in enumerate(zeros.zeros):
        w = unit_root(j, length, ctx)
        poly = vslice(img, w, ctx) if along_v else uslice(img, w, ctx)
        for z in zs:
            try:
                poly = poly_deflate(poly, z, ctx)
            except ArithmeticError as exc:
                raise RestorationError(f"deflation failed at grid point {j} of {zeros.axis}: {exc}") from exc
        table.append(poly.coeffs)
    width = len(table[0])
    out = np.empty((rows, width) if along_v else (width, cols), dtype=object)
    for c in range(width):
        line = idft_axis([t[c] for t in table], length, ctx)
        for i, val in enumerate(line):
            if along_v:
                out[i, c] = val
            else:
                out[c, i] = val
    return out


def _normalize(raw: np.ndarray, observed: np.ndarray, blur_mass: float, ctx: PrecisionContext):
    with ctx.local():
        total = mpc(0)
        for val in raw.flat:
            total += val
        observed_total = mpfr(0)
        for val in np.asarray(observed).flat:
            observed_total += mpc(val).real
        if observed_total == 0:
            raise RestorationError("observed image has zero mass; the scale cannot be fixed")
        norm = total * mpfr(blur_mass) / observed_total
        if abs(norm) <= mpfr(ctx.trim_tol):
            raise RestorationError("degenerate deflation: normalization scalar vanished")
        scaled = np.empty(raw.shape, dtype=object)
        for idx, val in np.ndenumerate(raw):
            scaled[idx] = val / norm
    return scaled, norm


def _count(img, cfg, form, ctx, given):
    if given is not None:
        return given
    return detect(img, cfg, form, ctx).consensus_count


def _sequential(img, cfg, ctx, counts, blur_mass):
    k_v = _count(img, cfg, U_FORM, ctx, counts.get("v_zeros"))
    skipped = []
    if k_v:
        zs = collect_zeros(img, cfg, V_ZEROS, k_v, ctx)
        skipped += zs.coerced
        mid = deflate_axis(img, zs, ctx)
    else:
        mid = to_mp(img, ctx)
    k_u = _count(mid, cfg, V_FORM, ctx, counts.get("u_zeros"))
    if k_u:
        zs = collect_zeros(mid, cfg, U_ZEROS, k_u, ctx)
        skipped += zs.coerced
        final = deflate_axis(mid, zs, ctx)
    else:
        final = mid
    if k_v + k_u == 0:
        raise RestorationError("no blur zeros detected on either axis")
    return final, {"v_zeros": k_v, "u_zeros": k_u}, skipped


def _literal(img, cfg, ctx, counts, blur_mass):
    k_v = _count(img, cfg, U_FORM, ctx, counts.get("v_zeros"))
    k_u = _count(img, cfg, V_FORM, ctx, counts.get("u_zeros"))
    if k_v + k_u == 0:
        raise RestorationError("no blur zeros detected on either axis")
    rows, cols = np.asarray(img).shape
    out_rows, out_cols = rows - k_u, cols - k_v
    beta = collect_zeros(img, cfg, V_ZEROS, k_v, ctx, grid_len=out_rows) if k_v else None
    gamma = collect_zeros(img, cfg, U_ZEROS, k_u, ctx, grid_len=out_cols) if k_u else None
    skipped = (beta.coerced if beta else []) + (gamma.coerced if gamma else [])
    us = [unit_root(j, out_rows, ctx) for j in range(out_rows)]
    vs = [unit_root(k, out_cols, ctx) for k in range(out_cols)]
    spectrum = []
    with ctx.local():
        for j, u in enumerate(us):
            s = vslice(img, u, ctx)
            line = []
            for k, v in enumerate(vs):
                denom = mpc(1)
                if beta:
                    for b in beta.zeros[j]:
                        denom *= v - b
                if gamma:
                    for g in gamma.zeros[k]:
                        denom *= u - g
                if denom == 0:
                    raise RestorationError(f"grid point ({j}, {k}) coincides with a blur zero")
                line.append(poly_eval(s, v, ctx) / denom)
            spectrum.append(idft_axis(line, out_cols, ctx))
    out = np.empty((out_rows, out_cols), dtype=object)
    for c in range(out_cols):
        col = idft_axis([spectrum[j][c] for j in range(out_rows)], out_rows, ctx)
        for r, val in enumerate(col):
            out[r, c] = val
    return out, {"v_zeros": k_v, "u_zeros": k_u}, skipped


def restore(img: np.ndarray, cfg: CEConfig | None = None, mode: str = "sequential",
            ctx: PrecisionContext | None = None, *, blur_mass: float = 1.0,
            counts: dict | None = None) -> RestorationResult:
    """Blind restoration of ``img``.

    ``counts`` may carry already-known blur-zero counts (``v_zeros``,
    ``u_zeros``); missing entries are found with :func:`detect`. In sequential
    mode ``u_zeros`` refers to the intermediate image.
    """
    cfg = cfg or CEConfig()
    ctx = ctx or DEFAULT_CONTEXT
    counts = dict(counts or {})
    if mode == "sequential":
        raw, counts, skipped = _sequential(img, cfg, ctx, counts, blur_mass)
    elif mode == "literal":
        raw, counts, skipped = _literal(img, cfg, ctx, counts, blur_mass)
    else:
        raise ValueError(f"unknown restoration mode {mode!r}")
    scaled, norm = _normalize(raw, img, blur_mass, ctx)
    restored, imag = real_part(scaled)
    return RestorationResult(
        restored=restored,
        max_imag_residual=imag,
        normalization=norm,
        mode=mode,
        skipped_points=skipped,
        counts=counts,
    )


def verify(restored: np.ndarray, reference: np.ndarray) -> dict:
    """Max abs difference, RMS difference and normalized cross-correlation."""
    a = np.asarray(restored, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.sum(da * da)) * float(np.sum(db * db)))
    if denom == 0:
        ncc = 1.0 if np.array_equal(a, b) else 0.0
    else:
        ncc = float(np.sum(da * db)) / denom
    return {
        "max_abs_diff": float(np.max(np.abs(diff))),
        "rmse": float(math.sqrt(np.mean(diff * diff))),
        "ncc": ncc,
    }
