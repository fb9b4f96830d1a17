"""Images, the convolution model, z-transform slices and the inverse DFT.

Images are 2-D ``numpy`` arrays indexed ``img[x, y]``: the row index ``x``
pairs with the transform variable ``u`` and the column index ``y`` with ``v``.
Pixels are float64; intermediate products of the restoration keep full
precision as object arrays of ``mpc`` (a "complex image"). All slicing and
transform functions accept either kind.

The ``1/mn`` prefactor of the z-transform is dropped everywhere; it rescales a
slice without moving its zeros.
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr
from scipy.signal import convolve2d

from .numerics import DEFAULT_CONTEXT, Poly, PrecisionContext

__all__ = [
    "TestScene",
    "ImageFormatError",
    "convolve",
    "vslice",
    "uslice",
    "unit_root",
    "roots_of_unity",
    "idft_axis",
    "dft_eval",
    "gen_test_scene",
    "read_image",
    "write_image",
    "to_mp",
    "real_part",
]


class ImageFormatError(ValueError):
    pass


def convolve(f: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full linear convolution, ``(M+m-1) x (N+n-1)``.

    Direct summation, so integer-valued inputs give exact results while the
    values stay below 2**53.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    h = np.atleast_2d(np.asarray(h, dtype=float))
    return convolve2d(f, h, mode="full")


def to_mp(img: np.ndarray, ctx: PrecisionContext | None = None) -> np.ndarray:
    """Promote a float image to an object array of ``mpc``."""
    ctx = ctx or DEFAULT_CONTEXT
    img = np.asarray(img)
    out = np.empty(img.shape, dtype=object)
    with ctx.local():
        for idx, val in np.ndenumerate(img):
            out[idx] = mpc(val) if not isinstance(val, (complex, np.complexfloating)) else mpc(complex(val))
    return out


def real_part(img: np.ndarray) -> tuple[np.ndarray, float]:
    """Real float image and the largest discarded imaginary magnitude."""
    img = np.asarray(img)
    if img.dtype != object:
        re = np.real(img).astype(float)
        return re, float(np.max(np.abs(np.imag(img)), initial=0.0))
    re = np.empty(img.shape)
    worst = 0.0
    for idx, val in np.ndenumerate(img):
        val = mpc(val)
        re[idx] = float(val.real)
        worst = max(worst, abs(float(val.imag)))
    return re, worst


def _powers(z, count: int) -> list:
    out = [mpc(1)]
    for _ in range(count - 1):
        out.append(out[-1] * z)
    return out


def _slice(img: np.ndarray, z, along_rows: bool, ctx: PrecisionContext) -> Poly:
    img = np.asarray(img)
    rows, cols = img.shape
    with ctx.local():
        z = mpc(z)
        if along_rows:
            # coefficient of v**y is sum_x img[x, y] * u**x
            pw = _powers(z, rows)
            coeffs = []
            for y in range(cols):
                acc = mpc(0)
                for x in range(rows):
                    val = img[x, y]
                    if val:
                        acc += pw[x] * val
                coeffs.append(acc)
        else:
            pw = _powers(z, cols)
            coeffs = []
            for x in range(rows):
                acc = mpc(0)
                for y in range(cols):
                    val = img[x, y]
                    if val:
                        acc += pw[y] * val
                coeffs.append(acc)
    return Poly(tuple(coeffs))


def vslice(img: np.ndarray, u, ctx: PrecisionContext | None = None) -> Poly:
    """The z-transform at fixed ``u`` as a polynomial in ``v``."""
    return _slice(img, u, True, ctx or DEFAULT_CONTEXT)


def uslice(img: np.ndarray, v, ctx: PrecisionContext | None = None) -> Poly:
    """The z-transform at fixed ``v`` as a polynomial in ``u``."""
    return _slice(img, v, False, ctx or DEFAULT_CONTEXT)


def unit_root(j: int, n: int, ctx: PrecisionContext | None = None) -> mpc:
    """``exp(2*pi*i*j/n)`` at working precision."""
    ctx = ctx or DEFAULT_CONTEXT
    with ctx.local():
        return gmpy2.exp(mpc(0, 2 * gmpy2.const_pi() * j / n))


def roots_of_unity(n: int, ctx: PrecisionContext | None = None) -> list:
    return [unit_root(j, n, ctx) for j in range(n)]


def dft_eval(coeffs: Sequence, ctx: PrecisionContext | None = None) -> list:
    """Evaluate a coefficient list at the ``len(coeffs)``-th roots of unity."""
    ctx = ctx or DEFAULT_CONTEXT
    n = len(coeffs)
    p = Poly(tuple(coeffs))
    return [p(w, ctx) for w in roots_of_unity(n, ctx)]


def idft_axis(values: Sequence, axis_len: int, ctx: PrecisionContext | None = None) -> list:
    """Coefficients ``c_k`` of the polynomial taking ``values[j]`` at ``exp(2*pi*i*j/axis_len)``.

    Direct O(n**2) summation at working precision.
    """
    ctx = ctx or DEFAULT_CONTEXT
    if len(values) != axis_len:
        raise ValueError(f"expected {axis_len} samples, got {len(values)}")
    with ctx.local():
        w = roots_of_unity(axis_len, ctx)
        vals = [mpc(v) for v in values]
        out = []
        for k in range(axis_len):
            acc = mpc(0)
            for j, val in enumerate(vals):
                acc += val * w[(-j * k) % axis_len]
            out.append(acc / axis_len)
        return out


# -- synthetic test scene -------------------------------------------------

@dataclass(frozen=True)
class TestScene:
    true: np.ndarray
    blurs: tuple
    observed: np.ndarray
    seed: int
    separable: bool

    __test__ = False  # not a pytest class

    @property
    def blur_mass(self) -> float:
        return float(np.prod([b.sum() for b in self.blurs]))

    @property
    def leading_product(self) -> float:
        """Product of the blurs' ``h[m-1, n-1]`` corner coefficients."""
        return float(np.prod([b[-1, -1] for b in self.blurs]))


BLUR_SHAPES = ((1, 2), (2, 1), (2, 2), (2, 3))
_PGM_LIMIT = 65535


def _edge_ok(coeffs) -> bool:
    # leading-coefficient polynomials must stay away from the unit circle,
    # otherwise a slice loses degree somewhere on the sampling circle
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if len(c) < 2:
        return True
    r = np.roots(c[::-1])
    return bool(np.all(np.abs(np.abs(r) - 1) > 0.1))


def _draw_blur(rng: np.random.Generator, shape, separable: bool) -> np.ndarray:
    m, n = shape
    while True:
        if separable or m == 1 or n == 1:
            a = rng.integers(1, 3, size=m).astype(float)
            b = rng.integers(1, 3, size=n).astype(float)
            h = np.outer(a, b)
        else:
            h = rng.integers(1, 3, size=shape).astype(float)
            if np.linalg.matrix_rank(h) < min(m, n):
                continue
        if _edge_ok(h[:, -1]) and _edge_ok(h[-1, :]):
            return h


def gen_test_scene(seed: int = 0, separable: bool = False, size: tuple = (40, 40)) -> TestScene:
    """Seeded stand-in for the four-blur experiment.

    The true image holds integers in 0..255 and the kernels small positive
    integers, so the observed image is computed exactly in float64. Kernels
    are redrawn until none of their edge polynomials has a zero near the unit
    circle; the 2x2 and 2x3 kernels are full rank unless ``separable``. When
    the kernels are non-separable the observed image also fits a 16-bit PGM.
    """
    rng = np.random.default_rng(seed)
    true = rng.integers(0, 256, size=size).astype(float)
    for _ in range(10_000):
        blurs = tuple(_draw_blur(rng, s, separable) for s in BLUR_SHAPES)
        observed = true
        for h in blurs:
            observed = convolve(observed, h)
        if separable or observed.max() <= _PGM_LIMIT:
            break
    else:  # pragma: no cover - the bound is met within a handful of draws
        raise RuntimeError("could not draw kernels that fit the 16-bit range")
    return TestScene(true=true, blurs=blurs, observed=observed, seed=seed, separable=separable)


# -- file formats ---------------------------------------------------------

def _atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pgm_tokens(data: bytes):
    """Yield header tokens and the byte offset right after the last one."""
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ImageFormatError("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos + 1


def _read_pgm(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(data)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"unsupported PGM magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise ImageFormatError(f"malformed PGM header: {exc}") from None
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise ImageFormatError("malformed PGM header")
    count = width * height
    if magic == b"P5":
        dtype = ">u1" if maxval < 256 else ">u2"
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=offset) if len(data) - offset >= count * np.dtype(dtype).itemsize else None
        if raw is None:
            raise ImageFormatError("truncated PGM raster")
        pixels = raw.astype(float)
    else:
        body = data[offset:].split()
        if len(body) < count:
            raise ImageFormatError("truncated PGM raster")
        pixels = np.array([int(t) for t in body[:count]], dtype=float)
    return pixels.reshape(height, width)


def _write_pgm(img: np.ndarray, path: Path, plain: bool = False) -> None:
    pix = np.clip(np.rint(img), 0, None)
    maxval = 255 if pix.max(initial=0) <= 255 else 65535
    if pix.max(initial=0) > 65535:
        raise ImageFormatError("pixel values exceed the 16-bit PGM range")
    height, width = pix.shape
    header = f"{'P2' if plain else 'P5'}\n{width} {height}\n{maxval}\n".encode()
    if plain:
        body = "\n".join(" ".join(str(int(v)) for v in row) for row in pix).encode() + b"\n"
    else:
        body = pix.astype(">u1" if maxval == 255 else ">u2").tobytes()
    _atomic_write(path, header + body)


def _read_csv(path: Path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(t) for t in line.split(",")])
        except ValueError:
            raise ImageFormatError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise ImageFormatError(f"{path}: empty image")
    if len({len(r) for r in rows}) != 1:
        raise ImageFormatError(f"{path}: rows have different lengths")
    return np.array(rows, dtype=float)


def _write_csv(img: np.ndarray, path: Path) -> None:
    text = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in np.asarray(img))
    _atomic_write(path, text.encode())


def _format_of(path, fmt):
    if fmt is not None:
        return fmt
    suffix = Path(path).suffix.lower()
    if suffix in (".pgm", ".pnm"):
        return "pgm"
    if suffix == ".csv":
        return "csv"
    raise ImageFormatError(f"cannot infer image format from {path}")


def read_image(path, format: str | None = None) -> np.ndarray:
    """Read a PGM (P2/P5, 8 or 16 bit) or CSV image."""
    fmt = _format_of(path, format)
    return _read_pgm(path) if fmt == "pgm" else _read_csv(path)


def write_image(img: np.ndarray, path, format: str | None = None, *, plain: bool = False) -> None:
    """Write an image atomically. PGM rounds and clamps to 8 or 16 bits."""
    fmt = _format_of(path, format)
    img = np.atleast_2d(np.asarray(img, dtype=float))
    if fmt == "pgm":
        _write_pgm(img, path, plain=plain)
    else:
        _write_csv(img, path)
