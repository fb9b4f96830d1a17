import numpy as np
import pytest
from gmpy2 import mpc
from hypothesis import given, settings
from hypothesis import strategies as st

from cedeconv.imagez import (
    ImageFormatError,
    convolve,
    dft_eval,
    gen_test_scene,
    idft_axis,
    read_image,
    real_part,
    roots_of_unity,
    unit_root,
    uslice,
    vslice,
    write_image,
)
from cedeconv.numerics import Poly, poly_mul


def direct_convolution(f, h):
    """g(x, y) = sum_{s,t} f(x-s, y-t) h(s, t), summed term by term."""
    M, N = f.shape
    m, n = h.shape
    g = np.zeros((M + m - 1, N + n - 1))
    for x in range(M + m - 1):
        for y in range(N + n - 1):
            for s in range(m):
                for t in range(n):
                    if 0 <= x - s < M and 0 <= y - t < N:
                        g[x, y] += f[x - s, y - t] * h[s, t]
    return g


# -- convolution ----------------------------------------------------------

def test_convolve_delta_kernel(rng):
    f = rng.integers(0, 256, (5, 7)).astype(float)
    assert np.array_equal(convolve(f, [[1.0]]), f)


def test_convolve_hand_example():
    assert convolve([[1, 2]], [[1, 1]]).tolist() == [[1, 3, 2]]


def test_convolve_matches_direct_sum(rng):
    f = rng.integers(0, 256, (6, 5)).astype(float)
    h = rng.integers(1, 4, (3, 2)).astype(float)
    assert np.array_equal(convolve(f, h), direct_convolution(f, h))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 4), st.integers(1, 4))
def test_convolution_dimensions(M, N, m, n):
    g = convolve(np.ones((M, N)), np.ones((m, n)))
    assert g.shape == (M + m - 1, N + n - 1)


def test_four_blur_sequence_gives_43_by_44(rng):
    g = rng.integers(0, 256, (40, 40)).astype(float)
    for shape in [(1, 2), (2, 1), (2, 2), (2, 3)]:
        g = convolve(g, np.ones(shape))
    assert g.shape == (43, 44)


# -- slices ---------------------------------------------------------------

IMG = np.array([[2.0, 3.0], [5.0, 7.0]])


def as_complex(p):
    return [complex(c) for c in p.coeffs]


def test_vslice_examples(ctx):
    assert as_complex(vslice(IMG, 1, ctx)) == [7, 10]
    assert as_complex(vslice(IMG, 0, ctx)) == [2, 3]


def test_uslice_examples(ctx):
    assert as_complex(uslice(IMG, 1, ctx)) == [5, 12]
    assert as_complex(uslice(IMG, 0, ctx)) == [2, 5]


def test_observed_scene_slice_has_43_roots(ctx):
    scene = gen_test_scene(0)
    p = vslice(scene.observed, unit_root(1, 7, ctx), ctx)
    assert p.trim(ctx.trim_tol).degree == 43


@pytest.mark.parametrize("slicer", [vslice, uslice])
def test_transform_homomorphism(ctx, rng, slicer):
    # integer pixels keep the float64 convolution exact
    for _ in range(10):
        f = rng.integers(0, 256, tuple(rng.integers(1, 7, 2))).astype(float)
        h = rng.integers(1, 10, tuple(rng.integers(1, 4, 2))).astype(float)
        z = unit_root(int(rng.integers(0, 1000)), 1000, ctx)
        lhs = poly_mul(slicer(f, z, ctx), slicer(h, z, ctx), ctx)
        rhs = slicer(convolve(f, h), z, ctx)
        scale = rhs.max_abs()
        assert len(lhs) == len(rhs)
        with ctx.local():
            assert max(abs(a - b) for a, b in zip(lhs, rhs)) <= ctx.eps(1 - 10 / 120) * scale


# -- inverse DFT ----------------------------------------------------------

def test_idft_of_constant_is_dc(ctx):
    out = idft_axis([mpc(3.5)] * 6, 6, ctx)
    assert abs(out[0] - mpc(3.5)) < 1e-110
    assert all(abs(c) < 1e-110 for c in out[1:])


@pytest.mark.parametrize("n", [1, 2, 7, 40, 64])
def test_idft_round_trip(ctx, rng, n):
    coeffs = [mpc(complex(c)) for c in rng.normal(size=n) + 1j * rng.normal(size=n)]
    back = idft_axis(dft_eval(coeffs, ctx), n, ctx)
    with ctx.local():
        assert max(abs(a - b) for a, b in zip(back, coeffs)) <= ctx.eps(0.5)


def test_idft_of_real_image_slices_is_real(ctx, rng):
    img = rng.integers(0, 256, (9, 4)).astype(float)
    L = img.shape[0]
    samples = [vslice(img, w, ctx) for w in roots_of_unity(L, ctx)]
    for y in range(img.shape[1]):
        column = idft_axis([s[y] for s in samples], L, ctx)
        re, imag = real_part(np.array(column, dtype=object))
        assert imag <= 1e-100
        assert np.allclose(re, img[:, y], atol=1e-90, rtol=0)


def test_idft_length_mismatch(ctx):
    with pytest.raises(ValueError):
        idft_axis([1, 2, 3], 4, ctx)


# -- test scene -----------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 1, 7])
def test_scene_shapes_and_mass(seed):
    scene = gen_test_scene(seed)
    assert scene.true.shape == (40, 40)
    assert [b.shape for b in scene.blurs] == [(1, 2), (2, 1), (2, 2), (2, 3)]
    assert scene.observed.shape == (43, 44)
    assert scene.observed.sum() == pytest.approx(scene.true.sum() * scene.blur_mass, rel=1e-12)
    assert scene.true.min() >= 0 and scene.true.max() <= 255
    assert np.array_equal(scene.true, np.round(scene.true))
    assert all(b.min() > 0 for b in scene.blurs)
    assert scene.observed.max() <= 65535


def test_scene_kernels_non_separable_by_default():
    for seed in range(5):
        scene = gen_test_scene(seed)
        h22, h23 = scene.blurs[2], scene.blurs[3]
        assert h22[0, 0] * h22[1, 1] != h22[1, 0] * h22[0, 1]
        assert np.linalg.matrix_rank(h23) == 2


def test_scene_separable_switch():
    scene = gen_test_scene(0, separable=True)
    for b in scene.blurs:
        assert np.linalg.matrix_rank(b) == 1


def test_scene_is_deterministic():
    a, b = gen_test_scene(0), gen_test_scene(0)
    assert a.true.tobytes() == b.true.tobytes()
    assert a.observed.tobytes() == b.observed.tobytes()
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.blurs, b.blurs))
    assert gen_test_scene(1).true.tobytes() != a.true.tobytes()


# -- file formats ---------------------------------------------------------

def test_csv_round_trip(tmp_path, rng):
    img = rng.normal(size=(4, 6)) * 1e3
    write_image(img, tmp_path / "a.csv")
    assert np.array_equal(read_image(tmp_path / "a.csv"), img)


def test_csv_shape(tmp_path):
    (tmp_path / "s.csv").write_text("1,2\n3,4\n5,6\n")
    img = read_image(tmp_path / "s.csv")
    assert img.shape == (3, 2)


def test_csv_not_rectangular(tmp_path):
    (tmp_path / "bad.csv").write_text("1,2\n3\n")
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "bad.csv")


@pytest.mark.parametrize("top", [255, 60000])
def test_p2_and_p5_agree(tmp_path, rng, top):
    img = rng.integers(0, top + 1, (5, 8)).astype(float)
    write_image(img, tmp_path / "a.pgm", plain=True)
    write_image(img, tmp_path / "b.pgm")
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P2")
    assert (tmp_path / "b.pgm").read_bytes().startswith(b"P5")
    assert np.array_equal(read_image(tmp_path / "a.pgm"), img)
    assert np.array_equal(read_image(tmp_path / "b.pgm"), img)


def test_pgm_header_dimensions_and_comments(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P2\n# a comment\n3 2\n# another\n255\n1 2 3\n4 5 6\n")
    img = read_image(tmp_path / "c.pgm")
    assert img.shape == (2, 3)
    assert img[1].tolist() == [4, 5, 6]


def test_pgm_rounds_and_clamps(tmp_path):
    write_image(np.array([[-3.0, 1.4, 1.6, 254.7]]), tmp_path / "r.pgm")
    assert read_image(tmp_path / "r.pgm").tolist() == [[0, 1, 2, 255]]


@pytest.mark.parametrize("data", [b"P6\n1 1\n255\n\x00\x00\x00", b"P5\n2 x\n255\n", b"P5\n2 2\n255\n\x00"])
def test_malformed_pgm(tmp_path, data):
    (tmp_path / "m.pgm").write_bytes(data)
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "m.pgm")


def test_pgm_out_of_range(tmp_path):
    with pytest.raises(ImageFormatError):
        write_image(np.array([[70000.0]]), tmp_path / "big.pgm")
