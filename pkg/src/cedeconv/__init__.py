"""Blind deconvolution with multi-point conditional expressions.

Blur kernels convolved into a noiseless image leave factors in the image's
z-transform. Their zero-values are found by testing, branch by branch, whether
a small determinant built from the zeros at a handful of nearby points
vanishes; the detected zeros are then deflated and the transform inverted.
"""
from .cedetect import CEConfig, CEReport, CESize, build_D, ce_oracle, ce_value, detect, score
from .imagez import (
    convolve,
    gen_test_scene,
    idft_axis,
    read_image,
    uslice,
    vslice,
    write_image,
)
from .numerics import (
    DEFAULT_CONTEXT,
    Poly,
    PrecisionContext,
    cplx_arith,
    det,
    poly_deflate,
    poly_eval,
    poly_mul,
    poly_roots,
)
from .restore import RestorationResult, collect_zeros, deflate_axis, restore, verify
from .zerotrack import RootBranch, SamplingPlan, branches, match_roots, sample_points

__version__ = "0.1.0"
