"""Multi-point conditional expressions and blur-zero detection.

For an ``m x n`` blur ``h`` every zero-value branch ``beta(u)`` of the blur
satisfies ``sum_{x,y} h[x, y] u**x beta(u)**y = 0`` at each sample point, so
the ``mn x mn`` matrix whose row ``l`` holds ``u_l**x * beta_l**y`` is
singular. Its determinant ``E`` is the conditional expression; branches of
the observed image where ``|E|`` vanishes belong to a blur of size at most
``m x n``.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .numerics import DEFAULT_CONTEXT, PrecisionContext, det
from .zerotrack import (
    U_ROOTS,
    V_ROOTS,
    DegreeDropError,
    RootBranch,
    SamplingPlan,
    branches,
)

__all__ = [
    "CESize",
    "CEConfig",
    "CEReport",
    "BranchScore",
    "build_D",
    "ce_value",
    "score",
    "score_branches",
    "detect",
    "ce_oracle",
    "U_FORM",
    "V_FORM",
]

U_FORM = "u_form"
V_FORM = "v_form"
_ROOT_AXIS = {U_FORM: V_ROOTS, V_FORM: U_ROOTS}


@dataclass(frozen=True)
class CESize:
    m: int = 2
    n: int = 3

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.m * self.n < 2:
            raise ValueError(f"invalid CE size {self.m}x{self.n}")

    @property
    def order(self) -> int:
        return self.m * self.n

    @classmethod
    def parse(cls, text: str) -> "CESize":
        try:
            m, n = (int(t) for t in text.lower().split("x"))
        except ValueError:
            raise ValueError(f"size must look like MxN, got {text!r}") from None
        return cls(m, n)

    def __str__(self):
        return f"{self.m}x{self.n}"


@dataclass(frozen=True)
class CEConfig:
    size: CESize = field(default_factory=CESize)
    plan: SamplingPlan | None = None
    scale: float = 1e50
    tau: float = 5.0
    sweep_count: int = 64

    def __post_init__(self):
        if self.plan is None:
            object.__setattr__(self, "plan", SamplingPlan(count=self.size.order))
        if self.plan.count != self.size.order:
            raise ValueError(
                f"sampling plan has {self.plan.count} points but a {self.size} CE needs {self.size.order}"
            )
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.sweep_count < 1:
            raise ValueError("sweep_count must be positive")


def build_D(branch: RootBranch, size: CESize, form: str = U_FORM, ctx: PrecisionContext | None = None) -> list:
    """Rows ``[p**x * z**y]`` with column ``x*n + y`` (u form) or ``y*m + x`` (v form).

    ``p`` is the sample point and ``z`` the branch value there. In the u form
    the points are ``u`` and the values ``beta``; in the v form the points are
    ``v`` and the values ``gamma``, so the roles of the exponents swap.
    """
    ctx = ctx or DEFAULT_CONTEXT
    if len(branch.values) != size.order:
        raise ValueError(f"branch has {len(branch.values)} points, a {size} CE needs {size.order}")
    m, n = size.m, size.n
    rows = []
    with ctx.local():
        for p, z in zip(branch.points, branch.values):
            p, z = mpc(p), mpc(z)
            if form == U_FORM:
                pp = [p ** x for x in range(m)]
                zp = [z ** y for y in range(n)]
                rows.append([pp[x] * zp[y] for x in range(m) for y in range(n)])
            elif form == V_FORM:
                pp = [p ** y for y in range(n)]
                zp = [z ** x for x in range(m)]
                rows.append([pp[y] * zp[x] for y in range(n) for x in range(m)])
            else:
                raise ValueError(f"unknown form {form!r}")
    return rows


def ce_value(branch: RootBranch, size: CESize, form: str = U_FORM, ctx: PrecisionContext | None = None) -> mpc:
    return det(build_D(branch, size, form, ctx), ctx)


def score(abs_e, scale: float = 1e50) -> float:
    """``log10(|E| * scale + 1)``."""
    if abs_e < 0:
        raise ValueError("|E| must be non-negative")
    with gmpy2.context(gmpy2.get_context(), precision=256):
        return float(gmpy2.log10(mpfr(abs_e) * mpfr(scale) + 1))


@dataclass
class BranchScore:
    phi_index: int
    phi: float
    branch: int
    abs_e: mpfr
    score: float
    flagged: bool
    value: mpc = None

    def row(self, axis: str) -> list:
        return [axis, self.phi_index, repr(self.phi), self.branch,
                format(self.abs_e, ".29e"), repr(self.score), int(self.flagged)]


@dataclass
class CEReport:
    axis: str
    size: str
    entries: list = field(default_factory=list)
    flagged_count: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)
    retried: list = field(default_factory=list)
    clusters: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def consensus_count(self) -> int:
        """Most frequent per-angle flagged count (ties go to the smaller count)."""
        if not self.flagged_count:
            return 0
        counts = Counter(self.flagged_count.values())
        top = max(counts.values())
        return min(k for k, v in counts.items() if v == top)

    def agreement(self) -> float:
        """Fraction of evaluated angles whose flagged count equals the consensus."""
        if not self.flagged_count:
            return 0.0
        k = self.consensus_count
        return sum(v == k for v in self.flagged_count.values()) / len(self.flagged_count)

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "size": self.size,
            "consensus_count": self.consensus_count,
            "agreement": self.agreement(),
            "flagged_count": {str(k): v for k, v in sorted(self.flagged_count.items())},
            "skipped": self.skipped,
            "retried": self.retried,
            "clusters": {str(k): v for k, v in sorted(self.clusters.items())},
            "warnings": self.warnings,
            "entries": [
                {
                    "phi_index": e.phi_index,
                    "phi": e.phi,
                    "branch": e.branch,
                    "absE": format(e.abs_e, ".29e"),
                    "score": e.score,
                    "flagged": e.flagged,
                }
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self) -> list:
        return [e.row(self.axis) for e in self.entries]


def score_branches(brs: list, cfg: CEConfig, form: str, ctx: PrecisionContext) -> list:
    """``(|E|, score)`` for each branch."""
    out = []
    for b in brs:
        with ctx.local():
            abs_e = abs(ce_value(b, cfg.size, form, ctx))
        out.append((abs_e, score(abs_e, cfg.scale)))
    return out


def _clusters(values: list, ctx: PrecisionContext) -> int:
    # number of flagged values that coincide with an earlier one
    radius = mpfr(ctx.eps(0.25))
    dup = 0
    with ctx.local():
        for i, a in enumerate(values):
            if any(abs(a - b) <= radius * max(1, abs(a)) for b in values[:i]):
                dup += 1
    return dup


def _branches_with_retry(img, phi, cfg, root_axis, ctx):
    try:
        return branches(img, phi, cfg.plan, root_axis, ctx), None
    except DegreeDropError:
        shifted = phi + cfg.plan.dphi / 2
        return branches(img, shifted, cfg.plan, root_axis, ctx), shifted


def detect(img: np.ndarray, cfg: CEConfig | None = None, axis: str = U_FORM,
           ctx: PrecisionContext | None = None) -> CEReport:
    """Sweep ``phi_j = 2*pi*j/sweep_count`` and flag branches with score below ``tau``.

    A degree drop at some angle is retried once half a step further along;
    if that fails too the angle is listed in ``skipped``.
    """
    cfg = cfg or CEConfig()
    ctx = ctx or DEFAULT_CONTEXT
    root_axis = _ROOT_AXIS[axis]
    report = CEReport(axis=axis, size=str(cfg.size))
    for j in range(cfg.sweep_count):
        phi = 2 * math.pi * j / cfg.sweep_count
        try:
            brs, shifted = _branches_with_retry(img, phi, cfg, root_axis, ctx)
        except DegreeDropError as exc:
            report.skipped.append({"phi_index": j, "reason": str(exc)})
            continue
        if shifted is not None:
            report.retried.append(j)
            phi = shifted
        flagged_values = []
        for b, (abs_e, sc) in zip(brs, score_branches(brs, cfg, axis, ctx)):
            flagged = sc < cfg.tau
            report.entries.append(BranchScore(j, phi, b.branch_index, abs_e, sc, flagged, b.values[0]))
            if flagged:
                flagged_values.append(b.values[0])
            for w in b.warnings:
                report.warnings.append(f"phi_index {j}, branch {b.branch_index}: {w}")
        report.flagged_count[j] = len(flagged_values)
        dup = _clusters(flagged_values, ctx)
        if dup:
            report.clusters[j] = dup
    return report


@dataclass
class OracleReport:
    size: str
    form: str
    abs_e: list
    scores: list

    @property
    def all_flagged(self) -> bool:
        return bool(self.scores) and all(s < 5.0 for s in self.scores)


def ce_oracle(blur: np.ndarray, size: CESize, plan: SamplingPlan | None = None,
              ctx: PrecisionContext | None = None, *, form: str = U_FORM,
              phis=(0.0, 1.0, 2.5), scale: float = 1e50) -> OracleReport:
    """CE magnitudes on a known blur's own zero branches.

    Substitutes the branches of ``blur`` itself (not of an observed image) into
    the ``size`` CE at each angle in ``phis``. Single-column blurs give an
    empty result for the u form, single-row blurs for the v form.
    """
    ctx = ctx or DEFAULT_CONTEXT
    plan = plan or SamplingPlan(count=size.order)
    cfg = CEConfig(size=size, plan=plan, scale=scale)
    abs_es, scores = [], []
    for phi in phis:
        brs, _ = _branches_with_retry(np.asarray(blur, dtype=float), phi, cfg, _ROOT_AXIS[form], ctx)
        for abs_e, sc in score_branches(brs, cfg, form, ctx):
            abs_es.append(abs_e)
            scores.append(sc)
    return OracleReport(size=str(size), form=form, abs_e=abs_es, scores=scores)
