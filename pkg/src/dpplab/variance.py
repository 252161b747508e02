"""Variance of additive statistics under a projection-kernel point process.

The variance of S_f is (1/2) double-integral of |f(x)-f(y)|^2 |Pi(x,y)|^2.
Direct truncation of the outer variable converges like a slow power law, so
the engine folds all tail mass through the reproducing property of a
projection, integral of Pi(x,y)^2 over the whole domain = Pi(x,x):

    tau_out(x) = Pi(x,x) - integral_W Pi(x,y)^2 dy

is the exact pair mass connecting x to the complement of the computation
window W.  Every quadrature then runs over compact windows only.  The same
identity splits the variance into the three proof regions (both points in
the annulus R<|x|<T; one point beyond T; one point inside R).

Continuous domains use panelized Gauss-Legendre tensor quadrature evaluated
at two resolutions (the difference is the reported quadrature error);
lattice domains are summed exactly.  One-sided statistics (level 1 at +inf)
are supported for the Airy kernel, whose superexponential decay on the
positive axis bounds the extra tail integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from dpplab import _quadrature as quad
from dpplab import kernels as kern
from dpplab.rigidity import Taper, taper_values
from dpplab.specfun import ParameterError

__all__ = [
    "AdditiveStatistic",
    "VarianceResult",
    "DecayScan",
    "BudgetError",
    "variance_additive",
    "variance_regions",
    "decay_scan",
    "matrix_variance",
    "matrix_moments",
]

_AIRY_DECAY_MARGIN = 12.0  # Ai(12)^2 ~ 1e-25: tail beyond is negligible


class BudgetError(RuntimeError):
    """Accuracy target unreachable within the refinement budget; the partial
    result is attached as .partial."""

    def __init__(self, message: str, partial: "VarianceResult"):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class AdditiveStatistic:
    """A bounded statistic f with plateau structure: f == level_lo on the
    domain left of lo, f == level_hi right of hi, and varies on [lo, hi].
    Compactly supported statistics have both levels 0."""

    f: Callable[[np.ndarray], np.ndarray]
    lo: float
    hi: float
    level_lo: float = 0.0
    level_hi: float = 0.0
    description: str = ""
    breakpoints: tuple[float, ...] = ()

    @staticmethod
    def from_taper(taper: Taper) -> "AdditiveStatistic":
        if taper.kind == "symmetric":
            return AdditiveStatistic(
                f=lambda x, t=taper: taper_values(t, x),
                lo=-taper.T,
                hi=taper.T,
                breakpoints=(-taper.R - 1.0, -taper.R, taper.R, taper.R + 1.0),
                description=f"symmetric-taper(R={taper.R:g},T={taper.T:g})",
            )
        return AdditiveStatistic(
            f=lambda x, t=taper: taper_values(t, x),
            lo=-taper.T,
            hi=-taper.R,
            level_lo=0.0,
            level_hi=1.0,
            breakpoints=(-taper.R - 1.0,),
            description=f"airy-taper(R={taper.R:g},T={taper.T:g})",
        )

    def constant(self) -> bool:
        return self.lo >= self.hi and self.level_lo == self.level_hi


@dataclass
class VarianceResult:
    """Var S_f with a numerical-error estimate and the three-region split
    (both-in-annulus, one-beyond-T, one-inside-R); regions are None unless
    computed through variance_regions."""

    value: float
    quadrature_error: float
    region_breakdown: tuple[float, float, float] | None
    truncation_radius: float


@dataclass
class DecayScan:
    kernel: str
    taper_kind: str
    R: float
    Ts: tuple[float, ...]
    results: tuple[VarianceResult, ...]
    c_fit: float
    residuals: tuple[float, ...]
    monotone: bool
    flagged: bool  # non-monotone beyond error bars


def matrix_variance(K: np.ndarray, f_vals: np.ndarray) -> float:
    """Var S_f for an explicit kernel matrix: the half-double-sum plus the
    reproducing defect (zero when K is an exact projection)."""
    K = np.asarray(K, dtype=float)
    f = np.asarray(f_vals, dtype=float)
    K2 = K * K
    df = f[:, None] - f[None, :]
    base = 0.5 * float(np.sum(df * df * K2))
    defect = np.diag(K) - K2.sum(axis=1)
    return base + float(np.sum(f * f * defect))


def matrix_moments(K: np.ndarray, f_vals: np.ndarray) -> tuple[float, float]:
    """(mean, variance) of S_f under the finite DPP with kernel matrix K."""
    K = np.asarray(K, dtype=float)
    f = np.asarray(f_vals, dtype=float)
    mean = float(f @ np.diag(K))
    var = float(np.sum(f * f * np.diag(K)) - f @ (K * K) @ f)
    return mean, var


def _zone(xs: np.ndarray, R: float, T: float) -> np.ndarray:
    # 0: inside the protected core, 1: annulus [R, T], 2: beyond T
    z = np.ones(len(xs), dtype=int)
    z[np.abs(xs) < R] = 0
    z[np.abs(xs) > T] = 2
    return z


@dataclass
class _CoreResult:
    value: float
    r1: float
    r2: float
    r3: float
    neg_err: float
    radius: float


def _discrete_core(
    spec: kern.KernelSpec,
    stat: AdditiveStatistic,
    want_regions: bool,
    R: float | None,
    T: float | None,
) -> _CoreResult:
    if stat.level_lo != stat.level_hi:
        raise ParameterError("one-sided statistics are not supported on lattices")
    level = stat.level_lo
    sites = spec.phase_space.sites(stat.lo, stat.hi)
    if len(sites) == 0:
        return _CoreResult(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    f = np.asarray(stat.f(sites), dtype=float)
    M = kern.kernel_matrix(spec, sites, sites)
    M2 = M * M
    diag = np.diag(M)
    tau = diag - M2.sum(axis=1)
    neg = float(np.sum(np.abs(np.minimum(tau, 0.0))))
    tau = np.maximum(tau, 0.0)
    df = f[:, None] - f[None, :]
    pair_terms = df * df * M2
    g2 = (f - level) ** 2
    fold = g2 * tau
    value = 0.5 * float(pair_terms.sum()) + float(fold.sum())
    r1 = r2 = r3 = 0.0
    if want_regions:
        z = _zone(sites, R, T)
        w1 = (z == 1).astype(float)
        w0 = (z == 0).astype(float)
        r1 = 0.5 * float(w1 @ pair_terms @ w1)
        r3 = float(w0 @ pair_terms @ w1) + float(fold @ w0)
        r2 = float(fold @ w1)
        # pairs with both sites inside the core contribute nothing (f == 1)
    return _CoreResult(value, r1, r2, r3, neg, float(np.max(np.abs(sites), initial=0.0)))


def _continuous_core(
    spec: kern.KernelSpec,
    stat: AdditiveStatistic,
    n_per_panel: int,
    want_regions: bool,
    R: float | None,
    T: float | None,
) -> _CoreResult:
    ps = spec.phase_space
    w_lo = max(stat.lo, ps.lo)
    w_hi = min(stat.hi, ps.hi)
    one_sided = stat.level_lo != stat.level_hi
    if one_sided and spec.family != "airy":
        raise ParameterError(
            "one-sided statistics require superexponential kernel decay (airy)"
        )
    breaks = stat.breakpoints
    if want_regions and R is not None:
        breaks = tuple(sorted(set(breaks) | {-R, R}))
    xsW, wW = quad.axis_for(spec, w_lo, w_hi, n_per_panel, breaks)
    fW = np.asarray(stat.f(xsW), dtype=float)
    if one_sided:
        ymax = max(w_hi, 0.0) + _AIRY_DECAY_MARGIN
        xsH, wH = quad.axis_for(spec, w_hi, ymax, n_per_panel)
    else:
        xsH = np.empty(0)
        wH = np.empty(0)
    F = np.concatenate([xsW, xsH])
    wF = np.concatenate([wW, wH])
    nW = len(xsW)
    abF = kern.ab_arrays(spec, F)
    diagF = kern.kernel_diag(spec, F, ab=abF)

    roww = np.zeros(len(F))
    rowh = np.zeros(len(F))
    total_ww = 0.0
    s11 = 0.0
    s01 = 0.0
    if want_regions and not one_sided:
        z = _zone(xsW, R, T if T is not None else math.inf)
        w_z1 = wW * (z == 1)
        w_z0 = wW * (z == 0)
    block = max(16, int(4.0e6 / max(len(F), 1)))
    for i0 in range(0, len(F), block):
        i1 = min(len(F), i0 + block)
        M = kern.kernel_matrix(
            spec,
            F[i0:i1],
            F,
            ab_x=(abF[0][i0:i1], abF[1][i0:i1]),
            ab_y=abF,
        )
        M *= M
        roww[i0:i1] = M[:, :nW] @ wW
        if len(xsH):
            rowh[i0:i1] = M[:, nW:] @ wH
        if i0 < nW:
            r1i = min(i1, nW)
            sub = M[: r1i - i0, :nW]
            df = fW[i0:r1i, None] - fW[None, :]
            df *= df
            sub *= df
            col_tot = sub @ wW
            total_ww += float(wW[i0:r1i] @ col_tot)
            if want_regions and not one_sided:
                col_z1 = sub @ w_z1
                col_z0 = sub @ w_z0
                s11 += float(w_z1[i0:r1i] @ col_z1)
                s01 += float(w_z0[i0:r1i] @ col_z1) + float(w_z1[i0:r1i] @ col_z0)

    radius = float(np.max(np.abs(F), initial=0.0))
    vww = 0.5 * total_ww
    if not one_sided:
        tau = diagF - roww
        neg = float(np.sum(np.abs(np.minimum(tau, 0.0)) * wF))
        tau = np.maximum(tau, 0.0)
        g2 = (fW - stat.level_lo) ** 2
        fold = wW * g2 * tau[:nW]
        value = vww + float(fold.sum())
        r1 = r2 = r3 = 0.0
        if want_regions:
            r1 = 0.5 * s11
            z1 = z == 1
            z0 = z == 0
            r2 = float(fold[z1].sum())
            r3 = 0.5 * s01 + float(fold[z0].sum())
        return _CoreResult(value, r1, r2, r3, neg, radius)

    # airy one-sided: split the outside mass into the far-left tail and the
    # protected right side
    tau_l = diagF - roww - rowh
    neg = float(np.sum(np.abs(np.minimum(tau_l, 0.0)) * wF))
    tau_l = np.maximum(tau_l, 0.0)
    tau_r = rowh[:nW]
    fold_l = wW * (fW - stat.level_lo) ** 2 * tau_l[:nW]
    fold_r = wW * (fW - stat.level_hi) ** 2 * tau_r
    cross = (stat.level_lo - stat.level_hi) ** 2 * float(wH @ tau_l[nW:])
    value = vww + float(fold_l.sum()) + float(fold_r.sum()) + cross
    r1 = vww
    r2 = float(fold_l.sum())
    r3 = float(fold_r.sum()) + cross
    return _CoreResult(value, r1, r2, r3, neg, radius)


def _evaluate(
    spec: kern.KernelSpec,
    stat: AdditiveStatistic,
    accuracy: float,
    want_regions: bool,
    R: float | None = None,
    T: float | None = None,
) -> VarianceResult:
    if stat.constant():
        return VarianceResult(0.0, 0.0, (0.0, 0.0, 0.0) if want_regions else None, 0.0)
    if spec.phase_space.is_lattice():
        core = _discrete_core(spec, stat, want_regions, R, T)
        err = core.neg_err + 5e-13 * (1.0 + abs(core.value))
        return VarianceResult(
            core.value,
            err,
            (core.r1, core.r2, core.r3) if want_regions else None,
            core.radius,
        )
    levels = (8, 12, 16)
    prev: _CoreResult | None = None
    for i, n in enumerate(levels):
        cur = _continuous_core(spec, stat, n, want_regions, R, T)
        if prev is not None:
            err = abs(cur.value - prev.value) + cur.neg_err
            if err <= accuracy or i == len(levels) - 1:
                result = VarianceResult(
                    cur.value,
                    err,
                    (cur.r1, cur.r2, cur.r3) if want_regions else None,
                    cur.radius,
                )
                if err > accuracy:
                    raise BudgetError(
                        f"variance quadrature stalled at error {err:.3e} "
                        f"(target {accuracy:.3e})",
                        result,
                    )
                return result
        prev = cur
    raise AssertionError("unreachable")


def variance_additive(
    spec: kern.KernelSpec,
    stat: AdditiveStatistic,
    accuracy: float = 1e-6,
) -> VarianceResult:
    """Var S_f for a plateau statistic (see AdditiveStatistic)."""
    return _evaluate(spec, stat, accuracy, want_regions=False)


def variance_regions(
    spec: kern.KernelSpec,
    taper: Taper,
    accuracy: float = 1e-6,
) -> VarianceResult:
    """Var S_phi for a taper, split into the three proof regions.

    Overlaps are resolved by priority: any pair with one point inside the
    protected core counts as region 3, then pairs reaching beyond T count as
    region 2, and region 1 keeps pairs fully inside the annulus."""
    stat = AdditiveStatistic.from_taper(taper)
    return _evaluate(spec, stat, accuracy, want_regions=True, R=taper.R, T=taper.T)


def decay_scan(
    spec: kern.KernelSpec,
    taper_kind: str,
    R: float,
    T_list: list[float],
    accuracy: float = 1e-6,
) -> DecayScan:
    """Variance of the taper statistic along increasing T, with the fitted
    constant of the c / log T decay model."""
    if len(T_list) < 1:
        raise ParameterError("T_list must not be empty")
    if any(t2 <= t1 for t1, t2 in zip(T_list[:-1], T_list[1:])):
        raise ParameterError("T_list must be strictly increasing")
    if T_list[0] <= R + 1.0:
        raise ParameterError("all T must exceed R + 1")
    results = [
        variance_regions(spec, Taper(taper_kind, R, float(t)), accuracy) for t in T_list
    ]
    vals = [r.value for r in results]
    errs = [r.quadrature_error for r in results]
    monotone = all(b < a for a, b in zip(vals[:-1], vals[1:]))
    flagged = any(
        b - a > (ea + eb)
        for (a, b, ea, eb) in zip(vals[:-1], vals[1:], errs[:-1], errs[1:])
    )
    prods = [v * math.log(t) for v, t in zip(vals, T_list)]
    c_fit = float(np.mean(prods))
    residuals = tuple(p - c_fit for p in prods)
    return DecayScan(
        kernel=spec.label,
        taper_kind=taper_kind,
        R=R,
        Ts=tuple(float(t) for t in T_list),
        results=tuple(results),
        c_fit=c_fit,
        residuals=residuals,
        monotone=monotone,
        flagged=flagged,
    )
