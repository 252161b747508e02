"""Logarithmic taper statistics and grid checks of the rigidity conditions.

The tapers equal 1 on a protected core and decay logarithmically to 0 at
radius T.  The bound checks are falsification tools, not proofs: each sup is
taken over three nested grids and reported "bounded" only when the last
grid/range doubling moves it by less than 5%."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dpplab import _quadrature as quad
from dpplab import kernels as kern
from dpplab.specfun import ParameterError

__all__ = [
    "Taper",
    "BoundCheckReport",
    "taper_eval",
    "taper_values",
    "check_offdiag_bound",
    "check_local_l2_bound",
    "check_integrable_growth",
    "l2_row_defect",
    "default_alpha",
]

STABLE_FACTOR = 1.05  # sup growth beyond 5% at the last refinement => growing


@dataclass(frozen=True)
class Taper:
    """Cutoff statistic: 1 on the protected core, 0 beyond radius T.

    kind "symmetric": core |x| <= R (and up to R+1 after the log clip),
    support |x| < T.  kind "airy-one-sided": 1 for x >= -R, 0 for x <= -T.
    """

    kind: str
    R: float
    T: float

    def __post_init__(self):
        if self.kind not in ("symmetric", "airy-one-sided"):
            raise ParameterError(f"unknown taper kind {self.kind!r}")
        if self.R <= 0:
            raise ParameterError("taper requires R > 0")
        if self.T <= self.R + 1.0:
            raise ParameterError("taper requires T > R + 1 (log(T-R) must be positive)")


def taper_values(taper: Taper, x: np.ndarray) -> np.ndarray:
    """Vectorized taper evaluation."""
    x = np.asarray(x, dtype=float)
    r, t = taper.R, taper.T
    log_tr = math.log(t - r)
    if taper.kind == "symmetric":
        u = np.abs(x) - r
        logp = np.where(u > 1.0, np.log(np.maximum(u, 1.0)), 0.0)
        vals = np.where(np.abs(x) < t, 1.0 - logp / log_tr, 0.0)
        return np.clip(vals, 0.0, 1.0)
    # airy-one-sided: 0 below -T, ramp on (-T, -R), 1 from -R up
    u = np.abs(x) - r
    logp = np.where(u > 1.0, np.log(np.maximum(u, 1.0)), 0.0)
    ramp = 1.0 - logp / log_tr
    vals = np.where(x >= -r, 1.0, np.where(x <= -t, 0.0, ramp))
    return np.clip(vals, 0.0, 1.0)


def taper_eval(taper: Taper, x: float) -> float:
    """Taper value at one point; exact 1 on the core, exact 0 outside."""
    return float(taper_values(taper, np.array([x]))[0])


@dataclass
class BoundCheckReport:
    """Outcome of one grid-sup bound check."""

    condition: str
    alpha: float | None
    epsilon: float | None
    R: float
    estimated_C: float
    grid: str
    worst_pair: tuple[float, float]
    verdict: str  # "bounded" | "growing"
    sup_history: tuple[float, ...] = ()

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "R": self.R,
            "estimated_C": self.estimated_C,
            "grid": self.grid,
            "worst_pair": list(self.worst_pair),
            "verdict": self.verdict,
        }


def default_alpha(spec: kern.KernelSpec) -> float:
    """Family default for the off-diagonal exponent alpha in (0, 1/2)."""
    if spec.family == "gamma" and not spec.is_complex:
        gap = abs(spec.z.real - spec.zp.real)
        return min(0.45, max(0.3, 0.5 * gap + 0.05))
    return 0.3


def _nested_geometric(lo: float, hi_levels: list[float], n0: int) -> list[np.ndarray]:
    """Nested point sets: each level doubles the density and extends the
    range, so sups are monotone under refinement."""
    levels = []
    pts = np.geomspace(lo, hi_levels[0], n0)
    levels.append(pts)
    for k in range(1, len(hi_levels)):
        mids = np.sqrt(pts[:-1] * pts[1:])  # log-midpoints
        ext = np.geomspace(hi_levels[k - 1], hi_levels[k], n0 // 2 + 1)[1:]
        pts = np.unique(np.concatenate([pts, mids, ext]))
        levels.append(pts)
    return levels


def _grid_points(spec: kern.KernelSpec, lo: float, hi: float, approx: np.ndarray) -> np.ndarray:
    """Snap an abstract geometric grid onto the kernel domain (lattice sites
    where applicable), keeping nesting."""
    ps = spec.phase_space
    if not ps.is_lattice():
        out = approx[(approx >= max(lo, ps.lo)) & (approx <= min(hi, ps.hi))]
        return out
    off = ps.lattice_offset()
    snapped = np.floor(approx - off + 0.5) + off
    snapped = snapped[(snapped >= max(lo, ps.lo)) & (snapped <= min(hi, ps.hi))]
    return np.unique(snapped)


def _two_sided(spec: kern.KernelSpec, pts: np.ndarray) -> np.ndarray:
    """Mirror a positive grid to the negative side where the domain allows."""
    lo = spec.phase_space.lo
    neg = -pts[(-pts) >= lo]
    both = np.unique(np.concatenate([pts[pts <= spec.phase_space.hi], neg]))
    if spec.phase_space.is_lattice():
        both = _grid_points(spec, -np.inf, np.inf, both)
    return both


def _verdict(sups: list[float]) -> str:
    if len(sups) < 2 or sups[-2] == 0.0:
        return "bounded"
    return "growing" if sups[-1] > STABLE_FACTOR * sups[-2] else "bounded"


def check_offdiag_bound(
    spec: kern.KernelSpec,
    R: float,
    alpha: float,
    lam: float | None = None,
    n0: int = 48,
) -> BoundCheckReport:
    """Sup of |Pi(x,y)| |x-y| / ((|x|/|y|)^a + (|y|/|x|)^a) over pairs with
    |x|, |y| >= R, on three nested geometric grids up to lam."""
    if not (0.0 < alpha < 0.5):
        raise ParameterError("alpha must lie in (0, 1/2)")
    if R <= 0:
        raise ParameterError("R must be positive")
    lam = lam if lam is not None else 1e4 * R
    level_tops = [lam / 16.0, lam / 4.0, lam]
    sups: list[float] = []
    worst = (math.nan, math.nan)
    for approx in _nested_geometric(R, level_tops, n0):
        pts = _grid_points(spec, R, lam, approx)
        pts = _two_sided(spec, pts)
        pts = pts[np.abs(pts) >= R]
        if len(pts) < 2:
            raise ParameterError("bound-check grid is empty; enlarge the range")
        M = np.abs(kern.kernel_matrix(spec, pts, pts))
        sep = np.abs(pts[:, None] - pts[None, :])
        ratio = (np.abs(pts)[:, None] / np.abs(pts)[None, :]) ** alpha
        denom = ratio + 1.0 / ratio
        score = M * sep / denom
        np.fill_diagonal(score, 0.0)
        idx = np.unravel_index(np.argmax(score), score.shape)
        sups.append(float(score[idx]))
        worst = (float(pts[idx[0]]), float(pts[idx[1]]))
    return BoundCheckReport(
        condition="offdiag-ratio",
        alpha=alpha,
        epsilon=None,
        R=R,
        estimated_C=sups[-1],
        grid=f"nested geometric pairs, |x| in [{R:g}, {lam:g}], 3 levels",
        worst_pair=worst,
        verdict=_verdict(sups),
        sup_history=tuple(sups),
    )


def _inner_axis(spec: kern.KernelSpec, R: float, n_per_panel: int = 16):
    """Quadrature (or lattice) for the |x| <= R strip."""
    ps = spec.phase_space
    lo = max(-R, ps.lo)
    if ps.is_lattice():
        sites = ps.sites(lo, R)
        return sites, np.ones_like(sites)
    return quad.axis_for(spec, lo, R, n_per_panel)


def check_local_l2_bound(
    spec: kern.KernelSpec,
    R: float,
    epsilon: float,
    ymax: float = 1e5,
    n0: int = 40,
) -> BoundCheckReport:
    """Sup over y of (1 + |y|^(1+eps)) * integral_{|x|<=R} Pi(x,y)^2 dmu(x)."""
    if R <= 0 or epsilon <= 0:
        raise ParameterError("R and epsilon must be positive")
    xq, wq = _inner_axis(spec, R)
    abx = kern.ab_arrays(spec, xq)
    level_tops = [ymax / 16.0, ymax / 4.0, ymax]
    sups: list[float] = []
    worst = (math.nan, math.nan)
    y0 = max(R * 1.0001, spec.phase_space.lo + 1e-9, 1e-3)
    for approx in _nested_geometric(y0, level_tops, n0):
        ys = _grid_points(spec, y0, ymax, approx)
        ys = _two_sided(spec, ys)
        M = kern.kernel_matrix(spec, xq, ys, ab_x=abx)
        lhs = wq @ (M * M)
        score = lhs * (1.0 + np.abs(ys) ** (1.0 + epsilon))
        k = int(np.argmax(score))
        sups.append(float(score[k]))
        worst = (float(ys[k]), float(ys[k]))
    return BoundCheckReport(
        condition="local-l2-decay",
        alpha=None,
        epsilon=epsilon,
        R=R,
        estimated_C=sups[-1],
        grid=f"nested geometric y in [{y0:g}, {ymax:g}], 3 levels",
        worst_pair=worst,
        verdict=_verdict(sups),
        sup_history=tuple(sups),
    )


def l2_row_defect(spec: kern.KernelSpec, R: float, ys: np.ndarray) -> float:
    """max over y of integral_{|x|<=R} Pi(x,y)^2 - Pi(y,y); the reproducing
    property of a projection forces this to be <= 0 up to quadrature error."""
    xq, wq = _inner_axis(spec, R)
    M = kern.kernel_matrix(spec, xq, np.asarray(ys, dtype=float))
    lhs = wq @ (M * M)
    diag = kern.kernel_diag(spec, np.asarray(ys, dtype=float))
    return float(np.max(lhs - diag))


def check_integrable_growth(
    spec: kern.KernelSpec,
    R: float,
    C: float | None = None,
    epsilon: float | None = None,
    lam: float = 1e4,
    n0: int = 60,
) -> BoundCheckReport:
    """Envelope check |A|, |B| <= C |x|^(1/2-eps) for |x| > R (plus
    |A|, |B| <= C |x|^(-1/2+eps) for |x| < R on continuous spaces).

    With epsilon given, checks that exponent only; otherwise scans a grid of
    exponents and reports the largest that stabilizes, with its fitted C.
    """
    if R <= 0:
        raise ParameterError("R must be positive")
    eps_list = [epsilon] if epsilon is not None else [round(0.05 * k, 2) for k in range(9, 0, -1)]
    discrete = spec.phase_space.is_lattice()
    level_tops = [lam / 16.0, lam / 4.0, lam]
    outer_levels = [
        _two_sided(spec, _grid_points(spec, R, lam, g))
        for g in _nested_geometric(R, level_tops, n0)
    ]
    outer_levels = [g[np.abs(g) >= R] for g in outer_levels]
    inner = None
    if not discrete:
        lo = max(spec.phase_space.lo + 1e-12, 1e-6 * R)
        inner = _two_sided(spec, np.geomspace(lo, R, n0))
        inner = inner[(np.abs(inner) < R) & (np.abs(inner) > 0)]
    ab_levels = [kern.ab_arrays(spec, g) for g in outer_levels]
    ab_inner = kern.ab_arrays(spec, inner) if inner is not None and len(inner) else None

    best: tuple[float, float, tuple[float, float], tuple[float, ...]] | None = None
    for eps in eps_list:
        sups = []
        worst = (math.nan, math.nan)
        ok = True
        for g, (a, b) in zip(outer_levels, ab_levels):
            env = np.abs(g) ** (0.5 - eps)
            score = np.maximum(np.abs(a), np.abs(b)) / env
            k = int(np.argmax(score))
            sups.append(float(score[k]))
            worst = (float(g[k]), float(g[k]))
        if _verdict(sups) == "growing":
            ok = False
        c_fit = sups[-1]
        if ok and ab_inner is not None:
            env_in = np.abs(inner) ** (-0.5 + eps)
            score_in = np.maximum(np.abs(ab_inner[0]), np.abs(ab_inner[1])) / env_in
            c_fit = max(c_fit, float(np.max(score_in)))
        if ok and C is not None and c_fit > C:
            ok = False
        if ok:
            best = (eps, c_fit, worst, tuple(sups))
            break
    form = "discrete (outer only)" if discrete else "continuous (inner + outer)"
    if best is None:
        sups_last = tuple(sups)
        return BoundCheckReport(
            condition="integrable-growth",
            alpha=None,
            epsilon=eps_list[-1],
            R=R,
            estimated_C=sups_last[-1],
            grid=f"envelope {form}, |x| up to {lam:g}, 3 levels",
            worst_pair=worst,
            verdict="growing",
            sup_history=sups_last,
        )
    eps_star, c_star, worst, sups = best
    return BoundCheckReport(
        condition="integrable-growth",
        alpha=None,
        epsilon=eps_star,
        R=R,
        estimated_C=c_star,
        grid=f"envelope {form}, |x| up to {lam:g}, 3 levels",
        worst_pair=worst,
        verdict="bounded",
        sup_history=sups,
    )
