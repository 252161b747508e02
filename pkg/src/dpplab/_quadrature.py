"""Panelized Gauss-Legendre quadrature on kernel-family-aware grids.

Panel widths are capped by the local oscillation wavelength of the kernel's
A/B functions (Airy: ~2*pi/sqrt(|x|) on the negative axis; Bessel: fixed
radians of the sqrt(x) phase) plus geometric grading near integrable
endpoints, so a fixed nodes-per-panel count gives uniform resolution.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from dpplab.kernels import KernelSpec


@lru_cache(maxsize=None)
def leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _width_cap(spec: KernelSpec, a: float) -> float:
    fam = spec.family
    if fam == "airy":
        if a < -1.0:
            return 2.0 * math.pi / math.sqrt(-a)  # one local wavelength
        return 2.0
    if fam == "bessel":
        r = 2.0  # radians of sqrt(x)-phase per panel
        osc = 2.0 * r * math.sqrt(max(a, 0.0)) + r * r
        grade = max(2.0 * a, 0.02)  # geometric grading toward x=0
        return min(osc, grade) if a < 1.0 else osc
    if fam == "sine":
        return 0.8
    return max(abs(a), 0.5)


def panel_edges(
    spec: KernelSpec,
    lo: float,
    hi: float,
    breakpoints: tuple[float, ...] = (),
) -> np.ndarray:
    """Subdivide [lo, hi] into family-resolving panels, forcing edges at the
    given breakpoints (integrand kinks, region boundaries)."""
    if not (hi > lo):
        raise ValueError(f"empty panel interval [{lo}, {hi}]")
    anchors = sorted({lo, hi, *(b for b in breakpoints if lo < b < hi)})
    edges = [lo]
    for a, b in zip(anchors[:-1], anchors[1:]):
        x = a
        while True:
            cap = _width_cap(spec, x)
            rem = b - x
            if rem <= cap:
                break
            if rem <= 2.0 * cap:
                edges.append(x + 0.5 * rem)
                break
            x += cap
            edges.append(x)
        edges.append(b)
    return np.array(edges)


def gl_axis(edges: np.ndarray, n_per_panel: int) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated Gauss-Legendre nodes and weights over the panels."""
    ref_x, ref_w = leggauss(n_per_panel)
    nodes = []
    weights = []
    for a, b in zip(edges[:-1], edges[1:]):
        h = 0.5 * (b - a)
        nodes.append(h * ref_x + 0.5 * (a + b))
        weights.append(h * ref_w)
    return np.concatenate(nodes), np.concatenate(weights)


def axis_for(
    spec: KernelSpec,
    lo: float,
    hi: float,
    n_per_panel: int,
    breakpoints: tuple[float, ...] = (),
) -> tuple[np.ndarray, np.ndarray]:
    return gl_axis(panel_edges(spec, lo, hi, breakpoints), n_per_panel)
