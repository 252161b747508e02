"""Finite-window realization of a projection kernel: Nystrom discretization,
spectral data, exact sampling, Fredholm determinants, and the exhaustive
subset law for small lattice windows.

The discretized operator is the symmetric matrix sqrt(w_i w_j) Pi(x_i, x_j)
on quadrature nodes (lattice sites carry unit weights).  Restriction of a
projection keeps the spectrum inside [0, 1]; eigenvalues are clipped to that
range and the clip magnitude recorded.  Sampling follows the standard
spectral scheme: pick eigenvectors independently with probability lambda_i,
then draw points one at a time from the projection onto the selected span,
contracting the span by the orthogonal complement of each drawn site.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from dpplab import _quadrature as quad
from dpplab import kernels as kern

__all__ = [
    "DiscretizedOperator",
    "SpectralData",
    "Configuration",
    "DomainError",
    "SizeError",
    "SamplerError",
    "DiscretizationError",
    "discretize",
    "from_matrix",
    "eigendecompose",
    "sample",
    "sample_many",
    "fredholm_det",
    "fredholm_det_multi",
    "brute_force_law",
    "SubsetLaw",
    "save_spectral",
    "load_spectral",
    "configurations_to_csv",
]

EIG_TOL = 1e-8
CLIP_FAIL = 1e-6


class DomainError(ValueError):
    """Window incompatible with the kernel's phase space."""


class SizeError(ValueError):
    """Window too large for exhaustive enumeration."""


class SamplerError(RuntimeError):
    """Conditional densities turned inconsistent beyond tolerance."""


class DiscretizationError(RuntimeError):
    """Spectrum strays too far from [0, 1] for a restricted projection."""


@dataclass
class DiscretizedOperator:
    nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    window: tuple[float, float]
    spec: kern.KernelSpec | None = None

    @property
    def is_lattice(self) -> bool:
        return bool(np.all(self.weights == 1.0))


@dataclass
class SpectralData:
    eigenvalues: np.ndarray  # clipped to [0, 1], ascending
    eigenvectors: np.ndarray  # orthonormal columns
    source: DiscretizedOperator
    clip_amount: float


@dataclass(frozen=True)
class Configuration:
    points: tuple[float, ...]
    window: tuple[float, float]

    def count(self, lo: float = -math.inf, hi: float = math.inf) -> int:
        return sum(1 for p in self.points if lo <= p <= hi)


def discretize(
    spec: kern.KernelSpec, window: tuple[float, float], n: int
) -> DiscretizedOperator:
    """Restrict the kernel to a bounded window.

    Continuous windows get panelized Gauss-Legendre nodes (about n in
    total); lattice windows use the sites themselves with unit weights.
    """
    lo, hi = float(window[0]), float(window[1])
    if not (hi > lo) or not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError(f"window [{lo}, {hi}] must be bounded and nonempty")
    ps = spec.phase_space
    if ps.is_lattice():
        sites = ps.sites(lo, hi)
        if len(sites) == 0:
            raise DomainError(f"window [{lo}, {hi}] contains no domain sites")
        mat = kern.kernel_matrix(spec, sites, sites)
        mat = 0.5 * (mat + mat.T)
        return DiscretizedOperator(sites, np.ones_like(sites), mat, (lo, hi), spec)
    if n < 2:
        raise DomainError("need at least 2 nodes")
    if lo < ps.lo - 1e-12 or hi > ps.hi + 1e-12:
        raise DomainError(f"window [{lo}, {hi}] outside kernel domain")
    edges = quad.panel_edges(spec, max(lo, ps.lo), min(hi, ps.hi))
    m = len(edges) - 1
    per = max(2, n // m)
    extra = max(0, n - per * m)
    nodes = []
    weights = []
    ref = {}
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        k = per + (1 if i < extra else 0)
        if k not in ref:
            ref[k] = quad.leggauss(k)
        rx, rw = ref[k]
        h = 0.5 * (b - a)
        nodes.append(h * rx + 0.5 * (a + b))
        weights.append(h * rw)
    xs = np.concatenate(nodes)
    ws = np.concatenate(weights)
    mat = kern.kernel_matrix(spec, xs, xs)
    sw = np.sqrt(ws)
    mat = mat * np.outer(sw, sw)
    mat = 0.5 * (mat + mat.T)
    return DiscretizedOperator(xs, ws, mat, (lo, hi), spec)


def from_matrix(
    matrix: np.ndarray,
    nodes: np.ndarray | None = None,
    window: tuple[float, float] | None = None,
) -> DiscretizedOperator:
    """Wrap an explicit symmetric matrix as a lattice-window operator."""
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if matrix.shape != (n, n) or np.max(np.abs(matrix - matrix.T)) > 1e-12:
        raise DomainError("matrix must be symmetric square")
    if nodes is None:
        nodes = np.arange(n, dtype=float)
    window = window or (float(nodes[0]), float(nodes[-1]))
    return DiscretizedOperator(np.asarray(nodes, dtype=float), np.ones(n), matrix, window)


def eigendecompose(op: DiscretizedOperator) -> SpectralData:
    lam, vec = np.linalg.eigh(op.matrix)
    clip = float(max(np.max(-lam, initial=0.0), np.max(lam - 1.0, initial=0.0), 0.0))
    if clip > CLIP_FAIL:
        raise DiscretizationError(
            f"eigenvalue clip {clip:.2e} exceeds {CLIP_FAIL}: refine the grid"
        )
    return SpectralData(np.clip(lam, 0.0, 1.0), vec, op, clip)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample(sd: SpectralData, seed) -> Configuration:
    """Draw one configuration of the windowed process."""
    rng = _as_rng(seed)
    lam = sd.eigenvalues
    keep = rng.random(len(lam)) < lam
    V = sd.eigenvectors[:, keep].copy()
    n = V.shape[0]
    chosen: list[int] = []
    for remaining in range(V.shape[1], 0, -1):
        p = np.einsum("ij,ij->i", V, V)
        neg = float(np.min(p, initial=0.0))
        if neg < -1e-9:
            raise SamplerError(f"conditional density fell to {neg}")
        p = np.maximum(p, 0.0)
        tot = p.sum()
        if not (abs(tot - remaining) < 1e-6 * max(1.0, remaining)):
            raise SamplerError(f"density mass {tot} != rank {remaining}")
        i = int(rng.choice(n, p=p / tot))
        chosen.append(i)
        if remaining == 1:
            break
        j = int(np.argmax(np.abs(V[i, :])))
        pivot = V[:, j].copy()
        piv_i = V[i, j]
        V = np.delete(V, j, axis=1)
        V -= np.outer(pivot, V[i, :] / piv_i)
        V, _ = np.linalg.qr(V)
    pts = tuple(sorted(float(sd.source.nodes[i]) for i in chosen))
    return Configuration(pts, sd.source.window)


def sample_many(sd: SpectralData, count: int, master_seed: int) -> list[Configuration]:
    """Independent samples with per-sample seeds derived by counter, so the
    result does not depend on scheduling."""
    return [sample(sd, np.random.default_rng([master_seed, k])) for k in range(count)]


def _region_indices(op: DiscretizedOperator, region: tuple[float, float]) -> np.ndarray:
    lo, hi = region
    return np.nonzero((op.nodes >= lo) & (op.nodes <= hi))[0]


def fredholm_det(
    sd: SpectralData, g: Callable[[np.ndarray], np.ndarray], subregion: tuple[float, float]
) -> float:
    """det(1 + (g-1) Pi chi_B) on the discretized operator; for g == z on B
    this is the generating function E z^{#B}."""
    op = sd.source
    idx = _region_indices(op, subregion)
    if len(idx) == 0:
        return 1.0
    gm1 = np.asarray(g(op.nodes[idx]), dtype=float) - 1.0
    block = op.matrix[np.ix_(idx, idx)]
    lam = np.linalg.eigvals(gm1[:, None] * block)
    val = complex(np.prod(1.0 + lam))
    return float(val.real)


def fredholm_det_multi(
    sd: SpectralData,
    regions: Sequence[tuple[float, float]],
    zs: Sequence[float],
) -> float:
    """det(1 + sum_j (z_j - 1) chi_{B_j} Pi chi_{union B_i}) for pairwise
    disjoint regions: the joint generating function E prod z_j^{#B_j}."""
    op = sd.source
    if len(regions) != len(zs):
        raise ValueError("need one z per region")
    idx_sets = [_region_indices(op, r) for r in regions]
    for a in range(len(idx_sets)):
        for b in range(a + 1, len(idx_sets)):
            if np.intersect1d(idx_sets[a], idx_sets[b]).size:
                raise DomainError("subregions must be pairwise disjoint")
    union = np.unique(np.concatenate([i for i in idx_sets if len(i)])) if any(
        len(i) for i in idx_sets
    ) else np.empty(0, dtype=int)
    if len(union) == 0:
        return 1.0
    coef = np.zeros(len(union))
    pos = {int(i): k for k, i in enumerate(union)}
    for ids, z in zip(idx_sets, zs):
        for i in ids:
            coef[pos[int(i)]] = z - 1.0
    block = op.matrix[np.ix_(union, union)]
    lam = np.linalg.eigvals(coef[:, None] * block)
    val = complex(np.prod(1.0 + lam))
    return float(val.real)


@dataclass
class SubsetLaw:
    """Exact law of a DPP on <= 12 lattice sites: P(X = S) for every S."""

    nodes: np.ndarray
    probs: np.ndarray  # indexed by bitmask over node positions

    def prob(self, subset: Sequence[int]) -> float:
        mask = 0
        for i in subset:
            mask |= 1 << int(i)
        return float(self.probs[mask])

    def marginals(self) -> np.ndarray:
        n = len(self.nodes)
        out = np.zeros(n)
        for mask, p in enumerate(self.probs):
            for i in range(n):
                if mask >> i & 1:
                    out[i] += p
        return out

    def statistic_moments(self, f_vals: np.ndarray) -> tuple[float, float]:
        n = len(self.nodes)
        sums = np.zeros(len(self.probs))
        for i in range(n):
            bit = 1 << i
            sums[np.arange(len(self.probs)) & bit > 0] += f_vals[i]
        mean = float(self.probs @ sums)
        var = float(self.probs @ (sums - mean) ** 2)
        return mean, var

    def count_distribution(self, member: np.ndarray) -> np.ndarray:
        n = len(self.nodes)
        counts = np.zeros(len(self.probs), dtype=int)
        for i in range(n):
            if member[i]:
                bit = 1 << i
                counts[np.arange(len(self.probs)) & bit > 0] += 1
        out = np.zeros(int(member.sum()) + 1)
        for mask, p in enumerate(self.probs):
            out[counts[mask]] += p
        return out

    def generating_function(self, z: float, member: np.ndarray) -> float:
        dist = self.count_distribution(member)
        return float(sum(p * z ** k for k, p in enumerate(dist)))


def brute_force_law(op: DiscretizedOperator, max_sites: int = 12) -> SubsetLaw:
    """Enumerate P(X = S) = (-1)^(n-|S|) det(K - I_{S^c}) over all subsets."""
    if not op.is_lattice:
        raise DomainError("brute-force law requires a lattice window")
    n = len(op.nodes)
    if n > max_sites:
        raise SizeError(f"{n} sites exceed the enumeration limit {max_sites}")
    K = op.matrix
    probs = np.empty(1 << n)
    for mask in range(1 << n):
        M = K.copy()
        comp = [i for i in range(n) if not (mask >> i & 1)]
        for i in comp:
            M[i, i] -= 1.0
        det = np.linalg.det(M)
        probs[mask] = det if (n - bin(mask).count("1")) % 2 == 0 else -det
    total = probs.sum()
    if abs(total - 1.0) > 1e-10:
        raise DiscretizationError(f"subset law sums to {total}, not 1")
    if probs.min() < -1e-12:
        raise DiscretizationError(f"negative subset probability {probs.min()}")
    return SubsetLaw(op.nodes, probs)


# --- serialization ----------------------------------------------------------

_MAGIC = 0x53504543  # "SPEC"


def save_spectral(sd: SpectralData, path: str | Path) -> None:
    """Flat binary cache: header (n, window bounds), then nodes, weights,
    eigenvalues, eigenvectors row-major; all little-endian float64."""
    op = sd.source
    n = len(op.nodes)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<ddd", float(n), op.window[0], op.window[1]))
        for arr in (op.nodes, op.weights, sd.eigenvalues, sd.eigenvectors):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_spectral(path: str | Path) -> SpectralData:
    raw = Path(path).read_bytes()
    n_f, lo, hi = struct.unpack_from("<ddd", raw, 0)
    n = int(n_f)
    off = 24
    def take(count):
        nonlocal off
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).copy()
        off += 8 * count
        return arr
    nodes = take(n)
    weights = take(n)
    lam = take(n)
    vec = take(n * n).reshape(n, n)
    op = DiscretizedOperator(nodes, weights, vec @ np.diag(lam) @ vec.T, (lo, hi))
    return SpectralData(lam, vec, op, 0.0)


def configurations_to_csv(
    path: str | Path,
    seeds: Sequence[int],
    configs: Sequence[Configuration],
    header_lines: Sequence[str] = (),
) -> None:
    """One row per sample: seed, count, semicolon-joined points."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("seed,count,points\n")
        for s, c in zip(seeds, configs):
            pts = ";".join(repr(p) for p in c.points)
            fh.write(f"{s},{len(c.points)},{pts}\n")
