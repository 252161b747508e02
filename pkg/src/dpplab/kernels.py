"""Projection-kernel construction and evaluation.

All shipped kernels are integrable: Pi(x,y) = prefactor * (A(x)B(y) -
B(x)A(y)) / (x-y), with diagonal prefactor * (A'(x)B(x) - A(x)B'(x)).
Close to the diagonal the difference quotient loses ~8 digits to
cancellation, so evaluation switches to the midpoint form built from A', B'.

Families:
  sine     A = sin(pi x),          B = cos(pi x),    prefactor 1/pi
  bessel   A = sqrt(x) J_{s+1}(sqrt x), B = J_s(sqrt x), prefactor 1/2
  airy     A = Ai',                B = Ai,           prefactor -1
  gamma    A = exp(+g/2), B = exp(-g/2),
           g(x) = logGamma(x+z+1/2) - logGamma(x+z'+1/2),
           prefactor sin(pi z) sin(pi z') / (pi sin(pi (z-z')))
  custom   caller-supplied handles

The gamma kernel lives on the half-integer lattice.  Principal series
(z' = conj z, z non-real) runs through complex arithmetic and yields real
values; complementary series (z, z' real in a common unit integer interval)
stays real after the window is clipped to keep every Gamma argument positive.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from dpplab.specfun import ParameterError, airy, bessel_j, log_gamma

__all__ = [
    "CONTINUOUS",
    "INTEGER_LATTICE",
    "HALF_INTEGER_LATTICE",
    "PhaseSpace",
    "KernelSpec",
    "KernelValue",
    "ConsistencyError",
    "build_kernel",
    "evaluate",
    "evaluate_diagonal",
    "ab_arrays",
    "kernel_matrix",
    "kernel_diag",
    "lattice_sites",
    "spec_to_json",
    "spec_from_json",
]

CONTINUOUS = "continuous-interval"
INTEGER_LATTICE = "integer-lattice"
HALF_INTEGER_LATTICE = "half-integer-lattice"

# Limit rule for kernels without analytic derivatives (gamma): symmetric
# difference quotient at +-h, h/2, h/4 with two Richardson sweeps.  h chosen
# so truncation (h^6) and roundoff (eps/h) are both ~1e-12.
_LIMIT_H = 2e-3


class ConsistencyError(RuntimeError):
    """Numerical output violates a structural property of the kernel."""


@dataclass(frozen=True)
class PhaseSpace:
    """Domain of a kernel: a continuous interval or a lattice window."""

    kind: str
    lo: float = -math.inf
    hi: float = math.inf

    def is_lattice(self) -> bool:
        return self.kind != CONTINUOUS

    def lattice_offset(self) -> float:
        return 0.5 if self.kind == HALF_INTEGER_LATTICE else 0.0

    def sites(self, lo: float, hi: float) -> np.ndarray:
        """Lattice points of the domain inside [lo, hi]."""
        if not self.is_lattice():
            raise ValueError("sites() requires a lattice phase space")
        lo = max(lo, self.lo)
        hi = min(hi, self.hi)
        off = self.lattice_offset()
        kmin = math.ceil(lo - off)
        kmax = math.floor(hi - off)
        if kmax < kmin:
            return np.empty(0)
        return np.arange(kmin, kmax + 1, dtype=float) + off

    def contains(self, x: float) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if self.is_lattice():
            return abs(x - self.lattice_offset() - round(x - self.lattice_offset())) < 1e-9
        return True


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of an integrable projection kernel."""

    family: str
    phase_space: PhaseSpace
    prefactor: complex
    a: Callable[[float], complex]
    b: Callable[[float], complex]
    a_prime: Callable[[float], complex] | None = None
    b_prime: Callable[[float], complex] | None = None
    s: float | None = None
    z: complex | None = None
    zp: complex | None = None
    is_complex: bool = False
    label: str = ""

    @property
    def has_derivatives(self) -> bool:
        return self.a_prime is not None and self.b_prime is not None


@dataclass(frozen=True)
class KernelValue:
    value: float
    regime: str  # "generic" | "near-diagonal" | "diagonal"


def _sine_spec() -> KernelSpec:
    pi = math.pi
    return KernelSpec(
        family="sine",
        phase_space=PhaseSpace(CONTINUOUS),
        prefactor=1.0 / pi,
        a=lambda x: math.sin(pi * x),
        b=lambda x: math.cos(pi * x),
        a_prime=lambda x: pi * math.cos(pi * x),
        b_prime=lambda x: -pi * math.sin(pi * x),
        label="sine",
    )


def _bessel_spec(s: float) -> KernelSpec:
    if s <= -1.0:
        raise ParameterError(f"bessel kernel needs s > -1, got {s}")

    def a(x: float) -> float:
        u = math.sqrt(x)
        return u * bessel_j(s + 1.0, u).value

    def b(x: float) -> float:
        return bessel_j(s, math.sqrt(x)).value

    def a_prime(x: float) -> float:
        u = math.sqrt(x)
        return 0.5 * bessel_j(s, u).value - 0.5 * s * bessel_j(s + 1.0, u).value / u

    def b_prime(x: float) -> float:
        u = math.sqrt(x)
        return (s * bessel_j(s, u).value / u - bessel_j(s + 1.0, u).value) / (2.0 * u)

    return KernelSpec(
        family="bessel",
        phase_space=PhaseSpace(CONTINUOUS, lo=0.0),
        prefactor=0.5,
        a=a,
        b=b,
        a_prime=a_prime,
        b_prime=b_prime,
        s=s,
        label=f"bessel(s={s:g})",
    )


def _airy_spec() -> KernelSpec:
    return KernelSpec(
        family="airy",
        phase_space=PhaseSpace(CONTINUOUS),
        prefactor=-1.0,
        a=lambda x: airy(x)[1].value,
        b=lambda x: airy(x)[0].value,
        a_prime=lambda x: x * airy(x)[0].value,  # Ai'' = x Ai
        b_prime=lambda x: airy(x)[1].value,
        label="airy",
    )


def _gamma_series(z: complex, zp: complex) -> str:
    if isinstance(z, complex) and z.imag != 0.0:
        if not (isinstance(zp, complex) and zp == z.conjugate()):
            raise ParameterError("principal series requires z' = conj(z)")
        return "principal"
    z = complex(z).real
    zp_r = complex(zp).real if isinstance(zp, complex) else float(zp)
    if complex(zp).imag if isinstance(zp, complex) else 0.0:
        raise ParameterError("complementary series requires real parameters")
    if z == zp_r:
        raise ParameterError("complementary series requires z != z'")
    m = math.floor(z)
    if z == m or zp_r == math.floor(zp_r) or math.floor(zp_r) != m:
        raise ParameterError(
            "complementary series requires z, z' inside one integer interval"
        )
    return "complementary"


def _gamma_spec(z: complex, zp: complex) -> KernelSpec:
    series = _gamma_series(z, zp)
    z = complex(z)
    zp = complex(zp)
    pref = (
        cmath.sin(math.pi * z)
        * cmath.sin(math.pi * zp)
        / (math.pi * cmath.sin(math.pi * (z - zp)))
    )
    lo = -math.inf
    if series == "complementary":
        pref = pref.real
        # keep both Gamma arguments positive: x + min(z, z') + 1/2 > 0
        lo = -(min(z.real, zp.real) + 0.5)

    za = z + 0.5
    zb = zp + 0.5

    if series == "principal":

        def g(x: float) -> complex:
            return log_gamma(x + za).value - log_gamma(x + zb).value

        a = lambda x: cmath.exp(0.5 * g(x))
        b = lambda x: cmath.exp(-0.5 * g(x))
    else:

        def g(x: float) -> float:
            return log_gamma(x + za.real).value - log_gamma(x + zb.real).value

        a = lambda x: math.exp(0.5 * g(x))
        b = lambda x: math.exp(-0.5 * g(x))

    return KernelSpec(
        family="gamma",
        phase_space=PhaseSpace(HALF_INTEGER_LATTICE, lo=lo),
        prefactor=pref,
        a=a,
        b=b,
        z=z,
        zp=zp,
        is_complex=(series == "principal"),
        label=f"gamma(z={z:g},zp={zp:g})" if series == "principal" else f"gamma(z={z.real:g},zp={zp.real:g})",
    )


def build_kernel(
    family: str,
    *,
    s: float | None = None,
    z: complex | None = None,
    zp: complex | None = None,
    a: Callable | None = None,
    b: Callable | None = None,
    a_prime: Callable | None = None,
    b_prime: Callable | None = None,
    phase_space: PhaseSpace | None = None,
    prefactor: float = 1.0,
    window: tuple[float, float] | None = None,
) -> KernelSpec:
    """Construct a KernelSpec for one of the shipped families.

    ``window`` narrows the phase-space bounds (and is further clipped for the
    complementary gamma series).
    """
    if family == "sine":
        spec = _sine_spec()
    elif family == "bessel":
        if s is None:
            raise ParameterError("bessel kernel requires order s")
        spec = _bessel_spec(float(s))
    elif family == "airy":
        spec = _airy_spec()
    elif family == "gamma":
        if z is None or zp is None:
            raise ParameterError("gamma kernel requires z and z'")
        spec = _gamma_spec(complex(z), complex(zp))
    elif family == "custom":
        if a is None or b is None:
            raise ParameterError("custom kernel requires A and B handles")
        spec = KernelSpec(
            family="custom",
            phase_space=phase_space or PhaseSpace(CONTINUOUS),
            prefactor=prefactor,
            a=a,
            b=b,
            a_prime=a_prime,
            b_prime=b_prime,
            label="custom",
        )
    else:
        raise ParameterError(f"unknown kernel family {family!r}")

    if window is not None:
        lo = max(spec.phase_space.lo, float(window[0]))
        hi = min(spec.phase_space.hi, float(window[1]))
        if lo >= hi:
            raise ParameterError("window does not intersect the kernel domain")
        spec = _replace_phase(spec, PhaseSpace(spec.phase_space.kind, lo, hi))
    return spec


def _replace_phase(spec: KernelSpec, ps: PhaseSpace) -> KernelSpec:
    from dataclasses import replace

    return replace(spec, phase_space=ps)


def lattice_sites(spec: KernelSpec, lo: float, hi: float) -> np.ndarray:
    """Domain lattice points of ``spec`` inside [lo, hi] (after clipping)."""
    return spec.phase_space.sites(lo, hi)


def near_diagonal_delta(spec: KernelSpec, mid: float) -> float:
    """Switch threshold between generic and midpoint evaluation."""
    if spec.family == "airy":
        # oscillation wavelength shrinks like |x|^(-1/2) on the negative axis
        return 1e-4 * (1.0 + abs(mid)) ** -0.75
    if spec.family == "sine":
        return 5e-5
    return 1e-4 * (1.0 + abs(mid))


def ab_arrays(spec: KernelSpec, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """A and B sampled on an axis; complex for the gamma principal series."""
    dtype = complex if spec.is_complex else float
    a = np.array([spec.a(float(x)) for x in xs], dtype=dtype)
    b = np.array([spec.b(float(x)) for x in xs], dtype=dtype)
    return a, b


def _ab_prime_from_ab(
    spec: KernelSpec, xs: np.ndarray, a: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray] | None:
    # A', B' recovered from A, B via the family's derivative relations;
    # avoids re-evaluating special functions on long axes.
    if spec.family == "airy":
        return xs * b, a.copy()
    if spec.family == "bessel":
        ap = 0.5 * b - 0.5 * spec.s * a / xs
        bp = (spec.s * b - a) / (2.0 * xs)
        return ap, bp
    if spec.family == "sine":
        return math.pi * b, -math.pi * a
    if spec.has_derivatives:
        ap = np.array([spec.a_prime(float(x)) for x in xs])
        bp = np.array([spec.b_prime(float(x)) for x in xs])
        return ap, bp
    return None


def _midpoint_value(spec: KernelSpec, m: float) -> float:
    if spec.has_derivatives:
        v = spec.prefactor * (
            spec.a_prime(m) * spec.b(m) - spec.a(m) * spec.b_prime(m)
        )
        return v.real if isinstance(v, complex) else v
    return _limit_diagonal(spec, m)


def _coarse_band(spec: KernelSpec, xs: np.ndarray, ys: np.ndarray) -> float:
    # cheap upper bound for the switch threshold over the whole grid
    if spec.family == "airy":
        return 1e-4
    if spec.family == "sine":
        return 5e-5
    m = max(np.max(np.abs(xs), initial=0.0), np.max(np.abs(ys), initial=0.0))
    return 1e-4 * (1.0 + m)


def kernel_matrix(
    spec: KernelSpec,
    xs: np.ndarray,
    ys: np.ndarray,
    ab_x: tuple[np.ndarray, np.ndarray] | None = None,
    ab_y: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Vectorized Pi(x_i, y_j).

    Entries inside the evaluation-switch band use the midpoint form; exact
    coincidences use the diagonal.  Precomputed A/B axis samples may be
    passed to avoid repeated special-function work in block-streamed loops.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ax, bx = ab_x if ab_x is not None else ab_arrays(spec, xs)
    ay, by = ab_y if ab_y is not None else ab_arrays(spec, ys)
    num = np.multiply.outer(ax, by)
    num -= np.multiply.outer(bx, ay)
    diff = xs[:, None] - ys[None, :]
    cand = np.abs(diff) < _coarse_band(spec, xs, ys)
    with np.errstate(divide="ignore", invalid="ignore"):
        num /= diff
    if cand.any():
        ii, jj = np.nonzero(cand)
        mids = 0.5 * (xs[ii] + ys[jj])
        hit = np.abs(xs[ii] - ys[jj]) < np.array(
            [near_diagonal_delta(spec, float(m)) for m in mids]
        )
        ii, jj, mids = ii[hit], jj[hit], mids[hit]
        if len(ii):
            repl = np.array([_midpoint_value(spec, float(m)) for m in mids])
            num[ii, jj] = repl / spec.prefactor
    num *= spec.prefactor
    if num.dtype == complex:
        num = np.ascontiguousarray(num.real)
    return num


def kernel_diag(
    spec: KernelSpec,
    xs: np.ndarray,
    ab: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Vectorized diagonal values Pi(x, x)."""
    xs = np.asarray(xs, dtype=float)
    if ab is None:
        ab = ab_arrays(spec, xs)
    a, b = ab
    primes = _ab_prime_from_ab(spec, xs, a, b)
    if primes is None:
        return np.array([_limit_diagonal(spec, float(x)) for x in xs])
    ap, bp = primes
    vals = spec.prefactor * (ap * b - a * bp)
    if vals.dtype == complex:
        vals = vals.real
    return np.asarray(vals, dtype=float)


def _quotient(spec: KernelSpec, x: float, y: float) -> complex:
    return spec.prefactor * (spec.a(x) * spec.b(y) - spec.b(x) * spec.a(y)) / (x - y)


def _limit_diagonal(spec: KernelSpec, x: float) -> float:
    # Richardson-extrapolated symmetric quotient; error term is even in h.
    h = _LIMIT_H * max(1.0, abs(x)) if spec.family != "gamma" else _LIMIT_H
    d = [_quotient(spec, x - hh, x + hh) for hh in (h, 0.5 * h, 0.25 * h)]
    r1 = [(4.0 * d[i + 1] - d[i]) / 3.0 for i in range(2)]
    r2 = (16.0 * r1[1] - r1[0]) / 15.0
    if isinstance(r2, complex):
        return r2.real
    return r2


def evaluate(spec: KernelSpec, x: float, y: float) -> KernelValue:
    """Evaluate Pi(x, y) with automatic regime selection."""
    x = float(x)
    y = float(y)
    if x == y:
        return KernelValue(_diagonal_value(spec, x), "diagonal")
    mid = 0.5 * (x + y)
    if abs(x - y) < near_diagonal_delta(spec, mid):
        if spec.has_derivatives:
            val = spec.prefactor * (
                spec.a_prime(mid) * spec.b(mid) - spec.a(mid) * spec.b_prime(mid)
            )
        else:
            val = _limit_diagonal(spec, mid)
        regime = "near-diagonal"
    else:
        val = _quotient(spec, x, y)
        regime = "generic"
    if isinstance(val, complex):
        if abs(val.imag) > 1e-6 * (1.0 + abs(val.real)):
            raise ConsistencyError(f"kernel value not real at ({x}, {y}): {val}")
        val = val.real
    if not math.isfinite(val):
        raise ConsistencyError(f"kernel value not finite at ({x}, {y})")
    return KernelValue(val, regime)


def _diagonal_value(spec: KernelSpec, x: float) -> float:
    if spec.has_derivatives:
        val = spec.prefactor * (
            spec.a_prime(x) * spec.b(x) - spec.a(x) * spec.b_prime(x)
        )
        if isinstance(val, complex):
            val = val.real
    else:
        val = _limit_diagonal(spec, x)
    return val


def evaluate_diagonal(spec: KernelSpec, x: float) -> KernelValue:
    """One-point intensity Pi(x, x); must be (numerically) nonnegative."""
    val = _diagonal_value(spec, float(x))
    if val < -1e-10:
        raise ConsistencyError(f"negative diagonal {val} at x={x}")
    return KernelValue(val, "diagonal")


def spec_to_json(spec: KernelSpec) -> dict:
    """JSON form: {family, s?, z_re?, z_im?, zp_re?, zp_im?, window?}."""
    obj: dict = {"family": spec.family}
    if spec.s is not None:
        obj["s"] = spec.s
    if spec.z is not None:
        obj["z_re"] = spec.z.real
        obj["z_im"] = spec.z.imag
        obj["zp_re"] = spec.zp.real
        obj["zp_im"] = spec.zp.imag
    ps = spec.phase_space
    if math.isfinite(ps.lo) or math.isfinite(ps.hi):
        obj["window"] = [ps.lo, ps.hi]
    return obj


def spec_from_json(obj: dict) -> KernelSpec:
    """Inverse of spec_to_json.  family "custom" denotes the shipped
    counterexample A(x) = x, B(x) = 1 (a constant, non-decaying kernel)."""
    family = obj["family"]
    window = tuple(obj["window"]) if "window" in obj else None
    if family == "custom":
        return build_kernel(
            "custom",
            a=lambda x: x,
            b=lambda x: 1.0,
            a_prime=lambda x: 1.0,
            b_prime=lambda x: 0.0,
            phase_space=PhaseSpace(CONTINUOUS, lo=0.0),
            window=window,
        )
    kwargs: dict = {}
    if "s" in obj:
        kwargs["s"] = obj["s"]
    if "z_re" in obj:
        kwargs["z"] = complex(obj["z_re"], obj.get("z_im", 0.0))
        kwargs["zp"] = complex(obj["zp_re"], obj.get("zp_im", 0.0))
    return build_kernel(family, window=window, **kwargs)
