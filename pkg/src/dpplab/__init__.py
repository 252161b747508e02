"""Numerical laboratory for determinantal point processes with projection
kernels (sine, Bessel, Airy, Gamma): kernel evaluation, additive-statistic
variances, logarithmic tapers and rigidity bound checks, exact spectral
sampling, and batch experiment drivers."""

from dpplab.specfun import SpecialValue, airy, bessel_j, log_gamma
from dpplab.kernels import (
    KernelSpec,
    PhaseSpace,
    build_kernel,
    evaluate,
    evaluate_diagonal,
    spec_from_json,
    spec_to_json,
)
from dpplab.rigidity import (
    BoundCheckReport,
    Taper,
    check_integrable_growth,
    check_local_l2_bound,
    check_offdiag_bound,
    taper_eval,
)
from dpplab.variance import (
    AdditiveStatistic,
    DecayScan,
    VarianceResult,
    decay_scan,
    variance_additive,
    variance_regions,
)
from dpplab.spectral import (
    Configuration,
    DiscretizedOperator,
    SpectralData,
    brute_force_law,
    discretize,
    eigendecompose,
    fredholm_det,
    sample,
    sample_many,
)

__version__ = "0.1.0"
