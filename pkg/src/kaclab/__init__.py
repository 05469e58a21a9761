"""kaclab: chaotic and entropically chaotic families of densities on Kac's sphere."""

from .densities import (
    Density1D, DensityFamily, MixtureParams, make_concentration_family, make_conditioned_tensor,
    make_convex_combination, make_gaussian, make_mixture_family, make_polynomial_family,
    make_stereographic_family, make_uniform_family, parse_family,
)
from .entropy import (
    EntropyReport, cklp_check, entropy_concentration_exact, entropy_convex_bounds, entropy_mc,
    entropy_mixture_reduced, entropy_poly_bound, entropy_poly_fixed_bound, entropy_stereo,
    rel_entropy_1d,
)
from .marginals import (
    MarginalGrid, chaoticity_gap, marginal_conditioned_tensor, marginal_polynomial,
    marginal_prefactor_log,
)
from .montecarlo import EntropyEstimate, RngStream
from .normalization import (
    VARYING, SquaredLawGrid, moment_integral_log, squared_law, znorm_asymptotic, znorm_exact, zpoly,
)
from .specfun import LogScalar, log_beta, log_gamma, sphere_log_area

__version__ = "0.1.0"
