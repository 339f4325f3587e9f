"""Simulation and rough-path drift estimation for fractional Ornstein-Uhlenbeck processes."""

__version__ = "0.1.0"

from .errors import (DomainError, EstimationError, FlavorError, NumericError,  # noqa: E402
                     RoughFOUError, ShapeError, SizeError, ValidationError)
from .fbm import PathMatrix, SampleGrid, fbm_cov, sample_fbm, sample_fbm_cholesky  # noqa: E402
from .fou import (LimitConstants, ModelSpec, c1_limit, c2_limit, euler_simulate,  # noqa: E402
                  orthogonalize, stationary_cov, stationary_cov_spectral)
from .rough import (CorrectionTable, LiftedPath, check_chen, correction_table,  # noqa: E402
                    ito_correction_phi, p_var_distance, strat_lift, to_ito_lift)
from .estimate import (EstimationResult, chain_rule_check, closed_form_2d,  # noqa: E402
                       estimate_continuous, estimate_discrete)
