"""Decoupling multivariate functions with filtered tensor decompositions."""

from .branch_fit import estimate_constants, fit_branches, post_optimize, relative_error
from .cpd import CpdOptions, cpd_als
from .filters import FilterBank, FilterKind
from .ftd import FtdOptions, FtdResult, ftd_explicit, ftd_implicit, lambda_search
from .jacobian import build_tensor, sample_uniform
from .lm import LMOptions, lm_solve
from .models import DecoupledModel, MlpNetwork, MonomialPolynomial
from .pipeline import NumericalFailure, RunConfig, decouple

__version__ = "0.1.0"
