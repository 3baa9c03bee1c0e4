"""Pricing a perpetual American put that is cancelled at the asset's last
visit to a barrier above the strike, under a jump-diffusion with downward
exponential jumps.  Closed forms throughout, with a Monte Carlo oracle."""

from .errors import (
    BranchError,
    CancelPutError,
    ConfigError,
    DegenerateCancellation,
    DegenerateRoots,
    DomainError,
    InvalidParams,
    NumericsWarning,
    PoleError,
    QuadratureFailure,
    ThresholdOutOfRange,
)
from .model import ModelParams, laplace_exponent, make_model
from .scale import (
    ScaleBasis,
    basis_for,
    build_scale_basis,
    build_scale_basis_bs,
    w_r,
    w_r_prime,
    z_r,
)
from .pricer import (
    BsReference,
    Contract,
    PriceReport,
    Region,
    bs_reference,
    creeping_factor,
    g_integral,
    g_payoff,
    generator_apply,
    h_function,
    optimal_threshold,
    price,
    undershoot_factor,
    value_at_threshold,
)
from .mc import (
    McConfig,
    McEstimate,
    McMode,
    PathTrace,
    collect_traces,
    estimate_discounted_terminal,
    estimate_passage_factors,
    estimate_value,
    grid_search_threshold,
    simulate_to_threshold,
)
from .diagnostics import CheckResult, analytic_suite, mc_suite

__version__ = "0.1.0"

__all__ = [
    "BranchError",
    "BsReference",
    "CancelPutError",
    "CheckResult",
    "ConfigError",
    "Contract",
    "DegenerateCancellation",
    "DegenerateRoots",
    "DomainError",
    "InvalidParams",
    "McConfig",
    "McEstimate",
    "McMode",
    "ModelParams",
    "NumericsWarning",
    "PathTrace",
    "PoleError",
    "PriceReport",
    "QuadratureFailure",
    "Region",
    "ScaleBasis",
    "ThresholdOutOfRange",
    "analytic_suite",
    "basis_for",
    "bs_reference",
    "build_scale_basis",
    "build_scale_basis_bs",
    "collect_traces",
    "creeping_factor",
    "estimate_discounted_terminal",
    "estimate_passage_factors",
    "estimate_value",
    "g_integral",
    "g_payoff",
    "generator_apply",
    "grid_search_threshold",
    "h_function",
    "laplace_exponent",
    "make_model",
    "mc_suite",
    "optimal_threshold",
    "price",
    "simulate_to_threshold",
    "undershoot_factor",
    "value_at_threshold",
    "w_r",
    "w_r_prime",
    "z_r",
]
