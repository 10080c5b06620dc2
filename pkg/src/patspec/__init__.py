"""Initial-pressure recovery for the variable-speed wave equation from
boundary data, through the duality between Robin and Dirichlet eigenbases."""

from .eigenbasis import (
    EigenBasis,
    boundary_pairing,
    compute_basis,
    cross_gram,
    lemma_residual,
    normal_derivative_trace,
    weighted_inner,
)
from .forward import (
    BoundaryData,
    TimeGrid,
    expand,
    forward_dirichlet,
    forward_robin,
    interior_field,
    synthesize,
)
from .grid import BoundaryDescriptor, DomainGrid, SpeedField, build_interval, build_rectangle, sample_speed
from .inversion import (
    CoefficientReport,
    DampingSchedule,
    analytic_limit_oracle,
    bateman_kernel,
    damped_time_integral,
    dirichlet_to_robin_coeffs,
    extrapolate_to_zero,
    modal_components,
    reconstruct,
    robin_to_dirichlet_coeffs,
)
from .operator import DIRICHLET, BcFlavor, DiscreteOperator, Robin, apply, assemble, solve_elliptic

__version__ = "0.1.0"
