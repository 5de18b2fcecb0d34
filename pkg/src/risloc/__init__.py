"""Near-field localization with reconfigurable intelligent surfaces.

Simulation of the reflected-path signal model, misspecified and matched
Cramer-Rao bounds, and maximum-likelihood position/calibration estimators.
"""

from .bounds import (
    BoundReport,
    FimReport,
    IllConditionedError,
    MismatchComponents,
    PseudoTrueResult,
    RepetitionReport,
    SolverConfig,
    bound_from_components,
    epsilon_norm,
    fim,
    fim_gram,
    mcrb_matrices,
    mismatch_components,
    optimal_alpha,
    pseudo_true,
    repeated_schedule_report,
)
from .derivatives import (
    MeanDerivatives,
    amplitude_param_derivatives,
    mean_derivatives,
)
from .estimators import (
    AmlEstimator,
    AmlResult,
    AmmlEstimator,
    EstimateResult,
    SearchGrids,
    aml,
    amml,
    qtilde_matrix,
)
from .geometry import (
    RisGeometry,
    SphericalCoords,
    far_field_steering,
    far_field_steering_batch,
    fresnel_bounds,
    near_field_steering,
    near_field_steering_batch,
    normalize_azimuth,
    planar_array,
    position_to_spherical,
    spherical_to_position,
    unit_direction,
    wavevector,
)
from .jacobi import (
    bessel_orders,
    h_vector,
    jacobi_basis,
    jacobi_far_field,
    min_expansion_order,
)
from .ris import (
    RisAmplitudeParams,
    beta,
    element_response,
    gamma_split,
    load_schedule,
    profile_matrix,
    random_phase_schedule,
    save_schedule,
    wrap_phase,
)
from .signal import (
    ParamVector,
    b_vector,
    noiseless_mean,
    observe,
    snr,
    solve_noise_for_snr,
)

__version__ = "0.1.0"
