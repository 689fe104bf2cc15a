"""Numerical laboratory for solitary waves of double-power fractional KdV.

The stationary problem D^sigma(phi) + c*phi = a1*phi^p + a2*phi^q is solved
pseudo-spectrally on a periodic box; the surrounding machinery classifies
orbital instability through the sign of the second dilation derivative of
the action, brackets criterion sign changes in the wave speed, verifies
the algebraic decay dictated by the dispersion order, and runs dilated
initial data forward in time to watch the escape from the orbit.
"""

from .errors import (
    BlowUpError,
    ConfigError,
    DivergenceError,
    FitError,
    GridMismatchError,
    ModulationLostError,
    NotStationaryError,
    SolverError,
    UncoveredCaseError,
)
from .spectral import (
    Field,
    Grid,
    default_grid,
    default_half_length,
    derivative,
    fractional_derivative,
    inner,
    integrate,
    sobolev_inner,
    sobolev_norm,
    translate,
)
from .functionals import (
    FunctionalReport,
    ModelParams,
    action,
    action_gradient,
    criterion_coefficients,
    dilate,
    dilation_generator,
    energy,
    functional_report,
    mass,
    nehari,
    pohozaev_residual,
    relative_residual,
    scaling_criterion,
)
from .ground_state import (
    GaussianBump,
    GroundState,
    PriorSolution,
    SechSquared,
    SolverConfig,
    continue_in_speed,
    convergence_study,
    ground_state_sign,
    rescale_in_speed,
    rescale_to_breve,
    solve_double_power,
    solve_single_power,
)
from .classification import (
    CaseLabel,
    CriticalSpeedResult,
    InstabilityVerdict,
    ScanRow,
    VerdictKind,
    classify_case,
    criterion_at,
    find_critical_speed,
    scan,
    theorem_verdict,
)
from .kernels import (
    KernelSample,
    TailFit,
    TransformRoute,
    compute_G,
    compute_K_km,
    convolution_residual,
    fit_tail,
    g1_closed_form,
    g1_origin_check,
    kernel_mass,
    kernel_tail_constant,
    resolvent_origin,
)
from .evolution import (
    Dilation,
    EvolutionConfig,
    ExperimentResult,
    Trajectory,
    build_virial,
    default_virial_radius,
    evolve,
    instability_experiment,
    modulation_shift,
    tube_distance,
    virial_value,
)

__version__ = "0.1.0"
