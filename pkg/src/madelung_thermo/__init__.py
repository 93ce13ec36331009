"""Self-trapped spinning-stationary Madelung states and their thermodynamic analogy."""
from .exceptions import (
    DegenerateDerivative,
    InconsistentAsymptote,
    InsufficientData,
    MadelungError,
    MaxStepsExceeded,
    NumericalError,
    OutOfSupport,
    QuadratureFailure,
    ToleranceFailure,
    UnknownFigureTag,
    ValidationError,
)
from .limits import (
    GroundState,
    bessel_first_zero,
    bessel_j0,
    empirical_rate,
    ground_state,
    large_T_diagnostics,
    small_T_deviation,
)
from .observables import (
    ThermoState,
    angular_velocity,
    compute_state,
    density,
    free_energy,
    internal_energy,
    kinetic_energy,
    partition_function,
    shannon_entropy,
    solve_state,
    total_energy,
    y_average,
)
from .solver import (
    Params,
    RadialSolution,
    SolverOptions,
    detect_blowup,
    evaluate,
    integrate_radial,
    madelung_closure,
    ode_residual,
    series_origin,
)
from .sweep import (
    FitResult,
    StateRow,
    StateTable,
    boundary_tensions,
    first_law_residual,
    fit_power_law,
    fit_scaling_T,
    fit_scaling_X,
    free_energy_differential_check,
    neighborhood,
    sweep,
)

__version__ = "0.1.0"
