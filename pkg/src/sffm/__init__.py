"""Matrix-analytic solvers and Monte Carlo validation for stochastic
fluid-fluid models: a CTMC phase process driving two reflected fluid levels.
"""

__version__ = "0.1.0"

from .errors import (
    BoundaryConditionError,
    NumericalError,
    SffmError,
    ValidationError,
)
from .model import (
    InitialDistribution,
    PhasePartition,
    SffmModel,
    StabilityReport,
    TandemParams,
    build_tandem_model,
    censor_zero_phases,
    stability,
    validate,
)
from .matops import (
    RiccatiProblem,
    SolveReport,
    SpectralLimit,
    expm,
    linear_solve,
    solve_riccati,
    zero_eigen_projection,
)
from .return_ops import (
    FluidGenerator,
    ReturnOperators,
    assemble,
    compute_psi,
    compute_xi,
    fluid_generator,
)
from .transient import (
    BoundaryOrderCheck,
    BoundaryRhs,
    IntervalSet,
    TransientMeasure,
    WeightTable,
    boundary_rhs,
    boundary_weights,
    check_boundary,
    derivative_measure_parts,
    dn_measure,
    h_weights,
    limit_y_infinity,
    mass_decomposition,
    mu_exp_Dy,
    series_mu_exp_Dy,
)
from .first_return import FirstReturnMeasure, mu_phi, visit_measure
from .simulate import (
    SampleBatch,
    SimConfig,
    dump_samples,
    empirical_measure,
    run_to_omega,
    run_to_theta,
    run_to_theta_from,
    sample_initial,
)
from .model_io import (
    ModelFile,
    ResultTable,
    content_hash,
    parse_model_file,
    serialize_model_file,
)
from .benchmarks import EXAMPLE_IDS, ExampleReport, build_example, run_example
