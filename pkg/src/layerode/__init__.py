"""Parameter-robust solver for stiff linear first-order ODE systems.

Systems E u'(t) + A(t) u(t) = f(t) on (0, T] with E = diag(eps_1 .. eps_n),
0 < eps_1 < .. < eps_n <= 1, develop one initial layer per scale. Meshes
condense points inside the nested layers (piecewise-uniform Shishkin
construction), the time march is backward Euler, and the analysis module
measures maximum-norm errors and convergence orders, including worst-case
orders over parameter grids.
"""

from .analysis import (
    MODE_EXACT,
    MODE_TWO_MESH,
    ConvergenceReport,
    ConvergenceRow,
    MeshNestingError,
    OracleUnavailableError,
    SweepReport,
    convergence_study,
    default_eps_grid,
    eps_label,
    exact_constant_solution,
    exact_error,
    layer_functions,
    matrix_exponential,
    order_rows,
    two_mesh_difference,
    uniform_sweep,
)
from .mesh import (
    InteractionPoints,
    MeshError,
    ShishkinMesh,
    bisect_mesh,
    build_mesh,
    interaction_points,
    interval_counts,
    piecewise_uniform_mesh,
    transition_points,
)
from .problem import (
    PerturbationVector,
    ProblemFormatError,
    ProblemSpec,
    ProblemValidationError,
    TimePolynomial,
    ValidatedProblem,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    sample_A,
    sample_f,
    validate,
)
from .smallmat import (
    SingularMatrixError,
    inverse,
    is_inverse_nonnegative,
    lu_factor,
    lu_solve,
    lu_solve_factored,
)
from .solver import (
    GRID_KINDS,
    RHS_GIVEN,
    RHS_ZERO,
    DecomposedSolution,
    SolutionGrid,
    SolveFailureError,
    StabilityCertificate,
    apply_operator,
    certify_max_principle,
    certify_stability,
    decompose,
    march,
    solve,
    step_matrix,
)

__version__ = "0.1.0"
