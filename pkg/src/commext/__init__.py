"""Cubature rules from commuting extensions of coordinate multiplication matrices."""
from ._accel import backend
from .cubature import (
    CubatureError,
    CubatureRule,
    PreconditionError,
    RadonError,
    SearchFailed,
    VerificationReport,
    cross_factor,
    evaluation_identity_residual,
    gauss_1d,
    node_count_check,
    node_span_check,
    radon_solve,
    rule_from_extension,
    search_rule,
    verify_rule,
)
from .extensions import (
    BoundReport,
    ExtensionCandidate,
    CriterionInapplicable,
    SingularLambdaSystem,
    bound_report,
    circulant_extension,
    conjugate_family,
    extendability_test,
    gradient_flow,
    minimize_s,
    rotation_angle_minimize,
    s_objective,
    solve_lambda,
    spectral_containment,
    structured_residual,
)
from .linalg import (
    ConvergenceError,
    NotCommutingError,
    SymMatrix,
    complete_orthonormal,
    numerical_rank,
    simultaneous_diagonalize,
    singular_values,
    sym_eigen,
)
from .moments import (
    CoordinateMatrices,
    DegenerateMomentsError,
    DomainError,
    GradedBasis,
    StructureError,
    WeightedDomain,
    coordinate_matrices,
    gram_schmidt_basis,
    moment,
)

__version__ = "0.1.0"
