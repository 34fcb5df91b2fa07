"""Numerical homogenization of Pucci-type fully nonlinear elliptic operators
on the 2-D torus: cell-problem solves, invariant-measure homogenization of
the linearized operator, and averaged semi-concavity error bounds."""

from .bounds import (
    HomogenizationRecord,
    Verdict,
    c_bar,
    check_bounds,
    separable_bounds,
    default_slack,
)
from .cell import (
    CellSolution,
    SchemeKind,
    SchemeSpec,
    SolverParams,
    cfl_dt,
    discrete_F,
    hessian_norm_sq,
    solve_cell,
)
from .errors import ConfigurationError, NonConvergenceError, StencilDecompositionError
from .fields import (
    RNG_ALGORITHM,
    CoefficientField,
    PatternKind,
    PatternSpec,
    field_to_csv,
    harmonic_mean,
    sample,
)
from .grid import (
    DEFAULT_DIRECTIONS,
    EigenFrame,
    GridFunction,
    Sym2,
    Sym2Field,
    TorusGrid,
    directional_second_difference,
    eigen_decompose,
    hessian_standard,
)
from .measure import (
    AnsatzCoefficients,
    InvariantMeasure,
    MeasureParams,
    build_generator,
    homog_linearized,
    invariant_measure,
    nonseparable_ansatz,
    separable_analytic,
    separable_split,
)
from .operators import (
    Family,
    OperatorSpec,
    SemiConcavityValue,
    UNBOUNDED,
    c_bound_field,
    c_minus,
    c_plus,
    c_plus_scalar_max,
    evaluate,
    gradient,
    gradient_weights,
    linearized_value,
    smooth_max,
)
from .sweep import (
    ExperimentConfig,
    LevelSetPoint,
    build_operator,
    compute_record,
    emit,
    level_set,
    q_values,
    run_single,
    run_sweep,
    summarize,
)

__version__ = "0.1.0"
