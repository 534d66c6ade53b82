"""Hybrid quantum-classical phase-space toolkit.

Exact polynomial algebra over two-sector canonical variables, the family of
scheme-parameterized composition products and hybrid brackets built on it,
executable consistency verdicts (associativity, Jacobi, Leibniz, subalgebra
certification), and a Heisenberg-picture simulator with Gaussian product
states and quantum backreaction on the classical sector.
"""

__version__ = "0.1.0"

from .expr import (
    Coefficient,
    Expression,
    HBAR,
    Kind,
    NonQuantizedResidual,
    Sector,
    VariableId,
    pC,
    pQ,
    qC,
    qQ,
)
from .products import (
    ProductSpec,
    SigmaSpec,
    composition_product,
    g_product,
    hybrid_bracket,
    hybrid_product,
    poisson,
    quantum_bracket,
    sigma_product,
    star_product,
)
from .consistency import (
    ClosureEscape,
    DegenerateScheme,
    InexactSquareRoot,
    ResidualReport,
    SubalgebraCert,
    WitnessNotFound,
    associator,
    certify_subalgebra,
    check_reduction,
    composition_associator,
    default_grid,
    jacobi_residual,
    kappa_linear,
    leibniz_pointwise_residual,
    leibniz_residual,
    minimal_membership,
    nogo_scan,
    sigma_assoc_residual,
)
from .dynamics import (
    AuditReport,
    DegreeBlowup,
    GaussianState,
    HybridSystem,
    Linearization,
    NonlinearSystem,
    NotConserved,
    StepRejected,
    Trajectory,
    backreaction_report,
    canonical_audit,
    conserved_product_check,
    coupled_oscillator,
    eom,
    expectation,
    linearize,
    propagate,
)
from .grammar import ParseError, format_expression, parse

__all__ = [name for name in dir() if not name.startswith("_")]
