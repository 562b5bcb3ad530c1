"""Divergence-based quantum information quantities on bipartite states,
with a randomized audit harness for their invariance properties."""

__version__ = "0.1.0"

from .linalg import (
    DomainError,
    HermitianEigen,
    ValidationError,
    eigh,
    kron,
    matrix_function,
    partial_trace,
)
from .states import (
    BallMembership,
    BipartiteState,
    DensityOperator,
    PositiveOperator,
    SmoothingBall,
    fidelity,
    in_ball,
    marginal,
    max_entangled_state,
    maximally_mixed,
    product_state,
    purify,
    sine_distance,
)
from .channels import (
    Isometry,
    KrausChannel,
    LocalIsometry,
    ReversalChannel,
    apply_isometry,
    apply_local_isometry,
    build_lemma_reversal,
    choi_matrix,
    is_cptp,
    kraus_apply,
    kraus_from_stinespring,
    reversal_apply,
)
from .divergences import (
    DivergenceSpec,
    DivergenceValue,
    divergence_value,
    evaluate,
    neyman_pearson_test,
)
from .quantities import (
    OptimizerConfig,
    QuantityKind,
    QuantityResult,
    boundary_mixing_weight,
    compute_quantity,
    h1,
    h2,
    h3,
    i1,
    i2,
    i3,
    i4,
    minimize_sigma_b,
    pullback_candidates,
    smooth_search,
    transport_candidates,
)
from .audit import (
    ALL_CHECKS,
    AuditConfig,
    AuditReport,
    CheckRecord,
    DEFAULT_DIVERGENCE_SUITE,
    MUTATION_CHECK,
    replay_trial,
    report_from_dict,
    report_to_dict,
    run_audit,
    run_check,
    sample_isometry,
    sample_state,
    sample_stinespring_channel,
    sample_unitary,
)

__all__ = [
    "ALL_CHECKS",
    "AuditConfig",
    "AuditReport",
    "BallMembership",
    "BipartiteState",
    "CheckRecord",
    "DEFAULT_DIVERGENCE_SUITE",
    "DensityOperator",
    "DivergenceSpec",
    "DivergenceValue",
    "DomainError",
    "HermitianEigen",
    "Isometry",
    "KrausChannel",
    "LocalIsometry",
    "MUTATION_CHECK",
    "OptimizerConfig",
    "PositiveOperator",
    "QuantityKind",
    "QuantityResult",
    "ReversalChannel",
    "SmoothingBall",
    "ValidationError",
    "apply_isometry",
    "apply_local_isometry",
    "boundary_mixing_weight",
    "build_lemma_reversal",
    "choi_matrix",
    "compute_quantity",
    "divergence_value",
    "eigh",
    "evaluate",
    "fidelity",
    "h1",
    "h2",
    "h3",
    "i1",
    "i2",
    "i3",
    "i4",
    "in_ball",
    "is_cptp",
    "kraus_apply",
    "kraus_from_stinespring",
    "kron",
    "marginal",
    "matrix_function",
    "max_entangled_state",
    "maximally_mixed",
    "minimize_sigma_b",
    "neyman_pearson_test",
    "partial_trace",
    "product_state",
    "pullback_candidates",
    "purify",
    "replay_trial",
    "report_from_dict",
    "report_to_dict",
    "reversal_apply",
    "run_audit",
    "run_check",
    "sample_isometry",
    "sample_state",
    "sample_stinespring_channel",
    "sample_unitary",
    "sine_distance",
    "smooth_search",
    "transport_candidates",
]
