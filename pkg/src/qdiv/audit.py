"""Seeded randomized verification harness.

Each named check runs ``samples`` independent trials; trial i of check c
draws every random object from ``derive_seed(master_seed, c, i)``, so checks
never perturb each other and any recorded worst case replays exactly from
its trial seed.

Violation conventions per check (`worst_violation` vs `threshold`):

- ``dpi`` / ``eq1_invariance``: per-divergence tolerances differ (the
  hypothesis-testing kind is looser), so the recorded number is the worst
  EXCESS over the per-kind tolerance and the threshold is 0.
- invariance and identity checks: the raw worst gap, against the stated
  tolerance.
- ``lemma1_inclusions``: worst negated ball-membership margin.
- ``mutation_dpi``: a NEGATIVE control.  The squared Hilbert-Schmidt
  distance is not a divergence; the check hunts for a data-processing
  violation and passes (at suite level) exactly when it finds one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .channels import (
    Isometry,
    KrausChannel,
    LocalIsometry,
    ReversalChannel,
    build_lemma_reversal,
    kraus_apply_matrix,
    kraus_from_stinespring,
    reversal_apply,
    reversal_apply_matrix,
)
from .divergences import DivergenceSpec, divergence_value
from .linalg import ValidationError, dagger, frobenius, kron, partial_trace
from .quantities import (
    OptimizerConfig,
    QuantityResult,
    boundary_mixing_weight,
    h1,
    h2,
    h3,
    i1,
    i2,
    i3,
    i4,
    minimize_sigma_b,
    pullback_candidates,
    transport_candidates,
)
from .seeding import derive_seed
from .states import (
    BipartiteState,
    DensityOperator,
    PositiveOperator,
    SmoothingBall,
    in_ball,
    marginal,
)

ALL_CHECKS = (
    "dpi",
    "eq1_invariance",
    "lemma1_inclusions",
    "lemma2",
    "lemma2prime",
    "lemma4",
    "prop1_i1",
    "prop1_i2",
    "prop1_i3",
    "prop2_i4",
    "prop2_h1",
    "prop2_h2",
    "prop2_h3",
    "ball_roundtrip",
)

MUTATION_CHECK = "mutation_dpi"

CHECK_NAMES = ALL_CHECKS + (MUTATION_CHECK,)

# One spec per divergence kind/parameter exercised by the broad checks.
DEFAULT_DIVERGENCE_SUITE = (
    DivergenceSpec("umegaki"),
    DivergenceSpec("petz_renyi", alpha=0.5),
    DivergenceSpec("petz_renyi", alpha=1.5),
    DivergenceSpec("petz_renyi", alpha=2.0),
    DivergenceSpec("sandwiched_renyi", alpha=0.5),
    DivergenceSpec("sandwiched_renyi", alpha=2.0),
    DivergenceSpec("geometric_renyi", alpha=1.5),
    DivergenceSpec("max_relative"),
    DivergenceSpec("hypothesis_testing", epsilon=0.1),
)

# Optimizer-backed checks only run the kinds with reliable inner solves.
OPTIMIZER_KINDS = (
    DivergenceSpec("umegaki"),
    DivergenceSpec("sandwiched_renyi", alpha=2.0),
)

DEFAULT_SAMPLES = {
    "dpi": 200,
    "eq1_invariance": 100,
    "lemma1_inclusions": 100,
    "lemma2": 50,
    "lemma2prime": 50,
    "lemma4": 50,
    "prop1_i1": 100,
    "prop1_i2": 20,
    "prop1_i3": 20,
    "prop2_i4": 20,
    "prop2_h1": 100,
    "prop2_h2": 20,
    "prop2_h3": 20,
    "ball_roundtrip": 100,
    "mutation_dpi": 500,
}

DEFAULT_THRESHOLDS = {
    "dpi": 0.0,
    "eq1_invariance": 0.0,
    "lemma1_inclusions": 1e-10,
    "lemma2": 1e-10,
    "lemma2prime": 1e-10,
    "lemma4": 1e-10,
    "prop1_i1": 1e-8,
    "prop1_i2": 1e-5,
    "prop1_i3": 1e-5,
    "prop2_i4": 1e-5,
    "prop2_h1": 1e-8,
    "prop2_h2": 1e-5,
    "prop2_h3": 1e-5,
    "ball_roundtrip": 1e-12,
    "mutation_dpi": 1e-9,
}

# Per-kind tolerances inside the multi-kind checks.
DPI_TOL, DPI_TOL_HT = 1e-9, 1e-6
EQ1_TOL, EQ1_TOL_HT = 1e-8, 1e-6

BALL_EPSILONS = (0.05, 0.2)

# Allowed fraction of skipped (non-converged) trials in optimizer checks.
MAX_NONCONVERGED_RATE = 0.1


@dataclass(frozen=True)
class AuditConfig:
    """Scope, sample counts and tolerances for the harness.

    Bipartite trials draw (d_a, d_b) from ``dim_pairs`` when given, else
    from the cartesian product dims_a × dims_b.  ``samples=None`` means the
    per-check defaults in DEFAULT_SAMPLES.
    """

    dims_a: tuple[int, ...] = (2, 3)
    dims_b: tuple[int, ...] = (2, 3)
    iso_extra_dims: int = 2
    samples: int | None = None
    master_seed: int = 0
    tolerances: dict = field(default_factory=dict)
    dim_pairs: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.samples is not None and self.samples < 1:
            raise ValidationError("samples must be >= 1")
        if not self.dims_a or not self.dims_b:
            raise ValidationError("dims_a and dims_b must be non-empty")
        for d_a, d_b in self.pair_pool():
            if d_a < 1 or d_b < 1 or d_a * d_b > 36:
                raise ValidationError(
                    f"dims {d_a}x{d_b} exceed the desk-scale bound d_a*d_b <= 36"
                )

    def pair_pool(self) -> tuple[tuple[int, int], ...]:
        if self.dim_pairs is not None:
            return self.dim_pairs
        return tuple((a, b) for a in self.dims_a for b in self.dims_b)

    def single_dims(self) -> tuple[int, ...]:
        pairs = self.pair_pool()
        pool = {a for a, _ in pairs} | {b for _, b in pairs}
        pool.add(min(a for a, _ in pairs) * min(b for _, b in pairs))
        return tuple(sorted(d for d in pool if d <= 36))

    def n_samples(self, name: str) -> int:
        return self.samples if self.samples is not None else DEFAULT_SAMPLES[name]

    def threshold(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_THRESHOLDS[name]))


@dataclass(frozen=True)
class CheckRecord:
    """Outcome of one named check."""

    name: str
    samples_run: int
    worst_violation: float
    threshold: float
    property_holds: bool
    expect_violation: bool
    passed: bool
    worst_seed: int
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AuditReport:
    """All check records plus the suite-level verdict."""

    master_seed: int
    records: tuple[CheckRecord, ...]

    @property
    def overall_pass(self) -> bool:
        return all(r.passed for r in self.records)

    def record(self, name: str) -> CheckRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)


class TrialOutcome(NamedTuple):
    """violation=None means the trial was skipped (e.g. solver not converged)."""

    violation: float | None
    diagnostics: dict


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def _gaussian_matrix(rng, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def _state_matrix(d: int, rank: int, rng) -> np.ndarray:
    g = _gaussian_matrix(rng, d, rank)
    m = g @ dagger(g)
    return m / np.trace(m).real


def sample_state(dim, rank: int | None = None, seed: int = 0):
    """Hilbert–Schmidt-measure random state GG†/Tr[GG†]; deterministic per seed.

    ``dim`` may be an int (returns a DensityOperator) or a ``(d_a, d_b)``
    pair (returns a BipartiteState).
    """
    rng = np.random.default_rng(seed)
    if isinstance(dim, tuple):
        d_a, d_b = dim
        d = d_a * d_b
        r = d if rank is None else rank
        if r > d:
            raise ValidationError(f"rank {r} exceeds dimension {d}")
        return BipartiteState(d_a, d_b, DensityOperator(_state_matrix(d, r, rng)))
    r = dim if rank is None else rank
    if r > dim:
        raise ValidationError(f"rank {r} exceeds dimension {dim}")
    return DensityOperator(_state_matrix(dim, r, rng))


def sample_unitary(d: int, seed: int = 0) -> Isometry:
    """Haar unitary via QR of a complex Gaussian with phase correction."""
    rng = np.random.default_rng(seed)
    return Isometry(_haar_unitary_matrix(d, rng))


def _haar_unitary_matrix(d: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(_gaussian_matrix(rng, d, d))
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def sample_isometry(d_in: int, d_out: int, seed: int = 0) -> Isometry:
    """First d_in columns of a Haar unitary on the output space."""
    if d_out < d_in:
        raise ValidationError(f"d_out {d_out} must be >= d_in {d_in}")
    rng = np.random.default_rng(seed)
    return Isometry(_haar_unitary_matrix(d_out, rng)[:, :d_in])


def _isometry_matrix(d_in: int, d_out: int, rng) -> np.ndarray:
    return _haar_unitary_matrix(d_out, rng)[:, :d_in]


def sample_stinespring_channel(d: int, env_dim: int = 2, seed: int = 0) -> KrausChannel:
    """Random CPTP map: isometry into system ⊗ environment, environment traced out."""
    rng = np.random.default_rng(seed)
    return kraus_from_stinespring(
        Isometry(_isometry_matrix(d, d * env_dim, rng)), env_dim
    )


def _positive_matrix(d: int, rng, scale_range=(0.5, 2.0)) -> np.ndarray:
    return _state_matrix(d, d, rng) * rng.uniform(*scale_range)


def _choose(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _audit_opt_config(trial_seed: int, tag: str) -> OptimizerConfig:
    return OptimizerConfig(
        sigma_tolerance=1e-7,
        sigma_max_iterations=400,
        smoothing_restarts=2,
        smoothing_step_budget=40,
        seed=derive_seed(trial_seed, tag),
    )


# ---------------------------------------------------------------------------
# Trial bodies (one per check; deterministic functions of (cfg, trial_seed))
# ---------------------------------------------------------------------------


def _trial_dpi(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d = _choose(rng, cfg.single_dims())
    rho = _state_matrix(d, int(rng.integers(1, d + 1)), rng)
    zeta = _positive_matrix(d, rng)
    channel = kraus_from_stinespring(Isometry(_isometry_matrix(d, 2 * d, rng)), 2)
    worst_excess = -math.inf
    worst_kind = ""
    for spec in DEFAULT_DIVERGENCE_SUITE:
        before = divergence_value(spec, rho, zeta)
        after = divergence_value(
            spec, kraus_apply_matrix(channel, rho), kraus_apply_matrix(channel, zeta)
        )
        if math.isinf(before):
            continue
        violation = after - before
        tol = DPI_TOL_HT if spec.kind == "hypothesis_testing" else DPI_TOL
        if violation - tol > worst_excess:
            worst_excess, worst_kind = violation - tol, spec.label()
    if worst_excess == -math.inf:
        worst_excess = -1.0
    return TrialOutcome(worst_excess, {"dim": d, "worst_kind": worst_kind})


def _trial_eq1_invariance(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d = _choose(rng, cfg.single_dims())
    rho = _state_matrix(d, int(rng.integers(1, d + 1)), rng)
    zeta = _positive_matrix(d, rng)
    v = _isometry_matrix(d, d + cfg.iso_extra_dims, rng)
    worst_excess = -math.inf
    worst_kind = ""
    for spec in DEFAULT_DIVERGENCE_SUITE:
        before = divergence_value(spec, rho, zeta)
        after = divergence_value(spec, v @ rho @ dagger(v), v @ zeta @ dagger(v))
        if math.isinf(before) and math.isinf(after):
            continue
        gap = abs(after - before)
        tol = EQ1_TOL_HT if spec.kind == "hypothesis_testing" else EQ1_TOL
        if gap - tol > worst_excess:
            worst_excess, worst_kind = gap - tol, spec.label()
    if worst_excess == -math.inf:
        worst_excess = -1.0
    return TrialOutcome(worst_excess, {"dim": d, "worst_kind": worst_kind})


def _ball_candidate(center: DensityOperator, ball: SmoothingBall, tau_m, rng):
    """Mixture toward tau bisected to the ball, at the boundary or interior."""
    s_max = boundary_mixing_weight(ball, tau_m)
    s = s_max if rng.uniform() < 0.5 else s_max * rng.uniform()
    mixed = (1.0 - s) * center.matrix + s * tau_m
    return DensityOperator(mixed)


def _trial_lemma1_inclusions(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    d = d_a * d_b
    rho = DensityOperator(_state_matrix(d, d, rng))
    v = Isometry(_isometry_matrix(d, d + cfg.iso_extra_dims, rng))
    omega = DensityOperator(_state_matrix(d, d, rng))
    reversal = ReversalChannel(v, omega)
    pushed = DensityOperator(v.matrix @ rho.matrix @ dagger(v.matrix))
    worst = -math.inf
    for eps in BALL_EPSILONS:
        ball = SmoothingBall(rho, eps)
        pushed_ball = SmoothingBall(pushed, eps)
        for _ in range(50):
            tau_m = _state_matrix(d, d, rng)
            cand = _ball_candidate(rho, ball, tau_m, rng)
            mapped = DensityOperator(v.matrix @ cand.matrix @ dagger(v.matrix))
            worst = max(worst, -in_ball(mapped, pushed_ball).margin)
        for _ in range(50):
            chi_m = _state_matrix(d + cfg.iso_extra_dims, d + cfg.iso_extra_dims, rng)
            cand = _ball_candidate(pushed, pushed_ball, chi_m, rng)
            back = reversal_apply(reversal, cand)
            worst = max(worst, -in_ball(back, ball).margin)
    return TrialOutcome(worst, {"dims": f"{d_a}x{d_b}"})


def _trial_ball_roundtrip(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    d = d_a * d_b
    rho = DensityOperator(_state_matrix(d, d, rng))
    v = Isometry(_isometry_matrix(d, d + cfg.iso_extra_dims, rng))
    reversal = ReversalChannel(v, DensityOperator(_state_matrix(d, d, rng)))
    worst = -math.inf
    margin_gap = 0.0
    for eps in BALL_EPSILONS:
        ball = SmoothingBall(rho, eps)
        for _ in range(25):
            tau_m = _state_matrix(d, d, rng)
            cand = _ball_candidate(rho, ball, tau_m, rng)
            pushed = v.matrix @ cand.matrix @ dagger(v.matrix)
            back = reversal_apply_matrix(reversal, pushed)
            worst = max(worst, frobenius(back - cand.matrix))
            margin_gap = max(
                margin_gap,
                abs(
                    in_ball(DensityOperator(back), ball).margin
                    - in_ball(cand, ball).margin
                ),
            )
    return TrialOutcome(worst, {"dims": f"{d_a}x{d_b}", "margin_gap": margin_gap})


def _local_isometry(cfg: AuditConfig, rng, d_a: int, d_b: int, unitary_a: bool):
    extra = cfg.iso_extra_dims
    if unitary_a:
        v_a = Isometry(_haar_unitary_matrix(d_a, rng))
    else:
        v_a = Isometry(_isometry_matrix(d_a, d_a + extra, rng))
    v_b = Isometry(_isometry_matrix(d_b, d_b + extra, rng))
    return LocalIsometry(v_a, v_b)


def _trial_lemma2(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    v = _local_isometry(cfg, rng, d_a, d_b, unitary_a=False)
    d_bt = v.v_b.dim_out
    rho_a = DensityOperator(_state_matrix(d_a, d_a, rng))
    sigma_hat_a = DensityOperator(_state_matrix(d_a, d_a, rng))
    omega_b = DensityOperator(_state_matrix(d_b, d_b, rng))
    sigma_b = _state_matrix(d_bt, d_bt, rng)
    reversal = build_lemma_reversal(v, "lemma2", rho_a=rho_a, omega_b=omega_b)
    va = v.v_a.matrix
    lhs = reversal_apply_matrix(reversal, kron(va @ rho_a.matrix @ dagger(va), sigma_b))
    inner = reversal_apply_matrix(
        reversal, kron(va @ sigma_hat_a.matrix @ dagger(va), sigma_b)
    )
    rhs = kron(rho_a.matrix, partial_trace(inner, (d_a, d_b), "b"))
    return TrialOutcome(frobenius(lhs - rhs), {"dims": f"{d_a}x{d_b}"})


def _trial_lemma2prime(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    v = _local_isometry(cfg, rng, d_a, d_b, unitary_a=True)
    d_bt = v.v_b.dim_out
    omega_b = DensityOperator(_state_matrix(d_b, d_b, rng))
    sigma_b = _state_matrix(d_bt, d_bt, rng)
    reversal = build_lemma_reversal(v, "lemma2prime", omega_b=omega_b)
    eye_a = np.eye(d_a, dtype=complex)
    lhs = reversal_apply_matrix(reversal, kron(eye_a, sigma_b))
    inner = reversal_apply_matrix(reversal, kron(eye_a / d_a, sigma_b))
    rhs = kron(eye_a, partial_trace(inner, (d_a, d_b), "b"))
    return TrialOutcome(frobenius(lhs - rhs), {"dims": f"{d_a}x{d_b}"})


def _trial_lemma4(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    v = _local_isometry(cfg, rng, d_a, d_b, unitary_a=True)
    d_bt = v.v_b.dim_out
    rho_a = DensityOperator(_state_matrix(d_a, d_a, rng))
    omega_b = DensityOperator(_state_matrix(d_b, d_b, rng))
    sigma_ab = _state_matrix(d_a * d_bt, d_a * d_bt, rng)
    sigma_b = partial_trace(sigma_ab, (d_a, d_bt), "b")
    reversal = build_lemma_reversal(v, "lemma3", rho_a=rho_a, omega_b=omega_b)
    ua = v.v_a.matrix
    lhs = reversal_apply_matrix(reversal, kron(ua @ rho_a.matrix @ dagger(ua), sigma_b))
    rhs = kron(
        rho_a.matrix,
        partial_trace(reversal_apply_matrix(reversal, sigma_ab), (d_a, d_b), "b"),
    )
    return TrialOutcome(frobenius(lhs - rhs), {"dims": f"{d_a}x{d_b}"})


def _trial_prop1_i1(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    d = d_a * d_b
    rho = BipartiteState(
        d_a, d_b, DensityOperator(_state_matrix(d, int(rng.integers(1, d + 1)), rng))
    )
    v = _local_isometry(cfg, rng, d_a, d_b, unitary_a=False)
    moved = BipartiteState(
        v.v_a.dim_out,
        v.v_b.dim_out,
        transport_candidates(v, None, rho.state)[1],
    )
    worst = -math.inf
    worst_kind = ""
    for spec in DEFAULT_DIVERGENCE_SUITE:
        gap = abs(i1(spec, moved).value - i1(spec, rho).value)
        if gap > worst:
            worst, worst_kind = gap, spec.label()
    return TrialOutcome(worst, {"dims": f"{d_a}x{d_b}", "worst_kind": worst_kind})


def _two_sided_sigma_trial(
    cfg: AuditConfig, trial_seed: int, first_factor: str
) -> TrialOutcome:
    """Shared body for prop1_i2 and prop2_h2 (inner infimum orientation)."""
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    d = d_a * d_b
    unitary_a = first_factor == "identity_a"
    rho = BipartiteState(d_a, d_b, DensityOperator(_state_matrix(d, d, rng)))
    v = _local_isometry(cfg, rng, d_a, d_b, unitary_a=unitary_a)
    moved = BipartiteState(
        v.v_a.dim_out, v.v_b.dim_out, transport_candidates(v, None, rho.state)[1]
    )
    rho_a = marginal(rho, "a")
    va = v.v_a.matrix
    if first_factor == "marginal_rho_a":
        first_in = rho_a.matrix
        first_out = va @ rho_a.matrix @ dagger(va)
        variant = "lemma2"
    else:
        first_in = np.eye(d_a, dtype=complex)
        first_out = np.eye(v.v_a.dim_out, dtype=complex)
        variant = "lemma2prime"
    worst = -math.inf
    worst_kind = ""
    for spec in OPTIMIZER_KINDS:
        cfg_opt = _audit_opt_config(trial_seed, f"opt-{spec.kind}")
        cfg_opt_v = _audit_opt_config(trial_seed, f"optv-{spec.kind}")
        solver = i2 if first_factor == "marginal_rho_a" else h2
        res = solver(spec, rho, cfg_opt)
        sigma_t, _ = transport_candidates(v, res.sigma_witness)
        res_v = _solve_with_extra_start(
            solver, spec, moved, cfg_opt_v, first_factor, sigma_t
        )
        if not (res.converged and res_v.converged):
            return TrialOutcome(None, {"nonconverged_kind": spec.label()})
        inner = res.value if first_factor == "marginal_rho_a" else -res.value
        inner_v = res_v.value if first_factor == "marginal_rho_a" else -res_v.value
        fwd_bridge = divergence_value(
            spec, moved.matrix, kron(first_out, sigma_t.matrix)
        )
        reversal = build_lemma_reversal(
            v, variant, rho_a=None if variant == "lemma2prime" else rho_a
        )
        sigma_p, _ = pullback_candidates(
            v, res_v.sigma_witness, reversal=reversal
        )
        bwd_bridge = divergence_value(spec, rho.matrix, kron(first_in, sigma_p.matrix))
        gap = max(inner_v - fwd_bridge, inner - bwd_bridge)
        if gap > worst:
            worst, worst_kind = gap, spec.label()
    return TrialOutcome(worst, {"dims": f"{d_a}x{d_b}", "worst_kind": worst_kind})


def _solve_with_extra_start(solver, spec, state, cfg_opt, first_factor, sigma_start):
    """Run the inner solve with the transported witness as an extra start."""
    selector = "marginal_rho_a" if first_factor == "marginal_rho_a" else "identity_a"
    sigma, value, converged = minimize_sigma_b(
        spec, state, selector, cfg_opt, extra_starts=(sigma_start,)
    )
    signed = value if selector == "marginal_rho_a" else -value
    exact = "exact" if converged and math.isfinite(value) else "upper_bound"
    return QuantityResult(signed, exact, sigma, None, converged)


def _trial_prop1_i2(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    return _two_sided_sigma_trial(cfg, trial_seed, "marginal_rho_a")


def _trial_prop2_h2(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    return _two_sided_sigma_trial(cfg, trial_seed, "identity_a")


def _two_sided_smoothed_trial(
    cfg: AuditConfig, trial_seed: int, first_factor: str
) -> TrialOutcome:
    """Shared body for prop1_i3 and prop2_h3."""
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    d = d_a * d_b
    eps = _choose(rng, BALL_EPSILONS)
    unitary_a = first_factor == "identity_a"
    rho = BipartiteState(d_a, d_b, DensityOperator(_state_matrix(d, d, rng)))
    v = _local_isometry(cfg, rng, d_a, d_b, unitary_a=unitary_a)
    moved = BipartiteState(
        v.v_a.dim_out, v.v_b.dim_out, transport_candidates(v, None, rho.state)[1]
    )
    rho_a = marginal(rho, "a")
    va = v.v_a.matrix
    if first_factor == "marginal_rho_a":
        first_in = rho_a.matrix
        first_out = va @ rho_a.matrix @ dagger(va)
        variant = "lemma2"
        solver = i3
    else:
        first_in = np.eye(d_a, dtype=complex)
        first_out = np.eye(v.v_a.dim_out, dtype=complex)
        variant = "lemma2prime"
        solver = h3
    worst = -math.inf
    worst_kind = ""
    margin_floor = 0.0
    for spec in OPTIMIZER_KINDS:
        cfg_opt = _audit_opt_config(trial_seed, f"opt-{spec.kind}")
        cfg_opt_v = _audit_opt_config(trial_seed, f"optv-{spec.kind}")
        res = solver(spec, rho, eps, cfg_opt)
        sigma_t, cand_t = transport_candidates(
            v, res.sigma_witness, res.smoothing_witness
        )
        res_v = solver(
            spec,
            moved,
            eps,
            cfg_opt_v,
            extra_pairs=((cand_t, sigma_t),),
        )
        if not (res.converged and res_v.converged):
            return TrialOutcome(None, {"nonconverged_kind": spec.label()})
        inner = res.value if first_factor == "marginal_rho_a" else -res.value
        inner_v = res_v.value if first_factor == "marginal_rho_a" else -res_v.value
        margin_t = in_ball(cand_t, SmoothingBall(moved.state, eps)).margin
        fwd_bridge = divergence_value(
            spec, cand_t.matrix, kron(first_out, sigma_t.matrix)
        )
        reversal = build_lemma_reversal(
            v,
            variant,
            rho_a=None if variant == "lemma2prime" else rho_a,
        )
        sigma_p, cand_p = pullback_candidates(
            v, res_v.sigma_witness, res_v.smoothing_witness, reversal=reversal
        )
        margin_p = in_ball(cand_p, SmoothingBall(rho.state, eps)).margin
        bwd_bridge = divergence_value(spec, cand_p.matrix, kron(first_in, sigma_p.matrix))
        margin_floor = min(margin_floor, margin_t, margin_p)
        gap = max(inner_v - fwd_bridge, inner - bwd_bridge)
        if gap > worst:
            worst, worst_kind = gap, spec.label()
    return TrialOutcome(
        worst,
        {
            "dims": f"{d_a}x{d_b}",
            "worst_kind": worst_kind,
            "epsilon": eps,
            "min_witness_margin": margin_floor,
        },
    )


def _trial_prop1_i3(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    return _two_sided_smoothed_trial(cfg, trial_seed, "marginal_rho_a")


def _trial_prop2_h3(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    return _two_sided_smoothed_trial(cfg, trial_seed, "identity_a")


def _trial_prop2_h1(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    d = d_a * d_b
    rho = BipartiteState(
        d_a, d_b, DensityOperator(_state_matrix(d, int(rng.integers(1, d + 1)), rng))
    )
    v = _local_isometry(cfg, rng, d_a, d_b, unitary_a=True)
    moved = BipartiteState(
        d_a, v.v_b.dim_out, transport_candidates(v, None, rho.state)[1]
    )
    worst = -math.inf
    worst_kind = ""
    for spec in DEFAULT_DIVERGENCE_SUITE:
        gap = abs(h1(spec, moved).value - h1(spec, rho).value)
        if gap > worst:
            worst, worst_kind = gap, spec.label()
    return TrialOutcome(worst, {"dims": f"{d_a}x{d_b}", "worst_kind": worst_kind})


def _trial_prop2_i4(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    rng = np.random.default_rng(trial_seed)
    d_a, d_b = _choose(rng, cfg.pair_pool())
    d = d_a * d_b
    eps = _choose(rng, BALL_EPSILONS)
    rho = BipartiteState(d_a, d_b, DensityOperator(_state_matrix(d, d, rng)))
    v = _local_isometry(cfg, rng, d_a, d_b, unitary_a=True)
    moved = BipartiteState(
        d_a, v.v_b.dim_out, transport_candidates(v, None, rho.state)[1]
    )
    rho_a = marginal(rho, "a")
    va = v.v_a.matrix
    first_out = va @ rho_a.matrix @ dagger(va)
    dims_out = (d_a, v.v_b.dim_out)
    worst = -math.inf
    worst_kind = ""
    for spec in OPTIMIZER_KINDS:
        cfg_opt = _audit_opt_config(trial_seed, f"opt-{spec.kind}")
        cfg_opt_v = _audit_opt_config(trial_seed, f"optv-{spec.kind}")
        res = i4(spec, rho, eps, cfg_opt)
        _, cand_t = transport_candidates(v, None, res.smoothing_witness)
        res_v = i4(spec, moved, eps, cfg_opt_v, extra_candidates=(cand_t,))
        if not (res.converged and res_v.converged):
            return TrialOutcome(None, {"nonconverged_kind": spec.label()})
        fwd_bridge = divergence_value(
            spec,
            cand_t.matrix,
            kron(first_out, partial_trace(cand_t.matrix, dims_out, "b")),
        )
        reversal = build_lemma_reversal(v, "lemma3", rho_a=rho_a)
        _, cand_p = pullback_candidates(
            v, None, res_v.smoothing_witness, reversal=reversal
        )
        bwd_bridge = divergence_value(
            spec,
            cand_p.matrix,
            kron(rho_a.matrix, partial_trace(cand_p.matrix, (d_a, d_b), "b")),
        )
        gap = max(res_v.value - fwd_bridge, res.value - bwd_bridge)
        if gap > worst:
            worst, worst_kind = gap, spec.label()
    return TrialOutcome(
        worst, {"dims": f"{d_a}x{d_b}", "worst_kind": worst_kind, "epsilon": eps}
    )


def _trial_mutation_dpi(cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    """Negative control: squared Hilbert-Schmidt distance under a random channel."""
    rng = np.random.default_rng(trial_seed)
    d = _choose(rng, cfg.single_dims())
    rho = _state_matrix(d, int(rng.integers(1, d + 1)), rng)
    zeta = _positive_matrix(d, rng)
    channel = kraus_from_stinespring(Isometry(_isometry_matrix(d, 2 * d, rng)), 2)
    before = frobenius(rho - zeta) ** 2
    after = (
        frobenius(kraus_apply_matrix(channel, rho) - kraus_apply_matrix(channel, zeta))
        ** 2
    )
    return TrialOutcome(max(after - before, 0.0), {"dim": d})


_TRIALS: dict[str, Callable[[AuditConfig, int], TrialOutcome]] = {
    "dpi": _trial_dpi,
    "eq1_invariance": _trial_eq1_invariance,
    "lemma1_inclusions": _trial_lemma1_inclusions,
    "lemma2": _trial_lemma2,
    "lemma2prime": _trial_lemma2prime,
    "lemma4": _trial_lemma4,
    "prop1_i1": _trial_prop1_i1,
    "prop1_i2": _trial_prop1_i2,
    "prop1_i3": _trial_prop1_i3,
    "prop2_i4": _trial_prop2_i4,
    "prop2_h1": _trial_prop2_h1,
    "prop2_h2": _trial_prop2_h2,
    "prop2_h3": _trial_prop2_h3,
    "ball_roundtrip": _trial_ball_roundtrip,
    "mutation_dpi": _trial_mutation_dpi,
}


def replay_trial(name: str, cfg: AuditConfig, trial_seed: int) -> TrialOutcome:
    """Re-run one trial exactly; used to reproduce recorded worst cases."""
    if name not in _TRIALS:
        raise ValidationError(f"unknown check {name!r}")
    return _TRIALS[name](cfg, trial_seed)


def run_check(name: str, cfg: AuditConfig) -> CheckRecord:
    """Run all trials of a named check and record the worst violation."""
    if name not in _TRIALS:
        raise ValidationError(f"unknown check {name!r}")
    n = cfg.n_samples(name)
    threshold = cfg.threshold(name)
    expect_violation = name == MUTATION_CHECK
    worst = -math.inf
    worst_seed = derive_seed(cfg.master_seed, name, 0)
    worst_diag: dict = {}
    skipped = 0
    executed = 0
    for i in range(n):
        trial_seed = derive_seed(cfg.master_seed, name, i)
        outcome = _TRIALS[name](cfg, trial_seed)
        executed += 1
        if outcome.violation is None:
            skipped += 1
            continue
        if outcome.violation > worst:
            worst, worst_seed, worst_diag = (
                outcome.violation,
                trial_seed,
                outcome.diagnostics,
            )
        if expect_violation and worst > threshold:
            break
    diagnostics = dict(worst_diag)
    rate = skipped / executed if executed else 0.0
    if name in ("prop1_i2", "prop1_i3", "prop2_i4", "prop2_h2", "prop2_h3"):
        diagnostics["nonconverged_rate"] = rate
    if worst == -math.inf:
        worst = 0.0
    property_holds = worst <= threshold and rate <= MAX_NONCONVERGED_RATE
    passed = (not property_holds) if expect_violation else property_holds
    return CheckRecord(
        name=name,
        samples_run=executed,
        worst_violation=float(worst),
        threshold=threshold,
        property_holds=property_holds,
        expect_violation=expect_violation,
        passed=passed,
        worst_seed=int(worst_seed),
        diagnostics=diagnostics,
    )


def run_audit(cfg: AuditConfig, checks: tuple[str, ...] | None = None) -> AuditReport:
    """Run the named checks (default: every verification check, no mutation)."""
    names = ALL_CHECKS if checks is None else tuple(checks)
    for name in names:
        if name not in _TRIALS:
            raise ValidationError(f"unknown check {name!r}")
    records = tuple(run_check(name, cfg) for name in names)
    return AuditReport(cfg.master_seed, records)


# ---------------------------------------------------------------------------
# Serialization (shared with the command-line report format)
# ---------------------------------------------------------------------------


def record_to_dict(record: CheckRecord) -> dict:
    return {
        "name": record.name,
        "samples_run": record.samples_run,
        "worst_violation": record.worst_violation,
        "threshold": record.threshold,
        "property_holds": record.property_holds,
        "expect_violation": record.expect_violation,
        "passed": record.passed,
        "worst_seed": record.worst_seed,
        "diagnostics": record.diagnostics,
    }


def record_from_dict(data: dict) -> CheckRecord:
    return CheckRecord(
        name=data["name"],
        samples_run=int(data["samples_run"]),
        worst_violation=float(data["worst_violation"]),
        threshold=float(data["threshold"]),
        property_holds=bool(data["property_holds"]),
        expect_violation=bool(data["expect_violation"]),
        passed=bool(data["passed"]),
        worst_seed=int(data["worst_seed"]),
        diagnostics=dict(data["diagnostics"]),
    )


def report_to_dict(report: AuditReport) -> dict:
    return {
        "master_seed": report.master_seed,
        "overall_pass": report.overall_pass,
        "checks": [record_to_dict(r) for r in report.records],
    }


def report_from_dict(data: dict) -> AuditReport:
    return AuditReport(
        master_seed=int(data["master_seed"]),
        records=tuple(record_from_dict(r) for r in data["checks"]),
    )
