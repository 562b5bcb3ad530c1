"""The seven information-quantity families on bipartite states.

Mutual-information families measure against the first marginal:

- ``I1``  : D(ρ_AB ‖ ρ_A ⊗ ρ_B)                       (exact)
- ``I2``  : inf_σ D(ρ_AB ‖ ρ_A ⊗ σ_B)                 (inner solve)
- ``I3``  : inf over ball candidates ρ̂ and σ_B of D(ρ̂ ‖ ρ_A ⊗ σ_B),
            ρ_A the ORIGINAL marginal                  (certified upper bound)
- ``I4``  : inf over ball candidates of D(ρ̂ ‖ ρ_A ⊗ ρ̂_B),
            second factor rebuilt from each candidate  (certified upper bound)

Conditional-entropy families negate a divergence against 𝟙_A ⊗ (·):

- ``H1``  : −D(ρ_AB ‖ 𝟙_A ⊗ ρ_B)
- ``H2``  : −inf_σ D(ρ_AB ‖ 𝟙_A ⊗ σ_B)
- ``H3``  : −inf over ball and σ_B

The 𝟙_A factor is used verbatim (trace d_A, never normalized).  For the
negated families an inexact inner infimum makes the reported value a LOWER
bound on the entropy; the exactness flag refers to the inner infimum.

Searches are deterministic given ``OptimizerConfig.seed``; restart i draws
from the documented seed split ``derive_seed(seed, label, i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .channels import LocalIsometry, ReversalChannel, apply_local_isometry, reversal_apply
from .divergences import (
    DivergenceSpec,
    divergence_value,
    evaluate,
    fixed_second_arg_objective,
    product_second_arg_objective,
)
from .linalg import ValidationError, dagger, eigh, hermitian_part, kron, partial_trace
from .seeding import derive_seed
from .states import (
    BallMembership,
    BipartiteState,
    DensityOperator,
    PositiveOperator,
    SmoothingBall,
    ball_margin,
    in_ball,
    marginal,
    maximally_mixed,
    purify,
)

FAMILIES = ("I1", "I2", "I3", "I4", "H1", "H2", "H3")
SMOOTHED_FAMILIES = ("I3", "I4", "H3")

# Finite stand-in for +inf inside scalar minimizers.
_PENALTY = 1e6

# Random multi-starts for the inner sigma solve, on top of {rho_B, pi_B}.
_SIGMA_RANDOM_STARTS = 2

# Alternating candidate/sigma refinement rounds for the joint searches.
_JOINT_ROUNDS = 2


@dataclass(frozen=True)
class QuantityKind:
    """Family selector; epsilon is required exactly for the smoothed families."""

    family: str
    epsilon: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(
                f"unknown family {self.family!r}; expected one of {FAMILIES}"
            )
        if self.family in SMOOTHED_FAMILIES:
            if self.epsilon is None or not 0.0 <= self.epsilon <= 1.0:
                raise ValidationError(
                    f"{self.family} requires epsilon in [0,1], got {self.epsilon}"
                )
        elif self.epsilon is not None:
            raise ValidationError(f"{self.family} takes no epsilon")


@dataclass(frozen=True)
class OptimizerConfig:
    sigma_tolerance: float = 1e-8
    sigma_max_iterations: int = 5000
    smoothing_restarts: int = 8
    smoothing_step_budget: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.sigma_tolerance <= 0 or self.sigma_max_iterations <= 0:
            raise ValidationError("sigma solver settings must be positive")
        if self.smoothing_restarts <= 0 or self.smoothing_step_budget <= 0:
            raise ValidationError("smoothing budget settings must be positive")


@dataclass(frozen=True)
class QuantityResult:
    """Value plus optimizer witnesses.

    ``exactness`` is 'exact' only for I1, H1 and converged I2/H2 solves;
    everything smoothed is an upper bound on the inner infimum.  Witnesses
    reproduce ``value`` when the divergence is re-evaluated at them.
    """

    value: float
    exactness: str
    sigma_witness: DensityOperator | None
    smoothing_witness: DensityOperator | None
    converged: bool


def _first_matrix(
    rho: BipartiteState, first_factor: str, first_operator: np.ndarray | None
) -> np.ndarray:
    if first_operator is not None:
        return np.asarray(first_operator, dtype=complex)
    if first_factor == "marginal_rho_a":
        return marginal(rho, "a").matrix
    if first_factor == "identity_a":
        return np.eye(rho.dim_a, dtype=complex)
    raise ValidationError(
        f"first_factor must be 'marginal_rho_a' or 'identity_a', got {first_factor!r}"
    )


def _sigma_from_params(params: np.ndarray, d_b: int) -> np.ndarray | None:
    # Lower-triangular L with real diagonal: exactly d_b**2 real parameters,
    # no unitary gauge freedom in sigma = LL†/Tr[LL†].
    ell = np.zeros((d_b, d_b), dtype=complex)
    ell[np.diag_indices(d_b)] = params[:d_b]
    rows, cols = np.tril_indices(d_b, -1)
    k = rows.size
    ell[rows, cols] = params[d_b : d_b + k] + 1j * params[d_b + k : d_b + 2 * k]
    s = ell @ dagger(ell)
    tr = float(np.trace(s).real)
    if not math.isfinite(tr) or tr < 1e-250:
        return None
    return s / tr


def _params_from_sigma(sigma_m: np.ndarray) -> np.ndarray:
    # Full-rank starting point: nudge toward the interior before factoring.
    d_b = sigma_m.shape[0]
    mixed = hermitian_part((1.0 - 1e-6) * sigma_m) + 1e-6 * np.eye(d_b) / d_b
    ell = np.linalg.cholesky(mixed)
    rows, cols = np.tril_indices(d_b, -1)
    off = ell[rows, cols]
    return np.concatenate([ell.diagonal().real, off.real, off.imag])


def _floor_full_rank(sigma_m: np.ndarray) -> np.ndarray:
    """Eigenvalue floor 1e-12, renormalized: keeps sigma in the interior."""
    w, u = eigh(sigma_m)
    w = np.clip(w, 1e-12, None)
    s = (u * w) @ dagger(u)
    return hermitian_part(s / np.trace(s).real)


def minimize_sigma_b(
    d: DivergenceSpec,
    rho: BipartiteState,
    first_factor: str,
    cfg: OptimizerConfig,
    *,
    first_operator: np.ndarray | None = None,
    extra_starts: tuple[DensityOperator, ...] = (),
) -> tuple[DensityOperator, float, bool]:
    """Quasi-Newton inner solve of inf_σ D(ρ_AB ‖ first ⊗ σ_B).

    σ_B is parameterized as LL†/Tr[LL†] over a real vector; gradients are
    finite differences (relative step 1e-6); multi-starts are ρ_B, π_B and
    seeded random states.  Returns a full-rank witness (eigenvalues floored
    at 1e-12, renormalized), the value re-evaluated at that witness, and a
    convergence flag.
    """
    d_b = rho.dim_b
    first = _first_matrix(rho, first_factor, first_operator)
    rho_m = rho.matrix
    if d_b == 1:
        sigma = DensityOperator(np.eye(1, dtype=complex))
        value = divergence_value(d, rho_m, kron(first, sigma.matrix))
        return sigma, value, True

    inner = product_second_arg_objective(d, rho_m, first, (rho.dim_a, d_b))

    def objective(params: np.ndarray) -> float:
        sigma_m = _sigma_from_params(params, d_b)
        if sigma_m is None:
            return _PENALTY
        val = inner(sigma_m)
        return val if math.isfinite(val) else _PENALTY

    rho_b = marginal(rho, "b")
    starts: list[np.ndarray] = [rho_b.matrix, maximally_mixed(d_b).matrix]
    starts.extend(s.matrix for s in extra_starts)
    for i in range(_SIGMA_RANDOM_STARTS):
        rng = np.random.default_rng(derive_seed(cfg.seed, "sigma_start", i))
        g = rng.standard_normal((d_b, d_b)) + 1j * rng.standard_normal((d_b, d_b))
        s = g @ dagger(g)
        starts.append(s / np.trace(s).real)

    maxiter = max(50, cfg.sigma_max_iterations // len(starts))
    ftol = max(1e-13, 1e-4 * cfg.sigma_tolerance)
    best_params, best_val = None, math.inf
    outcomes: list[tuple[float, bool]] = []
    for start in starts:
        x0 = _params_from_sigma(start)
        res = _scipy_minimize(
            objective,
            x0,
            method="L-BFGS-B",
            options={
                "maxiter": maxiter,
                "ftol": ftol,
                "gtol": 1e-9,
                "finite_diff_rel_step": 1e-6,
            },
        )
        outcomes.append((float(res.fun), bool(res.success)))
        if res.fun < best_val:
            best_params, best_val = res.x, float(res.fun)

    sigma_m = _sigma_from_params(best_params, d_b)
    if sigma_m is None or best_val >= _PENALTY:
        sigma = maximally_mixed(d_b)
        value = divergence_value(d, rho_m, kron(first, sigma.matrix))
        return sigma, value if math.isfinite(value) else math.inf, False
    # Converged when some properly terminated start sits within tolerance of
    # the best value (a lone abnormal line-search exit does not spoil it).
    converged = any(
        ok and val <= best_val + cfg.sigma_tolerance for val, ok in outcomes
    )
    sigma = DensityOperator(_floor_full_rank(sigma_m))
    value = divergence_value(d, rho_m, kron(first, sigma.matrix))
    return sigma, value, converged and math.isfinite(value)


def _mix(center_m: np.ndarray, tau_m: np.ndarray, s: float) -> DensityOperator:
    return DensityOperator((1.0 - s) * center_m + s * tau_m)


def boundary_mixing_weight(ball: SmoothingBall, tau_m: np.ndarray) -> float:
    """Largest mixing weight s with (1−s)·center + s·τ still inside the ball."""
    center_m = ball.center.matrix

    def margin(s: float) -> float:
        return ball_margin(ball, (1.0 - s) * center_m + s * tau_m)

    if margin(1.0) >= 1e-11:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(50):
        if margin(0.5 * (lo + hi)) >= 1e-11:
            lo = 0.5 * (lo + hi)
        else:
            hi = 0.5 * (lo + hi)
    return lo


def smooth_search(
    ball: SmoothingBall,
    objective,
    cfg: OptimizerConfig,
    *,
    extra_candidates: tuple[DensityOperator, ...] = (),
    seed_tag="smooth",
) -> tuple[DensityOperator, float]:
    """Best feasible candidate found inside the smoothing ball.

    Candidates come from convex mixtures toward probe states (the maximally
    mixed direction first, then seeded random directions) with the mixing
    weight line-searched up to the ball boundary, plus small random
    rotations of the purification.  The center is always evaluated, so the
    returned value never exceeds objective(center).
    """
    center = ball.center
    best_c, best_v = center, float(objective(center))
    for cand in extra_candidates:
        membership = in_ball(cand, ball)
        if not membership.inside:
            raise ValidationError(
                f"extra candidate outside the ball (margin {membership.margin:.3e})"
            )
        val = float(objective(cand))
        if val < best_v:
            best_c, best_v = cand, val
    if ball.epsilon == 0.0:
        return best_c, best_v

    budget = cfg.smoothing_restarts * cfg.smoothing_step_budget
    evals = 0
    dim = center.dim

    def consider(cand: DensityOperator) -> float:
        nonlocal best_c, best_v, evals
        evals += 1
        val = float(objective(cand))
        if val < best_v:
            best_c, best_v = cand, val
        return val

    def line_search(tau_m: np.ndarray):
        s_max = boundary_mixing_weight(ball, tau_m)
        if s_max <= 0.0:
            return
        grid = np.linspace(0.0, s_max, 6)[1:]
        grid_vals = [consider(_mix(center.matrix, tau_m, s)) for s in grid]
        best_idx = int(np.argmin(grid_vals))
        a = grid[best_idx - 1] if best_idx > 0 else 0.0
        b = grid[best_idx + 1] if best_idx + 1 < len(grid) else s_max
        phi = (math.sqrt(5.0) - 1.0) / 2.0
        for _ in range(6):
            c1 = b - phi * (b - a)
            c2 = a + phi * (b - a)
            f1 = consider(_mix(center.matrix, tau_m, c1))
            f2 = consider(_mix(center.matrix, tau_m, c2))
            if f1 <= f2:
                b = c2
            else:
                a = c1

    purification = purify(center)
    pure_dim = purification.state.dim

    for restart in range(cfg.smoothing_restarts):
        if evals >= budget:
            break
        rng = np.random.default_rng(derive_seed(cfg.seed, seed_tag, restart))
        directions: list[np.ndarray] = []
        if restart == 0:
            directions.append(maximally_mixed(dim).matrix)
        while len(directions) < 3:
            g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            s = g @ dagger(g)
            directions.append(s / np.trace(s).real)
        for tau_m in directions:
            if evals >= budget:
                break
            line_search(tau_m)
        # local rotations of the purification, rejected when they leave the ball
        for _ in range(4):
            if evals >= budget:
                break
            g = rng.standard_normal((pure_dim, pure_dim)) + 1j * rng.standard_normal(
                (pure_dim, pure_dim)
            )
            gen = hermitian_part(g)
            theta = ball.epsilon * rng.uniform(0.1, 0.6)
            w, u = eigh(gen)
            rot = (u * np.exp(1j * theta * w)) @ dagger(u)
            rotated = rot @ purification.matrix @ dagger(rot)
            # purify() puts the system on the slow axis; trace out the environment
            cand_m = partial_trace(
                rotated, (purification.dim_a, purification.dim_b), "a"
            )
            cand = DensityOperator(hermitian_part(cand_m))
            if in_ball(cand, ball).margin >= 1e-11:
                consider(cand)
    return best_c, best_v


def i1(d: DivergenceSpec, rho: BipartiteState) -> QuantityResult:
    """D(ρ_AB ‖ ρ_A ⊗ ρ_B); exact."""
    zeta = kron(marginal(rho, "a").matrix, marginal(rho, "b").matrix)
    dv = evaluate(d, rho.state, PositiveOperator(zeta))
    return QuantityResult(dv.value, "exact", None, None, True)


def i2(d: DivergenceSpec, rho: BipartiteState, cfg: OptimizerConfig) -> QuantityResult:
    """inf_σ D(ρ_AB ‖ ρ_A ⊗ σ_B) with the σ_B witness."""
    sigma, value, converged = minimize_sigma_b(d, rho, "marginal_rho_a", cfg)
    exactness = "exact" if converged and math.isfinite(value) else "upper_bound"
    return QuantityResult(value, exactness, sigma, None, converged)


def _joint_search(
    d: DivergenceSpec,
    rho: BipartiteState,
    epsilon: float,
    cfg: OptimizerConfig,
    first_factor: str,
    extra_pairs,
    seed_tag: str,
) -> tuple[float, DensityOperator, DensityOperator, bool]:
    """Shared candidate/σ alternation for I3 and H3 (inner infimum values)."""
    first = _first_matrix(rho, first_factor, None)
    dims = (rho.dim_a, rho.dim_b)
    sigma, value, converged = minimize_sigma_b(d, rho, first_factor, cfg)
    best = (rho.state, sigma, value)
    ball = SmoothingBall(rho.state, epsilon)
    round_cfg = replace(
        cfg, smoothing_step_budget=max(1, cfg.smoothing_step_budget // _JOINT_ROUNDS)
    )
    for round_idx in range(_JOINT_ROUNDS):
        held_sigma = best[1]
        scorer = fixed_second_arg_objective(d, kron(first, held_sigma.matrix))

        def objective(cand: DensityOperator) -> float:
            val = scorer(cand.matrix)
            return val if math.isfinite(val) else _PENALTY

        cand, val = smooth_search(
            ball, objective, round_cfg, seed_tag=(seed_tag, round_idx)
        )
        if val >= best[2] - 1e-12:
            break  # fresh directions found nothing; further rounds won't either
        best = (cand, held_sigma, val)
        refit_cfg = replace(
            cfg, sigma_max_iterations=max(150, cfg.sigma_max_iterations // 3)
        )
        refit, refit_val, refit_ok = minimize_sigma_b(
            d,
            BipartiteState(dims[0], dims[1], cand),
            first_factor,
            refit_cfg,
            first_operator=first,
            extra_starts=(held_sigma,),
        )
        if refit_val < best[2]:
            best = (cand, refit, refit_val)
            converged = converged and refit_ok
    for cand_x, sigma_x in extra_pairs:
        membership = in_ball(cand_x, ball)
        if not membership.inside:
            raise ValidationError(
                f"extra pair candidate outside the ball (margin {membership.margin:.3e})"
            )
        val_x = divergence_value(d, cand_x.matrix, kron(first, sigma_x.matrix))
        if val_x < best[2]:
            best = (cand_x, sigma_x, val_x)
    cand, sigma, _ = best
    final = divergence_value(d, cand.matrix, kron(first, sigma.matrix))
    if not math.isfinite(final):
        return math.inf, cand, sigma, False
    return final, cand, sigma, converged


def i3(
    d: DivergenceSpec,
    rho: BipartiteState,
    epsilon: float,
    cfg: OptimizerConfig,
    *,
    extra_pairs: tuple[tuple[DensityOperator, DensityOperator], ...] = (),
) -> QuantityResult:
    """Joint smoothing/σ search for D(ρ̂ ‖ ρ_A ⊗ σ_B); ρ_A stays the original marginal."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError(f"epsilon must lie in [0,1], got {epsilon}")
    if epsilon == 0.0:
        base = i2(d, rho, cfg)
        return QuantityResult(
            base.value, base.exactness, base.sigma_witness, rho.state, base.converged
        )
    value, cand, sigma, converged = _joint_search(
        d, rho, epsilon, cfg, "marginal_rho_a", extra_pairs, "i3"
    )
    return QuantityResult(value, "upper_bound", sigma, cand, converged)


def i4(
    d: DivergenceSpec,
    rho: BipartiteState,
    epsilon: float,
    cfg: OptimizerConfig,
    *,
    extra_candidates: tuple[DensityOperator, ...] = (),
) -> QuantityResult:
    """Smoothing search for D(ρ̂ ‖ ρ_A ⊗ ρ̂_B); the second factor follows the candidate."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError(f"epsilon must lie in [0,1], got {epsilon}")
    if epsilon == 0.0:
        base = i1(d, rho)
        return QuantityResult(base.value, "exact", None, rho.state, True)
    first = marginal(rho, "a").matrix
    dims = (rho.dim_a, rho.dim_b)

    def objective(cand: DensityOperator) -> float:
        cand_b = partial_trace(cand.matrix, dims, "b")
        val = divergence_value(d, cand.matrix, kron(first, cand_b))
        return val if math.isfinite(val) else _PENALTY

    ball = SmoothingBall(rho.state, epsilon)
    cand, _ = smooth_search(
        ball, objective, cfg, extra_candidates=tuple(extra_candidates), seed_tag="i4"
    )
    final = divergence_value(
        d, cand.matrix, kron(first, partial_trace(cand.matrix, dims, "b"))
    )
    if not math.isfinite(final):
        return QuantityResult(math.inf, "upper_bound", None, cand, False)
    return QuantityResult(final, "upper_bound", None, cand, True)


def h1(d: DivergenceSpec, rho: BipartiteState) -> QuantityResult:
    """−D(ρ_AB ‖ 𝟙_A ⊗ ρ_B); exact."""
    zeta = kron(np.eye(rho.dim_a, dtype=complex), marginal(rho, "b").matrix)
    dv = evaluate(d, rho.state, PositiveOperator(zeta))
    return QuantityResult(-dv.value, "exact", None, None, True)


def h2(d: DivergenceSpec, rho: BipartiteState, cfg: OptimizerConfig) -> QuantityResult:
    """−inf_σ D(ρ_AB ‖ 𝟙_A ⊗ σ_B)."""
    sigma, value, converged = minimize_sigma_b(d, rho, "identity_a", cfg)
    exactness = "exact" if converged and math.isfinite(value) else "upper_bound"
    return QuantityResult(-value, exactness, sigma, None, converged)


def h3(
    d: DivergenceSpec,
    rho: BipartiteState,
    epsilon: float,
    cfg: OptimizerConfig,
    *,
    extra_pairs: tuple[tuple[DensityOperator, DensityOperator], ...] = (),
) -> QuantityResult:
    """−(joint smoothing/σ infimum against 𝟙_A ⊗ σ_B)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError(f"epsilon must lie in [0,1], got {epsilon}")
    if epsilon == 0.0:
        base = h2(d, rho, cfg)
        return QuantityResult(
            base.value, base.exactness, base.sigma_witness, rho.state, base.converged
        )
    value, cand, sigma, converged = _joint_search(
        d, rho, epsilon, cfg, "identity_a", extra_pairs, "h3"
    )
    return QuantityResult(-value, "upper_bound", sigma, cand, converged)


def compute_quantity(
    kind: QuantityKind,
    d: DivergenceSpec,
    rho: BipartiteState,
    cfg: OptimizerConfig,
) -> QuantityResult:
    """Dispatch a QuantityKind to its implementation."""
    if kind.family == "I1":
        return i1(d, rho)
    if kind.family == "I2":
        return i2(d, rho, cfg)
    if kind.family == "I3":
        return i3(d, rho, kind.epsilon, cfg)
    if kind.family == "I4":
        return i4(d, rho, kind.epsilon, cfg)
    if kind.family == "H1":
        return h1(d, rho)
    if kind.family == "H2":
        return h2(d, rho, cfg)
    return h3(d, rho, kind.epsilon, cfg)


def transport_candidates(
    v: LocalIsometry,
    sigma_b: DensityOperator | None,
    candidate: DensityOperator | None = None,
) -> tuple[DensityOperator | None, DensityOperator | None]:
    """Push optimizer witnesses through a local isometry.

    σ_B ↦ V_B σ_B V_B† and ρ̂ ↦ (V_A ⊗ V_B) ρ̂ (V_A ⊗ V_B)†.  Transported
    candidates stay inside the pushed-forward smoothing ball because the
    fidelity is invariant under simultaneous isometric conjugation.
    """
    sigma_out = None
    if sigma_b is not None:
        vb = v.v_b.matrix
        sigma_out = DensityOperator(vb @ sigma_b.matrix @ dagger(vb))
    cand_out = None
    if candidate is not None:
        cand_out = apply_local_isometry(v, candidate)
    return sigma_out, cand_out


def pullback_candidates(
    v: LocalIsometry,
    sigma_b: DensityOperator | None,
    candidate: DensityOperator | None = None,
    *,
    reversal: ReversalChannel,
    omega_b: DensityOperator | None = None,
) -> tuple[DensityOperator | None, DensityOperator | None]:
    """Pull witnesses found on the transformed side back through a reversal.

    The candidate maps through the full reversal channel; σ_B maps through
    the B-side reversal with the same anchor ω_B (the B marginal of the
    reversal's product anchor), matching the factorized action of the joint
    reversal on product second arguments.
    """
    if omega_b is None:
        omega_b = maximally_mixed(v.v_b.dim_in)
    sigma_out = None
    if sigma_b is not None:
        r_b = ReversalChannel(v.v_b, omega_b)
        sigma_out = reversal_apply(r_b, sigma_b)
    cand_out = None
    if candidate is not None:
        cand_out = reversal_apply(reversal, candidate)
    return sigma_out, cand_out
