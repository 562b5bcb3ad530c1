"""Validated quantum states and positive operators, bipartite structure,
fidelity / sine distance, and smoothing-ball membership."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .linalg import (
    ValidationError,
    as_square_matrix,
    dagger,
    eigh,
    hermitian_part,
    hermiticity_defect,
    kron,
    matrix_function,
    partial_trace,
    support_threshold,
)

# Absolute tolerances for state validation.
HERMITIAN_TOL = 1e-10
EIGENVALUE_TOL = 1e-10
TRACE_TOL = 1e-10

# Additive slack for ball membership, so boundary candidates produced by
# numerical optimization are not rejected by round-off.
BALL_SLACK = 1e-12


@dataclass(frozen=True)
class PositiveOperator:
    """A positive-semidefinite operator (Hermitian, eigenvalues ≥ −1e-10)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_square_matrix(self.matrix, type(self).__name__)
        defect = hermiticity_defect(m)
        if defect > HERMITIAN_TOL:
            raise ValidationError(
                f"{type(self).__name__}: Hermiticity defect {defect:.3e} > "
                f"{HERMITIAN_TOL:.1e}"
            )
        m = hermitian_part(m)
        lam_min = float(np.linalg.eigvalsh(m)[0])
        if lam_min < -EIGENVALUE_TOL:
            raise ValidationError(
                f"{type(self).__name__}: smallest eigenvalue {lam_min:.3e} < "
                f"-{EIGENVALUE_TOL:.1e}"
            )
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


@dataclass(frozen=True)
class DensityOperator(PositiveOperator):
    """A quantum state: positive semidefinite with unit trace."""

    def __post_init__(self):
        super().__post_init__()
        tr = self.trace
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(
                f"DensityOperator: trace {tr!r} deviates from 1 by more than "
                f"{TRACE_TOL:.1e}"
            )


@dataclass(frozen=True)
class BipartiteState:
    """A state on A ⊗ B tagged with subsystem dimensions (A is the slow index)."""

    dim_a: int
    dim_b: int
    state: DensityOperator

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise ValidationError("subsystem dims must be >= 1")
        if self.dim_a * self.dim_b != self.state.dim:
            raise ValidationError(
                f"dims {self.dim_a}x{self.dim_b} do not match state dimension "
                f"{self.state.dim}"
            )

    @property
    def matrix(self) -> np.ndarray:
        return self.state.matrix

    @classmethod
    def from_matrix(cls, m: np.ndarray, dims: tuple[int, int]) -> "BipartiteState":
        return cls(dims[0], dims[1], DensityOperator(m))


@dataclass(frozen=True)
class SmoothingBall:
    """All states within sine distance ε of the center (fidelity ≥ 1 − ε²)."""

    center: DensityOperator
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError(f"epsilon must be in [0, 1], got {self.epsilon}")

    @cached_property
    def center_root(self) -> np.ndarray:
        """√center, cached: membership tests against one ball share it."""
        return matrix_function(self.center.matrix, np.sqrt, support_only=True)


def marginal(rho: BipartiteState, keep: str) -> DensityOperator:
    """Marginal state on one subsystem (partial trace over the other)."""
    reduced = partial_trace(rho.matrix, (rho.dim_a, rho.dim_b), keep)
    return DensityOperator(reduced)


def _fidelity_from_root(root: np.ndarray, other_m: np.ndarray) -> float:
    inner = hermitian_part(root @ other_m @ root)
    lam = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    f = float(np.sum(np.sqrt(lam)) ** 2)
    return min(max(f, 0.0), 1.0)


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Uhlmann fidelity F(ρ,σ) = (Tr √(√σ ρ √σ))², clamped to [0, 1].

    Computed spectrally: F = (Σᵢ √λᵢ)² for λᵢ the eigenvalues of √σ ρ √σ,
    negative round-off eigenvalues clamped at 0.
    """
    if rho.dim != sigma.dim:
        raise ValidationError(
            f"fidelity: dimension mismatch {rho.dim} vs {sigma.dim}"
        )
    root = matrix_function(sigma.matrix, np.sqrt, support_only=True)
    return _fidelity_from_root(root, rho.matrix)


def sine_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    """P(ρ,σ) = √(1 − F(ρ,σ))."""
    return float(np.sqrt(max(1.0 - fidelity(rho, sigma), 0.0)))


class BallMembership(NamedTuple):
    """Membership verdict plus the fidelity margin F − (1 − ε²)."""

    inside: bool
    margin: float


def ball_margin(ball: SmoothingBall, candidate_m: np.ndarray) -> float:
    """F(center, candidate) − (1 − ε²) on a raw candidate matrix."""
    return _fidelity_from_root(ball.center_root, candidate_m) - (
        1.0 - ball.epsilon**2
    )


def in_ball(candidate: DensityOperator, ball: SmoothingBall) -> BallMembership:
    """Whether F(center, candidate) ≥ 1 − ε² (with additive round-off slack)."""
    if candidate.dim != ball.center.dim:
        raise ValidationError(
            f"in_ball: dimension mismatch {candidate.dim} vs {ball.center.dim}"
        )
    margin = ball_margin(ball, candidate.matrix)
    return BallMembership(margin >= -BALL_SLACK, margin)


def purify(rho: DensityOperator) -> BipartiteState:
    """A pure state on system ⊗ environment whose system marginal is ρ.

    The environment dimension equals the rank of ρ (eigenvalues above the
    support threshold); the system is the slow factor.
    """
    w, u = eigh(rho.matrix)
    keep = w > support_threshold(w)
    lam = w[keep]
    vecs = u[:, keep]
    # psi[j*r + i] = sqrt(lam_i) * v_i[j]  (system slow, environment fast)
    amps = vecs * np.sqrt(lam)
    psi = amps.reshape(-1)
    psi = psi / np.linalg.norm(psi)
    pure = np.outer(psi, psi.conj())
    return BipartiteState(rho.dim, int(lam.size), DensityOperator(pure))


def maximally_mixed(dim: int) -> DensityOperator:
    """𝟙/d."""
    return DensityOperator(np.eye(dim, dtype=complex) / dim)


def product_state(rho_a: DensityOperator, rho_b: DensityOperator) -> BipartiteState:
    """ρ_A ⊗ ρ_B as a bipartite state."""
    return BipartiteState(
        rho_a.dim, rho_b.dim, DensityOperator(kron(rho_a.matrix, rho_b.matrix))
    )


def max_entangled_state(d: int) -> BipartiteState:
    """The maximally entangled state Σᵢ|ii⟩/√d on d × d."""
    psi = np.zeros(d * d, dtype=complex)
    for i in range(d):
        psi[i * d + i] = 1.0 / np.sqrt(d)
    return BipartiteState(d, d, DensityOperator(np.outer(psi, psi.conj())))
