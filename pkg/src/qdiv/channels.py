"""Isometries, isometric channels, CPTP channels in Kraus form, and the
reversal-channel construction used by the invariance arguments.

A reversal channel for an isometry V with anchor state ω acts as

    R(σ) = V† σ V + Tr[(𝟙 − V V†) σ] · ω,

which is completely positive, trace-preserving, and inverts conjugation by
V on its range.  It is not unique: channels with different ω agree on
range(V) but differ off it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

from .linalg import ValidationError, dagger, frobenius, kron, partial_trace
from .states import DensityOperator, PositiveOperator, maximally_mixed

ISOMETRY_TOL = 1e-10

LEMMA_VARIANTS = ("lemma2", "lemma2prime", "lemma3")


@dataclass(frozen=True)
class Isometry:
    """V with V†V = 𝟙 (dim_out × dim_in, dim_out ≥ dim_in)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] < m.shape[1] or m.shape[1] < 1:
            raise ValidationError(
                f"Isometry must be dim_out x dim_in with dim_out >= dim_in, "
                f"got shape {m.shape}"
            )
        defect = frobenius(dagger(m) @ m - np.eye(m.shape[1]))
        if defect > ISOMETRY_TOL:
            raise ValidationError(
                f"Isometry: ||V†V - 1||_F = {defect:.3e} > {ISOMETRY_TOL:.1e}"
            )
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim_in(self) -> int:
        return self.matrix.shape[1]

    @property
    def dim_out(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_unitary(self) -> bool:
        return self.dim_in == self.dim_out

    @classmethod
    def identity(cls, dim: int) -> "Isometry":
        return cls(np.eye(dim, dtype=complex))


@dataclass(frozen=True)
class LocalIsometry:
    """A product isometry V_A ⊗ V_B acting on a bipartite space."""

    v_a: Isometry
    v_b: Isometry

    @property
    def a_is_unitary(self) -> bool:
        return self.v_a.is_unitary

    @property
    def dims_in(self) -> tuple[int, int]:
        return (self.v_a.dim_in, self.v_b.dim_in)

    @property
    def dims_out(self) -> tuple[int, int]:
        return (self.v_a.dim_out, self.v_b.dim_out)

    def product(self) -> Isometry:
        return Isometry(kron(self.v_a.matrix, self.v_b.matrix))


@dataclass(frozen=True)
class ReversalChannel:
    """The (V, ω) pair defining R(σ) = V†σV + Tr[(𝟙 − VV†)σ]ω."""

    isometry: Isometry
    omega: DensityOperator

    def __post_init__(self):
        if self.omega.dim != self.isometry.dim_in:
            raise ValidationError(
                f"ReversalChannel: omega dimension {self.omega.dim} does not "
                f"match isometry input dimension {self.isometry.dim_in}"
            )


@dataclass(frozen=True)
class KrausChannel:
    """A CPTP map given by Kraus operators with Σ K†K = 𝟙."""

    kraus_ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValidationError("KrausChannel needs at least one operator")
        shape = ops[0].shape
        if len(shape) != 2 or any(k.shape != shape for k in ops):
            raise ValidationError("Kraus operators must share a 2-d shape")
        total = sum(dagger(k) @ k for k in ops)
        defect = frobenius(total - np.eye(shape[1]))
        if defect > ISOMETRY_TOL:
            raise ValidationError(
                f"KrausChannel: ||ΣK†K - 1||_F = {defect:.3e} > {ISOMETRY_TOL:.1e}"
            )
        for k in ops:
            k.flags.writeable = False
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def dim_in(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus_ops[0].shape[0]


def _rewrap(x: PositiveOperator, m: np.ndarray) -> PositiveOperator:
    """Wrap a result matrix in the same operator kind as the input."""
    return DensityOperator(m) if isinstance(x, DensityOperator) else PositiveOperator(m)


def apply_isometry(v: Isometry, x: PositiveOperator) -> PositiveOperator:
    """VXV†: embeds the operator, preserving trace and nonzero spectrum."""
    if x.dim != v.dim_in:
        raise ValidationError(
            f"apply_isometry: operator dim {x.dim} != isometry input {v.dim_in}"
        )
    return _rewrap(x, v.matrix @ x.matrix @ dagger(v.matrix))


def apply_local_isometry(v: LocalIsometry, x: PositiveOperator) -> PositiveOperator:
    """(V_A ⊗ V_B) X (V_A ⊗ V_B)†."""
    return apply_isometry(v.product(), x)


def reversal_apply_matrix(r: ReversalChannel, sigma: np.ndarray) -> np.ndarray:
    """Reversal channel on a raw matrix (no wrapper validation)."""
    v = r.isometry.matrix
    back = dagger(v) @ sigma @ v
    deficit = np.trace(sigma).real - np.trace(back).real
    return back + deficit * r.omega.matrix


def reversal_apply(r: ReversalChannel, sigma: PositiveOperator) -> PositiveOperator:
    """V†σV + Tr[(𝟙 − VV†)σ]·ω; maps states to states, preserves trace."""
    if sigma.dim != r.isometry.dim_out:
        raise ValidationError(
            f"reversal_apply: operator dim {sigma.dim} != isometry output "
            f"{r.isometry.dim_out}"
        )
    return _rewrap(sigma, reversal_apply_matrix(r, sigma.matrix))


def build_lemma_reversal(
    v: LocalIsometry,
    variant: str,
    *,
    rho_a: DensityOperator | None = None,
    omega_b: DensityOperator | None = None,
) -> ReversalChannel:
    """Reversal channel for a local isometry with the anchor ω a product state.

    Variants differ in the first factor of ω = (first) ⊗ ω_B:

    - ``lemma2``      : first = ρ_A (required argument),
    - ``lemma2prime`` : first = 𝟙/d_A, V_A must be unitary,
    - ``lemma3``      : first = ρ_A (required), V_A must be unitary.

    ``omega_b`` defaults to the maximally mixed state on the B input space.
    """
    if variant not in LEMMA_VARIANTS:
        raise ValidationError(
            f"unknown reversal variant {variant!r}; expected one of {LEMMA_VARIANTS}"
        )
    if variant in ("lemma2prime", "lemma3") and not v.a_is_unitary:
        raise ValidationError(
            f"variant {variant!r} requires a unitary first factor, got "
            f"{v.v_a.dim_in} -> {v.v_a.dim_out}"
        )
    if omega_b is None:
        omega_b = maximally_mixed(v.v_b.dim_in)
    if omega_b.dim != v.v_b.dim_in:
        raise ValidationError(
            f"omega_b dimension {omega_b.dim} != B input dim {v.v_b.dim_in}"
        )
    if variant == "lemma2prime":
        first = maximally_mixed(v.v_a.dim_in)
    else:
        if rho_a is None:
            raise ValidationError(f"variant {variant!r} requires rho_a")
        if rho_a.dim != v.v_a.dim_in:
            raise ValidationError(
                f"rho_a dimension {rho_a.dim} != A input dim {v.v_a.dim_in}"
            )
        first = rho_a
    omega = DensityOperator(kron(first.matrix, omega_b.matrix))
    return ReversalChannel(v.product(), omega)


def kraus_apply_matrix(n: KrausChannel, x: np.ndarray) -> np.ndarray:
    """Σ K X K† on a raw matrix."""
    return sum(k @ x @ dagger(k) for k in n.kraus_ops)


def kraus_apply(n: KrausChannel, x: PositiveOperator) -> PositiveOperator:
    """Σ K X K†; trace preserving."""
    if x.dim != n.dim_in:
        raise ValidationError(
            f"kraus_apply: operator dim {x.dim} != channel input {n.dim_in}"
        )
    return _rewrap(x, kraus_apply_matrix(n, x.matrix))


def kraus_from_stinespring(v: Isometry, env_dim: int) -> KrausChannel:
    """Channel X ↦ Tr_env[V X V†] for V : d → d_sys ⊗ env (env the fast factor)."""
    if v.dim_out % env_dim:
        raise ValidationError(
            f"isometry output {v.dim_out} is not divisible by env dim {env_dim}"
        )
    d_sys = v.dim_out // env_dim
    blocks = v.matrix.reshape(d_sys, env_dim, v.dim_in)
    return KrausChannel(tuple(blocks[:, e, :] for e in range(env_dim)))


ChannelLike = Union[KrausChannel, ReversalChannel, Isometry, LocalIsometry]


def _channel_action(
    channel: ChannelLike | Callable[[np.ndarray], np.ndarray],
    dims: tuple[int, int] | None,
) -> tuple[Callable[[np.ndarray], np.ndarray], int, int]:
    if isinstance(channel, KrausChannel):
        return lambda x: kraus_apply_matrix(channel, x), channel.dim_in, channel.dim_out
    if isinstance(channel, ReversalChannel):
        iso = channel.isometry
        return (
            lambda x: reversal_apply_matrix(channel, x),
            iso.dim_out,
            iso.dim_in,
        )
    if isinstance(channel, LocalIsometry):
        channel = channel.product()
    if isinstance(channel, Isometry):
        v = channel.matrix
        return lambda x: v @ x @ dagger(v), channel.dim_in, channel.dim_out
    if callable(channel):
        if dims is None:
            raise ValidationError("callable channels need explicit dims=(d_in, d_out)")
        return channel, dims[0], dims[1]
    raise ValidationError(f"unsupported channel object {type(channel).__name__}")


def choi_matrix(
    channel: ChannelLike | Callable[[np.ndarray], np.ndarray],
    dims: tuple[int, int] | None = None,
) -> np.ndarray:
    """Choi operator (𝟙 ⊗ 𝒩)(|Ω⟩⟨Ω|), |Ω⟩ the unnormalized Σᵢ|ii⟩.

    The input copy is the slow factor; the channel output the fast one.
    Returned raw (possibly non-PSD) so non-CP maps can be certified too:
    the channel is CP iff the Choi matrix is PSD, and TP iff its partial
    trace over the output equals 𝟙.
    """
    action, d_in, d_out = _channel_action(channel, dims)
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    basis = np.zeros((d_in, d_in), dtype=complex)
    for i in range(d_in):
        for j in range(d_in):
            basis[i, j] = 1.0
            block = action(basis.copy())
            choi[i * d_out : (i + 1) * d_out, j * d_out : (j + 1) * d_out] = block
            basis[i, j] = 0.0
    return choi


class CptpReport(NamedTuple):
    """Complete-positivity / trace-preservation certificate for a channel."""

    completely_positive: bool
    trace_preserving: bool
    choi_min_eigenvalue: float
    trace_defect: float


def is_cptp(
    channel: ChannelLike | Callable[[np.ndarray], np.ndarray],
    dims: tuple[int, int] | None = None,
    *,
    atol: float = 1e-10,
) -> CptpReport:
    """Certify CP (Choi PSD) and TP (Tr_out of Choi equals 𝟙) within atol."""
    action, d_in, d_out = _channel_action(channel, dims)
    choi = choi_matrix(channel, dims)
    min_eig = float(np.linalg.eigvalsh((choi + dagger(choi)) / 2)[0])
    reduced = partial_trace(choi, (d_in, d_out), "a")
    defect = frobenius(reduced - np.eye(d_in))
    return CptpReport(min_eig >= -atol, defect <= atol, min_eig, defect)
