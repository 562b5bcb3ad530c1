"""Concrete generalized divergences D(ρ‖ζ).

Every kind takes a state as first argument and a positive-semidefinite
operator as second, satisfies the data-processing inequality on its stated
parameter range, and is invariant under isometric conjugation of both
arguments.  Values are reported in the configured log base (bits by
default).

Supported kinds and parameter ranges:

- ``umegaki``            : Tr[ρ(log ρ − log ζ)]
- ``petz_renyi``         : log Tr[ρ^α ζ^{1−α}] / (α−1),        α ∈ (0,1)∪(1,2]
- ``sandwiched_renyi``   : log Tr[(ζ^{(1−α)/2α} ρ ζ^{(1−α)/2α})^α] / (α−1),
                           α ∈ [1/2,1)∪(1,∞)
- ``geometric_renyi``    : log Tr[ζ^{1/2} (ζ^{−1/2} ρ ζ^{−1/2})^α ζ^{1/2}] / (α−1),
                           α ∈ (0,1)∪(1,2]
- ``max_relative``       : log λ_max(ζ^{−1/2} ρ ζ^{−1/2})
- ``hypothesis_testing`` : −log min{Tr[Λζ] : 0 ≤ Λ ≤ 𝟙, Tr[Λρ] ≥ 1−ε}

Kinds that require supp(ρ) ⊆ supp(ζ) (umegaki, Rényi kinds with α > 1,
max_relative) return +∞ with the support_violation flag when the condition
fails beyond tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    ValidationError,
    dagger,
    eigh,
    hermitian_part,
    support_threshold,
)
from .states import DensityOperator, PositiveOperator

KINDS = (
    "umegaki",
    "petz_renyi",
    "sandwiched_renyi",
    "geometric_renyi",
    "max_relative",
    "hypothesis_testing",
)

RENYI_KINDS = ("petz_renyi", "sandwiched_renyi", "geometric_renyi")

# Mass of ρ outside supp(ζ) above which the support condition is declared
# violated (and the value +∞).
SUPPORT_VIOLATION_TOL = 1e-10

# Numbers smaller than this are treated as an exact zero trace overlap
# (orthogonal supports → +∞ pole).
_ZERO = 1e-300


@dataclass(frozen=True)
class DivergenceSpec:
    """Selector plus parameters identifying one concrete divergence.

    ``base`` is the logarithm base, 2 (bits, default) or e (nats).
    ``alpha`` is required exactly for the Rényi kinds, ``epsilon`` exactly
    for hypothesis testing.  α = 1 is rejected; use ``umegaki``.
    """

    kind: str
    alpha: float | None = None
    epsilon: float | None = None
    base: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(
                f"unknown divergence kind {self.kind!r}; expected one of {KINDS}"
            )
        if not (self.base == 2.0 or self.base == math.e):
            raise ValidationError(f"log base must be 2 or e, got {self.base!r}")
        if self.kind in RENYI_KINDS:
            if self.alpha is None:
                raise ValidationError(f"{self.kind} requires alpha")
            a = float(self.alpha)
            if a == 1.0:
                raise ValidationError("alpha = 1 is excluded; use kind='umegaki'")
            if self.kind == "petz_renyi" and not 0.0 < a <= 2.0:
                raise ValidationError(
                    f"petz_renyi alpha must lie in (0,1)∪(1,2], got {a}"
                )
            if self.kind == "sandwiched_renyi" and a < 0.5:
                raise ValidationError(
                    f"sandwiched_renyi alpha must lie in [1/2,1)∪(1,∞), got {a}"
                )
            if self.kind == "geometric_renyi" and not 0.0 < a <= 2.0:
                raise ValidationError(
                    f"geometric_renyi alpha must lie in (0,1)∪(1,2], got {a}"
                )
        elif self.alpha is not None:
            raise ValidationError(f"{self.kind} takes no alpha")
        if self.kind == "hypothesis_testing":
            if self.epsilon is None or not 0.0 <= self.epsilon < 1.0:
                raise ValidationError(
                    f"hypothesis_testing requires epsilon in [0,1), got {self.epsilon}"
                )
        elif self.epsilon is not None:
            raise ValidationError(f"{self.kind} takes no epsilon")

    def label(self) -> str:
        bits = [self.kind]
        if self.alpha is not None:
            bits.append(f"alpha={self.alpha:g}")
        if self.epsilon is not None:
            bits.append(f"eps={self.epsilon:g}")
        return "[" + ",".join(bits) + "]"


@dataclass(frozen=True)
class DivergenceValue:
    """An extended-real divergence value with numeric diagnostics."""

    value: float
    support_violation: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def _spectral(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigendecomposition plus support mask for a PSD matrix."""
    w, u = eigh(m)
    keep = w > support_threshold(w)
    return w, u, keep


def _power(w, u, keep, p: float) -> np.ndarray:
    """Matrix power on the support, zero elsewhere."""
    fw = np.zeros_like(w)
    fw[keep] = np.power(w[keep], p)
    return (u * fw) @ dagger(u)


def _off_support_mass(rho_m: np.ndarray, u, keep) -> float:
    """Tr[Π⊥ ρ Π⊥] for Π⊥ the projector off the support."""
    lost = u[:, ~keep]
    if lost.size == 0:
        return 0.0
    return float(np.real(np.trace(dagger(lost) @ rho_m @ lost)))


def _umegaki_nats(rho_m, zeta_m):
    w_r, u_r, keep_r = _spectral(rho_m)
    w_z, u_z, keep_z = _spectral(zeta_m)
    mass = _off_support_mass(rho_m, u_z, keep_z)
    if mass > SUPPORT_VIOLATION_TOL:
        return math.inf, True, {"off_support_mass": mass}
    ent = float(np.sum(w_r[keep_r] * np.log(w_r[keep_r])))
    diag = np.real(np.einsum("ij,jk,ki->i", dagger(u_z), rho_m, u_z))
    cross = float(np.sum(np.log(w_z[keep_z]) * diag[keep_z]))
    return ent - cross, False, {"off_support_mass": mass}


def _petz_nats(rho_m, zeta_m, alpha):
    w_z, u_z, keep_z = _spectral(zeta_m)
    notes = {}
    if alpha > 1.0:
        mass = _off_support_mass(rho_m, u_z, keep_z)
        notes["off_support_mass"] = mass
        if mass > SUPPORT_VIOLATION_TOL:
            return math.inf, True, notes
    w_r, u_r, keep_r = _spectral(rho_m)
    rho_a = _power(w_r, u_r, keep_r, alpha)
    zeta_b = _power(w_z, u_z, keep_z, 1.0 - alpha)
    q = float(np.real(np.trace(rho_a @ zeta_b)))
    notes["trace_term"] = q
    if q < _ZERO:
        return math.inf, False, notes
    return math.log(q) / (alpha - 1.0), False, notes


def _sandwiched_nats(rho_m, zeta_m, alpha):
    w_z, u_z, keep_z = _spectral(zeta_m)
    notes = {}
    if alpha > 1.0:
        mass = _off_support_mass(rho_m, u_z, keep_z)
        notes["off_support_mass"] = mass
        if mass > SUPPORT_VIOLATION_TOL:
            return math.inf, True, notes
    s = (1.0 - alpha) / (2.0 * alpha)
    z_s = _power(w_z, u_z, keep_z, s)
    inner = hermitian_part(z_s @ rho_m @ z_s)
    lam = np.linalg.eigvalsh(inner)
    # fractional powers blow round-off in phantom zero eigenvalues up to
    # ~eps^alpha, so cut at the support threshold like everywhere else
    lam = lam[lam > support_threshold(lam)]
    q = float(np.sum(np.power(lam, alpha)))
    notes["trace_term"] = q
    if q < _ZERO:
        return math.inf, False, notes
    return math.log(q) / (alpha - 1.0), False, notes


def _geometric_nats(rho_m, zeta_m, alpha):
    w_z, u_z, keep_z = _spectral(zeta_m)
    notes = {}
    if alpha > 1.0:
        mass = _off_support_mass(rho_m, u_z, keep_z)
        notes["off_support_mass"] = mass
        if mass > SUPPORT_VIOLATION_TOL:
            return math.inf, True, notes
    z_neg = _power(w_z, u_z, keep_z, -0.5)
    g = hermitian_part(z_neg @ rho_m @ z_neg)
    w_g, u_g, keep_g = _spectral(g)
    g_a = _power(w_g, u_g, keep_g, alpha)
    q = float(np.real(np.trace(zeta_m @ g_a)))
    notes["trace_term"] = q
    if q < _ZERO:
        return math.inf, False, notes
    return math.log(q) / (alpha - 1.0), False, notes


def _max_relative_nats(rho_m, zeta_m):
    w_z, u_z, keep_z = _spectral(zeta_m)
    mass = _off_support_mass(rho_m, u_z, keep_z)
    notes = {"off_support_mass": mass}
    if mass > SUPPORT_VIOLATION_TOL:
        return math.inf, True, notes
    z_neg = _power(w_z, u_z, keep_z, -0.5)
    x = hermitian_part(z_neg @ rho_m @ z_neg)
    lam_max = float(np.linalg.eigvalsh(x)[-1])
    notes["lambda_max"] = lam_max
    if lam_max < _ZERO:
        return math.inf, False, notes
    return math.log(lam_max), False, notes


def _neyman_pearson_matrices(
    rho_m: np.ndarray, zeta_m: np.ndarray, epsilon: float
) -> tuple[np.ndarray, float, float, float]:
    """Optimal test Λ = P_{>t} + c·P_{=t} over ρ − tζ, located by bisection.

    Returns (Λ, β = Tr[Λζ], achieved Tr[Λρ], t).  The boundary eigenspace
    P_{=t} is resolved as the eigenvalues within a band whose width tracks
    the final bisection bracket; the fractional weight c saturates the
    constraint Tr[Λρ] = 1 − ε on it.
    """
    target = 1.0 - epsilon
    dim = rho_m.shape[0]
    w_z = np.linalg.eigvalsh(zeta_m)
    pos = w_z[w_z > support_threshold(w_z)]
    lam_min_pos = float(pos.min()) if pos.size else 1.0
    lam_max_z = float(w_z.max()) if w_z.size else 0.0
    w_r = np.linalg.eigvalsh(rho_m)
    t_lo, t_hi = 0.0, float(w_r.max()) / lam_min_pos + 1.0

    def positive_mass(t: float) -> float:
        w, u = np.linalg.eigh(hermitian_part(rho_m - t * zeta_m))
        tol = 1e-13 * max(1.0, float(np.abs(w).max()))
        cols = u[:, w > tol]
        if cols.size == 0:
            return 0.0
        return float(np.real(np.trace(dagger(cols) @ rho_m @ cols)))

    if positive_mass(t_hi) >= target - 1e-9:
        t_star, width = t_hi, 0.0
    else:
        for _ in range(200):
            if t_hi - t_lo <= 1e-12:
                break
            t_mid = 0.5 * (t_lo + t_hi)
            if positive_mass(t_mid) >= target:
                t_lo = t_mid
            else:
                t_hi = t_mid
        t_star, width = t_lo, t_hi - t_lo

    w, u = np.linalg.eigh(hermitian_part(rho_m - t_star * zeta_m))
    band = width * max(lam_max_z, 1.0) + 1e-12
    above = u[:, w > band]
    boundary = u[:, np.abs(w) <= band]
    p_above = above @ dagger(above) if above.size else np.zeros((dim, dim), complex)
    p_bnd = (
        boundary @ dagger(boundary) if boundary.size else np.zeros((dim, dim), complex)
    )
    mass_above = float(np.real(np.trace(p_above @ rho_m)))
    mass_bnd = float(np.real(np.trace(p_bnd @ rho_m)))
    if mass_bnd > 1e-14:
        c = min(max((target - mass_above) / mass_bnd, 0.0), 1.0)
    else:
        c = 0.0
    test = hermitian_part(p_above + c * p_bnd)
    beta = max(float(np.real(np.trace(test @ zeta_m))), 0.0)
    achieved = float(np.real(np.trace(test @ rho_m)))
    return test, beta, achieved, t_star


def neyman_pearson_test(
    rho: DensityOperator, zeta: PositiveOperator, epsilon: float
) -> tuple[PositiveOperator, float]:
    """Minimal-β test operator for the hypothesis-testing divergence.

    The returned Λ satisfies 0 ≤ Λ ≤ 𝟙 and Tr[Λρ] ≥ 1 − ε (within numeric
    slack); β = Tr[Λζ] is minimal over all such tests.
    """
    if rho.dim != zeta.dim:
        raise ValidationError(
            f"neyman_pearson_test: dimension mismatch {rho.dim} vs {zeta.dim}"
        )
    if not 0.0 <= epsilon < 1.0:
        raise ValidationError(f"epsilon must lie in [0,1), got {epsilon}")
    test, beta, _, _ = _neyman_pearson_matrices(rho.matrix, zeta.matrix, epsilon)
    return PositiveOperator(test), beta


def _compute_nats(spec: DivergenceSpec, rho_m, zeta_m):
    if spec.kind == "umegaki":
        return _umegaki_nats(rho_m, zeta_m)
    if spec.kind == "petz_renyi":
        return _petz_nats(rho_m, zeta_m, float(spec.alpha))
    if spec.kind == "sandwiched_renyi":
        return _sandwiched_nats(rho_m, zeta_m, float(spec.alpha))
    if spec.kind == "geometric_renyi":
        return _geometric_nats(rho_m, zeta_m, float(spec.alpha))
    if spec.kind == "max_relative":
        return _max_relative_nats(rho_m, zeta_m)
    _, beta, achieved, t = _neyman_pearson_matrices(
        rho_m, zeta_m, float(spec.epsilon)
    )
    notes = {"beta": beta, "constraint_mass": achieved, "threshold": t}
    if beta < _ZERO:
        return math.inf, False, notes
    return -math.log(beta), False, notes


def divergence_value(spec: DivergenceSpec, rho_m: np.ndarray, zeta_m: np.ndarray) -> float:
    """Fast path on raw matrices (assumed valid); value only, in spec.base."""
    nats, _, _ = _compute_nats(spec, rho_m, zeta_m)
    return nats / math.log(spec.base) if math.isfinite(nats) else nats


def product_second_arg_objective(
    spec: DivergenceSpec,
    rho_m: np.ndarray,
    first_m: np.ndarray,
    dims: tuple[int, int],
):
    """σ_B ↦ D(ρ ‖ first ⊗ σ_B) with per-state work hoisted out of the loop.

    Used by the inner minimizers, which evaluate thousands of σ_B against a
    fixed ρ and first factor.  Umegaki splits the logarithm over the tensor
    factors; sandwiched α = 2 reduces the trace term to a squared Frobenius
    norm.  Other kinds fall back to the generic evaluator.  Values match
    ``divergence_value`` up to support-threshold rounding on the product
    spectrum (final witnesses are always re-evaluated generically).
    """
    from .linalg import kron, partial_trace  # local to avoid cycle at import

    d_a, d_b = dims
    log_norm = math.log(spec.base)

    if spec.kind == "umegaki":
        w_r = np.linalg.eigvalsh(rho_m)
        kept_r = w_r > support_threshold(w_r)
        entropy = float(np.sum(w_r[kept_r] * np.log(w_r[kept_r])))
        rho_a = partial_trace(rho_m, dims, "a")
        rho_b = partial_trace(rho_m, dims, "b")
        w_f, u_f, keep_f = _spectral(first_m)
        diag_f = np.real(np.einsum("ij,jk,ki->i", dagger(u_f), rho_a, u_f))
        if float(np.sum(diag_f[~keep_f])) > SUPPORT_VIOLATION_TOL:
            return lambda sigma_m: math.inf
        cross_first = float(np.sum(np.log(w_f[keep_f]) * diag_f[keep_f]))

        def objective(sigma_m: np.ndarray) -> float:
            w, u = np.linalg.eigh(sigma_m)
            keep = w > support_threshold(w)
            diag = np.real(np.einsum("ij,jk,ki->i", dagger(u), rho_b, u))
            if float(np.sum(diag[~keep])) > SUPPORT_VIOLATION_TOL:
                return math.inf
            cross = cross_first + float(np.sum(np.log(w[keep]) * diag[keep]))
            return (entropy - cross) / log_norm

        return objective

    if spec.kind == "sandwiched_renyi":
        alpha = float(spec.alpha)
        s = (1.0 - alpha) / (2.0 * alpha)
        w_f, u_f, keep_f = _spectral(first_m)
        rho_b = partial_trace(rho_m, dims, "b")
        if alpha > 1.0:
            rho_a = partial_trace(rho_m, dims, "a")
            diag_f = np.real(np.einsum("ij,jk,ki->i", dagger(u_f), rho_a, u_f))
            if float(np.sum(diag_f[~keep_f])) > SUPPORT_VIOLATION_TOL:
                return lambda sigma_m: math.inf
        first_s = _power(w_f, u_f, keep_f, s)

        def objective(sigma_m: np.ndarray) -> float:
            w, u = np.linalg.eigh(sigma_m)
            keep = w > support_threshold(w)
            if alpha > 1.0 and not keep.all():
                # a rank-deficient sigma cuts the support: the masked inverse
                # power must not hide the resulting divergence
                diag = np.real(np.einsum("ij,jk,ki->i", dagger(u), rho_b, u))
                if float(np.sum(diag[~keep])) > SUPPORT_VIOLATION_TOL:
                    return math.inf
            fw = np.zeros_like(w)
            fw[keep] = np.power(w[keep], s)
            sigma_s = (u * fw) @ dagger(u)
            k = kron(first_s, sigma_s)
            inner = hermitian_part(k @ rho_m @ k)
            if alpha == 2.0:
                q = float(np.sum(np.abs(inner) ** 2))
            else:
                lam = np.linalg.eigvalsh(inner)
                lam = lam[lam > support_threshold(lam)]
                q = float(np.sum(np.power(lam, alpha)))
            if q < _ZERO:
                return math.inf
            return math.log(q) / ((alpha - 1.0) * log_norm)

        return objective

    def objective(sigma_m: np.ndarray) -> float:
        return divergence_value(spec, rho_m, kron(first_m, sigma_m))

    return objective


def fixed_second_arg_objective(spec: DivergenceSpec, zeta_m: np.ndarray):
    """ρ̂ ↦ D(ρ̂ ‖ ζ) with the ζ-side spectral work hoisted out of the loop.

    Used by the smoothing searches, which score many candidates against one
    frozen second argument.
    """
    log_norm = math.log(spec.base)
    w_z, u_z, keep_z = _spectral(zeta_m)
    lost = u_z[:, ~keep_z]

    if spec.kind == "umegaki":
        log_zeta = (u_z[:, keep_z] * np.log(w_z[keep_z])) @ dagger(u_z[:, keep_z])

        def objective(rho_m: np.ndarray) -> float:
            if lost.size and float(
                np.real(np.trace(dagger(lost) @ rho_m @ lost))
            ) > SUPPORT_VIOLATION_TOL:
                return math.inf
            w_r = np.linalg.eigvalsh(rho_m)
            kept = w_r > support_threshold(w_r)
            entropy = float(np.sum(w_r[kept] * np.log(w_r[kept])))
            cross = float(np.real(np.trace(rho_m @ log_zeta)))
            return (entropy - cross) / log_norm

        return objective

    if spec.kind == "sandwiched_renyi":
        alpha = float(spec.alpha)
        s = (1.0 - alpha) / (2.0 * alpha)
        z_s = _power(w_z, u_z, keep_z, s)

        def objective(rho_m: np.ndarray) -> float:
            if alpha > 1.0 and lost.size:
                mass = float(np.real(np.trace(dagger(lost) @ rho_m @ lost)))
                if mass > SUPPORT_VIOLATION_TOL:
                    return math.inf
            inner = hermitian_part(z_s @ rho_m @ z_s)
            if alpha == 2.0:
                q = float(np.sum(np.abs(inner) ** 2))
            else:
                lam = np.linalg.eigvalsh(inner)
                lam = lam[lam > support_threshold(lam)]
                q = float(np.sum(np.power(lam, alpha)))
            if q < _ZERO:
                return math.inf
            return math.log(q) / ((alpha - 1.0) * log_norm)

        return objective

    def objective(rho_m: np.ndarray) -> float:
        return divergence_value(spec, rho_m, zeta_m)

    return objective


def evaluate(
    spec: DivergenceSpec, rho: DensityOperator, zeta: PositiveOperator
) -> DivergenceValue:
    """Evaluate the divergence on validated operators."""
    if rho.dim != zeta.dim:
        raise ValidationError(
            f"evaluate: dimension mismatch {rho.dim} vs {zeta.dim}"
        )
    nats, violated, notes = _compute_nats(spec, rho.matrix, zeta.matrix)
    value = nats / math.log(spec.base) if math.isfinite(nats) else nats
    return DivergenceValue(value, violated, notes)
