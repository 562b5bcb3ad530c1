"""Dense complex linear algebra: validated Hermitian eigendecompositions,
spectral matrix functions, Kronecker products and partial traces.

Global index convention: subsystem A is always the slow (leftmost, row-major)
tensor factor, so an operator on A :math:`\\otimes` B with dims ``(d_a, d_b)``
reshapes to ``(d_a, d_b, d_a, d_b)``.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

# Relative eigenvalue threshold below which spectrum is treated as zero for
# support projections and singular scalar functions.
SUPPORT_RTOL = 1e-12

# Default Hermiticity tolerance (relative Frobenius, with an absolute floor
# of 1 for near-zero matrices).
HERMITIAN_ATOL = 1e-10


class ValidationError(ValueError):
    """An input violates a structural precondition (shape, Hermiticity, ...)."""


class DomainError(ValueError):
    """A scalar function was applied outside its domain (e.g. log of 0)."""


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def frobenius(a: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(a, "fro"))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """(A + A†) / 2."""
    return (a + dagger(a)) / 2.0


def hermiticity_defect(a: np.ndarray) -> float:
    """‖A − A†‖_F relative to max(‖A‖_F, 1)."""
    return frobenius(a - dagger(a)) / max(frobenius(a), 1.0)


def as_square_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a square complex ndarray or raise ValidationError."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError(f"{name} must be a square matrix, got shape {m.shape}")
    return m


class HermitianEigen(NamedTuple):
    """Eigendecomposition of a Hermitian matrix.

    ``values`` are ascending; ``vectors`` has orthonormal columns so that
    ``vectors @ diag(values) @ vectors†`` reconstructs the input.  Within a
    degenerate cluster the eigenvector choice is gauge freedom and must not
    be relied on.
    """

    values: np.ndarray
    vectors: np.ndarray


def eigh(h: np.ndarray, *, atol: float = HERMITIAN_ATOL) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix, validated.

    Raises ValidationError when the Hermiticity defect ‖H − H†‖_F (relative)
    exceeds ``atol``.  The matrix is symmetrized before factorization so the
    result is deterministic for identical input bits.
    """
    m = as_square_matrix(h, "eigh input")
    defect = hermiticity_defect(m)
    if defect > atol:
        raise ValidationError(
            f"matrix is not Hermitian: relative defect {defect:.3e} > {atol:.1e}"
        )
    w, u = np.linalg.eigh(hermitian_part(m))
    return HermitianEigen(w, u)


def support_threshold(values: np.ndarray) -> float:
    """Eigenvalues at or below this are treated as zero (support cut)."""
    top = float(np.max(values)) if values.size else 0.0
    return SUPPORT_RTOL * max(top, 0.0)


def matrix_function(
    h: np.ndarray,
    f: Callable[[np.ndarray], np.ndarray],
    *,
    support_only: bool = False,
) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix spectrally: U f(λ) U†.

    With ``support_only`` the function is applied only to eigenvalues above
    the support threshold (relative ``SUPPORT_RTOL``); the rest of the
    spectrum maps to 0.  Functions singular at a retained eigenvalue raise
    DomainError.  The result is Hermitian for real-valued ``f``.
    """
    eig = eigh(h)
    w = eig.values
    fw = np.zeros_like(w)
    if support_only:
        keep = w > support_threshold(w)
    else:
        keep = np.ones_like(w, dtype=bool)
    if np.any(keep):
        vals = np.asarray(f(w[keep]), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DomainError(
                "scalar function is singular or undefined at a retained eigenvalue"
            )
        fw[keep] = vals
    u = eig.vectors
    return hermitian_part((u * fw) @ dagger(u))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with A as the slow factor."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace(
    m: np.ndarray, dims: tuple[int, int], keep: str
) -> np.ndarray:
    """Trace out one subsystem of an operator on A ⊗ B.

    ``dims = (d_a, d_b)`` with A as the slow index; ``keep`` is ``'a'``
    or ``'b'``.  Preserves the trace.
    """
    d_a, d_b = dims
    if d_a < 1 or d_b < 1:
        raise ValidationError(f"subsystem dims must be >= 1, got {dims}")
    mat = np.asarray(m, dtype=complex)
    n = d_a * d_b
    if mat.shape != (n, n):
        raise ValidationError(
            f"operator shape {mat.shape} does not match dims {dims} "
            f"(expected {(n, n)})"
        )
    t = mat.reshape(d_a, d_b, d_a, d_b)
    if keep == "a":
        return np.einsum("ijkj->ik", t)
    if keep == "b":
        return np.einsum("ijil->jl", t)
    raise ValidationError(f"keep must be 'a' or 'b', got {keep!r}")
