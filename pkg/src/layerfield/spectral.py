"""Eigendecomposition-backed functional calculus for small dense matrices.

Every coefficient matrix in this package is a small real matrix that must
be diagonalizable with a real spectrum. It is wrapped once in
:class:`SpectralMatrix`, which caches the eigensystem; scalar functions of
the matrix are then assembled as Q diag(g(lambda_i)) Q^{-1} acting on
vectors from the left.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ComplexSpectrumError,
    DefectiveMatrixError,
    DimMismatchError,
    EvalDomainError,
    IllConditionedEigvecsError,
)

# Relative Frobenius tolerance for Q diag(lambda) Q^{-1} reconstruction.
RECONSTRUCTION_RTOL = 1e-10

# Classification tolerance: |Im lambda| <= tol * (1 + |lambda|) counts as real.
REAL_SPECTRUM_TOL = 1e-9

# Default cap on cond(Q); beyond it the decomposition is rejected.
COND_CAP = 1e8

# cond(Q) beyond this means the eigenvectors are numerically dependent.
_DEFECTIVE_COND = 1e13

# exp() overflows around exp(709.78); stay under it with margin.
_EXP_ARG_MAX = 700.0


@dataclass(frozen=True)
class SpectralMatrix:
    """A square real matrix bundled with its eigendecomposition.

    ``entries == eigvecs @ diag(eigenvalues) @ eigvecs_inv`` holds to the
    reconstruction tolerance enforced at construction. Eigenvalues are
    sorted ascending with stable tie order, so decompositions are
    reproducible. Instances are immutable and safe to share.
    """

    entries: np.ndarray
    eigenvalues: np.ndarray
    eigvecs: np.ndarray
    eigvecs_inv: np.ndarray
    cond_q: float

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def projector(self, i: int) -> np.ndarray:
        """Spectral projector onto the i-th eigendirection, Q e_i e_i^T Q^{-1}."""
        return np.outer(self.eigvecs[:, i], self.eigvecs_inv[i, :])


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def eigendecompose(matrix, tol: float = REAL_SPECTRUM_TOL,
                   cond_cap: float = COND_CAP) -> SpectralMatrix:
    """Diagonalize a real square matrix with a real spectrum.

    Symmetric inputs take the symmetric solver path. Raises
    ComplexSpectrumError if any eigenvalue has an imaginary part beyond
    ``tol * (1 + |lambda|)``, DefectiveMatrixError when the eigenvectors are
    numerically dependent, and IllConditionedEigvecsError when cond(Q)
    exceeds ``cond_cap``.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatchError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n < 1:
        raise DimMismatchError("matrix must be at least 1x1")

    norm_a = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) <= 1e-12 * (1.0 + norm_a):
        w, q = np.linalg.eigh(a)
    else:
        w, q = np.linalg.eig(a)
        if np.iscomplexobj(w):
            bad = np.abs(w.imag) > tol * (1.0 + np.abs(w))
            if np.any(bad):
                raise ComplexSpectrumError(
                    f"eigenvalues {w[bad]} are not real within tol={tol}")
            w = w.real
            q = q.real

    order = np.argsort(w, kind="stable")
    w = w[order]
    q = q[:, order]

    cond_q = float(np.linalg.cond(q))
    if not np.isfinite(cond_q) or cond_q > _DEFECTIVE_COND:
        raise DefectiveMatrixError(
            f"eigenvector matrix is numerically singular (cond={cond_q:.3g})")
    if cond_q > cond_cap:
        raise IllConditionedEigvecsError(
            f"cond(Q)={cond_q:.3g} exceeds cap {cond_cap:.3g}")
    qinv = np.linalg.inv(q)

    recon = (q * w) @ qinv
    resid = np.linalg.norm(recon - a)
    if resid > RECONSTRUCTION_RTOL * max(1.0, norm_a):
        raise DefectiveMatrixError(
            f"reconstruction residual {resid:.3g} exceeds tolerance; "
            "matrix is too close to defective")
    if np.linalg.norm(q @ qinv - np.eye(n)) > RECONSTRUCTION_RTOL * n:
        raise DefectiveMatrixError("eigenvector inverse check failed")

    return SpectralMatrix(_freeze(a), _freeze(w), _freeze(q), _freeze(qinv),
                          cond_q)


def spectrum_in_halfplane(m: SpectralMatrix, side: str) -> bool:
    """True iff every eigenvalue is strictly positive ("right") or strictly
    negative ("left"). A zero eigenvalue fails both sides."""
    if side == "right":
        return bool(np.all(m.eigenvalues > 0.0))
    if side == "left":
        return bool(np.all(m.eigenvalues < 0.0))
    raise ValueError(f"side must be 'right' or 'left', got {side!r}")


def matrix_exp(m: SpectralMatrix, t: float) -> np.ndarray:
    """exp(t * m) via the cached eigensystem."""
    args = m.eigenvalues * t
    if np.any(args > _EXP_ARG_MAX):
        raise OverflowError(
            f"exp argument max(lambda*t)={args.max():.3g} exceeds {_EXP_ARG_MAX}")
    return (m.eigvecs * np.exp(args)) @ m.eigvecs_inv


def apply_scalar_fn(m: SpectralMatrix, g) -> np.ndarray:
    """Assemble g(m) = Q diag(g(lambda_i)) Q^{-1} for a scalar function g.

    Raises EvalDomainError if g fails or returns a non-finite value at any
    eigenvalue.
    """
    vals = np.empty(m.dim)
    for i, lam in enumerate(m.eigenvalues):
        try:
            v = float(g(float(lam)))
        except (ArithmeticError, ValueError) as exc:
            raise EvalDomainError(f"g undefined at eigenvalue {lam}: {exc}") from exc
        if not np.isfinite(v):
            raise EvalDomainError(f"g({lam}) is not finite")
        vals[i] = v
    return (m.eigvecs * vals) @ m.eigvecs_inv


def commutator_norm(a: SpectralMatrix, h: SpectralMatrix) -> float:
    """Frobenius norm of a h - h a."""
    if a.dim != h.dim:
        raise DimMismatchError(f"dims {a.dim} and {h.dim} differ")
    return float(np.linalg.norm(a.entries @ h.entries - h.entries @ a.entries))
