"""Dense complex-matrix primitives: log-determinants, pseudoinverse, LQ.

All rates produced downstream are in bits, so every log here is base 2.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation, DomainError, PreconditionError

#: Singular values below RANK_TOL * sigma_max are treated as exact zeros.
RANK_TOL = 1e-10

#: Relative asymmetry above which a matrix is rejected as non-Hermitian.
HERMITIAN_TOL = 1e-10

#: Eigenvalues of a nominally PSD matrix may undershoot zero by this
#: fraction of the largest eigenvalue before the input is rejected.
PSD_CLAMP_TOL = 1e-9

LOG2E = float(np.log2(np.e))


def as_cmatrix(a) -> np.ndarray:
    """Return ``a`` as a 2-D complex128 array without copying when possible."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ContractViolation(f"expected a 2-D matrix, got shape {np.shape(a)}")
    return m


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    """Check max|A - A^H| <= tol * max|A| (a zero matrix counts as Hermitian)."""
    if a.shape[0] != a.shape[1]:
        return False
    scale = np.abs(a).max()
    if scale == 0.0:
        return True
    return float(np.abs(a - a.conj().T).max()) <= tol * scale


def hermitize(a: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, killing round-off asymmetry."""
    return 0.5 * (a + a.conj().T)


def logdet_hermitian_psd(a) -> float:
    """log2 det(A) for a Hermitian positive semidefinite matrix.

    Cholesky is attempted first; if it fails (the matrix is singular or
    round-off pushed an eigenvalue slightly negative) the eigenvalues are
    computed and clamped at -PSD_CLAMP_TOL * lambda_max.  Anything more
    negative is a genuine domain violation and is reported as such.
    """
    m = as_cmatrix(a)
    if m.shape[0] != m.shape[1]:
        raise ContractViolation(f"matrix is {m.shape[0]}x{m.shape[1]}, not square")
    if not is_hermitian(m):
        raise ContractViolation("matrix is not Hermitian within tolerance")
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        pass
    else:
        return float(2.0 * np.sum(np.log2(np.real(np.diag(chol)))))

    eigvals = np.linalg.eigvalsh(m)
    lam_max = float(eigvals.max(initial=0.0))
    floor = -PSD_CLAMP_TOL * max(lam_max, 0.0)
    lam_min = float(eigvals.min())
    if lam_min < floor:
        raise DomainError(
            f"eigenvalue {lam_min:.6e} below PSD tolerance {floor:.6e}"
        )
    clamped = np.clip(eigvals, 0.0, None)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log2(clamped)))


def pseudo_inverse(a, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse via SVD.

    Singular values below ``rank_tol * sigma_max`` are treated as zero, so
    a zero matrix legally maps to the zero matrix of transposed shape.
    """
    if rank_tol <= 0.0:
        raise PreconditionError(f"rank_tol must be positive, got {rank_tol}")
    m = as_cmatrix(a)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]), dtype=np.complex128)
    inv_s = np.where(s > rank_tol * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (vh.conj().T * inv_s) @ u.conj().T


def lq_decompose(h) -> tuple[np.ndarray, np.ndarray]:
    """LQ factorization H = L Q of a 2x2 channel matrix.

    L is lower triangular with real nonnegative diagonal and Q is unitary,
    so L(1,1) = ||h1|| and the normalized cross and direct gains of the
    second user are L(2,1)/L(1,1) and L(2,2)/L(1,1).
    """
    m = as_cmatrix(h)
    if m.shape != (2, 2):
        raise ContractViolation(f"LQ transform expects a 2x2 matrix, got {m.shape}")
    if np.abs(m[0]).max() == 0.0:
        raise PreconditionError(
            "first row of H is zero; swap the user roles and retry"
        )
    # H^H = Q~ R with R upper triangular gives H = R^H Q~^H.
    qt, r = np.linalg.qr(m.conj().T)
    # Rotate the phases so diag(R) is real and nonnegative.
    d = np.diag(r).copy()
    phase = np.where(np.abs(d) > 0, np.conj(d) / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    r = phase[:, None] * r
    qt = qt * np.conj(phase)[None, :]
    return r.conj().T, qt.conj().T
