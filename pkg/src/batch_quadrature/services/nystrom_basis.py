"""Nyström test functions for kernel recombination.

From M landmarks the kernel matrix K(X_nys, X_nys) = UΛUᵀ gives test
functions φ_i(x) = u_iᵀK(X_nys, x) and the low-rank kernel
K₀(x, y) = Σ_i λ_i⁻¹ φ_i(x) φ_i(y).
"""

import logging

import numpy as np
from scipy.linalg import eigh

from batch_quadrature.exceptions import NystromError
from batch_quadrature.models import Kernel, NystromBasis

logger = logging.getLogger(__name__)

EIGENVALUE_FLOOR = 1e-12
# Diagonal jitter relative to the mean landmark variance, as in the GP fit.
NYSTROM_JITTER = 1e-8


def build(kernel: Kernel, X_nys: np.ndarray, n_test: int) -> NystromBasis:
    """Eigendecompose the landmark kernel matrix (+jitter) and keep the top pairs.

    Args:
        kernel: Symmetric PSD kernel.
        X_nys: Landmarks (M, d).
        n_test: Number of test functions wanted.

    Returns:
        A basis with at most n_test test functions; fewer if λ_i ≤ λ_1·1e-12.

    Raises:
        NystromError: If M < n_test.
    """
    landmarks = np.atleast_2d(np.asarray(X_nys, dtype=float))
    m = landmarks.shape[0]
    if m < n_test:
        raise NystromError.too_few_landmarks(m, n_test)
    empty = NystromBasis(landmarks, np.empty(0), np.empty((m, 0)), kernel)
    if n_test <= 0:
        return empty

    gram = kernel(landmarks, landmarks)
    gram = 0.5 * (gram + gram.T)
    gram[np.diag_indices_from(gram)] += NYSTROM_JITTER * max(float(np.mean(np.diag(gram))), 0.0)
    eigvals, eigvecs = eigh(gram, subset_by_index=[m - n_test, m - 1])
    eigvals, eigvecs = eigvals[::-1], eigvecs[:, ::-1]
    if eigvals[0] <= 0:
        logger.warning("Landmark kernel matrix is zero; Nyström basis is empty")
        return empty
    keep = eigvals > eigvals[0] * EIGENVALUE_FLOOR
    if not np.all(keep):
        logger.debug(f"Nyström basis truncated to {int(keep.sum())} of {n_test} test function(s)")
    return NystromBasis(landmarks, eigvals[keep], np.ascontiguousarray(eigvecs[:, keep]), kernel)


def eval_test_functions(basis: NystromBasis, X: np.ndarray) -> np.ndarray:
    """φ_i(X) = u_iᵀK(X_nys, X), shape (k, |X|)."""
    points = np.atleast_2d(np.asarray(X, dtype=float))
    if basis.is_empty:
        return np.empty((0, points.shape[0]))
    return basis.eigvecs.T @ basis.kernel(basis.landmarks, points)


def approx_kernel(basis: NystromBasis, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """K₀(A_i, B_j) = Σ λ⁻¹ φ(A_i) φ(B_j)."""
    phi_a = eval_test_functions(basis, A)
    phi_b = eval_test_functions(basis, B)
    return phi_a.T @ (phi_b / basis.eigvals[:, None])


def approx_kernel_diag(basis: NystromBasis, X: np.ndarray) -> np.ndarray:
    """K₀(x, x) per point."""
    phi = eval_test_functions(basis, X)
    return np.sum(phi**2 / basis.eigvals[:, None], axis=0)


def residual_sqrt_diag(basis: NystromBasis, kernel: Kernel, X: np.ndarray) -> np.ndarray:
    """√max(K(x, x) − K₀(x, x), 0) per point."""
    residual = kernel.diag(X) - approx_kernel_diag(basis, X)
    return np.sqrt(np.maximum(residual, 0.0))
