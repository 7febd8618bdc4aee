"""Dense symmetric-matrix utilities.

Spectral pseudo-inverse, pseudo-determinant and PSD square roots all come from one
eigendecomposition (`factorize`). Kronecker products and the vec operator follow the
column-major convention, so that vec(A X B) = (B^T kron A) vec(X).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from src.utils.errors import InvalidInput, NotPSD, NumericalFailure
from src.utils.logger import get_logger

logger = get_logger(__name__)

SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class SpectralFactorization:
    """A = Q diag(eigenvalues) Q^T with eigenvalues in nonincreasing order.

    `rank` counts eigenvalues whose magnitude exceeds `tolerance`; only those are
    inverted, square-rooted or included in the pseudo-determinant.
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank: int
    tolerance: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def retained(self) -> np.ndarray:
        return np.abs(self.eigenvalues) > self.tolerance

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T

    def _map_retained(self, fn) -> np.ndarray:
        mask = self.retained
        q = self.eigenvectors[:, mask]
        return (q * fn(self.eigenvalues[mask])) @ q.T

    def _require_psd(self, op: str) -> None:
        if np.any(self.eigenvalues[self.retained] < 0.0):
            worst = float(self.eigenvalues[self.retained].min())
            raise NotPSD(f"{op}: retained eigenvalue {worst:.3e} is negative")


def as_symmetric(a, name: str = "matrix") -> np.ndarray:
    """Validate that `a` is a square real matrix, symmetric to 1e-12 relative, and return it symmetrized."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise InvalidInput(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    scale = max(1.0, float(np.linalg.norm(arr, np.inf)))
    asym = float(np.max(np.abs(arr - arr.T)))
    if asym > SYMMETRY_RTOL * scale:
        raise InvalidInput(f"{name} is not symmetric (max |A - A^T| = {asym:.3e})")
    return 0.5 * (arr + arr.T)


# eigh leaves null eigenvalues of a projection at a few ulps of the largest one
RANK_SAFETY = 100.0


def default_rtol(n: int) -> float:
    """Relative rank tolerance RANK_SAFETY * n * machine epsilon (multiplied by max |eigenvalue|)."""
    return RANK_SAFETY * n * np.finfo(float).eps


def _eig_from_svd(a: np.ndarray):
    # symmetric A = U S V^T; the sign of u_i . v_i recovers the sign of each eigenvalue
    u, s, vt = scipy.linalg.svd(a, lapack_driver="gesvd")
    signs = np.sign(np.sum(u * vt.T, axis=0))
    signs[signs == 0] = 1.0
    return s * signs, u


def factorize(a, rtol: Optional[float] = None) -> SpectralFactorization:
    """Eigendecompose a symmetric matrix.

    Parameters:
        a: n x n real symmetric matrix.
        rtol: relative rank tolerance; eigenvalues with |lambda| <= rtol * max|lambda|
            are treated as zero. Defaults to `default_rtol(n)`.

    Returns:
        SpectralFactorization with nonincreasing eigenvalues.
    """
    sym = as_symmetric(a)
    n = sym.shape[0]
    try:
        values, vectors = scipy.linalg.eigh(sym)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.warning(f"eigh failed on {n}x{n} matrix ({e}), falling back to SVD")
        try:
            values, vectors = _eig_from_svd(sym)
        except (np.linalg.LinAlgError, ValueError) as e2:
            raise NumericalFailure(f"eigendecomposition did not converge: {e2}") from e2

    order = np.argsort(values)[::-1]
    values = np.ascontiguousarray(values[order])
    vectors = np.ascontiguousarray(vectors[:, order])

    scale = float(np.max(np.abs(values))) if n else 0.0
    tol = (default_rtol(n) if rtol is None else float(rtol)) * scale
    rank = int(np.count_nonzero(np.abs(values) > tol))
    return SpectralFactorization(eigenvalues=values, eigenvectors=vectors, rank=rank, tolerance=tol)


def pseudo_inverse(f: SpectralFactorization) -> np.ndarray:
    """Moore-Penrose pseudo-inverse Q diag(1/lambda on retained) Q^T."""
    return f._map_retained(lambda lam: 1.0 / lam)


def log_pseudo_det(f: SpectralFactorization) -> float:
    """Sum of log eigenvalues above tolerance. Zero for the zero matrix."""
    f._require_psd("log_pseudo_det")
    return float(np.sum(np.log(f.eigenvalues[f.retained])))


def psd_sqrt(f: SpectralFactorization) -> np.ndarray:
    f._require_psd("psd_sqrt")
    return f._map_retained(np.sqrt)


def psd_inv_sqrt(f: SpectralFactorization) -> np.ndarray:
    """((A^+)^(1/2)): shares the null space of A."""
    f._require_psd("psd_inv_sqrt")
    return f._map_retained(lambda lam: 1.0 / np.sqrt(lam))


@dataclass(frozen=True)
class CommutationMatrix:
    """The mn x mn permutation P with P vec(X) = vec(X^T) for m x n matrices X.

    Stored as the index permutation `perm`, so that (P y)[k] = y[perm[k]].
    """
    m: int
    n: int
    perm: np.ndarray

    @property
    def size(self) -> int:
        return self.m * self.n

    @property
    def T(self) -> "CommutationMatrix":
        return commutation_matrix(self.n, self.m)

    def apply(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.shape[0] != self.size:
            raise InvalidInput(f"commutation matrix of size {self.size} applied to length {y.shape[0]}")
        return y[self.perm]

    def __matmul__(self, other):
        return self.apply(other)

    def toarray(self) -> np.ndarray:
        dense = np.zeros((self.size, self.size))
        dense[np.arange(self.size), self.perm] = 1.0
        return dense


def commutation_matrix(m: int, n: int) -> CommutationMatrix:
    if int(m) < 1 or int(n) < 1:
        raise InvalidInput(f"commutation matrix needs m, n >= 1, got ({m}, {n})")
    m, n = int(m), int(n)
    perm = np.arange(m * n).reshape((m, n), order="F").ravel()
    return CommutationMatrix(m=m, n=n, perm=perm)


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def vec(x) -> np.ndarray:
    """Column-major vectorization: stacks the columns of x."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr.copy()
    return arr.ravel(order="F")


def unvec(y, rows: int, cols: int) -> np.ndarray:
    """Inverse of `vec` for a rows x cols matrix."""
    arr = np.asarray(y, dtype=float)
    if arr.size != rows * cols:
        raise InvalidInput(f"cannot reshape length {arr.size} into {rows}x{cols}")
    return arr.reshape((rows, cols), order="F")
