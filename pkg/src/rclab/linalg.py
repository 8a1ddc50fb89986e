"""Minimal linear-algebra kernels shared by the rest of the package.

Three operations cover every need of the lab: CSR matrix-vector products
(the inner kernel of both network integrators), symmetric positive definite
solves (the ridge normal equations), and spectral-radius estimation (the
normalisation of the recurrent matrix and the continuation parameter).

Everything is float64.  Long chaotic integrations amplify rounding, so
single precision is not supported anywhere in the package.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.linalg import lapack

from ._kernels import csr_matvec as _kernel_matvec

__all__ = [
    "SparseMatrix",
    "SingularMatrixError",
    "EstimationError",
    "sparse_matvec",
    "spd_solve",
    "spectral_radius",
]

# Above this order the spectral radius falls back to ARPACK; below it a dense
# QR eigenvalue sweep is cheap, exact to rounding, and -- unlike any Krylov
# scheme -- immune to the pathological eigenvalue conditioning of nonnormal
# matrices (random triangular matrices defeat both hand-rolled restarted
# Arnoldi and ARPACK at the accuracy required here).
_DENSE_EIG_CUTOFF = 2048


class SingularMatrixError(ValueError):
    """A factorisation hit a non-positive pivot.

    ``pivot`` is the zero-based index of the offending leading minor.
    """

    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


class EstimationError(RuntimeError):
    """Spectral-radius estimation failed to converge.

    ``last_estimate`` carries the best value seen before giving up (may be
    None when no Ritz value converged at all).
    """

    def __init__(self, msg, last_estimate=None):
        super().__init__(msg)
        self.last_estimate = last_estimate


@dataclass(frozen=True)
class SparseMatrix:
    """Immutable CSR matrix (float64 values, int32 indices).

    At most one stored value per position, all indices in range, all values
    finite; ``from_coo`` enforces this.  Instances are safe to share across
    threads; ``scaled`` reuses the index arrays so scaled copies share their
    sparsity pattern with the original by construction.
    """

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.data):
            arr.flags.writeable = False

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int32)
        cols = np.asarray(cols, dtype=np.int32)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape):
            raise ValueError("rows, cols and values must have equal length")
        if n_rows < 1 or n_cols < 1:
            raise ValueError("matrix dimensions must be positive")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise ValueError("column index out of range")
        if not np.all(np.isfinite(values)):
            raise ValueError("matrix values must be finite")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if np.any(dup):
                raise ValueError("duplicate (row, col) entry")
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
        return cls(
            n_rows, n_cols, indptr.astype(np.int32), np.ascontiguousarray(cols), values
        )

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        rows, cols = np.nonzero(a)
        return cls.from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls.from_coo(n, n, idx, idx, np.ones(n))

    @property
    def nnz(self):
        return int(self.data.size)

    def scaled(self, factor):
        """Return ``factor * self`` sharing this matrix's index arrays."""
        data = (float(factor) * self.data).copy()
        data.flags.writeable = False
        return SparseMatrix(self.n_rows, self.n_cols, self.indptr, self.indices, data)

    def to_dense(self):
        return self.to_scipy().toarray()

    def to_scipy(self):
        return scipy.sparse.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.n_rows, self.n_cols)
        )


def sparse_matvec(m, v):
    """Return ``m @ v`` (exact up to rounding)."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.shape != (m.n_cols,):
        raise ValueError(f"vector length {v.shape} does not match {m.n_cols} columns")
    return _kernel_matvec(m.indptr, m.indices, m.data, v)


def spd_solve(a, b):
    """Solve ``a @ x = b`` for symmetric positive definite ``a``.

    Uses a Cholesky factorisation (LAPACK dpotrf/dpotrs).  ``b`` may be a
    vector or a matrix of right-hand sides; the result has the same shape.

    Raises
    ------
    ValueError
        If ``a`` is not square, is asymmetric beyond 1e-10 relative, or the
        shapes do not line up.
    SingularMatrixError
        If a non-positive pivot is met, i.e. ``a`` is not positive definite.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.abs(a).max()
    if scale > 0 and np.abs(a - a.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric to 1e-10 relative")
    b = np.ascontiguousarray(b, dtype=np.float64)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    if b.shape[0] != a.shape[0]:
        raise ValueError("right-hand side has incompatible row count")

    c, info = lapack.dpotrf(a, lower=1)
    if info > 0:
        raise SingularMatrixError(
            f"matrix is not positive definite: leading minor of order {info} "
            f"(pivot index {info - 1}) is not positive",
            pivot=info - 1,
        )
    if info < 0:
        raise ValueError(f"invalid argument {-info} to dpotrf")
    x, info = lapack.dpotrs(c, b, lower=1)
    if info != 0:
        raise ValueError(f"dpotrs failed with info={info}")
    return x[:, 0] if vector else x


def _arpack_radius(m, tol, max_iter):
    v0 = np.random.default_rng(0x5D).uniform(-1.0, 1.0, m.n_rows)
    try:
        vals = scipy.sparse.linalg.eigs(
            m.to_scipy(), k=2, which="LM", tol=tol, maxiter=max_iter,
            v0=v0, return_eigenvectors=False,
        )
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        last = float(np.abs(exc.eigenvalues).max()) if len(exc.eigenvalues) else None
        raise EstimationError(
            f"ARPACK did not converge within {max_iter} iterations "
            f"(last estimate {last})",
            last_estimate=last,
        ) from exc
    return float(np.abs(vals).max())


def spectral_radius(m, tol=1e-10, max_iter=2000):
    """Estimate the magnitude of the largest eigenvalue of a square matrix.

    For orders up to a cutoff the full spectrum is computed densely (QR),
    which converges for complex dominant pairs and is robust on heavily
    nonnormal matrices; beyond the cutoff an ARPACK Krylov iteration with a
    fixed deterministic start vector is used with the given ``tol`` and
    ``max_iter``.

    Raises
    ------
    EstimationError
        On non-convergence, carrying the last estimate seen.
    """
    if m.n_rows != m.n_cols:
        raise ValueError("matrix must be square")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if m.n_rows <= _DENSE_EIG_CUTOFF:
        try:
            vals = scipy.linalg.eigvals(m.to_dense())
        except scipy.linalg.LinAlgError as exc:
            raise EstimationError(f"QR eigenvalue sweep failed: {exc}") from exc
        return float(np.abs(vals).max())
    return _arpack_radius(m, tol, max_iter)
