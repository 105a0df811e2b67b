"""PCA/ZCA whitening and the tail-coefficient variance statistic.

Whitened coefficients are ordered by descending eigenvalue, so entry i is the
coefficient of the i-th principal component; the detector statistic is the
population variance of the coefficients from a tail start index onward, where
low-eigenvalue components live.
"""

import struct
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import (
    BadIndexError,
    BadMagicError,
    EmptyDatasetError,
    NoConvergenceError,
    NotSymmetricError,
    TruncatedFileError,
)
from .validation import as_float_matrix, as_float_vector

WHT_MAGIC = b"WHT1"

# Tail start defaults, keyed by flat dimension (and pixel range for the
# [0, 255] 64x64x3 case): 784 -> 700, 3072 -> 2500, 12288 -> 10000.
DEFAULT_TAIL_START = {784: 700, 3072: 2500, 12288: 10000}


def default_tail_start(dim):
    """Per-dataset default tail start index, else 90% of the dimension."""
    return DEFAULT_TAIL_START.get(dim, (9 * dim) // 10)


@dataclass(frozen=True)
class TailSpec:
    """Coefficient range [start, end) entering the variance statistic."""

    start: int
    end: int | None = None

    def resolve(self, dim):
        end = dim if self.end is None else self.end
        if not 0 <= self.start < dim:
            raise BadIndexError(f"tail start {self.start} out of range for {dim} coefficients")
        if not self.start < end <= dim:
            raise BadIndexError(f"tail end {end} out of range ({self.start}, {dim}]")
        return self.start, end


def tail_variance(coeffs, spec):
    """Population variance of the tail slice of one coefficient vector."""
    coeffs = as_float_vector(coeffs, name="coeffs")
    start, end = spec.resolve(coeffs.shape[0])
    return float(np.var(coeffs[start:end]))


def sym_eig(M):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(values, vectors)`` with vectors in columns, each vector's
    largest-magnitude entry made positive so decompositions are reproducible.
    Backed by LAPACK's symmetric solver; M v_i = lambda_i v_i holds within
    1e-8 * ||M||_F.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetricError(f"matrix of shape {M.shape} is not square")
    if M.size and np.max(np.abs(M - M.T)) > 1e-10:
        raise NotSymmetricError("matrix is not symmetric within 1e-10")
    try:
        values, vectors = np.linalg.eigh((M + M.T) / 2.0)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NoConvergenceError(str(exc)) from exc
    order = np.argsort(values, kind="stable")[::-1]
    values = values[order]
    vectors = vectors[:, order]
    # sign convention: largest-magnitude entry of each eigenvector positive
    anchor = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[anchor, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors = vectors * signs
    return values, vectors


class WhiteningTransformer(BaseEstimator, TransformerMixin):
    """PCA whitening model fitted on training images.

    Fitting computes the per-pixel mean, the population covariance
    C = (1/n) sum (x - mean)(x - mean)^T and its eigendecomposition
    C = U diag(eigenvalues) U^T. ``transform`` maps an image to
    diag((eigenvalues + eps)^-1/2) U^T (x - mean); ``zca_transform``
    rotates that back into pixel space.

    Parameters
    ----------
    eps : float
        Regularizer added under the inverse square root so directions with
        (numerically) zero variance stay well defined.
    """

    def __init__(self, eps=1e-8):
        self.eps = eps

    def fit(self, X, y=None):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        X = as_float_matrix(X, name="X")
        if X.shape[0] == 0:
            raise EmptyDatasetError("cannot fit whitening on an empty dataset")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        cov = centered.T @ centered / X.shape[0]
        values, vectors = sym_eig(cov)
        self.eigenvalues_ = np.maximum(values, 0.0)
        self.components_ = vectors
        self.scale_ = 1.0 / np.sqrt(self.eigenvalues_ + self.eps)
        return self

    def _check_fitted(self):
        if not hasattr(self, "components_"):
            raise NotFittedError("WhiteningTransformer is not fitted yet")

    @property
    def dim_(self):
        self._check_fitted()
        return self.mean_.shape[0]

    def transform(self, X, already_centered=False):
        """Whitened principal-component coefficients, one row per image."""
        self._check_fitted()
        single = np.ndim(X) == 1
        X = as_float_matrix(X, d=self.dim_, name="X")
        centered = X if already_centered else X - self.mean_
        coeffs = (centered @ self.components_) * self.scale_
        return coeffs[0] if single else coeffs

    def zca_transform(self, X):
        """Whitened images rotated back into pixel space (not rescaled)."""
        self._check_fitted()
        single = np.ndim(X) == 1
        X = as_float_matrix(X, d=self.dim_, name="X")
        zca = ((X - self.mean_) @ self.components_) * self.scale_ @ self.components_.T
        return zca[0] if single else zca

    def tail_variances(self, X, spec=None):
        """Tail-coefficient variance of each row of ``X``."""
        self._check_fitted()
        if spec is None:
            spec = TailSpec(default_tail_start(self.dim_))
        single = np.ndim(X) == 1
        coeffs = self.transform(X)
        if single:
            coeffs = coeffs[None, :]
        start, end = spec.resolve(self.dim_)
        out = np.var(coeffs[:, start:end], axis=1)
        return float(out[0]) if single else out

    def save(self, path):
        """Write the fitted model to ``path`` in the WHT1 binary format."""
        self._check_fitted()
        d = self.dim_
        with open(path, "wb") as fh:
            fh.write(WHT_MAGIC)
            header = np.array([d, self.eps], dtype="<f8")
            fh.write(header.tobytes())
            fh.write(self.mean_.astype("<f8").tobytes())
            fh.write(self.eigenvalues_.astype("<f8").tobytes())
            fh.write(np.ascontiguousarray(self.components_, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        if raw[:4] != WHT_MAGIC:
            raise BadMagicError(f"expected {WHT_MAGIC!r} header, got {raw[:4]!r}")
        if len(raw) < 4 + 16:
            raise TruncatedFileError("WHT1 file ends inside the header")
        d_float, eps = struct.unpack_from("<dd", raw, 4)
        d = int(d_float)
        expected = 4 + 16 + 8 * (d + d + d * d)
        if len(raw) < expected:
            raise TruncatedFileError(f"WHT1 file has {len(raw)} bytes, expected {expected}")
        body = np.frombuffer(raw, dtype="<f8", offset=20)
        model = cls(eps=eps)
        model.mean_ = body[:d].copy()
        model.eigenvalues_ = body[d : 2 * d].copy()
        model.components_ = body[2 * d : 2 * d + d * d].reshape(d, d).copy()
        model.scale_ = 1.0 / np.sqrt(model.eigenvalues_ + model.eps)
        return model
