"""Small dense linear-algebra kernels used everywhere else.

Matrices are 2-D float64 numpy arrays in row-major order; vectors are 1-D.
Everything here is pure and deterministic; randomness never enters this
module.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyMemoryError, ShapeError

__all__ = ["as_matrix", "matmul", "softmax_rows", "mean_pool_rows", "sdp_attention"]


def as_matrix(a) -> np.ndarray:
    """Coerce to a finite 2-D float64 array, validating as we go."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ShapeError("matrix contains non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def softmax_rows(m) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction for stability."""
    m = as_matrix(m)
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def mean_pool_rows(m) -> np.ndarray:
    """Column means of a matrix, i.e. pooling over the token dimension."""
    m = as_matrix(m)
    if m.shape[0] == 0:
        raise EmptyMemoryError("mean_pool_rows needs at least one row")
    return m.mean(axis=0)


def sdp_attention(q, k, v, scale: float | None = None) -> np.ndarray:
    """Scaled dot-product attention: softmax(q k^T * scale) v.

    scale defaults to 1/sqrt(d) where d is the key dimension.
    """
    q = as_matrix(q)
    k = as_matrix(k)
    v = as_matrix(v)
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"query dim {q.shape[1]} != key dim {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ShapeError(f"key count {k.shape[0]} != value count {v.shape[0]}")
    if scale is None:
        scale = 1.0 / np.sqrt(k.shape[1])
    weights = softmax_rows(q @ k.T * scale)
    return weights @ v
