"""Dense and sparse vectors.

Dense vectors are plain 1-D ``float64`` numpy arrays. Sparse vectors carry
0-based, strictly increasing indices and nonzero values.
"""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    pass


def as_dense(values, dim: int | None = None) -> np.ndarray:
    """Validate and return ``values`` as a finite float64 vector."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionError(f"expected length {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


class TouchCounter:
    """Counts coordinate reads/writes made by sparse kernels."""

    def __init__(self):
        self.count = 0
        self.coords: set[int] = set()

    def touch(self, indices):
        indices = np.asarray(indices)
        self.count += int(indices.size)
        self.coords.update(int(j) for j in indices)

    def reset(self):
        self.count = 0
        self.coords.clear()


class SparseVec:
    """Sparse vector with 0-based strictly increasing indices.

    Zero values are rejected; use :meth:`from_dense` to drop them.
    """

    __slots__ = ("indices", "values", "dim")

    def __init__(self, indices, values, dim: int):
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        val = np.asarray(values, dtype=np.float64).reshape(-1)
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        if dim < 0:
            raise ValueError("dim must be nonnegative")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= dim:
                raise DimensionError(f"index out of range [0, {dim})")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("sparse values must be finite")
        if np.any(val == 0.0):
            raise ValueError("sparse values must be nonzero")
        self.indices = idx
        self.values = val
        self.dim = int(dim)

    @classmethod
    def from_dense(cls, x) -> "SparseVec":
        x = as_dense(x)
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.shape[0])

    @classmethod
    def from_pairs(cls, pairs, dim: int) -> "SparseVec":
        pairs = list(pairs)
        if not pairs:
            return cls([], [], dim)
        idx, val = zip(*pairs)
        return cls(idx, val, dim)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.dim)
        x[self.indices] = self.values
        return x

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(j), float(v)) for j, v in zip(self.indices, self.values)]

    def sq_norm(self) -> float:
        return float(self.values @ self.values)

    def __eq__(self, other):
        if not isinstance(other, SparseVec):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"SparseVec({self.pairs()}, dim={self.dim})"


def _check_dim(a: SparseVec, x: np.ndarray):
    if x.ndim != 1 or a.dim != x.shape[0]:
        raise DimensionError(f"sparse dim {a.dim} != dense length {x.shape}")


def dot(a: SparseVec, x: np.ndarray, counter: TouchCounter | None = None) -> float:
    """Inner product of a sparse and a dense vector."""
    _check_dim(a, x)
    if counter is not None:
        counter.touch(a.indices)
    if a.nnz == 0:
        return 0.0
    return float(a.values @ x[a.indices])


def axpy_sparse(alpha: float, a: SparseVec, x: np.ndarray, counter: TouchCounter | None = None) -> np.ndarray:
    """In place ``x += alpha * a``; only the coordinates stored in ``a`` change."""
    _check_dim(a, x)
    if counter is not None:
        counter.touch(a.indices)
    if alpha != 0.0 and a.nnz:
        x[a.indices] += alpha * a.values
    return x


def sq_dist(x: np.ndarray, y: np.ndarray) -> float:
    """Squared Euclidean distance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    diff = x - y
    return float(diff @ diff)
