"""LIBSVM ingestion, subsampling and synthetic datasets.

Datasets are stored row-compressed (``indptr``, ``indices``, ``data``) with
0-based feature indices; individual rows are exposed as :class:`Sample`.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .vecmath import SparseVec

# stream ids for np.random.default_rng([seed, stream])
STREAM_SUBSAMPLE = 1
STREAM_SCHEDULER = 2
STREAM_SYNTHETIC = 3


class LibsvmParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Sample:
    features: SparseVec
    label: float


class Dataset:
    """Immutable sparse design matrix plus labels."""

    def __init__(self, indptr, indices, data, labels, d: int, name: str = ""):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.float64)
        self.d = int(d)
        self.name = name
        n = self.labels.shape[0]
        if self.indptr.shape != (n + 1,) or self.indptr[0] != 0 or self.indptr[-1] != self.indices.size:
            raise ValueError("inconsistent row pointer array")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.d):
            raise ValueError(f"feature index outside [0, {self.d})")
        for arr in (self.indptr, self.indices, self.data, self.labels):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    def __len__(self):
        return self.n

    def row(self, i: int) -> SparseVec:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseVec(self.indices[lo:hi], self.data[lo:hi], self.d)

    def __getitem__(self, i: int) -> Sample:
        if not 0 <= i < self.n:
            raise IndexError(i)
        return Sample(self.row(i), float(self.labels[i]))

    def __iter__(self):
        for i in range(self.n):
            yield self[i]

    @property
    def samples(self) -> list[Sample]:
        return list(self)

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.indptr)

    def row_sq_norms(self) -> np.ndarray:
        out = np.zeros(self.n)
        np.add.at(out, np.repeat(np.arange(self.n), self.row_nnz()), self.data**2)
        return out

    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.d))

    def dense(self) -> np.ndarray:
        return self.csr().toarray()

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        m = self.csr()[rows]
        m.sort_indices()
        return Dataset(m.indptr, m.indices, m.data, self.labels[rows], self.d, self.name)

    def with_dim(self, d: int) -> "Dataset":
        return Dataset(self.indptr, self.indices, self.data, self.labels, d, self.name)

    @classmethod
    def from_samples(cls, samples, d: int | None = None, name: str = "") -> "Dataset":
        samples = list(samples)
        indptr = [0]
        indices, data, labels = [], [], []
        dims = set()
        for s in samples:
            indices.append(s.features.indices)
            data.append(s.features.values)
            indptr.append(indptr[-1] + s.features.nnz)
            labels.append(s.label)
            dims.add(s.features.dim)
        if d is None:
            if len(dims) > 1:
                raise ValueError(f"samples disagree on dimension: {sorted(dims)}")
            d = dims.pop() if dims else 0
        elif any(k != d for k in dims):
            raise ValueError("sample dimension differs from declared d")
        cat = (lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt))
        return cls(indptr, cat(indices, np.int64), cat(data, np.float64), labels, d, name)

    @classmethod
    def from_dense(cls, X, y, name: str = "") -> "Dataset":
        m = sp.csr_matrix(np.asarray(X, dtype=np.float64))
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m.indptr, m.indices, m.data, y, m.shape[1], name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.d == other.d
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<Dataset{tag} n={self.n} d={self.d} nnz={self.indices.size}>"


def _normalize_binary(labels: np.ndarray) -> np.ndarray:
    values = np.unique(labels)
    if values.size > 2:
        raise ValueError(f"binary label normalization needs <= 2 classes, found {values.size}")
    if set(values.tolist()) <= {-1.0, 1.0}:
        return labels
    if values.size == 1:
        return np.where(labels > 0, 1.0, -1.0)
    # {0,1}, {1,2} and similar two-class encodings
    return np.where(labels == values[1], 1.0, -1.0)


def parse_libsvm(stream, binary_labels: bool = True, d: int | None = None, name: str = "") -> Dataset:
    """Parse LIBSVM text (``label idx:val ...``, 1-based indices).

    ``stream`` may be a text stream, an iterable of lines or a string.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    labels: list[float] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise LibsvmParseError(lineno, f"bad label {tokens[0]!r}") from None
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmParseError(lineno, f"malformed token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmParseError(lineno, f"malformed token {tok!r}") from None
            if idx < 1:
                raise LibsvmParseError(lineno, f"index {idx} < 1")
            if idx <= prev:
                raise LibsvmParseError(lineno, f"indices not increasing at {tok!r}")
            if not math.isfinite(val):
                raise LibsvmParseError(lineno, f"non-finite value in {tok!r}")
            prev = idx
            if val != 0.0:
                indices.append(idx - 1)
                data.append(val)
        indptr.append(len(indices))
    observed = max(indices) + 1 if indices else 0
    if d is None:
        d = observed
    elif d < observed:
        raise ValueError(f"declared dimension {d} < observed {observed}")
    y = np.asarray(labels, dtype=np.float64)
    if binary_labels and y.size:
        y = _normalize_binary(y)
    return Dataset(indptr, indices, data, y, d, name)


def load_libsvm(path, binary_labels: bool = True, d: int | None = None) -> Dataset:
    path = Path(path)
    with path.open() as fh:
        return parse_libsvm(fh, binary_labels=binary_labels, d=d, name=path.stem)


def to_libsvm(ds: Dataset) -> str:
    lines = []
    for i in range(ds.n):
        lo, hi = ds.indptr[i], ds.indptr[i + 1]
        toks = [repr(float(ds.labels[i]))]
        toks += [f"{j + 1}:{float(v)!r}" for j, v in zip(ds.indices[lo:hi], ds.data[lo:hi])]
        lines.append(" ".join(toks))
    return "\n".join(lines) + ("\n" if lines else "")


def subsample(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Draw ``ceil(fraction * n)`` rows without replacement.

    Selected rows keep their relative order and the parent dimension.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return ds
    # round first: 0.07 * 100 == 7.000000000000001
    m = math.ceil(round(fraction * ds.n, 9))
    rng = np.random.default_rng([seed, STREAM_SUBSAMPLE])
    rows = np.sort(rng.choice(ds.n, size=m, replace=False))
    return ds.take(rows)


@dataclass(frozen=True)
class DatasetStats:
    n: int
    d: int
    max_row_sq_norm: float
    mean_nnz: float


def stats(ds: Dataset) -> DatasetStats:
    if ds.n == 0:
        raise ValueError("empty dataset")
    return DatasetStats(ds.n, ds.d, float(ds.row_sq_norms().max()), float(ds.row_nnz().mean()))


def maxabs_scale(ds: Dataset) -> Dataset:
    """Scale each feature column by its maximum absolute value."""
    scale = np.zeros(ds.d)
    np.maximum.at(scale, ds.indices, np.abs(ds.data))
    scale[scale == 0] = 1.0
    return Dataset(ds.indptr, ds.indices, ds.data / scale[ds.indices], ds.labels, ds.d, ds.name)


def make_sparse_classification(n: int, d: int, nnz_per_row: int, seed: int = 0, noise: float = 0.1) -> Dataset:
    """Random sparse rows with labels from a planted linear model."""
    if nnz_per_row > d:
        raise ValueError("nnz_per_row exceeds d")
    rng = np.random.default_rng([seed, STREAM_SYNTHETIC])
    indices = np.concatenate([np.sort(rng.choice(d, size=nnz_per_row, replace=False)) for _ in range(n)])
    data = rng.standard_normal(n * nnz_per_row)
    data[data == 0.0] = 1.0
    indptr = np.arange(n + 1) * nnz_per_row
    w = rng.standard_normal(d)
    ds = Dataset(indptr, indices, data, np.zeros(n), d)
    margin = ds.csr() @ w + noise * rng.standard_normal(n)
    labels = np.where(margin >= 0, 1.0, -1.0)
    return Dataset(indptr, indices, data, labels, d, name=f"sparse{n}x{d}")


def make_binary_features(n: int, groups: int = 22, levels: int = 5, seed: int = 0) -> Dataset:
    """One-hot categorical rows, shaped like MUSHROOM (one active level per group)."""
    rng = np.random.default_rng([seed, STREAM_SYNTHETIC])
    d = groups * levels
    choice = rng.integers(0, levels, size=(n, groups))
    indices = (np.arange(groups) * levels + choice).reshape(-1)
    indptr = np.arange(n + 1) * groups
    data = np.ones(n * groups)
    w = rng.standard_normal(d)
    ds = Dataset(indptr, indices, data, np.zeros(n), d)
    labels = np.where(ds.csr() @ w >= 0, 1.0, -1.0)
    return Dataset(indptr, indices, data, labels, d, name=f"binary{n}x{d}")
