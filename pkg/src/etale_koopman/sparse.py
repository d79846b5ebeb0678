"""Dictionary-of-keys sparse matrices with exact ``Fraction`` entries.

Rows and columns carry labels (basis elements) so that equality and
products are only ever taken between matrices on the same bases.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from ._rational import fmt
from .errors import DomainError


class SparseRationalMatrix:
    __slots__ = ("rows", "cols", "entries", "_row_index", "_col_index")

    def __init__(self, rows, cols, entries=None):
        self.rows = tuple(rows)
        self.cols = tuple(cols)
        self.entries = {k: Fraction(v) for k, v in dict(entries or {}).items() if v}
        self._row_index = None
        self._col_index = None

    @classmethod
    def identity(cls, labels):
        labels = tuple(labels)
        return cls(labels, labels, {(i, i): 1 for i in range(len(labels))})

    @classmethod
    def zero(cls, rows, cols):
        return cls(rows, cols)

    @property
    def shape(self):
        return (len(self.rows), len(self.cols))

    @property
    def nnz(self):
        return len(self.entries)

    def row_index(self):
        if self._row_index is None:
            self._row_index = {lab: i for i, lab in enumerate(self.rows)}
        return self._row_index

    def col_index(self):
        if self._col_index is None:
            self._col_index = {lab: i for i, lab in enumerate(self.cols)}
        return self._col_index

    def is_zero(self):
        return not self.entries

    def _same_shape(self, other):
        if self.rows != other.rows or self.cols != other.cols:
            raise DomainError("matrices live on different bases")

    def __add__(self, other):
        self._same_shape(other)
        out = defaultdict(Fraction, self.entries)
        for k, v in other.entries.items():
            out[k] += v
        return SparseRationalMatrix(self.rows, self.cols, out)

    def __neg__(self):
        return SparseRationalMatrix(self.rows, self.cols, {k: -v for k, v in self.entries.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return SparseRationalMatrix(self.rows, self.cols, {k: c * v for k, v in self.entries.items()})

    def __matmul__(self, other):
        if self.cols != other.rows:
            raise DomainError("inner bases differ")
        by_row = defaultdict(list)
        for (k, j), v in other.entries.items():
            by_row[k].append((j, v))
        out = defaultdict(Fraction)
        for (i, k), v in self.entries.items():
            for j, w in by_row.get(k, ()):
                out[(i, j)] += v * w
        return SparseRationalMatrix(self.rows, other.cols, out)

    @property
    def T(self):
        return SparseRationalMatrix(self.cols, self.rows, {(j, i): v for (i, j), v in self.entries.items()})

    def __eq__(self, other):
        return (
            isinstance(other, SparseRationalMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self.entries == other.entries
        )

    __hash__ = None

    def first_difference(self, other):
        """``(row, col, mine, theirs)`` for the first differing entry, or ``None``."""
        self._same_shape(other)
        for k in sorted(set(self.entries) | set(other.entries)):
            a, b = self.entries.get(k, Fraction(0)), other.entries.get(k, Fraction(0))
            if a != b:
                return (self.rows[k[0]], self.cols[k[1]], a, b)
        return None

    def get(self, i, j):
        return self.entries.get((i, j), Fraction(0))

    def to_scipy(self):
        n, m = self.shape
        if not self.entries:
            return sp.csr_matrix((n, m))
        keys = sorted(self.entries)
        ii = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        jj = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        vv = np.fromiter((float(self.entries[k]) for k in keys), dtype=float, count=len(keys))
        return sp.csr_matrix((vv, (ii, jj)), shape=(n, m))

    def to_dense(self):
        out = np.zeros(self.shape)
        for (i, j), v in self.entries.items():
            out[i, j] = float(v)
        return out

    def triplets(self):
        return [[i, j, fmt(v)] for (i, j), v in sorted(self.entries.items())]

    def __repr__(self):
        return f"SparseRationalMatrix({self.shape[0]}x{self.shape[1]}, nnz={self.nnz})"
