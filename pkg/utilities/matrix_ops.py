"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.

Structural matrix calculus for symmetric matrices.

Every half-vectorization in this package uses column-major lower-triangle order:
``vech`` of a 3x3 matrix is ``(a11, a21, a31, a22, a32, a33)`` and ``vecl`` drops the diagonal,
``(a21, a31, a32)``. ``vec`` is the usual column-major stacking.
"""

from __future__ import annotations

from typing import NamedTuple, overload

import numpy as np
import numpy.typing as npt
from lru import LRU
from scipy import linalg, sparse

from .constants import DENSE_STRUCTURE_LIMIT, SYMMETRY_TOLERANCE
from .exceptions import DomainError, FactorizationError, StructuralError

__all__ = (
    "FloatArray",
    "ReorderPermutation",
    "as_symmetric",
    "duplication_matrix",
    "duplication_transpose",
    "elimination_matrix",
    "equicorr_domain",
    "equicorr_inverse",
    "equicorrelation",
    "half_length",
    "lower_indices",
    "reorder_permutation",
    "unvech",
    "validate_correlation",
    "vec",
    "vech",
    "vecl",
)

type FloatArray = npt.NDArray[np.float64]
type IndexArray = npt.NDArray[np.intp]

# (kind, p) -> read-only index arrays
_INDEX_CACHE: LRU = LRU(128)


def half_length(p: int) -> int:
    return p * (p + 1) // 2


def _check_order(p: int) -> None:
    if p < 1:
        raise StructuralError(f"matrix order must be a positive integer, got {p}.")


def _frozen(array: npt.NDArray[np.generic]) -> npt.NDArray[np.generic]:
    array.setflags(write=False)
    return array


def _lower_indices(p: int) -> tuple[IndexArray, IndexArray]:
    # triu of the transpose walks the lower triangle column by column.
    key = ("lower", p)
    try:
        return _INDEX_CACHE[key]
    except KeyError:
        cols, rows = np.triu_indices(p)
        pair = (_frozen(rows), _frozen(cols))
        _INDEX_CACHE[key] = pair
        return pair


def _strict_lower_indices(p: int) -> tuple[IndexArray, IndexArray]:
    key = ("strict", p)
    try:
        return _INDEX_CACHE[key]
    except KeyError:
        cols, rows = np.triu_indices(p, k=1)
        pair = (_frozen(rows), _frozen(cols))
        _INDEX_CACHE[key] = pair
        return pair


def _position_table(p: int) -> IndexArray:
    """The (i, j) -> vech position table, symmetric in (i, j)."""
    key = ("position", p)
    try:
        return _INDEX_CACHE[key]
    except KeyError:
        rows, cols = _lower_indices(p)
        table = np.empty((p, p), dtype=np.intp)
        table[rows, cols] = np.arange(rows.size)
        table[cols, rows] = np.arange(rows.size)
        _INDEX_CACHE[key] = _frozen(table)
        return table


def lower_indices(p: int, *, strict: bool = False) -> tuple[IndexArray, IndexArray]:
    """Row and column indices of the (strict) lower triangle in half-vectorization order."""
    _check_order(p)
    return _strict_lower_indices(p) if strict else _lower_indices(p)


def _duplication_index(p: int) -> IndexArray:
    # vec position k -> vech position, i.e. the column holding the single 1 in row k of G_p.
    return _position_table(p).reshape(-1, order="F")


def as_symmetric(matrix: npt.ArrayLike, *, name: str = "matrix") -> FloatArray:
    """Validate a square, numerically symmetric matrix and return its averaged symmetric part."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructuralError(f"{name} must be square, got shape {a.shape}.")
    if not np.all(np.isfinite(a)):
        raise StructuralError(f"{name} has non-finite entries.")

    gap = np.abs(a - a.T)
    slack = SYMMETRY_TOLERANCE * np.maximum(1.0, np.abs(a))
    if np.any(gap > slack):
        i, j = np.unravel_index(np.argmax(gap - slack), gap.shape)
        raise StructuralError(f"{name} is not symmetric: entries ({i + 1},{j + 1}) and ({j + 1},{i + 1}) differ.")

    return (a + a.T) / 2.0


def vec(matrix: npt.ArrayLike) -> FloatArray:
    return np.asarray(matrix, dtype=np.float64).reshape(-1, order="F")


def vech(matrix: npt.ArrayLike) -> FloatArray:
    a = as_symmetric(matrix)
    rows, cols = _lower_indices(a.shape[0])
    return a[rows, cols]


def vecl(matrix: npt.ArrayLike) -> FloatArray:
    a = as_symmetric(matrix)
    p = a.shape[0]
    if p < 2:
        raise StructuralError(f"vecl needs a matrix of order at least 2, got {p}.")
    rows, cols = _strict_lower_indices(p)
    return a[rows, cols]


def unvech(values: npt.ArrayLike) -> FloatArray:
    """Rebuild the symmetric matrix a ``vech`` came from."""
    v = np.asarray(values, dtype=np.float64)
    # m = p(p+1)/2 -> p = (sqrt(8m+1)-1)/2
    p = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if v.ndim != 1 or half_length(p) != v.size:
        raise StructuralError(f"a vech must have triangular length, got {v.size}.")
    return v[_position_table(p)]


@overload
def duplication_matrix(p: int) -> sparse.csr_array: ...


@overload
def duplication_matrix(p: int, *, dense: bool) -> sparse.csr_array | FloatArray: ...


def duplication_matrix(p: int, *, dense: bool = False) -> sparse.csr_array | FloatArray:
    """The duplication matrix ``G_p`` (p² x p(p+1)/2) with ``vec(S) = G_p vech(S)`` for symmetric ``S``."""
    _check_order(p)
    index = _duplication_index(p)
    g = sparse.csr_array(
        (np.ones(index.size), (np.arange(index.size), index)),
        shape=(p * p, half_length(p)),
    )
    return _densify(g, p) if dense else g


@overload
def elimination_matrix(p: int) -> sparse.csr_array: ...


@overload
def elimination_matrix(p: int, *, dense: bool) -> sparse.csr_array | FloatArray: ...


def elimination_matrix(p: int, *, dense: bool = False) -> sparse.csr_array | FloatArray:
    """The Moore-Penrose elimination matrix ``L_p = (G_p^T G_p)^{-1} G_p^T``.

    ``L_p vec(S) = vech(S)`` for symmetric ``S``, and ``L_p G_p = I``.
    """
    _check_order(p)
    index = _duplication_index(p)
    # G^T G is diagonal: 1 on diagonal positions, 2 on off-diagonal ones.
    multiplicity = np.bincount(index, minlength=half_length(p))
    l_matrix = sparse.csr_array(
        (1.0 / multiplicity[index], (index, np.arange(index.size))),
        shape=(half_length(p), p * p),
    )
    return _densify(l_matrix, p) if dense else l_matrix


def _densify(matrix: sparse.csr_array, p: int) -> FloatArray:
    if p > DENSE_STRUCTURE_LIMIT:
        raise StructuralError(
            f"refusing to materialise a dense structural matrix of order {p} (limit {DENSE_STRUCTURE_LIMIT}); "
            "use the index-map helpers instead."
        )
    return matrix.toarray()


def duplication_transpose(matrix: npt.ArrayLike) -> FloatArray:
    """``G_p^T vec(A)`` as an index map. Off-diagonal coordinates collect ``a_ij + a_ji``."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructuralError(f"matrix must be square, got shape {a.shape}.")
    p = a.shape[0]
    return np.bincount(_duplication_index(p), weights=vec(a), minlength=half_length(p))


class ReorderPermutation(NamedTuple):
    """The permutation ``M = (P, Q)`` taking ``vech(Σ)`` to (variances, covariances).

    ``order`` is the index map behind it: ``M^T v == v[order]``.
    """

    p: int
    order: IndexArray

    @property
    def matrix(self) -> FloatArray:
        size = self.order.size
        if self.p > DENSE_STRUCTURE_LIMIT:
            raise StructuralError(f"refusing to materialise a dense permutation of order {self.p}.")
        matrix = np.zeros((size, size))
        matrix[self.order, np.arange(size)] = 1.0
        return matrix

    @property
    def P(self) -> FloatArray:
        return self.matrix[:, : self.p]

    @property
    def Q(self) -> FloatArray:
        return self.matrix[:, self.p :]

    def apply_transpose(self, values: npt.ArrayLike) -> FloatArray:
        return np.asarray(values, dtype=np.float64)[self.order]


def reorder_permutation(p: int) -> ReorderPermutation:
    _check_order(p)
    table = _position_table(p)
    diagonal = table[np.arange(p), np.arange(p)]
    # i < j in lexicographic order, which is also the vecl order.
    upper_i, upper_j = np.triu_indices(p, k=1)
    order = np.concatenate([diagonal, table[upper_j, upper_i]])
    return ReorderPermutation(p=p, order=_frozen(order))


def equicorr_domain(p: int) -> tuple[float, float]:
    """The open interval of equicorrelations giving a positive definite matrix of order ``p``."""
    _check_order(p)
    lower = -np.inf if p == 1 else -1.0 / (p - 1)
    return (lower, 1.0)


def _check_equicorr(rho: float, p: int) -> None:
    lower, upper = equicorr_domain(p)
    if not (lower < rho < upper):
        raise DomainError(f"equicorrelation {rho!r} is outside the admissible interval ({lower:.6g}, {upper:g}) for p={p}.")


def equicorrelation(rho: float, p: int) -> FloatArray:
    _check_equicorr(rho, p)
    return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))


def equicorr_inverse(rho: float, p: int) -> FloatArray:
    """Closed-form inverse of the equicorrelation matrix ``R(rho) = (1-rho) I + rho 11^T``."""
    _check_equicorr(rho, p)
    shrink = rho / (1.0 + (p - 1) * rho)
    return (np.eye(p) - shrink * np.ones((p, p))) / (1.0 - rho)


def validate_correlation(matrix: npt.ArrayLike, *, name: str = "correlation matrix") -> FloatArray:
    r = as_symmetric(matrix, name=name)
    if not np.allclose(np.diag(r), 1.0, rtol=0.0, atol=1e-10):
        raise StructuralError(f"{name} must have a unit diagonal.")
    try:
        linalg.cholesky(r, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(f"{name} is not positive definite.") from exc

    np.fill_diagonal(r, 1.0)
    return r
