"""Kronecker-product linear algebra on flat vectors.

Vectors are stored with the first index varying fastest
(``i = i1 + i2*n1 + i3*n1*n2`` zero-based). A product ``D_d x ... x D_1``
is represented by its factors listed in that order, so the *last* factor
acts on the fastest index.

Every operation is a sequence of mode contractions: reshape the vector so
the fastest mode is the trailing axis, contract it with one small factor,
and move the result to the slowest position. After ``d`` such cycles the
modes are back in their original order. A trailing batch of right-hand
sides rides along as an extra slow axis.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sps


class DimensionError(ValueError):
    pass


class TensorIndexMap:
    """Flat <-> multi-index conversion for extents ``(n1, ..., nd)``."""

    def __init__(self, extents: Sequence[int]):
        self.extents = tuple(int(n) for n in extents)
        self.size = int(np.prod(self.extents))

    def flatten(self, *idx: int) -> int:
        if len(idx) != len(self.extents):
            raise DimensionError(f"expected {len(self.extents)} indices, got {len(idx)}")
        flat, stride = 0, 1
        for i, n in zip(idx, self.extents):
            if not 0 <= i < n:
                raise IndexError(f"index {i} out of range for extent {n}")
            flat += i * stride
            stride *= n
        return flat

    def unflatten(self, flat: int) -> tuple[int, ...]:
        out = []
        for n in self.extents:
            out.append(flat % n)
            flat //= n
        return tuple(out)

    def as_array(self, vec: np.ndarray) -> np.ndarray:
        """View with axes ``(i_d, ..., i_1)`` (C order, i_1 fastest)."""
        return np.asarray(vec).reshape(self.extents[::-1])


class KroneckerFactors:
    """Ordered factors ``(D_d, ..., D_1)`` standing for their Kronecker product.

    Factors may be dense arrays or sparse (banded) arrays.
    """

    def __init__(self, factors: Sequence[np.ndarray]):
        self.factors = [f if sps.issparse(f) else np.asarray(f, dtype=float) for f in factors]
        if not self.factors:
            raise DimensionError("need at least one factor")
        for f in self.factors:
            if f.ndim != 2:
                raise DimensionError(f"factors must be 2-D, got shape {f.shape}")

    @property
    def d(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, int]:
        m = int(np.prod([f.shape[0] for f in self.factors]))
        n = int(np.prod([f.shape[1] for f in self.factors]))
        return m, n

    @property
    def T(self) -> "KroneckerFactors":
        return KroneckerFactors([f.T for f in self.factors])

    def dense(self) -> np.ndarray:
        fs = [f.toarray() if sps.issparse(f) else f for f in self.factors]
        out = fs[0]
        for f in fs[1:]:
            out = np.kron(out, f)
        return out


def _contract(x: np.ndarray, in_sizes: Sequence[int], ops: Sequence[Callable], n_total: int) -> np.ndarray:
    """Apply ``ops[k]`` (fastest mode first) to a flat or batched vector.

    ``ops[k]`` maps an ``(n_k, R)`` array to ``(m_k, R)``.
    """
    x = np.asarray(x, dtype=float)
    batched = x.ndim == 2
    if x.shape[0] != n_total:
        raise DimensionError(f"vector length {x.shape[0]} does not match operator width {n_total}")
    nb = x.shape[1] if batched else 1
    # batch becomes the slowest axis: (nb, n_d, ..., n_1)
    y = np.ascontiguousarray(x.T).ravel() if batched else x
    for n_k, op in zip(in_sizes, ops):
        X = y.reshape(-1, n_k)
        y = np.ascontiguousarray(op(X.T)).ravel()
    # after d cycles the batch axis sits last: (m_d, ..., m_1, nb)
    return y.reshape(-1, nb) if batched else y


def kron_matvec(factors: KroneckerFactors | Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    """``(D_d x ... x D_1) @ x`` without forming the product.

    ``x`` may be a vector or an ``(N, k)`` block of column vectors.
    """
    kf = factors if isinstance(factors, KroneckerFactors) else KroneckerFactors(factors)
    fs = kf.factors[::-1]
    return _contract(x, [f.shape[1] for f in fs], [f.__matmul__ for f in fs], kf.shape[1])


def kron_solve_cholesky(chol_factors: Sequence, x: np.ndarray, side: str = "forward") -> np.ndarray:
    """Solve with ``L = L_d x ... x L_1`` (forward) or ``L^T`` (backward).

    ``chol_factors`` are :class:`~isokle.quadrature.CholeskyFactor` objects or
    plain lower-triangular arrays, listed ``(L_d, ..., L_1)``.
    """
    from .quadrature import CholeskyFactor

    fs = [f if isinstance(f, CholeskyFactor) else _as_cholesky(f) for f in chol_factors][::-1]
    if side == "forward":
        ops = [f.solve_lower for f in fs]
    elif side == "backward":
        ops = [f.solve_upper for f in fs]
    else:
        raise ValueError(f"side must be 'forward' or 'backward', got {side!r}")
    n = int(np.prod([f.n for f in fs]))
    return _contract(x, [f.n for f in fs], ops, n)


def kron_solve_lu(lu_factors: Sequence, x: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Apply ``(Bt_d x ... x Bt_1)^{-1}`` (or its transpose) via per-factor LU."""
    fs = list(lu_factors)[::-1]
    ops = [(lambda b, f=f: f.solve(b, transpose=transpose)) for f in fs]
    n = int(np.prod([f.n for f in fs]))
    return _contract(x, [f.n for f in fs], ops, n)


def _as_cholesky(L: np.ndarray):
    from .quadrature import CholeskyFactor

    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise DimensionError(f"triangular factor must be square, got {L.shape}")
    if np.any(np.diag(L) == 0.0):
        raise np.linalg.LinAlgError(f"zero diagonal entry at {int(np.argmin(np.abs(np.diag(L))))}")
    if np.any(np.triu(L, 1) != 0.0):
        raise ValueError("factor is not lower triangular")
    f = CholeskyFactor.__new__(CholeskyFactor)
    f.n, f.banded, f.bw, f._L = L.shape[0], False, L.shape[0] - 1, L
    return f
