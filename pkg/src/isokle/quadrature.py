"""Gauss-Legendre rules and the exact univariate matrices.

Three kinds of univariate matrices are built here:

* trial mass ``Z[i, j] = int B_i B_j``
* mixed mass ``M[k, j] = int Bt_k B_j`` (interpolation rows, trial columns)
* collocation ``Bt[i, j] = Bt_j(g_i)`` at the Greville points ``g``

Mass integrals are evaluated span by span over the merged breakpoints of
both bases, with enough Gauss points to integrate the polynomial products
exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
from scipy.linalg import lapack

from .splines import BSplineBasis, collocation, greville_abscissae, greville_sides

DENSE_LIMIT = 64


class FactorizationError(np.linalg.LinAlgError):
    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class GaussRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def q(self) -> int:
        return self.nodes.size

    def on_interval(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


@lru_cache(maxsize=64)
def gauss_rule(q: int) -> GaussRule:
    if q < 1:
        raise ValueError(f"Gauss rule needs q >= 1 points, got {q}")
    x, w = np.polynomial.legendre.leggauss(q)
    # symmetrize to remove the last bit of asymmetry from the eigensolver
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return GaussRule(x, w)


def element_quadrature(breaks: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor of ``q`` Gauss points on each interval of ``breaks``."""
    rule = gauss_rule(q)
    a, b = breaks[:-1], breaks[1:]
    half = 0.5 * (b - a)
    pts = a[:, None] + half[:, None] * (rule.nodes[None, :] + 1.0)
    wts = half[:, None] * rule.weights[None, :]
    return pts.ravel(), wts.ravel()


def merged_breakpoints(*bases: BSplineBasis) -> np.ndarray:
    return np.unique(np.concatenate([b.element_boundaries() for b in bases]))


class Role(enum.Enum):
    TRIAL_MASS = "Z"
    MIXED_MASS = "M"
    COLLOCATION = "Bt"


class UnivariateMatrix:
    """A univariate matrix with its role.

    Matrices with at most ``DENSE_LIMIT`` rows and columns are held as dense
    arrays; larger ones as sparse CSR arrays, which for these banded matrices
    store only the band. ``data`` supports ``@`` in both cases.
    """

    def __init__(self, data, role: Role):
        self.role = role
        if sps.issparse(data):
            m = sps.csr_array(data, dtype=float)
        else:
            m = np.asarray(data, dtype=float)
        if max(m.shape) <= DENSE_LIMIT:
            self.data = m.toarray() if sps.issparse(m) else m
            rows, cols = np.nonzero(self.data)
        else:
            m = sps.csr_array(m)
            m.eliminate_zeros()
            self.data = m
            rows, cols = m.nonzero()
        diff = cols - rows if rows.size else np.zeros(1, dtype=int)
        self.lower = int(max(0, -diff.min()))
        self.upper = int(max(0, diff.max()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def storage(self) -> str:
        return "banded" if sps.issparse(self.data) else "dense"

    @property
    def T(self):
        return self.data.T

    def toarray(self) -> np.ndarray:
        return self.data.toarray() if sps.issparse(self.data) else self.data

    def diagonal(self, k: int = 0) -> np.ndarray:
        return self.data.diagonal(k) if sps.issparse(self.data) else np.diagonal(self.data, k).copy()

    def banded(self) -> np.ndarray:
        """LAPACK general band storage ``ab[u + i - j, j] = a[i, j]``."""
        return to_band(self, self.lower, self.upper)


def to_band(a, lower: int, upper: int) -> np.ndarray:
    """Band storage of a dense array or :class:`UnivariateMatrix`."""
    diag = a.diagonal if isinstance(a, UnivariateMatrix) else (lambda k: np.diagonal(a, k))
    n = a.shape[1]
    ab = np.zeros((lower + upper + 1, n))
    for d in range(-lower, upper + 1):
        v = diag(d)
        if d >= 0:
            ab[upper - d, d: d + v.size] = v
        else:
            ab[upper - d, : v.size] = v
    return ab


def _gram(a: BSplineBasis, b: BSplineBasis) -> np.ndarray:
    breaks = merged_breakpoints(a, b)
    q = -(-(a.degree + b.degree) // 2) + 1
    x, w = element_quadrature(breaks, q)
    # interior Gauss points never hit a knot, so the default side is safe
    Ca = collocation(a, x)
    Cb = collocation(b, x)
    return (Ca.T @ (Cb.multiply(w[:, None]).tocsr())).tocsr()


def mixed_mass_matrix(interp_basis: BSplineBasis, trial_basis: BSplineBasis) -> UnivariateMatrix:
    if interp_basis == trial_basis:
        return trial_mass_matrix(trial_basis)
    return UnivariateMatrix(_gram(interp_basis, trial_basis), Role.MIXED_MASS)


def trial_mass_matrix(basis: BSplineBasis) -> UnivariateMatrix:
    z = _gram(basis, basis)
    return UnivariateMatrix(0.5 * (z + z.T), Role.TRIAL_MASS)


def collocation_matrix(interp_basis: BSplineBasis) -> UnivariateMatrix:
    g = greville_abscissae(interp_basis)
    left = greville_sides(interp_basis)
    return UnivariateMatrix(collocation(interp_basis, g, side=left), Role.COLLOCATION)


class CholeskyFactor:
    """Lower Cholesky factor of an SPD univariate matrix."""

    def __init__(self, m: UnivariateMatrix | np.ndarray, banded: bool | None = None):
        um = m if isinstance(m, UnivariateMatrix) else UnivariateMatrix(np.asarray(m, dtype=float), Role.TRIAL_MASS)
        n = um.shape[0]
        if banded is None:
            banded = n > DENSE_LIMIT
        self.n = n
        self.banded = banded
        self._L = None
        if banded:
            bw = max(um.lower, um.upper)
            ab = np.zeros((bw + 1, n))
            for d in range(bw + 1):
                ab[d, : n - d] = um.diagonal(-d)
            c, info = lapack.dpbtrf(ab, lower=1)
            if info > 0:
                raise FactorizationError(f"matrix not positive definite: leading minor {info - 1} fails", info - 1)
            self.bw = bw
            self.band = c
            pivots = c[0]
        else:
            a = um.toarray()
            self.bw = n - 1
            try:
                self._L = np.linalg.cholesky(a)
            except np.linalg.LinAlgError:
                k = _first_bad_minor(a)
                raise FactorizationError(f"matrix not positive definite: leading minor {k} fails", k) from None
            pivots = np.diag(self._L)
        if np.any(pivots <= 0.0):
            idx = int(np.argmin(pivots))
            raise FactorizationError(f"zero pivot in Cholesky factor at {idx}", idx)

    @property
    def L(self) -> np.ndarray:
        """Dense lower factor (materialized on request in the banded case)."""
        if self._L is None:
            self._L = _band_lower_to_dense(self.band, self.n)
        return self._L

    def solve_lower(self, b: np.ndarray) -> np.ndarray:
        """L^{-1} b (columns of b are right-hand sides)."""
        return self._tri(b, trans=0)

    def solve_upper(self, b: np.ndarray) -> np.ndarray:
        """L^{-T} b."""
        return self._tri(b, trans=1)

    def _tri(self, b, trans):
        if self.banded:
            x, info = lapack.dtbtrs(self.band, b, uplo="L", trans="T" if trans else "N")
            if info != 0:
                raise FactorizationError(f"triangular solve failed at {info}", abs(info))
            return x
        return sla.solve_triangular(self.L, b, lower=True, trans=trans, check_finite=False)


class LUFactor:
    """LU factorization with partial pivoting of a square univariate matrix."""

    def __init__(self, m: UnivariateMatrix | np.ndarray, banded: bool | None = None):
        um = m if isinstance(m, UnivariateMatrix) else UnivariateMatrix(np.asarray(m, dtype=float), Role.COLLOCATION)
        n = um.shape[0]
        if banded is None:
            banded = n > DENSE_LIMIT
        self.n = n
        self.banded = banded
        if banded:
            kl, ku = um.lower, um.upper
            ab = np.zeros((2 * kl + ku + 1, n))
            ab[kl:] = um.banded()
            lu, piv, info = lapack.dgbtrf(ab, kl, ku)
            self.kl, self.ku = kl, ku
            self.lu, self.piv = lu, piv
        else:
            lu, piv, info = lapack.dgetrf(um.toarray())
            self.lu, self.piv = lu, piv
        if info > 0:
            raise FactorizationError(f"singular matrix: zero pivot at index {info - 1}", info - 1)

    def solve(self, b: np.ndarray, transpose: bool = False) -> np.ndarray:
        trans = 1 if transpose else 0
        if self.banded:
            x, info = lapack.dgbtrs(self.lu, self.kl, self.ku, b, self.piv, trans=trans)
        else:
            x, info = lapack.dgetrs(self.lu, self.piv, b, trans=trans)
        if info != 0:
            raise FactorizationError(f"LU solve failed (info={info})", abs(info))
        return x


def cholesky_factor(m: UnivariateMatrix | np.ndarray, banded: bool | None = None) -> CholeskyFactor:
    return CholeskyFactor(m, banded)


def lu_factor(m: UnivariateMatrix | np.ndarray, banded: bool | None = None) -> LUFactor:
    return LUFactor(m, banded)


def _band_lower_to_dense(c: np.ndarray, n: int) -> np.ndarray:
    L = np.zeros((n, n))
    for d in range(c.shape[0]):
        idx = np.arange(n - d)
        L[idx + d, idx] = c[d, : n - d]
    return L


def _first_bad_minor(a: np.ndarray) -> int:
    for k in range(1, a.shape[0] + 1):
        try:
            np.linalg.cholesky(a[:k, :k])
        except np.linalg.LinAlgError:
            return k - 1
    return a.shape[0]
