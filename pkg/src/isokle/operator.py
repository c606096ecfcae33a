"""Matrix-free standard-form operator for interpolation-based quadrature.

The operator is

    A' = L^{-1} M^T Bt^{-1} J Gamma J Bt^{-T} M L^{-T}

with ``L`` the Kronecker Cholesky factor of the trial mass matrix, ``M``
the mixed mass matrix, ``Bt`` the collocation matrix of the interpolation
space at its Greville points, ``J`` the diagonal of square-rooted Jacobian
determinants on that grid and ``Gamma`` the kernel evaluated between all
pairs of grid points. Only the univariate factors, ``J`` and the grid
coordinates are stored; ``Gamma`` is recomputed row by row on every
product.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .geometry import GrevilleGrid, TensorPatch, build_greville_grid
from .kernels import EXPONENTIAL, GAUSSIAN, CovarianceKernel, kernel_matrix
from .quadrature import (
    CholeskyFactor,
    LUFactor,
    UnivariateMatrix,
    cholesky_factor,
    collocation_matrix,
    lu_factor,
    mixed_mass_matrix,
    trial_mass_matrix,
)
from .splines import BSplineBasis
from .tensor import DimensionError, kron_matvec, kron_solve_cholesky, kron_solve_lu

DENSE_CAP = 4096
STAGES = (
    "1_cholesky_backward",
    "2_mixed_mass",
    "3_collocation_solve_T",
    "4_jacobian",
    "5_kernel",
    "6_jacobian",
    "7_collocation_solve",
    "8_mixed_mass_T",
    "9_cholesky_forward",
)


def default_threads() -> int:
    env = os.environ.get("KLE_THREADS")
    if env:
        return max(1, int(env))
    return 1


# scratch per worker for kernel rows, in bytes
TILE_BYTES = 1 << 19


@numba.njit(nogil=True, cache=True)
def _sq_dist_rows(pts, start, stop, buf):
    # pts is (d, n); buf[i - start, j] = |x_i - x_j|^2
    d, n = pts.shape
    for i in range(start, stop):
        row = buf[i - start]
        c = pts[0, i]
        for j in range(n):
            t = c - pts[0, j]
            row[j] = t * t
        for k in range(1, d):
            c = pts[k, i]
            for j in range(n):
                t = c - pts[k, j]
                row[j] += t * t


@numba.njit(nogil=True, cache=True)
def _row_dot(buf, y, out, start, stop, scale):
    # eight interleaved partial sums combined in a fixed order: vectorizes
    # without reassociation, so a row's value never depends on the partition
    n = y.size
    n8 = n - n % 8
    for i in range(start, stop):
        row = buf[i - start]
        a0 = a1 = a2 = a3 = a4 = a5 = a6 = a7 = 0.0
        for j in range(0, n8, 8):
            a0 += row[j] * y[j]
            a1 += row[j + 1] * y[j + 1]
            a2 += row[j + 2] * y[j + 2]
            a3 += row[j + 3] * y[j + 3]
            a4 += row[j + 4] * y[j + 4]
            a5 += row[j + 5] * y[j + 5]
            a6 += row[j + 6] * y[j + 6]
            a7 += row[j + 7] * y[j + 7]
        t = 0.0
        for j in range(n8, n):
            t += row[j] * y[j]
        out[i] = scale * ((((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))) + t)


def _kernel_block(pts, y, out, start, stop, kernel: CovarianceKernel) -> None:
    """Rows ``start:stop`` of Gamma @ y, one tile of rows at a time."""
    n = y.size
    tile = max(1, TILE_BYTES // (8 * n))
    buf = np.empty((min(tile, stop - start), n))
    code = kernel.code
    scale = float(kernel.variance) if code is not None else 1.0
    for s in range(start, stop, tile):
        e = min(s + tile, stop)
        b = buf[: e - s]
        _sq_dist_rows(pts, s, e, b)
        if code == EXPONENTIAL:
            np.sqrt(b, out=b)
            b *= -1.0 / kernel.corrlen
            np.exp(b, out=b)
        elif code == GAUSSIAN:
            b *= -1.0 / (kernel.gauss_denom * kernel.corrlen * kernel.corrlen)
            np.exp(b, out=b)
        else:
            np.sqrt(b, out=b)
            b[...] = kernel.profile(b)
        _row_dot(b, y, out, s, e, scale)


def row_blocks(n: int, threads: int) -> list[tuple[int, int]]:
    size = -(-n // max(threads, 1))
    return [(s, min(s + size, n)) for s in range(0, n, size)]


@dataclass(eq=False)
class KleOperator:
    patch: TensorPatch
    trial_bases: list[BSplineBasis]
    interp_bases: list[BSplineBasis]
    kernel: CovarianceKernel
    Z: list[UnivariateMatrix]
    chol: list[CholeskyFactor]
    Bt: list[UnivariateMatrix]
    lu: list[LUFactor]
    M: list[UnivariateMatrix]
    grid: GrevilleGrid
    threads: int = 1
    _pts_T: np.ndarray = field(init=False, repr=False)
    _pool: ThreadPoolExecutor | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self._pts_T = np.ascontiguousarray(self.grid.points.T)

    @property
    def N(self) -> int:
        return int(np.prod([b.n for b in self.trial_bases]))

    @property
    def N_interp(self) -> int:
        return int(np.prod([b.n for b in self.interp_bases]))

    @property
    def dim(self) -> int:
        return len(self.trial_bases)

    @property
    def shape(self) -> tuple[int, int]:
        return self.N, self.N

    def with_threads(self, threads: int) -> "KleOperator":
        return KleOperator(
            self.patch, self.trial_bases, self.interp_bases, self.kernel,
            self.Z, self.chol, self.Bt, self.lu, self.M, self.grid, threads,
        )

    # Kronecker factor lists, slowest direction first
    def _rev(self, items):
        return list(items)[::-1]

    def kernel_apply(self, y: np.ndarray) -> np.ndarray:
        """Stage 5: ``Gamma @ y`` with Gamma evaluated on the fly."""
        n = self.grid.size
        y = np.ascontiguousarray(y, dtype=float)
        out = np.empty(n)
        blocks = row_blocks(n, self.threads)
        if self.threads == 1 or len(blocks) == 1:
            _kernel_block(self._pts_T, y, out, 0, n, self.kernel)
            return out
        if self._pool is None or self._pool._max_workers != self.threads:
            self._pool = ThreadPoolExecutor(max_workers=self.threads)
        futs = [self._pool.submit(_kernel_block, self._pts_T, y, out, s, e, self.kernel) for s, e in blocks]
        for f in futs:
            f.result()
        return out

    def apply(self, v: np.ndarray, timings: dict | None = None) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.N,):
            raise DimensionError(f"expected vector of length {self.N}, got shape {v.shape}")
        clock = time.perf_counter
        marks = [clock()]
        chol, M, lu = self._rev(self.chol), self._rev(m.data for m in self.M), self._rev(self.lu)
        J = self.grid.jacobian_sqrt

        x = kron_solve_cholesky(chol, v, side="backward")
        marks.append(clock())
        x = kron_matvec(M, x)
        marks.append(clock())
        x = kron_solve_lu(lu, x, transpose=True)
        marks.append(clock())
        x = J * x
        marks.append(clock())
        x = self.kernel_apply(x)
        marks.append(clock())
        x = J * x
        marks.append(clock())
        x = kron_solve_lu(lu, x, transpose=False)
        marks.append(clock())
        x = kron_matvec([m.T for m in M], x)
        marks.append(clock())
        x = kron_solve_cholesky(chol, x, side="forward")
        marks.append(clock())

        if timings is not None:
            for name, a, b in zip(STAGES, marks, marks[1:]):
                timings[name] = timings.get(name, 0.0) + (b - a)
            timings["calls"] = timings.get("calls", 0) + 1
        return x

    __matmul__ = apply

    def right_factor(self, V: np.ndarray, standard_form: bool = True) -> np.ndarray:
        """``J Bt^{-T} M L^{-T} V`` for a block of columns (stages 1-4)."""
        X = kron_solve_cholesky(self._rev(self.chol), V, side="backward") if standard_form else V
        X = kron_matvec(self._rev(m.data for m in self.M), X)
        X = kron_solve_lu(self._rev(self.lu), X, transpose=True)
        return self.grid.jacobian_sqrt[:, None] * X

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def build_operator(
    patch: TensorPatch,
    trial_bases: Sequence[BSplineBasis],
    interp_bases: Sequence[BSplineBasis],
    kernel: CovarianceKernel,
    threads: int | None = None,
) -> KleOperator:
    trial_bases, interp_bases = list(trial_bases), list(interp_bases)
    if not (len(trial_bases) == len(interp_bases) == patch.dim):
        raise DimensionError(
            f"patch is {patch.dim}-D but got {len(trial_bases)} trial and {len(interp_bases)} interpolation bases"
        )
    Z = [trial_mass_matrix(b) for b in trial_bases]
    chol = [cholesky_factor(z) for z in Z]
    Bt = [collocation_matrix(b) for b in interp_bases]
    lu = [lu_factor(b) for b in Bt]
    M = [mixed_mass_matrix(bi, bt) for bi, bt in zip(interp_bases, trial_bases)]
    grid = build_greville_grid(patch, interp_bases)
    return KleOperator(patch, trial_bases, interp_bases, kernel, Z, chol, Bt, lu, M, grid, threads or default_threads())


def assemble_dense_ibq(op: KleOperator, cap: int = DENSE_CAP, standard_form: bool = True, block: int = 512) -> np.ndarray:
    """Explicit IBQ matrix (``A'`` by default, ``A~`` without the preconditioner).

    Diagnostics only: allocates N x N and N~ x N arrays.
    """
    if op.N > cap:
        raise ValueError(f"refusing dense assembly: N = {op.N} exceeds cap {cap}")
    W = op.right_factor(np.eye(op.N), standard_form=standard_form)
    pts = op.grid.points
    GW = np.empty_like(W)
    for s in range(0, W.shape[0], block):
        GW[s: s + block] = kernel_matrix(op.kernel, pts[s: s + block], pts) @ W
    A = W.T @ GW
    return 0.5 * (A + A.T)
