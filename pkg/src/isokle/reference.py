"""Independent oracles: dense Galerkin, closed-form 1D spectrum, error metrics.

Everything here favours clarity over speed and allocates full matrices, so
sizes are capped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
from scipy.optimize import brentq

from .eigensolver import KleSpectrum, _fix_signs
from .geometry import TensorPatch, grid_jacobian
from .kernels import CovarianceKernel, kernel_matrix
from .quadrature import element_quadrature, merged_breakpoints, trial_mass_matrix
from .splines import BSplineBasis, collocation
from .tensor import kron_solve_lu

DENSE_CAP = 4096


@dataclass
class DenseGalerkinProblem:
    A: np.ndarray
    B: np.ndarray
    q: list[int]
    trial_bases: list[BSplineBasis]
    patch: TensorPatch

    @property
    def N(self) -> int:
        return self.A.shape[0]


@dataclass
class GaussGrid:
    params: list[np.ndarray]
    weights: np.ndarray  # tensor weights times det DF
    points: np.ndarray
    det: np.ndarray


def gauss_grid(patch: TensorPatch, bases: Sequence[BSplineBasis], q: int | Sequence[int]) -> GaussGrid:
    """Tensor Gauss grid on the common breakpoints of ``bases`` and the patch."""
    qs = [q] * patch.dim if np.ndim(q) == 0 else list(q)
    params, wts = [], []
    for k in range(patch.dim):
        x, w = element_quadrature(merged_breakpoints(bases[k], patch.bases[k]), qs[k])
        params.append(x)
        wts.append(w)
    pts, det, _ = grid_jacobian(patch, params)
    w = wts[0]
    for wk in wts[1:]:
        w = np.kron(wk, w)
    return GaussGrid(params, w * det, pts, det)


def _sparse_kron(mats):
    # mats in direction order; first index fastest
    out = mats[0]
    for m in mats[1:]:
        out = sps.kron(m, out, format="csr")
    return out


def _gamma_sandwich(kernel: CovarianceKernel, pts: np.ndarray, W: np.ndarray, block: int = 512) -> np.ndarray:
    """W^T Gamma W for Gamma over all pairs of ``pts``."""
    out = np.zeros((W.shape[1], W.shape[1]))
    GW = np.empty((min(block, pts.shape[0]), W.shape[1]))
    for s in range(0, pts.shape[0], block):
        e = min(s + block, pts.shape[0])
        np.matmul(kernel_matrix(kernel, pts[s:e], pts), W, out=GW[: e - s])
        out += W[s:e].T @ GW[: e - s]
    return 0.5 * (out + out.T)


def assemble_dense_galerkin(
    patch: TensorPatch,
    trial_bases: Sequence[BSplineBasis],
    kernel: CovarianceKernel,
    q: int | Sequence[int] | None = None,
    cap: int = DENSE_CAP,
) -> DenseGalerkinProblem:
    """Galerkin matrices with a tensor Gauss rule on every element pair.

    The default rule uses ``p + 1`` points per direction.
    """
    trial_bases = list(trial_bases)
    N = int(np.prod([b.n for b in trial_bases]))
    if N > cap:
        raise ValueError(f"refusing dense Galerkin assembly: N = {N} exceeds cap {cap}")
    if q is None:
        q = [b.degree + 1 for b in trial_bases]
    qs = [q] * patch.dim if np.ndim(q) == 0 else list(q)
    for qk, b in zip(qs, trial_bases):
        if qk < b.degree + 1:
            raise ValueError(f"quadrature order {qk} below p + 1 = {b.degree + 1}")
    grid = gauss_grid(patch, trial_bases, qs)
    C = _sparse_kron([collocation(b, x) for b, x in zip(trial_bases, grid.params)])
    # trial functions carry 1/sqrt(det); dx contributes det
    W = C.multiply((grid.weights / np.sqrt(grid.det))[:, None]).toarray()
    A = _gamma_sandwich(kernel, grid.points, W)
    B = np.array([[1.0]])
    for b in trial_bases:
        B = np.kron(trial_mass_matrix(b).toarray(), B)
    return DenseGalerkinProblem(A, B, qs, trial_bases, patch)


def solve_dense(problem: DenseGalerkinProblem, num_modes: int) -> KleSpectrum:
    """Largest generalized eigenpairs of ``A v = lambda B v``."""
    N = problem.N
    m = min(num_modes, N)
    w, V = sla.eigh(problem.A, problem.B, subset_by_index=[N - m, N - 1])
    w, V = w[::-1], V[:, ::-1]
    return KleSpectrum(w.copy(), _fix_signs(V), np.zeros(m), 0, 0, list(problem.trial_bases), problem.patch)


# ---------------------------------------------------------------------------
# closed-form 1D exponential spectrum


def exponential_roots_1d(corrlen: float, length: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies and parity of the 1D exponential-kernel eigenproblem.

    On the symmetric interval [-a, a] the even modes cos(w x) satisfy
    ``c - w tan(w a) = 0`` and the odd modes sin(w x) satisfy
    ``w + c tan(w a) = 0`` with ``c = 1/corrlen``. Both are solved in the
    pole-free forms below, one root per half period.
    """
    c = 1.0 / corrlen
    a = 0.5 * length

    def even(t):  # t = w a
        return t * math.sin(t) - c * a * math.cos(t)

    def odd(t):
        return t * math.cos(t) + c * a * math.sin(t)

    roots, parity = [], []
    k = 0
    while len(roots) < count:
        lo, hi = k * math.pi, k * math.pi + 0.5 * math.pi
        roots.append(brentq(even, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500) / a)
        parity.append(0)
        if len(roots) < count:
            lo, hi = k * math.pi + 0.5 * math.pi, (k + 1) * math.pi
            roots.append(brentq(odd, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500) / a)
            parity.append(1)
        k += 1
    return np.array(roots), np.array(parity)


def analytic_exponential_spectrum_1d(b: float, L: float, length: float, count: int, variance: float = 1.0) -> np.ndarray:
    """Descending eigenvalues of ``variance * exp(-|x - y| / (b L))`` on an interval."""
    c = 1.0 / (b * L)
    w, _ = exponential_roots_1d(b * L, length, count)
    return 2.0 * c * variance / (w**2 + c**2)


def analytic_exponential_modes_1d(b: float, L: float, length: float, count: int, x: np.ndarray) -> np.ndarray:
    """L2-normalized eigenfunctions on [0, length] sampled at ``x``: (len(x), count)."""
    a = 0.5 * length
    w, par = exponential_roots_1d(b * L, length, count)
    s = np.asarray(x, dtype=float)[:, None] - a
    out = np.where(par == 0, np.cos(w * s), np.sin(w * s))
    norm2 = np.where(par == 0, a + np.sin(2 * w * a) / (2 * w), a - np.sin(2 * w * a) / (2 * w))
    return out / np.sqrt(norm2)


# ---------------------------------------------------------------------------
# error metrics


def kernel_interpolation_error(
    patch: TensorPatch,
    interp_bases: Sequence[BSplineBasis],
    kernel: CovarianceKernel,
    q: int | None = None,
    block: int = 512,
) -> float:
    """Relative L2 error of the spline interpolant of the scaled pulled-back kernel.

    The kernel ``G(s, t) = sqrt(det DF(s)) Gamma(x(s), x(t)) sqrt(det DF(t))``
    is interpolated at the Greville points of the tensor interpolation space
    in both arguments; the error is measured with a Gauss rule on the
    parameter domain squared.
    """
    from .geometry import build_greville_grid
    from .quadrature import collocation_matrix, lu_factor

    interp_bases = list(interp_bases)
    if q is None:
        q = max(b.degree for b in interp_bases) + 3
    grev = build_greville_grid(patch, interp_bases)
    Jg = grev.jacobian_sqrt
    G_grev = Jg[:, None] * kernel_matrix(kernel, grev.points, grev.points) * Jg[None, :]
    lu = [lu_factor(collocation_matrix(b)) for b in interp_bases][::-1]
    coef = kron_solve_lu(lu, G_grev)
    coef = kron_solve_lu(lu, np.ascontiguousarray(coef.T)).T  # Bt^-1 G Bt^-T

    gg = gauss_grid(patch, interp_bases, q)
    # Gauss weights in the parameter domain (det DF is part of G)
    w_hat = gg.weights / gg.det
    Jq = np.sqrt(gg.det)
    Ct = _sparse_kron([collocation(b, x) for b, x in zip(interp_bases, gg.params)])
    K = (Ct @ coef.T).T  # coef @ Ct^T, shape (Ntilde, Nq)
    K = np.ascontiguousarray(K)
    num = den = 0.0
    for s in range(0, gg.points.shape[0], block):
        e = min(s + block, gg.points.shape[0])
        G = Jq[s:e, None] * kernel_matrix(kernel, gg.points[s:e], gg.points) * Jq[None, :]
        Gt = Ct[s:e] @ K
        ww = w_hat[s:e, None] * w_hat[None, :]
        num += float(np.sum(ww * (G - Gt) ** 2))
        den += float(np.sum(ww * G**2))
    return math.sqrt(num / den)


def _power_norm(A: np.ndarray, tol: float = 1e-6, maxiter: int = 10_000, seed: int = 0) -> float:
    """Spectral norm of a symmetric matrix by power iteration on ``A``."""
    if not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(maxiter):
        # A^2 keeps the iteration monotone when the extreme eigenvalues have opposite signs
        y = A @ (A @ x)
        nrm = np.linalg.norm(y)
        new = math.sqrt(nrm)
        x = y / nrm
        if abs(new - est) <= tol * new:
            return new
        est = new
    return est


def operator_error_norms(A: np.ndarray, A_tilde: np.ndarray, tol: float = 1e-6) -> tuple[float, float]:
    """Relative 2-norm and Frobenius-norm distances of ``A_tilde`` from ``A``."""
    A = np.asarray(A, dtype=float)
    A_tilde = np.asarray(A_tilde, dtype=float)
    if A.shape != A_tilde.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {A_tilde.shape}")
    E = A - A_tilde
    two = _power_norm(E, tol) / _power_norm(A, tol)
    fro = np.linalg.norm(E) / np.linalg.norm(A)
    return float(two), float(fro)


def sweep_rate(h: Sequence[float], err: Sequence[float]) -> float:
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


# ---------------------------------------------------------------------------
# dense IBQ via explicit Kronecker products


def dense_ibq_oracle(op, standard_form: bool = True, cap: int = 4096) -> np.ndarray:
    """Assemble the IBQ matrix from explicit Kronecker products of all factors."""
    if op.N_interp > cap or op.N > cap:
        raise ValueError(f"refusing dense oracle: N = {op.N}, N~ = {op.N_interp}, cap {cap}")

    def kron(mats):
        out = np.array([[1.0]])
        for m in mats:
            out = np.kron(m, out)
        return out

    M = kron([m.toarray() for m in op.M])
    Bt = kron([b.toarray() for b in op.Bt])
    J = op.grid.jacobian_sqrt
    G = kernel_matrix(op.kernel, op.grid.points, op.grid.points)
    BtinvT_M = np.linalg.solve(Bt.T, M)
    inner = BtinvT_M.T @ (J[:, None] * G * J[None, :]) @ BtinvT_M
    if standard_form:
        L = np.linalg.cholesky(kron([z.toarray() for z in op.Z]))
        inner = sla.solve_triangular(L, inner, lower=True)
        inner = sla.solve_triangular(L, inner.T, lower=True).T
    return 0.5 * (inner + inner.T)
