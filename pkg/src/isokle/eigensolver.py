"""Implicitly restarted Lanczos and KLE mode post-processing.

The Lanczos basis is fully reorthogonalized (two Gram-Schmidt passes)
since the Krylov dimension stays small. Restarts apply the unwanted Ritz
values as exact shifts through QR steps on the projected tridiagonal
matrix, the classic implicit restart.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .geometry import TensorPatch, grid_jacobian
from .splines import BSplineBasis, collocation
from .tensor import kron_matvec, kron_solve_cholesky

log = logging.getLogger(__name__)


class LanczosNotConverged(RuntimeError):
    def __init__(self, message: str, spectrum: "KleSpectrum"):
        super().__init__(message)
        self.spectrum = spectrum


@dataclass
class LanczosConfig:
    num_modes: int
    krylov_dim: int | None = None
    tol: float = 1e-10
    max_restarts: int = 300
    seed: int = 0

    def resolved_krylov_dim(self, n: int) -> int:
        m = self.krylov_dim or max(2 * self.num_modes + 1, 20)
        return min(m, n)

    def validate(self, n: int) -> None:
        if not 0 < self.num_modes < n:
            raise ValueError(f"num_modes must satisfy 0 < M < N = {n}, got {self.num_modes}")
        if self.krylov_dim is not None and self.krylov_dim <= self.num_modes:
            raise ValueError(f"krylov_dim ({self.krylov_dim}) must exceed num_modes ({self.num_modes})")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


@dataclass
class LanczosResult:
    values: np.ndarray  # descending
    vectors: np.ndarray  # (n, nev)
    residuals: np.ndarray
    matvecs: int
    restarts: int
    converged: bool


def _orthogonalize(V: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = V.T @ w
    w = w - V @ h
    h2 = V.T @ w
    return w - V @ h2, h + h2


def lanczos(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    nev: int,
    ncv: int | None = None,
    tol: float = 1e-10,
    max_restarts: int = 300,
    seed: int = 0,
) -> LanczosResult:
    """Largest ``nev`` eigenpairs of a symmetric operator given by ``matvec``."""
    m = min(ncv or max(2 * nev + 1, 20), n)
    if m <= nev and m < n:
        raise ValueError(f"Krylov dimension {m} must exceed nev {nev}")
    rng = np.random.default_rng(seed)
    V = np.zeros((n, m + 1))
    alpha = np.zeros(m)
    beta = np.zeros(m)
    v0 = rng.standard_normal(n)
    V[:, 0] = v0 / np.linalg.norm(v0)
    k = 0
    matvecs = 0
    restarts = 0
    anorm = 0.0

    while True:
        for j in range(k, m):
            w = matvec(V[:, j])
            matvecs += 1
            w, h = _orthogonalize(V[:, : j + 1], w)
            alpha[j] = h[j]
            b = np.linalg.norm(w)
            anorm = max(anorm, abs(alpha[j]) + b)
            if b > 1e-12 * max(anorm, 1e-300) or j + 1 >= n:
                beta[j] = b
                if b > 0 and j + 1 < n:
                    V[:, j + 1] = w / b
                elif j + 1 < n:
                    V[:, j + 1] = 0.0
            else:
                # invariant subspace found: continue with a fresh direction
                beta[j] = 0.0
                r = rng.standard_normal(n)
                r, _ = _orthogonalize(V[:, : j + 1], r)
                V[:, j + 1] = r / np.linalg.norm(r)

        T = np.diag(alpha) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
        theta, S = np.linalg.eigh(T)
        order = np.argsort(theta)[::-1]
        theta, S = theta[order], S[:, order]
        scale = max(abs(theta[0]), np.finfo(float).tiny)
        resid = np.abs(beta[m - 1] * S[m - 1, :])
        conv = resid[:nev] <= tol * scale
        nconv = int(np.count_nonzero(conv))
        if nconv == nev or m == n or restarts >= max_restarts:
            X = V[:, :m] @ S[:, :nev]
            return LanczosResult(theta[:nev].copy(), X, resid[:nev].copy(), matvecs, restarts, bool(nconv == nev or m == n))

        restarts += 1
        k = min(nev + min(nconv, (m - nev) // 2), m - 1)
        shifts = theta[k:]
        Q = np.eye(m)
        for mu in shifts:
            Qj, _ = sla.qr(T - mu * np.eye(m))
            T = Qj.T @ T @ Qj
            Q = Q @ Qj
        f = V[:, m] * beta[m - 1]
        fk = V[:, :m] @ Q[:, k] * T[k, k - 1] + f * Q[m - 1, k - 1]
        V[:, :k] = V[:, :m] @ Q[:, :k]
        alpha[:k] = np.diag(T)[:k]
        beta[: k - 1] = np.diag(T, -1)[: k - 1]
        bk = np.linalg.norm(fk)
        fk, _ = _orthogonalize(V[:, :k], fk)
        bk = np.linalg.norm(fk)
        if bk > 1e-12 * max(anorm, 1e-300):
            beta[k - 1] = bk
            V[:, k] = fk / bk
        else:
            beta[k - 1] = 0.0
            r = rng.standard_normal(n)
            r, _ = _orthogonalize(V[:, :k], r)
            V[:, k] = r / np.linalg.norm(r)
        V[:, k + 1:] = 0.0


@dataclass
class KleSpectrum:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # (N, M) trial-space coefficients, B-orthonormal
    residuals: np.ndarray
    iterations: int
    restarts: int = 0
    trial_bases: list[BSplineBasis] = field(default_factory=list)
    patch: TensorPatch | None = None
    psd_violations: int = 0

    @property
    def num_modes(self) -> int:
        return self.eigenvalues.size

    def truncated(self, m: int) -> "KleSpectrum":
        return KleSpectrum(
            self.eigenvalues[:m], self.vectors[:, :m], self.residuals[:m], self.iterations,
            self.restarts, self.trial_bases, self.patch, self.psd_violations,
        )


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def finalize_modes(values, std_vectors, residuals, op, tol: float):
    """Clip eigenvalues, map to trial coefficients and normalize."""
    values = np.array(values, dtype=float)
    lam1 = max(abs(values[0]), np.finfo(float).tiny) if values.size else 1.0
    neg = values < 0
    violations = int(np.count_nonzero(values < -tol * lam1))
    if violations:
        warnings.warn(f"{violations} eigenvalues below -tol*lambda_1: operator not numerically PSD", RuntimeWarning, stacklevel=3)
    values[neg & (values > -tol * lam1)] = 0.0
    chol = op.chol[::-1]
    vecs = kron_solve_cholesky(chol, std_vectors, side="backward")
    Bv = kron_matvec([z.data for z in op.Z[::-1]], vecs)
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, Bv))
    vecs = _fix_signs(vecs / norms)
    return values, vecs, violations


def solve_spectrum(op, config: LanczosConfig, timings: dict | None = None) -> KleSpectrum:
    """Largest eigenpairs of the standard-form operator, mapped back to modes.

    ``timings``, when given, accumulates per-stage wall times of every product.
    """
    config.validate(op.N)
    matvec = op.apply if timings is None else (lambda v: op.apply(v, timings))
    res = lanczos(
        matvec, op.N, config.num_modes, config.resolved_krylov_dim(op.N),
        config.tol, config.max_restarts, config.seed,
    )
    values, vecs, viol = finalize_modes(res.values, res.vectors, res.residuals, op, config.tol)
    spec = KleSpectrum(values, vecs, res.residuals, res.matvecs, res.restarts, list(op.trial_bases), op.patch, viol)
    log.info("lanczos: %d modes, %d matvecs, %d restarts", spec.num_modes, res.matvecs, res.restarts)
    if not res.converged:
        raise LanczosNotConverged(
            f"Lanczos did not converge in {config.max_restarts} restarts "
            f"(max residual {res.residuals.max():.3g}, tol*lambda_1 {config.tol * abs(values[0]):.3g})",
            spec,
        )
    return spec


# ---------------------------------------------------------------------------
# evaluation of modes


def _grid_params(points_or_grid, dim: int):
    if isinstance(points_or_grid, (list, tuple)) and len(points_or_grid) == dim and all(
        np.ndim(p) == 1 for p in points_or_grid
    ):
        return [np.asarray(p, dtype=float) for p in points_or_grid]
    raise TypeError("expected a list of per-direction parameter arrays")


def eigenfunctions_on_grid(spectrum: KleSpectrum, params: Sequence[np.ndarray], modes=None) -> np.ndarray:
    """phi_i on the tensor grid of ``params``: array (npts, len(modes))."""
    patch, bases = spectrum.patch, spectrum.trial_bases
    params = _grid_params(list(params), len(bases))
    modes = range(spectrum.num_modes) if modes is None else modes
    V = spectrum.vectors[:, list(modes)]
    C = [collocation(b, x).toarray() for b, x in zip(bases, params)]
    vals = kron_matvec(C[::-1], V)
    _, det, _ = grid_jacobian(patch, params)
    return vals / np.sqrt(det)[:, None]


def eval_eigenfunction(spectrum: KleSpectrum, patch: TensorPatch, trial_bases, mode: int, xi_hat) -> float:
    """phi_mode at the image of one parameter point."""
    if not 0 <= mode < spectrum.num_modes:
        raise IndexError(f"mode {mode} not in spectrum of {spectrum.num_modes} modes")
    xi = np.atleast_1d(np.asarray(xi_hat, dtype=float))
    C = [collocation(b, [x]).toarray() for b, x in zip(trial_bases, xi)]
    val = kron_matvec(C[::-1], spectrum.vectors[:, mode])[0]
    _, det, _ = grid_jacobian(patch, [[x] for x in xi])
    return float(val / np.sqrt(det[0]))


def variance_field(spectrum: KleSpectrum, params: Sequence[np.ndarray], num_modes: int | None = None) -> np.ndarray:
    """Truncated pointwise variance sum_i lambda_i phi_i(x)^2 on a grid."""
    m = spectrum.num_modes if num_modes is None else num_modes
    npts = int(np.prod([len(p) for p in params]))
    if m == 0:
        return np.zeros(npts)
    phi = eigenfunctions_on_grid(spectrum, params, range(m))
    return phi**2 @ spectrum.eigenvalues[:m]


@dataclass
class Realizations:
    coefficients: np.ndarray  # (count, M) standard normal draws
    mean: float | np.ndarray
    seed: int

    def evaluate(self, spectrum: KleSpectrum, params: Sequence[np.ndarray]) -> np.ndarray:
        """Fields on a grid: array (count, npts)."""
        m = self.coefficients.shape[1]
        npts = int(np.prod([len(p) for p in params]))
        base = np.broadcast_to(np.asarray(self.mean, dtype=float), (npts,))
        if m == 0 or self.coefficients.shape[0] == 0:
            return np.tile(base, (self.coefficients.shape[0], 1))
        phi = eigenfunctions_on_grid(spectrum, params, range(m))
        amp = phi * np.sqrt(spectrum.eigenvalues[:m])[None, :]
        return base[None, :] + self.coefficients @ amp.T


def sample_realizations(spectrum: KleSpectrum, mean=0.0, count: int = 1, seed: int = 0, num_modes: int | None = None) -> Realizations:
    """Draw KLE coefficients; the random variables are taken i.i.d. N(0, 1)."""
    m = spectrum.num_modes if num_modes is None else num_modes
    rng = np.random.default_rng(seed)
    return Realizations(rng.standard_normal((count, m)), mean, seed)
