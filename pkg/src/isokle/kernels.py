"""Stationary isotropic covariance kernels and their pull-back.

Kernels are functions of the Euclidean distance only. The two shipped
families carry an integer ``code`` that the compiled stage-5 loop in
:mod:`isokle.operator` understands; kernels added through
:func:`register_kernel` without a code run through a NumPy fallback.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

EXPONENTIAL = 0
GAUSSIAN = 1


@dataclass(frozen=True)
class CovarianceKernel:
    family: str
    variance: float = 1.0
    corrlen: float = 1.0
    # Gaussian: sigma^2 exp(-r^2 / (gauss_denom * corrlen^2))
    gauss_denom: float = 1.0

    def __post_init__(self):
        if self.family not in _REGISTRY:
            raise ValueError(f"unknown kernel family {self.family!r}; known: {sorted(_REGISTRY)}")
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if not self.corrlen > 0:
            raise ValueError(f"correlation length must be positive, got {self.corrlen}")
        if self.gauss_denom not in (1, 2, 1.0, 2.0):
            raise ValueError(f"gauss_denom must be 1 or 2, got {self.gauss_denom}")

    @property
    def code(self) -> int | None:
        return _REGISTRY[self.family][1]

    def profile(self, r: np.ndarray) -> np.ndarray:
        """Covariance as a function of distance."""
        return _REGISTRY[self.family][0](self, np.asarray(r, dtype=float))

    def scaled(self, factor: float) -> "CovarianceKernel":
        return CovarianceKernel(self.family, self.variance, self.corrlen * factor, self.gauss_denom)


def _exponential(k: CovarianceKernel, r: np.ndarray) -> np.ndarray:
    return k.variance * np.exp(-r / k.corrlen)


def _gaussian(k: CovarianceKernel, r: np.ndarray) -> np.ndarray:
    return k.variance * np.exp(-(r * r) / (k.gauss_denom * k.corrlen * k.corrlen))


def _constant(k: CovarianceKernel, r: np.ndarray) -> np.ndarray:
    return np.full_like(r, k.variance)


_REGISTRY: dict[str, tuple[Callable[[CovarianceKernel, np.ndarray], np.ndarray], int | None]] = {
    "exponential": (_exponential, EXPONENTIAL),
    "gaussian": (_gaussian, GAUSSIAN),
}


def register_kernel(name: str, profile: Callable[[CovarianceKernel, np.ndarray], np.ndarray]) -> None:
    """Add a distance-based kernel family (evaluated with NumPy)."""
    if name in _REGISTRY:
        raise ValueError(f"kernel family {name!r} already registered")
    _REGISTRY[name] = (profile, None)


def kernel_families() -> list[str]:
    return sorted(_REGISTRY)


# rank-one test kernel: handy for closed-form checks, not a physical model
register_kernel("constant", _constant)


def distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between rows of ``x`` and ``y``."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def eval_kernel(kernel: CovarianceKernel, x, x_prime) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    xp = np.asarray(x_prime, dtype=float)
    if x.shape[-1:] != xp.shape[-1:]:
        raise ValueError(f"point dimensions differ: {x.shape} vs {xp.shape}")
    r = np.sqrt(np.sum((x - xp) ** 2, axis=-1))
    out = kernel.profile(r)
    return float(out) if np.ndim(out) == 0 else out


def kernel_matrix(kernel: CovarianceKernel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return kernel.profile(distances(x, y))


def eval_pullback(kernel: CovarianceKernel, patch, xi_hat, xi_hat_prime) -> float:
    """Kernel between the images of two parameter points."""
    from .geometry import map_point

    return eval_kernel(kernel, map_point(patch, xi_hat), map_point(patch, xi_hat_prime))
