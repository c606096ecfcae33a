from pathlib import Path

import numpy as np
import pytest

from isokle.geometry import TensorPatch, half_open_cylinder, identity_patch, quarter_annulus
from isokle.kernels import CovarianceKernel
from isokle.splines import BSplineBasis, derive_space, set_continuity

ROOT = Path(__file__).resolve().parents[1]
GOLDENS = ROOT / "goldens"


def warped_interval(seed: int = 0) -> TensorPatch:
    """Quadratic, monotone, non-affine map of [0, 1] onto [0, 1.7]."""
    rng = np.random.default_rng(seed)
    b = BSplineBasis.uniform(2, 3)
    cp = np.sort(np.concatenate([[0.0], rng.uniform(0.2, 1.5, b.n - 2), [1.7]]))
    return TensorPatch((b,), cp[:, None], rng.uniform(0.7, 1.3, b.n))


def warped_cube(seed: int = 0) -> TensorPatch:
    """Identity cube with jittered interior control points and an affine shear."""
    rng = np.random.default_rng(seed)
    bases = [BSplineBasis.uniform(2, 2)] * 3
    p = identity_patch(bases)
    cp = p.control_points + 0.03 * rng.standard_normal(p.control_points.shape)
    A = np.array([[1.2, 0.1, 0.0], [0.0, 0.9, 0.2], [0.1, 0.0, 1.1]])
    return TensorPatch(p.bases, cp @ A.T, p.weights)


def random_instance(seed: int, max_dofs: int = 1000):
    """Small random problem: non-identity geometry, mixed degrees and
    continuities, and one C^-1 line in the interpolation space.

    Draws are repeated until both spaces have at most ``max_dofs`` functions.
    """
    rng = np.random.default_rng(seed)
    while True:
        out = _draw_instance(rng, seed)
        if max(int(np.prod([b.n for b in bs])) for bs in out[1:3]) <= max_dofs:
            return out


def _draw_instance(rng, seed):
    d = 1 + seed % 3
    if d == 1:
        patch = warped_interval(seed)
    elif d == 2:
        patch = quarter_annulus(1.0, 1.5 + rng.uniform(0, 1))
    else:
        patch = half_open_cylinder(2.0, 3.0, 4.0) if seed % 2 else warped_cube(seed)
    trial, interp = [], []
    for k, gb in enumerate(patch.bases):
        p = int(rng.integers(1, 4))
        pt = int(rng.integers(max(p, 1), 5))
        subs = int(rng.integers(1, 4)) if d == 3 else int(rng.integers(2, 6))
        trial.append(derive_space(gb, p, subs, int(rng.integers(0, p))))
        ib = derive_space(gb, pt, subs + int(rng.integers(0, 3)), int(rng.integers(0, pt)), split_c0=True)
        interp.append(ib)
    # force one discontinuous interpolation line when the geometry has none
    if all(b.knots.tolist().count(v) < b.degree + 1 for b in interp for v in b.element_boundaries()[1:-1]):
        k = int(np.argmax([b.num_elements for b in interp]))
        mid = interp[k].element_boundaries()[interp[k].num_elements // 2]
        interp[k] = set_continuity(interp[k], mid, -1)
    family = "gaussian" if seed % 2 == 0 else "exponential"
    # smooth kernels with long correlation push the tenth eigenvalue to round-off
    corrlen = float(rng.uniform(0.15, 0.5) if family == "gaussian" else rng.uniform(0.3, 2.0))
    kernel = CovarianceKernel(family, variance=float(rng.uniform(0.5, 2)), corrlen=corrlen)
    return patch, trial, interp, kernel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


FINE_1D_INTERP_ELEMENTS = 12288


@pytest.fixture(scope="session")
def fine_exponential_1d():
    """Exponential kernel b = L = 1 on [0, 1]: p=2 C^1 trial with 256 elements,
    p=2 C^0 interpolation, single thread. Returns (spectrum, seconds, reference)."""
    import time

    from isokle.eigensolver import LanczosConfig, solve_spectrum
    from isokle.operator import build_operator
    from isokle.reference import analytic_exponential_spectrum_1d

    from isokle.geometry import unit_interval

    t0 = time.perf_counter()
    op = build_operator(
        unit_interval(),
        [BSplineBasis.uniform(2, 256)],
        [BSplineBasis.uniform(2, FINE_1D_INTERP_ELEMENTS, continuity=0)],
        CovarianceKernel("exponential", 1.0, 1.0),
        threads=1,
    )
    spec = solve_spectrum(op, LanczosConfig(20))
    elapsed = time.perf_counter() - t0
    return spec, elapsed, analytic_exponential_spectrum_1d(1.0, 1.0, 1.0, 20)
