"""Univariate B-spline bases on the parameter interval [0, 1].

Knot vectors are open (clamped). Evaluation follows the usual Cox-de Boor
triangle, vectorized over evaluation points. Points that sit exactly on a
knot use the right-continuous span by default; ``side="left"`` selects the
left limit instead, which is how duplicated Greville points on C^-1 lines
are told apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sps


class SplineError(ValueError):
    """Invalid knot vector or spline operation argument."""


class DomainError(SplineError):
    """Parameter value outside [0, 1]."""


@dataclass(frozen=True)
class KnotVector:
    knots: tuple[float, ...]
    degree: int

    def __post_init__(self):
        p = self.degree
        kv = tuple(float(k) for k in self.knots)
        object.__setattr__(self, "knots", kv)
        if p < 0:
            raise SplineError(f"degree must be non-negative, got {p}")
        if len(kv) < 2 * (p + 1):
            raise SplineError(f"knot vector too short for degree {p}: {len(kv)} knots")
        if any(b < a for a, b in zip(kv, kv[1:])):
            raise SplineError("knots must be non-decreasing")
        if kv[0] != 0.0 or kv[-1] != 1.0:
            raise SplineError("knot vector must span [0, 1]")
        if kv[: p + 1] != (0.0,) * (p + 1) or kv[-(p + 1):] != (1.0,) * (p + 1):
            raise SplineError("knot vector must be open: end knots repeated degree+1 times")
        if len(kv) > 2 * (p + 1) and (kv[p + 1] == 0.0 or kv[-(p + 2)] == 1.0):
            raise SplineError("end knot multiplicity exceeds degree+1")
        for value, mult in _multiplicities(kv)[1:-1]:
            if mult > p + 1:
                raise SplineError(f"interior knot {value} has multiplicity {mult} > {p + 1}")

    @property
    def n(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.knots)

    def breakpoints(self) -> list[tuple[float, int]]:
        """Distinct knot values with multiplicities."""
        return _multiplicities(self.knots)


def _multiplicities(knots: Sequence[float]) -> list[tuple[float, int]]:
    out: list[tuple[float, int]] = []
    for k in knots:
        if out and out[-1][0] == k:
            out[-1] = (k, out[-1][1] + 1)
        else:
            out.append((k, 1))
    return out


@dataclass(frozen=True)
class BSplineBasis:
    knot_vector: KnotVector

    @classmethod
    def from_knots(cls, knots: Sequence[float], degree: int) -> "BSplineBasis":
        return cls(KnotVector(tuple(knots), degree))

    @classmethod
    def uniform(cls, degree: int, elements: int, continuity: int | None = None) -> "BSplineBasis":
        """Open basis on [0, 1] with ``elements`` equal spans."""
        base = cls.from_knots([0.0] * (degree + 1) + [1.0] * (degree + 1), degree)
        if elements == 1:
            return base
        if continuity is None:
            continuity = degree - 1
        return refine_uniform(base, elements, continuity)

    @property
    def degree(self) -> int:
        return self.knot_vector.degree

    @property
    def knots(self) -> np.ndarray:
        return self.knot_vector.array

    @property
    def n(self) -> int:
        return self.knot_vector.n

    @property
    def num_elements(self) -> int:
        return len(self.knot_vector.breakpoints()) - 1

    def element_boundaries(self) -> np.ndarray:
        return np.array([v for v, _ in self.knot_vector.breakpoints()])

    def mesh_size(self) -> float:
        return float(np.max(np.diff(self.element_boundaries())))


def find_spans(basis: BSplineBasis, x: np.ndarray, side: str | np.ndarray = "right") -> np.ndarray:
    """Index ``i`` of the knot span used to evaluate at each point.

    ``side`` may be a scalar or a per-point array of "left"/"right" (or a
    boolean array that is True where the left limit is wanted).
    """
    kv = basis.knots
    p, n = basis.degree, basis.n
    x = np.asarray(x, dtype=float)
    right = np.searchsorted(kv, x, side="right") - 1
    left = np.searchsorted(kv, x, side="left") - 1
    if isinstance(side, str):
        if side not in ("left", "right"):
            raise SplineError(f"side must be 'left' or 'right', got {side!r}")
        use_left = np.full(x.shape, side == "left")
    else:
        side = np.asarray(side)
        use_left = side if side.dtype == bool else (side == "left")
    spans = np.where(use_left, left, right)
    return np.clip(spans, p, n - 1)


def _check_domain(x: np.ndarray) -> None:
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        bad = x[(x < 0.0) | (x > 1.0) | ~np.isfinite(x)]
        raise DomainError(f"parameter values outside [0, 1]: {bad[:5]}")


def basis_functions(basis: BSplineBasis, x, side="right", derivatives: int = 0):
    """Nonzero basis functions (and derivatives) at each point.

    Returns ``(spans, values)`` with ``values`` of shape
    ``(derivatives + 1, npts, p + 1)``; entry ``[k, m, j]`` is the k-th
    derivative of basis function ``spans[m] - p + j`` at ``x[m]``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_domain(x)
    p = basis.degree
    kv = basis.knots
    spans = find_spans(basis, x, side)
    npts = x.size

    # ndu[j][r]: lower triangle holds knot differences, upper the basis values
    ndu = np.zeros((p + 1, p + 1, npts))
    ndu[0, 0] = 1.0
    left = np.zeros((p + 1, npts))
    right = np.zeros((p + 1, npts))
    for j in range(1, p + 1):
        left[j] = x - kv[spans + 1 - j]
        right[j] = kv[spans + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    nd = min(derivatives, p)
    out = np.zeros((derivatives + 1, npts, p + 1))
    for j in range(p + 1):
        out[0, :, j] = ndu[j, p]
    if nd == 0:
        return spans, out

    a = np.zeros((2, p + 1, npts))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[0, 0] = 1.0
        for k in range(1, nd + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            out[k, :, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, nd + 1):
        out[k] *= fac
        fac *= p - k
    return spans, out


def evaluate_basis(basis: BSplineBasis, xi: float, side: str = "right") -> tuple[int, np.ndarray]:
    """First active basis index and the p+1 possibly-nonzero values at ``xi``."""
    spans, vals = basis_functions(basis, [xi], side)
    return int(spans[0] - basis.degree), vals[0, 0].copy()


def collocation(basis: BSplineBasis, x, side="right", derivative: int = 0) -> sps.csr_matrix:
    """Sparse matrix C[m, j] = d^k B_j(x_m) for k = ``derivative``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = basis.degree
    spans, vals = basis_functions(basis, x, side, derivatives=derivative)
    rows = np.repeat(np.arange(x.size), p + 1)
    cols = (spans[:, None] - p + np.arange(p + 1)[None, :]).ravel()
    return sps.csr_matrix((vals[derivative].ravel(), (rows, cols)), shape=(x.size, basis.n))


def greville_abscissae(basis: BSplineBasis) -> np.ndarray:
    kv = basis.knots
    p, n = basis.degree, basis.n
    if p == 0:
        return 0.5 * (kv[:-1] + kv[1:])
    g = np.array([kv[i + 1: i + p + 1].sum() / p for i in range(n)])
    # averaging can lose the exact end values and exact repeated-knot values
    g[0], g[-1] = 0.0, 1.0
    for i in range(n):
        window = kv[i + 1: i + p + 1]
        if window[0] == window[-1]:
            g[i] = window[0]
    return g


def greville_sides(basis: BSplineBasis) -> np.ndarray:
    """Boolean mask: True where a Greville point must use the left limit.

    Coincident Greville points occur at knots of multiplicity p+1. The first
    point of each coincident pair belongs to the span on its left.
    """
    g = greville_abscissae(basis)
    left = np.zeros(g.size, dtype=bool)
    left[:-1] = g[:-1] == g[1:]
    return left


def refine_uniform(basis: BSplineBasis, subdivisions: int, continuity: int) -> BSplineBasis:
    """Split every nonempty span into ``subdivisions`` equal parts.

    New knots get multiplicity ``p - continuity``; existing knots keep theirs.
    """
    p = basis.degree
    if subdivisions < 1:
        raise SplineError(f"subdivisions must be >= 1, got {subdivisions}")
    if continuity >= p or continuity < -1:
        raise SplineError(f"continuity must lie in [-1, {p - 1}], got {continuity}")
    mult = p - continuity
    new: list[float] = []
    bps = basis.knot_vector.breakpoints()
    for (a, ma), (b, _) in zip(bps, bps[1:]):
        new.extend([a] * ma)
        for s in range(1, subdivisions):
            # rational arithmetic keeps nested refinements bitwise consistent
            t = float(Fraction(a) + (Fraction(b) - Fraction(a)) * Fraction(s, subdivisions))
            new.extend([t] * mult)
    new.extend([bps[-1][0]] * bps[-1][1])
    return BSplineBasis.from_knots(new, p)


def elevate_degree(basis: BSplineBasis, target_p: int) -> BSplineBasis:
    """Knot vector of the degree-elevated space (continuity preserved)."""
    p = basis.degree
    if target_p < p:
        raise SplineError(f"target degree {target_p} below current degree {p}")
    inc = target_p - p
    new: list[float] = []
    for value, mult in basis.knot_vector.breakpoints():
        new.extend([value] * (mult + inc))
    return BSplineBasis.from_knots(new, target_p)


def with_degree(basis: BSplineBasis, degree: int) -> BSplineBasis:
    """Same breakpoints at another degree, keeping each knot's continuity
    where the new degree allows it."""
    p = basis.degree
    if degree >= p:
        return elevate_degree(basis, degree)
    bps = basis.knot_vector.breakpoints()
    new = [0.0] * (degree + 1)
    for value, mult in bps[1:-1]:
        cont = min(p - mult, degree - 1)
        new.extend([value] * (degree - cont))
    new.extend([1.0] * (degree + 1))
    return BSplineBasis.from_knots(new, degree)


def set_continuity(basis: BSplineBasis, value: float, continuity: int) -> BSplineBasis:
    """Force the multiplicity of an existing interior breakpoint."""
    p = basis.degree
    if continuity >= p or continuity < -1:
        raise SplineError(f"continuity must lie in [-1, {p - 1}], got {continuity}")
    bps = basis.knot_vector.breakpoints()
    if value not in [v for v, _ in bps[1:-1]]:
        raise SplineError(f"{value} is not an interior breakpoint")
    new: list[float] = []
    for v, m in bps:
        new.extend([v] * ((p - continuity) if v == value else m))
    return BSplineBasis.from_knots(new, p)


def reduced_continuity_knots(basis: BSplineBasis, max_continuity: int = 0) -> list[float]:
    """Interior breakpoints whose continuity is at most ``max_continuity``."""
    p = basis.degree
    return [v for v, m in basis.knot_vector.breakpoints()[1:-1] if p - m <= max_continuity]


def derive_space(
    geometry_basis: BSplineBasis,
    degree: int,
    subdivisions: int = 1,
    continuity: int | None = None,
    split_c0: bool = False,
) -> BSplineBasis:
    """Analysis space on the breakpoints of a geometry basis.

    The geometry's own knots keep their continuity (capped at ``degree - 1``),
    every existing span is split into ``subdivisions`` pieces joined with
    ``continuity`` (default ``degree - 1``), and with ``split_c0`` the
    geometry's C^0 lines become C^-1 lines.
    """
    if continuity is None:
        continuity = degree - 1
    b = with_degree(geometry_basis, degree)
    if subdivisions > 1:
        if degree == 0:
            continuity = -1
        b = refine_uniform(b, subdivisions, continuity)
    elif subdivisions < 1:
        raise SplineError(f"subdivisions must be >= 1, got {subdivisions}")
    if split_c0 and degree > 0:
        for v in reduced_continuity_knots(geometry_basis, 0):
            b = set_continuity(b, v, -1)
    return b
