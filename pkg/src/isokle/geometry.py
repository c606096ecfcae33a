"""NURBS patches F: [0,1]^d -> R^d and Jacobian determinants.

Control points and weights are stored flat in vectorization order (first
parametric index fastest). Grid evaluation contracts the univariate
collocation matrices against the weighted control net, so evaluating on a
tensor grid never touches more than one (points x controls) factor at a
time.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .splines import BSplineBasis, DomainError, collocation, greville_abscissae, greville_sides
from .tensor import kron_matvec

JACOBIAN_FLOOR = 1e-14


class SingularGeometryError(ValueError):
    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True, eq=False)
class TensorPatch:
    bases: tuple[BSplineBasis, ...]
    control_points: np.ndarray  # (prod n_k, d)
    weights: np.ndarray  # (prod n_k,)

    def __post_init__(self):
        bases = tuple(self.bases)
        object.__setattr__(self, "bases", bases)
        d = len(bases)
        if not 1 <= d <= 3:
            raise ValueError(f"patch dimension must be 1-3, got {d}")
        ncp = int(np.prod([b.n for b in bases]))
        cp = np.asarray(self.control_points, dtype=float).reshape(ncp, -1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if cp.shape != (ncp, d):
            raise ValueError(f"control points must have shape ({ncp}, {d}), got {cp.shape}")
        if w.shape != (ncp,):
            raise ValueError(f"weights must have length {ncp}, got {w.size}")
        if np.any(w <= 0):
            raise ValueError("NURBS weights must be positive")
        cp.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return len(self.bases)

    @property
    def degrees(self) -> list[int]:
        return [b.degree for b in self.bases]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "degrees": self.degrees,
            "knots": [list(map(float, b.knots)) for b in self.bases],
            "control_points": self.control_points.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TensorPatch":
        missing = {"dim", "degrees", "knots", "control_points", "weights"} - set(data)
        if missing:
            raise ValueError(f"geometry file missing fields: {sorted(missing)}")
        d = int(data["dim"])
        if len(data["degrees"]) != d or len(data["knots"]) != d:
            raise ValueError("degrees/knots must have one entry per dimension")
        bases = [BSplineBasis.from_knots(k, p) for k, p in zip(data["knots"], data["degrees"])]
        return cls(tuple(bases), np.asarray(data["control_points"], dtype=float), np.asarray(data["weights"], dtype=float))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "TensorPatch":
        return cls.from_json(json.loads(Path(path).read_text()))


def _eval_grid(patch: TensorPatch, params: Sequence[np.ndarray], sides=None, derivatives: bool = False):
    """Physical points (and Jacobians) on the tensor grid of ``params``.

    Returns ``x`` of shape (npts, d) and, if requested, ``jac`` of shape
    (npts, d, d) with ``jac[m, i, j] = dF_i/dxi_j``.
    """
    d = patch.dim
    if len(params) != d:
        raise ValueError(f"need {d} parameter arrays, got {len(params)}")
    sides = sides if sides is not None else ["right"] * d
    vals, ders = [], []
    for b, x, s in zip(patch.bases, params, sides):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < 0) or np.any(x > 1):
            raise DomainError(f"parameter values outside [0, 1]: {x[(x < 0) | (x > 1)][:5]}")
        vals.append(collocation(b, x, side=s).toarray())
        if derivatives:
            ders.append(collocation(b, x, side=s, derivative=1).toarray())
    w = patch.weights
    net = np.column_stack([w, patch.control_points * w[:, None]])  # (ncp, d+1)
    # factors are listed slowest first
    homog = kron_matvec(vals[::-1], net)
    W = homog[:, 0]
    X = homog[:, 1:] / W[:, None]
    if not derivatives:
        return X, None
    jac = np.empty((X.shape[0], d, d))
    for j in range(d):
        facs = [ders[k] if k == j else vals[k] for k in range(d)]
        dh = kron_matvec(facs[::-1], net)
        jac[:, :, j] = (dh[:, 1:] - X * dh[:, :1]) / W[:, None]
    return X, jac


def _det(jac: np.ndarray) -> np.ndarray:
    d = jac.shape[-1]
    if d == 1:
        return jac[:, 0, 0].copy()
    if d == 2:
        return jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    return np.linalg.det(jac)


def map_point(patch: TensorPatch, xi_hat) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi_hat, dtype=float))
    if xi.size != patch.dim:
        raise ValueError(f"expected {patch.dim} parameters, got {xi.size}")
    x, _ = _eval_grid(patch, [[v] for v in xi])
    return x[0]


def map_grid(patch: TensorPatch, params: Sequence[np.ndarray], sides=None) -> np.ndarray:
    return _eval_grid(patch, params, sides)[0]


def jacobian_determinant(patch: TensorPatch, xi_hat) -> float:
    xi = np.atleast_1d(np.asarray(xi_hat, dtype=float))
    if xi.size != patch.dim:
        raise ValueError(f"expected {patch.dim} parameters, got {xi.size}")
    _, jac = _eval_grid(patch, [[v] for v in xi], derivatives=True)
    det = float(_det(jac)[0])
    if not det > 0:
        raise SingularGeometryError(f"non-positive Jacobian determinant {det:g} at parameter {tuple(xi)}", tuple(xi))
    return det


def grid_jacobian(patch: TensorPatch, params: Sequence[np.ndarray], sides=None, floor: float = JACOBIAN_FLOOR):
    """Points, determinants and the number of floored entries on a grid.

    Negative determinants (inverted elements) always raise; values in
    ``[0, floor)`` are clamped to ``floor`` and counted.
    """
    x, jac = _eval_grid(patch, params, sides, derivatives=True)
    det = _det(jac)
    bad = np.flatnonzero(~np.isfinite(det) | (det < -floor))
    if bad.size:
        m = int(bad[0])
        raise SingularGeometryError(f"non-positive Jacobian determinant {det[m]:g} at physical point {x[m]}", x[m])
    low = det < floor
    n_floor = int(np.count_nonzero(low))
    if n_floor:
        warnings.warn(f"{n_floor} Jacobian determinants clamped to {floor:g}", RuntimeWarning, stacklevel=2)
        det = np.where(low, floor, det)
    return x, det, n_floor


@dataclass
class GrevilleGrid:
    params: list[np.ndarray]
    sides: list[np.ndarray]
    points: np.ndarray  # (Ntilde, d)
    jacobian_sqrt: np.ndarray  # (Ntilde,)
    floored: int = 0
    extents: tuple[int, ...] = field(default=())

    @property
    def size(self) -> int:
        return self.points.shape[0]


def build_greville_grid(patch: TensorPatch, interp_bases: Sequence[BSplineBasis], floor: float = JACOBIAN_FLOOR) -> GrevilleGrid:
    if len(interp_bases) != patch.dim:
        raise ValueError(f"need {patch.dim} interpolation bases, got {len(interp_bases)}")
    params = [greville_abscissae(b) for b in interp_bases]
    sides = [greville_sides(b) for b in interp_bases]
    x, det, nfl = grid_jacobian(patch, params, sides, floor)
    return GrevilleGrid(params, sides, x, np.sqrt(det), nfl, tuple(b.n for b in interp_bases))


# ---------------------------------------------------------------------------
# constructors


def identity_patch(bases: Sequence[BSplineBasis]) -> TensorPatch:
    """Identity map on [0,1]^d: control points on the Greville lattice."""
    g = [greville_abscissae(b) for b in bases]
    mesh = np.meshgrid(*g[::-1], indexing="ij")
    cp = np.column_stack([m.ravel() for m in mesh[::-1]])
    return TensorPatch(tuple(bases), cp, np.ones(cp.shape[0]))


def box_patch(lengths: Sequence[float]) -> TensorPatch:
    """Axis-aligned box [0, L1] x ... with trilinear (degree 1) bases."""
    lin = BSplineBasis.from_knots([0, 0, 1, 1], 1)
    p = identity_patch([lin] * len(lengths))
    return TensorPatch(p.bases, p.control_points * np.asarray(lengths, dtype=float), p.weights)


def unit_interval() -> TensorPatch:
    return box_patch([1.0])


def unit_cube(d: int = 3) -> TensorPatch:
    return box_patch([1.0] * d)


def scale_patch(patch: TensorPatch, factor: float | Sequence[float]) -> TensorPatch:
    f = np.broadcast_to(np.asarray(factor, dtype=float), (patch.dim,))
    return TensorPatch(patch.bases, patch.control_points * f, patch.weights)


def affine_patch(patch: TensorPatch, matrix: np.ndarray, shift: np.ndarray) -> TensorPatch:
    cp = patch.control_points @ np.asarray(matrix, dtype=float).T + np.asarray(shift, dtype=float)
    return TensorPatch(patch.bases, cp, patch.weights)


def _arc_net(radius: float, quarters: int) -> tuple[list[list[float]], list[float]]:
    """Rational quadratic control net of an arc from angle 0 in 90 degree pieces."""
    s = 1.0 / math.sqrt(2.0)
    pts, wts = [[radius, 0.0]], [1.0]
    for q in range(quarters):
        a0, a1 = q * math.pi / 2, (q + 1) * math.pi / 2
        c0, s0 = round(math.cos(a0)), round(math.sin(a0))
        c1, s1 = round(math.cos(a1)), round(math.sin(a1))
        pts.append([radius * (c0 + c1), radius * (s0 + s1)])
        wts.append(s)
        pts.append([radius * c1, radius * s1])
        wts.append(1.0)
    return pts, wts


def quarter_annulus(inner: float = 1.0, outer: float = 2.0) -> TensorPatch:
    """Quarter annulus; direction 1 radial (p=1), direction 2 circumferential (p=2)."""
    rad = BSplineBasis.from_knots([0, 0, 1, 1], 1)
    circ = BSplineBasis.from_knots([0, 0, 0, 1, 1, 1], 2)
    arcs = [_arc_net(r, 1) for r in (inner, outer)]
    cps, ws = [], []
    for j in range(3):
        for pts, wts in arcs:
            cps.append(pts[j])
            ws.append(wts[j])
    return TensorPatch((rad, circ), np.array(cps), np.array(ws))


CYLINDER_INNER = 9.0
CYLINDER_OUTER = 10.0
CYLINDER_HEIGHT = 20.0
CYLINDER_LENGTH = 10.0  # characteristic length L


def half_open_cylinder(inner: float = CYLINDER_INNER, outer: float = CYLINDER_OUTER, height: float = CYLINDER_HEIGHT) -> TensorPatch:
    """Half of a hollow circular cylinder.

    Direction 1 runs around the half circle as two rational quadratic arcs
    joined C^0 at parameter 0.5, direction 2 through the wall from the
    outer to the inner radius (keeps the map orientation-preserving) and
    direction 3 along the axis, both linear.
    """
    circ = BSplineBasis.from_knots([0, 0, 0, 0.5, 0.5, 1, 1, 1], 2)
    lin = BSplineBasis.from_knots([0, 0, 1, 1], 1)
    cps, ws = [], []
    for z in (0.0, height):
        for r in (outer, inner):
            p, w = _arc_net(r, 2)
            cps.extend([q + [z] for q in p])
            ws.extend(w)
    return TensorPatch((circ, lin, lin), np.array(cps), np.array(ws))


BUILTIN_GEOMETRIES = {
    "unit_interval": unit_interval,
    "unit_square": lambda: unit_cube(2),
    "unit_cube": lambda: unit_cube(3),
    "quarter_annulus": quarter_annulus,
    "half_open_cylinder": half_open_cylinder,
}


def load_geometry(spec: str) -> TensorPatch:
    """A built-in geometry name or a path to a geometry JSON file."""
    if spec in BUILTIN_GEOMETRIES:
        return BUILTIN_GEOMETRIES[spec]()
    path = Path(spec)
    if not path.exists():
        data_file = Path(__file__).parent / "data" / f"{spec}.json"
        if data_file.exists():
            path = data_file
        else:
            raise FileNotFoundError(f"no geometry {spec!r} (not a built-in name or file)")
    return TensorPatch.load(path)


def patch_volume(patch: TensorPatch, q: int | None = None) -> float:
    from .quadrature import element_quadrature

    rational = bool(np.ptp(patch.weights) > 0)
    params, wts = [], []
    for b in patch.bases:
        # rational determinants are not polynomial; a long rule reaches round-off
        qk = q or (max(2 * b.degree + 2, 24) if rational else 2 * b.degree + 2)
        x, w = element_quadrature(b.element_boundaries(), qk)
        params.append(x)
        wts.append(w)
    _, det, _ = grid_jacobian(patch, params)
    W = wts[0]
    for w in wts[1:]:
        W = np.kron(w, W)
    return float(W @ det)
