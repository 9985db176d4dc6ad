"""Projection primitives and planar set algebra.

Every constraint set used by the solvers is a :class:`ProjectableSet`: an
immutable object with a Euclidean projection ``project(p)`` and a membership
test ``contains(p)``.  Closed-form projections are provided for boxes, affine
slabs, quadric annuli and the second-order cone; convex polygons support
projection onto and out of the polygon; Bernstein curves support a
nearest-point projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

DEFAULT_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid geometric data (dimension mismatch, degenerate polygon, ...)."""


def _vec(p, name="point") -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise GeometryError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class ProjectableSet:
    """Closed set with a Euclidean projection and a membership test."""

    tol: float = DEFAULT_TOL

    def project(self, p) -> np.ndarray:
        raise NotImplementedError

    def contains(self, p, tol: float | None = None) -> bool:
        raise NotImplementedError

    def distance(self, p) -> float:
        p = _vec(p)
        return float(np.linalg.norm(p - self.project(p)))

    def project_rows(self, P) -> np.ndarray:
        """Project each row of ``P``; sets with a batched formula override this."""
        P = np.asarray(P, float)
        return np.vstack([self.project(row) for row in P]) if len(P) else P.copy()

    @property
    def dim(self) -> int | None:
        """Ambient dimension, or ``None`` when any dimension is accepted."""
        return None


@dataclass(frozen=True, eq=False)
class WholeSpace(ProjectableSet):
    """The unconstrained set; projection is the identity."""

    tol: float = DEFAULT_TOL

    def project(self, p) -> np.ndarray:
        return _vec(p).copy()

    def contains(self, p, tol=None) -> bool:
        return bool(np.all(np.isfinite(_vec(p))))


# --------------------------------------------------------------------------
# Closed-form sets


@dataclass(frozen=True, eq=False)
class BoxSet(ProjectableSet):
    lower: np.ndarray
    upper: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        lo, hi = np.broadcast_arrays(np.atleast_1d(lo), np.atleast_1d(hi))
        if np.any(lo > hi):
            raise GeometryError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    @property
    def dim(self):
        return self.lower.size

    def project(self, p):
        return project_box(p, self)

    def contains(self, p, tol=None):
        tol = self.tol if tol is None else tol
        p = _vec(p)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))


def project_box(p, s: BoxSet) -> np.ndarray:
    p = _vec(p)
    if p.size != s.lower.size:
        raise GeometryError(f"dimension mismatch: point {p.size}, box {s.lower.size}")
    return np.minimum(np.maximum(p, s.lower), s.upper)


def weighted_box(center, weights, half_width: float, tol: float = DEFAULT_TOL) -> BoxSet:
    """Set ``{x : max_i w_i |x_i - c_i| <= L}`` expressed as an axis-aligned box."""
    c, w = _vec(center), _vec(weights, "weights")
    if np.any(w <= 0):
        raise GeometryError("weights must be positive")
    r = half_width / w
    return BoxSet(c - r, c + r, tol=tol)


@dataclass(frozen=True, eq=False)
class AffineSlabSet(ProjectableSet):
    """``{x : lower <= a.x <= upper}``; a hyperplane when lower == upper."""

    normal: np.ndarray
    lower: float = -math.inf
    upper: float = math.inf
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        a = _vec(self.normal, "normal")
        if not np.linalg.norm(a) > 0:
            raise GeometryError("slab normal must be nonzero")
        if self.lower > self.upper:
            raise GeometryError("slab lower bound exceeds upper bound")
        object.__setattr__(self, "normal", _frozen(a))
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))

    @property
    def dim(self):
        return self.normal.size

    def project(self, p):
        return project_affine_slab(p, self)

    def contains(self, p, tol=None):
        tol = self.tol if tol is None else tol
        v = float(self.normal @ _vec(p))
        return self.lower - tol <= v <= self.upper + tol


def project_affine_slab(p, s: AffineSlabSet) -> np.ndarray:
    p = _vec(p)
    a = s.normal
    if p.size != a.size:
        raise GeometryError(f"dimension mismatch: point {p.size}, normal {a.size}")
    v = a @ p
    if v > s.upper:
        return p - a * (v - s.upper) / (a @ a)
    if v < s.lower:
        return p - a * (v - s.lower) / (a @ a)
    return p.copy()


@dataclass(frozen=True, eq=False)
class QuadricAnnulusSet(ProjectableSet):
    """``{x : lower <= 0.5 * |x - center|^2 <= upper}``.

    Radii are ``sqrt(2 * lower)`` and ``sqrt(2 * upper)``; ``upper=inf`` gives
    the exterior of a ball, ``lower=0`` a ball.
    """

    center: np.ndarray
    lower: float = 0.0
    upper: float = math.inf
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(_vec(self.center, "center")))
        if not 0 <= self.lower <= self.upper:
            raise GeometryError("annulus needs 0 <= lower <= upper")
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))

    @classmethod
    def from_radii(cls, center, r_inner: float = 0.0, r_outer: float = math.inf, tol=DEFAULT_TOL):
        return cls(center, 0.5 * r_inner**2, 0.5 * r_outer**2, tol=tol)

    @property
    def r_inner(self) -> float:
        return math.sqrt(2.0 * self.lower)

    @property
    def r_outer(self) -> float:
        return math.sqrt(2.0 * self.upper)

    @property
    def dim(self):
        return self.center.size

    def project(self, p):
        return project_quadric_annulus(p, self)

    def contains(self, p, tol=None):
        tol = self.tol if tol is None else tol
        r = float(np.linalg.norm(_vec(p) - self.center))
        return self.r_inner - tol <= r <= self.r_outer + tol


def project_quadric_annulus(p, s: QuadricAnnulusSet) -> np.ndarray:
    p = _vec(p)
    if p.size != s.center.size:
        raise GeometryError(f"dimension mismatch: point {p.size}, center {s.center.size}")
    d = p - s.center
    q = 0.5 * (d @ d)
    if q > s.upper:
        return s.center + d * (s.r_outer / math.sqrt(2.0 * q))
    if q < s.lower:
        if q == 0.0:
            # every inner-sphere point is nearest; pick +e1
            e1 = np.zeros_like(p)
            e1[0] = 1.0
            return s.center + s.r_inner * e1
        return s.center + d * (s.r_inner / math.sqrt(2.0 * q))
    return p.copy()


def ball(center, radius: float, tol: float = DEFAULT_TOL) -> QuadricAnnulusSet:
    return QuadricAnnulusSet.from_radii(center, 0.0, radius, tol=tol)


@dataclass(frozen=True, eq=False)
class SecondOrderConeSet(ProjectableSet):
    """``{(x, t) : |x| <= t}`` with ``t`` the last coordinate."""

    tol: float = DEFAULT_TOL

    def project(self, p):
        return project_soc(p)

    def contains(self, p, tol=None):
        tol = self.tol if tol is None else tol
        p = _vec(p)
        return float(np.linalg.norm(p[:-1])) <= p[-1] + tol


def project_soc(p) -> np.ndarray:
    p = _vec(p)
    if p.size < 2:
        raise GeometryError("second-order cone needs dimension >= 2")
    x, t = p[:-1], p[-1]
    nx = float(np.linalg.norm(x))
    if nx <= t:
        return p.copy()
    if nx <= -t:
        return np.zeros_like(p)
    scale = 0.5 * (nx + t)
    out = np.empty_like(p)
    out[:-1] = scale * x / nx
    out[-1] = scale
    return out


@dataclass(frozen=True, eq=False)
class SingletonSet(ProjectableSet):
    """``{value}``; hosts equality constraints ``h(x) = value``."""

    value: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "value", _frozen(_vec(self.value, "value")))

    @classmethod
    def zeros(cls, n: int, tol=DEFAULT_TOL):
        return cls(np.zeros(n), tol=tol)

    @property
    def dim(self):
        return self.value.size

    def project(self, p):
        p = _vec(p)
        if p.size != self.value.size:
            raise GeometryError(f"dimension mismatch: point {p.size}, singleton {self.value.size}")
        return self.value.copy()

    def contains(self, p, tol=None):
        tol = self.tol if tol is None else tol
        return bool(np.all(np.abs(_vec(p) - self.value) <= tol))


@dataclass(frozen=True, eq=False)
class ReplicatedSet(ProjectableSet):
    """Cartesian product of ``count`` copies of ``base``, each acting on ``block_dim`` coordinates."""

    base: ProjectableSet
    count: int
    block_dim: int
    tol: float = DEFAULT_TOL

    @property
    def dim(self):
        return self.count * self.block_dim

    def _blocks(self, p):
        p = _vec(p)
        if p.size != self.dim:
            raise GeometryError(f"dimension mismatch: point {p.size}, product {self.dim}")
        return p.reshape(self.count, self.block_dim)

    def project(self, p):
        return self.base.project_rows(self._blocks(p)).ravel()

    def contains(self, p, tol=None):
        return all(self.base.contains(b, tol) for b in self._blocks(p))


@dataclass(frozen=True, eq=False)
class ProductSet(ProjectableSet):
    """Cartesian product of heterogeneous sets with explicit block sizes."""

    sets: tuple
    dims: tuple
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if len(self.sets) != len(self.dims):
            raise GeometryError("sets and dims must have equal length")
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def dim(self):
        return sum(self.dims)

    def _split(self, p):
        p = _vec(p)
        if p.size != self.dim:
            raise GeometryError(f"dimension mismatch: point {p.size}, product {self.dim}")
        return np.split(p, np.cumsum(self.dims)[:-1])

    def project(self, p):
        return np.concatenate([s.project(b) for s, b in zip(self.sets, self._split(p))])

    def contains(self, p, tol=None):
        return all(s.contains(b, tol) for s, b in zip(self.sets, self._split(p)))


# --------------------------------------------------------------------------
# Planar polygons


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def signed_area(vertices) -> float:
    v = np.asarray(vertices, float)
    w = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(_cross(v, w)))


def _dedupe(v: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    keep = [0]
    for i in range(1, len(v)):
        if np.linalg.norm(v[i] - v[keep[-1]]) > eps:
            keep.append(i)
    v = v[keep]
    if len(v) > 1 and np.linalg.norm(v[0] - v[-1]) <= eps:
        v = v[:-1]
    return v


@dataclass(frozen=True, eq=False)
class ConvexPolygon2D(ProjectableSet):
    """Strictly convex counterclockwise polygon; as a set it is the closed interior."""

    vertices: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        v = np.asarray(self.vertices, float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError(f"polygon vertices must have shape (k, 2), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        v = _dedupe(v)
        if len(v) < 3:
            raise GeometryError("degenerate polygon: fewer than 3 distinct vertices")
        if signed_area(v) <= 0:
            raise GeometryError("polygon must be counterclockwise with positive area")
        e = np.roll(v, -1, axis=0) - v
        turns = _cross(e, np.roll(e, -1, axis=0))
        scale = np.linalg.norm(e, axis=1) * np.linalg.norm(np.roll(e, -1, axis=0), axis=1)
        if np.any(turns <= 1e-12 * scale):
            raise GeometryError("polygon is not strictly convex")
        object.__setattr__(self, "vertices", _frozen(v))

    @classmethod
    def rectangle(cls, center, half_extents, angle: float = 0.0, tol=DEFAULT_TOL):
        hx, hy = half_extents
        local = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]], float)
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return cls(local @ rot.T + _vec(center), tol=tol)

    @classmethod
    def regular(cls, center, radius: float, k: int, phase: float = 0.0, tol=DEFAULT_TOL):
        th = phase + 2 * np.pi * np.arange(k) / k
        return cls(_vec(center) + radius * np.c_[np.cos(th), np.sin(th)], tol=tol)

    @property
    def dim(self):
        return 2

    @property
    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cr = _cross(v, w)
        a = 0.5 * cr.sum()
        return ((v + w) * cr[:, None]).sum(axis=0) / (6.0 * a)

    def translated(self, offset) -> "ConvexPolygon2D":
        return ConvexPolygon2D(self.vertices + _vec(offset), tol=self.tol)

    def reflected(self, about=None) -> "ConvexPolygon2D":
        """Point reflection ``x -> 2c - x``; orientation is preserved."""
        c = np.zeros(2) if about is None else _vec(about)
        return ConvexPolygon2D(2 * c - self.vertices, tol=self.tol)

    def edge_distances(self, p) -> np.ndarray:
        """Signed distance from ``p`` to each edge's supporting line (positive inside)."""
        e = self.edges
        return _cross(e, _vec(p) - self.vertices) / np.linalg.norm(e, axis=1)

    def signed_distance(self, p) -> float:
        """Negative inside, positive outside."""
        p = _vec(p)
        depth = float(np.min(self.edge_distances(p)))
        if depth >= 0:
            return -depth
        return float(np.linalg.norm(p - self.nearest_boundary_point(p)))

    def nearest_boundary_point(self, p) -> np.ndarray:
        p = _vec(p)
        v, e = self.vertices, self.edges
        t = np.clip(np.einsum("ij,ij->i", p - v, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
        cand = v + t[:, None] * e
        d2 = np.einsum("ij,ij->i", cand - p, cand - p)
        # argmin keeps the lowest edge index on ties
        return cand[int(np.argmin(d2))]

    def project(self, p):
        return project_polygon(p, self, "onto")

    def project_rows(self, P):
        return _project_polygon_rows(P, self, "onto")

    def contains(self, p, tol=None):
        tol = self.tol if tol is None else tol
        return bool(np.min(self.edge_distances(p)) >= -tol)


def project_polygon(p, poly: ConvexPolygon2D, mode: str = "onto") -> np.ndarray:
    """Nearest point of the closed polygon (``onto``) or of its closed exterior (``out-of``)."""
    p = _vec(p)
    if p.size != 2:
        raise GeometryError("polygon projection needs a 2-D point")
    depth = float(np.min(poly.edge_distances(p)))
    if mode == "onto":
        return p.copy() if depth >= 0 else poly.nearest_boundary_point(p)
    if mode == "out-of":
        return poly.nearest_boundary_point(p) if depth > 0 else p.copy()
    raise ValueError(f"unknown polygon projection mode {mode!r}")


def _project_polygon_rows(P, poly: ConvexPolygon2D, mode: str) -> np.ndarray:
    """Row-wise ``project_polygon``; same tie-breaking as the scalar version."""
    P = np.asarray(P, float).reshape(-1, 2)
    v, e = poly.vertices, poly.edges
    rel = P[:, None, :] - v[None]
    depth = np.min(_cross(e[None], rel) / np.linalg.norm(e, axis=1), axis=1)
    t = np.clip(np.einsum("nij,ij->ni", rel, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
    cand = v[None] + t[..., None] * e[None]
    diff = cand - P[:, None, :]
    k = np.argmin(np.einsum("nij,nij->ni", diff, diff), axis=1)
    nearest = cand[np.arange(len(P)), k]
    if mode == "onto":
        move = depth < 0
    elif mode == "out-of":
        move = depth > 0
    else:
        raise ValueError(f"unknown polygon projection mode {mode!r}")
    return np.where(move[:, None], nearest, P)


def minkowski_sum(a: ConvexPolygon2D, b) -> ConvexPolygon2D:
    """Exact Minkowski sum by merging the angle-sorted edge sequences.

    ``b`` may also be a single 2-D point, in which case the result is ``a``
    translated by it.
    """
    if not isinstance(b, ConvexPolygon2D):
        pt = np.asarray(b, float).reshape(-1)
        if pt.size != 2:
            raise GeometryError("minkowski_sum operand must be a polygon or a 2-D point")
        return a.translated(pt)
    pa, pb = _start_lowest(a.vertices), _start_lowest(b.vertices)
    na, nb = len(pa), len(pb)
    ea = np.roll(pa, -1, axis=0) - pa
    eb = np.roll(pb, -1, axis=0) - pb
    out = [pa[0] + pb[0]]
    i = j = 0
    while i < na or j < nb:
        if i == na:
            step = eb[j]
            j += 1
        elif j == nb:
            step = ea[i]
            i += 1
        else:
            cr = _cross(ea[i], eb[j])
            if cr > 0:
                step = ea[i]
                i += 1
            elif cr < 0:
                step = eb[j]
                j += 1
            else:
                step = ea[i] + eb[j]
                i += 1
                j += 1
        out.append(out[-1] + step)
    return ConvexPolygon2D(_drop_collinear(np.array(out[:-1])), tol=a.tol)


def _start_lowest(v: np.ndarray) -> np.ndarray:
    k = int(np.lexsort((v[:, 0], v[:, 1]))[0])
    return np.roll(v, -k, axis=0)


def _drop_collinear(v: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    v = _dedupe(v)
    changed = True
    while changed and len(v) > 3:
        changed = False
        prev, nxt = np.roll(v, 1, axis=0), np.roll(v, -1, axis=0)
        turn = _cross(v - prev, nxt - v)
        scale = np.linalg.norm(v - prev, axis=1) * np.linalg.norm(nxt - v, axis=1)
        flat = np.abs(turn) <= eps * np.maximum(scale, 1e-300)
        if np.any(flat):
            v = v[~flat]
            changed = True
    return v


@dataclass(frozen=True, eq=False)
class MinkowskiObstacle2D(ProjectableSet):
    """Configuration-space polygon with keep-out (exterior) or keep-in (interior) semantics."""

    sum: ConvexPolygon2D
    mode: str = "keep-out"
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.mode not in ("keep-out", "keep-in"):
            raise GeometryError(f"unknown obstacle mode {self.mode!r}")

    @property
    def dim(self):
        return 2

    def project(self, p):
        return project_polygon(p, self.sum, "out-of" if self.mode == "keep-out" else "onto")

    def project_rows(self, P):
        return _project_polygon_rows(P, self.sum, "out-of" if self.mode == "keep-out" else "onto")

    def contains(self, p, tol=None):
        tol = self.tol if tol is None else tol
        depth = float(np.min(self.sum.edge_distances(p)))
        if self.mode == "keep-in":
            return depth >= -tol
        return depth <= tol

    def collides(self, p) -> bool:
        """Robot centered at ``p`` overlaps the obstacle (closed sets)."""
        return self.sum.contains(p, tol=0.0)


def c_obstacle(robot, obstacle: ConvexPolygon2D, mode: str = "keep-out") -> MinkowskiObstacle2D:
    """Translation C-obstacle ``obstacle ⊕ (−robot)``.

    ``robot`` holds vertices relative to its reference point; ``None`` or a
    single point means a point robot.
    """
    if robot is None:
        return MinkowskiObstacle2D(obstacle, mode)
    if isinstance(robot, ConvexPolygon2D):
        return MinkowskiObstacle2D(minkowski_sum(obstacle, robot.reflected()), mode)
    return MinkowskiObstacle2D(minkowski_sum(obstacle, -np.asarray(robot, float)), mode)


def polygons_intersect(a: ConvexPolygon2D, b: ConvexPolygon2D) -> bool:
    """Separating-axis test on closed convex polygons."""
    for poly in (a, b):
        e = poly.edges
        axes = np.c_[e[:, 1], -e[:, 0]]
        pa = a.vertices @ axes.T
        pb = b.vertices @ axes.T
        if np.any((pa.max(axis=0) < pb.min(axis=0)) | (pb.max(axis=0) < pa.min(axis=0))):
            return False
    return True


# --------------------------------------------------------------------------
# Bernstein curves


def bernstein_matrix(degree: int) -> np.ndarray:
    """Characteristic matrix mapping power-basis ``[1, t, .., t^r]`` to Bernstein weights."""
    r = degree
    m = np.zeros((r + 1, r + 1))
    for j in range(r + 1):
        for i in range(j, r + 1):
            m[i, j] = comb(r, j) * comb(r - j, i - j) * (-1) ** (i - j)
    return m


def _power_basis(t: float, r: int, order: int = 0) -> np.ndarray:
    out = np.zeros(r + 1)
    for i in range(order, r + 1):
        coef = math.perm(i, order)
        out[i] = coef * t ** (i - order)
    return out


@dataclass(frozen=True, eq=False)
class BernsteinCurve2D(ProjectableSet):
    """Planar Bézier curve ``S(t) = basis(t) @ M @ Phi`` on ``t in [0, 1]``."""

    control_points: np.ndarray
    tol: float = DEFAULT_TOL
    characteristic: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        phi = np.asarray(self.control_points, float)
        if phi.ndim != 2 or phi.shape[1] != 2 or phi.shape[0] < 2:
            raise GeometryError("need at least 2 control points of shape (c, 2)")
        if not np.all(np.isfinite(phi)):
            raise GeometryError("control points must be finite")
        object.__setattr__(self, "control_points", _frozen(phi))
        object.__setattr__(self, "characteristic", _frozen(bernstein_matrix(phi.shape[0] - 1)))
        # power-basis coefficients of S
        object.__setattr__(self, "_coef", self.characteristic @ phi)

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1

    @property
    def dim(self):
        return 2

    @classmethod
    def fit(cls, points, degree: int, params=None, tol=DEFAULT_TOL) -> "BernsteinCurve2D":
        """Least-squares fit to samples; chord-length parameters unless given."""
        pts = np.asarray(points, float)
        if params is None:
            seg = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
            params = seg / seg[-1]
        t = np.asarray(params, float)
        basis = np.vstack([_power_basis(ti, degree) for ti in t]) @ bernstein_matrix(degree)
        phi, *_ = np.linalg.lstsq(basis, pts, rcond=None)
        return cls(phi, tol=tol)

    def points(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        powers = t[..., None] ** np.arange(self.degree + 1)
        return powers @ self._coef

    def eval(self, t: float, order: int = 0) -> np.ndarray:
        return _power_basis(t, self.degree, order) @ self._coef

    def project(self, p):
        return project_bernstein(p, self)

    def contains(self, p, tol=None):
        tol = self.tol if tol is None else tol
        return self.distance(p) <= tol


def bernstein_eval(curve: BernsteinCurve2D, t: float) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 <= t <= 1.0:
        raise GeometryError(f"curve parameter {t} outside [0, 1]")
    return curve.eval(t), curve.eval(t, 1)


def closest_parameter(p, curve: BernsteinCurve2D, samples: int = 64, newton_steps: int = 30) -> float:
    """Parameter of the nearest curve point found by grid seeding and Newton refinement."""
    p = _vec(p)
    grid = np.linspace(0.0, 1.0, samples)
    d2 = np.sum((curve.points(grid) - p) ** 2, axis=1)
    # refine from every discrete local minimum of the grid
    left = np.r_[np.inf, d2[:-1]]
    right = np.r_[d2[1:], np.inf]
    seeds = np.flatnonzero((d2 <= left) & (d2 <= right))
    best_t = float(grid[int(np.argmin(d2))])
    best = float(d2.min())
    for i in seeds:
        t, val = _newton_refine(p, curve, float(grid[i]), float(d2[i]), newton_steps)
        if val < best:
            best, best_t = val, t
    return best_t


def _newton_refine(p, curve, t, val, steps):
    for _ in range(steps):
        s, ds, dds = curve.eval(t), curve.eval(t, 1), curve.eval(t, 2)
        r = s - p
        g = r @ ds
        h = ds @ ds + r @ dds
        if h > 0:
            step = -g / h
        else:
            step = -math.copysign(1e-3, g) if g != 0 else 0.0
        t_new = min(1.0, max(0.0, t + step))
        s_new = curve.eval(t_new)
        v_new = float((s_new - p) @ (s_new - p))
        if v_new > val:
            # damp the step until it stops increasing the distance
            for _ in range(30):
                step *= 0.5
                t_new = min(1.0, max(0.0, t + step))
                s_new = curve.eval(t_new)
                v_new = float((s_new - p) @ (s_new - p))
                if v_new <= val:
                    break
            else:
                break
        converged = abs(t_new - t) <= 1e-15
        t, val = t_new, min(val, v_new)
        if converged:
            break
    return t, val


def project_bernstein(p, curve: BernsteinCurve2D) -> np.ndarray:
    return curve.eval(closest_parameter(p, curve))


__all__ = [
    "AffineSlabSet",
    "BernsteinCurve2D",
    "BoxSet",
    "ConvexPolygon2D",
    "GeometryError",
    "MinkowskiObstacle2D",
    "ProductSet",
    "ProjectableSet",
    "QuadricAnnulusSet",
    "ReplicatedSet",
    "SecondOrderConeSet",
    "SingletonSet",
    "WholeSpace",
    "ball",
    "bernstein_eval",
    "bernstein_matrix",
    "c_obstacle",
    "closest_parameter",
    "minkowski_sum",
    "polygons_intersect",
    "project_affine_slab",
    "project_bernstein",
    "project_box",
    "project_polygon",
    "project_quadric_annulus",
    "project_soc",
    "signed_area",
    "weighted_box",
]
