"""Convex shapes, placed bodies and first-contact radii.

Two shape families are supported: Euclidean balls (d = 2 or 3) and convex
polygons in the plane.  Every shape contains the origin in its interior, so a
body ``x + r K`` grows monotonically in ``r``.

Distances between polygonal bodies use a 2D GJK iteration on support points;
contact radii use closed forms where they exist (round bodies, polygons) and
bisection on the touching predicate otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .errors import InvalidArgument

INF = math.inf

CONTACT_TOL = 1e-10
CONTACT_MAX_ITER = 200
GJK_TOL = 1e-12


def unit_ball_volume(d: int) -> float:
    """Volume kappa_d of the d-dimensional unit ball."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _as_direction(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)) or not np.any(u):
        raise InvalidArgument("direction must be a finite nonzero vector")
    return u


class Shape:
    """Convex body containing the origin in its interior."""

    dim: int
    strictly_convex: bool

    def support(self, u) -> float:
        raise NotImplementedError

    def support_point(self, u) -> np.ndarray:
        raise NotImplementedError

    @property
    def circumradius(self) -> float:
        raise NotImplementedError

    @property
    def inradius(self) -> float:
        raise NotImplementedError

    def volume(self, scale: float = 1.0) -> float:
        raise NotImplementedError

    def gauge(self, v) -> float:
        """Smallest r >= 0 with v in r*K."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(data: dict) -> "Shape":
        kind = data.get("type")
        if kind == "ball":
            return Ball(float(data["radius"]), int(data.get("dim", 2)))
        if kind == "polygon":
            return Polygon(data["vertices"])
        raise InvalidArgument(f"unknown shape type {kind!r}")


@dataclass(frozen=True)
class Ball(Shape):
    radius: float = 1.0
    dim: int = 2

    strictly_convex = True

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidArgument(f"ball radius must be positive, got {self.radius}")
        if self.dim not in (2, 3):
            raise InvalidArgument("balls are supported in dimension 2 or 3")

    def support(self, u) -> float:
        u = _as_direction(u)
        return self.radius * float(np.linalg.norm(u))

    def support_point(self, u) -> np.ndarray:
        u = _as_direction(u)
        return self.radius * u / np.linalg.norm(u)

    @property
    def circumradius(self) -> float:
        return self.radius

    @property
    def inradius(self) -> float:
        return self.radius

    def volume(self, scale: float = 1.0) -> float:
        if scale < 0:
            raise InvalidArgument("scale must be nonnegative")
        return unit_ball_volume(self.dim) * (scale * self.radius) ** self.dim

    def gauge(self, v) -> float:
        return float(np.linalg.norm(v)) / self.radius

    def to_dict(self) -> dict:
        out = {"type": "ball", "radius": self.radius}
        if self.dim != 2:
            out["dim"] = self.dim
        return out


class Polygon(Shape):
    """Convex polygon given by counterclockwise vertices around the origin."""

    dim = 2
    strictly_convex = False

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidArgument("polygon needs at least 3 planar vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("polygon vertices must be finite")
        edges = np.roll(v, -1, axis=0) - v
        if np.any(np.linalg.norm(edges, axis=1) == 0):
            raise InvalidArgument("polygon has repeated vertices")
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        dot = np.einsum("ij,ij->i", edges, nxt)
        if np.any(cross <= 0) or not math.isclose(float(np.sum(np.arctan2(cross, dot))), 2 * math.pi):
            raise InvalidArgument("polygon vertices must be strictly convex and counterclockwise")
        v.setflags(write=False)
        self._v = v
        if self.inradius <= 0:
            raise InvalidArgument("origin must lie strictly inside the polygon")

    @property
    def vertices(self) -> np.ndarray:
        return self._v

    def __eq__(self, other):
        if not isinstance(other, Polygon):
            return NotImplemented
        return self._v.shape == other._v.shape and bool(np.array_equal(self._v, other._v))

    def __hash__(self):
        return hash(self._v.tobytes())

    def __repr__(self):
        return f"Polygon({self._v.tolist()!r})"

    @cached_property
    def normals(self) -> np.ndarray:
        """Outward unit edge normals, one per edge (edge i runs v_i -> v_{i+1})."""
        e = np.roll(self._v, -1, axis=0) - self._v
        n = np.column_stack([e[:, 1], -e[:, 0]])
        return n / np.linalg.norm(n, axis=1)[:, None]

    @cached_property
    def normal_support(self) -> np.ndarray:
        """Support values h(n_i) = distance from the origin to edge i."""
        return np.einsum("ij,ij->i", self.normals, self._v)

    def support(self, u) -> float:
        u = _as_direction(u)
        return float(np.max(self._v @ u))

    def support_point(self, u) -> np.ndarray:
        u = _as_direction(u)
        return self._v[int(np.argmax(self._v @ u))]

    @property
    def circumradius(self) -> float:
        # the circumscribing ball is taken about the origin, matching the
        # shape condition B(0, 1) in K in B(0, c)
        return float(np.max(np.linalg.norm(self._v, axis=1)))

    @property
    def inradius(self) -> float:
        return float(np.min(self.normal_support))

    def area(self) -> float:
        return polygon_area(self._v)

    def volume(self, scale: float = 1.0) -> float:
        if scale < 0:
            raise InvalidArgument("scale must be nonnegative")
        return self.area() * scale * scale

    def gauge(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return max(0.0, float(np.max(self.normals @ v / self.normal_support)))

    def to_dict(self) -> dict:
        return {"type": "polygon", "vertices": self._v.tolist()}


def regular_polygon(m: int, inradius: float = 1.0, angle: float = 0.0) -> Polygon:
    """Regular m-gon centred at the origin with the given inradius."""
    if m < 3:
        raise InvalidArgument("a polygon needs at least 3 sides")
    circ = inradius / math.cos(math.pi / m)
    th = angle + 2 * math.pi * np.arange(m) / m
    return Polygon(np.column_stack([circ * np.cos(th), circ * np.sin(th)]))


def square(half_side: float = 1.0) -> Polygon:
    h = half_side
    return Polygon([[-h, -h], [h, -h], [h, h], [-h, h]])


def polygon_area(v) -> float:
    v = np.asarray(v, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def minkowski_sum(p, q) -> np.ndarray:
    """Minkowski sum of two convex CCW polygons by merging edges sorted by angle."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)

    def bottom_first(v):
        i = np.lexsort((v[:, 0], v[:, 1]))[0]
        return np.roll(v, -i, axis=0)

    p, q = bottom_first(p), bottom_first(q)
    ep = np.roll(p, -1, axis=0) - p
    eq = np.roll(q, -1, axis=0) - q
    out = [p[0] + q[0]]
    i = j = 0
    while i < len(ep) or j < len(eq):
        if i == len(ep):
            step = eq[j]; j += 1
        elif j == len(eq):
            step = ep[i]; i += 1
        else:
            cross = ep[i, 0] * eq[j, 1] - ep[i, 1] * eq[j, 0]
            if cross > 0:
                step = ep[i]; i += 1
            elif cross < 0:
                step = eq[j]; j += 1
            else:
                step = ep[i] + eq[j]; i += 1; j += 1
        out.append(out[-1] + step)
    return np.array(out[:-1])


# ---------------------------------------------------------------------------
# placed bodies


@dataclass(frozen=True, eq=False)
class PlacedBody:
    """The set center + scale * shape; scale 0 is the singleton {center}."""

    center: np.ndarray
    scale: float
    shape: Shape

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.ndim != 1 or len(c) != self.shape.dim:
            raise InvalidArgument("center dimension does not match shape")
        if not (self.scale >= 0) or not math.isfinite(self.scale):
            raise InvalidArgument("scale must be a finite nonnegative number")
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.shape.dim

    @property
    def is_point(self) -> bool:
        return self.scale == 0

    def core(self):
        """(vertex array, rounding radius): the body is conv(vertices) + radius * B."""
        if self.scale == 0:
            return self.center[None, :], 0.0
        if isinstance(self.shape, Ball):
            return self.center[None, :], self.scale * self.shape.radius
        return self.center + self.scale * self.shape.vertices, 0.0

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        if self.scale == 0:
            return np.linalg.norm(p, axis=1) <= tol
        if isinstance(self.shape, Ball):
            return np.linalg.norm(p, axis=1) <= self.scale * self.shape.radius + tol
        sh = self.shape
        return np.all(p @ sh.normals.T <= self.scale * sh.normal_support + tol, axis=1)


def _closest_on_segment(a, b):
    ab = b - a
    denom = ab @ ab
    if denom == 0:
        return a, [a]
    lam = -(a @ ab) / denom
    if lam <= 0:
        return a, [a]
    if lam >= 1:
        return b, [b]
    return a + lam * ab, [a, b]


def _closest_on_simplex(simplex):
    """Closest point to the origin on conv(simplex) in 2D, plus the reduced simplex."""
    if len(simplex) == 1:
        return simplex[0], simplex
    if len(simplex) == 2:
        return _closest_on_segment(simplex[0], simplex[1])
    a, b, c = simplex
    # barycentric containment of the origin
    det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if det != 0:
        l1 = ((b[0]) * (c[1]) - (b[1]) * (c[0])) / det
        l2 = ((c[0]) * (a[1]) - (c[1]) * (a[0])) / det
        l3 = 1.0 - l1 - l2
        if l1 >= 0 and l2 >= 0 and l3 >= 0:
            return np.zeros(2), simplex
    best = None
    for p, q in ((a, b), (b, c), (a, c)):
        pt, sub = _closest_on_segment(p, q)
        nrm = pt @ pt
        if best is None or nrm < best[0]:
            best = (nrm, pt, sub)
    return best[1], best[2]


def gjk_distance(va, vb, tol: float = GJK_TOL, max_iter: int = 100) -> float:
    """Euclidean distance between conv(va) and conv(vb) for planar vertex sets."""
    va = np.asarray(va, dtype=float)
    vb = np.asarray(vb, dtype=float)

    def support(d):
        return va[int(np.argmax(va @ d))] - vb[int(np.argmin(vb @ d))]

    v = va[0] - vb[0]
    simplex = [v]
    for _ in range(max_iter):
        vv = v @ v
        if vv == 0.0:
            return 0.0
        w = support(-v)
        if vv - v @ w <= tol * vv:
            break
        if any(np.array_equal(w, s) for s in simplex):
            break
        simplex = simplex + [w]
        v, simplex = _closest_on_simplex(simplex)
    return float(np.sqrt(v @ v))


def _outward_normals(verts) -> np.ndarray:
    if len(verts) < 3:
        return np.empty((0, verts.shape[1]))
    e = np.roll(verts, -1, axis=0) - verts
    n = np.column_stack([e[:, 1], -e[:, 0]])
    norm = np.linalg.norm(n, axis=1)
    keep = norm > 0  # a core scaled down to underflow collapses to a point
    return n[keep] / norm[keep, None]


def _core_gap(va, vb) -> float:
    """Distance between two convex cores if disjoint, minus the penetration depth otherwise."""
    if len(va) == 1 and len(vb) == 1:
        return float(np.linalg.norm(va[0] - vb[0]))
    dist = gjk_distance(va, vb)
    # GJK can stall at a roundoff-sized distance when one core contains the other
    scale = max(1.0, float(np.max(np.abs(va))), float(np.max(np.abs(vb))))
    if dist > GJK_TOL * scale:
        return dist
    axes = np.vstack([_outward_normals(va), -_outward_normals(vb)])
    if not len(axes):
        return 0.0
    overlap = np.max(va @ axes.T, axis=0) - np.min(vb @ axes.T, axis=0)
    return -float(np.min(overlap))


def signed_gap(a: PlacedBody, b: PlacedBody) -> float:
    """Positive distance between disjoint bodies, negative penetration depth otherwise."""
    if a.dim != b.dim:
        raise InvalidArgument("bodies must share a dimension")
    va, ra = a.core()
    vb, rb = b.core()
    if a.dim != 2 and (len(va) > 1 or len(vb) > 1):
        raise InvalidArgument("polygonal bodies are planar only")
    return _core_gap(va, vb) - ra - rb


def separation(a: PlacedBody, b: PlacedBody) -> float:
    """Euclidean distance between the bodies; 0 when they intersect."""
    return max(0.0, signed_gap(a, b))


def penetration(a: PlacedBody, b: PlacedBody) -> float:
    """Depth by which the interiors overlap (0 when interiors are disjoint)."""
    if a.scale == 0 or b.scale == 0:
        return 0.0
    return max(0.0, -signed_gap(a, b))


def interiors_overlap(a: PlacedBody, b: PlacedBody, tol: float = 0.0) -> bool:
    return penetration(a, b) > tol


# ---------------------------------------------------------------------------
# contact radius

GrowShape = Optional[Shape]


@dataclass(frozen=True)
class _Grown:
    center: np.ndarray
    base: float
    rate: float
    shape: Shape

    def at(self, r: float) -> PlacedBody:
        return PlacedBody(self.center, self.base + self.rate * r, self.shape)

    @property
    def kind(self) -> str:
        if self.base == 0 and self.rate == 0:
            return "point"
        return "ball" if isinstance(self.shape, Ball) else "polygon"


def _grown(body: PlacedBody, grow: GrowShape) -> _Grown:
    if grow is None:
        return _Grown(body.center, body.scale, 0.0, body.shape)
    if grow.dim != body.dim:
        raise InvalidArgument("growth shape dimension does not match body")
    if body.scale == 0:
        return _Grown(body.center, 0.0, 1.0, grow)
    if grow == body.shape:
        return _Grown(body.center, body.scale, 1.0, body.shape)
    raise InvalidArgument("growth shape must equal the body shape unless the body is a point")


def _round_radius(g: _Grown, scale: float) -> float:
    return scale * g.shape.radius if isinstance(g.shape, Ball) else 0.0


def _contact_round(ga: _Grown, gb: _Grown) -> float:
    dist = float(np.linalg.norm(gb.center - ga.center))
    gap = dist - _round_radius(ga, ga.base) - _round_radius(gb, gb.base)
    rate = _round_radius(ga, ga.rate) + _round_radius(gb, gb.rate)
    return max(0.0, gap / rate)


def _contact_polygonal(ga: _Grown, gb: _Grown) -> float:
    # y - x must lie in (base_a + r rate_a) K - (base_b + r rate_b) L; every
    # inequality <z,u> <= h(u) along the candidate normals is linear in r
    z = gb.center - ga.center
    axes = []
    if ga.kind == "polygon":
        axes.append(ga.shape.normals)
    if gb.kind == "polygon":
        axes.append(-gb.shape.normals)
    u = np.vstack(axes)
    ha = np.max(u @ ga.shape.vertices.T, axis=1) if ga.kind == "polygon" else np.zeros(len(u))
    hb = np.max(-u @ gb.shape.vertices.T, axis=1) if gb.kind == "polygon" else np.zeros(len(u))
    num = u @ z - ga.base * ha - gb.base * hb
    den = ga.rate * ha + gb.rate * hb
    return max(0.0, float(np.max(num / den)))


def _touching(ga: _Grown, gb: _Grown, r: float) -> bool:
    return signed_gap(ga.at(r), gb.at(r)) <= 0.0


def _contact_bisect(ga: _Grown, gb: _Grown, tol: float, max_iter: int) -> float:
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if _touching(ga, gb, hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        return INF
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if _touching(ga, gb, mid):
            hi = mid
        else:
            lo = mid
    return hi


def contact_radius(a: PlacedBody, grow_a: GrowShape, b: PlacedBody, grow_b: GrowShape,
                   *, tol: float = CONTACT_TOL, max_iter: int = CONTACT_MAX_ITER) -> float:
    """Smallest r >= 0 such that (a + r grow_a) meets (b + r grow_b).

    ``None`` as a growth shape stands for the singleton {0}.  Returns ``inf``
    when neither body grows and they are disjoint.
    """
    if a.dim != b.dim:
        raise InvalidArgument("bodies must share a dimension")
    ga, gb = _grown(a, grow_a), _grown(b, grow_b)
    if ga.rate == 0 and gb.rate == 0:
        return 0.0 if signed_gap(a, b) <= 0 else INF
    kinds = {ga.kind, gb.kind}
    if "polygon" not in kinds:
        return _contact_round(ga, gb)
    if "ball" not in kinds:
        return _contact_polygonal(ga, gb)
    if _touching(ga, gb, 0.0):
        return 0.0
    return _contact_bisect(ga, gb, tol, max_iter)


def contact_radius_bisect(a: PlacedBody, grow_a: GrowShape, b: PlacedBody, grow_b: GrowShape,
                          *, tol: float = CONTACT_TOL, max_iter: int = CONTACT_MAX_ITER) -> float:
    """Same contract as :func:`contact_radius`, always via bisection on the touching test."""
    if a.dim != b.dim:
        raise InvalidArgument("bodies must share a dimension")
    ga, gb = _grown(a, grow_a), _grown(b, grow_b)
    if ga.rate == 0 and gb.rate == 0:
        return 0.0 if signed_gap(a, b) <= 0 else INF
    if _touching(ga, gb, 0.0):
        return 0.0
    return _contact_bisect(ga, gb, tol, max_iter)


ShapeLike = Union[Shape, dict]


def as_shape(s: ShapeLike) -> Shape:
    return s if isinstance(s, Shape) else Shape.from_dict(s)
