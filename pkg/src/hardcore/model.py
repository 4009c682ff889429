"""Space-time grains and the two time functions driving the construction.

``first_contact_time(u, v)`` is the time at which two freely growing grains
(each starting at its own birth time) first meet, or at which the earlier
grain reaches the germ of the later one before it is born.
``stop_time_against_frozen(u, v)`` is the time at which grain ``u`` touches a
grain ``v`` that has already stopped with growth ``R(v) > 0``.

Matrix versions of both are provided with vectorised paths for ball-only
configurations and for configurations sharing a single polygon.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidConfiguration
from .geometry import INF, Ball, PlacedBody, Polygon, Shape, as_shape, contact_radius

TIE_TOL = 1e-12

STOPPED = "stopped"
COVERED = "covered"
CAPPED = "unstopped-capped"


@dataclass(frozen=True, eq=False)
class Grain:
    id: int
    x: np.ndarray
    t: float
    shape: Shape

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        if x.ndim != 1 or len(x) != self.shape.dim:
            raise InvalidConfiguration(f"grain {self.id}: position does not match shape dimension")
        if not np.all(np.isfinite(x)) or not math.isfinite(self.t):
            raise InvalidConfiguration(f"grain {self.id}: non-finite position or birth")
        if self.t < 0:
            raise InvalidConfiguration(f"grain {self.id}: negative birth time")

    def to_dict(self) -> dict:
        return {"id": self.id, "x": self.x.tolist(), "t": self.t, "shape": self.shape.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "Grain":
        return cls(int(data["id"]), data["x"], float(data["t"]), as_shape(data["shape"]))


@dataclass(frozen=True, eq=False)
class GrownGrain:
    grain: Grain
    R: float
    status: str
    round: int
    earlier_neighbour_ids: tuple = ()

    @property
    def id(self) -> int:
        return self.grain.id

    @property
    def stop_time(self) -> float:
        return self.grain.t + self.R

    def body(self) -> PlacedBody:
        return PlacedBody(self.grain.x, self.R, self.grain.shape)


@dataclass(eq=False)
class Configuration:
    """Finite marked point set observed in an axis-aligned window."""

    grains: list
    window: np.ndarray
    dimension: int = 2
    tie_detected: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.window = np.asarray(self.window, dtype=float).reshape(2, self.dimension)
        if np.any(self.window[1] <= self.window[0]):
            raise InvalidConfiguration("window must have positive extent")
        ids = [g.id for g in self.grains]
        if len(set(ids)) != len(ids):
            raise InvalidConfiguration("grain ids must be unique")
        if any(g.shape.dim != self.dimension for g in self.grains):
            raise InvalidConfiguration("all grains must share the configuration dimension")
        if len(self.grains) > 1:
            pos = self.positions
            if len(np.unique(pos, axis=0)) != len(pos):
                raise InvalidConfiguration("germ positions must be distinct")

    def __len__(self) -> int:
        return len(self.grains)

    @property
    def positions(self) -> np.ndarray:
        if not self.grains:
            return np.empty((0, self.dimension))
        return np.array([g.x for g in self.grains])

    @property
    def births(self) -> np.ndarray:
        return np.array([g.t for g in self.grains], dtype=float)

    def shifted(self, y) -> "Configuration":
        y = np.asarray(y, dtype=float)
        grains = [Grain(g.id, g.x + y, g.t, g.shape) for g in self.grains]
        return Configuration(grains, self.window + y, self.dimension)

    def with_grains(self, extra: Iterable[Grain]) -> "Configuration":
        return Configuration(list(self.grains) + list(extra), self.window, self.dimension)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "window": self.window.tolist(),
            "grains": [g.to_dict() for g in self.grains],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Configuration":
        d = int(data.get("dimension", 2))
        grains = [Grain.from_dict(g) for g in data["grains"]]
        return cls(grains, data["window"], d)


# ---------------------------------------------------------------------------
# scalar time functions


def _canonical(u: Grain, v: Grain):
    return (u, v) if (u.t, u.id) <= (v.t, v.id) else (v, u)


def covers_germ(u: Grain, v: Grain) -> bool:
    """True when the earlier of the two grains reaches the other's germ by its birth."""
    u, v = _canonical(u, v)
    return u.shape.gauge(v.x - u.x) <= v.t - u.t


def first_contact_time(u: Grain, v: Grain) -> float:
    if u is v or u.id == v.id:
        raise InvalidConfiguration("first contact time needs two distinct grains")
    if np.array_equal(u.x, v.x):
        raise InvalidConfiguration(f"grains {u.id} and {v.id} share a position")
    u, v = _canonical(u, v)
    s, t = u.t, v.t
    a0 = u.shape.gauge(v.x - u.x)
    if a0 <= t - s:
        return s + a0
    return t + contact_radius(PlacedBody(u.x, t - s, u.shape), u.shape,
                              PlacedBody(v.x, 0.0, v.shape), v.shape)


def stop_time_against_frozen(u: Grain, v: GrownGrain) -> float:
    if not v.R > 0:
        raise InvalidArgument("only grains with positive growth stop others")
    r = contact_radius(PlacedBody(u.x, 0.0, u.shape), u.shape, v.body(), None)
    return u.t + r


# ---------------------------------------------------------------------------
# vectorised matrices


def _shared_polygon(grains: Sequence[Grain]):
    first = grains[0].shape
    if not isinstance(first, Polygon):
        return None
    for g in grains[1:]:
        if g.shape is not first and g.shape != first:
            return None
    return first


def _axes(poly: Polygon):
    u = np.vstack([poly.normals, -poly.normals])
    hp = np.max(u @ poly.vertices.T, axis=1)
    hm = np.max(-u @ poly.vertices.T, axis=1)
    return u, hp, hm


def first_contact_matrix(grains: Sequence[Grain]):
    """Pairwise first contact times and the germ-cover indicator.

    Returns ``(d, cover)`` where ``d`` is symmetric with ``inf`` on the
    diagonal and ``cover[i, j]`` is True when grain i reaches germ j no later
    than j's birth.
    """
    n = len(grains)
    d = np.full((n, n), INF)
    cover = np.zeros((n, n), dtype=bool)
    if n < 2:
        return d, cover
    x = np.array([g.x for g in grains])
    t = np.array([g.t for g in grains], dtype=float)
    ids = np.array([g.id for g in grains])
    iu, ju = np.triu_indices(n, 1)
    # canonical order: earlier birth first, ties by id
    swap = (t[ju] < t[iu]) | ((t[ju] == t[iu]) & (ids[ju] < ids[iu]))
    e = np.where(swap, ju, iu)
    l = np.where(swap, iu, ju)
    z = x[l] - x[e]
    lag = t[l] - t[e]

    poly = None
    if all(isinstance(g.shape, Ball) for g in grains):
        rho = np.array([g.shape.radius for g in grains])
        dist = np.linalg.norm(z, axis=1)
        a0 = dist / rho[e]
        second = t[l] + np.maximum(0.0, (dist - lag * rho[e]) / (rho[e] + rho[l]))
    elif (poly := _shared_polygon(grains)) is not None:
        a0 = np.maximum(0.0, np.max((z @ poly.normals.T) / poly.normal_support, axis=1))
        u, hp, hm = _axes(poly)
        r = np.max((z @ u.T - lag[:, None] * hp) / (hp + hm), axis=1)
        second = t[l] + np.maximum(0.0, r)
    else:
        vals = np.empty(len(iu))
        cov = np.empty(len(iu), dtype=bool)
        for k, (i, j) in enumerate(zip(iu, ju)):
            vals[k] = first_contact_time(grains[i], grains[j])
            cov[k] = covers_germ(grains[i], grains[j])
        d[iu, ju] = vals
        d[ju, iu] = vals
        cover[e[cov], l[cov]] = True
        return d, cover

    if np.any(np.all(z == 0, axis=1)):
        raise InvalidConfiguration("germ positions must be distinct")
    first = a0 <= lag
    vals = np.where(first, t[e] + a0, second)
    d[iu, ju] = vals
    d[ju, iu] = vals
    cover[e[first], l[first]] = True
    return d, cover


def stop_time_matrix(grains: Sequence[Grain], frozen: Sequence[Grain], radii) -> np.ndarray:
    """f(u, v) for every u in ``grains`` against frozen grains with growth ``radii`` (> 0)."""
    radii = np.asarray(radii, dtype=float)
    m, k = len(grains), len(frozen)
    if m == 0 or k == 0:
        return np.full((m, k), INF)
    x = np.array([g.x for g in grains])
    s = np.array([g.t for g in grains], dtype=float)
    y = np.array([g.x for g in frozen])
    z = y[None, :, :] - x[:, None, :]
    allg = list(grains) + list(frozen)
    if all(isinstance(g.shape, Ball) for g in allg):
        ru = np.array([g.shape.radius for g in grains])
        rv = np.array([g.shape.radius for g in frozen])
        dist = np.linalg.norm(z, axis=2)
        r = np.maximum(0.0, (dist - radii[None, :] * rv[None, :]) / ru[:, None])
        return s[:, None] + r
    poly = _shared_polygon(allg)
    if poly is not None:
        u, hp, hm = _axes(poly)
        r = np.max((z @ u.T - radii[None, :, None] * hm) / hp, axis=2)
        return s[:, None] + np.maximum(0.0, r)
    out = np.empty((m, k))
    for i, g in enumerate(grains):
        for j, h in enumerate(frozen):
            out[i, j] = stop_time_against_frozen(g, GrownGrain(h, float(radii[j]), STOPPED, 0))
    return out


def has_pair_ties(d: np.ndarray, tol: float = TIE_TOL) -> bool:
    """True when two distinct pairs share a first contact time up to ``tol`` (relative)."""
    vals = np.sort(d[np.triu_indices(len(d), 1)])
    vals = vals[np.isfinite(vals)]
    if len(vals) < 2:
        return False
    gaps = np.diff(vals)
    return bool(np.any(gaps <= tol * np.maximum(1.0, np.abs(vals[1:]))))
