"""Structural checks and graph analytics on a :class:`HardCoreResult`.

Covers the hard-core test, earlier neighbours, the touching graph with its
clusters and doublets, and the stabilization radius of a grain in the
equal-birth regime.
"""
from __future__ import annotations

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import InvalidArgument, InvalidRegime
from .geometry import INF, Ball, signed_gap
from .model import CAPPED, Configuration, Grain, first_contact_matrix, first_contact_time

log = logging.getLogger(__name__)

CONTACT_TOL = 1e-7
TIME_TOL = 1e-8


def _bounding_radius(g) -> float:
    return g.R * g.grain.shape.circumradius


def _positive(result, include_capped=False):
    return [k for k, g in enumerate(result.grains)
            if g.R > 0 and (include_capped or g.status != CAPPED)]


def _pair_gaps(result, idx):
    """Signed gaps between grown bodies whose bounding balls meet, with the larger grown circumradius."""
    if len(idx) < 2:
        return np.empty((0, 2), dtype=int), np.empty(0), np.empty(0)
    grains = [result.grains[k] for k in idx]
    centers = np.array([g.grain.x for g in grains])
    rad = np.array([_bounding_radius(g) for g in grains])
    tree = cKDTree(centers)
    cand = tree.query_pairs(2 * rad.max() * (1 + 1e-9) + 1e-12, output_type="ndarray")
    if len(cand):
        dist = np.linalg.norm(centers[cand[:, 0]] - centers[cand[:, 1]], axis=1)
        cand = cand[dist <= (rad[cand[:, 0]] + rad[cand[:, 1]]) * (1 + 1e-9) + 1e-12]
    if not len(cand):
        return np.empty((0, 2), dtype=int), np.empty(0), np.empty(0)
    if all(isinstance(g.grain.shape, Ball) for g in grains):
        dist = np.linalg.norm(centers[cand[:, 0]] - centers[cand[:, 1]], axis=1)
        gaps = dist - rad[cand[:, 0]] - rad[cand[:, 1]]
    else:
        gaps = np.array([signed_gap(grains[a].body(), grains[b].body()) for a, b in cand])
    scale = np.maximum(rad[cand[:, 0]], rad[cand[:, 1]])
    pairs = np.asarray(idx)[cand]
    return pairs, gaps, scale


@dataclass
class HardCoreReport:
    max_penetration: float
    max_relative_penetration: float
    violating_pairs: list

    @property
    def ok(self) -> bool:
        return not self.violating_pairs


def verify_hard_core(result, rel_tol: float = CONTACT_TOL) -> HardCoreReport:
    """Pairwise interior-overlap test over non-capped grains with R > 0."""
    pairs, gaps, scale = _pair_gaps(result, _positive(result))
    if not len(pairs):
        return HardCoreReport(0.0, 0.0, [])
    pen = np.maximum(0.0, -gaps)
    rel = pen / scale
    bad = np.flatnonzero(rel > rel_tol)
    ids = result.ids
    viol = [(ids[pairs[k, 0]], ids[pairs[k, 1]], float(pen[k])) for k in bad]
    return HardCoreReport(float(pen.max()), float(rel.max()), viol)


@dataclass
class NeighbourGraph:
    vertices: list
    edges: list
    kind: dict = field(default_factory=dict)
    adjacency: dict = field(default_factory=dict)

    def neighbours(self, gid):
        return self.adjacency.get(gid, [])


def neighbour_graph(result, rel_tol: float = CONTACT_TOL) -> NeighbourGraph:
    """Touching graph on non-capped grains with R > 0; edges tagged doublet / one-sided."""
    idx = _positive(result)
    pairs, gaps, scale = _pair_gaps(result, idx)
    ids = result.ids
    vertices = [ids[k] for k in idx]
    adjacency = {v: [] for v in vertices}
    edges, kind = [], {}
    for (a, b), gap, sc in zip(pairs, gaps, scale):
        if gap <= rel_tol * sc:
            ga, gb = result.grains[a], result.grains[b]
            e = (min(ga.id, gb.id), max(ga.id, gb.id))
            edges.append(e)
            kind[e] = "doublet" if abs(ga.stop_time - gb.stop_time) <= TIME_TOL else "one-sided"
            adjacency[ga.id].append(gb.id)
            adjacency[gb.id].append(ga.id)
    edges.sort()
    return NeighbourGraph(vertices, edges, kind, adjacency)


def earlier_neighbours(result, grain_id: int, graph: Optional[NeighbourGraph] = None) -> list:
    g = result[grain_id]
    if g.status == CAPPED:
        return []
    if g.R > 0:
        graph = graph or neighbour_graph(result)
        return sorted(n for n in graph.neighbours(grain_id)
                      if g.stop_time >= result[n].stop_time - TIME_TOL)
    out = []
    for k in _positive(result, include_capped=True):
        h = result.grains[k]
        if h.id == grain_id:
            continue
        if not h.body().contains(g.grain.x, tol=CONTACT_TOL * max(1.0, _bounding_radius(h)))[0]:
            continue
        reach = h.grain.t + h.grain.shape.gauge(g.grain.x - h.grain.x)
        if g.grain.t >= reach - TIME_TOL:
            out.append(h.id)
    return sorted(out)


def clusters(graph: NeighbourGraph) -> list:
    """Connected components as sorted id lists, largest first."""
    if not graph.vertices:
        return []
    pos = {v: k for k, v in enumerate(graph.vertices)}
    n = len(pos)
    if graph.edges:
        e = np.array([(pos[a], pos[b]) for a, b in graph.edges])
        m = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    else:
        m = coo_matrix((n, n))
    _, labels = connected_components(m, directed=False)
    comps = {}
    for v, lab in zip(graph.vertices, labels):
        comps.setdefault(lab, []).append(v)
    return sorted((sorted(c) for c in comps.values()), key=lambda c: (-len(c), c[0]))


def doublets(result, graph: Optional[NeighbourGraph] = None) -> list:
    graph = graph or neighbour_graph(result)
    return [e for e in graph.edges if graph.kind[e] == "doublet"]


def _touches_boundary(result, members, tol=1e-9) -> bool:
    lo, hi = result.config.window
    for gid in members:
        g = result[gid]
        shape = g.grain.shape
        if isinstance(shape, Ball):
            ext_lo = g.grain.x - g.R * shape.radius
            ext_hi = g.grain.x + g.R * shape.radius
        else:
            ext_lo = g.grain.x + g.R * shape.vertices.min(axis=0)
            ext_hi = g.grain.x + g.R * shape.vertices.max(axis=0)
        if np.any(ext_lo <= lo + tol) or np.any(ext_hi >= hi - tol):
            return True
    return False


@dataclass
class ClusterInfo:
    cluster_id: int
    members: list
    doublets: list
    touches_boundary: bool

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def has_doublet(self) -> bool:
        return bool(self.doublets)


def cluster_report(result, graph: Optional[NeighbourGraph] = None) -> list:
    graph = graph or neighbour_graph(result)
    dbl = doublets(result, graph)
    out = []
    for k, comp in enumerate(clusters(graph)):
        members = set(comp)
        cd = [e for e in dbl if e[0] in members]
        out.append(ClusterInfo(k, comp, cd, _touches_boundary(result, comp)))
    return out


def stop_time_increase_violations(result, info: ClusterInfo, graph: NeighbourGraph) -> list:
    """BFS from the cluster's doublet; tree edges where the stop time fails to increase."""
    if len(info.doublets) != 1:
        return []
    a, b = info.doublets[0]
    seen = {a, b}
    queue = deque([a, b])
    bad = []
    while queue:
        p = queue.popleft()
        for c in graph.neighbours(p):
            if c in seen:
                continue
            seen.add(c)
            queue.append(c)
            if not result[c].stop_time > result[p].stop_time:
                bad.append((p, c))
    return bad


def sandwich_violation(result, graph: Optional[NeighbourGraph] = None) -> float:
    """Largest amount by which d(u, v) leaves [min stop time, max stop time] over graph edges."""
    graph = graph or neighbour_graph(result)
    worst = 0.0
    for a, b in graph.edges:
        ga, gb = result[a], result[b]
        lo = min(ga.stop_time, gb.stop_time)
        hi = max(ga.stop_time, gb.stop_time)
        dv = first_contact_time(ga.grain, gb.grain)
        worst = max(worst, lo - dv, dv - hi)
    return worst


def check_invariants(result, reference=None) -> dict:
    """Run the structural battery; returns name -> (passed, measured value)."""
    graph = neighbour_graph(result)
    out = {}
    hc = verify_hard_core(result)
    out["hard-core"] = (hc.ok, hc.max_relative_penetration)

    counts = []
    missing = []
    for g in result.grains:
        if g.status == CAPPED:
            continue
        en = earlier_neighbours(result, g.id, graph)
        if not en:
            missing.append(g.id)
        if g.R > 0:
            counts.append(len(en))
    out["earlier-neighbour"] = (not missing, len(missing))
    if all(isinstance(g.grain.shape, Ball) for g in result.grains):
        n_bad = sum(c != 1 for c in counts)
        out["unique-earlier-neighbour"] = (n_bad == 0, n_bad)

    infos = cluster_report(result, graph)
    two = sum(len(c.doublets) > 1 for c in infos)
    none_inner = sum(len(c.doublets) != 1 for c in infos if not c.touches_boundary)
    out["doublet"] = (two == 0 and none_inner == 0, two + none_inner)
    inc = sum(len(stop_time_increase_violations(result, c, graph)) for c in infos)
    out["stop-time-increase"] = (inc == 0, inc)

    sw = sandwich_violation(result, graph)
    out["sandwich"] = (sw <= TIME_TOL, sw)

    if reference is not None:
        m = result.non_capped_mask() & reference.non_capped_mask()
        dev = float(np.max(np.abs(result.R - reference.R)[m])) if m.any() else 0.0
        out["oracle-equivalence"] = (dev <= 1e-6, dev)
    return out


# ---------------------------------------------------------------------------
# stabilization


@dataclass
class StabilizationRecord:
    grain_id: int
    D: float
    c: float
    chain_ends: dict
    S: list
    U: float
    truncated: bool = False
    nodes_explored: int = 0


def _check_regime(config: Configuration, c: Optional[float]) -> float:
    if any(g.t != 0 for g in config.grains):
        raise InvalidRegime("stabilization requires all births equal to 0")
    cmax = max(g.shape.circumradius for g in config.grains)
    c = max(1.0, cmax) if c is None else c
    for g in config.grains:
        if g.shape.inradius < 1 - 1e-12 or g.shape.circumradius > c + 1e-12:
            raise InvalidRegime(f"grain {g.id} violates B(0,1) in K in B(0,{c})")
    return c


def stabilization(config: Configuration, result, grain_id: int, chain_budget: int = 100_000,
                  c: Optional[float] = None) -> StabilizationRecord:
    """Radius U around a grain beyond which added grains cannot change its growth.

    Descending chains start at the grain with a first step no longer than D
    (the time its grain alone needs to reach the nearest other germ).  The
    search keeps, per grain, the largest last-step time over all chains
    reaching it; shortcutting a repeated vertex never shrinks that value, so
    a best-first sweep over walks gives the same set of covering balls as an
    enumeration of chains with distinct vertices.
    """
    c = _check_regime(config, c)
    grains = list(config.grains)
    pos = {g.id: k for k, g in enumerate(grains)}
    if grain_id not in pos:
        raise KeyError(f"unknown grain id {grain_id}")
    y = pos[grain_id]
    if len(grains) == 1:
        return StabilizationRecord(grain_id, INF, c, {}, [], INF)
    x = np.array([g.x for g in grains])
    L = grains[y].shape
    D = min(L.gauge(grains[k].x - x[y]) for k in range(len(grains)) if k != y)
    d, _ = first_contact_matrix(grains)

    best = np.full(len(grains), -INF)
    heap = []
    for k in np.flatnonzero(d[y] <= D):
        best[k] = d[y, k]
        heapq.heappush(heap, (-best[k], int(k)))
    explored = 0
    truncated = False
    while heap:
        negb, k = heapq.heappop(heap)
        b = -negb
        if b < best[k]:
            continue
        explored += 1
        if explored > chain_budget:
            truncated = True
            break
        row = d[k]
        nxt = np.flatnonzero((row <= b) & (row > best))
        for j in nxt:
            if j == y:
                continue
            best[j] = row[j]
            heapq.heappush(heap, (-row[j], int(j)))

    reached = np.flatnonzero(np.isfinite(best) & (best > -INF))
    reached = reached[reached != y]
    S = [(x[y].copy(), 2 * c * D)] + [(x[k].copy(), 2 * c * best[k]) for k in reached]
    ends = {grains[k].id: float(best[k]) for k in reached}
    if truncated:
        U = INF
    else:
        U = max(2 * c * D, max((float(np.linalg.norm(x[k] - x[y])) + 2 * c * best[k]
                                for k in reached), default=0.0))
    return StabilizationRecord(grain_id, float(D), c, ends, S, float(U), truncated, explored)


@dataclass
class SpotCheck:
    passed: bool
    max_deviation: float
    trials: int
    inserted: int


def stabilization_spot_check(config: Configuration, grain_id: int, record: StabilizationRecord,
                             trials: int, seed: int = 0, max_insert: int = 5,
                             base=None) -> SpotCheck:
    """Insert random grains strictly outside B(y, U) and confirm R(y) does not move."""
    from .builder import build

    if trials <= 0:
        return SpotCheck(True, 0.0, 0, 0)
    if record.truncated or not math.isfinite(record.U):
        raise InvalidArgument("spot check needs a finite, non-truncated stabilization radius")
    base = base or build(config)
    r0 = base[grain_id].R
    y = base[grain_id].grain.x
    dim = config.dimension
    shapes = [g.shape for g in config.grains]
    next_id = max(g.id for g in config.grains) + 1
    rng = np.random.default_rng(seed)
    worst = 0.0
    total = 0
    U = record.U
    for _ in range(trials):
        k = int(rng.integers(1, max_insert + 1))
        dirs = rng.normal(size=(k, dim))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        radii = U * (1.0 + 1e-9) + rng.uniform(0.0, max(U, 1.0), size=k)
        extra = [Grain(next_id + j, y + radii[j] * dirs[j], 0.0, shapes[int(rng.integers(len(shapes)))])
                 for j in range(k)]
        res = build(config.with_grains(extra))
        worst = max(worst, abs(res[grain_id].R - r0))
        total += k
    return SpotCheck(worst <= 1e-9, worst, trials, total)


@dataclass
class TailCurve:
    thresholds: np.ndarray
    tail: np.ndarray
    stderr: np.ndarray
    samples: np.ndarray
    truncated: int
    log_slope: float


def center_grain(config: Configuration) -> int:
    mid = config.window.mean(axis=0)
    k = int(np.argmin(np.linalg.norm(config.positions - mid, axis=1)))
    return config.grains[k].id


def tail_curve_U(spec, replicates: int, thresholds, chain_budget: int = 100_000) -> TailCurve:
    """Monte Carlo tail P(U > t) of the stabilization radius at the grain nearest the centre."""
    from .sampling import sample

    thresholds = np.asarray(thresholds, dtype=float)
    us = []
    truncated = 0
    for r in range(replicates):
        config = sample(spec, r)
        if len(config) < 2:
            us.append(INF)
            continue
        rec = stabilization(config, None, center_grain(config), chain_budget, spec.c)
        truncated += rec.truncated
        us.append(rec.U)
    us = np.array(us)
    tail = np.array([(us > t).mean() for t in thresholds]) if len(us) else np.zeros(len(thresholds))
    stderr = np.sqrt(tail * (1 - tail) / max(len(us), 1))
    keep = tail > 0
    slope = float(np.polyfit(thresholds[keep], np.log(tail[keep]), 1)[0]) if keep.sum() >= 2 else math.nan
    return TailCurve(thresholds, tail, stderr, us, truncated, slope)
