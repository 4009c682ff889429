"""Round-based construction of the growth-maximal hard-core function.

Each round looks at the grains that have not yet been assigned a growth
time.  Pairs that are mutual nearest neighbours with respect to the first
contact time are resolved against the grains frozen in earlier rounds:

* if the pair meets before either member could hit a frozen grain, the pair
  freezes as a doublet, unless the earlier grain covers the later germ before
  its birth, in which case only the covered germ freezes (with R = 0);
* otherwise the member(s) reaching a frozen grain first freeze at that time.

A single grain left over at the end is stopped by the nearest frozen grain
with positive growth.  If there is none, the finite sample has no
growth-maximal solution; the grain gets a cap radius and the result is
flagged.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidConfiguration
from .geometry import INF
from .model import (CAPPED, COVERED, STOPPED, TIE_TOL, Configuration, Grain, GrownGrain,
                    first_contact_matrix, has_pair_ties, stop_time_matrix)

log = logging.getLogger(__name__)

IN_H = "in-H"
LEFTOVER = "leftover-unstoppable"
TIE_DEGENERATE = "tie-degenerate"


@dataclass
class HardCoreResult:
    grains: list
    config: Configuration
    status: str = IN_H
    cap_radius: Optional[float] = None
    engine: str = "builder"
    tie_degenerate: bool = False
    log: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {g.id: i for i, g in enumerate(self.grains)}

    @property
    def in_h(self) -> bool:
        return self.status == IN_H

    @property
    def R(self) -> np.ndarray:
        return np.array([g.R for g in self.grains], dtype=float)

    @property
    def ids(self) -> list:
        return [g.id for g in self.grains]

    def index_of(self, grain_id: int) -> int:
        try:
            return self._index[grain_id]
        except KeyError:
            raise KeyError(f"unknown grain id {grain_id}") from None

    def __getitem__(self, grain_id: int) -> GrownGrain:
        return self.grains[self.index_of(grain_id)]

    def non_capped_mask(self) -> np.ndarray:
        return np.array([g.status != CAPPED for g in self.grains])


def _tol(v: float) -> float:
    return TIE_TOL * max(1.0, abs(v))


def _cap_radius(grain: Grain, window: np.ndarray) -> float:
    lo, hi = window
    d = len(lo)
    corners = np.array(np.meshgrid(*[[lo[k], hi[k]] for k in range(d)])).reshape(d, -1).T
    return 2.0 * max(grain.shape.gauge(c - grain.x) for c in corners)


def _nearest(sub: np.ndarray, ids: np.ndarray):
    """Nearest neighbour per row; ties broken by (value, min id, max id)."""
    nn = np.argmin(sub, axis=1)
    best = sub[np.arange(len(sub)), nn]
    tol = TIE_TOL * np.maximum(1.0, np.abs(best))
    near = sub <= (best + tol)[:, None]
    tied_rows = np.flatnonzero(near.sum(axis=1) > 1)
    for r in tied_rows:
        cand = np.flatnonzero(near[r])
        keys = [(sub[r, c], min(ids[r], ids[c]), max(ids[r], ids[c])) for c in cand]
        nn[r] = cand[min(range(len(cand)), key=keys.__getitem__)]
    return nn, len(tied_rows) > 0


def build(config: Configuration) -> HardCoreResult:
    grains = list(config.grains)
    n = len(grains)
    if n < 2:
        raise InvalidConfiguration("at least two grains are required")
    d, cover = first_contact_matrix(grains)
    if not np.all(np.isfinite(d[np.triu_indices(n, 1)])):
        raise InvalidConfiguration("degenerate geometry: non-finite first contact time")
    births = np.array([g.t for g in grains])
    ids = np.array([g.id for g in grains])

    tie = has_pair_ties(d)
    config.tie_detected = tie
    R = np.full(n, np.nan)
    status = [None] * n
    rounds = np.full(n, -1)
    earlier = [()] * n
    active = np.ones(n, dtype=bool)
    positive = []  # indices frozen with R > 0, in freezing order
    events = []

    i = 0
    while active.sum() >= 2:
        i += 1
        idx = np.flatnonzero(active)
        sub = d[np.ix_(idx, idx)]
        nn, tied = _nearest(sub, ids[idx])
        tie |= tied
        pairs = [(idx[a], idx[b]) for a, b in enumerate(nn) if a < b and nn[b] == a]
        if not pairs:  # unreachable: the lexicographically smallest pair is always mutual
            break
        pairs.sort(key=lambda p: (d[p], min(ids[p[0]], ids[p[1]]), max(ids[p[0]], ids[p[1]])))

        members = np.array([m for p in pairs for m in p])
        if positive:
            pos = np.array(positive)
            f = stop_time_matrix([grains[m] for m in members], [grains[k] for k in pos], R[pos])
            di_all = f.min(axis=1)
            stopper = {m: tuple(int(ids[pos[k]]) for k in
                                np.flatnonzero(f[j] <= di_all[j] + _tol(di_all[j])))
                       for j, m in enumerate(members)}
        else:
            di_all = np.full(len(members), INF)
            stopper = {m: () for m in members}
        di = dict(zip(members.tolist(), di_all.tolist()))

        updates = []
        for a, b in pairs:
            s1 = d[a, b]
            s2 = min(di[a], di[b])
            if np.isfinite(s2) and abs(s1 - s2) <= _tol(s1):
                tie = True
            if s1 <= s2:
                if cover[a, b] or cover[b, a]:
                    u, v = (a, b) if cover[a, b] else (b, a)
                    updates.append((v, 0.0, COVERED, (int(ids[u]),), "covered"))
                else:
                    updates.append((a, s1 - births[a], STOPPED, (int(ids[b]),), "doublet"))
                    updates.append((b, s1 - births[b], STOPPED, (int(ids[a]),), "doublet"))
            else:
                if di[a] != di[b] and abs(di[a] - di[b]) <= _tol(s2):
                    tie = True
                for w in (a, b):
                    if di[w] == s2:
                        r = max(0.0, s2 - births[w])
                        updates.append((w, r, STOPPED if r > 0 else COVERED, stopper[w], "stopper"))

        for w, r, st, who, rule in updates:
            R[w] = r
            status[w] = st
            rounds[w] = i
            earlier[w] = who
            active[w] = False
            if r > 0:
                positive.append(w)
            events.append({"round": i, "id": int(ids[w]), "rule": rule, "R": float(r)})

    result_status = IN_H
    cap = None
    left = np.flatnonzero(active)
    for w in left:
        if positive:
            pos = np.array(positive)
            f = stop_time_matrix([grains[w]], [grains[k] for k in pos], R[pos])[0]
            fmin = f.min()
            R[w] = max(0.0, fmin - births[w])
            status[w] = STOPPED if R[w] > 0 else COVERED
            earlier[w] = tuple(int(ids[pos[k]]) for k in np.flatnonzero(f <= fmin + _tol(fmin)))
            events.append({"round": -1, "id": int(ids[w]), "rule": "leftover", "R": float(R[w])})
        else:
            cap = _cap_radius(grains[w], config.window)
            R[w] = cap
            status[w] = CAPPED
            result_status = LEFTOVER
            events.append({"round": -1, "id": int(ids[w]), "rule": "capped", "R": float(cap)})
            log.warning("grain %s has no stopper; capped at R=%g", ids[w], cap)

    if tie:
        result_status = TIE_DEGENERATE
    out = [GrownGrain(grains[k], float(R[k]), status[k], int(rounds[k]), earlier[k])
           for k in range(n)]
    return HardCoreResult(out, config, result_status, cap, "builder", bool(tie), events)


def nearest_frozen_time(u: Grain, frozen) -> float:
    """Infimum of the stop times of ``u`` against frozen grains with R > 0 (``inf`` if none)."""
    frozen = [g for g in frozen if g.R > 0]
    if not frozen:
        return INF
    f = stop_time_matrix([u], [g.grain for g in frozen], [g.R for g in frozen])
    return float(f.min())


def mutual_nearest_pairs(active) -> list:
    """Mutual nearest-neighbour pairs (by first contact time) among ``active`` grains."""
    active = list(active)
    if len(active) < 2:
        return []
    d, _ = first_contact_matrix(active)
    ids = np.array([g.id for g in active])
    nn, _ = _nearest(d, ids)
    return [(active[a], active[b]) for a, b in enumerate(nn) if a < b and nn[b] == a]
