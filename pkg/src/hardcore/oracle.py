"""Event-driven simulation of the growth protocol.

Grains are born at their birth times, grow at unit rate in their own shape
and stop at the first contact with another grain.  Three event kinds are
scheduled on a priority queue:

``pair-meet``    two grains that are both still free meet (both stop);
``hit-frozen``   a free grain touches a grain that has stopped with R > 0;
``cover-germ``   a growing grain reaches a germ before that germ is born.

Events whose participants changed state since scheduling are discarded when
popped.  This is deliberately a scalar, straightforward implementation used
to cross-check :func:`hardcore.builder.build`.
"""
from __future__ import annotations

import heapq
import logging

import numpy as np

from .builder import IN_H, LEFTOVER, TIE_DEGENERATE, HardCoreResult, _cap_radius
from .errors import InvalidConfiguration
from .model import (CAPPED, COVERED, STOPPED, TIE_TOL, Configuration, GrownGrain,
                    covers_germ, first_contact_time, stop_time_against_frozen)

log = logging.getLogger(__name__)

FREE, FROZEN, COVERED_STATE = "free", "frozen", "covered"

PAIR_MEET = "pair-meet"
HIT_FROZEN = "hit-frozen"
COVER_GERM = "cover-germ"


class EventQueue:
    """Min-heap of (time, tiebreak, kind, ids, versions) with lazy deletion."""

    def __init__(self):
        self._heap = []
        self.now = 0.0
        self.popped_times = []

    def push(self, time, kind, a, b, versions):
        key = (min(a, b), max(a, b))
        heapq.heappush(self._heap, (time, key, kind, a, b, versions))

    def pop(self):
        item = heapq.heappop(self._heap)
        return item

    def __len__(self):
        return len(self._heap)


def simulate_growth(config: Configuration) -> HardCoreResult:
    grains = list(config.grains)
    n = len(grains)
    if n < 2:
        raise InvalidConfiguration("at least two grains are required")
    by_id = {g.id: g for g in grains}
    state = {g.id: FREE for g in grains}
    version = {g.id: 0 for g in grains}
    R = {}
    earlier = {}
    frozen_pos = []
    q = EventQueue()
    events = []

    for i in range(n):
        for j in range(i + 1, n):
            u, v = grains[i], grains[j]
            tm = first_contact_time(u, v)
            if covers_germ(u, v):
                e, l = (u, v) if (u.t, u.id) <= (v.t, v.id) else (v, u)
                q.push(tm, COVER_GERM, e.id, l.id, (0, 0))
            else:
                q.push(tm, PAIR_MEET, u.id, v.id, (0, 0))

    tie = False
    last_time = None

    def freeze(gid, r, who, now):
        nonlocal tie
        R[gid] = r
        earlier[gid] = who
        version[gid] += 1
        if r > 0:
            state[gid] = FROZEN
            frozen_pos.append(gid)
            frozen = GrownGrain(by_id[gid], r, STOPPED, 0)
            for other in grains:
                if state[other.id] == FREE:
                    tf = stop_time_against_frozen(other, frozen)
                    if tf < now - 1e-9 * max(1.0, now):
                        log.error("hit-frozen time %g precedes current time %g", tf, now)
                    q.push(max(tf, now), HIT_FROZEN, other.id, gid,
                           (version[other.id], version[gid]))
        else:
            state[gid] = COVERED_STATE

    while len(q):
        time, _, kind, a, b, vers = q.pop()
        if kind == HIT_FROZEN:
            if state[a] != FREE or version[a] != vers[0]:
                continue
        elif state[a] != FREE or state[b] != FREE:
            continue
        if last_time is not None and time - last_time <= TIE_TOL * max(1.0, abs(time)):
            tie = True
        if last_time is not None and time < last_time:
            log.error("event times decreased: %g after %g", time, last_time)
        last_time = time
        q.popped_times.append(time)
        events.append({"time": float(time), "kind": kind, "ids": [int(a), int(b)]})
        if kind == PAIR_MEET:
            freeze(a, time - by_id[a].t, (b,), time)
            freeze(b, time - by_id[b].t, (a,), time)
        elif kind == COVER_GERM:
            freeze(b, 0.0, (a,), time)
        else:
            freeze(a, max(0.0, time - by_id[a].t), (b,), time)

    status = IN_H
    cap = None
    free = [gid for gid in state if state[gid] == FREE]
    if len(free) > 1:
        raise RuntimeError("event simulation ended with several free grains")
    for gid in free:
        cap = _cap_radius(by_id[gid], config.window)
        R[gid] = cap
        earlier[gid] = ()
        state[gid] = CAPPED
        status = LEFTOVER
        log.warning("grain %s has no stopper; capped at R=%g", gid, cap)

    if tie:
        status = TIE_DEGENERATE
    out = []
    for g in grains:
        if state[g.id] == CAPPED:
            st = CAPPED
        else:
            st = STOPPED if R[g.id] > 0 else COVERED
        out.append(GrownGrain(g, float(R[g.id]), st, -1, tuple(earlier[g.id])))
    res = HardCoreResult(out, config, status, cap, "oracle", tie, events)
    res.event_times = q.popped_times
    return res
