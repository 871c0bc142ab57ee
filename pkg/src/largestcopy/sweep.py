"""Rotational sweep over orientations, plus the sampling solver.

The sweep keeps the faces of the edge Delaunay structure alive between
orientations. Each face follows the one-parameter family of copies fixed by three
of its contacts; the family is scanned forward until it stops being a certified
empty copy, and the exact orientation of that event is found by solving the four
contacts involved. At an event every face over the affected sites is recomputed
just past the event and matched to the old faces by contact set. Faces that die
have their lifetime interval maximised.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .contact_solver import (
    DegenerateConfiguration,
    QuadrupleType,
    TripleSystem,
    critical_orientations,
)
from .convex_distance import (
    ConvexPolygon,
    ContactPair,
    Placement,
    PolygonalDomain,
    is_feasible,
    satisfies_contact,
)
from .edt import EdgeDelaunay, Face, Infeasible, SiteTable, _gedges_from, best_candidates, build_edt
from .geom_core import TWO_PI, canon_2pi

PROBE = 1e-6
BATCH = 1e-7
AFTER = 1e-9
SCAN_STEP = math.pi / 2048
SCAN_CHUNK = 256
KEEP = 1e-7
GOLDEN = (math.sqrt(5) - 1) / 2


class EventStarvation(RuntimeError):
    pass


class FlipMismatch(RuntimeError):
    pass


class EventKind(enum.Enum):
    EDGE_CHANGE = "EdgeChange"
    LABEL_CHANGE = "LabelChange"
    END = "End"


_KIND_RANK = {EventKind.EDGE_CHANGE: 0, EventKind.LABEL_CHANGE: 1, EventKind.END: 2}


@dataclass
class SweepEvent:
    theta: float
    kind: EventKind
    face: frozenset
    contacts: tuple[ContactPair, ...] = ()
    placement: Placement | None = None
    epoch: int = 0
    exact: bool = True

    @property
    def type_tag(self) -> QuadrupleType | None:
        return QuadrupleType.of(self.contacts) if len(self.contacts) == 4 else None

    def order_key(self):
        ids = tuple(sorted((c.site.id, c.p_index) for c in self.contacts))
        return (self.theta, _KIND_RANK[self.kind], ids)


@dataclass
class ChangeStats:
    by_type: Counter = field(default_factory=Counter)
    per_hinge: Counter = field(default_factory=Counter)
    reported: int = 0
    unreported: int = 0
    edge_changes: int = 0
    label_changes: int = 0
    untyped: int = 0
    stale: int = 0
    flip_mismatch: int = 0
    mismatches: list = field(default_factory=list)
    events: int = 0
    log: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.edge_changes + self.label_changes

    def summary(self) -> dict:
        return {
            "total": self.total,
            "edge_changes": self.edge_changes,
            "label_changes": self.label_changes,
            "by_type": {k: self.by_type[k] for k in sorted(self.by_type)},
            "untyped": self.untyped,
            "reported": self.reported,
            "unreported": self.unreported,
            "hinge_breakpoints": sum(self.per_hinge.values()),
            "stale_skipped": self.stale,
            "flip_mismatch": self.flip_mismatch,
        }


class Mode(enum.Enum):
    SWEEP = "sweep"
    SAMPLE = "sample"
    HYBRID = "hybrid"


@dataclass
class SolveConfig:
    mode: Mode = Mode.HYBRID
    samples: int = 4096
    tol: float = 1e-9
    validate: bool = False
    seed: int | None = None
    on_event: Callable[[dict], None] | None = None


@dataclass
class SolveResult:
    best: Placement
    active_contacts: list[ContactPair]
    stats: ChangeStats
    mode: Mode


def _active(table: SiteTable, pl: Placement, tol: float) -> list[ContactPair]:
    return [c for c in table.contacts if satisfies_contact(table.P, pl, c, tol)]


# --- fixed-orientation sampling ----------------------------------------------------------


def run_sampling(Q: PolygonalDomain, P: ConvexPolygon, samples: int, table: SiteTable | None = None) -> SolveResult:
    """Best copy over ``samples`` equally spaced orientations starting at zero."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    table = table or SiteTable(Q, P)
    thetas = np.arange(samples) * (TWO_PI / samples)
    r = best_candidates(table, thetas)
    if r is None:
        raise Infeasible("no sampled orientation admits a feasible copy")
    d, x, y, th, _ = r
    pl = Placement(x, y, th, d)
    return SolveResult(pl, _active(table, pl, 1e-6 * table.scale), ChangeStats(), Mode.SAMPLE)


# --- interval maximisation -------------------------------------------------------------


def maximize_in_interval(ts: TripleSystem, interval: tuple[float, float], Q: PolygonalDomain | None = None,
                         incumbent: float = -math.inf, samples: int = 256, tol: float = 1e-10):
    """Largest copy of the triple's family over the interval.

    Returns ``(theta, placement)`` or None. Every local maximum of the sampled
    scale is refined by golden-section search; candidates are taken in
    decreasing scale (smaller theta first on ties) and the first feasible one
    wins, falling back to the interval ends. With a finite ``incumbent`` the
    interval is skipped when the sampled maximum plus the largest sampled step
    cannot beat it.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if hi < lo:
        return None
    scale = Q.scale if Q is not None else 1.0
    ftol = 1e-7 * scale

    def deltas(t):
        sol, ok = ts.solve_many(t)
        return np.where(ok, sol[:, 2], -np.inf), sol

    if hi - lo <= 0:
        grid = np.array([lo])
    else:
        grid = np.linspace(lo, hi, samples + 1)
    vals, _ = deltas(grid)
    finite = np.isfinite(vals)
    if not finite.any():
        return None
    if np.isfinite(incumbent):
        steps = np.abs(np.diff(vals[finite])) if finite.sum() > 1 else np.zeros(1)
        pad = float(steps.max()) if steps.size else 0.0
        if vals[finite].max() + pad < incumbent:
            return None
    cands: list[tuple[float, float]] = []
    n = len(grid)
    for i in np.flatnonzero(finite):
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i < n - 1 else -np.inf
        if vals[i] < left or vals[i] < right:
            continue
        if 0 < i < n - 1 and np.isfinite(left) and np.isfinite(right):
            a, b = grid[i - 1], grid[i + 1]
            c = b - GOLDEN * (b - a)
            e = a + GOLDEN * (b - a)
            fc, fe = deltas(np.array([c, e]))[0]
            while b - a > tol:
                if fc >= fe:
                    b, e, fe = e, c, fc
                    c = b - GOLDEN * (b - a)
                    fc = deltas(np.array([c]))[0][0]
                else:
                    a, c, fc = c, e, fe
                    e = a + GOLDEN * (b - a)
                    fe = deltas(np.array([e]))[0][0]
            t = 0.5 * (a + b)
            v = deltas(np.array([t]))[0][0]
            if v > vals[i]:
                cands.append((float(v), float(t)))
        cands.append((float(vals[i]), float(grid[i])))
    cands.sort(key=lambda c: (-c[0], c[1]))
    ends = [(float(vals[0]), lo), (float(vals[-1]), hi)]
    for v, t in cands + ends:
        if not math.isfinite(v):
            continue
        sol, ok = ts.solve_many(np.array([t]))
        if not ok[0]:
            continue
        pl = Placement(float(sol[0, 0]), float(sol[0, 1]), t, float(sol[0, 2]))
        if Q is None or is_feasible(ts.P, pl, Q, ftol):
            return t, pl
    return None


# --- sweep -------------------------------------------------------------------------------


@dataclass
class _Live:
    face: Face
    triple: tuple[int, int, int]
    start: float
    epoch: int


def classify_change(ev: SweepEvent, P: ConvexPolygon | None = None, Q: PolygonalDomain | None = None):
    """Quadruple type, hinge flag and reported flag of an event.

    A hinge is a point site touched by two adjacent pattern edges, i.e. sitting on
    a pattern vertex. The change is reported when a hinge is involved and the
    event copy is feasible.
    """
    qt = ev.type_tag
    by_site: dict[int, set[int]] = {}
    for c in ev.contacts:
        if not c.is_side:
            by_site.setdefault(c.site.id, set()).add(c.p_index)
    hinge = False
    k = P.k if P is not None else None
    for edges in by_site.values():
        for j in edges:
            if k is not None and ((j + 1) % k in edges or (j - 1) % k in edges):
                hinge = True
            elif k is None and len(edges) >= 2:
                hinge = True
    reported = False
    if hinge and ev.placement is not None and P is not None and Q is not None:
        reported = is_feasible(P, ev.placement, Q, 1e-7 * Q.scale)
    return qt, hinge, reported


class SweepState:
    """The evolving set of faces together with the event queue."""

    def __init__(self, Q: PolygonalDomain, P: ConvexPolygon, cfg: SolveConfig, table: SiteTable | None = None,
                 incumbent: tuple | None = None):
        self.Q, self.P, self.cfg = Q, P, cfg
        self.table = table or SiteTable(Q, P)
        self.scale = self.table.scale
        self.stats = ChangeStats()
        self.live: dict[frozenset, _Live] = {}
        self.heap: list = []
        self.counter = itertools.count()
        self.epoch = itertools.count(1)
        self.best: tuple | None = incumbent  # (delta, theta, placement)
        self.theta = 0.0

    # ---- face bookkeeping -----------------------------------------------------------

    def _family(self, f: Face, theta: float) -> tuple[int, int, int] | None:
        """Three contacts of the face whose family keeps the most face contacts just ahead."""
        idx = sorted(self.table.contact_index(c) for c in f.contacts)
        if len(idx) == 3:
            return tuple(idx)  # type: ignore[return-value]
        best, best_score = None, -1
        ahead = np.array([theta + 1e-6])
        for tri in itertools.combinations(idx, 3):
            x, y, d, ok = self.table.solve_grid(np.array([tri]), ahead)
            if not ok[0, 0]:
                continue
            pl = Placement(float(x[0, 0]), float(y[0, 0]), float(ahead[0]), float(d[0, 0]))
            score = sum(satisfies_contact(self.P, pl, self.table.contacts[c], 1e-9 * self.scale) for c in idx)
            if score > best_score:
                best, best_score = tri, score
        return best

    def _add(self, f: Face, start: float, now: float):
        tri = self._family(f, now)
        live = _Live(f, tri, start, next(self.epoch))  # type: ignore[arg-type]
        f.interval_start = start
        self.live[f.key] = live
        self._schedule(live, now)

    def _push(self, ev: SweepEvent):
        heapq.heappush(self.heap, (ev.order_key(), next(self.counter), ev))

    def _schedule(self, live: _Live, now: float):
        ev = self._next_event(live, now)
        ev.epoch = live.epoch
        self._push(ev)

    def _scan_mask(self, tri: tuple[int, int, int], thetas: np.ndarray, keep: Sequence[int] = ()):
        """Certified samples of the triple's family; ``keep`` sites (table indices) must stay touching."""
        T = np.array([tri])
        x, y, d, ok = self.table.solve_grid(T, thetas)
        x, y, d, ok = x[0], y[0], d[0], ok[0]
        good = ok.copy()
        sel = np.flatnonzero(ok)
        if sel.size:
            good[sel] = self.table.certify(x[sel], y[sel], d[sel], thetas[sel])
            if len(keep):
                dist = self.table.distances(x[sel], y[sel], thetas[sel], np.asarray(keep))
                good[sel] &= (np.abs(dist - d[sel, None]) <= KEEP * self.scale).all(axis=1)
        return good, x, y, d, ok

    def _keep(self, live: _Live) -> list[int]:
        # sites of a merged face beyond its family triple
        tri_sites = {self.table.contacts[c].site.id for c in live.triple}
        return sorted(self.table.id_to_index[s] for s in live.face.sites if s not in tri_sites)

    def _next_event(self, live: _Live, now: float) -> SweepEvent:
        tri = live.triple
        face = live.face
        if tri is None:
            return SweepEvent(now, EventKind.EDGE_CHANGE, face.key, exact=False)
        keep = self._keep(live)
        t0 = now
        prev = now
        while t0 < TWO_PI:
            grid = t0 + SCAN_STEP * np.arange(1, SCAN_CHUNK + 1)
            grid = grid[grid <= TWO_PI + SCAN_STEP]
            grid = np.minimum(grid, TWO_PI)
            good, x, y, d, ok = self._scan_mask(tri, grid, keep)
            bad = np.flatnonzero(~good)
            if bad.size:
                b = bad[0]
                lo = grid[b - 1] if b > 0 else prev
                return self._locate(live, now, lo, float(grid[b]), ok[b], x[b], y[b], d[b])
            prev = float(grid[-1])
            t0 = prev
            if grid[-1] >= TWO_PI:
                break
        return SweepEvent(TWO_PI, EventKind.END, face.key)

    def _locate(self, live: _Live, now: float, lo: float, hi: float, valid: bool, x, y, d) -> SweepEvent:
        """Exact orientation of the first failure of the face family inside (lo, hi]."""
        table, k = self.table, self.table.k
        tri = live.triple
        tri_c = [table.contacts[c] for c in tri]
        cand: set[int] = set()
        face_sites = {table.id_to_index[s] for s in live.face.sites}
        # sites that have come inside the copy
        if valid:
            dist = table.distances(np.array([x]), np.array([y]), np.array([hi]))[0]
            for si in np.flatnonzero(dist < d - table.tol):
                cand.update(si * k + e for e in range(k))
        # contacts sliding off their elements, or any other failure: try the
        # neighbouring elements of every face site and the endpoints of segments
        for si in face_sites:
            cand.update(si * k + e for e in range(k))
            s = table.sites[si]
            if s.endpoints is not None:
                for pid in s.endpoints:
                    pi = table.id_to_index[pid]
                    cand.update(pi * k + e for e in range(k))
        cand.difference_update(tri)
        best = None
        for c in self._bracketed(tri, sorted(cand), lo, hi):
            c4 = table.contacts[c]
            try:
                roots = critical_orientations(*tri_c, c4, self.P, self.Q)
            except (DegenerateConfiguration, ValueError):
                continue
            for t, pl in roots:
                for tt in (t, t + TWO_PI):
                    if now + AFTER < tt <= hi + 1e-9 and tt >= lo - 1e-6:
                        if best is None or tt < best[0]:
                            best = (tt, c4, pl)
        if best is not None and best[0] >= TWO_PI - AFTER:
            return SweepEvent(TWO_PI, EventKind.END, live.face.key)
        if best is not None:
            t, c4, pl = best
            kind = EventKind.LABEL_CHANGE if c4.site.id in live.face.sites else EventKind.EDGE_CHANGE
            return SweepEvent(min(t, TWO_PI), kind, live.face.key, tuple(tri_c) + (c4,), pl)
        # No algebraic root: fall back to bisection on the scan predicate.
        a, b = lo, hi
        keep = self._keep(live)
        while b - a > 1e-12:
            m = 0.5 * (a + b)
            if self._scan_mask(tri, np.array([m]), keep)[0][0]:
                a = m
            else:
                b = m
        return SweepEvent(max(b, now + 2 * AFTER), EventKind.EDGE_CHANGE, live.face.key, tuple(tri_c), exact=False)

    def _bracketed(self, tri, cand: list[int], lo: float, hi: float) -> list[int]:
        """Candidates whose contact equation changes sign on the family over [lo, hi].

        A fourth contact can only become tight inside the bracket if its residual
        along the family crosses zero there or sits at zero at an end. When no
        candidate qualifies all are returned.
        """
        if not cand:
            return cand
        grid = np.array([lo, hi])
        rows = self.table.contact_tables(grid)[0]  # (C, 2, 4)
        x, y, d, _ = self.table.solve_grid(np.array([tri]), grid)
        u = np.stack([x[0], y[0], d[0], np.ones(2)], axis=1)  # (2, 4)
        if not np.isfinite(u).all():
            return cand
        c = np.asarray(cand)
        g = np.einsum("cnd,nd->cn", rows[c], u)
        near = (np.abs(g) <= 1e-7 * self.scale).any(axis=1)
        keep = (g[:, 0] * g[:, 1] <= 0) | near
        return [int(v) for v in c[keep]] or cand

    # ---- intervals ------------------------------------------------------------------

    def _close(self, live: _Live, end: float):
        if live.triple is None:
            return
        ts = TripleSystem(self.P, tuple(self.table.contacts[c] for c in live.triple))
        inc = self.best[0] if (self.best is not None and self.cfg.mode is Mode.HYBRID) else -math.inf
        r = maximize_in_interval(ts, (live.start, end), self.Q, incumbent=inc, tol=self.cfg.tol)
        if r is None:
            return
        t, pl = r
        self._offer(pl.delta, canon_2pi(t), pl)

    def _offer(self, delta: float, theta: float, pl: Placement):
        if self.best is None:
            self.best = (delta, theta, pl)
            return
        bd, bt, bp = self.best
        rel = 1e-12 * max(1.0, bd)
        if delta > bd + rel or (abs(delta - bd) <= rel and (theta, pl.x, pl.y) < (bt, bp.x, bp.y)):
            self.best = (delta, theta, pl)

    # ---- main loop ------------------------------------------------------------------

    def start(self):
        probe = 1e-7
        e = build_edt(self.Q, self.P, probe, self.table)
        for f in e.faces:
            self._add(f, 0.0, probe)

    def _pop_batch(self) -> list[SweepEvent]:
        batch: list[SweepEvent] = []
        while self.heap:
            _, _, ev = self.heap[0]
            live = self.live.get(ev.face)
            if live is None or live.epoch != ev.epoch:
                heapq.heappop(self.heap)
                self.stats.stale += 1
                continue
            if batch and ev.theta > batch[0].theta + BATCH:
                break
            heapq.heappop(self.heap)
            batch.append(ev)
        return batch

    def _peek_theta(self) -> float:
        while self.heap:
            _, _, ev = self.heap[0]
            live = self.live.get(ev.face)
            if live is None or live.epoch != ev.epoch:
                heapq.heappop(self.heap)
                self.stats.stale += 1
                continue
            return ev.theta
        return TWO_PI

    def step(self) -> bool:
        batch = self._pop_batch()
        if not batch:
            if self.live:
                raise EventStarvation("event queue emptied before the sweep completed")
            return False
        if batch[0].kind is EventKind.END:
            self.theta = TWO_PI
            return False
        theta = batch[-1].theta
        self.stats.events += 1
        nxt = self._peek_theta()
        probe = theta + min(PROBE, max((nxt - theta) / 2, 1e-10))
        update_edt(self, batch, theta, probe)
        self.theta = theta
        return True

    def finish(self):
        for live in list(self.live.values()):
            self._close(live, TWO_PI)

    def snapshot(self, theta: float) -> EdgeDelaunay:
        faces = sorted((lv.face for lv in self.live.values()), key=lambda f: (f.sites, f.center))
        return EdgeDelaunay(theta, self.table.sites, _gedges_from(faces, self.table.sites), faces)


def update_edt(state: SweepState, batch: Sequence[SweepEvent], theta: float, probe: float) -> EdgeDelaunay:
    """Apply a batch of simultaneous events by recomputing faces over the affected sites."""
    table = state.table
    affected: set[int] = set()
    for ev in batch:
        lv = state.live.get(ev.face)
        if lv is not None:
            affected.update(lv.face.sites)
        affected.update(c.site.id for c in ev.contacts)
    # a segment flush with a pattern edge moves its contact between endpoints
    for sid in list(affected):
        ends = table.sites[table.id_to_index[sid]].endpoints
        if ends is not None:
            affected.update(ends)
    while True:
        x, y, d, T = table.witnesses(table.triples_for(affected), probe)
        # a witness touching a site outside the set means the set was too small
        extra = set()
        if len(d):
            th = np.full(len(d), probe)
            hit = table.touching(x, y, d, th)
            extra = {table.sites[j].id for j in np.flatnonzero(hit.any(axis=0))} - affected
        if not extra:
            break
        affected |= extra
    new_faces = {f.key: f for f in table.faces_from(x, y, d, T, probe)}
    old = {key: lv for key, lv in state.live.items() if set(lv.face.sites) <= affected}
    removed = [key for key in old if key not in new_faces]
    added = [key for key in new_faces if key not in old]
    old_pairs = {p for lv in old.values() for p in itertools.combinations(lv.face.sites, 2)}
    new_pairs = {p for f in new_faces.values() for p in itertools.combinations(f.sites, 2)}
    changed = bool(removed or added)
    for key in removed:
        lv = state.live.pop(key)
        state._close(lv, theta)
    for key in added:
        state._add(new_faces[key], theta, probe)
    for key, lv in old.items():
        if key in new_faces and new_faces[key].sites != lv.face.sites:
            # same contacts, but a site touching only through distance came or went
            f = new_faces[key]
            f.interval_start = lv.start
            lv.face = f
            lv.epoch = next(state.epoch)
            state._schedule(lv, probe)
    for ev in batch:
        if ev.face in state.live and ev.face not in added:
            lv = state.live[ev.face]
            lv.epoch = next(state.epoch)
            state._schedule(lv, probe)
    if changed:
        ev = batch[0]
        qts = [e.type_tag for e in batch if e.type_tag is not None]
        edge = old_pairs != new_pairs
        if edge:
            state.stats.edge_changes += 1
        else:
            state.stats.label_changes += 1
        if qts:
            state.stats.by_type[str(qts[0])] += 1
        else:
            state.stats.untyped += 1
        for e in batch:
            qt, hinge, reported = classify_change(e, state.P, state.Q)
            if hinge:
                sites = sorted({c.site.id for c in e.contacts if not c.is_side})
                state.stats.per_hinge[str(sites)] += 1
                if reported:
                    state.stats.reported += 1
                else:
                    state.stats.unreported += 1
            break
        rec = {"theta": theta, "kind": EventKind.EDGE_CHANGE.value if edge else EventKind.LABEL_CHANGE.value,
               "type_tag": str(qts[0]) if qts else None}
        state.stats.log.append(rec)
        if state.cfg.on_event is not None:
            state.cfg.on_event(rec)
    if state.cfg.validate:
        ref = build_edt(state.Q, state.P, probe, table)
        mine = sorted(lv.face.sites for lv in state.live.values())
        theirs = ref.site_sets()
        if mine != theirs:
            state.stats.flip_mismatch += 1
            state.stats.mismatches.append({
                "theta": theta, "probe": probe,
                "missing": [list(s) for s in (Counter(theirs) - Counter(mine)).elements()],
                "extra": [list(s) for s in (Counter(mine) - Counter(theirs)).elements()],
            })
            # resynchronise so later comparisons stay meaningful
            keep = {f.key: f for f in ref.faces}
            for key in [k for k in state.live if k not in keep]:
                state._close(state.live.pop(key), theta)
            for key, f in keep.items():
                if key not in state.live:
                    state._add(f, theta, probe)
    return state.snapshot(probe)


def run_sweep(Q: PolygonalDomain, P: ConvexPolygon, cfg: SolveConfig | None = None,
              table: SiteTable | None = None) -> SolveResult:
    cfg = cfg or SolveConfig(mode=Mode.SWEEP)
    table = table or SiteTable(Q, P)
    incumbent = None
    if cfg.mode is Mode.HYBRID:
        try:
            s = run_sampling(Q, P, cfg.samples, table)
            incumbent = (s.best.delta, s.best.theta, s.best)
        except Infeasible:
            incumbent = None
    state = SweepState(Q, P, cfg, table, incumbent)
    state.start()
    while state.step():
        pass
    state.finish()
    if state.best is None:
        raise Infeasible("no orientation admits a feasible copy")
    _, _, pl = state.best
    return SolveResult(pl, _active(table, pl, 1e-6 * table.scale), state.stats, cfg.mode)


def solve(Q: PolygonalDomain, P: ConvexPolygon, cfg: SolveConfig) -> SolveResult:
    if cfg.mode is Mode.SAMPLE:
        return run_sampling(Q, P, cfg.samples)
    return run_sweep(Q, P, cfg)


def write_change_log(stats: ChangeStats, path: str):
    with open(path, "w") as fh:
        for rec in stats.log:
            fh.write(json.dumps(rec) + "\n")
