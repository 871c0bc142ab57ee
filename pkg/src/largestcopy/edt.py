"""Edge Delaunay structure of a domain's point and segment sites at a fixed orientation.

Faces are found by brute force: every triple of distinct sites, with every choice
of touching pattern element per site (an edge for a point site, a vertex for a
segment site), is one 3x3 linear system. A solution is a face witness when the
scaled copy is positive, each contact point lies on its element, no site is
closer than the clearance, and the centre lies in the closed container. Witnesses
closer than ``MERGE`` relative tolerance collapse into one face.

The same vectorised machinery evaluates many orientations at once, which is what
the sampling solver and the sweep's scans use.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .convex_distance import (
    ConvexPolygon,
    ContactPair,
    Placement,
    PolygonalDomain,
    Site,
    is_feasible,
    place,
)
from .geom_core import Point, canon_2pi

CERT_TOL = 1e-8
MERGE = 1e-7
EXTENT_SLACK = 1e-9
CHUNK = 20000
MIN_DELTA = 1e-6


class TooFewSites(ValueError):
    pass


class NoContact(ValueError):
    pass


class Infeasible(RuntimeError):
    pass


class GEdgeKind(enum.Enum):
    EDGE = "Edge"
    WEDGE = "Wedge"
    LEDGE = "Ledge"


Handle = tuple[str, int]


def vertex_handle(i: int) -> Handle:
    return ("vertex", i)


def edge_handle(j: int) -> Handle:
    return ("edge", j)


@dataclass(frozen=True)
class GEdge:
    a: int
    b: int
    kind: GEdgeKind


@dataclass
class Face:
    sites: tuple[int, ...]
    contacts: frozenset
    center: Point
    clearance: float
    label: frozenset = frozenset()
    interval_start: float | None = None

    @property
    def key(self) -> frozenset:
        return self.contacts

    @property
    def witness(self) -> tuple[Point, float]:
        return self.center, self.clearance


@dataclass
class EdgeDelaunay:
    theta: float
    sites: list[Site]
    gedges: list[GEdge]
    faces: list[Face]

    def site_sets(self) -> list[tuple[int, ...]]:
        return sorted(f.sites for f in self.faces)

    def to_json(self) -> dict:
        return {
            "theta": self.theta,
            "sites": [
                {"id": s.id, "kind": s.kind.value, "a": list(s.a), **({"b": list(s.b)} if s.b is not None else {})}
                for s in self.sites
            ],
            "gedges": [{"a": e.a, "b": e.b, "kind": e.kind.value} for e in self.gedges],
            "faces": [
                {
                    "sites": list(f.sites),
                    "center": [f.center.x, f.center.y],
                    "clearance": f.clearance,
                    "label": sorted([h[0], h[1]] for h in f.label),
                    "contacts": sorted([c.site.id, c.kind.value, c.p_index] for c in f.contacts),
                }
                for f in self.faces
            ],
        }


def sites_of(Q: PolygonalDomain) -> list[Site]:
    return list(Q.sites)


def gedge_kind(a: Site, b: Site) -> GEdgeKind:
    if a.is_point and b.is_point:
        return GEdgeKind.EDGE
    if a.is_point or b.is_point:
        return GEdgeKind.WEDGE
    return GEdgeKind.LEDGE


def _rot_arrays(v: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Rotate a (k, 2) array by each theta; result (N, k, 2)."""
    c, s = np.cos(theta)[:, None], np.sin(theta)[:, None]
    return np.stack([c * v[None, :, 0] - s * v[None, :, 1], s * v[None, :, 0] + c * v[None, :, 1]], axis=-1)


def _inside_ring(px: np.ndarray, py: np.ndarray, ring: Sequence[Point]) -> np.ndarray:
    inside = np.zeros(px.shape, dtype=bool)
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > py) != (y2 > py)
        xi = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (xi > px)
    return inside


def _ring_distance(px: np.ndarray, py: np.ndarray, ring: Sequence[Point]) -> np.ndarray:
    out = np.full(px.shape, np.inf)
    n = len(ring)
    for i in range(n):
        ax, ay = ring[i]
        bx, by = ring[(i + 1) % n]
        dx, dy = bx - ax, by - ay
        L2 = dx * dx + dy * dy
        t = np.clip(((px - ax) * dx + (py - ay) * dy) / L2, 0.0, 1.0)
        out = np.minimum(out, np.hypot(px - ax - t * dx, py - ay - t * dy))
    return out


class SiteTable:
    """Array view of a domain's sites and of every (site, pattern element) contact."""

    def __init__(self, Q: PolygonalDomain, P: ConvexPolygon):
        self.Q, self.P = Q, P
        self.sites = list(Q.sites)
        self.scale = Q.scale
        self.tol = CERT_TOL * self.scale
        k = P.k
        self.k = k
        n = len(self.sites)
        self.is_point = np.array([s.is_point for s in self.sites])
        self.a = np.array([s.a for s in self.sites], dtype=float)
        self.b = np.array([s.b if s.b is not None else s.a for s in self.sites], dtype=float)
        self.point_idx = np.flatnonzero(self.is_point)
        self.seg_idx = np.flatnonzero(~self.is_point)
        # contact c = site * k + element
        self.contacts = [ContactPair(self.sites[i], e) for i in range(n) for e in range(k)]
        d = self.b - self.a
        L = np.hypot(d[:, 0], d[:, 1])
        L[L == 0] = 1.0
        self.n_side = np.stack([-d[:, 1] / L, d[:, 0] / L], axis=1)
        self.id_to_index = {s.id: i for i, s in enumerate(self.sites)}
        self.site_map = {s.id: s for s in self.sites}

    def contact_index(self, c: ContactPair) -> int:
        return self.id_to_index[c.site.id] * self.k + c.p_index

    # --- solving ---------------------------------------------------------------------

    def contact_tables(self, theta: np.ndarray, sites: np.ndarray | None = None):
        """Per-contact equation rows and extent coefficients at each orientation.

        Rows have shape (C, N, 4). The position ``t`` of a contact point along its
        side element is ``c.F + G + delta H`` for side contacts and
        ``(G - c.F) / delta - H`` for corner contacts. Passing ``sites`` (table
        indices) restricts the tables to those sites' contacts, in that order.
        """
        P, k = self.P, self.k
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        W = _rot_arrays(P.offsets, theta)  # (N, k, 2)
        Mn = _rot_arrays(P.normals, theta)
        sel = range(len(self.sites)) if sites is None else [int(i) for i in sites]
        n = len(sel)
        N = len(theta)
        rows = np.empty((n, k, N, 4))
        F = np.empty((n, k, N, 2))
        G = np.empty((n, k, N))
        H = np.empty((n, k, N))
        U = np.roll(W, -1, axis=1) - W  # placed edge directions per unit scale
        U2 = np.einsum("nkd,nkd->nk", U, U)
        Uh = U / U2[..., None]
        gam = np.einsum("nkd,nkd->nk", W, Uh)
        for r, i in enumerate(sel):
            q = self.a[i]
            if self.is_point[i]:
                m = np.transpose(Mn, (1, 0, 2))  # (k, N, 2)
                rows[r, :, :, 0] = -m[..., 0]
                rows[r, :, :, 1] = -m[..., 1]
                rows[r, :, :, 2] = -P.support[:, None]
                rows[r, :, :, 3] = m[..., 0] * q[0] + m[..., 1] * q[1]
                uh = np.transpose(Uh, (1, 0, 2))
                F[r] = uh
                G[r] = uh[..., 0] * q[0] + uh[..., 1] * q[1]
                H[r] = gam.T
            else:
                ns = self.n_side[i]
                w = np.transpose(W, (1, 0, 2))
                rows[r, :, :, 0] = ns[0]
                rows[r, :, :, 1] = ns[1]
                rows[r, :, :, 2] = w[..., 0] * ns[0] + w[..., 1] * ns[1]
                rows[r, :, :, 3] = -(ns @ q)
                e = self.b[i] - q
                e = e / (e @ e)
                F[r] = e
                G[r] = -(q @ e)
                H[r] = w[..., 0] * e[0] + w[..., 1] * e[1]
        C = n * k
        return rows.reshape(C, N, 4), F.reshape(C, N, 2), G.reshape(C, N), H.reshape(C, N)

    def solve_grid(self, triples: np.ndarray, theta: np.ndarray, tables=None):
        """Solve every contact triple (M, 3) at every orientation (N,).

        Returns x, y, delta and a validity mask, each of shape (M, N): valid rows
        have a positive scale and every contact point on its element.
        """
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if tables is not None:
            rows, F, G, H = tables
            look = triples
        else:
            # only the sites the triples touch
            used = np.unique(triples // self.k)
            rows, F, G, H = self.contact_tables(theta, used)
            look = np.searchsorted(used, triples // self.k) * self.k + triples % self.k
        r = [rows[look[:, i]] for i in range(3)]  # (M, N, 4)
        a = [ri[..., :3] for ri in r]
        b = [-ri[..., 3] for ri in r]
        c23 = np.cross(a[1], a[2])
        c31 = np.cross(a[2], a[0])
        c12 = np.cross(a[0], a[1])
        det = np.einsum("mnd,mnd->mn", a[0], c23)
        norms = np.linalg.norm(a[0], axis=-1) * np.linalg.norm(a[1], axis=-1) * np.linalg.norm(a[2], axis=-1)
        ok = np.abs(det) > 1e-12 * norms
        with np.errstate(invalid="ignore", divide="ignore"):
            u = (b[0][..., None] * c23 + b[1][..., None] * c31 + b[2][..., None] * c12) / det[..., None]
            x, y, d = u[..., 0], u[..., 1], u[..., 2]
            ok &= d > MIN_DELTA * self.scale
            for i in range(3):
                ci = triples[:, i]
                f, g, h = F[look[:, i]], G[look[:, i]], H[look[:, i]]
                dot = x * f[..., 0] + y * f[..., 1]
                side = ~self.is_point[ci // self.k][:, None]
                t = np.where(side, dot + g + d * h, (g - dot) / d - h)
                ok &= (t >= -EXTENT_SLACK) & (t <= 1 + EXTENT_SLACK)
        return x, y, d, ok

    # --- distances and certification --------------------------------------------------

    def distances(self, x: np.ndarray, y: np.ndarray, theta: np.ndarray, which: np.ndarray | None = None) -> np.ndarray:
        """Pattern distance from each centre to each site, shape (M, n)."""
        P = self.P
        M = len(x)
        idx = np.arange(len(self.sites)) if which is None else np.asarray(which)
        out = np.empty((M, len(idx)))
        W = _rot_arrays(P.offsets, theta)
        Mn = _rot_arrays(P.normals, theta) / P.support[None, :, None]
        c = np.stack([x, y], axis=1)
        pts = [t for t, i in enumerate(idx) if self.is_point[i]]
        if pts:
            z = self.a[idx[pts]][None, :, :] - c[:, None, :]  # (M, np, 2)
            g = np.einsum("mpd,mjd->mpj", z, Mn).max(axis=2)
            out[:, pts] = np.maximum(g, 0.0)
        for t, i in enumerate(idx):
            if self.is_point[i]:
                continue
            a = self.a[i]
            d = self.b[i] - a
            rel = a[None, :] - c
            den = d[0] * W[:, :, 1] - d[1] * W[:, :, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                s = (W[:, :, 0] * rel[:, 1:2] - W[:, :, 1] * rel[:, 0:1]) / den
            s = np.where(np.isfinite(s), np.clip(s, 0.0, 1.0), 0.0)
            s = np.concatenate([s, np.zeros((M, 1)), np.ones((M, 1))], axis=1)
            z = rel[:, None, :] + s[:, :, None] * d[None, None, :]
            g = np.einsum("msd,mjd->msj", z, Mn).max(axis=2).min(axis=1)
            out[:, t] = np.maximum(g, 0.0)
        return out

    def in_container(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ring = self.Q.outer
        if not ring:
            return np.ones(np.shape(x), dtype=bool)
        return _inside_ring(x, y, ring) | (_ring_distance(x, y, ring) <= self.tol)

    def in_free_space(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ok = self.in_container(x, y)
        for ring in self.Q.obstacles:
            ok &= ~_inside_ring(x, y, ring) | (_ring_distance(x, y, ring) <= self.tol)
        return ok

    def certify(self, x, y, d, theta) -> np.ndarray:
        """Empty-copy test: no site closer than the clearance, centre in the container."""
        ok = np.zeros(len(x), dtype=bool)
        for s in range(0, len(x), max(1, CHUNK // max(1, len(self.sites)))):
            sl = slice(s, s + max(1, CHUNK // max(1, len(self.sites))))
            dist = self.distances(x[sl], y[sl], theta[sl])
            ok[sl] = dist.min(axis=1) >= d[sl] - self.tol
        return ok & self.in_container(x, y)

    def touching(self, x, y, d, theta) -> np.ndarray:
        """Mask (M, n) of sites at the clearance within tolerance."""
        dist = self.distances(x, y, theta)
        return np.abs(dist - d[:, None]) <= self.tol

    # --- enumeration -----------------------------------------------------------------

    def triples_for(self, site_ids: Iterable[int] | None = None, require: Iterable[int] | None = None) -> np.ndarray:
        """All contact triples over distinct sites drawn from ``site_ids``."""
        idx = range(len(self.sites)) if site_ids is None else sorted(self.id_to_index[s] for s in site_ids)
        need = None if require is None else {self.id_to_index[s] for s in require}
        trip = [t for t in itertools.combinations(idx, 3) if need is None or need & set(t)]
        if not trip:
            return np.zeros((0, 3), dtype=int)
        T = np.array(trip, dtype=int)
        k = self.k
        el = np.array(list(itertools.product(range(k), repeat=3)), dtype=int)
        return (T[:, None, :] * k + el[None, :, :]).reshape(-1, 3)

    def witnesses(self, triples: np.ndarray, theta: float):
        """Certified witnesses for the triples at one orientation."""
        th = np.array([float(theta)])
        tables = self.contact_tables(th)
        xs, ys, ds, ts = [], [], [], []
        for s in range(0, len(triples), CHUNK):
            T = triples[s:s + CHUNK]
            x, y, d, ok = self.solve_grid(T, th, tables)
            sel = np.flatnonzero(ok[:, 0])
            if not sel.size:
                continue
            x, y, d = x[sel, 0], y[sel, 0], d[sel, 0]
            cert = self.certify(x, y, d, np.full(len(sel), th[0]))
            xs.append(x[cert]); ys.append(y[cert]); ds.append(d[cert]); ts.append(T[sel[cert]])
        if not xs:
            return np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((0, 3), dtype=int)
        return np.concatenate(xs), np.concatenate(ys), np.concatenate(ds), np.concatenate(ts)

    def faces_from(self, x, y, d, T, theta: float) -> list[Face]:
        """Merge coincident witnesses and attach the full contact and label sets."""
        tol = MERGE * self.scale
        order = np.lexsort((y, x, -d))
        groups: list[list[int]] = []
        reps: list[tuple[float, float, float]] = []
        for i in order:
            for g, (gx, gy, gd) in zip(groups, reps):
                if abs(x[i] - gx) <= tol and abs(y[i] - gy) <= tol and abs(d[i] - gd) <= tol:
                    g.append(i)
                    break
            else:
                groups.append([i])
                reps.append((x[i], y[i], d[i]))
        faces = []
        if groups:
            R = np.array(reps)
            hit = self.touching(R[:, 0], R[:, 1], R[:, 2], np.full(len(R), theta))
        for gi, (g, (gx, gy, gd)) in enumerate(zip(groups, reps)):
            cset = {self.contacts[c] for i in g for c in T[i]}
            # a segment touched only at its endpoint joins through distance, not through a triple
            touch = {self.sites[j].id for j in np.flatnonzero(hit[gi])}
            sites = tuple(sorted({c.site.id for c in cset} | touch))
            f = Face(sites, frozenset(cset), Point(float(gx), float(gy)), float(gd))
            f.label = face_label(self.P, theta, f, self.scale, 10 * MERGE, self.site_map)
            faces.append(f)
        faces.sort(key=lambda f: (f.sites, f.center))
        return faces


def _gedges_from(faces: Sequence[Face], sites: Sequence[Site]) -> list[GEdge]:
    by_id = {s.id: s for s in sites}
    pairs = sorted({(a, b) for f in faces for a, b in itertools.combinations(f.sites, 2)})
    return [GEdge(a, b, gedge_kind(by_id[a], by_id[b])) for a, b in pairs]


def build_edt(Q: PolygonalDomain, P: ConvexPolygon, theta: float, table: SiteTable | None = None) -> EdgeDelaunay:
    table = table or SiteTable(Q, P)
    if len(table.sites) < 3:
        raise TooFewSites(f"need at least three sites, got {len(table.sites)}")
    theta = float(theta)
    x, y, d, T = table.witnesses(table.triples_for(), theta)
    faces = table.faces_from(x, y, d, T, theta)
    return EdgeDelaunay(theta, table.sites, _gedges_from(faces, table.sites), faces)


def face_label(P: ConvexPolygon, theta: float, f: Face, scale: float = 1.0, tol: float = CERT_TOL,
               site_map: dict | None = None) -> frozenset:
    """Pattern elements of the witness copy touching its defining sites.

    A contact within tolerance of a pattern vertex is reported as that vertex.
    """
    tol = tol * max(1.0, scale)
    pl = Placement(f.center.x, f.center.y, theta, f.clearance)
    V = place(P, pl)
    k = P.k
    sites = dict(site_map or {})
    sites.update((c.site.id, c.site) for c in f.contacts)
    label = set()
    for sid in f.sites:
        s = sites[sid]
        found = False
        if s.is_point:
            q = s.a
            for i in range(k):
                if math.hypot(V[i].x - q.x, V[i].y - q.y) <= tol:
                    label.add(vertex_handle(i))
                    found = True
            if not found:
                for j in range(k):
                    if _seg_dist(q, V[j], V[(j + 1) % k]) <= tol:
                        label.add(edge_handle(j))
                        found = True
        else:
            for i in range(k):
                if _seg_dist(V[i], s.a, s.b) <= tol:
                    label.add(vertex_handle(i))
                    found = True
            if not found:
                for q in (s.a, s.b):
                    for j in range(k):
                        if _seg_dist(q, V[j], V[(j + 1) % k]) <= tol:
                            label.add(edge_handle(j))
                            found = True
        if not found:
            raise NoContact(f"site {sid} does not touch the witness copy")
    return frozenset(label)


def _seg_dist(p, a, b) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / L2))
    return math.hypot(p[0] - a[0] - t * dx, p[1] - a[1] - t * dy)


def best_candidates(table: SiteTable, thetas: np.ndarray, triples: np.ndarray | None = None):
    """Largest certified copy with centre in free space, over many orientations.

    Returns (delta, x, y, theta, triple) or None. Candidates are certified in
    decreasing order of delta so only the top of the list is examined. Ties in
    delta go to the smallest theta, then the smallest (x, y).
    """
    T0 = table.triples_for() if triples is None else triples
    thetas = np.asarray(thetas, dtype=float)
    cand = []
    per = max(1, 4 * CHUNK // max(1, len(T0)))
    for s in range(0, len(thetas), per):
        th = thetas[s:s + per]
        tables = table.contact_tables(th)
        for c in range(0, len(T0), 4 * CHUNK):
            T = T0[c:c + 4 * CHUNK]
            x, y, d, ok = table.solve_grid(T, th, tables)
            mi, ni = np.nonzero(ok)
            if mi.size:
                cand.append((d[mi, ni], x[mi, ni], y[mi, ni], th[ni], T[mi]))
    if not cand:
        return None
    d = np.concatenate([c[0] for c in cand])
    x = np.concatenate([c[1] for c in cand])
    y = np.concatenate([c[2] for c in cand])
    th = np.concatenate([c[3] for c in cand])
    T = np.concatenate([c[4] for c in cand])
    order = np.argsort(-d, kind="stable")
    best = None
    winners: list[np.ndarray] = []
    B = 512
    for s in range(0, len(order), B):
        sel = order[s:s + B]
        if best is not None and d[sel[0]] < best * (1 - 1e-12):
            break
        ok = table.certify(x[sel], y[sel], d[sel], th[sel]) & table.in_free_space(x[sel], y[sel])
        hit = sel[ok]
        if hit.size:
            if best is None:
                best = float(d[hit].max())
            winners.append(hit[d[hit] >= best * (1 - 1e-12)])
    if best is None:
        return None
    w = np.concatenate(winners)
    i = w[np.lexsort((y[w], x[w], th[w]))[0]]
    return float(d[i]), float(x[i]), float(y[i]), float(th[i]), T[i]


def largest_homothet_at(Q: PolygonalDomain, P: ConvexPolygon, theta: float, table: SiteTable | None = None) -> Placement:
    table = table or SiteTable(Q, P)
    theta = canon_2pi(float(theta))
    r = best_candidates(table, np.array([theta]))
    if r is None:
        raise Infeasible(f"no feasible copy at theta={theta}")
    d, x, y, th, _ = r
    pl = Placement(x, y, th, d)
    if not is_feasible(P, pl, Q, 1e-7 * table.scale):
        raise Infeasible(f"best witness at theta={theta} fails the containment check")
    return pl
