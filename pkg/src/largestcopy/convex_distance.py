"""Pattern polygon, placements, the polygon-induced distance, contacts and containment.

A placement ``(x, y, theta, delta)`` puts the reference point of the pattern at
``(x, y)``, rotates the pattern by ``theta`` counterclockwise and scales it by
``delta`` about the reference point.

The distance induced by a convex polygon with an interior reference point is a
gauge: ``d(p, q) = max_j m_j(theta) . (q - p) / h_j`` where ``m_j`` is the outward
unit normal of edge ``j`` and ``h_j`` its distance from the reference point. All
distance evaluations below use that form; it is exact for polygons and cheap to
vectorise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geom_core import EPS_COL, GeometryError, Point, canon_2pi, cross, point

SegmentLike = Sequence[Sequence[float]]


def _signed_area(pts: Sequence[Point]) -> float:
    return 0.5 * sum(cross(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts)))


def _segments_cross(a, b, c, d) -> bool:
    """Proper or touching intersection of closed segments ab and cd."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    def on_seg(p, q, r):
        return min(p[0], q[0]) <= r[0] <= max(p[0], q[0]) and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])

    o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
    if ((o1 > 0) != (o2 > 0)) and o1 != 0 and o2 != 0 and ((o3 > 0) != (o4 > 0)) and o3 != 0 and o4 != 0:
        return True
    if o1 == 0 and on_seg(a, b, c):
        return True
    if o2 == 0 and on_seg(a, b, d):
        return True
    if o3 == 0 and on_seg(c, d, a):
        return True
    if o4 == 0 and on_seg(c, d, b):
        return True
    return False


def _is_simple(pts: Sequence[Point]) -> bool:
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_cross(a, b, pts[j], pts[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex pattern with counterclockwise vertices and an interior reference point.

    The reference defaults to the vertex centroid.
    """

    vertices: tuple[Point, ...]
    reference: Point = None  # type: ignore[assignment]

    def __post_init__(self):
        verts = tuple(point(*v) for v in self.vertices)
        if len(verts) < 3:
            raise GeometryError("a pattern needs at least three vertices")
        if _signed_area(verts) < 0:
            verts = tuple(reversed(verts))
        xs = [v.x for v in verts]
        ys = [v.y for v in verts]
        scale = max(max(xs) - min(xs), max(ys) - min(ys))
        k = len(verts)
        for i in range(k):
            a, b, c = verts[i - 1], verts[i], verts[(i + 1) % k]
            turn = cross(b - a, c - b)
            if turn <= EPS_COL * scale * scale:
                raise GeometryError(f"pattern is not strictly convex at vertex {i}")
        object.__setattr__(self, "vertices", verts)
        ref = self.reference
        if ref is None:
            ref = Point(sum(xs) / k, sum(ys) / k)
        ref = point(*ref)
        for i in range(k):
            if cross(verts[(i + 1) % k] - verts[i], ref - verts[i]) <= EPS_COL * scale * scale:
                raise GeometryError("reference point must be strictly interior")
        object.__setattr__(self, "reference", ref)
        w = np.array(verts, dtype=float) - np.array(ref, dtype=float)
        e = np.roll(w, -1, axis=0) - w
        m = np.stack([e[:, 1], -e[:, 0]], axis=1)
        m /= np.linalg.norm(m, axis=1)[:, None]
        object.__setattr__(self, "_w", w)
        object.__setattr__(self, "_m", m)
        object.__setattr__(self, "_h", np.einsum("ij,ij->i", m, w))

    @property
    def k(self) -> int:
        return len(self.vertices)

    @property
    def offsets(self) -> np.ndarray:
        """Vertices relative to the reference point, shape (k, 2)."""
        return self._w  # type: ignore[attr-defined]

    @property
    def normals(self) -> np.ndarray:
        """Outward unit normals of the edges at theta = 0; edge j joins v_j and v_{j+1}."""
        return self._m  # type: ignore[attr-defined]

    @property
    def support(self) -> np.ndarray:
        """Distance of each edge line from the reference point."""
        return self._h  # type: ignore[attr-defined]

    def frame(self, theta: float) -> tuple[np.ndarray, np.ndarray]:
        """Rotated vertex offsets and edge normals at orientation theta."""
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        return self.offsets @ rot.T, self.normals @ rot.T

    def diameter(self) -> float:
        w = self.offsets
        return float(np.max(np.linalg.norm(w[:, None, :] - w[None, :, :], axis=2)))


class SiteKind(enum.Enum):
    POINT = "point"
    SEGMENT = "segment"


@dataclass(frozen=True, order=True)
class Site:
    """A point or an open segment of the domain boundary."""

    id: int
    kind: SiteKind = field(compare=False)
    a: Point = field(compare=False)
    b: Point | None = field(default=None, compare=False)
    endpoints: tuple[int, int] | None = field(default=None, compare=False)

    @property
    def is_point(self) -> bool:
        return self.kind is SiteKind.POINT


@dataclass(frozen=True)
class PolygonalDomain:
    """Bounded container with polygonal, segment and point obstacles.

    The outer boundary is stored counterclockwise and obstacle polygons
    clockwise; input in either orientation is normalised. An empty outer
    boundary gives an unbounded domain, used for diagrams of free sites.
    """

    outer: tuple[Point, ...]
    obstacles: tuple[tuple[Point, ...], ...] = ()
    segments: tuple[tuple[Point, Point], ...] = ()
    points: tuple[Point, ...] = ()

    def __post_init__(self):
        outer = tuple(point(*p) for p in self.outer)
        if outer:
            if len(outer) < 3:
                raise GeometryError("outer boundary needs at least three vertices")
            if _signed_area(outer) < 0:
                outer = tuple(reversed(outer))
            if not _is_simple(outer):
                raise GeometryError("outer boundary is not simple")
        obstacles = []
        for poly in self.obstacles:
            pts = tuple(point(*p) for p in poly)
            if len(pts) < 3:
                raise GeometryError("obstacle polygon needs at least three vertices")
            if _signed_area(pts) > 0:
                pts = tuple(reversed(pts))
            if not _is_simple(pts):
                raise GeometryError("obstacle polygon is not simple")
            obstacles.append(pts)
        segs = []
        for s in self.segments:
            a, b = point(*s[0]), point(*s[1])
            if a == b:
                raise GeometryError("zero-length segment obstacle")
            segs.append((a, b))
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "obstacles", tuple(obstacles))
        object.__setattr__(self, "segments", tuple(segs))
        object.__setattr__(self, "points", tuple(point(*p) for p in self.points))
        loose = [p for poly in obstacles for p in poly] + [p for s in segs for p in s] + list(self.points)
        if not outer and not loose:
            raise GeometryError("domain has no boundary elements")
        tol = 1e-9 * max(1.0, max(abs(c) for p in (outer or loose) for c in p))
        for p in loose if outer else ():
            if not _inside_polygon(p, outer) and _distance_to_ring(p, outer) > tol:
                raise GeometryError(f"obstacle element {tuple(p)} lies outside the container")
        object.__setattr__(self, "_sites", self._build_sites())

    def _build_sites(self) -> tuple[Site, ...]:
        sites: list[Site] = []
        index: dict[Point, int] = {}

        def vertex(p: Point) -> int:
            if p not in index:
                index[p] = len(sites)
                sites.append(Site(len(sites), SiteKind.POINT, p))
            return index[p]

        chains: list[tuple[Point, Point]] = []
        for ring in (self.outer, *self.obstacles):
            for i in range(len(ring)):
                chains.append((ring[i], ring[(i + 1) % len(ring)]))
        chains.extend(self.segments)
        for p in self.points:
            vertex(p)
        seen: set[frozenset] = set()
        for a, b in chains:
            ia, ib = vertex(a), vertex(b)
            key = frozenset((ia, ib))
            if key in seen:
                continue
            seen.add(key)
            sites.append(Site(len(sites), SiteKind.SEGMENT, a, b, (ia, ib)))
        return tuple(sites)

    @property
    def sites(self) -> tuple[Site, ...]:
        return self._sites  # type: ignore[attr-defined]

    @property
    def n(self) -> int:
        """Total number of boundary elements (edges plus vertices)."""
        return len(self.sites)

    def boundary_segments(self) -> list[tuple[Point, Point]]:
        return [(s.a, s.b) for s in self.sites if not s.is_point]

    @property
    def bounded(self) -> bool:
        return bool(self.outer)

    @property
    def scale(self) -> float:
        pts = self.outer or tuple(p for s in self.sites for p in ((s.a,) if s.is_point else (s.a, s.b)))
        xs = [p.x for p in pts]
        ys = [p.y for p in pts]
        return max(1.0, math.hypot(max(xs) - min(xs), max(ys) - min(ys)))


@dataclass(frozen=True)
class Placement:
    x: float
    y: float
    theta: float
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise GeometryError(f"expansion factor must be positive, got {self.delta}")
        object.__setattr__(self, "theta", canon_2pi(float(self.theta)))

    @property
    def center(self) -> Point:
        return Point(self.x, self.y)


class ContactKind(enum.Enum):
    SIDE = "side"
    CORNER = "corner"


@dataclass(frozen=True, order=True)
class ContactPair:
    """Side contact: segment site with a pattern vertex. Corner contact: point site with a pattern edge.

    ``p_index`` is the vertex index for side contacts and the edge index (edge j
    joins vertices j and j+1) for corner contacts.
    """

    site: Site
    p_index: int
    kind: ContactKind = field(default=None, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        kind = ContactKind.CORNER if self.site.is_point else ContactKind.SIDE
        if self.kind is not None and self.kind is not kind:
            raise GeometryError(f"{self.kind.value} contact needs a {'segment' if self.kind is ContactKind.SIDE else 'point'} site")
        object.__setattr__(self, "kind", kind)

    @property
    def is_side(self) -> bool:
        return self.kind is ContactKind.SIDE


@dataclass(frozen=True, order=True)
class Hinge:
    """A domain corner held at a pattern corner."""

    q_corner: Site
    p_corner: int

    def __post_init__(self):
        if not self.q_corner.is_point:
            raise GeometryError("hinge needs a point site")


def place(P: ConvexPolygon, pl: Placement) -> list[Point]:
    w, _ = P.frame(pl.theta)
    return [Point(pl.x + pl.delta * a, pl.y + pl.delta * b) for a, b in w]


def gauge(P: ConvexPolygon, theta: float, z: np.ndarray) -> np.ndarray:
    """Gauge of P_theta evaluated on an array of vectors with trailing dimension 2."""
    _, m = P.frame(theta)
    return np.max(np.asarray(z, dtype=float) @ m.T / P.support, axis=-1)


def p_distance(P: ConvexPolygon, theta: float, p, q) -> float:
    """Smallest mu >= 0 with q in p + mu * P_theta."""
    z = np.array([q[0] - p[0], q[1] - p[1]], dtype=float)
    return max(0.0, float(gauge(P, theta, z)))


def segment_distances(P: ConvexPolygon, theta: float, centers: np.ndarray, a, b) -> np.ndarray:
    """Distance from each centre to the closed segment ab.

    The gauge restricted to the segment is convex and piecewise linear in the
    segment parameter, with kinks where the segment meets a ray from the centre
    through a rotated vertex. The minimum is attained at a kink or an endpoint, so
    evaluating those candidates is exact.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    w, m = P.frame(theta)
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    rel = a[None, :] - centers  # a - c
    den = d[0] * w[:, 1] - d[1] * w[:, 0]  # cross(d, w_i)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (w[None, :, 0] * rel[:, None, 1] - w[None, :, 1] * rel[:, None, 0]) / den[None, :]
    s = np.where(np.isfinite(s), np.clip(s, 0.0, 1.0), 0.0)
    s = np.concatenate([s, np.zeros((len(centers), 1)), np.ones((len(centers), 1))], axis=1)
    z = rel[:, None, :] + s[:, :, None] * d[None, None, :]
    g = np.max(z @ m.T / P.support, axis=-1)
    return np.maximum(np.min(g, axis=1), 0.0)


def site_distance(P: ConvexPolygon, theta: float, p, s: Site) -> float:
    if s.is_point:
        return p_distance(P, theta, p, s.a)
    return float(segment_distances(P, theta, np.array([p], dtype=float), s.a, s.b)[0])


def _point_segment_distance(p, a, b) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def contact_points(P: ConvexPolygon, pl: Placement, c: ContactPair) -> tuple[Point, Point, Point]:
    """Return (point element, side-element start, side-element end) in the plane."""
    verts = place(P, pl)
    if c.is_side:
        return verts[c.p_index], c.site.a, c.site.b  # type: ignore[return-value]
    j = c.p_index
    return c.site.a, verts[j], verts[(j + 1) % P.k]


def satisfies_contact(P: ConvexPolygon, pl: Placement, c: ContactPair, tol: float) -> bool:
    pt, a, b = contact_points(P, pl, c)
    return _point_segment_distance(pt, a, b) <= tol


def satisfies_hinge(P: ConvexPolygon, pl: Placement, h: Hinge, tol: float) -> bool:
    v = place(P, pl)[h.p_corner]
    return math.hypot(v.x - h.q_corner.a.x, v.y - h.q_corner.a.y) <= tol


def _inside_polygon(p, ring: Sequence[Point]) -> bool:
    """Even-odd point-in-polygon test (boundary handling left to callers)."""
    x, y = p
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xi > x:
                inside = not inside
    return inside


def _distance_to_ring(p, ring: Sequence[Point]) -> float:
    return min(_point_segment_distance(p, ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring)))


def _clip_hits_interior(verts: Sequence[Point], a, b, tol: float) -> bool:
    """Whether segment ab meets the polygon shrunk inward by tol (Cyrus-Beck)."""
    t0, t1 = 0.0, 1.0
    d = (b[0] - a[0], b[1] - a[1])
    k = len(verts)
    for i in range(k):
        p, q = verts[i], verts[(i + 1) % k]
        ex, ey = q[0] - p[0], q[1] - p[1]
        L = math.hypot(ex, ey)
        # inward normal for a CCW polygon
        nx, ny = -ey / L, ex / L
        num = nx * (a[0] - p[0]) + ny * (a[1] - p[1]) - tol
        den = nx * d[0] + ny * d[1]
        if den == 0.0:
            if num < 0:
                return False
            continue
        t = -num / den
        if den > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1:
            return False
    return t1 - t0 > 1e-15


def is_feasible(P: ConvexPolygon, pl: Placement, Q: PolygonalDomain, tol: float) -> bool:
    """Closed containment of the placed pattern in the free space of Q."""
    verts = place(P, pl)
    for v in verts if Q.bounded else ():
        if not _inside_polygon(v, Q.outer) and _distance_to_ring(v, Q.outer) > tol:
            return False
    for a, b in Q.boundary_segments():
        if _clip_hits_interior(verts, a, b, tol):
            return False
    # Isolated points and obstacle vertices strictly inside the copy.
    k = len(verts)
    for s in Q.sites:
        if not s.is_point:
            continue
        p = s.a
        inside = all(
            cross(verts[(i + 1) % k] - verts[i], p - verts[i]) > tol * math.hypot(*(verts[(i + 1) % k] - verts[i]))
            for i in range(k)
        )
        if inside:
            return False
    c = pl.center
    for ring in Q.obstacles:
        if _inside_polygon(c, ring) and _distance_to_ring(c, ring) > tol:
            return False
    return True


def domain_from_features(
    outer: Iterable, obstacles: Iterable = (), segments: Iterable = (), points: Iterable = ()
) -> PolygonalDomain:
    return PolygonalDomain(
        tuple(tuple(p) for p in outer),
        tuple(tuple(tuple(p) for p in poly) for poly in obstacles),
        tuple((tuple(s[0]), tuple(s[1])) for s in segments),
        tuple(tuple(p) for p in points),
    )
