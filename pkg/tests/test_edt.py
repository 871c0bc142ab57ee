import math

import numpy as np
import pytest

from largestcopy.convex_distance import (
    ConvexPolygon, PolygonalDomain, Site, SiteKind, domain_from_features, gauge, is_feasible,
    segment_distances, site_distance,
)
from largestcopy.geom_core import Point
from largestcopy.edt import (
    Face, GEdgeKind, NoContact, TooFewSites, build_edt, edge_handle, face_label,
    largest_homothet_at, sites_of, vertex_handle,
)

from instances import random_domain, random_pattern

SQUARE = ConvexPolygon([(-1, -1), (1, -1), (1, 1), (-1, 1)])
BOX = [(0, 0), (10, 0), (10, 10), (0, 10)]


def free_points(*pts):
    return PolygonalDomain((), points=tuple(pts))


def certify(Q, P, edt, rel=1e-8):
    # Oracle: every site is at least the clearance away, defining sites exactly at it.
    tol = rel * Q.scale
    for f in edt.faces:
        d = {s.id: site_distance(P, edt.theta, f.center, s) for s in Q.sites}
        for sid, v in d.items():
            assert v >= f.clearance - tol
        for sid in f.sites:
            assert abs(d[sid] - f.clearance) <= tol


class TestSitesOf:
    def test_box(self):
        sites = sites_of(domain_from_features(BOX))
        assert sum(s.is_point for s in sites) == 4 and len(sites) == 8

    def test_with_point(self):
        assert len(sites_of(domain_from_features(BOX, points=[(3, 3)]))) == 9

    def test_with_segment(self):
        sites = sites_of(domain_from_features(BOX, segments=[((2, 2), (4, 5))]))
        assert len(sites) == 11
        seg = [s for s in sites if not s.is_point and {tuple(s.a), tuple(s.b)} == {(2, 2), (4, 5)}][0]
        ends = {tuple(sites[i].a) for i in seg.endpoints}
        assert ends == {(2, 2), (4, 5)}


class TestBuild:
    def test_cocircular_corners_merge(self):
        Q = free_points((0, 0), (10, 0), (10, 10), (0, 10))
        edt = build_edt(Q, SQUARE, 0.0)
        assert len(edt.faces) == 1
        f = edt.faces[0]
        assert len(f.sites) == 4
        assert f.center == pytest.approx((5, 5), abs=1e-7)
        assert f.clearance == pytest.approx(5, abs=1e-7)

    def test_single_triangle(self):
        Q = free_points((0, 0), (10, 0), (0, 10))
        edt = build_edt(Q, SQUARE, 0.0)
        assert len(edt.faces) == 1
        assert len(edt.gedges) == 3
        assert all(e.kind is GEdgeKind.EDGE for e in edt.gedges)
        certify(Q, SQUARE, edt)

    def test_box_typing(self):
        Q = domain_from_features(BOX)
        edt = build_edt(Q, SQUARE, 0.3)
        assert edt.gedges
        for e in edt.gedges:
            a, b = Q.sites[e.a], Q.sites[e.b]
            want = {2: GEdgeKind.EDGE, 1: GEdgeKind.WEDGE, 0: GEdgeKind.LEDGE}[a.is_point + b.is_point]
            assert e.kind is want
        assert any(e.kind is GEdgeKind.LEDGE for e in edt.gedges)

    def test_too_few(self):
        with pytest.raises(TooFewSites):
            build_edt(free_points((0, 0), (1, 1)), SQUARE, 0.0)

    def test_random_certified_and_sparse(self):
        rng = np.random.default_rng(21)
        for _ in range(12):
            Q = random_domain(rng, int(rng.integers(3, 6)), int(rng.integers(0, 3)), int(rng.integers(0, 2)))
            P = random_pattern(rng, int(rng.integers(3, 7)))
            edt = build_edt(Q, P, rng.uniform(0, 2 * math.pi))
            certify(Q, P, edt)
            assert len(edt.faces) <= 2 * len(Q.sites) - 4
            # each gedge lies on some certified face
            on_face = {frozenset(p) for f in edt.faces for p in _pairs(f.sites)}
            assert all(frozenset((e.a, e.b)) in on_face for e in edt.gedges)

    def test_json_dump(self):
        edt = build_edt(free_points((0, 0), (10, 0), (0, 10)), SQUARE, 0.0)
        doc = edt.to_json()
        assert len(doc["faces"]) == 1 and len(doc["gedges"]) == 3
        assert {g["kind"] for g in doc["gedges"]} == {"Edge"}


def _pairs(ids):
    return [(a, b) for i, a in enumerate(ids) for b in ids[i + 1:]]


class TestLabel:
    LEFT, RIGHT = Site(0, SiteKind.POINT, Point(-5, 0)), Site(1, SiteKind.POINT, Point(5, 0))
    SITES = {0: LEFT, 1: RIGHT}

    def face(self, clearance, center=(0, 0)):
        return Face((0, 1), frozenset(), Point(*center), clearance)

    def test_edges_between_points(self):
        # square edges 1 (right) and 3 (left) touch the two sites
        label = face_label(SQUARE, 0.0, self.face(5.0), site_map=self.SITES)
        assert label == {edge_handle(1), edge_handle(3)}

    def test_rotated_gives_vertices(self):
        label = face_label(SQUARE, math.pi / 4, self.face(5 / math.sqrt(2)), site_map=self.SITES)
        assert all(h[0] == "vertex" for h in label) and len(label) == 2

    def test_corner_wins_over_edges(self):
        label = face_label(SQUARE, 0.0, self.face(5.0, center=(0, 5)), site_map=self.SITES)
        assert label == {vertex_handle(0), vertex_handle(1)}

    def test_no_contact(self):
        with pytest.raises(NoContact):
            face_label(SQUARE, 0.0, self.face(4.0), site_map=self.SITES)


def grid_oracle(Q, P, theta, n=200):
    """Best clearance over a grid of centres, refined by pattern search."""
    segs = [s for s in Q.sites if not s.is_point]
    pts = np.array([s.a for s in Q.sites if s.is_point])
    xs = np.array([p[0] for p in Q.outer])
    ys = np.array([p[1] for p in Q.outer])

    def clearance(c):
        c = np.atleast_2d(c)
        d = np.min([gauge(P, theta, q - c) for q in pts], axis=0)
        for s in segs:
            d = np.minimum(d, segment_distances(P, theta, c, s.a, s.b))
        return d

    gx, gy = np.meshgrid(np.linspace(xs.min(), xs.max(), n), np.linspace(ys.min(), ys.max(), n))
    C = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = np.ones(len(C), bool)
    ring = np.array(Q.outer)
    nxt = np.roll(ring, -1, axis=0)
    for a, b in zip(ring, nxt):
        inside &= (b[0] - a[0]) * (C[:, 1] - a[1]) - (b[1] - a[1]) * (C[:, 0] - a[0]) >= 0
    C = C[inside]
    d = clearance(C)
    ang = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    out = 0.0
    # the optimum sits on a ridge where sites tie, so search many directions from several starts
    for best in C[np.argsort(-d)[:5]]:
        step = (xs.max() - xs.min()) / n
        bd = float(clearance(best)[0])
        while step > 1e-10:
            v = clearance(best + step * dirs)
            if v.max() > bd:
                best, bd = best + step * dirs[np.argmax(v)], float(v.max())
            else:
                step /= 2
        out = max(out, bd)
    return out


class TestLargestHomothet:
    def test_strip(self):
        pl = largest_homothet_at(domain_from_features([(0, 0), (10, 0), (10, 6), (0, 6)]), SQUARE, 0.0)
        assert pl.delta == pytest.approx(3, abs=1e-7)
        assert pl.y == pytest.approx(3, abs=1e-7)

    def test_box(self):
        pl = largest_homothet_at(domain_from_features(BOX), SQUARE, 0.0)
        assert (pl.x, pl.y, pl.delta) == pytest.approx((5, 5, 5), abs=1e-7)

    def test_box_with_point(self):
        Q = domain_from_features(BOX, points=[(5, 5)])
        pl = largest_homothet_at(Q, SQUARE, 0.0)
        assert pl.delta == pytest.approx(2.5, abs=1e-7)
        assert pl.delta == pytest.approx(grid_oracle(Q, SQUARE, 0.0), rel=1e-4)
        assert is_feasible(SQUARE, pl, Q, 1e-7 * Q.scale)

    def test_random_against_grid(self):
        rng = np.random.default_rng(33)
        for _ in range(5):
            Q = random_domain(rng, int(rng.integers(3, 6)), int(rng.integers(0, 4)), int(rng.integers(0, 2)))
            P = random_pattern(rng, int(rng.integers(3, 6)))
            theta = rng.uniform(0, 2 * math.pi)
            pl = largest_homothet_at(Q, P, theta)
            assert is_feasible(P, pl, Q, 1e-7 * Q.scale)
            assert pl.delta == pytest.approx(grid_oracle(Q, P, theta), rel=1e-4)
