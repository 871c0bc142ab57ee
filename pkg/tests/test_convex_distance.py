import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from largestcopy.convex_distance import (
    ConvexPolygon, ContactPair, GeometryError, Placement, PolygonalDomain, Site, SiteKind,
    domain_from_features, is_feasible, p_distance, place, satisfies_contact, site_distance,
)

SQUARE = ConvexPolygon([(-1, -1), (1, -1), (1, 1), (-1, 1)])
TRI = ConvexPolygon([(2, 0), (-1, 1), (-1, -1)], reference=(0, 0))
BOX = domain_from_features([(0, 0), (10, 0), (10, 10), (0, 10)])


def seg_site(Q, a, b):
    for s in Q.sites:
        if s.kind is SiteKind.SEGMENT and {tuple(s.a), tuple(s.b)} == {a, b}:
            return s
    raise LookupError((a, b))


def pt_site(Q, a):
    return next(s for s in Q.sites if s.is_point and tuple(s.a) == a)


def vertex_index(pts, target):
    return min(range(len(pts)), key=lambda i: math.dist(pts[i], target))


def bisect_mu(P, theta, p, q):
    """Oracle: smallest mu with q in p + mu*P_theta, by bisection on a containment test."""
    c, s = math.cos(theta), math.sin(theta)
    w = np.array(P.vertices) - np.array(P.reference)
    w = w @ np.array([[c, s], [-s, c]])
    z = np.array(q, float) - np.array(p, float)

    def inside(mu):
        v = mu * w
        e = np.roll(v, -1, axis=0) - v
        return np.all(e[:, 0] * (z[1] - v[:, 1]) - e[:, 1] * (z[0] - v[:, 0]) >= 0)

    lo, hi = 0.0, 1.0
    while not inside(hi):
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if inside(mid) else (mid, hi)
    return hi


def zoom_scan(f, lo=0.0, hi=1.0, n=401, rounds=6):
    # Oracle: grid minimum, then re-grid around the best sample.
    best = min(f(lo), f(hi))
    for _ in range(rounds):
        ts = np.linspace(lo, hi, n)
        vals = [f(t) for t in ts]
        i = int(np.argmin(vals))
        best = min(best, vals[i])
        lo, hi = ts[max(i - 2, 0)], ts[min(i + 2, n - 1)]
    return best


class TestPlace:
    def test_square_scaled(self):
        got = place(SQUARE, Placement(5, 5, 0, 3))
        assert np.allclose(got, [(2, 2), (8, 2), (8, 8), (2, 8)])

    def test_square_quarter_turn(self):
        got = place(SQUARE, Placement(0, 0, math.pi / 2, 1))
        assert sorted(map(tuple, np.round(got, 12))) == sorted(map(tuple, np.round(SQUARE.vertices, 12)))
        assert np.allclose(got[0], (1, -1))

    def test_triangle_dilation(self):
        assert np.allclose(place(TRI, Placement(0, 0, 0, 2)), [(4, 0), (-2, 2), (-2, -2)])

    def test_bad_delta(self):
        with pytest.raises(GeometryError):
            Placement(0, 0, 0, 0)

    def test_nonconvex_rejected(self):
        with pytest.raises(GeometryError):
            ConvexPolygon([(0, 0), (2, 0), (1, 0.5), (2, 2), (0, 2)])


class TestPDistance:
    def test_square_axis(self):
        assert p_distance(SQUARE, 0, (0, 0), (2, 0)) == pytest.approx(2)

    def test_triangle_axes(self):
        assert p_distance(TRI, 0, (0, 0), (4, 0)) == pytest.approx(2)
        assert p_distance(TRI, 0, (0, 0), (-2, 0)) == pytest.approx(2)

    def test_asymmetric(self):
        up = p_distance(TRI, 0, (0, 0), (0, 2))
        down = p_distance(TRI, 0, (0, 2), (0, 0))
        assert up == pytest.approx(bisect_mu(TRI, 0, (0, 0), (0, 2)), rel=1e-10)
        assert down == pytest.approx(bisect_mu(TRI, 0, (0, 2), (0, 0)), rel=1e-10)
        # the triangle is mirror symmetric in y, so the vertical pair agrees
        assert up == pytest.approx(3) and down == pytest.approx(3)
        assert p_distance(TRI, 0, (0, 0), (2, 0)) == pytest.approx(1)
        assert p_distance(TRI, 0, (2, 0), (0, 0)) == pytest.approx(2)

    def test_same_point(self):
        assert p_distance(TRI, 0.3, (1, 1), (1, 1)) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 2 * math.pi), st.lists(st.floats(-10, 10), min_size=4, max_size=4))
    def test_matches_bisection(self, theta, c):
        p, q = (c[0], c[1]), (c[2], c[3])
        assert p_distance(TRI, theta, p, q) == pytest.approx(bisect_mu(TRI, theta, p, q), rel=1e-9, abs=1e-12)


def test_metric_properties():
    rng = np.random.default_rng(5)
    for _ in range(500):
        theta = rng.uniform(0, 2 * math.pi)
        p, q, r, u = rng.uniform(-10, 10, (4, 2))
        t = rng.uniform(0, 5)
        d = p_distance(TRI, theta, p, q)
        assert p_distance(TRI, theta, p, p + t * (q - p)) == pytest.approx(t * d, rel=1e-10, abs=1e-12)
        assert p_distance(TRI, theta, p + u, q + u) == pytest.approx(d, rel=1e-12, abs=1e-12)
        assert p_distance(TRI, theta, p, r) <= d + p_distance(TRI, theta, q, r) + 1e-9
        c, s = math.cos(-theta), math.sin(-theta)
        rot = np.array([[c, -s], [s, c]])
        assert p_distance(TRI, 0, rot @ p, rot @ q) == pytest.approx(d, rel=1e-10, abs=1e-12)


class TestSiteDistance:
    def seg(self, a, b):
        return Site(0, SiteKind.SEGMENT, a, b)

    def test_vertical_segment(self):
        assert site_distance(SQUARE, 0, (0, 0), self.seg((3, -1), (3, 1))) == pytest.approx(3)

    def test_point_site_at_center(self):
        assert site_distance(SQUARE, 0, (2, 3), Site(0, SiteKind.POINT, (2, 3))) == 0.0

    def test_diagonal_segment(self):
        assert site_distance(SQUARE, 0, (0, 0), self.seg((2, 2), (4, 2))) == pytest.approx(2)

    def test_against_scan(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            theta = rng.uniform(0, 2 * math.pi)
            p, a, b = rng.uniform(-5, 5, (3, 2))
            scan = zoom_scan(lambda t: p_distance(TRI, theta, p, a + t * (b - a)))
            got = site_distance(TRI, theta, p, self.seg(tuple(a), tuple(b)))
            assert got <= scan + 1e-12
            assert got == pytest.approx(scan, rel=1e-9, abs=1e-12)


class TestContacts:
    PL = Placement(5, 5, 0, 5)

    def test_side_contact(self):
        wall = seg_site(BOX, (0, 10), (0, 0))
        bl = vertex_index(place(SQUARE, self.PL), (0, 0))
        tr = vertex_index(place(SQUARE, self.PL), (10, 10))
        assert satisfies_contact(SQUARE, self.PL, ContactPair(wall, bl), 1e-9)
        assert not satisfies_contact(SQUARE, self.PL, ContactPair(wall, tr), 1e-9)

    def test_corner_contact_at_edge_end(self):
        corner = pt_site(BOX, (10, 0))
        assert satisfies_contact(SQUARE, self.PL, ContactPair(corner, 0), 1e-9)
        assert not satisfies_contact(SQUARE, self.PL, ContactPair(corner, 2), 1e-9)


class TestFeasible:
    def test_exact_fit(self):
        assert is_feasible(SQUARE, Placement(5, 5, 0, 5), BOX, 1e-9)

    def test_overflow(self):
        assert not is_feasible(SQUARE, Placement(5, 5, 0, 5.01), BOX, 1e-9)

    def test_point_inside_copy(self):
        Q = domain_from_features([(0, 0), (10, 0), (10, 10), (0, 10)], points=[(5, 5)])
        assert not is_feasible(SQUARE, Placement(5, 5, 0, 4), Q, 1e-9)

    def test_segment_crossing_copy(self):
        Q = domain_from_features([(0, 0), (10, 0), (10, 10), (0, 10)], segments=[((1, 5), (9, 5))])
        assert not is_feasible(SQUARE, Placement(5, 3, 0, 2.5), Q, 1e-9)
        assert is_feasible(SQUARE, Placement(5, 3, 0, 1.9), Q, 1e-9)

    def test_monotone_in_delta(self):
        rng = np.random.default_rng(2)
        hex_box = domain_from_features([(50 + 45 * math.cos(a), 50 + 45 * math.sin(a)) for a in np.arange(6) * math.pi / 3])
        for _ in range(300):
            x, y = rng.uniform(10, 90, 2)
            pl = Placement(x, y, rng.uniform(0, 2 * math.pi), rng.uniform(1, 40))
            if is_feasible(TRI, pl, hex_box, 1e-9):
                for d in rng.uniform(0.01, pl.delta, 3):
                    assert is_feasible(TRI, Placement(x, y, pl.theta, d), hex_box, 1e-9)


class TestDomain:
    def test_element_count(self):
        Q = domain_from_features([(0, 0), (10, 0), (10, 10), (0, 10)], segments=[((2, 2), (3, 3))], points=[(7, 7)])
        assert Q.n == 8 + 3 + 1

    def test_obstacle_outside(self):
        with pytest.raises(GeometryError):
            domain_from_features([(0, 0), (10, 0), (10, 10), (0, 10)], points=[(11, 5)])

    def test_needs_boundary(self):
        with pytest.raises(GeometryError):
            PolygonalDomain(())
