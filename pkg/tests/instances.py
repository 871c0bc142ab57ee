"""Random instance generators shared by the tests."""

from __future__ import annotations

import math

import numpy as np

from largestcopy.convex_distance import ConvexPolygon, ContactPair, PolygonalDomain, Site, SiteKind, domain_from_features
from largestcopy.geom_core import Point


def random_convex(rng: np.random.Generator, k: int, center=(0.0, 0.0), radius=1.0, jitter=0.5) -> list[tuple[float, float]]:
    """Vertices of a random convex polygon from sorted angles on a perturbed circle."""
    if k < 3:
        raise ValueError(f"a polygon needs at least 3 vertices, got {k}")
    while True:
        ang = np.sort(rng.uniform(0, 2 * math.pi, k))
        gaps = np.diff(np.r_[ang, ang[0] + 2 * math.pi])
        if gaps.max() >= math.pi * 0.95:
            continue
        r = radius * (1 - jitter / 2 + jitter * rng.uniform(0, 1)) * np.ones(k)
        pts = [(center[0] + r[i] * math.cos(ang[i]), center[1] + r[i] * math.sin(ang[i])) for i in range(k)]
        try:
            ConvexPolygon(pts)
        except ValueError:
            continue
        return pts


def random_pattern(rng: np.random.Generator, k: int) -> ConvexPolygon:
    return ConvexPolygon(random_convex(rng, k, radius=1.0, jitter=0.3))


def random_domain(rng: np.random.Generator, outer_k: int, n_points: int = 0, n_segments: int = 0) -> PolygonalDomain:
    """Convex container in [0, 100]^2 with point and segment obstacles inside."""
    outer = random_convex(rng, outer_k, center=(50.0, 50.0), radius=45.0, jitter=0.2)
    poly = np.array(outer)
    cx, cy = poly.mean(axis=0)

    def inside(p):
        q = np.roll(poly, -1, axis=0)
        return bool(np.all((q[:, 0] - poly[:, 0]) * (p[1] - poly[:, 1]) - (q[:, 1] - poly[:, 1]) * (p[0] - poly[:, 0]) > 0))

    def inside_point():
        # shrink towards the centroid so obstacles stay well inside
        w = rng.dirichlet(np.ones(len(outer)))
        p = w @ poly
        return (cx + 0.8 * (p[0] - cx), cy + 0.8 * (p[1] - cy))

    points = [inside_point() for _ in range(n_points)]
    segments = []
    for _ in range(n_segments):
        a = inside_point()
        ang = rng.uniform(0, 2 * math.pi)
        L = rng.uniform(5, 15)
        b = (a[0] + L * math.cos(ang), a[1] + L * math.sin(ang))
        b = (cx + 0.8 * (b[0] - cx), cy + 0.8 * (b[1] - cy))
        while not inside(b):
            b = (cx + 0.5 * (b[0] - cx), cy + 0.5 * (b[1] - cy))
        segments.append((a, b))
    return domain_from_features(outer, segments=segments, points=points)


def planted_quadruple(rng: np.random.Generator, a: int, b: int, k: int | None = None):
    """Pattern and four contacts (a side, b corner) all met by one random copy.

    Returns (P, contacts, theta) where theta is the planted orientation.
    """
    if k is None:
        k = int(rng.integers(max(3, a, b), 9))
    P = ConvexPolygon(random_convex(rng, k, radius=1.0, jitter=0.6))
    th = rng.uniform(0, 2 * math.pi)
    d = rng.uniform(5, 20)
    c = rng.uniform(30, 70, 2)
    w, _ = P.frame(th)
    V = c + d * w
    verts = list(rng.permutation(k)[:a])
    edges = list(rng.permutation(k)[:b])
    cs = []
    for sid, i in enumerate(verts):
        # a wall through the vertex, turned between its two edge directions so the copy stays on one side
        e_out, e_in = V[i] - V[i - 1], V[(i + 1) % k] - V[i]
        a1 = math.atan2(e_out[1], e_out[0])
        span = (math.atan2(e_in[1], e_in[0]) - a1) % (2 * math.pi)
        ang = a1 + rng.uniform(0, span)
        u = np.array([math.cos(ang), math.sin(ang)])
        t, L = rng.uniform(0, 1), rng.uniform(5, 30)
        s = Site(sid, SiteKind.SEGMENT, Point(*(V[i] - t * L * u)), Point(*(V[i] + (1 - t) * L * u)))
        cs.append(ContactPair(s, int(i)))
    for sid, j in enumerate(edges, start=a):
        q = V[j] + rng.uniform(0, 1) * (V[(j + 1) % k] - V[j])
        cs.append(ContactPair(Site(sid, SiteKind.POINT, Point(*q)), int(j)))
    order = rng.permutation(4)
    return P, [cs[i] for i in order], th


def random_quadruple(rng: np.random.Generator, a: int, b: int, k: int | None = None):
    """Pattern and four unrelated contacts with elements uniform in [0, 100]^2."""
    if k is None:
        k = int(rng.integers(max(3, a, b), 9))
    P = ConvexPolygon(random_convex(rng, k, radius=1.0, jitter=0.6))
    cs = []
    for sid, i in enumerate(rng.permutation(k)[:a]):
        p, q = rng.uniform(0, 100, (2, 2))
        cs.append(ContactPair(Site(sid, SiteKind.SEGMENT, Point(*p), Point(*q)), int(i)))
    for sid, j in enumerate(rng.permutation(k)[:b], start=a):
        cs.append(ContactPair(Site(sid, SiteKind.POINT, Point(*rng.uniform(0, 100, 2))), int(j)))
    return P, cs
