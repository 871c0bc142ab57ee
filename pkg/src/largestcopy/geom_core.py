"""Planar primitives: points, lines, circles, directed angles and scale-rotate maps.

Everything here works in double precision. Incidences are checked by residuals
rather than exact predicates; the collinearity test normalises the orientation
determinant by the squared extent of the input so it behaves the same at any
coordinate scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

EPS_COL = 1e-12
TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class CollinearInput(GeometryError):
    pass


class NotOnLine(GeometryError):
    pass


class DegeneratePolynomial(GeometryError):
    pass


class Point(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Point(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Point(self.x - other[0], self.y - other[1])

    def __mul__(self, s):  # type: ignore[override]
        return Point(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __neg__(self):
        return Point(-self.x, -self.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


Vector = Point


def point(x: float, y: float) -> Point:
    """Build a point, rejecting NaN and infinities."""
    x, y = float(x), float(y)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite coordinate ({x}, {y})")
    return Point(x, y)


def dot(a, b) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def perp(a) -> Point:
    """Counterclockwise quarter turn."""
    return Point(-a[1], a[0])


def rotate(v, theta: float) -> Point:
    c, s = math.cos(theta), math.sin(theta)
    return Point(c * v[0] - s * v[1], s * v[0] + c * v[1])


def dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def canon_pi(a: float) -> float:
    """Representative of ``a`` modulo pi in [0, pi)."""
    r = math.fmod(a, math.pi)
    if r < 0.0:
        r += math.pi
    if r >= math.pi:
        r -= math.pi
    return r


def canon_2pi(a: float) -> float:
    """Representative of ``a`` modulo 2*pi in [0, 2*pi)."""
    r = math.fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r -= TWO_PI
    return r


def diff_mod_pi(a: float, b: float) -> float:
    """Signed distance between two angles taken modulo pi, in [-pi/2, pi/2)."""
    d = canon_pi(a - b)
    return d - math.pi if d >= math.pi / 2 else d


@dataclass(frozen=True)
class Line:
    anchor: Point
    direction: Point

    def __post_init__(self):
        n = math.hypot(*self.direction)
        if n == 0.0 or not math.isfinite(n):
            raise GeometryError("line direction must be a non-zero finite vector")
        if abs(n - 1.0) > 1e-12:
            object.__setattr__(self, "direction", Point(self.direction[0] / n, self.direction[1] / n))
        object.__setattr__(self, "anchor", Point(*self.anchor))

    @classmethod
    def through(cls, a, b) -> "Line":
        return cls(Point(*a), Point(b[0] - a[0], b[1] - a[1]))

    def distance(self, p) -> float:
        return abs(cross(self.direction, Point(p[0] - self.anchor[0], p[1] - self.anchor[1])))

    def intersect(self, other: "Line") -> Point:
        den = cross(self.direction, other.direction)
        if abs(den) < 1e-15:
            raise GeometryError("parallel lines do not intersect")
        w = Point(other.anchor[0] - self.anchor[0], other.anchor[1] - self.anchor[1])
        t = cross(w, other.direction) / den
        return self.anchor + self.direction * t


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise GeometryError("negative radius")

    def residual(self, p) -> float:
        return abs(dist(self.center, p) - self.radius)


@dataclass(frozen=True)
class ScaleRotate:
    s: float
    angle: float

    def __post_init__(self):
        if not self.s > 0:
            raise GeometryError("scale factor must be positive")


def apply(t: ScaleRotate, v) -> Point:
    r = rotate(v, t.angle)
    return Point(t.s * r[0], t.s * r[1])


def directed_angle(l1: Line, l2: Line) -> float:
    """Counterclockwise angle from ``l1`` to ``l2`` as a representative in [0, pi)."""
    a1 = math.atan2(l1.direction[1], l1.direction[0])
    a2 = math.atan2(l2.direction[1], l2.direction[0])
    return canon_pi(a2 - a1)


def angle_at(a, o, b) -> float:
    """Directed angle AOB: from line AO to line BO."""
    ux, uy, vx, vy = o[0] - a[0], o[1] - a[1], o[0] - b[0], o[1] - b[1]
    if (ux == 0.0 and uy == 0.0) or (vx == 0.0 and vy == 0.0):
        raise GeometryError("angle at a point coinciding with an arm")
    return canon_pi(math.atan2(vy, vx) - math.atan2(uy, ux))


def orientation_ok(a, b, c, eps: float = EPS_COL) -> float:
    """Signed doubled area of abc, raising CollinearInput when it is negligible.

    The determinant is compared against ``eps`` times the squared extent of the
    three points.
    """
    det = cross(Point(b[0] - a[0], b[1] - a[1]), Point(c[0] - a[0], c[1] - a[1]))
    scale = max(dist(a, b), dist(b, c), dist(a, c))
    if scale == 0.0 or abs(det) < eps * scale * scale:
        raise CollinearInput(f"points {tuple(a)}, {tuple(b)}, {tuple(c)} are collinear")
    return det


def circumcircle(a, b, c) -> Circle:
    d = 2.0 * orientation_ok(a, b, c)
    ax, ay = a
    bx, by = b[0] - ax, b[1] - ay
    cx, cy = c[0] - ax, c[1] - ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    center = Point(ax + ux, ay + uy)
    return Circle(center, math.hypot(ux, uy))


def _second_intersection(c1: Circle, c2: Circle, common) -> Point:
    # Reflect the shared point across the line of centres.
    d = Point(c2.center[0] - c1.center[0], c2.center[1] - c1.center[1])
    dd = dot(d, d)
    if dd == 0.0:
        raise CollinearInput("concentric circles")
    w = Point(common[0] - c1.center[0], common[1] - c1.center[1])
    foot = c1.center + d * (dot(w, d) / dd)
    return Point(2.0 * foot[0] - common[0], 2.0 * foot[1] - common[1])


def miquel_point(A, B, C, D, E, F) -> Point:
    """Common point of the circumcircles of EAF, FBD and DCE.

    D, E and F must lie on the lines CB, AC and AB respectively.
    """
    orientation_ok(A, B, C)
    scale = max(dist(A, B), dist(B, C), dist(A, C))
    tol = 1e-9 * max(1.0, scale)
    for p, (u, v), name in ((D, (C, B), "D"), (E, (A, C), "E"), (F, (A, B), "F")):
        if Line.through(u, v).distance(p) > tol:
            raise NotOnLine(f"{name} is not on its side line")
    circles = []
    for tri in ((E, A, F), (F, B, D), (D, C, E)):
        try:
            circles.append(circumcircle(*tri))
        except CollinearInput:
            # a foot sitting on a corner leaves that circle undefined
            circles.append(None)
    # each pair of circles shares one foot: (0, 2) share E, (0, 1) F, (1, 2) D
    for i, j, common in ((0, 2, E), (0, 1, F), (1, 2, D)):
        if circles[i] is None or circles[j] is None:
            continue
        g = _second_intersection(circles[i], circles[j], common)
        if dist(g, common) >= 1e-12 * max(1.0, scale):
            return g
        last = g
    if sum(c is not None for c in circles) < 2:
        raise CollinearInput("fewer than two circumcircles are defined")
    return last


def _poly_eval(c: Sequence[float], t: float) -> float:
    r = 0.0
    for a in c:
        r = r * t + a
    return r


def solve_quartic(c4: float, c3: float, c2: float, c1: float, c0: float) -> list[float]:
    """Real roots of c4 t^4 + c3 t^3 + c2 t^2 + c1 t + c0, ascending.

    Lower-degree inputs are accepted (leading zeros). Roots come from the
    companion-matrix eigenvalues, are polished with two Newton steps, and are
    kept only when the residual test passes.
    """
    coeffs = [float(c4), float(c3), float(c2), float(c1), float(c0)]
    cmax = max(abs(c) for c in coeffs)
    if cmax < 1e-14:
        raise DegeneratePolynomial("all coefficients vanish")
    while abs(coeffs[0]) < 1e-14 * cmax:
        coeffs.pop(0)
    if len(coeffs) == 1:
        return []
    deriv = [a * (len(coeffs) - 1 - i) for i, a in enumerate(coeffs[:-1])]
    eig = np.roots(coeffs)
    out: list[float] = []
    for z in eig:
        t = float(z.real)
        if abs(z.imag) > 1e-6 * max(1.0, abs(t)):
            # Near-double real roots split into a tight complex pair.
            if abs(z.imag) > 1e-4 * max(1.0, abs(t)):
                continue
        for _ in range(2):
            dp = _poly_eval(deriv, t)
            if dp == 0.0:
                break
            step = _poly_eval(coeffs, t) / dp
            if not math.isfinite(step) or abs(step) > 1e-2 * max(1.0, abs(t)):
                break
            t -= step
        if abs(_poly_eval(coeffs, t)) < 1e-10 * cmax * max(1.0, abs(t)) ** 4:
            out.append(t)
    out.sort()
    merged: list[float] = []
    for t in out:
        if merged and abs(t - merged[-1]) < 1e-6 * max(1.0, abs(t)):
            # a double root comes back as a pair split by about sqrt(eps)
            mid = 0.5 * (t + merged[-1])
            if abs(_poly_eval(coeffs, mid)) < 1e-10 * cmax * max(1.0, abs(mid)) ** 4:
                merged[-1] = mid
                continue
        merged.append(t)
    return merged
