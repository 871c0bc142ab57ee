"""Contact algebra: three-contact placements, expansion and length functions, and
critical orientations of four simultaneous contacts.

Every contact is one linear equation in the unknowns ``(x, y, delta)`` whose
coefficients depend on theta:

* side contact (segment ``ab`` with unit normal ``n``, pattern vertex ``i``):
  ``n . (c + delta R w_i - a) = 0``
* corner contact (point ``q``, pattern edge ``j``):
  ``m_j(theta) . (q - c) - delta h_j = 0``

Four contacts therefore meet at the zeros of a 4x4 determinant, which is a
homogeneous trigonometric polynomial in ``(cos theta, sin theta)``. When three of
the four contacts have the same kind, the family of copies satisfying them is a
spiral similarity about a fixed point ``G`` and the fourth contact gives an
equation of degree one or two; that path is tried first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .convex_distance import (
    ConvexPolygon,
    ContactPair,
    Hinge,
    Placement,
    PolygonalDomain,
    satisfies_contact,
)
from .envelope import PartialFunction
from .geom_core import (
    TWO_PI,
    CollinearInput,
    GeometryError,
    Line,
    Point,
    canon_2pi,
    circumcircle,
    Circle,
    miquel_point,
    orientation_ok,
    solve_quartic,
)

EXTENT_SLACK = 1e-9
COND_MAX = 1e12
ROOT_TOL = 1e-7
ROOT_MERGE = 1e-9
SCAN = 4096

CAPS = {(4, 0): 1, (3, 1): 2, (2, 2): 4, (1, 3): 2, (0, 4): 2}


class NoSolution(ValueError):
    pass


class EmptyDomain(ValueError):
    pass


class DegenerateConfiguration(GeometryError):
    pass


class _Fallback(Exception):
    """The spiral-similarity path does not apply; use the determinant."""


@dataclass(frozen=True)
class RestrictedContact:
    contact: ContactPair
    interval: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.interval
        if not hi >= lo:
            raise ValueError("restricted contact needs a nonempty interval")


@dataclass(frozen=True)
class QuadrupleType:
    a: int
    b: int

    def __post_init__(self):
        if self.a + self.b != 4 or self.a < 0 or self.b < 0:
            raise ValueError("a quadruple has four contacts")

    @classmethod
    def of(cls, contacts: Sequence[ContactPair]) -> "QuadrupleType":
        a = sum(1 for c in contacts if c.is_side)
        return cls(a, len(contacts) - a)

    @property
    def cap(self) -> int:
        return CAPS[(self.a, self.b)]

    def __str__(self):
        return f"({self.a},{self.b})"


def _rot(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.cos(theta), np.sin(theta)


def _rotate_arr(v: np.ndarray, c: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return c * v[0] - s * v[1], s * v[0] + c * v[1]


def _side_normal(c: ContactPair) -> np.ndarray:
    a, b = c.site.a, c.site.b
    d = np.array([b[0] - a[0], b[1] - a[1]], dtype=float)
    L = math.hypot(*d)
    if L == 0.0:
        raise GeometryError("zero-length segment site")
    return np.array([-d[1], d[0]]) / L


def _row_coeffs(P: ConvexPolygon, c: ContactPair) -> np.ndarray:
    """Fixed part, cosine part and sine part of the contact row, shape (3, 4)."""
    out = np.zeros((3, 4))
    if c.is_side:
        n = _side_normal(c)
        w = P.offsets[c.p_index]
        out[0, :2] = n
        out[0, 3] = -(n[0] * c.site.a[0] + n[1] * c.site.a[1])
        # n . R(theta) w = cos (n . w) + sin (n . J w)
        out[1, 2] = n[0] * w[0] + n[1] * w[1]
        out[2, 2] = n[1] * w[0] - n[0] * w[1]
    else:
        m = P.normals[c.p_index]
        q = c.site.a
        out[0, 2] = -P.support[c.p_index]
        out[1, :2] = -m
        out[2, :2] = [m[1], -m[0]]
        out[1, 3] = m[0] * q[0] + m[1] * q[1]
        out[2, 3] = m[0] * q[1] - m[1] * q[0]
    return out


def _rows_at(coef: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Rows of stacked coefficients (m, 3, 4) at each orientation, shape (N, m, 4)."""
    co, si = np.cos(theta), np.sin(theta)
    return coef[None, :, 0] + co[:, None, None] * coef[None, :, 1] + si[:, None, None] * coef[None, :, 2]


def contact_rows(P: ConvexPolygon, c: ContactPair, theta) -> np.ndarray:
    """Coefficients ``[cx, cy, cdelta, const]`` of the contact equation, shape (N, 4)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return _rows_at(_row_coeffs(P, c)[None], theta)[:, 0]


def _extent_params(P: ConvexPolygon, c: ContactPair, x, y, d, theta) -> np.ndarray:
    """Position of the contact point along the side element (0 and 1 at its ends)."""
    co, si = _rot(theta)
    if c.is_side:
        wx, wy = _rotate_arr(P.offsets[c.p_index], co, si)
        px, py = x + d * wx, y + d * wy
        a, b = c.site.a, c.site.b
        ex, ey = b[0] - a[0], b[1] - a[1]
        return ((px - a[0]) * ex + (py - a[1]) * ey) / (ex * ex + ey * ey)
    j = c.p_index
    ax, ay = _rotate_arr(P.offsets[j], co, si)
    bx, by = _rotate_arr(P.offsets[(j + 1) % P.k], co, si)
    ex, ey = d * (bx - ax), d * (by - ay)
    ax, ay = x + d * ax, y + d * ay
    q = c.site.a
    with np.errstate(divide="ignore", invalid="ignore"):
        return ((q[0] - ax) * ex + (q[1] - ay) * ey) / (ex * ex + ey * ey)


@dataclass(frozen=True)
class TripleSystem:
    """Three contacts determining a copy at each orientation."""

    P: ConvexPolygon
    contacts: tuple[ContactPair, ContactPair, ContactPair]

    def __post_init__(self):
        if len(self.contacts) != 3 or len(set(self.contacts)) != 3:
            raise ValueError("a triple system needs three distinct contacts")
        object.__setattr__(self, "contacts", tuple(self.contacts))

    @property
    def excluded(self) -> bool:
        """C1 and C2 share their domain element or their pattern element."""
        c1, c2 = self.contacts[0], self.contacts[1]
        return c1.site == c2.site or (c1.kind is c2.kind and c1.p_index == c2.p_index)

    def rows(self, theta) -> np.ndarray:
        return np.stack([contact_rows(self.P, c, theta) for c in self.contacts], axis=1)

    def solve_many(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """Solutions ``(x, y, delta)`` per orientation and a validity mask."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        M = self.rows(theta)
        A, rhs = M[:, :, :3], -M[:, :, 3]
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(A)
        ok = np.isfinite(cond) & (cond < COND_MAX)
        sol = np.full((theta.size, 3), np.nan)
        if ok.any():
            sol[ok] = np.linalg.solve(A[ok], rhs[ok][..., None])[..., 0]
        x, y, d = sol[:, 0], sol[:, 1], sol[:, 2]
        with np.errstate(invalid="ignore"):
            ok &= d > 0
            for c in self.contacts:
                t = _extent_params(self.P, c, x, y, d, theta)
                ok &= (t >= -EXTENT_SLACK) & (t <= 1 + EXTENT_SLACK)
        return sol, ok


def triple_placement(ts: TripleSystem, theta: float) -> Placement:
    sol, ok = ts.solve_many(np.array([theta]))
    if not ok[0]:
        raise NoSolution(f"no valid copy for the triple at theta={theta}")
    x, y, d = sol[0]
    return Placement(float(x), float(y), theta, float(d))


def _bisect_edge(pred: Callable[[float], bool], lo: float, hi: float, lo_val: bool, tol: float = 1e-12) -> float:
    while hi - lo > tol:
        m = 0.5 * (lo + hi)
        if pred(m) == lo_val:
            lo = m
        else:
            hi = m
    return 0.5 * (lo + hi)


def _intervals(mask_fn: Callable[[np.ndarray], np.ndarray], lo: float = 0.0, hi: float = TWO_PI,
               n: int = SCAN) -> list[tuple[float, float]]:
    """Closed intervals where a vectorised predicate holds, edges refined by bisection."""
    grid = np.linspace(lo, hi, n + 1)
    m = mask_fn(grid)

    def pred(t: float) -> bool:
        return bool(mask_fn(np.array([t]))[0])

    out: list[tuple[float, float]] = []
    start = lo if m[0] else None
    for i in range(n):
        if m[i] == m[i + 1]:
            continue
        t = _bisect_edge(pred, grid[i], grid[i + 1], bool(m[i]))
        if m[i]:
            out.append((start, t))  # type: ignore[arg-type]
            start = None
        else:
            start = t
    if start is not None:
        out.append((start, hi))
    return [(float(a), float(b)) for a, b in out]


def _hinge_center(P: ConvexPolygon, h: Hinge, theta, delta):
    co, si = _rot(theta)
    wx, wy = _rotate_arr(P.offsets[h.p_corner], co, si)
    q = h.q_corner.a
    return q[0] - delta * wx, q[1] - delta * wy


def expansion_function(H: Hinge, C: ContactPair, P: ConvexPolygon, Q: PolygonalDomain | None = None) -> PartialFunction:
    """Scale of the copy whose corner ``H.p_corner`` sits on ``H.q_corner`` and which meets ``C``.

    ``eval`` is the closed form wherever its denominator is nonzero; ``domain`` is
    where the scale is positive and the contact point lies on its side element.
    """
    hidx = H.p_corner
    qh = np.asarray(H.q_corner.a, dtype=float)
    wh = P.offsets[hidx]
    if C.is_side:
        if C.p_index == hidx:
            raise EmptyDomain("the hinge corner cannot also make the side contact")
        n = _side_normal(C)
        num = float(n @ (np.asarray(C.site.a, dtype=float) - qh))
        dw = P.offsets[C.p_index] - wh

        def ev(theta):
            co, si = _rot(np.asarray(theta, dtype=float))
            rx, ry = _rotate_arr(dw, co, si)
            with np.errstate(divide="ignore", invalid="ignore"):
                return num / (n[0] * rx + n[1] * ry)
    else:
        j = C.p_index
        if hidx == j or hidx == (j + 1) % P.k:
            raise EmptyDomain("the hinge corner lies on the contact edge")
        den = float(P.normals[j] @ (P.offsets[j] - wh))
        dq = np.asarray(C.site.a, dtype=float) - qh
        mj = P.normals[j]

        def ev(theta):
            co, si = _rot(np.asarray(theta, dtype=float))
            mx, my = _rotate_arr(mj, co, si)
            return (mx * dq[0] + my * dq[1]) / den

    def mask(theta):
        d = ev(theta)
        with np.errstate(invalid="ignore"):
            ok = np.isfinite(d) & (d > 0)
            x, y = _hinge_center(P, H, theta, d)
            t = _extent_params(P, C, x, y, d, theta)
            ok &= (t >= -EXTENT_SLACK) & (t <= 1 + EXTENT_SLACK)
        return ok

    dom = _intervals(mask)
    if not dom:
        raise EmptyDomain(f"no orientation realises hinge {H} with contact {C}")
    bounds = sorted({t for iv in dom for t in iv})
    return PartialFunction(("E", H, C), dom, ev, bounds)


def hinge_placement(P: ConvexPolygon, H: Hinge, E: PartialFunction, theta: float) -> Placement:
    d = float(E.eval(np.array([theta]))[0])
    x, y = _hinge_center(P, H, np.array([theta]), d)
    return Placement(float(x[0]), float(y[0]), theta, d)


def contact_elements(P: ConvexPolygon, c: ContactPair, x, y, d, theta):
    """Point element and side-element endpoints of a contact for arrays of copies."""
    co, si = _rot(theta)
    if c.is_side:
        wx, wy = _rotate_arr(P.offsets[c.p_index], co, si)
        pt = np.stack([x + d * wx, y + d * wy], axis=-1)
        a = np.broadcast_to(np.asarray(c.site.a, dtype=float), pt.shape)
        b = np.broadcast_to(np.asarray(c.site.b, dtype=float), pt.shape)
        return pt, a, b
    j = c.p_index
    ax, ay = _rotate_arr(P.offsets[j], co, si)
    bx, by = _rotate_arr(P.offsets[(j + 1) % P.k], co, si)
    a = np.stack([x + d * ax, y + d * ay], axis=-1)
    b = np.stack([x + d * bx, y + d * by], axis=-1)
    pt = np.broadcast_to(np.asarray(c.site.a, dtype=float), a.shape)
    return pt, a, b


def len_function(R: RestrictedContact, C1: ContactPair, C2: ContactPair, P: ConvexPolygon,
                 Q: PolygonalDomain | None = None) -> PartialFunction:
    """Distance from the clockwise end of C2's side element to C2's point element.

    The copy is the one meeting C1, C2 and ``R.contact``. Clockwise is taken
    relative to the ray from C1's point element to C2's point element; orientations
    where that ray is degenerate or parallel to the side element are left out of
    the domain.
    """
    ts = TripleSystem(P, (C1, C2, R.contact))
    lo, hi = map(float, R.interval)

    def parts(theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        sol, ok = ts.solve_many(theta)
        x, y, d = sol[:, 0], sol[:, 1], sol[:, 2]
        p1, _, _ = contact_elements(P, C1, x, y, d, theta)
        p2, a2, b2 = contact_elements(P, C2, x, y, d, theta)
        vc = p2 - p1
        ca = vc[:, 0] * (a2[:, 1] - p2[:, 1]) - vc[:, 1] * (a2[:, 0] - p2[:, 0])
        cb = vc[:, 0] * (b2[:, 1] - p2[:, 1]) - vc[:, 1] * (b2[:, 0] - p2[:, 0])
        e = np.where((ca < cb)[:, None], a2, b2)
        val = np.hypot(e[:, 0] - p2[:, 0], e[:, 1] - p2[:, 1])
        vlen = np.hypot(vc[:, 0], vc[:, 1])
        slen = np.hypot(b2[:, 0] - a2[:, 0], b2[:, 1] - a2[:, 1])
        with np.errstate(invalid="ignore"):
            tol = 1e-12 * np.maximum(1.0, vlen * slen)
            ok &= (vlen > 1e-12) & (np.abs(ca - cb) > tol) & (theta >= lo) & (theta <= hi)
            ok &= (np.minimum(ca, cb) < 0)
        return val, ok

    def ev(theta):
        val, ok = parts(theta)
        return np.where(ok, val, np.nan)

    if hi - lo <= 0:
        return PartialFunction(("len", R, C1, C2), [], ev, [])
    n = max(64, int(SCAN * (hi - lo) / TWO_PI))
    dom = _intervals(lambda t: parts(t)[1], lo, hi, n)
    return PartialFunction(("len", R, C1, C2), dom, ev, sorted({t for iv in dom for t in iv}))


# --- critical orientations -------------------------------------------------------------


def _trig_roots(f: Callable[[np.ndarray], np.ndarray], d: int, fscale: float) -> list[float]:
    """Roots in [0, pi) of a homogeneous degree-``d`` trigonometric form.

    With ``phi = theta - theta0`` the form equals ``cos(phi)^d p(tan phi)`` for a
    polynomial ``p`` of degree ``d``; ``p`` is fitted from samples and solved.
    ``theta0`` is chosen so the leading coefficient ``f(theta0 + pi/2)`` is large,
    which keeps roots away from ``phi = +-pi/2``.
    """
    cand = np.linspace(0.0, math.pi, 17)[:-1]
    lead = np.abs(f(cand + math.pi / 2))
    peak = float(np.max(np.abs(f(np.linspace(0, math.pi, 64)))))
    if peak <= 1e-12 * fscale:
        raise DegenerateConfiguration("the contact equation vanishes identically")
    theta0 = float(cand[int(np.argmax(lead))])
    if d == 0:
        return []
    m = 2 * d + 3
    phi = -math.pi / 2 + math.pi * (np.arange(m) + 0.5) / m
    w = np.tan(phi)
    vals = f(theta0 + phi) / np.cos(phi) ** d
    coef = np.polyfit(w, vals, d)
    coef = np.concatenate([np.zeros(4 - d), coef])
    try:
        ws = solve_quartic(*coef)
    except GeometryError:
        return []
    return sorted(canon_2pi(theta0 + math.atan(t)) % math.pi for t in ws)


def _polish(f: Callable[[np.ndarray], np.ndarray], t: float) -> float:
    h = 1e-7
    ft = float(f(np.array([t]))[0])
    for _ in range(4):
        fp, fm = f(np.array([t + h, t - h]))
        df = float(fp - fm) / (2 * h)
        if df == 0.0 or not math.isfinite(df):
            break
        step = ft / df
        if abs(step) > 1e-4:
            break
        t2 = t - step
        f2 = float(f(np.array([t2]))[0])
        if abs(f2) >= abs(ft):
            break
        t, ft = t2, f2
    return t


def _contact_scale(P: ConvexPolygon, cs: Sequence[ContactPair], Q: PolygonalDomain | None) -> float:
    if Q is not None:
        return Q.scale
    coords = [abs(v) for c in cs for p in (c.site.a, c.site.b) if p is not None for v in p]
    return max(1.0, max(coords))


def _normalised_rows(P: ConvexPolygon, cs: Sequence[ContactPair], theta: np.ndarray) -> np.ndarray:
    M = np.stack([contact_rows(P, c, theta) for c in cs], axis=1)
    return M / np.linalg.norm(M, axis=2, keepdims=True)


def _det_form(P: ConvexPolygon, cs: Sequence[ContactPair]):
    b = sum(1 for c in cs if not c.is_side)
    d = b + 1 if b < 4 else 3
    coef = np.stack([_row_coeffs(P, c) for c in cs])
    # Normalising rows by theta-dependent norms would break the polynomial
    # form, so use fixed per-contact weights taken at theta = 0.
    wts = 1.0 / np.linalg.norm(coef[:, 0] + coef[:, 1], axis=1)
    coef = coef * wts[:, None, None]

    def f(theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return np.linalg.det(_rows_at(coef, theta))

    return f, d


@dataclass
class _Spiral:
    """Copies meeting three same-kind contacts: c(theta) placed as G + s R(theta) (u - g)."""

    G: np.ndarray
    gamma: np.ndarray  # g - ref in pattern coordinates
    k: int  # index (within the triple) of the contact used for s
    coef: float  # N_k for side triples, k_k for corner triples
    side: bool
    P: ConvexPolygon
    triple: tuple[ContactPair, ContactPair, ContactPair]
    _normal: np.ndarray | None = None

    @property
    def normal(self) -> np.ndarray:
        if self._normal is None:
            self._normal = _side_normal(self.triple[self.k])
        return self._normal

    def hat(self, idx: int) -> np.ndarray:
        return self.P.offsets[idx] - self.gamma

    def denom(self, theta):
        """D(theta) for side triples or S(theta) for corner triples."""
        co, si = _rot(theta)
        c = self.triple[self.k]
        if self.side:
            rx, ry = _rotate_arr(self.hat(c.p_index), co, si)
            n = self.normal
            return n[0] * rx + n[1] * ry
        mx, my = _rotate_arr(self.P.normals[c.p_index], co, si)
        dq = np.asarray(c.site.a, dtype=float) - self.G
        return mx * dq[0] + my * dq[1]

    def scale(self, theta):
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.side:
                return -self.coef / self.denom(theta)
            return self.denom(theta) / self.coef

    def vertex(self, idx: int, theta):
        theta = np.asarray(theta, dtype=float)
        co, si = _rot(theta)
        rx, ry = _rotate_arr(self.hat(idx), co, si)
        s = self.scale(theta)
        return np.stack([self.G[0] + s * rx, self.G[1] + s * ry], axis=-1)


def _raw_solve(P: ConvexPolygon, cs: Sequence[ContactPair], theta: float):
    M = np.stack([contact_rows(P, c, np.array([theta]))[0] for c in cs])
    A, rhs = M[:, :3], -M[:, 3]
    if np.linalg.cond(A) > 1e8:
        return None
    return np.linalg.solve(A, rhs)


def _spiral(P: ConvexPolygon, triple: Sequence[ContactPair], scale: float) -> _Spiral:
    triple = tuple(triple)
    side = triple[0].is_side
    if any(c.is_side != side for c in triple):
        raise _Fallback("mixed triple")
    theta0 = None
    probes = np.linspace(0.1, math.pi + 0.1, 13)
    M = _rows_at(np.stack([_row_coeffs(P, c) for c in triple]), probes)
    with np.errstate(all="ignore"):
        cnd = np.linalg.cond(M[:, :, :3])
    for i in np.flatnonzero(np.isfinite(cnd) & (cnd <= 1e8)):
        sol = np.linalg.solve(M[i, :, :3], -M[i, :, 3])
        if abs(sol[2]) > 1e-6 * scale:
            theta0, sol0 = float(probes[i]), sol
            break
    if theta0 is None:
        raise _Fallback("triple system singular at every probe")
    c0 = sol0[:2]
    d0 = float(sol0[2])
    co, si = math.cos(theta0), math.sin(theta0)
    if side:
        lines = [Line.through(c.site.a, c.site.b) for c in triple]
        marks = [c0 + d0 * np.array([co * P.offsets[c.p_index][0] - si * P.offsets[c.p_index][1],
                                     si * P.offsets[c.p_index][0] + co * P.offsets[c.p_index][1]]) for c in triple]
    else:
        lines = []
        for c in triple:
            e = P.offsets[(c.p_index + 1) % P.k] - P.offsets[c.p_index]
            lines.append(Line(Point(*c.site.a), Point(co * e[0] - si * e[1], si * e[0] + co * e[1])))
        marks = [np.asarray(c.site.a, dtype=float) for c in triple]
    for i in range(3):
        for j in range(i + 1, 3):
            if abs(lines[i].direction[0] * lines[j].direction[1] - lines[i].direction[1] * lines[j].direction[0]) < 1e-9:
                raise _Fallback("parallel lines")
    A = lines[1].intersect(lines[2])
    B = lines[0].intersect(lines[2])
    C = lines[0].intersect(lines[1])
    try:
        G = np.array(miquel_point(A, B, C, Point(*marks[0]), Point(*marks[1]), Point(*marks[2])))
    except GeometryError as exc:
        raise _Fallback(str(exc)) from exc
    if not np.all(np.isfinite(G)) or np.hypot(*G) > 1e6 * scale:
        raise _Fallback("Miquel point at infinity")
    r = (G - c0) / d0
    gamma = np.array([co * r[0] + si * r[1], -si * r[0] + co * r[1]])
    if side:
        coefs = [float(_side_normal(c) @ (G - np.asarray(c.site.a, dtype=float))) for c in triple]
    else:
        coefs = [float(P.normals[c.p_index] @ (P.offsets[c.p_index] - gamma)) for c in triple]
    k = int(np.argmax(np.abs(coefs)))
    if abs(coefs[k]) < 1e-9 * scale:
        raise _Fallback("spiral centre lies on every contact line")
    sp = _Spiral(G, gamma, k, coefs[k], side, P, triple)
    # The triple solve at another orientation must agree with the spiral.
    t1 = theta0 + 0.7
    sol1 = _raw_solve(P, triple, t1)
    if sol1 is not None:
        ref = sp.G + sp.scale(np.array([t1]))[0] * _rotvec(-gamma, t1)
        if np.hypot(*(ref - sol1[:2])) > 1e-7 * scale or abs(sp.scale(np.array([t1]))[0] - sol1[2]) > 1e-7 * scale:
            raise _Fallback("spiral does not reproduce the triple solve")
    return sp


def _rotvec(v: np.ndarray, t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _spiral_form(sp: _Spiral, c4: ContactPair):
    """Fourth-contact equation along the spiral family, cleared of denominators."""
    P = sp.P
    if c4.is_side:
        n4 = _side_normal(c4)
        base = float(n4 @ (sp.G - np.asarray(c4.site.a, dtype=float)))
        h4 = sp.hat(c4.p_index)

        def lin(theta):
            co, si = _rot(theta)
            rx, ry = _rotate_arr(h4, co, si)
            return n4[0] * rx + n4[1] * ry

        if sp.side:
            return (lambda t: base * sp.denom(t) - sp.coef * lin(t)), 1
        return (lambda t: sp.coef * base + sp.denom(t) * lin(t)), 2
    j = c4.p_index
    k4 = float(P.normals[j] @ sp.hat(j))
    dq = np.asarray(c4.site.a, dtype=float) - sp.G

    def mdot(theta):
        co, si = _rot(theta)
        mx, my = _rotate_arr(P.normals[j], co, si)
        return mx * dq[0] + my * dq[1]

    if sp.side:
        return (lambda t: mdot(t) * sp.denom(t) + sp.coef * k4), 2
    return (lambda t: sp.coef * mdot(t) - sp.denom(t) * k4), 1


_TRIPLES_OF_FOUR = np.array([(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)])


def _verify(P: ConvexPolygon, cs: Sequence[ContactPair], theta: float, scale: float,
            coef: np.ndarray | None = None) -> Placement | None:
    if coef is None:
        coef = np.stack([_row_coeffs(P, c) for c in cs])
    M = _rows_at(coef, np.array([theta]))[0]
    sub = M[_TRIPLES_OF_FOUR]  # (4, 3, 4)
    with np.errstate(all="ignore"):
        cnd = np.linalg.cond(sub[:, :, :3])
    cnd = np.where(np.isfinite(cnd), cnd, np.inf)
    i = int(np.argmin(cnd))
    if not cnd[i] <= COND_MAX:
        return None
    x, y, d = np.linalg.solve(sub[i, :, :3], -sub[i, :, 3])
    if not d > 1e-9 * scale:
        return None
    pl = Placement(float(x), float(y), theta, float(d))
    if all(satisfies_contact(P, pl, c, ROOT_TOL * scale) for c in cs):
        return pl
    return None


def critical_orientations(c1: ContactPair, c2: ContactPair, c3: ContactPair, c4: ContactPair,
                          P: ConvexPolygon, Q: PolygonalDomain | None = None,
                          method: str = "auto") -> list[tuple[float, Placement]]:
    """Orientations in [0, 2*pi) where one copy realises all four contacts.

    ``method`` is ``"auto"`` (spiral path when three contacts share a kind, else
    the determinant) or ``"det"``.
    """
    cs = (c1, c2, c3, c4)
    if len(set(cs)) != 4:
        raise ValueError("the four contacts must be distinct")
    scale = _contact_scale(P, cs, Q)
    qt = QuadrupleType.of(cs)
    f = None
    if method == "auto" and qt.a != qt.b:
        major = qt.a > qt.b
        tri = [c for c in cs if c.is_side == major][:3]
        fourth = [c for c in cs if c not in tri][0]
        try:
            sp = _spiral(P, tri, scale)
            f, d = _spiral_form(sp, fourth)
            roots = _trig_roots(f, d, scale * max(1.0, P.diameter()))
        except (_Fallback, DegenerateConfiguration):
            f = None
    if f is None:
        f, d = _det_form(P, cs)
        roots = _trig_roots(f, d, 1.0)
    out: list[tuple[float, Placement]] = []
    coef = np.stack([_row_coeffs(P, c) for c in cs])
    for r in roots:
        # the forms are homogeneous, so a root mod pi polishes once
        r = _polish(f, r)
        for t in (r, r + math.pi):
            t = canon_2pi(t)
            pl = _verify(P, cs, t, scale, coef)
            if pl is not None:
                out.append((pl.theta, pl))
    out.sort(key=lambda e: e[0])
    merged: list[tuple[float, Placement]] = []
    for t, pl in out:
        if merged and (t - merged[-1][0] < ROOT_MERGE):
            continue
        merged.append((t, pl))
    if len(merged) > 1 and merged[-1][0] - merged[0][0] > TWO_PI - ROOT_MERGE:
        merged.pop()
    return merged


# --- vertex traces ---------------------------------------------------------------------


@dataclass
class VertexTrace:
    """Path of a pattern vertex over the orientations where the triple has a copy.

    ``circle`` is None for a straight trace.
    """

    G: Point
    start: Point
    end: Point
    domain: list[tuple[float, float]]
    circle: Circle | None = None
    point_at: Callable[[float], Point] = field(default=None, repr=False)  # type: ignore[assignment]


def _trace(P: ConvexPolygon, triple: Sequence[ContactPair], v: int, Q: PolygonalDomain | None, arc: bool) -> VertexTrace:
    scale = _contact_scale(P, triple, Q)
    try:
        sp = _spiral(P, triple, scale)
    except _Fallback as exc:
        raise DegenerateConfiguration(f"no spiral centre for this triple: {exc}") from exc
    ts = TripleSystem(P, tuple(triple))
    dom = _intervals(lambda t: ts.solve_many(t)[1])
    if not dom:
        raise DegenerateConfiguration("the triple has no valid copy at any orientation")

    def point_at(theta: float) -> Point:
        pl = triple_placement(ts, theta)
        w = _rotvec(P.offsets[v], pl.theta)
        return Point(pl.x + pl.delta * w[0], pl.y + pl.delta * w[1])

    lo, hi = max(dom, key=lambda iv: iv[1] - iv[0])
    pad = 1e-9 * max(1.0, hi - lo)
    start, end = point_at(lo + pad), point_at(hi - pad)
    G = Point(float(sp.G[0]), float(sp.G[1]))
    circle = None
    if arc:
        mid = point_at(0.5 * (lo + hi))
        try:
            circle = circumcircle(G, start, mid)
        except CollinearInput:
            circle = circumcircle(G, mid, end)
    return VertexTrace(G, start, end, dom, circle, point_at)


def trace_of_vertex(P: ConvexPolygon, c1: ContactPair, c2: ContactPair, c3: ContactPair, v: int,
                    Q: PolygonalDomain | None = None) -> VertexTrace:
    """Straight trace of vertex ``v`` for three side contacts."""
    if not (c1.is_side and c2.is_side and c3.is_side):
        raise ValueError("trace_of_vertex needs three side contacts")
    return _trace(P, (c1, c2, c3), v, Q, arc=False)


def trace_of_vertex_corner(P: ConvexPolygon, c1: ContactPair, c2: ContactPair, c3: ContactPair, v: int,
                           Q: PolygonalDomain | None = None) -> VertexTrace:
    """Circular trace (through the spiral centre) of vertex ``v`` for three corner contacts."""
    if c1.is_side or c2.is_side or c3.is_side:
        raise ValueError("trace_of_vertex_corner needs three corner contacts")
    try:
        orientation_ok(c1.site.a, c2.site.a, c3.site.a)
    except CollinearInput as exc:
        raise DegenerateConfiguration("the three domain corners are collinear") from exc
    return _trace(P, (c1, c2, c3), v, Q, arc=True)
