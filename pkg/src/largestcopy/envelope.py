"""Lower and upper envelopes of partially defined functions of one angle.

Functions are sampled on a grid of caller-chosen resolution inside every cell
between consecutive domain or piece boundaries; wherever the winning function
changes between two samples the transition is located by bisection. The
``eval`` callables must accept numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
DEFAULT_RESOLUTION = math.pi / 4096
BREAK_TOL = 1e-11


class EmptyFamily(ValueError):
    pass


class UnequalDomains(ValueError):
    pass


@dataclass
class PartialFunction:
    """A function of theta defined on a union of closed intervals.

    An interval given as ``(lo, hi)`` with ``hi < lo`` wraps through 2*pi and is
    cut at zero.
    """

    id: Hashable
    domain: list[tuple[float, float]]
    eval: Callable[[np.ndarray], np.ndarray]
    piece_boundaries: list[float] = field(default_factory=list)

    def __post_init__(self):
        cut: list[tuple[float, float]] = []
        for lo, hi in self.domain:
            lo, hi = float(lo), float(hi)
            if hi < lo:
                cut.append((lo, TWO_PI))
                cut.append((0.0, hi))
            else:
                cut.append((lo, hi))
        cut.sort()
        self.domain = cut
        self.piece_boundaries = sorted(float(t) for t in self.piece_boundaries)

    def contains(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        mask = np.zeros(theta.shape, dtype=bool)
        for lo, hi in self.domain:
            mask |= (theta >= lo) & (theta <= hi)
        return mask

    def __call__(self, theta):
        return self.eval(theta)

    @property
    def measure(self) -> float:
        return sum(hi - lo for lo, hi in self.domain)

    def restricted(self, lo: float, hi: float) -> "PartialFunction":
        dom = [(max(a, lo), min(b, hi)) for a, b in self.domain if min(b, hi) >= max(a, lo)]
        return PartialFunction(self.id, dom, self.eval, [t for t in self.piece_boundaries if lo < t < hi])


@dataclass
class Envelope:
    breakpoints: list[float]
    segments: list[tuple[tuple[float, float], Hashable]]
    upper: bool = False
    functions: dict = field(default_factory=dict, repr=False)

    @property
    def winners(self) -> list[Hashable]:
        return [w for _, w in self.segments]

    def winner_at(self, theta: float):
        for (lo, hi), w in self.segments:
            if lo <= theta <= hi:
                return w
        return None

    def value(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.full(theta.shape, np.nan)
        for (lo, hi), w in self.segments:
            m = (theta >= lo) & (theta <= hi) & np.isnan(out)
            if m.any():
                out[m] = self.functions[w].eval(theta[m])
        return out


def _sort_key(fid):
    return (0, fid) if isinstance(fid, (int, float)) else (1, str(fid))


def _winner_index(vals: np.ndarray) -> np.ndarray:
    """Row index of the minimum in each column; near-ties go to the lowest row."""
    finite = np.where(np.isfinite(vals), vals, np.inf)
    vmin = finite.min(axis=0)
    tol = 1e-12 * (1.0 + np.abs(vmin))
    mask = finite <= vmin + tol
    idx = np.argmax(mask, axis=0)
    idx[~np.isfinite(vmin)] = -1
    return idx


def _envelope(fs: Sequence[PartialFunction], resolution: float, sign: float) -> Envelope:
    if not fs:
        raise EmptyFamily("envelope of an empty family")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    fs = sorted(fs, key=lambda f: _sort_key(f.id))
    cuts = sorted({t for f in fs for iv in f.domain for t in iv} | {t for f in fs for t in f.piece_boundaries})

    def values(members: list[PartialFunction], t: np.ndarray) -> np.ndarray:
        out = np.full((len(members), t.size), np.inf)
        for r, f in enumerate(members):
            m = f.contains(t)
            if m.any():
                with np.errstate(all="ignore"):
                    out[r, m] = sign * np.asarray(f.eval(t[m]), dtype=float)
        return out

    segs: list[list] = []  # [lo, hi, id]

    def push(lo: float, hi: float, fid):
        if segs and segs[-1][2] == fid and abs(segs[-1][1] - lo) <= 1e-12:
            segs[-1][1] = hi
        else:
            segs.append([lo, hi, fid])

    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0:
            continue
        mid = np.array([0.5 * (lo + hi)])
        members = [f for f in fs if f.contains(mid)[0]]
        if not members:
            continue
        n = max(2, int(math.ceil((hi - lo) / resolution)) + 1)
        grid = np.linspace(lo, hi, n)
        # Closed-domain endpoints of neighbouring members are not in this cell.
        win = _winner_index(values(members, grid))
        start = lo
        for i in range(n - 1):
            a, b = win[i], win[i + 1]
            if a == b:
                continue
            tl, tr = grid[i], grid[i + 1]
            while tr - tl > BREAK_TOL:
                tm = 0.5 * (tl + tr)
                w = _winner_index(values(members, np.array([tm])))[0]
                if w == a:
                    tl = tm
                else:
                    tr = tm
            t_star = float(0.5 * (tl + tr))
            if a >= 0:
                push(start, t_star, members[a].id)
            start = t_star
        if win[-1] >= 0:
            push(start, hi, members[win[-1]].id)
    segments = [((lo, hi), fid) for lo, hi, fid in segs if hi > lo]
    bps = sorted({t for (lo, hi), _ in segments for t in (lo, hi)})
    return Envelope(bps, segments, upper=sign < 0, functions={f.id: f for f in fs})


def lower_envelope(fs: Sequence[PartialFunction], resolution: float = DEFAULT_RESOLUTION) -> Envelope:
    return _envelope(fs, resolution, 1.0)


def upper_envelope(fs: Sequence[PartialFunction], resolution: float = DEFAULT_RESOLUTION) -> Envelope:
    return _envelope(fs, resolution, -1.0)


def _merge_two(env_a: Envelope | None, env_b: Envelope | None, lo: float, hi: float,
               fmap: dict, resolution: float) -> list[tuple[tuple[float, float], Hashable]]:
    """Lower envelope on [lo, hi] of two envelopes, slicing at their breakpoints."""
    envs = [e for e in (env_a, env_b) if e is not None]
    cuts = sorted({lo, hi} | {t for e in envs for t in e.breakpoints if lo < t < hi})
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        m = 0.5 * (a + b)
        ids = []
        for e in envs:
            w = e.winner_at(m)
            if w is not None and w not in ids:
                ids.append(w)
        if not ids:
            continue
        sub = lower_envelope([fmap[i].restricted(a, b) for i in ids], resolution)
        out.extend(s for s in sub.segments if s[0][1] > s[0][0])
    return out


def partitioned_envelope(fs: Sequence[PartialFunction], c: float,
                         resolution: float = DEFAULT_RESOLUTION) -> Envelope:
    """Lower envelope of equal-length single-interval functions via a length-d grid.

    The union of domains is cut at points l_j spaced by the common domain length
    d. Every domain contains some l_j and is split there into a part ending at l_j
    and a part starting at l_j; the parts are enveloped per grid point and the two
    envelopes covering each grid cell are merged.
    """
    if not fs:
        raise EmptyFamily("envelope of an empty family")
    doms = []
    for f in fs:
        if len(f.domain) != 1:
            raise UnequalDomains(f"function {f.id!r} does not have a single-interval domain")
        doms.append(f.domain[0])
    d = doms[0][1] - doms[0][0]
    for (lo, hi), f in zip(doms, fs):
        if abs((hi - lo) - d) > 1e-9 * max(d, 1e-300):
            raise UnequalDomains(f"function {f.id!r} has domain length {hi - lo}, expected {d}")
    if d <= 0:
        return lower_envelope(fs, resolution)
    ivs = sorted(doms)
    union, cur = 0.0, list(ivs[0])
    for lo, hi in ivs[1:]:
        if lo > cur[1]:
            union += cur[1] - cur[0]
            cur = [lo, hi]
        else:
            cur[1] = max(cur[1], hi)
    union += cur[1] - cur[0]
    if union > c * d * (1 + 1e-9):
        raise ValueError(f"union of domains has length {union}, exceeding c*d = {c * d}")

    left = ivs[0][0]
    right = max(hi for _, hi in ivs)
    J = int(math.ceil((right - left) / d - 1e-12))
    grid = [left + j * d for j in range(J + 2)]
    fmap = {f.id: f for f in fs}
    L: dict[int, list[PartialFunction]] = {}
    R: dict[int, list[PartialFunction]] = {}
    for f, (lo, hi) in zip(fs, doms):
        j = int(math.ceil((lo - left) / d - 1e-12))
        lj = grid[j]
        if lj - lo > 1e-15:
            L.setdefault(j, []).append(f.restricted(lo, lj))
        R.setdefault(j, []).append(f.restricted(lj, hi))
    envL = {j: lower_envelope(g, resolution) for j, g in L.items()}
    envR = {j: lower_envelope(g, resolution) for j, g in R.items()}
    segments: list[tuple[tuple[float, float], Hashable]] = []
    for j in range(1, J + 1):
        for (a, b), w in _merge_two(envL.get(j), envR.get(j - 1), grid[j - 1], grid[j], fmap, resolution):
            if segments and segments[-1][1] == w and abs(segments[-1][0][1] - a) <= 1e-12:
                segments[-1] = ((segments[-1][0][0], b), w)
            else:
                segments.append(((a, b), w))
    bps = sorted({t for (lo, hi), _ in segments for t in (lo, hi)})
    return Envelope(bps, segments, functions=fmap)
