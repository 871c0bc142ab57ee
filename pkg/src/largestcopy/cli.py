"""Command-line front end.

    largestcopy solve --input inst.json [--mode sweep|sample|hybrid] [--svg out.svg]
    largestcopy edt --input inst.json --theta 0.5

Instance files are JSON with ``"version": 1``::

    {"version": 1, "name": "demo",
     "pattern": [[-1, -1], [1, -1], [1, 1], [-1, 1]],
     "container": [[0, 0], [10, 0], [10, 10], [0, 10]],
     "obstacles": [{"point": [5, 5]}, {"segment": [[1, 1], [2, 3]]},
                   {"polygon": [[6, 6], [7, 6], [7, 7]]}]}

The container may be omitted for ``edt`` only. Unknown fields are rejected.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import Any

from .convex_distance import ConvexPolygon, ContactPair, GeometryError, Placement, PolygonalDomain, place
from .edt import Infeasible, TooFewSites, build_edt
from .geom_core import canon_2pi
from .sweep import Mode, SolveConfig, SolveResult, solve, write_change_log

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

_INSTANCE_FIELDS = {"version", "name", "seed", "pattern", "container", "obstacles"}
_OBSTACLE_KINDS = {"polygon", "segment", "point"}


class InstanceError(ValueError):
    """Malformed instance; ``field`` names the offending entry."""

    def __init__(self, field: str, detail: str):
        super().__init__(f"{field}: {detail}")
        self.field = field
        self.detail = detail


@dataclass
class Instance:
    pattern: ConvexPolygon
    domain: PolygonalDomain
    name: str | None = None
    seed: int | None = None


def _point(v: Any, field: str) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise InstanceError(field, "expected a point [x, y]")
    try:
        x, y = float(v[0]), float(v[1])
    except (TypeError, ValueError):
        raise InstanceError(field, "coordinates must be numbers") from None
    if isinstance(v[0], bool) or isinstance(v[1], bool) or not (math.isfinite(x) and math.isfinite(y)):
        raise InstanceError(field, "coordinates must be finite numbers")
    return x, y


def _points(v: Any, field: str, at_least: int) -> list[tuple[float, float]]:
    if not isinstance(v, list):
        raise InstanceError(field, "expected a list of points")
    if len(v) < at_least:
        raise InstanceError(field, f"expected at least {at_least} points, got {len(v)}")
    return [_point(p, f"{field}[{i}]") for i, p in enumerate(v)]


def parse_instance(doc: Any, need_container: bool = True) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceError("$", "instance must be a JSON object")
    unknown = sorted(set(doc) - _INSTANCE_FIELDS)
    if unknown:
        raise InstanceError(unknown[0], "unknown field")
    if doc.get("version") != SCHEMA_VERSION:
        raise InstanceError("version", f"expected {SCHEMA_VERSION}, got {doc.get('version')!r}")
    if "pattern" not in doc:
        raise InstanceError("pattern", "missing")
    pattern_pts = _points(doc["pattern"], "pattern", 3)
    try:
        pattern = ConvexPolygon(pattern_pts)
    except (ValueError, GeometryError) as e:
        raise InstanceError("pattern", str(e)) from None
    if "container" in doc:
        container = _points(doc["container"], "container", 3)
    elif need_container:
        raise InstanceError("container", "missing")
    else:
        container = []
    polys, segs, pts = [], [], []
    obstacles = doc.get("obstacles", [])
    if not isinstance(obstacles, list):
        raise InstanceError("obstacles", "expected a list")
    for i, ob in enumerate(obstacles):
        f = f"obstacles[{i}]"
        if not isinstance(ob, dict) or len(ob) != 1 or next(iter(ob)) not in _OBSTACLE_KINDS:
            raise InstanceError(f, "expected exactly one of {polygon, segment, point}")
        kind, v = next(iter(ob.items()))
        if kind == "polygon":
            polys.append(_points(v, f"{f}.polygon", 3))
        elif kind == "segment":
            s = _points(v, f"{f}.segment", 2)
            if len(s) != 2:
                raise InstanceError(f"{f}.segment", "expected two endpoints")
            segs.append((s[0], s[1]))
        else:
            pts.append(_point(v, f"{f}.point"))
    try:
        domain = PolygonalDomain(tuple(container), tuple(map(tuple, polys)), tuple(segs), tuple(pts))
    except (ValueError, GeometryError) as e:
        raise InstanceError("container" if container else "obstacles", str(e)) from None
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise InstanceError("name", "expected a string")
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise InstanceError("seed", "expected an integer")
    return Instance(pattern, domain, name, seed)


def load_instance(path: str, need_container: bool = True) -> Instance:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise InstanceError(f"line {e.lineno}", e.msg) from None
    return parse_instance(doc, need_container)


# --- results -----------------------------------------------------------------------------


def contact_json(c: ContactPair) -> dict:
    return {"site": c.site.id, "site_kind": c.site.kind.value, "p_index": c.p_index, "kind": c.kind.value}


def result_json(res: SolveResult, name: str | None = None, seed: int | None = None) -> dict:
    pl = res.best
    out = {
        "version": SCHEMA_VERSION,
        "x": pl.x,
        "y": pl.y,
        "theta": canon_2pi(pl.theta),
        "delta": pl.delta,
        "contacts": [contact_json(c) for c in res.active_contacts],
        "stats": res.stats.summary(),
        "mode": res.mode.value,
    }
    if name is not None:
        out["name"] = name
    if seed is not None:
        out["seed"] = seed
    return out


def placement_from_json(doc: dict) -> Placement:
    return Placement(float(doc["x"]), float(doc["y"]), float(doc["theta"]), float(doc["delta"]))


def _num(v: float) -> str:
    return f"{v:.12g}"


def render_svg(P: ConvexPolygon, Q: PolygonalDomain, pl: Placement | None) -> str:
    """Static SVG of the container, obstacles and the placed pattern in input coordinates."""
    pts = list(Q.outer) or [s.a for s in Q.sites]
    xs = [p.x for p in pts]
    ys = [p.y for p in pts]
    pad = 0.02 * Q.scale
    x0, y0 = min(xs) - pad, min(ys) - pad
    w, h = max(xs) - min(xs) + 2 * pad, max(ys) - min(ys) + 2 * pad
    stroke = _num(0.004 * Q.scale)

    def poly(ring, **attrs) -> str:
        coords = " ".join(f"{_num(p[0])},{_num(p[1])}" for p in ring)
        extra = "".join(f' {k.replace("_", "-")}="{v}"' for k, v in attrs.items())
        return f'    <polygon points="{coords}"{extra}/>'

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{_num(x0)} {_num(-(y0 + h))} {_num(w)} {_num(h)}">',
        '  <g transform="scale(1,-1)">',
    ]
    if Q.outer:
        lines.append(poly(Q.outer, id="container", fill="#f4f4f4", stroke="#333", stroke_width=stroke))
    for i, ring in enumerate(Q.obstacles):
        lines.append(poly(ring, id=f"obstacle-{i}", fill="#999", stroke="#333", stroke_width=stroke))
    for i, (a, b) in enumerate(Q.segments):
        lines.append(f'    <line id="segment-{i}" x1="{_num(a.x)}" y1="{_num(a.y)}" x2="{_num(b.x)}" y2="{_num(b.y)}" '
                     f'stroke="#333" stroke-width="{stroke}"/>')
    for i, p in enumerate(Q.points):
        lines.append(f'    <circle id="point-{i}" cx="{_num(p.x)}" cy="{_num(p.y)}" r="{_num(0.006 * Q.scale)}" fill="#333"/>')
    if pl is not None:
        lines.append(poly(place(P, pl), id="placed", fill="#4a90d9", fill_opacity="0.6", stroke="#1d4f91",
                          stroke_width=stroke))
    lines += ["  </g>", "</svg>", ""]
    return "\n".join(lines)


# --- commands ----------------------------------------------------------------------------


def _emit(doc: dict, path: str | None):
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fail(code: int, error: str, detail: str) -> int:
    sys.stderr.write(json.dumps({"error": error, "detail": detail}) + "\n")
    return code


def solve_cmd(args: argparse.Namespace) -> int:
    inst = load_instance(args.input)
    seed = args.seed if args.seed is not None else inst.seed
    cfg = SolveConfig(mode=Mode(args.mode), samples=args.samples, tol=args.tol, validate=args.validate, seed=seed)
    try:
        res = solve(inst.domain, inst.pattern, cfg)
    except Infeasible as e:
        return _fail(EXIT_INFEASIBLE, "Infeasible", str(e))
    if args.stats:
        write_change_log(res.stats, args.stats)
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(render_svg(inst.pattern, inst.domain, res.best))
    _emit(result_json(res, inst.name, seed), args.output)
    return EXIT_OK


def edt_cmd(args: argparse.Namespace) -> int:
    inst = load_instance(args.input, need_container=False)
    theta = math.radians(args.theta) if args.degrees else args.theta
    theta = canon_2pi(theta)
    e = build_edt(inst.domain, inst.pattern, theta)
    doc = {"version": SCHEMA_VERSION, **e.to_json()}
    doc["theta"] = theta
    if inst.name is not None:
        doc["name"] = inst.name
    _emit(doc, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="largestcopy", description="Largest similar copy of a convex polygon in a polygonal domain.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="find the largest copy")
    s.add_argument("--input", required=True)
    s.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.HYBRID.value)
    s.add_argument("--samples", type=int, default=4096)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--svg")
    s.add_argument("--stats", help="JSONL change log")
    s.add_argument("--validate", action="store_true", help="check every sweep update against a rebuild")
    s.add_argument("--seed", type=int)
    s.add_argument("--output")
    s.set_defaults(func=solve_cmd)

    e = sub.add_parser("edt", help="dump the edge Delaunay structure at one orientation")
    e.add_argument("--input", required=True)
    e.add_argument("--theta", type=float, required=True)
    e.add_argument("--degrees", action="store_true", help="--theta is in degrees")
    e.add_argument("--output")
    e.set_defaults(func=edt_cmd)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR
    if getattr(args, "samples", 1) < 1:
        return _fail(EXIT_ERROR, "InvalidArgument", "--samples must be at least 1")
    if getattr(args, "tol", 1.0) <= 0:
        return _fail(EXIT_ERROR, "InvalidArgument", "--tol must be positive")
    try:
        return args.func(args)
    except InstanceError as e:
        return _fail(EXIT_ERROR, "InstanceError", str(e))
    except OSError as e:
        return _fail(EXIT_ERROR, "IOError", str(e))
    except (TooFewSites, GeometryError, ValueError) as e:
        return _fail(EXIT_ERROR, type(e).__name__, str(e))
    except Exception as e:  # noqa: BLE001
        return _fail(EXIT_ERROR, "InternalError", f"{type(e).__name__}: {e}")


if __name__ == "__main__":
    sys.exit(main())
