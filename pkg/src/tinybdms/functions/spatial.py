"""Planar geometry over the ADM spatial types."""

from __future__ import annotations

import math

from ..adm.values import Circle, Line, Point, Polygon, Rectangle, type_name
from ..errors import QueryError, TypeMismatch

EPS = 1e-12


def _point(v, fn: str) -> Point:
    if not isinstance(v, Point):
        raise TypeMismatch(f"{fn} expects a point, got {type_name(v)}")
    return v


def spatial_distance(a, b) -> float:
    a, b = _point(a, "spatial-distance"), _point(b, "spatial-distance")
    return math.hypot(a.x - b.x, a.y - b.y)


def spatial_area(g) -> float:
    if isinstance(g, Rectangle):
        return (g.high.x - g.low.x) * (g.high.y - g.low.y)
    if isinstance(g, Circle):
        return math.pi * g.radius * g.radius
    if isinstance(g, Polygon):
        pts = g.points
        s = 0.0
        for i, p in enumerate(pts):
            q = pts[(i + 1) % len(pts)]
            s += p.x * q.y - q.x * p.y
        return abs(s) / 2.0
    raise QueryError(f"spatial-area is not defined on {type_name(g)}")


def mbr(g) -> tuple[float, float, float, float]:
    """Minimum bounding rectangle as ``(xmin, ymin, xmax, ymax)``."""
    if isinstance(g, Point):
        return (g.x, g.y, g.x, g.y)
    if isinstance(g, Rectangle):
        return (g.low.x, g.low.y, g.high.x, g.high.y)
    if isinstance(g, Circle):
        c, r = g.center, g.radius
        return (c.x - r, c.y - r, c.x + r, c.y + r)
    if isinstance(g, Line):
        return (min(g.p1.x, g.p2.x), min(g.p1.y, g.p2.y), max(g.p1.x, g.p2.x), max(g.p1.y, g.p2.y))
    if isinstance(g, Polygon):
        xs = [p.x for p in g.points]
        ys = [p.y for p in g.points]
        return (min(xs), min(ys), max(xs), max(ys))
    raise TypeMismatch(f"not a spatial value: {type_name(g)}")


def mbr_intersects(a, b) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _orient(p, q, r) -> float:
    return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)


def _on_segment(p, q, r) -> bool:
    return (min(p.x, q.x) - EPS <= r.x <= max(p.x, q.x) + EPS
            and min(p.y, q.y) - EPS <= r.y <= max(p.y, q.y) + EPS)


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if ((d1 > EPS and d2 < -EPS) or (d1 < -EPS and d2 > EPS)) and \
            ((d3 > EPS and d4 < -EPS) or (d3 < -EPS and d4 > EPS)):
        return True
    return ((abs(d1) <= EPS and _on_segment(q1, q2, p1)) or (abs(d2) <= EPS and _on_segment(q1, q2, p2))
            or (abs(d3) <= EPS and _on_segment(p1, p2, q1)) or (abs(d4) <= EPS and _on_segment(p1, p2, q2)))


def _point_segment_distance(p, a, b) -> float:
    dx, dy = b.x - a.x, b.y - a.y
    if dx == 0 and dy == 0:
        return math.hypot(p.x - a.x, p.y - a.y)
    t = max(0.0, min(1.0, ((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)))
    return math.hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy))


def _edges(g):
    if isinstance(g, Line):
        return [(g.p1, g.p2)]
    if isinstance(g, Rectangle):
        lo, hi = g.low, g.high
        c = [lo, Point(hi.x, lo.y), hi, Point(lo.x, hi.y)]
    else:
        c = list(g.points)
    return [(c[i], c[(i + 1) % len(c)]) for i in range(len(c))]


def _inside(p: Point, g) -> bool:
    """Point-in-shape including the boundary."""
    if isinstance(g, Point):
        return abs(p.x - g.x) <= EPS and abs(p.y - g.y) <= EPS
    if isinstance(g, Rectangle):
        return g.low.x - EPS <= p.x <= g.high.x + EPS and g.low.y - EPS <= p.y <= g.high.y + EPS
    if isinstance(g, Circle):
        return math.hypot(p.x - g.center.x, p.y - g.center.y) <= g.radius + EPS
    if isinstance(g, Line):
        return abs(_orient(g.p1, g.p2, p)) <= EPS and _on_segment(g.p1, g.p2, p)
    if isinstance(g, Polygon):
        for a, b in _edges(g):
            if abs(_orient(a, b, p)) <= EPS and _on_segment(a, b, p):
                return True
        inside = False
        pts = g.points
        j = len(pts) - 1
        for i in range(len(pts)):
            pi, pj = pts[i], pts[j]
            if (pi.y > p.y) != (pj.y > p.y):
                x = pi.x + (p.y - pi.y) * (pj.x - pi.x) / (pj.y - pi.y)
                if p.x < x:
                    inside = not inside
            j = i
        return inside
    raise TypeMismatch(f"not a spatial value: {type_name(g)}")


def _vertices(g):
    if isinstance(g, Point):
        return [g]
    if isinstance(g, Line):
        return [g.p1, g.p2]
    if isinstance(g, Rectangle):
        return [g.low, Point(g.high.x, g.low.y), g.high, Point(g.low.x, g.high.y)]
    if isinstance(g, Polygon):
        return list(g.points)
    return []


def _circle_hits(c: Circle, g) -> bool:
    if isinstance(g, Circle):
        return math.hypot(c.center.x - g.center.x, c.center.y - g.center.y) <= c.radius + g.radius + EPS
    if isinstance(g, Point):
        return _inside(g, c)
    if _inside(c.center, g):
        return True
    return any(_point_segment_distance(c.center, a, b) <= c.radius + EPS for a, b in _edges(g))


def spatial_intersect(a, b) -> bool:
    for g in (a, b):
        if not isinstance(g, (Point, Line, Rectangle, Circle, Polygon)):
            raise TypeMismatch(f"spatial-intersect expects spatial values, got {type_name(g)}")
    if not mbr_intersects(mbr(a), mbr(b)):
        return False
    if isinstance(a, Circle):
        return _circle_hits(a, b)
    if isinstance(b, Circle):
        return _circle_hits(b, a)
    if isinstance(a, Point):
        return _inside(a, b)
    if isinstance(b, Point):
        return _inside(b, a)
    # line/rectangle/polygon: crossing edges or containment
    for p1, p2 in _edges(a):
        for q1, q2 in _edges(b):
            if _segments_intersect(p1, p2, q1, q2):
                return True
    if not isinstance(b, Line) and any(_inside(v, b) for v in _vertices(a)):
        return True
    if not isinstance(a, Line) and any(_inside(v, a) for v in _vertices(b)):
        return True
    return False


def create_point(x, y) -> Point:
    return Point(float(x), float(y))


def create_rectangle(p1, p2) -> Rectangle:
    return Rectangle(_point(p1, "create-rectangle"), _point(p2, "create-rectangle"))


def create_circle(c, r) -> Circle:
    return Circle(_point(c, "create-circle"), float(r))


def create_line(p1, p2) -> Line:
    return Line(_point(p1, "create-line"), _point(p2, "create-line"))


def get_x(p) -> float:
    return _point(p, "get-x").x


def get_y(p) -> float:
    return _point(p, "get-y").y
