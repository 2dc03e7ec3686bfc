"""Planar polygon helpers: shoelace area, rectangle clipping, simplicity."""

from collections.abc import Sequence

Point = tuple[float, float]


def signed_area(vertices: Sequence[Point]) -> float:
    n = len(vertices)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return acc / 2.0


def polygon_area(vertices: Sequence[Point]) -> float:
    return abs(signed_area(vertices))


def _clip_edge(points, inside, intersect):
    out = []
    if not points:
        return out
    prev = points[-1]
    prev_in = inside(prev)
    for cur in points:
        cur_in = inside(cur)
        if cur_in:
            if not prev_in:
                out.append(intersect(prev, cur))
            out.append(cur)
        elif prev_in:
            out.append(intersect(prev, cur))
        prev, prev_in = cur, cur_in
    return out


def _cross_at(axis, value):
    def intersect(p, q):
        t = (value - p[axis]) / (q[axis] - p[axis])
        other = 1 - axis
        point = [0.0, 0.0]
        point[axis] = value
        point[other] = p[other] + t * (q[other] - p[other])
        return tuple(point)

    return intersect


def clip_to_rect(vertices: Sequence[Point], lo0, lo1, hi0, hi1) -> list[Point]:
    """Sutherland-Hodgman clip of a polygon against an axis-aligned box.

    The box is ``[lo0, hi0] x [lo1, hi1]`` on the two coordinate axes. The
    subject polygon may be concave; the result can then contain zero-width
    bridges, which do not change its area.
    """
    pts = [(float(a), float(b)) for a, b in vertices]
    for axis, bound, keep_above in ((0, lo0, True), (0, hi0, False), (1, lo1, True), (1, hi1, False)):
        if keep_above:
            inside = lambda p, a=axis, v=bound: p[a] >= v  # noqa: E731
        else:
            inside = lambda p, a=axis, v=bound: p[a] <= v  # noqa: E731
        pts = _clip_edge(pts, inside, _cross_at(axis, bound))
        if not pts:
            break
    return pts


def rect_intersection_area(vertices: Sequence[Point], lo0, lo1, hi0, hi1) -> float:
    return polygon_area(clip_to_rect(vertices, lo0, lo1, hi0, hi1))


def _orient(p, q, r):
    v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    return (v > 0) - (v < 0)


def _on_segment(p, q, r):
    return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])


def segments_intersect(p1, p2, q1, q2) -> bool:
    """True if closed segments ``p1p2`` and ``q1q2`` share any point."""
    o1, o2 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    o3, o4 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return (
        (o1 == 0 and _on_segment(p1, q1, p2))
        or (o2 == 0 and _on_segment(p1, q2, p2))
        or (o3 == 0 and _on_segment(q1, p1, q2))
        or (o4 == 0 and _on_segment(q1, p2, q2))
    )


def is_simple(vertices: Sequence[Point]) -> bool:
    """No two non-adjacent edges touch and no vertex repeats."""
    n = len(vertices)
    if n < 3 or len(set(map(tuple, vertices))) != n:
        return False
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                # adjacent edges may only meet at their shared vertex
                a, b = edges[i], edges[j]
                shared = a[1] if j == i + 1 else a[0]
                far_a = a[0] if j == i + 1 else a[1]
                far_b = b[1] if j == i + 1 else b[0]
                if _orient(far_a, shared, far_b) == 0 and not _on_segment(far_a, shared, far_b):
                    # collinear edges folding back over each other
                    return False
                continue
            if segments_intersect(*edges[i], *edges[j]):
                return False
    return True
