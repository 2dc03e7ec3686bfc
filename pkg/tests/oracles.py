"""Slow, independent reference implementations used only by the tests."""

import itertools
from collections import defaultdict
from fractions import Fraction

import numpy as np


def tiling_oracle(pixels, valid, sf_size, tile_size, max_invalid):
    """Visit every pixel once and rebuild subframe and tile bookkeeping.

    Returns ``{(gr, gc): {"rows", "cols", "invalid", "retained", "tiles": {(i, j): zeros}}}``.
    Retention compares exact fractions so float rounding cannot hide a bug.
    """
    h, w = pixels.shape
    sfs = {}
    for r in range(h):
        for c in range(w):
            key = (r // sf_size, c // sf_size)
            sf = sfs.setdefault(key, {"rows": set(), "cols": set(), "invalid": 0, "members": defaultdict(list)})
            sf["rows"].add(r)
            sf["cols"].add(c)
            if not valid[r, c]:
                sf["invalid"] += 1
            lr, lc = r - key[0] * sf_size, c - key[1] * sf_size
            sf["members"][(lr // tile_size, lc // tile_size)].append(int(pixels[r, c]))
    out = {}
    for key, sf in sfs.items():
        rows, cols = len(sf["rows"]), len(sf["cols"])
        total = rows * cols
        retained = Fraction(sf["invalid"], total) <= Fraction(max_invalid).limit_denominator(10**9)
        tiles = {}
        for (i, j), vals in sf["members"].items():
            if len(vals) == tile_size * tile_size:
                tiles[(i, j)] = sum(1 for v in vals if v == 0)
        out[key] = {"rows": rows, "cols": cols, "invalid": sf["invalid"], "retained": retained, "tiles": tiles}
    return out


def clip_halfplane(poly, a, b, c):
    """Keep the part of ``poly`` where ``a*x + b*y <= c`` (exact rationals)."""
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        fp = a * p[0] + b * p[1] - c
        fq = a * q[0] + b * q[1] - c
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def exact_rect_overlap(poly, r0, c0, r1, c1):
    """Area of a convex polygon inside an axis-aligned box, via four half-planes."""
    pts = [(Fraction(x), Fraction(y)) for x, y in poly]
    for a, b, c in ((-1, 0, -Fraction(r0)), (1, 0, Fraction(r1)), (0, -1, -Fraction(c0)), (0, 1, Fraction(c1))):
        pts = clip_halfplane(pts, a, b, c)
        if not pts:
            return Fraction(0)
    s = sum(pts[k][0] * pts[(k + 1) % len(pts)][1] - pts[(k + 1) % len(pts)][0] * pts[k][1] for k in range(len(pts)))
    return abs(s) / 2


def points_in_polygon(poly, pts):
    """Even-odd ray casting for many points at once."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for k in range(n):
        (x1, y1), (x2, y2) = poly[k], poly[(k + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    return inside


def best_split_by_enumeration(counts, ratios):
    """Smallest worst-case deviation from targets over every fold assignment."""
    total = sum(counts)
    targets = [Fraction(r).limit_denominator(1000) for r in ratios]
    best = None
    for combo in itertools.product(range(len(ratios)), repeat=len(counts)):
        sums = [0] * len(ratios)
        for n, f in zip(counts, combo):
            sums[f] += n
        dev = max(abs(Fraction(s, total) - t) for s, t in zip(sums, targets))
        if best is None or dev < best:
            best = dev
    return best
