"""Planar geometry primitives: axis-aligned rectangles, polylines, blockage tests.

All coordinates are metres in a fixed ground-plane frame; z is height.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def contains_open(self, x: float, y: float) -> bool:
        return self.xmin < x < self.xmax and self.ymin < y < self.ymax

    def contains_closed(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def overlaps(self, other: "Rect") -> bool:
        return not (
            self.xmax <= other.xmin
            or other.xmax <= self.xmin
            or self.ymax <= other.ymin
            or other.ymax <= self.ymin
        )


def segment_crosses_rect(px, py, qx, qy, rect: Rect) -> bool:
    """True iff the open segment p->q passes through the open interior of rect.

    Touching the boundary (endpoint on an edge or corner, or a segment running
    along an edge) does not count as crossing.
    """
    dx, dy = qx - px, qy - py
    t0, t1 = 0.0, 1.0
    for d, lo, hi, p0 in ((dx, rect.xmin, rect.xmax, px), (dy, rect.ymin, rect.ymax, py)):
        if d == 0.0:
            if p0 <= lo or p0 >= hi:
                return False
        else:
            ta, tb = (lo - p0) / d, (hi - p0) / d
            if ta > tb:
                ta, tb = tb, ta
            t0, t1 = max(t0, ta), min(t1, tb)
            if t0 >= t1:
                return False
    tm = 0.5 * (t0 + t1)
    return rect.contains_open(px + tm * dx, py + tm * dy)


def segments_cross_rect(p: np.ndarray, q: np.ndarray, rect: Rect) -> np.ndarray:
    """Vectorized segment_crosses_rect. p, q: (n, 2) arrays. Returns (n,) bool."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    d = q - p
    n = p.shape[0]
    t0 = np.zeros(n)
    t1 = np.ones(n)
    ok = np.ones(n, dtype=bool)
    for axis, (lo, hi) in enumerate(((rect.xmin, rect.xmax), (rect.ymin, rect.ymax))):
        dd = d[:, axis]
        p0 = p[:, axis]
        zero = dd == 0.0
        ok &= ~(zero & ((p0 <= lo) | (p0 >= hi)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - p0) / dd
            tb = (hi - p0) / dd
        lo_t = np.minimum(ta, tb)
        hi_t = np.maximum(ta, tb)
        nz = ~zero
        t0 = np.where(nz, np.maximum(t0, lo_t), t0)
        t1 = np.where(nz, np.minimum(t1, hi_t), t1)
    ok &= t1 > t0
    tm = 0.5 * (t0 + t1)
    mx = p[:, 0] + tm * d[:, 0]
    my = p[:, 1] + tm * d[:, 1]
    ok &= (mx > rect.xmin) & (mx < rect.xmax) & (my > rect.ymin) & (my < rect.ymax)
    return ok


class Polyline:
    """Piecewise-linear path with arc-length parametrization."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("polyline needs at least two 2-D points")
        self.points = pts
        seg = np.diff(pts, axis=0)
        self.seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.cum = np.concatenate(([0.0], np.cumsum(self.seg_len)))
        self.length = float(self.cum[-1])

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(float(s), 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.seg_len) - 1)
        denom = self.seg_len[i] if self.seg_len[i] > 0 else 1.0
        r = (s - self.cum[i]) / denom
        return self.points[i] + r * (self.points[i + 1] - self.points[i])

    def points_at(self, s) -> np.ndarray:
        s = np.clip(np.asarray(s, float), 0.0, self.length)
        i = np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0, len(self.seg_len) - 1)
        denom = np.where(self.seg_len[i] > 0, self.seg_len[i], 1.0)
        r = (s - self.cum[i]) / denom
        return self.points[i] + r[:, None] * (self.points[i + 1] - self.points[i])


def fold_reflect(s: float, length: float) -> float:
    """Map an unbounded arc coordinate onto [0, length] with reflection at both ends."""
    if length <= 0:
        return 0.0
    u = math.fmod(s, 2.0 * length)
    if u < 0:
        u += 2.0 * length
    return u if u <= length else 2.0 * length - u


def fold_reflect_array(s, length: float) -> np.ndarray:
    if length <= 0:
        return np.zeros_like(np.asarray(s, float))
    u = np.mod(np.asarray(s, float), 2.0 * length)
    return np.where(u <= length, u, 2.0 * length - u)
