"""Numpy implementations of the geometry kernels (fallback when the
compiled extension is unavailable). Signatures match ``_ckernels``."""
from __future__ import annotations

import numpy as np

BOUNDARY_EPS = 1e-9


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd test for each point; points on an edge count as inside."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    poly = np.asarray(poly, dtype=np.float64)
    if len(poly) < 3 or len(pts) == 0:
        return np.zeros(len(pts), dtype=bool)
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    ax, ay = poly[:, 0], poly[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    ex, ey = bx - ax, by - ay
    rx, ry = px - ax, py - ay
    cross = ex * ry - ey * rx
    dot = ex * rx + ey * ry
    length2 = ex * ex + ey * ey
    length = np.sqrt(length2)
    on_edge = (np.abs(cross) <= BOUNDARY_EPS * np.maximum(length, 1.0)) & \
        (dot >= -BOUNDARY_EPS) & (dot <= length2 + BOUNDARY_EPS)
    # vertex-coincident points on zero-length edges
    on_edge |= (length2 == 0.0) & (np.abs(rx) <= BOUNDARY_EPS) & (np.abs(ry) <= BOUNDARY_EPS)
    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (py - ay) * ex / np.where(ey == 0.0, 1.0, ey)
    crossings = straddle & (px < x_cross)
    inside = (np.count_nonzero(crossings, axis=1) % 2) == 1
    return inside | on_edge.any(axis=1)


def clip_polygon_box(poly: np.ndarray, xmin: float, ymin: float, xmax: float,
                     ymax: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon against an axis-aligned box."""
    out = [tuple(p) for p in np.asarray(poly, dtype=np.float64)]
    for axis, bound, keep_greater in ((0, xmin, True), (0, xmax, False),
                                      (1, ymin, True), (1, ymax, False)):
        if not out:
            break
        src = out
        out = []
        prev = src[-1]
        for cur in src:
            cur_in = cur[axis] >= bound if keep_greater else cur[axis] <= bound
            prev_in = prev[axis] >= bound if keep_greater else prev[axis] <= bound
            if cur_in:
                if not prev_in:
                    out.append(_intersect(prev, cur, axis, bound))
                out.append(cur)
            elif prev_in:
                out.append(_intersect(prev, cur, axis, bound))
            prev = cur
    return np.array(out, dtype=np.float64).reshape(-1, 2)


def _intersect(p, q, axis, bound):
    t = (bound - p[axis]) / (q[axis] - p[axis])
    x = p[0] + t * (q[0] - p[0])
    y = p[1] + t * (q[1] - p[1])
    if axis == 0:
        x = bound
    else:
        y = bound
    return (x, y)


def line_distances(points: np.ndarray, origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Perpendicular distance of each point to the line ``origin + s * direction``
    (``direction`` must be unit length)."""
    pts = np.asarray(points, dtype=np.float64)
    rx = pts[:, 0] - origin[0]
    ry = pts[:, 1] - origin[1]
    return np.abs(rx * direction[1] - ry * direction[0])


def longest_run(mask: np.ndarray) -> int:
    """Length of the longest run of consecutive True values."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return 0
    padded = np.concatenate(([False], m, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return int((edges[1::2] - edges[::2]).max())


def nearest_on_polygon(point: np.ndarray, poly: np.ndarray) -> tuple[np.ndarray, float]:
    """Closest point on the polygon boundary and its distance."""
    poly = np.asarray(poly, dtype=np.float64)
    a = poly
    b = np.roll(poly, -1, axis=0)
    e = b - a
    length2 = (e * e).sum(axis=1)
    t = np.where(length2 > 0, ((point - a) * e).sum(axis=1) / np.where(length2 > 0, length2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * e
    d = np.hypot(proj[:, 0] - point[0], proj[:, 1] - point[1])
    k = int(np.argmin(d))
    return proj[k].copy(), float(d[k])
