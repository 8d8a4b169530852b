"""Small planar helpers shared by the scene, map and sampling code."""
from __future__ import annotations

import math

import numpy as np


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotate_about(points: np.ndarray, theta: float, pivot) -> np.ndarray:
    pivot = np.asarray(pivot, dtype=np.float64)
    return (np.asarray(points, dtype=np.float64) - pivot) @ rotation(theta).T + pivot


def to_local(points, origin, heading: float) -> np.ndarray:
    """Global -> frame with ``origin`` at 0 and ``heading`` along +x."""
    return (np.asarray(points, dtype=np.float64) - origin) @ rotation(heading)


def to_global(points, origin, heading: float) -> np.ndarray:
    return np.asarray(points, dtype=np.float64) @ rotation(heading).T + origin


def wrap_angle(a):
    """Map to (-pi, pi]."""
    out = np.mod(np.asarray(a, dtype=np.float64) + math.pi, 2 * math.pi) - math.pi
    out = np.where(out == -math.pi, math.pi, out)
    return float(out) if np.ndim(out) == 0 else out


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    cross = np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]) + x[-1] * y[0] - x[0] * y[-1]
    return 0.5 * float(cross)


def polygon_area(poly: np.ndarray) -> float:
    return abs(signed_area(np.asarray(poly, dtype=np.float64))) if len(poly) >= 3 else 0.0


def is_simple(poly: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect (O(n^2), vectorised)."""
    p = np.asarray(poly, dtype=np.float64)
    n = len(p)
    if n < 3:
        return False
    a = p
    b = np.roll(p, -1, axis=0)
    if np.any(np.all(a == b, axis=1)):
        return False

    tol = 1e-9 * max(float(np.abs(p).max()), 1.0) ** 2

    def orient(p1, p2, q):
        v = ((p2[..., 0] - p1[..., 0]) * (q[..., 1] - p1[..., 1])
             - (p2[..., 1] - p1[..., 1]) * (q[..., 0] - p1[..., 0]))
        return np.where(np.abs(v) <= tol, 0.0, np.sign(v))

    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    a1, b1, a2, b2 = a[i], b[i], a[j], b[j]
    o1 = orient(a1, b1, a2)
    o2 = orient(a1, b1, b2)
    o3 = orient(a2, b2, a1)
    o4 = orient(a2, b2, b1)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    return not bool(proper.any())


def resample_polyline(points: np.ndarray, spacing: float) -> np.ndarray:
    """Drop repeated vertices, then resample at roughly even arc-length spacing."""
    pts = np.asarray(points, dtype=np.float64)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    keep = np.concatenate(([True], seg > 1e-9))
    pts = pts[keep]
    if len(pts) < 2:
        return pts
    s = np.concatenate(([0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))))
    n = max(int(math.ceil(s[-1] / spacing)), 1)
    q = np.linspace(0.0, s[-1], n + 1)
    return np.column_stack([np.interp(q, s, pts[:, 0]), np.interp(q, s, pts[:, 1])])


def corridor_polygon(centerline: np.ndarray, half_width: float) -> np.ndarray:
    """Counter-clockwise band of ``half_width`` around a polyline."""
    c = np.asarray(centerline, dtype=np.float64)
    tang = np.gradient(c, axis=0)
    tang /= np.hypot(tang[:, 0], tang[:, 1])[:, None]
    normal = np.column_stack([-tang[:, 1], tang[:, 0]])
    left = c + half_width * normal
    right = c - half_width * normal
    poly = np.vstack([right, left[::-1]])
    if signed_area(poly) < 0:
        poly = poly[::-1]
    return poly
