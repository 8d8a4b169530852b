# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometry kernels. Same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, hypot

cnp.import_array()

cdef double BOUNDARY_EPS = 1e-9


def points_in_polygon(points, poly):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cdef const double[:, ::1] pv = np.ascontiguousarray(poly, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], m = pv.shape[0], k, j, jn
    out = np.zeros(n, dtype=bool)
    cdef cnp.npy_bool[::1] res = out
    if m < 3:
        return out
    cdef double px, py, ax, ay, bx, by, ex, ey, rx, ry, cross, dot, len2, length
    cdef bint inside, boundary
    for k in range(n):
        px = pts[k, 0]
        py = pts[k, 1]
        inside = False
        boundary = False
        for j in range(m):
            jn = j + 1
            if jn == m:
                jn = 0
            ax = pv[j, 0]
            ay = pv[j, 1]
            bx = pv[jn, 0]
            by = pv[jn, 1]
            ex = bx - ax
            ey = by - ay
            rx = px - ax
            ry = py - ay
            len2 = ex * ex + ey * ey
            if len2 == 0.0:
                if fabs(rx) <= BOUNDARY_EPS and fabs(ry) <= BOUNDARY_EPS:
                    boundary = True
                    break
                continue
            cross = ex * ry - ey * rx
            dot = ex * rx + ey * ry
            length = sqrt(len2)
            if length < 1.0:
                length = 1.0
            if fabs(cross) <= BOUNDARY_EPS * length and dot >= -BOUNDARY_EPS and \
                    dot <= len2 + BOUNDARY_EPS:
                boundary = True
                break
            if (ay > py) != (by > py):
                if px < ax + (py - ay) * ex / ey:
                    inside = not inside
        res[k] = inside or boundary
    return out


def clip_polygon_box(poly, double xmin, double ymin, double xmax, double ymax):
    cdef const double[:, ::1] src = np.ascontiguousarray(poly, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = src.shape[0]
    cdef Py_ssize_t cap = 2 * n + 8
    buf_a = np.empty((cap, 2))
    buf_b = np.empty((cap, 2))
    cdef double[:, ::1] a = buf_a
    cdef double[:, ::1] b = buf_b
    cdef double[:, ::1] tmp
    cdef Py_ssize_t count = n, out_n, i, side, axis
    cdef double bound, t, prev_v, cur_v
    cdef bint keep_greater, cur_in, prev_in
    for i in range(n):
        a[i, 0] = src[i, 0]
        a[i, 1] = src[i, 1]
    for side in range(4):
        if count == 0:
            break
        if side == 0:
            axis = 0; bound = xmin; keep_greater = True
        elif side == 1:
            axis = 0; bound = xmax; keep_greater = False
        elif side == 2:
            axis = 1; bound = ymin; keep_greater = True
        else:
            axis = 1; bound = ymax; keep_greater = False
        out_n = 0
        prev_v = a[count - 1, axis]
        prev_in = prev_v >= bound if keep_greater else prev_v <= bound
        for i in range(count):
            cur_v = a[i, axis]
            cur_in = cur_v >= bound if keep_greater else cur_v <= bound
            if cur_in != prev_in:
                _cross(a, (i - 1) if i > 0 else count - 1, i, axis, bound, b, out_n)
                out_n += 1
            if cur_in:
                b[out_n, 0] = a[i, 0]
                b[out_n, 1] = a[i, 1]
                out_n += 1
            prev_in = cur_in
        tmp = a
        a = b
        b = tmp
        count = out_n
    return np.asarray(a[:count]).copy()


cdef inline void _cross(double[:, ::1] a, Py_ssize_t p, Py_ssize_t q, Py_ssize_t axis,
                        double bound, double[:, ::1] out, Py_ssize_t at):
    cdef double t = (bound - a[p, axis]) / (a[q, axis] - a[p, axis])
    cdef double x = a[p, 0] + t * (a[q, 0] - a[p, 0])
    cdef double y = a[p, 1] + t * (a[q, 1] - a[p, 1])
    if axis == 0:
        x = bound
    else:
        y = bound
    out[at, 0] = x
    out[at, 1] = y


def line_distances(points, origin, direction):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cdef double ox = origin[0], oy = origin[1], dx = direction[0], dy = direction[1]
    cdef Py_ssize_t n = pts.shape[0], k
    out = np.empty(n)
    cdef double[::1] res = out
    for k in range(n):
        res[k] = fabs((pts[k, 0] - ox) * dy - (pts[k, 1] - oy) * dx)
    return out


def longest_run(mask):
    cdef const cnp.uint8_t[::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t n = m.shape[0], k, run = 0, best = 0
    for k in range(n):
        if m[k]:
            run += 1
            if run > best:
                best = run
        else:
            run = 0
    return int(best)


def nearest_on_polygon(point, poly):
    cdef const double[:, ::1] pv = np.ascontiguousarray(poly, dtype=np.float64)
    cdef double px = point[0], py = point[1]
    cdef Py_ssize_t m = pv.shape[0], j, jn
    cdef double ax, ay, ex, ey, len2, t, qx, qy, d
    cdef double best = 1e308, bx = 0.0, by = 0.0
    for j in range(m):
        jn = j + 1
        if jn == m:
            jn = 0
        ax = pv[j, 0]
        ay = pv[j, 1]
        ex = pv[jn, 0] - ax
        ey = pv[jn, 1] - ay
        len2 = ex * ex + ey * ey
        t = 0.0
        if len2 > 0.0:
            t = ((px - ax) * ex + (py - ay) * ey) / len2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        qx = ax + t * ex
        qy = ay + t * ey
        d = hypot(qx - px, qy - py)
        if d < best:
            best = d
            bx = qx
            by = qy
    return np.array([bx, by]), float(best)
