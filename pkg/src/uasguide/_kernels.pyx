# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot-path kernels. Signatures and results mirror ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan, atan2, cos, hypot, sin, sqrt, tanh, INFINITY, M_PI

cnp.import_array()


cdef inline double _clip1(double v) nogil:
    if v > 1.0:
        return 1.0
    if v < -1.0:
        return -1.0
    return v


DEF MAX_HIDDEN = 512


cdef inline double _dot(const double* w, const double* v, Py_ssize_t n) nogil:
    # four independent partial sums let the compiler pipeline the multiply-adds
    cdef double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    cdef Py_ssize_t j = 0
    while j + 4 <= n:
        a0 += w[j] * v[j]
        a1 += w[j + 1] * v[j + 1]
        a2 += w[j + 2] * v[j + 2]
        a3 += w[j + 3] * v[j + 3]
        j += 4
    while j < n:
        a0 += w[j] * v[j]
        j += 1
    return (a0 + a1) + (a2 + a3)


def mlp_forward(const double[::1] x, const double[::1] theta, Py_ssize_t n1, Py_ssize_t n2, Py_ssize_t n_out):
    cdef Py_ssize_t n_in = x.shape[0], i
    cdef double h1[MAX_HIDDEN]
    cdef double h2[MAX_HIDDEN]
    cdef Py_ssize_t o_b1 = n1 * n_in, o_W2 = o_b1 + n1, o_b2 = o_W2 + n2 * n1
    cdef Py_ssize_t o_W3 = o_b2 + n2, o_b3 = o_W3 + n_out * n2
    if n1 > MAX_HIDDEN or n2 > MAX_HIDDEN:
        raise ValueError(f"hidden layers wider than {MAX_HIDDEN} are not supported")
    if theta.shape[0] != o_b3 + n_out or n_in < 1:
        raise ValueError("parameter vector does not match the layer sizes")
    out_arr = np.empty(n_out)
    cdef double[::1] out = out_arr
    cdef const double* w = &theta[0]
    with nogil:
        for i in range(n1):
            h1[i] = tanh(w[o_b1 + i] + _dot(w + i * n_in, &x[0], n_in))
        for i in range(n2):
            h2[i] = tanh(w[o_b2 + i] + _dot(w + o_W2 + i * n1, h1, n1))
        for i in range(n_out):
            out[i] = w[o_b3 + i] + _dot(w + o_W3 + i * n2, h2, n2)
    return out_arr


def static_observation(double ax, double ay, double heading, double speed,
                       double gx, double gy, const double[:, ::1] centers, double fallback,
                       double pos_scale, double vel_scale, double[::1] out):
    cdef double dx = gx - ax, dy = gy - ay, theta, c, s, rel, px, py
    cdef Py_ssize_t i
    if dx == 0.0 and dy == 0.0:
        theta = fallback
    else:
        theta = atan2(dy, dx)
    c = cos(theta)
    s = sin(theta)
    rel = heading - theta
    out[0] = _clip1(hypot(dx, dy) / pos_scale)
    out[1] = _clip1(speed * cos(rel) / vel_scale)
    out[2] = _clip1(speed * sin(rel) / vel_scale)
    for i in range(centers.shape[0]):
        px = centers[i, 0] - ax
        py = centers[i, 1] - ay
        out[3 + 2 * i] = _clip1((-s * px + c * py) / pos_scale)
        out[4 + 2 * i] = _clip1(hypot(px, py) / pos_scale)
    return theta


def moving_observation(double ax, double ay, double avx, double avy, double gx, double gy,
                       const double[:, ::1] ipos, const double[:, ::1] ivel, double fallback,
                       double pos_scale, double vel_scale, double rel_scale, double[::1] out):
    cdef double dx = gx - ax, dy = gy - ay, theta, c, s, px, py, vx, vy, rx, ry
    cdef Py_ssize_t i, k
    if dx == 0.0 and dy == 0.0:
        theta = fallback
    else:
        theta = atan2(dy, dx)
    c = cos(theta)
    s = sin(theta)
    out[0] = _clip1(hypot(dx, dy) / pos_scale)
    out[1] = _clip1((c * avx + s * avy) / vel_scale)
    out[2] = _clip1((-s * avx + c * avy) / vel_scale)
    out[3] = _clip1((c * dx + s * dy) / pos_scale)
    out[4] = _clip1((-s * dx + c * dy) / pos_scale)
    for i in range(ipos.shape[0]):
        k = 5 + 7 * i
        px = ipos[i, 0] - ax
        py = ipos[i, 1] - ay
        vx = ivel[i, 0]
        vy = ivel[i, 1]
        rx = avx - vx
        ry = avy - vy
        out[k] = _clip1((c * px + s * py) / pos_scale)
        out[k + 1] = _clip1((-s * px + c * py) / pos_scale)
        out[k + 2] = _clip1((c * vx + s * vy) / vel_scale)
        out[k + 3] = _clip1((-s * vx + c * vy) / vel_scale)
        out[k + 4] = _clip1(hypot(px, py) / pos_scale)
        out[k + 5] = _clip1((c * rx + s * ry) / rel_scale)
        out[k + 6] = _clip1((-s * rx + c * ry) / rel_scale)
    return theta


def static_clearance(double ax, double ay, const double[:, ::1] circles, const double[:, ::1] rects):
    cdef double best = INFINITY, d, ex, ey
    cdef Py_ssize_t i
    for i in range(circles.shape[0]):
        d = hypot(ax - circles[i, 0], ay - circles[i, 1]) - circles[i, 2]
        if d < best:
            best = d
    for i in range(rects.shape[0]):
        ex = rects[i, 0] - ax
        if ax - rects[i, 2] > ex:
            ex = ax - rects[i, 2]
        if ex < 0.0:
            ex = 0.0
        ey = rects[i, 1] - ay
        if ay - rects[i, 3] > ey:
            ey = ay - rects[i, 3]
        if ey < 0.0:
            ey = 0.0
        d = hypot(ex, ey)
        if d < best:
            best = d
    return best


def point_distances(double ax, double ay, const double[:, ::1] pts, double[::1] out):
    cdef double best = INFINITY, d
    cdef Py_ssize_t i
    for i in range(pts.shape[0]):
        d = hypot(pts[i, 0] - ax, pts[i, 1] - ay)
        out[i] = d
        if d < best:
            best = d
    return best


def proximity_sum(const double[::1] dists, const double[::1] c1, const double[::1] c2,
                  const double[::1] c3):
    cdef double total = 0.0
    cdef Py_ssize_t i
    for i in range(dists.shape[0]):
        total += c1[i] * (atan(c2[i] * (dists[i] - c3[i])) - M_PI / 2)
    return total
