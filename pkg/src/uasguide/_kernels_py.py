"""Pure-Python hot-path kernels. Reference behaviour for the compiled ``_kernels`` module.

Every function here has an identical twin in ``_kernels.pyx``; the two must agree
to rounding. Arrays are float64 and C-contiguous.
"""

import math

import numpy as np


def _clip1(v):
    if v > 1.0:
        return 1.0
    if v < -1.0:
        return -1.0
    return v


def mlp_forward(x, theta, n1, n2, n_out):
    """Two tanh hidden layers and a linear head, for a single input vector.

    ``theta`` packs W1, b1, W2, b2, W3, b3 back to back, matrices row-major.
    """
    n_in = len(x)
    sizes = (n1 * n_in, n1, n2 * n1, n2, n_out * n2, n_out)
    if len(theta) != sum(sizes) or n_in < 1:
        raise ValueError("parameter vector does not match the layer sizes")
    W1, b1, W2, b2, W3, b3 = np.split(theta, np.cumsum(sizes)[:-1])
    W1, W2, W3 = W1.reshape(n1, n_in), W2.reshape(n2, n1), W3.reshape(n_out, n2)
    h1 = np.tanh(W1 @ x + b1)
    h2 = np.tanh(W2 @ h1 + b2)
    return W3 @ h2 + b3


def static_observation(ax, ay, heading, speed, gx, gy, centers, fallback,
                       pos_scale, vel_scale, out):
    """Fill ``out`` with [d_g, v_x, v_y, (P_y, d_i)...] in the goal frame; return the frame angle."""
    dx, dy = gx - ax, gy - ay
    if dx == 0.0 and dy == 0.0:
        theta = fallback
    else:
        theta = math.atan2(dy, dx)
    c, s = math.cos(theta), math.sin(theta)
    rel = heading - theta
    out[0] = _clip1(math.hypot(dx, dy) / pos_scale)
    out[1] = _clip1(speed * math.cos(rel) / vel_scale)
    out[2] = _clip1(speed * math.sin(rel) / vel_scale)
    for i in range(centers.shape[0]):
        px = centers[i, 0] - ax
        py = centers[i, 1] - ay
        # y-component of R(-theta) @ (px, py)
        out[3 + 2 * i] = _clip1((-s * px + c * py) / pos_scale)
        out[4 + 2 * i] = _clip1(math.hypot(px, py) / pos_scale)
    return theta


def moving_observation(ax, ay, avx, avy, gx, gy, ipos, ivel, fallback,
                       pos_scale, vel_scale, rel_scale, out):
    """Fill ``out`` with [d_g, v, g, (P, V, d_i, V_ref)...] in the goal frame; return the frame angle."""
    dx, dy = gx - ax, gy - ay
    if dx == 0.0 and dy == 0.0:
        theta = fallback
    else:
        theta = math.atan2(dy, dx)
    c, s = math.cos(theta), math.sin(theta)
    dg = math.hypot(dx, dy)
    out[0] = _clip1(dg / pos_scale)
    out[1] = _clip1((c * avx + s * avy) / vel_scale)
    out[2] = _clip1((-s * avx + c * avy) / vel_scale)
    out[3] = _clip1((c * dx + s * dy) / pos_scale)
    out[4] = _clip1((-s * dx + c * dy) / pos_scale)
    for i in range(ipos.shape[0]):
        k = 5 + 7 * i
        px = ipos[i, 0] - ax
        py = ipos[i, 1] - ay
        vx, vy = ivel[i, 0], ivel[i, 1]
        rx, ry = avx - vx, avy - vy
        out[k] = _clip1((c * px + s * py) / pos_scale)
        out[k + 1] = _clip1((-s * px + c * py) / pos_scale)
        out[k + 2] = _clip1((c * vx + s * vy) / vel_scale)
        out[k + 3] = _clip1((-s * vx + c * vy) / vel_scale)
        out[k + 4] = _clip1(math.hypot(px, py) / pos_scale)
        out[k + 5] = _clip1((c * rx + s * ry) / rel_scale)
        out[k + 6] = _clip1((-s * rx + c * ry) / rel_scale)
    return theta


def static_clearance(ax, ay, circles, rects):
    """Smallest distance from the agent to any obstacle boundary (circles may go negative)."""
    best = math.inf
    for i in range(circles.shape[0]):
        d = math.hypot(ax - circles[i, 0], ay - circles[i, 1]) - circles[i, 2]
        if d < best:
            best = d
    for i in range(rects.shape[0]):
        ex = max(rects[i, 0] - ax, 0.0, ax - rects[i, 2])
        ey = max(rects[i, 1] - ay, 0.0, ay - rects[i, 3])
        d = math.hypot(ex, ey)
        if d < best:
            best = d
    return best


def point_distances(ax, ay, pts, out):
    """Write |agent - pts[i]| into ``out``; return the minimum (inf when empty)."""
    best = math.inf
    for i in range(pts.shape[0]):
        d = math.hypot(pts[i, 0] - ax, pts[i, 1] - ay)
        out[i] = d
        if d < best:
            best = d
    return best


def proximity_sum(dists, c1, c2, c3):
    total = 0.0
    for i in range(dists.shape[0]):
        total += c1[i] * (math.atan(c2[i] * (dists[i] - c3[i])) - math.pi / 2)
    return total
