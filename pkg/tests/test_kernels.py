"""Compiled and pure-Python kernels must agree, and both must match the geometry module."""

import math

import numpy as np
import pytest

from uasguide import kernels
from uasguide.geometry import to_robot_frame

BACKENDS = kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def k(request):
    return kernels.load_backend(request.param)


def test_compiled_backend_built():
    # The package ships a compiled core; the fallback only exists for environments without a compiler.
    assert "cython" in BACKENDS


def test_env_var_forces_python(monkeypatch):
    import importlib

    monkeypatch.setenv("UASGUIDE_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("UASGUIDE_PURE_PYTHON")
        importlib.reload(kernels)


def test_mlp_forward_matches_numpy(k):
    rng = np.random.default_rng(0)
    for _ in range(50):
        n_in = int(rng.integers(1, 30))
        W1, b1 = rng.normal(size=(64, n_in)), rng.normal(size=64)
        W2, b2 = rng.normal(size=(64, 64)), rng.normal(size=64)
        W3, b3 = rng.normal(size=(2, 64)), rng.normal(size=2)
        x = rng.normal(size=n_in)
        ref = W3 @ np.tanh(W2 @ np.tanh(W1 @ x + b1) + b2) + b3
        theta = np.concatenate([W1.ravel(), b1, W2.ravel(), b2, W3.ravel(), b3])
        assert np.allclose(k.mlp_forward(x, theta, 64, 64, 2), ref, rtol=1e-12, atol=1e-12)


def test_mlp_forward_rejects_bad_sizes(k):
    with pytest.raises(ValueError):
        k.mlp_forward(np.ones(3), np.ones(10), 2, 2, 1)


def test_static_observation_against_geometry(k):
    rng = np.random.default_rng(1)
    for _ in range(200):
        ax, ay, gx, gy = rng.uniform(0, 4000, 4)
        centers = rng.uniform(0, 4000, (3, 2))
        heading = rng.uniform(-math.pi, math.pi)
        out = np.empty(9)
        k.static_observation(ax, ay, heading, 20.0, gx, gy, centers, 0.0, 1e9, 1e3, out)
        v = to_robot_frame((ax, ay), (gx, gy), (20 * math.cos(heading), 20 * math.sin(heading)), True)
        assert out[0] * 1e9 == pytest.approx(math.hypot(gx - ax, gy - ay), rel=1e-12)
        assert out[1:3] * 1e3 == pytest.approx([v.x, v.y], abs=1e-9)
        for i, c in enumerate(centers):
            p = to_robot_frame((ax, ay), (gx, gy), c)
            assert out[3 + 2 * i] * 1e9 == pytest.approx(p.y, rel=1e-9, abs=1e-6)
            assert out[4 + 2 * i] * 1e9 == pytest.approx(math.dist((ax, ay), c), rel=1e-12)


def test_observations_clipped(k):
    out = np.empty(5)
    k.static_observation(0.0, 0.0, 0.0, 20.0, 1e6, 0.0, np.array([[0.0, -1e6]]), 0.0, 10.0, 1.0, out)
    assert np.all(np.abs(out) <= 1.0)


def test_backends_agree_on_everything():
    if len(BACKENDS) < 2:
        pytest.skip("only one backend available")
    c, p = kernels.load_backend("cython"), kernels.load_backend("python")
    rng = np.random.default_rng(2)
    for _ in range(300):
        a = rng.uniform(-100, 300, 6)
        ipos, ivel = rng.uniform(-50, 250, (3, 2)), rng.uniform(-2, 2, (3, 2))
        o1, o2 = np.empty(26), np.empty(26)
        t1 = c.moving_observation(*a, ipos, ivel, 0.3, 424.0, 4.0, 8.0, o1)
        t2 = p.moving_observation(*a, ipos, ivel, 0.3, 424.0, 4.0, 8.0, o2)
        assert t1 == pytest.approx(t2, abs=1e-15)
        assert np.allclose(o1, o2, rtol=1e-13, atol=1e-15)
        circles = np.column_stack([rng.uniform(0, 4000, (2, 2)), rng.uniform(10, 500, 2)])
        x0 = rng.uniform(0, 3000, 2)
        rects = np.concatenate([x0, x0 + rng.uniform(10, 800, 2)]).reshape(1, 4)
        q = rng.uniform(0, 4000, 2)
        assert c.static_clearance(*q, circles, rects) == pytest.approx(p.static_clearance(*q, circles, rects), abs=1e-9)
        d1, d2 = np.empty(3), np.empty(3)
        assert c.point_distances(*q, ipos, d1) == pytest.approx(p.point_distances(*q, ipos, d2), rel=1e-15)
        assert np.allclose(d1, d2, rtol=1e-15, atol=0)
        c1, c2, c3 = rng.uniform(0, 20, (3, 3))
        assert c.proximity_sum(d1, c1, c2, c3) == pytest.approx(p.proximity_sum(d1, c1, c2, c3), rel=1e-13)


def test_frame_fallback(k):
    out = np.empty(3)
    theta = k.static_observation(5.0, 5.0, 0.0, 20.0, 5.0, 5.0, np.empty((0, 2)), 1.25, 1.0, 20.0, out)
    assert theta == 1.25


def test_rect_clearance_zero_inside(k):
    rects = np.array([[0.0, 0.0, 10.0, 10.0]])
    assert k.static_clearance(5.0, 5.0, np.empty((0, 3)), rects) == 0.0
    assert k.static_clearance(13.0, 14.0, np.empty((0, 3)), rects) == pytest.approx(5.0)
