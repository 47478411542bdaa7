import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from uasguide import scenario as scn
from uasguide.env_static import (
    CONFLICT,
    GOAL,
    ONGOING,
    EpisodeDoneError,
    StaticEnv,
    perturb_offset,
    perturb_position,
    reward_static,
)


def make(obstacles=(), goal=(2500, 2500), **kw):
    doc = {"version": 1, "kind": "static", "airspace": [0, 0, 4000, 4000], "goal": list(goal),
           "obstacles": list(obstacles), **kw}
    return StaticEnv(scn.from_dict(doc), np.random.default_rng(0))


def circle(x, y, r):
    return {"shape": "circle", "center": [x, y], "radius_m": r}


class TestReward:
    def test_goal(self):
        assert reward_static(123.0, GOAL) == 10.0

    def test_ongoing(self):
        assert reward_static(1000.0, ONGOING) == pytest.approx(-1.05)

    def test_conflict(self):
        assert reward_static(500.0, CONFLICT) == pytest.approx(-16.55)

    def test_unit(self):
        assert reward_static(1000.0, ONGOING, unit=10.0) == pytest.approx(-0.15)

    @given(st.floats(0, 1e5), st.floats(0, 1e5))
    def test_monotone_and_offset(self, a, b):
        # separations below about 1e-9 m vanish next to the constant step cost
        if b - a > 1e-9:
            assert reward_static(a, ONGOING) > reward_static(b, ONGOING)
            assert reward_static(a, CONFLICT) > reward_static(b, CONFLICT)
        elif a <= b:
            assert reward_static(a, ONGOING) >= reward_static(b, ONGOING)
        assert reward_static(a, CONFLICT) == pytest.approx(reward_static(a, ONGOING) - 16)


class TestClassify:
    def test_goal_radius(self):
        env = make()
        assert env.classify(2500 - 399, 2500) == GOAL
        assert env.classify(2500 - 401, 2500) == ONGOING

    def test_boundary_strict(self):
        env = make([circle(1000, 1000, 300)], separation_m=0)
        assert env.classify(1300, 1000) == ONGOING
        assert env.classify(1299, 1000) == CONFLICT

    def test_separation(self):
        env = make([circle(1000, 1000, 300)], separation_m=75)
        assert env.classify(1000 + 300 + 74, 1000) == CONFLICT
        assert env.classify(1000 + 300 + 75, 1000) == ONGOING

    def test_goal_wins(self):
        env = make([circle(2500, 2300, 100)], separation_m=75)
        assert env.classify(2500, 2400) == GOAL

    def test_rectangle_distance(self):
        env = make([{"shape": "rectangle", "min_corner": [1000, 1000], "max_corner": [1500, 1200]}],
                   separation_m=75)
        assert env.classify(1200, 1100) == CONFLICT  # inside
        assert env.classify(1550, 1250) == CONFLICT  # ~70.7 m from the corner
        assert env.classify(1560, 1260) == ONGOING  # ~84.9 m


class TestObserve:
    def test_hand_geometry(self):
        env = make([circle(500, 500, 100)], goal=(1000, 0))
        env.reset(origin=(0, 0))
        obs = env.observe() * env.pos_scale
        assert obs[3] == pytest.approx(500.0)
        assert obs[4] == pytest.approx(707.1068, abs=1e-4)

    def test_velocity_on_axis(self):
        env = make([circle(500, 500, 100)], goal=(1000, 0))
        obs = env.reset(origin=(0, 0))
        assert obs[1] * env.vel_scale == pytest.approx(20.0)
        assert obs[2] == pytest.approx(0.0, abs=1e-12)

    def test_goal_distance_random(self):
        env = make([circle(1000, 1000, 300), circle(3000, 1200, 300)])
        rng = np.random.default_rng(4)
        for _ in range(1000):
            env.reset(origin=tuple(rng.uniform(0, 4000, 2)))
            env.heading = rng.uniform(-math.pi, math.pi)
            obs = env.observe()
            d = math.hypot(2500 - env.x, 2500 - env.y)
            assert obs[0] * env.pos_scale == pytest.approx(d, rel=1e-12)
            assert np.all(np.abs(obs) <= 1.0)
            assert obs.shape == (3 + 2 * 2,)

    def test_rectangle_uses_centroid(self):
        env = make([{"shape": "rectangle", "min_corner": [1000, 1000], "max_corner": [1600, 1200]}])
        env.reset(origin=(0, 0))
        assert env.observe()[4] * env.pos_scale == pytest.approx(math.hypot(1300, 1100))


class TestReset:
    def test_deterministic(self):
        a = make([circle(1000, 1000, 300)])
        b = make([circle(1000, 1000, 300)])
        a.reset(np.random.default_rng(7))
        b.reset(np.random.default_rng(7))
        assert (a.x, a.y) == (b.x, b.y)

    def test_on_boundary_integer_and_uniform_edges(self):
        env = make()
        rng = np.random.default_rng(11)
        counts = {"left": 0, "right": 0, "bottom": 0, "top": 0}
        n = 10_000
        for _ in range(n):
            p = env.sample_origin(rng)
            assert p.x == int(p.x) and p.y == int(p.y)
            on = [p.x == 0, p.x == 4000, p.y == 0, p.y == 4000]
            assert any(on)
            # corners are attributed to the edge that starts there in the perimeter walk
            if p.x == 0 and p.y < 4000:
                counts["left"] += 1
            elif p.y == 4000 and p.x < 4000:
                counts["top"] += 1
            elif p.x == 4000 and p.y > 0:
                counts["right"] += 1
            else:
                counts["bottom"] += 1
        for c in counts.values():
            assert abs(c / n - 0.25) <= 0.02

    def test_rejects_conflicting_start(self):
        env = make([circle(0, 2000, 2100)])  # covers most of the left edge
        rng = np.random.default_rng(0)
        for _ in range(200):
            p = env.sample_origin(rng)
            assert env.clearance(*p) >= 0

    def test_heading_points_at_goal(self):
        env = make()
        env.reset(origin=(0, 0))
        assert env.heading == pytest.approx(math.pi / 4)


class TestUncertainty:
    def test_branches(self):
        assert perturb_offset(0.5, 1.0, 75, 0.1) == (0.0, 0.0)
        assert perturb_offset(0.95, 0.0, 75, 0.1) == pytest.approx((75.0, 0.0))

    def test_monte_carlo(self):
        rng = np.random.default_rng(5)
        n = 100_000
        moved = 0
        for _ in range(n):
            p = perturb_position((10.0, 20.0), rng)
            if p != (10.0, 20.0):
                moved += 1
                assert math.hypot(p[0] - 10, p[1] - 20) == pytest.approx(75.0, abs=1e-9)
        assert abs(moved / n - 0.10) <= 0.01


class TestStep:
    def test_straight_to_goal(self):
        env = make()
        env.reset(origin=(0, 2500))
        total, done = 0.0, False
        while not done:
            _, r, done, info = env.step(0.0)
            total += r
        assert info["outcome"] == GOAL
        assert r == 10.0

    def test_action_clamp(self):
        a, b = make(), make()
        a.reset(origin=(0, 0))
        b.reset(origin=(0, 0))
        oa = a.step(math.radians(90))[0]
        ob = b.step(math.radians(30))[0]
        assert np.array_equal(oa, ob) and (a.x, a.y) == (b.x, b.y)

    def test_deterministic_trajectory(self):
        def run():
            env = make([circle(1500, 1500, 300)], separation_m=75,
                       uncertainty={"enabled": True, "radius_m": 75, "probability": 0.1})
            env.reset(np.random.default_rng(3))
            rng = np.random.default_rng(9)
            xs = []
            done = False
            while not done:
                _, _, done, _ = env.step(rng.uniform(-0.6, 0.6))
                xs.append((env.x, env.y))
            return xs
        assert run() == run()

    def test_step_after_done(self):
        env = make([circle(100, 2500, 50)])
        env.reset(origin=(0, 2500))
        done = False
        while not done:
            done = env.step(0.0)[2]
        with pytest.raises(EpisodeDoneError):
            env.step(0.0)

    def test_conflict_terminates(self):
        env = make([circle(100, 2500, 50)])
        env.reset(origin=(0, 2500))
        for _ in range(10):
            _, r, done, info = env.step(0.0)
            if done:
                break
        assert info["outcome"] == CONFLICT
        assert r == pytest.approx(reward_static(info["d_g"], CONFLICT))

    def test_timeout(self):
        env = make(max_steps=5)
        env.reset(origin=(0, 0))
        for i in range(5):
            done = env.step(math.radians(30))[2]
        assert done and env.outcome == "timeout" and env.steps == 5

    def test_observation_length_constant(self):
        env = make([circle(1500, 1500, 300)])
        obs = env.reset(np.random.default_rng(0))
        rng = np.random.default_rng(1)
        done = False
        while not done:
            o, _, done, _ = env.step(rng.uniform(-1, 1))
            assert o.shape == obs.shape


def test_uncertainty_angles_uniform():
    rng = np.random.default_rng(8)
    angles = []
    for _ in range(100_000):
        p = perturb_position((0.0, 0.0), rng)
        if p != (0.0, 0.0):
            angles.append(math.atan2(p[1], p[0]) % (2 * math.pi))
    counts, _ = np.histogram(angles, bins=36, range=(0, 2 * math.pi))
    assert stats.chisquare(counts).pvalue > 0.01
