"""Airspace with straight-flying intruders (stochastic or fixed), in 10 m world units."""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .env_static import CONFLICT, GOAL, ONGOING, TIMEOUT, EpisodeDoneError
from .geometry import DT, Vec2, apply_heading_action
from .scenario import WORLD_UNIT_M, MovingScenario, fingerprint

GOAL_REWARD = 1000.0


def proximity_penalty(d: float, c1: float, c2: float, c3: float) -> float:
    """Arctan-shaped closeness cost; 0 far away, -c1*pi as d -> -inf."""
    return c1 * (math.atan(c2 * (d - c3)) - math.pi / 2)


def reward_moving(d_g, distances, state_class, c_g, c_0, c1, c2, c3, conflict_penalty=180.0) -> float:
    if state_class == GOAL:
        return GOAL_REWARD
    r = -c_g * d_g - c_0
    for d, a, b, c in zip(distances, c1, c2, c3):
        r += proximity_penalty(d, a, b, c)
    if state_class == CONFLICT:
        r -= conflict_penalty
    return r


def _draw(spec, rng):
    if isinstance(spec, (tuple, list)):
        return float(rng.uniform(spec[0], spec[1]))
    return float(spec)


class MovingEnv:
    """Agent crossing paths with intruders that hold heading and speed all episode.

    A conflict is penalised but does not end the episode; only goal arrival or
    the step cap does. Observation per intruder is
    ``[P_x, P_y, V_x, V_y, d_i, Vref_x, Vref_y]`` in the goal-aligned frame.
    """

    kind = "moving"

    def __init__(self, scenario: MovingScenario, rng: np.random.Generator | None = None):
        self.scenario = scenario
        self.rng = rng if rng is not None else np.random.default_rng()
        n = len(scenario.intruders)
        self.n_intruders = n
        self.speed_control = scenario.control_mode == "heading_and_speed"
        self.act_dim = 2 if self.speed_control else 1
        self.obs_dim = 5 + 7 * n
        self.max_steps = scenario.max_steps
        self.pos_scale = scenario.diagonal
        self.vel_scale = scenario.max_speed if self.speed_control else scenario.agent_speed
        self.rel_scale = 2.0 * self.vel_scale
        self._c1 = np.array(scenario.c1, dtype=float)
        self._c2 = np.array(scenario.c2, dtype=float)
        self._c3 = np.array(scenario.c3, dtype=float)
        self.p0 = np.zeros((n, 2))
        self.ipos = np.zeros((n, 2))
        self.ivel = np.zeros((n, 2))
        self.dists = np.zeros(n)
        self.x = self.y = self.heading = 0.0
        self.speed = scenario.agent_speed
        self.steps = 0
        self.done = True
        self.outcome = None
        self.in_conflict = False
        self.min_distance = math.inf
        self.episode_reward = 0.0
        self._frame = 0.0
        self.obs = None

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.scenario)

    @property
    def position(self) -> Vec2:
        return Vec2(self.x, self.y)

    def goal_distance(self) -> float:
        g = self.scenario.goal
        return math.hypot(g.x - self.x, g.y - self.y)

    def reset(self, rng: np.random.Generator | None = None) -> np.ndarray:
        if rng is not None:
            self.rng = rng
        sc = self.scenario
        self.x = _draw(sc.agent_origin[0], self.rng)
        self.y = _draw(sc.agent_origin[1], self.rng)
        for i, it in enumerate(sc.intruders):
            self.p0[i, 0] = _draw(it.origin[0], self.rng)
            self.p0[i, 1] = _draw(it.origin[1], self.rng)
            th = _draw(it.heading, self.rng)
            self.ivel[i, 0] = it.speed * math.cos(th)
            self.ivel[i, 1] = it.speed * math.sin(th)
        self.ipos[:] = self.p0
        self.heading = math.atan2(sc.goal.y - self.y, sc.goal.x - self.x)
        self.speed = sc.agent_speed
        self.steps = 0
        self.done = False
        self.outcome = None
        self.episode_reward = 0.0
        self._frame = 0.0
        self.min_distance = kernels.point_distances(self.x, self.y, self.ipos, self.dists)
        self.in_conflict = self.min_distance < sc.separation
        self.obs = self.observe()
        return self.obs

    @property
    def velocity(self) -> Vec2:
        return Vec2(self.speed * math.cos(self.heading), self.speed * math.sin(self.heading))

    def observe(self) -> np.ndarray:
        out = np.empty(self.obs_dim)
        g = self.scenario.goal
        v = self.velocity
        self._frame = kernels.moving_observation(
            self.x, self.y, v.x, v.y, g.x, g.y, self.ipos, self.ivel, self._frame,
            self.pos_scale, self.vel_scale, self.rel_scale, out,
        )
        return out

    def classify(self) -> str:
        if self.goal_distance() <= self.scenario.goal_radius:
            return GOAL
        if self.dists.size and self.dists.min() < self.scenario.separation:
            return CONFLICT
        return ONGOING

    def step(self, a_h: float, a_v: float | None = None):
        """Advance one tick. ``a_h`` in radians, ``a_v`` in m/s (speed-control mode only)."""
        if self.done:
            raise EpisodeDoneError("step() called on a finished episode; call reset() first")
        if (a_v is not None) != self.speed_control:
            raise ValueError(
                "a_v must be given iff control_mode is heading_and_speed "
                f"(mode={self.scenario.control_mode})"
            )
        sc = self.scenario
        self.heading = apply_heading_action(self.heading, float(a_h))
        if a_v is not None:
            self.speed = min(max(float(a_v) / WORLD_UNIT_M, 0.0), sc.max_speed)
        self.x += self.speed * DT * math.cos(self.heading)
        self.y += self.speed * DT * math.sin(self.heading)
        self.steps += 1
        t = self.steps * DT
        np.multiply(self.ivel, t, out=self.ipos)
        self.ipos += self.p0
        dmin = kernels.point_distances(self.x, self.y, self.ipos, self.dists)
        if dmin < self.min_distance:
            self.min_distance = dmin
        d_g = self.goal_distance()
        if d_g <= sc.goal_radius:
            cls = GOAL
        elif dmin < sc.separation:
            cls = CONFLICT
        else:
            cls = ONGOING
        self.in_conflict = dmin < sc.separation
        if cls == GOAL:
            reward = GOAL_REWARD
        else:
            reward = -sc.c_g * d_g - sc.c_0 + kernels.proximity_sum(self.dists, self._c1, self._c2, self._c3)
            if cls == CONFLICT:
                reward -= sc.conflict_penalty
        outcome = GOAL if cls == GOAL else (TIMEOUT if self.steps >= self.max_steps else None)
        self.done = outcome is not None
        self.outcome = outcome
        self.episode_reward += reward
        self.obs = self.observe()
        info = {"outcome": outcome, "state": cls, "d_g": d_g, "min_distance": dmin, "conflict": self.in_conflict}
        return self.obs, reward, self.done, info
