"""Static-obstacle airspace: heading-only control at a fixed cruise speed."""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .geometry import DT, Vec2, apply_heading_action
from .scenario import Circle, Rectangle, StaticScenario, fingerprint

GOAL_REWARD = 10.0
CONFLICT_PENALTY = 16.0
STEP_PENALTY = 0.05
DISTANCE_WEIGHT = 0.001

ONGOING, GOAL, CONFLICT, TIMEOUT = "ongoing", "goal", "conflict", "timeout"


class EpisodeDoneError(RuntimeError):
    """Raised when ``step`` is called on an episode that already ended."""


def reward_static(d_g: float, state_class: str, unit: float = 1.0) -> float:
    """Per-step reward. ``d_g`` is in meters and is divided by ``unit`` before weighting."""
    if state_class == GOAL:
        return GOAL_REWARD
    r = -DISTANCE_WEIGHT * (d_g / unit) - STEP_PENALTY
    if state_class == CONFLICT:
        r -= CONFLICT_PENALTY
    return r


def perturb_offset(u: float, phi: float, radius: float, prob: float) -> Vec2:
    """Position error for one uniform draw ``u`` and angle ``phi``.

    Zero with probability ``1 - prob``; otherwise a point on the circle of the
    given radius.
    """
    if u < 1.0 - prob:
        return Vec2(0.0, 0.0)
    return Vec2(radius * math.cos(phi), radius * math.sin(phi))


def perturb_position(nominal, rng: np.random.Generator, radius: float = 75.0, prob: float = 0.1) -> Vec2:
    u = rng.random()
    phi = 2.0 * math.pi * rng.random()
    off = perturb_offset(u, phi, radius, prob)
    return Vec2(nominal[0] + off.x, nominal[1] + off.y)


def _boundary_point(airspace, t: int) -> Vec2:
    """Point at integer arc length ``t`` along the perimeter, clockwise from the lower-left corner."""
    xmin, ymin, xmax, ymax = airspace
    w, h = xmax - xmin, ymax - ymin
    if t < h:
        return Vec2(xmin, ymin + t)
    t -= h
    if t < w:
        return Vec2(xmin + t, ymax)
    t -= w
    if t < h:
        return Vec2(xmax, ymax - t)
    t -= h
    return Vec2(xmax - t, ymin)


class StaticEnv:
    """Single agent flying at constant speed among fixed no-passing regions.

    Coordinates are meters. Observations are
    ``[d_g, v_x, v_y, (P_y, d_i) per obstacle]`` in the goal-aligned agent frame,
    scaled by the airspace diagonal (positions) and cruise speed (velocities)
    and clipped to [-1, 1].
    """

    kind = "static"

    def __init__(self, scenario: StaticScenario, rng: np.random.Generator | None = None):
        self.scenario = scenario
        self.rng = rng if rng is not None else np.random.default_rng()
        circles = [ob for ob in scenario.obstacles if isinstance(ob, Circle)]
        rects = [ob for ob in scenario.obstacles if isinstance(ob, Rectangle)]
        self._circles = np.array([(c.center.x, c.center.y, c.radius) for c in circles], dtype=float).reshape(-1, 3)
        self._rects = np.array(
            [(r.min_corner.x, r.min_corner.y, r.max_corner.x, r.max_corner.y) for r in rects], dtype=float
        ).reshape(-1, 4)
        centers = [ob.center if isinstance(ob, Circle) else ob.centroid for ob in scenario.obstacles]
        self._centers = np.array(centers, dtype=float).reshape(-1, 2)
        self.pos_scale = scenario.diagonal
        self.vel_scale = scenario.agent_speed
        self.obs_dim = 3 + 2 * len(scenario.obstacles)
        self.act_dim = 1
        self.max_steps = scenario.max_steps
        self.x = self.y = self.heading = 0.0
        self.speed = scenario.agent_speed
        self.steps = 0
        self.done = True
        self.outcome = None
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

    def clearance(self, x=None, y=None) -> float:
        """Distance to the nearest obstacle boundary (inf without obstacles)."""
        return kernels.static_clearance(self.x if x is None else x, self.y if y is None else y,
                                        self._circles, self._rects)

    def classify(self, x=None, y=None) -> str:
        x = self.x if x is None else x
        y = self.y if y is None else y
        g = self.scenario.goal
        if math.hypot(g.x - x, g.y - y) <= self.scenario.goal_radius:
            return GOAL
        if self.clearance(x, y) < self.scenario.separation:
            return CONFLICT
        return ONGOING

    def sample_origin(self, rng: np.random.Generator) -> Vec2:
        xmin, ymin, xmax, ymax = self.scenario.airspace
        perimeter = int(round(2 * ((xmax - xmin) + (ymax - ymin))))
        while True:
            p = _boundary_point(self.scenario.airspace, int(rng.integers(0, perimeter)))
            p = Vec2(float(round(p.x)), float(round(p.y)))
            if self.clearance(p.x, p.y) >= self.scenario.separation:
                return p

    def reset(self, rng: np.random.Generator | None = None, origin=None) -> np.ndarray:
        if rng is not None:
            self.rng = rng
        p = Vec2(*origin) if origin is not None else self.sample_origin(self.rng)
        self.x, self.y = float(p[0]), float(p[1])
        g = self.scenario.goal
        self.heading = math.atan2(g.y - self.y, g.x - self.x)
        self.speed = self.scenario.agent_speed
        self.steps = 0
        self.done = False
        self.outcome = None
        self.episode_reward = 0.0
        self._frame = 0.0
        self.obs = self.observe()
        return self.obs

    def observe(self) -> np.ndarray:
        out = np.empty(self.obs_dim)
        g = self.scenario.goal
        self._frame = kernels.static_observation(
            self.x, self.y, self.heading, self.speed, g.x, g.y, self._centers,
            self._frame, self.pos_scale, self.vel_scale, out,
        )
        return out

    def step(self, a_h: float):
        if self.done:
            raise EpisodeDoneError("step() called on a finished episode; call reset() first")
        sc = self.scenario
        self.heading = apply_heading_action(self.heading, float(a_h))
        nx = self.x + self.speed * DT * math.cos(self.heading)
        ny = self.y + self.speed * DT * math.sin(self.heading)
        if sc.uncertainty_enabled:
            nx, ny = perturb_position((nx, ny), self.rng, sc.uncertainty_radius, sc.uncertainty_prob)
        self.x, self.y = nx, ny
        self.steps += 1
        cls = self.classify()
        d_g = self.goal_distance()
        reward = reward_static(d_g, cls, sc.reward_distance_unit)
        outcome = cls if cls != ONGOING else None
        if outcome is None and self.steps >= self.max_steps:
            outcome = TIMEOUT
        self.done = outcome is not None
        self.outcome = outcome
        self.episode_reward += reward
        self.obs = self.observe()
        info = {"outcome": outcome, "state": cls, "d_g": d_g}
        return self.obs, reward, self.done, info
