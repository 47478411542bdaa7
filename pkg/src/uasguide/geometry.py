"""2D vectors, rotations, the goal-aligned agent frame and point-mass kinematics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

MAX_HEADING_CHANGE = math.pi / 6  # 30 degrees per step
DT = 1.0  # seconds per environment tick


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def __mul__(self, s):  # type: ignore[override]
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def angle(self) -> float:
        return math.atan2(self.y, self.x)


@dataclass
class Pose:
    position: Vec2
    heading: float
    speed: float

    def __post_init__(self):
        self.position = Vec2(*self.position)
        self.heading = wrap_angle(self.heading)
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")

    @property
    def velocity(self) -> Vec2:
        return Vec2(self.speed * math.cos(self.heading), self.speed * math.sin(self.heading))


def wrap_angle(a: float) -> float:
    """Wrap an angle in radians into (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


def rotate(p, angle: float) -> Vec2:
    """Rotate ``p`` counterclockwise by ``angle`` radians."""
    c, s = math.cos(angle), math.sin(angle)
    return Vec2(c * p[0] - s * p[1], s * p[0] + c * p[1])


def frame_angle(agent_pos, goal_pos, fallback: float = 0.0) -> float:
    """Angle of the agent->goal direction, or ``fallback`` when they coincide."""
    dx, dy = goal_pos[0] - agent_pos[0], goal_pos[1] - agent_pos[1]
    if dx == 0.0 and dy == 0.0:
        return fallback
    return math.atan2(dy, dx)


def to_robot_frame(agent_pos, goal_pos, world_point, is_velocity: bool = False,
                   fallback_angle: float = 0.0) -> Vec2:
    """Express ``world_point`` in the frame centred on the agent with +x toward the goal.

    Velocities are only rotated. When the agent sits exactly on the goal the frame
    is undefined and ``fallback_angle`` (the previous frame, or 0 for the world
    frame) is used instead.
    """
    theta = frame_angle(agent_pos, goal_pos, fallback_angle)
    if is_velocity:
        return rotate(world_point, -theta)
    return rotate((world_point[0] - agent_pos[0], world_point[1] - agent_pos[1]), -theta)


def apply_heading_action(heading: float, a_h: float) -> float:
    a_h = min(max(a_h, -MAX_HEADING_CHANGE), MAX_HEADING_CHANGE)
    return wrap_angle(heading + a_h)


def step_kinematics(pose: Pose, dt: float = DT) -> Vec2:
    if dt <= 0:
        raise ValueError("dt must be positive")
    px, py = pose.position
    return Vec2(px + pose.speed * dt * math.cos(pose.heading),
                py + pose.speed * dt * math.sin(pose.heading))
