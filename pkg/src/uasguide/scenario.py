"""Scenario files: JSON documents describing one environment, plus built-in presets.

Files are written in meters, meters per second and degrees. Static scenarios run
in meters. Moving scenarios run in world units of 10 m (one figure pixel), which is
the unit the intruder reward coefficients are expressed in, so lengths and speeds
are divided by :data:`WORLD_UNIT_M` on load.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .geometry import Vec2

SCHEMA_VERSION = 1
WORLD_UNIT_M = 10.0


class ScenarioError(ValueError):
    """Raised when a scenario document fails validation."""


_num = {"type": "number"}
_point = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_range_or_num = {"oneOf": [_num, _point]}

_COMMON = {
    "version": {"const": SCHEMA_VERSION},
    "kind": {"enum": ["static", "moving"]},
    "name": {"type": "string"},
    "goal": _point,
    "goal_radius_m": {"type": "number", "exclusiveMinimum": 0},
    "separation_m": {"type": "number", "minimum": 0},
    "agent_speed_mps": {"type": "number", "exclusiveMinimum": 0},
    "max_steps": {"type": "integer", "minimum": 1},
}

STATIC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "kind", "airspace", "goal"],
    "properties": {
        **_COMMON,
        "airspace": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
        "obstacles": {
            "type": "array",
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["shape", "center", "radius_m"],
                        "properties": {
                            "shape": {"const": "circle"},
                            "center": _point,
                            "radius_m": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["shape", "min_corner", "max_corner"],
                        "properties": {
                            "shape": {"const": "rectangle"},
                            "min_corner": _point,
                            "max_corner": _point,
                        },
                    },
                ]
            },
        },
        "uncertainty": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "radius_m": {"type": "number", "minimum": 0},
                "probability": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "reward_distance_unit_m": {"type": "number", "exclusiveMinimum": 0},
    },
}

MOVING_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "kind", "goal", "agent_origin", "intruders"],
    "properties": {
        **_COMMON,
        "agent_origin": {"type": "array", "items": _range_or_num, "minItems": 2, "maxItems": 2},
        "control_mode": {"enum": ["heading_only", "heading_and_speed"]},
        "max_speed_mps": {"type": "number", "exclusiveMinimum": 0},
        "bounds": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
        "conflict_penalty": {"type": "number", "minimum": 0},
        "coefficients": {
            "type": "object",
            "additionalProperties": False,
            "required": ["c_g", "c_0", "c1", "c2", "c3"],
            "properties": {
                "c_g": {"type": "number", "minimum": 0},
                "c_0": {"type": "number", "minimum": 0},
                "c1": {"oneOf": [{"type": "number", "minimum": 0},
                                 {"type": "array", "items": {"type": "number", "minimum": 0}}]},
                "c2": {"oneOf": [{"type": "number", "minimum": 0},
                                 {"type": "array", "items": {"type": "number", "minimum": 0}}]},
                "c3": {"oneOf": [{"type": "number", "minimum": 0},
                                 {"type": "array", "items": {"type": "number", "minimum": 0}}]},
            },
        },
        "intruders": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["origin", "heading_deg"],
                "properties": {
                    "origin": {"type": "array", "items": _range_or_num, "minItems": 2, "maxItems": 2},
                    "heading_deg": _range_or_num,
                    "speed_mps": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class Circle:
    center: Vec2
    radius: float


@dataclass(frozen=True)
class Rectangle:
    min_corner: Vec2
    max_corner: Vec2

    @property
    def centroid(self) -> Vec2:
        return Vec2((self.min_corner.x + self.max_corner.x) / 2, (self.min_corner.y + self.max_corner.y) / 2)


@dataclass
class StaticScenario:
    airspace: tuple  # (xmin, ymin, xmax, ymax), meters
    goal: Vec2
    obstacles: list = field(default_factory=list)
    agent_speed: float = 20.0
    separation: float = 0.0
    goal_radius: float = 400.0
    uncertainty_enabled: bool = False
    uncertainty_radius: float = 75.0
    uncertainty_prob: float = 0.1
    max_steps: int = 1000
    reward_distance_unit: float = 1.0
    name: str = ""
    source: dict | None = None

    kind = "static"

    def __post_init__(self):
        self.goal = Vec2(*self.goal)
        xmin, ymin, xmax, ymax = self.airspace
        if not (xmin < xmax and ymin < ymax):
            raise ScenarioError("airspace must satisfy xmin < xmax and ymin < ymax")
        if not (xmin <= self.goal.x <= xmax and ymin <= self.goal.y <= ymax):
            raise ScenarioError("goal must lie inside the airspace")
        if self.goal_radius <= 0 or self.separation < 0:
            raise ScenarioError("goal_radius must be > 0 and separation >= 0")
        if not 0.0 <= self.uncertainty_prob <= 1.0:
            raise ScenarioError("uncertainty probability must be in [0, 1]")
        for ob in self.obstacles:
            if isinstance(ob, Circle) and ob.radius <= 0:
                raise ScenarioError("circle radius must be positive")
            if isinstance(ob, Rectangle) and not (
                ob.min_corner.x < ob.max_corner.x and ob.min_corner.y < ob.max_corner.y
            ):
                raise ScenarioError("rectangle min_corner must be < max_corner componentwise")

    @property
    def diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.airspace
        return math.hypot(xmax - xmin, ymax - ymin)


@dataclass
class IntruderSpec:
    """Origin/heading either fixed or a uniform [lo, hi] range. World units, radians."""

    origin: tuple  # (x, y), each a float or a (lo, hi) pair
    heading: object  # float or (lo, hi)
    speed: float = 2.0

    def __post_init__(self):
        for part in (*self.origin, self.heading):
            if isinstance(part, (tuple, list)) and part[0] > part[1]:
                raise ScenarioError(f"range minimum exceeds maximum: {part}")
        if self.speed < 0:
            raise ScenarioError("intruder speed must be >= 0")


@dataclass
class MovingScenario:
    intruders: list
    agent_origin: tuple  # (x, y), each a float or a (lo, hi) pair
    goal: Vec2
    goal_radius: float = 20.0
    separation: float = 15.0
    control_mode: str = "heading_only"
    agent_speed: float = 2.0
    max_speed: float = 4.0
    c_g: float = 0.007
    c_0: float = 0.15
    c1: tuple = (17.0, 17.0, 17.0)
    c2: tuple = (0.1, 0.1, 0.1)
    c3: tuple = (12.0, 12.0, 12.0)
    conflict_penalty: float = 180.0
    bounds: tuple = (-50.0, -50.0, 250.0, 250.0)
    max_steps: int = 300
    name: str = ""
    source: dict | None = None

    kind = "moving"

    def __post_init__(self):
        self.goal = Vec2(*self.goal)
        n = len(self.intruders)
        for attr in ("c1", "c2", "c3"):
            v = getattr(self, attr)
            if isinstance(v, (int, float)):
                v = (float(v),) * n
            v = tuple(float(x) for x in v)
            if len(v) != n:
                raise ScenarioError(f"{attr} needs one entry per intruder")
            setattr(self, attr, v)
        if min((self.c_g, self.c_0, *self.c1, *self.c2, *self.c3), default=0.0) < 0:
            raise ScenarioError("reward coefficients must be nonnegative")
        if self.goal_radius <= 0:
            raise ScenarioError("goal_radius must be positive")
        if self.control_mode not in ("heading_only", "heading_and_speed"):
            raise ScenarioError(f"unknown control_mode {self.control_mode!r}")
        for part in self.agent_origin:
            if isinstance(part, (tuple, list)) and part[0] > part[1]:
                raise ScenarioError(f"range minimum exceeds maximum: {part}")

    @property
    def diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return math.hypot(xmax - xmin, ymax - ymin)


def _range(v, scale=1.0):
    if isinstance(v, (list, tuple)):
        return (v[0] * scale, v[1] * scale)
    return v * scale


def from_dict(doc: dict):
    """Validate a scenario document and build the matching scenario object."""
    kind = doc.get("kind") if isinstance(doc, dict) else None
    schema = STATIC_SCHEMA if kind == "static" else MOVING_SCHEMA if kind == "moving" else None
    if schema is None:
        raise ScenarioError("scenario document needs kind 'static' or 'moving'")
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {exc.message}") from None

    src = copy.deepcopy(doc)
    if kind == "static":
        obstacles = []
        for ob in doc.get("obstacles", []):
            if ob["shape"] == "circle":
                obstacles.append(Circle(Vec2(*ob["center"]), float(ob["radius_m"])))
            else:
                obstacles.append(Rectangle(Vec2(*ob["min_corner"]), Vec2(*ob["max_corner"])))
        unc = doc.get("uncertainty", {})
        return StaticScenario(
            airspace=tuple(float(v) for v in doc["airspace"]),
            goal=Vec2(*doc["goal"]),
            obstacles=obstacles,
            agent_speed=doc.get("agent_speed_mps", 20.0),
            separation=doc.get("separation_m", 0.0),
            goal_radius=doc.get("goal_radius_m", 400.0),
            uncertainty_enabled=unc.get("enabled", False),
            uncertainty_radius=unc.get("radius_m", 75.0),
            uncertainty_prob=unc.get("probability", 0.1),
            max_steps=doc.get("max_steps", 1000),
            reward_distance_unit=doc.get("reward_distance_unit_m", 1.0),
            name=doc.get("name", ""),
            source=src,
        )

    u = 1.0 / WORLD_UNIT_M
    d2r = math.pi / 180.0
    intruders = [
        IntruderSpec(
            origin=tuple(_range(c, u) for c in it["origin"]),
            heading=_range(it["heading_deg"], d2r),
            speed=it.get("speed_mps", 20.0) * u,
        )
        for it in doc["intruders"]
    ]
    co = doc.get("coefficients", {"c_g": 0.007, "c_0": 0.15, "c1": 17.0, "c2": 0.1, "c3": 12.0})
    return MovingScenario(
        intruders=intruders,
        agent_origin=tuple(_range(c, u) for c in doc["agent_origin"]),
        goal=Vec2(doc["goal"][0] * u, doc["goal"][1] * u),
        goal_radius=doc.get("goal_radius_m", 200.0) * u,
        separation=doc.get("separation_m", 150.0) * u,
        control_mode=doc.get("control_mode", "heading_only"),
        agent_speed=doc.get("agent_speed_mps", 20.0) * u,
        max_speed=doc.get("max_speed_mps", 40.0) * u,
        c_g=co["c_g"],
        c_0=co["c_0"],
        c1=co["c1"],
        c2=co["c2"],
        c3=co["c3"],
        conflict_penalty=doc.get("conflict_penalty", 180.0),
        bounds=tuple(v * u for v in doc.get("bounds", [-500.0, -500.0, 2500.0, 2500.0])),
        max_steps=doc.get("max_steps", 300),
        name=doc.get("name", ""),
        source=src,
    )


def load(path) -> StaticScenario | MovingScenario:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(doc)


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def fingerprint(scenario) -> str:
    """Content hash of the scenario document; identifies the environment a policy was trained on."""
    if scenario.source is None:
        raise ScenarioError("scenario has no source document to fingerprint")
    return hashlib.sha256(canonical_json(scenario.source).encode()).hexdigest()


def _circle(x, y, r):
    return {"shape": "circle", "center": [x, y], "radius_m": r}


def _square(x, y, half):
    return {"shape": "rectangle", "min_corner": [x - half, y - half], "max_corner": [x + half, y + half]}


_STATIC_BASE = {
    "version": SCHEMA_VERSION,
    "kind": "static",
    "airspace": [0, 0, 4000, 4000],
    "goal": [2500, 2500],
    "goal_radius_m": 400,
    "separation_m": 0,
    "agent_speed_mps": 20,
    "max_steps": 1000,
    "reward_distance_unit_m": 10,
}

_DEFAULT_CENTERS = [(1000, 1000), (1000, 3000), (3000, 1200)]

PRESETS = {
    "static-circle": {
        **_STATIC_BASE,
        "name": "static-circle",
        "obstacles": [_circle(1500, 1500, 300)],
    },
    "static-circles": {
        **_STATIC_BASE,
        "name": "static-circles",
        "obstacles": [_circle(x, y, 300) for x, y in _DEFAULT_CENTERS],
    },
    "static-rects": {
        **_STATIC_BASE,
        "name": "static-rects",
        "obstacles": [_square(x, y, 300) for x, y in _DEFAULT_CENTERS],
    },
    "static-circles-uncertain": {
        **_STATIC_BASE,
        "name": "static-circles-uncertain",
        "separation_m": 75,
        "obstacles": [_circle(x, y, 300) for x, y in _DEFAULT_CENTERS],
        "uncertainty": {"enabled": True, "radius_m": 75, "probability": 0.1},
    },
    "stochastic-intruders": {
        "version": SCHEMA_VERSION,
        "kind": "moving",
        "name": "stochastic-intruders",
        "control_mode": "heading_only",
        "agent_origin": [[750, 1350], [0, 250]],
        "goal": [1000, 2000],
        "goal_radius_m": 200,
        "separation_m": 150,
        "agent_speed_mps": 20,
        "max_speed_mps": 20,
        "max_steps": 300,
        "coefficients": {"c_g": 0.007, "c_0": 0.15, "c1": 17, "c2": 0.1, "c3": 12},
        "intruders": [
            {"origin": [[50, 350], 2000], "heading_deg": [-90, 0], "speed_mps": 20},
            {"origin": [[200, 650], [200, 650]], "heading_deg": [0, 90], "speed_mps": 20},
            {"origin": [[1200, 1800], [1200, 1800]], "heading_deg": [-180, -90], "speed_mps": 20},
        ],
    },
    "deterministic-intruders": {
        "version": SCHEMA_VERSION,
        "kind": "moving",
        "name": "deterministic-intruders",
        "control_mode": "heading_and_speed",
        "agent_origin": [1000, 2100],
        "goal": [1000, 0],
        "goal_radius_m": 200,
        "separation_m": 150,
        "agent_speed_mps": 20,
        "max_speed_mps": 40,
        "max_steps": 300,
        "coefficients": {"c_g": 0.22, "c_0": 0.05, "c1": 3, "c2": 0.1, "c3": 12},
        "intruders": [
            {"origin": [900, 1700], "heading_deg": -90, "speed_mps": 20},
            {"origin": [350, 1550], "heading_deg": -0.2, "speed_mps": 20},
            {"origin": [-150, 1150], "heading_deg": -0.2, "speed_mps": 20},
        ],
    },
}


def preset(name: str) -> dict:
    """Return a fresh copy of a built-in scenario document."""
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
