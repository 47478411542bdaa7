"""Test protocols: boundary-origin sweeps for static airspaces, seeded episode sweeps for intruders."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .env_static import GOAL, TIMEOUT
from .envs import make_env
from .geometry import MAX_HEADING_CHANGE
from .policy import to_physical
from .scenario import WORLD_UNIT_M

SUCCESS, CONFLICT_OUTCOME = "success", "conflict"

REPORT_COLUMNS = ("episode_id", "origin_x_m", "origin_y_m", "outcome", "steps", "min_distance_m")
TRAJECTORY_COLUMNS = ("episode_id", "t", "x_m", "y_m", "heading_deg", "speed_mps")


class FingerprintMismatch(ValueError):
    """The policy was trained on a different scenario than the one being evaluated."""


@dataclass
class EpisodeRecord:
    episode_id: int
    origin: tuple  # meters
    outcome: str
    steps: int
    min_distance: float | None  # meters; None for static airspaces
    trajectory: list = field(default_factory=list)  # (t, x_m, y_m, heading_deg, speed_mps)

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS


@dataclass
class EvalReport:
    kind: str
    episodes: list

    @property
    def success_rate(self) -> float:
        if not self.episodes:
            return float("nan")
        return sum(e.success for e in self.episodes) / len(self.episodes)

    @property
    def failures(self) -> list:
        return [e for e in self.episodes if not e.success]


def boundary_origins(airspace, spacing: float) -> list:
    """Points every ``spacing`` along the airspace edge, clockwise from the lower-left corner.

    Each corner appears once, so a 4000 m square at 100 m gives 160 points.
    """
    xmin, ymin, xmax, ymax = airspace
    w, h = xmax - xmin, ymax - ymin
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    nw, nh = w / spacing, h / spacing
    if abs(nw - round(nw)) > 1e-9 or abs(nh - round(nh)) > 1e-9:
        raise ValueError(f"spacing {spacing} does not divide the edge lengths {w} x {h}")
    nw, nh = int(round(nw)), int(round(nh))
    pts = []
    pts += [(xmin, ymin + i * spacing) for i in range(nh)]  # left edge, going up
    pts += [(xmin + i * spacing, ymax) for i in range(nw)]  # top edge, going right
    pts += [(xmax, ymax - i * spacing) for i in range(nh)]  # right edge, going down
    pts += [(xmax - i * spacing, ymin) for i in range(nw)]  # bottom edge, going left
    return [(float(x), float(y)) for x, y in pts]


class StraightToGoalPolicy:
    """Scripted baseline: turn (within the per-step limit) to face the goal.

    With ``act_dim=2`` it also commands the normalized speed ``speed`` (0 is 20 m/s).
    """

    def __init__(self, act_dim: int = 1, speed: float = 0.0):
        self.act_dim = act_dim
        self.speed = speed

    def act(self, obs, rng=None, deterministic=True):
        # obs[1:3] is the velocity in the goal-aligned frame, so its angle is the heading error.
        rel = math.atan2(obs[2], obs[1])
        turn = max(-1.0, min(1.0, -rel / MAX_HEADING_CHANGE))
        return np.array([turn, self.speed][:self.act_dim])


class ConstantPolicy:
    """Always issues the same normalized action (e.g. ``[0, -1]`` holds course at zero speed)."""

    def __init__(self, raw):
        self.raw = np.asarray(raw, dtype=np.float64)

    def act(self, obs, rng=None, deterministic=True):
        return self.raw.copy()


def _unit_scale(env) -> float:
    return 1.0 if env.kind == "static" else WORLD_UNIT_M


def _snapshot(env, scale):
    return (env.steps, env.x * scale, env.y * scale, math.degrees(env.heading), env.speed * scale)


def run_episode(env, policy, deterministic: bool = True, rng: np.random.Generator | None = None,
                origin=None, episode_id: int = 0) -> EpisodeRecord:
    """Roll ``policy`` out until goal, conflict (static only) or the step cap."""
    env_fp = getattr(env, "fingerprint", None) if getattr(env.scenario, "source", None) else None
    pol_fp = getattr(policy, "fingerprint", None)
    if pol_fp is not None and env_fp is not None and pol_fp != env_fp:
        raise FingerprintMismatch("checkpoint was trained on a different scenario")
    rng = rng if rng is not None else np.random.default_rng(0)
    if env.kind == "static":
        obs = env.reset(rng, origin=origin)
    else:
        obs = env.reset(rng)
    scale = _unit_scale(env)
    origin_m = (env.x * scale, env.y * scale)
    traj = [_snapshot(env, scale)]
    min_d = env.min_distance if env.kind == "moving" else None
    done = False
    while not done:
        raw = policy.act(obs, rng, deterministic)
        obs, _, done, info = env.step(*to_physical(raw))
        traj.append(_snapshot(env, scale))
        if min_d is not None and info["min_distance"] < min_d:
            min_d = info["min_distance"]
    if env.outcome == GOAL:
        outcome = SUCCESS
    elif env.outcome == TIMEOUT:
        outcome = TIMEOUT
    else:
        outcome = CONFLICT_OUTCOME
    if env.kind == "moving" and outcome == SUCCESS and min_d < env.scenario.separation:
        outcome = CONFLICT_OUTCOME
    return EpisodeRecord(episode_id, origin_m, outcome, env.steps,
                         None if min_d is None else min_d * scale, traj)


def evaluate_static(policy, scenario, spacing: float = 100.0, seed: int = 0,
                    deterministic: bool = True) -> EvalReport:
    """Run one episode from every boundary origin."""
    env = make_env(scenario)
    rng = np.random.default_rng(seed)
    rows = [
        run_episode(env, policy, deterministic, rng, origin=o, episode_id=i)
        for i, o in enumerate(boundary_origins(scenario.airspace, spacing))
    ]
    return EvalReport("static", rows)


def evaluate_moving(policy, scenario, episodes: int = 500, seed: int = 0,
                    deterministic: bool = True) -> EvalReport:
    """Run ``episodes`` independently seeded episodes and record each one's closest approach."""
    env = make_env(scenario)
    seqs = np.random.SeedSequence(seed).spawn(episodes)
    rows = [
        run_episode(env, policy, deterministic, np.random.default_rng(s), episode_id=i)
        for i, s in enumerate(seqs)
    ]
    return EvalReport("moving", rows)


def evaluate(policy, scenario, episodes: int = 500, seed: int = 0) -> EvalReport:
    if scenario.kind == "static":
        return evaluate_static(policy, scenario, seed=seed)
    return evaluate_moving(policy, scenario, episodes, seed=seed)


def write_report(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for e in report.episodes:
            w.writerow([e.episode_id, repr(float(e.origin[0])), repr(float(e.origin[1])), e.outcome, e.steps,
                        "" if e.min_distance is None else repr(float(e.min_distance))])


def write_trajectories(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for e in report.episodes:
            for t, x, y, hd, sp in e.trajectory:
                w.writerow([e.episode_id, t, repr(float(x)), repr(float(y)), repr(float(hd)), repr(float(sp))])


class CsvFormatError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def _read_rows(path, columns):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(path, 1, "empty file") from None
        if tuple(header) != tuple(columns):
            raise CsvFormatError(path, 1, f"expected header {','.join(columns)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise CsvFormatError(path, lineno, f"expected {len(columns)} fields, got {len(row)}")
            yield lineno, row


def read_report(path, trajectories_path=None) -> EvalReport:
    """Load a report CSV (and optionally its trajectory CSV) back into an :class:`EvalReport`."""
    rows = []
    for lineno, r in _read_rows(path, REPORT_COLUMNS):
        try:
            rows.append(EpisodeRecord(int(r[0]), (float(r[1]), float(r[2])), r[3], int(r[4]),
                                      float(r[5]) if r[5] else None))
        except ValueError as exc:
            raise CsvFormatError(path, lineno, str(exc)) from None
        if r[3] not in (SUCCESS, CONFLICT_OUTCOME, TIMEOUT):
            raise CsvFormatError(path, lineno, f"unknown outcome {r[3]!r}")
    by_id = {e.episode_id: e for e in rows}
    if trajectories_path is not None:
        for lineno, r in _read_rows(trajectories_path, TRAJECTORY_COLUMNS):
            try:
                eid = int(r[0])
                by_id[eid].trajectory.append((int(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5])))
            except (ValueError, KeyError) as exc:
                raise CsvFormatError(trajectories_path, lineno, f"bad row ({exc})") from None
    kind = "moving" if rows and rows[0].min_distance is not None else "static"
    return EvalReport(kind, rows)
