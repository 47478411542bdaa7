"""On-policy rollouts, advantage estimation and the clipped PPO update."""

from __future__ import annotations

import csv
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .envs import make_env
from .policy import (
    LossSpec,
    MlpParams,
    forward_actor,
    forward_critic,
    init_params,
    log_prob,
    ppo_loss_and_grad,
    sample_raw,
    save_checkpoint,
    to_physical,
)
from .scenario import fingerprint

log = logging.getLogger(__name__)

CURVE_COLUMNS = (
    "env_steps",
    "episodes",
    "episode_reward_mean",
    "episode_length_mean",
    "clip_fraction",
    "actor_loss",
    "critic_loss",
)


class NonFiniteLossError(FloatingPointError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class TrainConfig:
    total_steps: int = 1_000_000
    horizon: int = 2048
    minibatch_size: int = 64
    epochs_per_update: int = 10
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    ent_coef: float = 0.0
    vf_coef: float = 0.5
    learning_rate: float = 3e-4
    max_grad_norm: float = 0.5
    num_envs: int = 8
    reward_scale: float = 1.0
    advantage_mode: str = "gae"
    normalize_advantages: bool = True
    checkpoint_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must be in [0, 1]")
        if self.clip <= 0:
            raise ValueError("clip must be > 0")
        if self.advantage_mode not in ("gae", "literal"):
            raise ValueError("advantage_mode must be 'gae' or 'literal'")
        for name in ("total_steps", "horizon", "minibatch_size", "epochs_per_update", "num_envs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.horizon % self.num_envs:
            raise ValueError("horizon must be divisible by num_envs")
        if self.minibatch_size > self.horizon:
            raise ValueError("minibatch_size cannot exceed horizon")
        if self.learning_rate < 0 or self.max_grad_norm <= 0 or self.reward_scale <= 0:
            raise ValueError("learning_rate >= 0, max_grad_norm > 0 and reward_scale > 0 required")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    raw_actions: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    logp_old: np.ndarray
    dones: np.ndarray
    bootstrap_value: float
    episode_returns: list = field(default_factory=list)
    episode_lengths: list = field(default_factory=list)

    def __len__(self):
        return len(self.rewards)


def collect_rollout(env, params: MlpParams, horizon: int, rng: np.random.Generator) -> RolloutBuffer:
    """Run the stochastic policy for ``horizon`` steps, resetting the env whenever an episode ends.

    The env keeps its state between calls, so consecutive rollouts continue the
    same episode stream.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    obs_buf = np.empty((horizon, env.obs_dim))
    act_buf = np.empty((horizon, env.act_dim))
    rew = np.empty(horizon)
    val = np.empty(horizon)
    logp = np.empty(horizon)
    done_buf = np.zeros(horizon, dtype=bool)
    ep_returns, ep_lengths = [], []
    if env.done:
        env.reset(rng)
    obs = env.obs
    for t in range(horizon):
        dist = forward_actor(params, obs)
        raw = sample_raw(dist, rng)
        obs_buf[t] = obs
        act_buf[t] = raw
        val[t] = forward_critic(params, obs)
        logp[t] = log_prob(dist, raw)
        obs, r, done, _ = env.step(*to_physical(raw))
        rew[t] = r
        if done:
            done_buf[t] = True
            ep_returns.append(env.episode_reward)
            ep_lengths.append(env.steps)
            obs = env.reset(rng)
    return RolloutBuffer(obs_buf, act_buf, rew, val, logp, done_buf,
                         forward_critic(params, obs), ep_returns, ep_lengths)


def compute_returns_advantages(buf: RolloutBuffer, gamma: float, lam: float, mode: str = "gae",
                               normalize: bool = False, reward_scale: float = 1.0):
    """Return ``(returns, advantages)``.

    ``mode="gae"`` uses generalized advantage estimation and sets
    ``returns = advantages + values``. ``mode="literal"`` uses the discounted
    reward-to-go (bootstrapped at the horizon) and ``advantages = returns - values``.
    """
    T = len(buf)
    rewards = buf.rewards * reward_scale
    nonterminal = 1.0 - buf.dones.astype(np.float64)
    next_values = np.append(buf.values[1:], buf.bootstrap_value)
    adv = np.empty(T)
    ret = np.empty(T)
    if mode == "gae":
        last = 0.0
        for t in range(T - 1, -1, -1):
            delta = rewards[t] + gamma * next_values[t] * nonterminal[t] - buf.values[t]
            last = delta + gamma * lam * nonterminal[t] * last
            adv[t] = last
        ret[:] = adv + buf.values
    elif mode == "literal":
        running = buf.bootstrap_value
        for t in range(T - 1, -1, -1):
            running = rewards[t] + gamma * nonterminal[t] * running
            ret[t] = running
        adv[:] = ret - buf.values
    else:
        raise ValueError(f"unknown advantage mode {mode!r}")
    if normalize:
        adv = normalize_advantages(adv)
    return ret, adv


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + 1e-8)


class Adam:
    def __init__(self, size: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-5):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        theta -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def ppo_losses(params: MlpParams, minibatch: dict, clip: float = 0.2, ent_coef: float = 0.0):
    """``(actor_loss, critic_loss, diagnostics)`` for one minibatch."""
    a, c, diag, _ = ppo_loss_and_grad(params, minibatch, LossSpec(clip, ent_coef), need_grad=False)
    return a, c, diag


def update(params: MlpParams, batch: dict, config: TrainConfig, optimizer: Adam | None = None,
           rng: np.random.Generator | None = None) -> dict:
    """Several epochs of shuffled minibatch Adam steps, in place. Returns averaged diagnostics."""
    n = len(batch["returns"])
    if n < config.minibatch_size:
        raise ValueError("batch is smaller than minibatch_size")
    optimizer = optimizer or Adam(params.size, config.learning_rate)
    rng = rng or np.random.default_rng(config.seed)
    spec = LossSpec(config.clip, config.ent_coef, config.vf_coef)
    sums: dict[str, float] = {}
    count = 0
    for _ in range(config.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch_size):
            idx = order[start:start + config.minibatch_size]
            mb = {k: v[idx] for k, v in batch.items()}
            actor_loss, critic_loss, diag, grad = ppo_loss_and_grad(params, mb, spec)
            if not (math.isfinite(actor_loss) and math.isfinite(critic_loss) and np.all(np.isfinite(grad))):
                raise NonFiniteLossError("non-finite loss or gradient during update", diag)
            norm = float(np.sqrt(grad @ grad))
            if norm > config.max_grad_norm:
                grad *= config.max_grad_norm / norm
            optimizer.step(params.flat, grad)
            for k, v in diag.items():
                sums[k] = sums.get(k, 0.0) + v
            count += 1
    return {k: v / count for k, v in sums.items()}


@dataclass
class _Worker:
    """One environment instance and its private random stream."""

    env: object
    rng: np.random.Generator


def _collect_segment(worker: _Worker, params: MlpParams, steps: int):
    buf = collect_rollout(worker.env, params, steps, worker.rng)
    return worker, buf


def train(scenario, config: TrainConfig, out_dir=None, workers: int = 1, progress=None):
    """Alternate rollout collection and PPO updates until ``total_steps`` env steps are consumed.

    Returns ``(params, records)`` where each record is a dict keyed by
    :data:`CURVE_COLUMNS`. With ``out_dir`` set, the learning curve is appended
    to ``curve.csv`` after every update and ``checkpoint.json`` is refreshed
    every ``checkpoint_every`` updates, at the end, and on any exception.

    The rollout is split across ``config.num_envs`` environments with
    independent seed streams. ``workers`` only decides how many processes step
    them, so the numbers do not depend on it.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(config.num_envs + 2)
    init_rng = np.random.default_rng(seeds[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    envs = [_Worker(make_env(scenario), np.random.default_rng(s)) for s in seeds[2:]]
    params = init_params(envs[0].env.obs_dim, envs[0].env.act_dim, init_rng)
    optimizer = Adam(params.size, config.learning_rate)
    fp = fingerprint(scenario) if scenario.source is not None else None
    norm = {"pos_scale": envs[0].env.pos_scale, "vel_scale": envs[0].env.vel_scale}

    out = Path(out_dir) if out_dir is not None else None
    curve_path = ckpt_path = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        curve_path = out / "curve.csv"
        ckpt_path = out / "checkpoint.json"
        with open(curve_path, "w", newline="") as fh:
            csv.writer(fh).writerow(CURVE_COLUMNS)

    def flush():
        if ckpt_path is not None:
            save_checkpoint(ckpt_path, params, scenario_doc=scenario.source, fingerprint=fp,
                            normalization=norm, extra={"train_config": asdict(config)})

    n_updates = math.ceil(config.total_steps / config.horizon)
    seg = config.horizon // config.num_envs
    recent_r: deque = deque(maxlen=100)
    recent_l: deque = deque(maxlen=100)
    episodes = 0
    records = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for k in range(n_updates):
            if pool is None:
                results = [_collect_segment(w, params, seg) for w in envs]
            else:
                results = list(pool.map(_collect_segment, envs, [params] * len(envs), [seg] * len(envs)))
            envs = [w for w, _ in results]
            parts = []
            for _, buf in results:
                ret, adv = compute_returns_advantages(buf, config.gamma, config.lam, config.advantage_mode,
                                                      normalize=False, reward_scale=config.reward_scale)
                parts.append((buf, ret, adv))
                recent_r.extend(buf.episode_returns)
                recent_l.extend(buf.episode_lengths)
                episodes += len(buf.episode_returns)
            adv = np.concatenate([p[2] for p in parts])
            if config.normalize_advantages:
                adv = normalize_advantages(adv)
            batch = {
                "obs": np.concatenate([p[0].obs for p in parts]),
                "raw_actions": np.concatenate([p[0].raw_actions for p in parts]),
                "logp_old": np.concatenate([p[0].logp_old for p in parts]),
                "returns": np.concatenate([p[1] for p in parts]),
                "advantages": adv,
            }
            diag = update(params, batch, config, optimizer, shuffle_rng)
            rec = {
                "env_steps": (k + 1) * config.horizon,
                "episodes": episodes,
                "episode_reward_mean": float(np.mean(recent_r)) if recent_r else float("nan"),
                "episode_length_mean": float(np.mean(recent_l)) if recent_l else float("nan"),
                "clip_fraction": diag["clip_fraction"],
                "actor_loss": diag["actor_loss"],
                "critic_loss": diag["critic_loss"],
            }
            records.append(rec)
            if curve_path is not None:
                with open(curve_path, "a", newline="") as fh:
                    csv.writer(fh).writerow([_fmt(rec[c]) for c in CURVE_COLUMNS])
            if progress is not None:
                progress(rec)
            if ckpt_path is not None and config.checkpoint_every and (k + 1) % config.checkpoint_every == 0:
                flush()
    finally:
        if pool is not None:
            pool.shutdown()
        flush()
    return params, records


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)
