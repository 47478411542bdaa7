"""Actor and critic MLPs (two tanh layers of 64 units) with a diagonal Gaussian head.

All parameters live in one flat float64 vector; the per-layer weight matrices
and bias vectors are views into it, so optimizers and finite-difference checks
can treat the network as a single array.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .geometry import MAX_HEADING_CHANGE

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
HALF_LOG_2PIE = 0.5 * math.log(2.0 * math.pi * math.e)
MAX_SPEED_MPS = 40.0

CHECKPOINT_FORMAT = "uasguide-checkpoint"
CHECKPOINT_VERSION = 1


class MlpParams:
    """Weights of the actor (obs -> mean) and critic (obs -> value) plus the policy log-std."""

    def __init__(self, obs_dim: int, act_dim: int, hidden=(64, 64), flat: np.ndarray | None = None):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self._layout = []  # (name, shape)
        for net, out in (("actor", self.act_dim), ("critic", 1)):
            sizes = (self.obs_dim, *self.hidden, out)
            for i in range(len(sizes) - 1):
                self._layout.append((f"{net}.W{i + 1}", (sizes[i + 1], sizes[i])))
                self._layout.append((f"{net}.b{i + 1}", (sizes[i + 1],)))
        self._layout.append(("log_std", (self.act_dim,)))
        self.size = sum(math.prod(s) for _, s in self._layout)
        if flat is None:
            flat = np.zeros(self.size)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {flat.shape}")
        self.flat = flat
        self.views = self.unflatten(self.flat)
        n = len(self.hidden) + 1
        self.actor = [(self.views[f"actor.W{i}"], self.views[f"actor.b{i}"]) for i in range(1, n + 1)]
        self.critic = [(self.views[f"critic.W{i}"], self.views[f"critic.b{i}"]) for i in range(1, n + 1)]
        self.log_std = self.views["log_std"]
        # contiguous per-network slices for the single-observation kernel
        n_actor = sum(math.prod(s) for name, s in self._layout if name.startswith("actor"))
        n_critic = sum(math.prod(s) for name, s in self._layout if name.startswith("critic"))
        self.actor_flat = self.flat[:n_actor]
        self.critic_flat = self.flat[n_actor:n_actor + n_critic]

    def unflatten(self, vec: np.ndarray) -> dict:
        """Named views into a vector laid out like ``flat``."""
        out, k = {}, 0
        for name, shape in self._layout:
            n = math.prod(shape)
            out[name] = vec[k:k + n].reshape(shape)
            k += n
        return out

    def copy(self) -> MlpParams:
        return MlpParams(self.obs_dim, self.act_dim, self.hidden, self.flat.copy())

    def __getstate__(self):
        return {"obs_dim": self.obs_dim, "act_dim": self.act_dim, "hidden": self.hidden, "flat": self.flat}

    def __setstate__(self, state):
        self.__init__(state["obs_dim"], state["act_dim"], state["hidden"], state["flat"])


def _orthogonal(rng: np.random.Generator, shape, gain: float) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_params(obs_dim: int, act_dim: int, rng: np.random.Generator, hidden=(64, 64)) -> MlpParams:
    """Orthogonal init: gain sqrt(2) on hidden layers, 0.01 on the mean head, 1 on the value head."""
    p = MlpParams(obs_dim, act_dim, hidden)
    for layers, head_gain in ((p.actor, 0.01), (p.critic, 1.0)):
        for i, (W, b) in enumerate(layers):
            gain = head_gain if i == len(layers) - 1 else math.sqrt(2.0)
            W[...] = _orthogonal(rng, W.shape, gain)
            b[...] = 0.0
    p.log_std[...] = 0.0
    return p


@dataclass
class ActionDistribution:
    mean: np.ndarray
    log_std: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


def _check_obs(params: MlpParams, obs: np.ndarray):
    if obs.shape[-1] != params.obs_dim:
        raise ValueError(f"observation has {obs.shape[-1]} features, network expects {params.obs_dim}")


def clamped_log_std(params: MlpParams) -> np.ndarray:
    return np.clip(params.log_std, LOG_STD_MIN, LOG_STD_MAX)


def forward_actor(params: MlpParams, obs) -> ActionDistribution:
    obs = np.asarray(obs, dtype=np.float64)
    _check_obs(params, obs)
    if obs.ndim == 1 and len(params.hidden) == 2:
        mean = kernels.mlp_forward(np.ascontiguousarray(obs), params.actor_flat, *params.hidden, params.act_dim)
    elif obs.ndim == 1:
        mean = _mlp_batch(params.actor, obs[None])[0][0]
    else:
        mean = _mlp_batch(params.actor, obs)[0]
    return ActionDistribution(mean, clamped_log_std(params))


def forward_critic(params: MlpParams, obs):
    obs = np.asarray(obs, dtype=np.float64)
    _check_obs(params, obs)
    if obs.ndim == 1 and len(params.hidden) == 2:
        return float(kernels.mlp_forward(np.ascontiguousarray(obs), params.critic_flat, *params.hidden, 1)[0])
    if obs.ndim == 1:
        return float(_mlp_batch(params.critic, obs[None])[0][0, 0])
    return _mlp_batch(params.critic, obs)[0][:, 0]


def _mlp_batch(layers, X):
    """Batched forward pass; returns (output, activations kept for backprop)."""
    acts = [X]
    h = X
    for i, (W, b) in enumerate(layers):
        z = h @ W.T + b
        h = z if i == len(layers) - 1 else np.tanh(z)
        acts.append(h)
    return h, acts


def _mlp_backward(layers, acts, grad_out, grads):
    """Accumulate d(loss)/d(params) into ``grads`` (list of (dW, db) views) given d(loss)/d(output)."""
    g = grad_out
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        dW, db = grads[i]
        dW += g.T @ acts[i]
        db += g.sum(axis=0)
        if i > 0:
            g = (g @ W) * (1.0 - acts[i] ** 2)


def log_prob(dist: ActionDistribution, raw_action) -> np.ndarray | float:
    """Diagonal Gaussian log density, summed over action dimensions."""
    a = np.asarray(raw_action, dtype=np.float64)
    z = (a - dist.mean) / np.exp(dist.log_std)
    lp = -0.5 * z * z - dist.log_std - HALF_LOG_2PI
    out = lp.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def entropy(dist: ActionDistribution) -> float:
    return float(np.sum(dist.log_std + HALF_LOG_2PIE))


def sample_raw(dist: ActionDistribution, rng: np.random.Generator, deterministic: bool = False) -> np.ndarray:
    """Unclamped draw in normalized action space (the value stored for ratio computations)."""
    if deterministic:
        return np.array(dist.mean, dtype=np.float64, copy=True)
    return dist.mean + np.exp(dist.log_std) * rng.standard_normal(dist.mean.shape)


def to_physical(raw) -> tuple:
    """Map a normalized action to commands: heading change in radians, then speed in m/s if present."""
    u0 = min(max(float(raw[0]), -1.0), 1.0)
    cmd = [u0 * MAX_HEADING_CHANGE]
    if len(raw) > 1:
        u1 = min(max(float(raw[1]), -1.0), 1.0)
        cmd.append((u1 + 1.0) * 0.5 * MAX_SPEED_MPS)
    return tuple(cmd)


def sample_action(dist: ActionDistribution, rng: np.random.Generator, deterministic: bool = False):
    """Return ``(physical_command, raw_sample)``."""
    raw = sample_raw(dist, rng, deterministic)
    return to_physical(raw), raw


def clipped_surrogate(ratio, adv, clip: float):
    """Per-sample ``min(r * A, clip(r, 1 - eps, 1 + eps) * A)``."""
    ratio = np.asarray(ratio, dtype=np.float64)
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv)


@dataclass
class LossSpec:
    clip: float = 0.2
    ent_coef: float = 0.0
    vf_coef: float = 0.5


def ppo_loss_and_grad(params: MlpParams, batch: dict, spec: LossSpec, need_grad: bool = True):
    """Clipped-surrogate actor loss, squared-error critic loss and their exact gradients.

    ``batch`` holds ``obs``, ``raw_actions``, ``logp_old``, ``advantages`` and
    ``returns``. The returned gradient is for ``actor_loss + vf_coef * critic_loss``
    with the same layout as ``params.flat``.
    """
    X = batch["obs"]
    A = batch["advantages"]
    R = batch["returns"]
    acts_raw = batch["raw_actions"]
    B = X.shape[0]
    eps = spec.clip

    mean, a_acts = _mlp_batch(params.actor, X)
    ls_raw = params.log_std
    ls = np.clip(ls_raw, LOG_STD_MIN, LOG_STD_MAX)
    inv_var = np.exp(-2.0 * ls)
    diff = acts_raw - mean
    logp = (-0.5 * diff * diff * inv_var - ls - HALF_LOG_2PI).sum(axis=1)
    ratio = np.exp(logp - batch["logp_old"])
    unclipped_obj = ratio * A
    clipped_obj = np.clip(ratio, 1.0 - eps, 1.0 + eps) * A
    surr = clipped_surrogate(ratio, A, eps)
    ent = float(np.sum(ls + HALF_LOG_2PIE))
    actor_loss = -surr.mean() - spec.ent_coef * ent

    value, c_acts = _mlp_batch(params.critic, X)
    v = value[:, 0]
    resid = R - v
    critic_loss = float(np.mean(resid * resid))

    log_ratio = logp - batch["logp_old"]
    diag = {
        "actor_loss": float(actor_loss),
        "critic_loss": critic_loss,
        "entropy": ent,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > eps)),
        "approx_kl": float(np.mean((ratio - 1.0) - log_ratio)),
    }
    if not need_grad:
        return actor_loss, critic_loss, diag, None

    grad = np.zeros(params.size)
    gv = params.unflatten(grad)
    n = len(params.hidden) + 1
    # min() follows the unclipped branch when it is the smaller (or equal) one.
    d_ratio = np.where(unclipped_obj <= clipped_obj, -A / B, 0.0)
    d_logp = d_ratio * ratio
    d_mean = (d_logp[:, None] * diff) * inv_var
    _mlp_backward(params.actor, a_acts, d_mean,
                  [(gv[f"actor.W{i}"], gv[f"actor.b{i}"]) for i in range(1, n + 1)])
    d_ls = (d_logp[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0) - spec.ent_coef
    inside = (ls_raw > LOG_STD_MIN) & (ls_raw < LOG_STD_MAX)
    gv["log_std"][...] = np.where(inside, d_ls, 0.0)

    d_v = (-2.0 * spec.vf_coef / B) * resid
    _mlp_backward(params.critic, c_acts, d_v[:, None],
                  [(gv[f"critic.W{i}"], gv[f"critic.b{i}"]) for i in range(1, n + 1)])
    return actor_loss, critic_loss, diag, grad


def backward(params: MlpParams, spec: LossSpec, batch: dict) -> np.ndarray:
    """Gradient of ``actor_loss + vf_coef * critic_loss`` w.r.t. every parameter (flat layout)."""
    return ppo_loss_and_grad(params, batch, spec)[3]


class MlpPolicy:
    """Policy wrapper used by rollouts and evaluation."""

    def __init__(self, params: MlpParams, fingerprint: str | None = None):
        self.params = params
        self.fingerprint = fingerprint

    def act(self, obs, rng, deterministic=False):
        dist = forward_actor(self.params, obs)
        return sample_raw(dist, rng, deterministic)


def save_checkpoint(path, params: MlpParams, *, scenario_doc=None, fingerprint=None, normalization=None,
                    extra=None) -> None:
    """Write a JSON checkpoint. Floats are written with ``repr`` precision so loading is exact."""
    layers = {}
    for net in ("actor", "critic"):
        layers[net] = [
            {"shape": list(W.shape), "W": W.ravel().tolist(), "b": b.tolist()}
            for W, b in getattr(params, net)
        ]
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "obs_dim": params.obs_dim,
        "act_dim": params.act_dim,
        "hidden": list(params.hidden),
        **layers,
        "log_std": params.log_std.tolist(),
        "normalization": normalization or {},
        "scenario_fingerprint": fingerprint,
        "scenario": scenario_doc,
    }
    if extra:
        doc["extra"] = extra
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc))
    tmp.replace(path)


@dataclass
class Checkpoint:
    params: MlpParams
    fingerprint: str | None
    scenario: dict | None
    normalization: dict

    def policy(self) -> MlpPolicy:
        return MlpPolicy(self.params, self.fingerprint)


def load_checkpoint(path) -> Checkpoint:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} {CHECKPOINT_FORMAT} file")
    p = MlpParams(doc["obs_dim"], doc["act_dim"], doc["hidden"])
    for net in ("actor", "critic"):
        for (W, b), rec in zip(getattr(p, net), doc[net]):
            if list(W.shape) != rec["shape"]:
                raise ValueError(f"{path}: layer shape {rec['shape']} does not match {list(W.shape)}")
            W[...] = np.array(rec["W"], dtype=np.float64).reshape(W.shape)
            b[...] = rec["b"]
    p.log_std[...] = doc["log_std"]
    return Checkpoint(p, doc.get("scenario_fingerprint"), doc.get("scenario"), doc.get("normalization", {}))
