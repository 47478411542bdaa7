import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uasguide import scenario as scn
from uasguide.env_static import StaticEnv
from uasguide.evaluation import StraightToGoalPolicy
from uasguide.policy import LossSpec, init_params, ppo_loss_and_grad, to_physical
from uasguide.ppo import (
    CURVE_COLUMNS,
    Adam,
    NonFiniteLossError,
    RolloutBuffer,
    TrainConfig,
    collect_rollout,
    compute_returns_advantages,
    normalize_advantages,
    ppo_losses,
    train,
    update,
)


def buffer(rewards, values=None, dones=None, bootstrap=0.0):
    n = len(rewards)
    return RolloutBuffer(
        obs=np.zeros((n, 1)), raw_actions=np.zeros((n, 1)),
        rewards=np.asarray(rewards, float),
        values=np.zeros(n) if values is None else np.asarray(values, float),
        logp_old=np.zeros(n),
        dones=np.zeros(n, bool) if dones is None else np.asarray(dones, bool),
        bootstrap_value=bootstrap,
    )


def static_env(seed=0):
    return StaticEnv(scn.from_dict(scn.preset("static-circle")), np.random.default_rng(seed))


def collected_batch(seed, horizon=256):
    rng = np.random.default_rng(seed)
    env = static_env(seed)
    params = init_params(env.obs_dim, env.act_dim, rng)
    params.flat += rng.normal(scale=0.05, size=params.size)
    env.reset(rng)
    buf = collect_rollout(env, params, horizon, rng)
    ret, adv = compute_returns_advantages(buf, 0.99, 0.95, normalize=True, reward_scale=0.1)
    batch = {"obs": buf.obs, "raw_actions": buf.raw_actions, "logp_old": buf.logp_old,
             "returns": ret, "advantages": adv}
    return params, batch


class TestReturns:
    def test_geometric_sum(self):
        ret, _ = compute_returns_advantages(buffer([1, 1, 1], dones=[0, 0, 1]), 0.5, 0.95, mode="literal")
        assert ret[0] == pytest.approx(1.75)
        ret, _ = compute_returns_advantages(buffer([1, 1, 1], dones=[0, 0, 1]), 0.5, 1.0, mode="gae")
        assert ret[0] == pytest.approx(1.75)

    def test_zero_rewards(self):
        _, adv = compute_returns_advantages(buffer([0.0] * 5), 0.99, 0.95)
        assert np.all(adv == 0.0)

    def test_gamma_zero_single_step(self):
        rng = np.random.default_rng(0)
        r = rng.normal(size=20)
        for mode in ("gae", "literal"):
            ret, _ = compute_returns_advantages(buffer(r, rng.normal(size=20), bootstrap=3.0), 0.0, 0.95, mode)
            assert np.allclose(ret, r, atol=1e-12)

    def test_bootstrap_and_episode_boundary(self):
        ret, _ = compute_returns_advantages(buffer([1, 2, 3], dones=[0, 1, 0], bootstrap=10.0), 0.9, 1.0, "literal")
        assert ret == pytest.approx([1 + 0.9 * 2, 2, 3 + 0.9 * 10])

    def test_lambda_one_equals_literal_mode(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = int(rng.integers(1, 60))
            buf = buffer(rng.normal(size=n), rng.normal(size=n), rng.random(n) < 0.1, float(rng.normal()))
            gamma = float(rng.uniform(0.5, 1.0))
            _, a_gae = compute_returns_advantages(buf, gamma, 1.0, "gae")
            _, a_lit = compute_returns_advantages(buf, gamma, 1.0, "literal")
            assert np.max(np.abs(a_gae - a_lit)) < 1e-10

    def test_normalized(self):
        rng = np.random.default_rng(2)
        _, adv = compute_returns_advantages(buffer(rng.normal(size=100), rng.normal(size=100)), 0.99, 0.95,
                                            normalize=True)
        assert adv.mean() == pytest.approx(0.0, abs=1e-12)
        assert adv.std() == pytest.approx(1.0, abs=1e-6)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            compute_returns_advantages(buffer([1.0]), 0.9, 0.9, mode="nope")


def surrogate_batch(r, A):
    """A batch whose new/old log-prob ratio is exactly ``r`` for a zero-output network."""
    p = init_params(1, 1, np.random.default_rng(0), hidden=(2, 2))
    p.flat[:] = 0.0
    n = len(r)
    acts = np.zeros((n, 1))
    logp_new = -0.5 * math.log(2 * math.pi)
    batch = {"obs": np.zeros((n, 1)), "raw_actions": acts, "logp_old": logp_new - np.log(r),
             "advantages": np.asarray(A, float), "returns": np.zeros(n)}
    return p, batch


class TestSurrogate:
    @pytest.mark.parametrize("r,A,expected", [(1.0, 1.0, 1.0), (1.5, 1.0, 1.2), (0.5, -1.0, -0.8)])
    def test_examples(self, r, A, expected):
        p, batch = surrogate_batch(np.array([r]), [A])
        actor, _, _ = ppo_losses(p, batch, clip=0.2, ent_coef=0.0)
        assert -actor == pytest.approx(expected, rel=1e-12)

    @settings(max_examples=200)
    @given(st.floats(0.01, 5.0), st.floats(-10, 10))
    def test_pessimistic(self, r, A):
        p, batch = surrogate_batch(np.array([r]), [A])
        actor, _, _ = ppo_losses(p, batch)
        assert -actor <= r * A + 1e-9 * (1 + abs(r * A))

    def test_clip_fraction(self):
        p, batch = surrogate_batch(np.array([1.0, 1.5, 0.5, 1.1]), [1, 1, 1, 1])
        _, _, diag = ppo_losses(p, batch)
        assert diag["clip_fraction"] == 0.5

    def test_zero_ratio_gradient_when_clipped(self):
        # Gradient w.r.t. the actor output bias is proportional to dL/dr; clipped samples contribute nothing.
        p, batch = surrogate_batch(np.array([1.5, 0.5]), [1.0, -1.0])
        batch["raw_actions"][:] = 0.3
        batch["logp_old"] -= 0.5 * 0.09
        _, _, _, grad = ppo_loss_and_grad(p, batch, LossSpec(ent_coef=0.0))
        g = p.unflatten(grad)
        assert np.all(g["actor.b3"] == 0.0) and np.all(g["log_std"] == 0.0)


class TestCollect:
    def test_horizon_one(self):
        env = static_env()
        env.reset(np.random.default_rng(0))
        p = init_params(env.obs_dim, env.act_dim, np.random.default_rng(0))
        buf = collect_rollout(env, p, 1, np.random.default_rng(0))
        assert len(buf) == 1 and math.isfinite(buf.bootstrap_value)
        with pytest.raises(ValueError):
            collect_rollout(env, p, 0, np.random.default_rng(0))

    def test_repeatable(self):
        def run():
            env = static_env()
            rng = np.random.default_rng(3)
            env.reset(rng)
            p = init_params(env.obs_dim, env.act_dim, np.random.default_rng(1))
            return collect_rollout(env, p, 500, rng)
        a, b = run(), run()
        for f in ("obs", "raw_actions", "rewards", "values", "logp_old", "dones"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_done_flags_match_replay(self):
        env = static_env()
        rng = np.random.default_rng(4)
        env.reset(rng)
        start = (env.x, env.y)
        p = init_params(env.obs_dim, env.act_dim, np.random.default_rng(2))
        p.log_std[:] = -2.0  # nearly straight flight so an episode ends inside the buffer
        buf = collect_rollout(env, p, 600, rng)
        assert buf.dones.any()
        replay = static_env()
        replay.reset(origin=start)
        first = int(np.argmax(buf.dones))
        for t in range(first + 1):
            assert np.array_equal(replay.observe(), buf.obs[t])
            _, r, done, _ = replay.step(*to_physical(buf.raw_actions[t]))
            assert r == buf.rewards[t] and done == buf.dones[t]
        assert np.all(np.isfinite(buf.logp_old))


class TestUpdate:
    def cfg(self, **kw):
        base = dict(total_steps=256, horizon=256, minibatch_size=64, epochs_per_update=4, num_envs=1)
        base.update(kw)
        return TrainConfig(**base)

    def test_lr_zero_no_change(self):
        params, batch = collected_batch(0)
        before = params.flat.copy()
        update(params, batch, self.cfg(learning_rate=0.0), rng=np.random.default_rng(0))
        assert np.array_equal(params.flat, before)

    def test_descent_monte_carlo(self):
        spec = LossSpec()
        wins = 0
        for trial in range(50):
            params, batch = collected_batch(100 + trial)
            a0, c0, _, _ = ppo_loss_and_grad(params, batch, spec, need_grad=False)
            update(params, batch, self.cfg(), rng=np.random.default_rng(trial))
            a1, c1, _, _ = ppo_loss_and_grad(params, batch, spec, need_grad=False)
            wins += (a1 + 0.5 * c1) < (a0 + 0.5 * c0)
        assert wins >= 40

    def test_zero_advantage_actor_frozen(self):
        params, batch = collected_batch(1)
        batch["advantages"][:] = 0.0
        before = params.copy()
        update(params, batch, self.cfg(), rng=np.random.default_rng(0))
        for (W0, b0), (W1, b1) in zip(before.actor, params.actor):
            assert np.array_equal(W0, W1) and np.array_equal(b0, b1)
        assert np.array_equal(before.log_std, params.log_std)
        assert not np.array_equal(before.critic[0][0], params.critic[0][0])

    def test_first_minibatch_ratio_one(self):
        _, batch = collected_batch(2)
        params, _ = collected_batch(2)  # same seed: the policy that collected the batch
        _, _, diag, _ = ppo_loss_and_grad(params, {k: v[:64] for k, v in batch.items()}, LossSpec(),
                                          need_grad=False)
        assert diag["clip_fraction"] == 0.0
        assert abs(diag["approx_kl"]) < 1e-12

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_raises(self):
        params, batch = collected_batch(3)
        batch["returns"][0] = np.inf
        with pytest.raises(NonFiniteLossError) as err:
            update(params, batch, self.cfg(), rng=np.random.default_rng(0))
        assert "critic_loss" in err.value.diagnostics

    def test_grad_norm_clip_bounds_adam_step(self):
        # With clipped gradients Adam's first step moves every coordinate by at most lr.
        params, batch = collected_batch(4)
        before = params.flat.copy()
        cfg = self.cfg(epochs_per_update=1, learning_rate=1e-3)
        opt = Adam(params.size, cfg.learning_rate)
        update(params, {k: v[:64] for k, v in batch.items()}, cfg, opt, np.random.default_rng(0))
        assert opt.t == 1
        assert np.max(np.abs(params.flat - before)) <= 1e-3 + 1e-12

    def test_small_batch_rejected(self):
        params, batch = collected_batch(5)
        with pytest.raises(ValueError):
            update(params, {k: v[:10] for k, v in batch.items()}, self.cfg())


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(gamma=0.0), dict(gamma=1.1), dict(lam=-0.1), dict(clip=0.0),
                                    dict(horizon=100, num_envs=8), dict(advantage_mode="x")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    def test_normalize_advantages(self):
        a = normalize_advantages(np.array([1.0, 2.0, 3.0]))
        assert a.mean() == pytest.approx(0.0) and a.std() == pytest.approx(1.0, abs=1e-6)


class TestTrain:
    def cfg(self, **kw):
        base = dict(total_steps=512, horizon=256, minibatch_size=64, epochs_per_update=2, num_envs=4, seed=3)
        base.update(kw)
        return TrainConfig(**base)

    def test_single_update(self):
        sc = scn.from_dict(scn.preset("static-circle"))
        _, recs = train(sc, self.cfg(total_steps=256))
        assert len(recs) == 1 and recs[0]["env_steps"] == 256

    def test_record_count(self):
        sc = scn.from_dict(scn.preset("static-circle"))
        _, recs = train(sc, self.cfg(total_steps=600))
        assert len(recs) == math.ceil(600 / 256)

    def test_deterministic_and_csv(self, tmp_path):
        sc = scn.from_dict(scn.preset("static-circle"))
        p1, r1 = train(sc, self.cfg(), out_dir=tmp_path / "a")
        p2, r2 = train(sc, self.cfg(), out_dir=tmp_path / "b")
        assert np.array_equal(p1.flat, p2.flat)
        assert (tmp_path / "a/curve.csv").read_bytes() == (tmp_path / "b/curve.csv").read_bytes()
        rows = list(csv.reader(open(tmp_path / "a/curve.csv")))
        assert tuple(rows[0]) == CURVE_COLUMNS and len(rows) == 3
        assert (tmp_path / "a/checkpoint.json").exists()

    def test_workers_do_not_change_numbers(self):
        sc = scn.from_dict(scn.preset("stochastic-intruders"))
        p1, r1 = train(sc, self.cfg())
        p2, r2 = train(sc, self.cfg(), workers=2)
        assert repr(r1) == repr(r2) and np.array_equal(p1.flat, p2.flat)

    def test_checkpoint_flushed_on_abort(self, tmp_path):
        sc = scn.from_dict(scn.preset("static-circle"))

        def boom(rec):
            raise RuntimeError("stop")
        with pytest.raises(RuntimeError):
            train(sc, self.cfg(), out_dir=tmp_path, progress=boom)
        assert (tmp_path / "checkpoint.json").exists()

    @pytest.mark.slow
    def test_beats_straight_line_baseline(self):
        sc = scn.from_dict(scn.preset("static-circle"))
        env = StaticEnv(sc, np.random.default_rng(0))
        pol = StraightToGoalPolicy()
        rewards = []
        rng = np.random.default_rng(0)
        for _ in range(100):
            obs = env.reset(rng)
            done = False
            while not done:
                obs, _, done, _ = env.step(*to_physical(pol.act(obs, rng)))
            rewards.append(env.episode_reward)
        baseline = float(np.mean(rewards))
        _, recs = train(sc, TrainConfig(total_steps=500_000, seed=0))
        assert max(r["episode_reward_mean"] for r in recs) > baseline
