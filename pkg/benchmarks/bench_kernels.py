"""Time the compiled and pure-Python kernel backends on the calls made every environment step.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from uasguide import kernels
from uasguide import scenario as scn
from uasguide.envs import make_env
from uasguide.evaluation import StraightToGoalPolicy, run_episode


def _time(fn, n):
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(n):
            fn()
        best = min(best, time.perf_counter() - t0)
    return best / n


def cases():
    rng = np.random.default_rng(0)
    W1, b1 = rng.normal(size=(64, 26)), rng.normal(size=64)
    W2, b2 = rng.normal(size=(64, 64)), rng.normal(size=64)
    W3, b3 = rng.normal(size=(2, 64)), rng.normal(size=2)
    x = rng.uniform(-1, 1, 26)
    theta = np.concatenate([W1.ravel(), b1, W2.ravel(), b2, W3.ravel(), b3])
    centers = rng.uniform(0, 4000, (3, 2))
    circles = np.column_stack([centers, np.full(3, 300.0)])
    rects = np.empty((0, 4))
    ipos, ivel = rng.uniform(0, 200, (3, 2)), rng.uniform(-2, 2, (3, 2))
    out_s, out_m, d = np.empty(9), np.empty(26), np.empty(3)
    c = np.full(3, 17.0), np.full(3, 0.1), np.full(3, 12.0)
    return {
        "mlp_forward": lambda k: k.mlp_forward(x, theta, 64, 64, 2),
        "static_observation": lambda k: k.static_observation(10.0, 20.0, 0.3, 20.0, 2500.0, 2500.0, centers,
                                                             0.0, 5656.0, 20.0, out_s),
        "moving_observation": lambda k: k.moving_observation(100.0, 210.0, 0.0, -2.0, 100.0, 0.0, ipos, ivel,
                                                             0.0, 424.0, 4.0, 8.0, out_m),
        "static_clearance": lambda k: k.static_clearance(10.0, 20.0, circles, rects),
        "point_distances": lambda k: k.point_distances(10.0, 20.0, ipos, d),
        "proximity_sum": lambda k: k.proximity_sum(d, *c),
    }


def bench_episode(backend, repeat):
    """Full episodes with the scripted policy, patching the env modules to use ``backend``."""
    from uasguide import env_moving, env_static
    saved = env_static.kernels, env_moving.kernels
    env_static.kernels = env_moving.kernels = kernels.load_backend(backend)
    try:
        sc = scn.from_dict(scn.preset("stochastic-intruders"))
        env = make_env(sc)
        pol = StraightToGoalPolicy()
        steps = 0
        t0 = time.perf_counter()
        for i in range(repeat):
            steps += run_episode(env, pol, rng=np.random.default_rng(i)).steps
        return (time.perf_counter() - t0) / steps
    finally:
        env_static.kernels, env_moving.kernels = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20000, help="calls per kernel timing")
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    mods = {b: kernels.load_backend(b) for b in backends}
    print(f"{'kernel':<22}" + "".join(f"{b + ' (us)':>16}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases().items():
        times = [_time(lambda: fn(mods[b]), args.repeat) * 1e6 for b in backends]
        speed = f"{times[-1] / times[0]:>9.1f}x" if len(times) > 1 else ""
        print(f"{name:<22}" + "".join(f"{t:>16.2f}" for t in times) + speed)
    per_step = [bench_episode(b, 20) * 1e6 for b in backends]
    speed = f"{per_step[-1] / per_step[0]:>9.1f}x" if len(per_step) > 1 else ""
    print(f"{'env step (episode)':<22}" + "".join(f"{t:>16.2f}" for t in per_step) + speed)


if __name__ == "__main__":
    main()
