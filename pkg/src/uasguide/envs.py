from .env_moving import MovingEnv
from .env_static import StaticEnv


def make_env(scenario, rng=None):
    """Build the environment matching a scenario object."""
    if scenario.kind == "static":
        return StaticEnv(scenario, rng)
    return MovingEnv(scenario, rng)
