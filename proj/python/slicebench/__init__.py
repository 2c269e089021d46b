"""Python access to the slicebench environment and training loop."""

from ._core import (
    CheckpointError,
    ConfigError,
    Error,
    ShapeMismatch,
    SliceEnv,
    ToyMdp,
    __version__,
    derive_seed,
    normalize_config,
    preset_config,
    train,
    validate_config,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "Error",
    "ShapeMismatch",
    "SliceEnv",
    "ToyMdp",
    "__version__",
    "derive_seed",
    "normalize_config",
    "preset_config",
    "random_rollout",
    "train",
    "validate_config",
]


def random_rollout(env, seed, steps=None):
    """Runs uniform random actions in the unit cube; returns the reward list."""
    import random

    rng = random.Random(seed)
    env.reset(seed)
    n = len(env.action_low)
    rewards = []
    for _ in range(steps or env.episode_length):
        unit = [rng.uniform(-1.0, 1.0) for _ in range(n)]
        _, reward, done, _, _ = env.step(env.from_unit(unit))
        rewards.append(reward)
        if done:
            break
    return rewards
