from rnd_desk.config import BonusConfig, EnvConfig, ExperimentConfig, NoisyTvConfig

TINY = {
    "num_envs": 4,
    "rollout_length": 16,
    "num_updates": 3,
    "warmup_steps": 5,
    "epochs": 2,
    "minibatches": 2,
    "learning_rate": 1e-3,
    "policy_hidden": [16, 16],
    "env": {"num_rooms": 3, "room_width": 3, "sticky_prob": 0.25},
    "bonus": {"kind": "rnd", "embedding_dim": 8, "hidden": 16, "learning_rate": 1e-3},
}

# 3 one-hot rooms + the cell coordinate
TINY_OBS_DIM = 4


def tiny_config(**overrides) -> ExperimentConfig:
    """A few-second training config; nested sections merge key by key"""
    env = dict(TINY["env"], **overrides.pop("env", {}))
    bonus = dict(TINY["bonus"], **overrides.pop("bonus", {}))
    noisytv = overrides.pop("noisytv", {})
    fields = {k: v for k, v in TINY.items() if k not in ("env", "bonus")}
    fields.update(overrides)
    return ExperimentConfig(
        **fields,
        env=EnvConfig(**env),
        bonus=BonusConfig(**bonus),
        noisytv=NoisyTvConfig(**noisytv),
    )
