"""
Experiment configuration: YAML in, validated dataclasses out

Every run writes `config.resolved` next to its outputs: the fully
materialized config as YAML, preceded by a `# config_hash:` line.
"""

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml

from .baselines import BONUS_KINDS
from .errors import ConfigError

logger = logging.getLogger(__name__)

HASH_EXCLUDE = ("out",)


@dataclass
class EnvConfig:
    num_rooms: int = 10
    room_width: int = 4
    max_episode_steps: Optional[int] = None
    noisy_tile: Optional[int] = None
    noise_dim: int = 8
    sticky_prob: float = 0.25

    def kwargs(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class BonusConfig:
    kind: str = "rnd"
    embedding_dim: int = 64
    hidden: int = 64
    learning_rate: float = 1e-4
    # None resolves to min(1, 32 / num_envs)
    keep_prob: Optional[float] = None
    reduction: str = "mean"
    count_form: str = "inverse_sqrt"
    reset_return_on_done: bool = False
    centered_return_std: bool = True


@dataclass
class NoveltyConfig:
    mnist_dir: Optional[str] = None
    target_class: int = 1
    base_class: int = 0
    n_values: List[int] = field(default_factory=lambda: [10, 100, 1000, 5000])
    total: int = 5000
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    embedding_dim: int = 64
    hidden: int = 128
    train_steps: int = 1000
    batch_size: int = 128
    learning_rate: float = 1e-3
    test_size: Optional[int] = 500


@dataclass
class NoisyTvConfig:
    deterministic_tile: int = 2
    walk_steps: int = 500
    # replay training runs at least train_steps, then until both tile means
    # move less than plateau_tol between checks, capped at max_train_steps
    train_steps: int = 3000
    max_train_steps: int = 40000
    eval_every: int = 1000
    plateau_tol: float = 0.02
    batch_size: int = 64
    learning_rate: float = 1e-3
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    agent_seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    agent_updates: int = 40
    min_occupancy_wins: int = 4
    min_dynamics_ratio: float = 5.0
    rnd_ratio_band: List[float] = field(default_factory=lambda: [0.5, 2.0])


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "runs/default"
    num_envs: int = 16
    rollout_length: int = 128
    num_updates: int = 98
    warmup_steps: int = 50
    epochs: int = 4
    minibatches: int = 4
    gamma_ext: float = 0.999
    gamma_int: float = 0.99
    gae_lambda: float = 0.95
    ext_coef: float = 2.0
    int_coef: float = 1.0
    clip_eps: float = 0.1
    entropy_coef: float = 0.001
    value_coef: float = 0.5
    learning_rate: float = 1e-4
    max_grad_norm: Optional[float] = 0.5
    normalize_advantages: bool = True
    dual_value_heads: bool = True
    episodic_ext: bool = True
    episodic_int: bool = False
    clip_ext_reward: bool = True
    freeze_obs_norm: bool = False
    policy_obs_norm: bool = True
    policy_hidden: List[int] = field(default_factory=lambda: [64, 64])
    snapshot_interval: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)
    bonus: BonusConfig = field(default_factory=BonusConfig)
    novelty: NoveltyConfig = field(default_factory=NoveltyConfig)
    noisytv: NoisyTvConfig = field(default_factory=NoisyTvConfig)

    @property
    def keep_prob(self) -> float:
        if self.bonus.keep_prob is not None:
            return self.bonus.keep_prob
        return min(1.0, 32.0 / self.num_envs)

    @property
    def frames_per_update(self) -> int:
        return self.num_envs * self.rollout_length

    @property
    def total_frames(self) -> int:
        return self.num_updates * self.frames_per_update

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


SECTIONS = {"env": EnvConfig, "bonus": BonusConfig, "novelty": NoveltyConfig, "noisytv": NoisyTvConfig}


def _build(cls: type, data: Mapping[str, Any], where: str) -> Any:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where or 'config'} must be a mapping, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    values = {}
    for name, value in data.items():
        if cls is ExperimentConfig and name in SECTIONS:
            value = _build(SECTIONS[name], value or {}, name)
        values[name] = value
    return cls(**values)


def _merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _set_dotted(tree: Dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = tree
    for part in parents:
        node = node.setdefault(part, {})
    node[leaf] = value


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Range checks; raises ConfigError naming the offending key"""

    def require(ok: bool, key: str, message: str) -> None:
        if not ok:
            raise ConfigError(f"{key}: {message}")

    require(0 <= int(cfg.seed) < 2 ** 64, "seed", "must fit in 64 unsigned bits")
    for key in ("num_envs", "rollout_length", "num_updates", "warmup_steps", "epochs", "minibatches"):
        require(int(getattr(cfg, key)) >= 1, key, "must be >= 1")
    require(cfg.minibatches <= cfg.num_envs * cfg.rollout_length, "minibatches", "exceeds samples per update")
    for key in ("gamma_ext", "gamma_int"):
        require(0.0 <= getattr(cfg, key) < 1.0, key, "must lie in [0, 1)")
    require(0.0 <= cfg.gae_lambda <= 1.0, "gae_lambda", "must lie in [0, 1]")
    for key in ("ext_coef", "int_coef", "entropy_coef", "value_coef"):
        require(getattr(cfg, key) >= 0.0, key, "must be non-negative")
    require(0.0 < cfg.clip_eps < 1.0, "clip_eps", "must lie in (0, 1)")
    require(cfg.learning_rate > 0.0, "learning_rate", "must be positive")
    require(cfg.max_grad_norm is None or cfg.max_grad_norm > 0, "max_grad_norm", "must be positive or null")
    require(all(int(h) >= 1 for h in cfg.policy_hidden), "policy_hidden", "sizes must be positive")
    require(cfg.snapshot_interval >= 0, "snapshot_interval", "must be >= 0")

    env = cfg.env
    require(env.num_rooms >= 1 and env.room_width >= 1, "env", "num_rooms and room_width must be >= 1")
    require(0.0 <= env.sticky_prob < 1.0, "env.sticky_prob", "must lie in [0, 1)")
    require(env.noisy_tile is None or 0 <= env.noisy_tile < env.num_rooms, "env.noisy_tile", "must be a room index")
    require(env.max_episode_steps is None or env.max_episode_steps >= 1, "env.max_episode_steps", "must be >= 1")

    bonus = cfg.bonus
    require(bonus.kind in BONUS_KINDS, "bonus.kind", f"must be one of {', '.join(BONUS_KINDS)}")
    require(bonus.keep_prob is None or 0.0 < bonus.keep_prob <= 1.0, "bonus.keep_prob", "must lie in (0, 1]")
    require(bonus.reduction in ("mean", "sum"), "bonus.reduction", "must be mean or sum")
    require(bonus.count_form in ("inverse", "inverse_sqrt"), "bonus.count_form", "must be inverse or inverse_sqrt")
    require(bonus.embedding_dim >= 1 and bonus.hidden >= 1, "bonus", "embedding_dim and hidden must be >= 1")
    require(bonus.learning_rate > 0.0, "bonus.learning_rate", "must be positive")

    novelty = cfg.novelty
    require(novelty.target_class != novelty.base_class, "novelty.target_class", "must differ from base_class")
    require(all(b > a for a, b in zip(novelty.n_values, novelty.n_values[1:])),
            "novelty.n_values", "must be strictly increasing")
    require(bool(novelty.n_values) and novelty.n_values[-1] <= novelty.total, "novelty.n_values", "must not exceed total")
    require(bool(novelty.seeds), "novelty.seeds", "needs at least one seed")

    noisytv = cfg.noisytv
    require(len(noisytv.rnd_ratio_band) == 2 and noisytv.rnd_ratio_band[0] < noisytv.rnd_ratio_band[1],
            "noisytv.rnd_ratio_band", "must be [low, high]")
    require(bool(noisytv.seeds), "noisytv.seeds", "needs at least one seed")
    require(noisytv.eval_every >= 1, "noisytv.eval_every", "must be >= 1")
    require(noisytv.max_train_steps >= noisytv.train_steps >= 1, "noisytv.max_train_steps",
            "must be >= train_steps >= 1")
    require(noisytv.plateau_tol > 0.0, "noisytv.plateau_tol", "must be positive")
    require(0 <= noisytv.min_occupancy_wins <= len(noisytv.agent_seeds), "noisytv.min_occupancy_wins",
            "must lie between 0 and the number of agent_seeds")
    return cfg


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None
                ) -> ExperimentConfig:
    """
    Defaults, then the YAML file, then dotted-key overrides (``{"env.sticky_prob": 0}``).

    A `frames` override is turned into num_updates = ceil(frames / (E * K)).
    The resolved keep probability is written back so the dump is complete.
    """
    tree = ExperimentConfig().to_dict()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(loaded, Mapping):
            raise ConfigError(f"{path} must hold a mapping at the top level")
        unknown = sorted(set(loaded) - set(tree))
        if unknown:
            raise ConfigError(f"unknown key(s) in {path}: {', '.join(unknown)}")
        tree = _merge(tree, loaded)

    frames = None
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "frames":
            frames = int(value)
            continue
        _set_dotted(tree, key, value)

    cfg = _build(ExperimentConfig, tree, "")
    if frames is not None:
        if frames < 1:
            raise ConfigError("frames must be >= 1")
        cfg.num_updates = max(1, math.ceil(frames / cfg.frames_per_update))
    validate(cfg)
    if cfg.bonus.keep_prob is None:
        cfg.bonus.keep_prob = cfg.keep_prob
    logger.debug("config resolved with hash %s", config_hash(cfg))
    return cfg


def config_from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    return validate(_build(ExperimentConfig, _merge(ExperimentConfig().to_dict(), data), ""))


def config_hash(cfg: ExperimentConfig) -> str:
    """First 16 hex digits of SHA-256 over canonical JSON (sorted keys, output dir excluded)"""
    data = {k: v for k, v in cfg.to_dict().items() if k not in HASH_EXCLUDE}
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def dump_config(cfg: ExperimentConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)
    path.write_text(f"# config_hash: {config_hash(cfg)}\n{body}")
    return path
