from pathlib import Path

import pytest
import yaml

from rnd_desk.config import (
    ExperimentConfig,
    config_from_dict,
    config_hash,
    dump_config,
    load_config,
)
from rnd_desk.errors import ConfigError

PRESETS = sorted((Path(__file__).resolve().parent.parent / "configs").glob("*.yaml"))


def test_defaults_cover_the_frame_budget() -> None:
    cfg = load_config()
    assert (cfg.num_envs, cfg.rollout_length, cfg.num_updates) == (16, 128, 98)
    assert cfg.total_frames == 200_704
    assert cfg.bonus.keep_prob == 1.0


@pytest.mark.parametrize("num_envs, keep", [(16, 1.0), (32, 1.0), (128, 0.25), (256, 0.125), (1024, 0.03125)])
def test_keep_probability_follows_env_count(num_envs: int, keep: float) -> None:
    assert load_config(overrides={"num_envs": num_envs, "minibatches": 4}).bonus.keep_prob == keep


def test_explicit_keep_probability_wins() -> None:
    assert load_config(overrides={"num_envs": 128, "bonus.keep_prob": 0.5}).keep_prob == 0.5


@pytest.mark.parametrize("preset", PRESETS, ids=lambda p: p.stem)
def test_presets_load(preset: Path) -> None:
    cfg = load_config(preset)
    assert cfg.total_frames > 0


def test_yaml_merges_over_defaults(tmp_path: Path) -> None:
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"seed": 7, "env": {"num_rooms": 3}}))
    cfg = load_config(path)
    assert cfg.seed == 7
    assert cfg.env.num_rooms == 3
    assert cfg.env.room_width == 4


@pytest.mark.parametrize("body", [
    {"learning_rte": 1e-3},
    {"env": {"rooms": 3}},
    {"bonus": {"kind": "curiosity"}},
    {"gamma_ext": 1.0},
    {"env": {"sticky_prob": 1.5}},
    {"novelty": {"n_values": [100, 10]}},
])
def test_invalid_files_raise_config_errors(tmp_path: Path, body: dict) -> None:
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(body))
    with pytest.raises(ConfigError):
        load_config(path)


def test_unparseable_and_missing_files(tmp_path: Path) -> None:
    path = tmp_path / "bad.yaml"
    path.write_text("seed: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_overrides_apply_last_and_skip_none() -> None:
    cfg = load_config(overrides={"seed": 5, "out": None, "env.sticky_prob": 0.0, "bonus.kind": "count"})
    assert cfg.seed == 5
    assert cfg.out == ExperimentConfig().out
    assert cfg.env.sticky_prob == 0.0
    assert cfg.bonus.kind == "count"


def test_frames_override_sets_update_count() -> None:
    cfg = load_config(overrides={"frames": 5000, "num_envs": 4, "rollout_length": 16})
    assert cfg.num_updates == 79
    with pytest.raises(ConfigError):
        load_config(overrides={"frames": 0})


def test_hash_ignores_output_dir_and_tracks_values() -> None:
    a = load_config(overrides={"out": "runs/a"})
    b = load_config(overrides={"out": "runs/b"})
    c = load_config(overrides={"seed": 1})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)
    assert len(config_hash(a)) == 16
    int(config_hash(a), 16)


def test_dump_starts_with_hash_and_reloads(tmp_path: Path) -> None:
    cfg = load_config(overrides={"seed": 3, "env.noisy_tile": 1})
    path = dump_config(cfg, tmp_path / "out" / "config.resolved")
    first = path.read_text().splitlines()[0]
    assert first == f"# config_hash: {config_hash(cfg)}"
    reloaded = load_config(path)
    assert config_hash(reloaded) == config_hash(cfg)
    assert reloaded.env.noisy_tile == 1


def test_config_from_dict_validates() -> None:
    cfg = config_from_dict({"bonus": {"kind": "dynamics"}})
    assert cfg.bonus.kind == "dynamics"
    with pytest.raises(ConfigError):
        config_from_dict({"minibatches": 0})
