from pathlib import Path

import numpy as np
import pytest
import yaml

from rnd_desk.baselines import NoBonus
from rnd_desk.config import ExperimentConfig, config_hash, load_config
from rnd_desk.data import NoveltyCurve, write_curve_csv
from rnd_desk.errors import InvalidArgumentError, NonFiniteError, SnapshotError
from rnd_desk import runner
from rnd_desk.rnd import ExplorationBonus
from rnd_desk.runner import (
    RUN_COLUMNS,
    Trainer,
    check_report,
    resume_training,
    run_noisytv_contrast,
    run_novelty,
    run_training,
)
from rnd_desk.snapshot import pack, unpack

from .helpers import TINY_OBS_DIM, tiny_config


class SilentBonus(ExplorationBonus):
    kind = "silent"
    active = False

    def bonus(self, obs, actions, next_obs, state_index=None):
        return np.zeros(len(next_obs))


class NanBonus(ExplorationBonus):
    kind = "nan"

    def bonus(self, obs, actions, next_obs, state_index=None):
        return np.full(len(next_obs), np.nan)


def test_update_follows_the_pipeline_order(tiny: ExperimentConfig) -> None:
    trainer = Trainer(tiny)
    trainer.train_update()
    K = tiny.rollout_length
    assert trainer.events[:K] == ["ret_norm"] * K
    assert trainer.events[K:] == ["collect", "normalize_reward", "gae", "obs_norm", "optimize"]
    assert trainer.counters["warmup"] == 1


def test_counters_track_every_stage(tiny: ExperimentConfig) -> None:
    trainer = Trainer(tiny)
    rows = [trainer.train_update() for _ in range(3)]
    E, K, M = tiny.num_envs, tiny.rollout_length, tiny.warmup_steps
    for u, row in enumerate(rows, start=1):
        assert row["update"] == u
        assert row["frames"] == u * E * K
        assert row["obs_norm_count"] == M * E + u * K * E
        assert row["ret_norm_count"] == u * K * E
        assert row["opt_steps"] == u * tiny.epochs * tiny.minibatches
        assert row["predictor_steps"] == row["opt_steps"]
    assert set(rows[0]) == set(RUN_COLUMNS)


def test_frozen_normalizer_keeps_its_warmup_count() -> None:
    cfg = tiny_config(freeze_obs_norm=True)
    trainer = Trainer(cfg)
    rows = [trainer.train_update() for _ in range(2)]
    assert [r["obs_norm_count"] for r in rows] == [cfg.warmup_steps * cfg.num_envs] * 2
    assert "obs_norm" not in trainer.events


def test_training_is_deterministic(tiny: ExperimentConfig, tmp_path: Path) -> None:
    run_training(tiny, tmp_path / "a")
    run_training(tiny, tmp_path / "b")
    assert (tmp_path / "a" / "run.csv").read_bytes() == (tmp_path / "b" / "run.csv").read_bytes()
    assert (tmp_path / "a" / "snapshot.bin").read_bytes() == (tmp_path / "b" / "snapshot.bin").read_bytes()


def test_output_files(tiny: ExperimentConfig, tmp_path: Path) -> None:
    result = run_training(tiny, tmp_path)
    lines = (tmp_path / "run.csv").read_text().splitlines()
    assert lines[0] == ",".join(RUN_COLUMNS)
    assert len(lines) == 1 + tiny.num_updates
    assert len(result.rows) == tiny.num_updates
    assert (tmp_path / "timing.csv").read_text().startswith("update,wall_seconds\n")
    resolved = (tmp_path / "config.resolved").read_text()
    assert resolved.startswith(f"# config_hash: {config_hash(tiny)}\n")


def test_resume_matches_an_uninterrupted_run(tiny: ExperimentConfig, tmp_path: Path) -> None:
    run_training(tiny, tmp_path / "full", num_updates=3)
    run_training(tiny, tmp_path / "split", num_updates=2)
    resumed = resume_training(tmp_path / "split" / "snapshot.bin", num_updates=1)
    assert resumed.trainer.update == 3
    assert (tmp_path / "full" / "run.csv").read_bytes() == (tmp_path / "split" / "run.csv").read_bytes()


def test_resume_defaults_to_the_configured_total(tiny: ExperimentConfig, tmp_path: Path) -> None:
    run_training(tiny, tmp_path, num_updates=1)
    resumed = resume_training((tmp_path / "snapshot.bin").read_bytes())
    assert resumed.trainer.update == tiny.num_updates
    assert len(resumed.rows) == tiny.num_updates - 1


def test_resume_from_a_periodic_snapshot_rewrites_the_tail(tmp_path: Path) -> None:
    cfg = tiny_config(snapshot_interval=1, num_updates=3)
    run_training(cfg, tmp_path)
    original = (tmp_path / "run.csv").read_bytes()
    resume_training(tmp_path / "snapshot-00001.bin")
    run_csv = (tmp_path / "run.csv").read_text().splitlines()
    assert [int(line.split(",")[0]) for line in run_csv[1:]] == [1, 2, 3]
    assert (tmp_path / "run.csv").read_bytes() == original
    timing = (tmp_path / "timing.csv").read_text().splitlines()
    assert [int(line.split(",")[0]) for line in timing[1:]] == [1, 2, 3]


def test_snapshot_round_trip_is_byte_identical(tiny: ExperimentConfig) -> None:
    trainer = Trainer(tiny)
    trainer.train_update()
    blob = trainer.snapshot_bytes()
    assert Trainer.from_snapshot(blob).snapshot_bytes() == blob


def test_foreign_snapshots_are_rejected(tiny: ExperimentConfig) -> None:
    with pytest.raises(SnapshotError):
        Trainer.from_snapshot(pack({"format": "other"}))
    state = unpack(Trainer(tiny).snapshot_bytes())
    state["config_hash"] = "0" * 16
    with pytest.raises(SnapshotError):
        Trainer.from_snapshot(pack(state))


def test_inactive_stub_matches_the_no_bonus_control(tmp_path: Path) -> None:
    cfg = tiny_config(bonus={"kind": "none"})
    run_training(cfg, tmp_path / "control")
    stub = SilentBonus(TINY_OBS_DIM, cfg.num_envs)
    run_training(cfg, tmp_path / "stub", bonus=stub)
    assert (tmp_path / "control" / "run.csv").read_bytes() == (tmp_path / "stub" / "run.csv").read_bytes()


def test_no_bonus_rows_have_no_intrinsic_signal() -> None:
    trainer = Trainer(tiny_config(bonus={"kind": "none"}))
    row = trainer.train_update()
    assert isinstance(trainer.bonus, NoBonus)
    assert (row["int_reward"], row["ret_norm_count"], row["predictor_steps"], row["vf_loss_int"]) == (0.0, 0, 0, 0.0)


def test_non_finite_bonus_aborts_with_a_snapshot(tmp_path: Path) -> None:
    cfg = tiny_config()
    with pytest.raises(NonFiniteError) as info:
        run_training(cfg, tmp_path, bonus=NanBonus(TINY_OBS_DIM, cfg.num_envs))
    assert info.value.diagnostics["update"] == 0
    state = unpack((tmp_path / "snapshot.bin").read_bytes())
    assert state["update"] == 0
    assert state["warmed_up"]


def test_periodic_snapshots(tmp_path: Path) -> None:
    run_training(tiny_config(snapshot_interval=2, num_updates=4), tmp_path)
    assert sorted(p.name for p in tmp_path.glob("snapshot-*.bin")) == ["snapshot-00002.bin", "snapshot-00004.bin"]


@pytest.mark.parametrize("kind", ["rnd", "dynamics", "autoencoder", "count", "none"])
def test_every_bonus_trains(kind: str) -> None:
    trainer = Trainer(tiny_config(bonus={"kind": kind}))
    rows = [trainer.train_update() for _ in range(2)]
    assert trainer.bonus.kind == kind
    assert all(np.isfinite(row[c]) for row in rows for c in RUN_COLUMNS)


@pytest.mark.parametrize("overrides", [
    {"dual_value_heads": False},
    {"ext_coef": 0.0},
    {"policy_obs_norm": False},
    {"episodic_int": True},
    {"env": {"noisy_tile": 1, "noise_dim": 3}},
    {"bonus": {"keep_prob": 0.25}},
])
def test_training_variants_run(overrides: dict) -> None:
    trainer = Trainer(tiny_config(**overrides))
    row = trainer.train_update()
    assert row["update"] == 1
    assert np.isfinite(row["pg_loss"])


def test_noisy_frac_counts_steps_in_the_noisy_room() -> None:
    trainer = Trainer(tiny_config(env={"num_rooms": 1, "room_width": 3, "noisy_tile": 0, "noise_dim": 2}))
    assert trainer.train_update()["noisy_frac"] == 1.0


def test_noisytv_needs_a_noisy_tile(tiny: ExperimentConfig) -> None:
    with pytest.raises(InvalidArgumentError):
        run_noisytv_contrast(tiny)
    bad = tiny_config(env={"noisy_tile": 1}, noisytv={"deterministic_tile": 1})
    with pytest.raises(InvalidArgumentError):
        run_noisytv_contrast(bad)


def _noisy_config(**noisytv) -> ExperimentConfig:
    settings = {"deterministic_tile": 2, "walk_steps": 100, "train_steps": 20, "max_train_steps": 60,
                "eval_every": 10, "batch_size": 16, "seeds": [0], "agent_seeds": [0], "agent_updates": 2,
                "min_occupancy_wins": 0}
    settings.update(noisytv)
    return tiny_config(
        env={"num_rooms": 3, "room_width": 2, "noisy_tile": 1, "noise_dim": 2, "sticky_prob": 0.0},
        noisytv=settings,
    )


def test_noisytv_report_layout(tmp_path: Path) -> None:
    report = run_noisytv_contrast(_noisy_config(), tmp_path)
    record = report["seeds"][0]
    assert set(record) == {"seed", "rnd", "dynamics"}
    assert record["rnd"]["ratio"] > 0
    assert 20 <= record["rnd"]["train_steps"] <= 60
    assert 0.0 <= report["occupancy"][0]["dynamics"] <= 1.0
    assert set(report["checks"]) == {"rnd_ratio_in_band", "dynamics_ratio_above", "dynamics_occupancy_higher"}
    saved = yaml.safe_load((tmp_path / "noisytv_report.yaml").read_text())
    assert saved["passed"] == report["passed"]
    assert check_report(tmp_path).passed == report["passed"]


def test_replay_training_stops_once_both_tiles_settle() -> None:
    loose = run_noisytv_contrast(_noisy_config(plateau_tol=1e6), with_agents=False)
    assert loose["seeds"][0]["rnd"]["train_steps"] == 20
    assert loose["seeds"][0]["rnd"]["converged"]
    strict = run_noisytv_contrast(_noisy_config(plateau_tol=1e-15), with_agents=False)
    assert strict["seeds"][0]["rnd"]["train_steps"] == 60
    assert not strict["seeds"][0]["rnd"]["converged"]


def test_occupancy_gates_the_report(monkeypatch: pytest.MonkeyPatch) -> None:
    stays = {0: (0.1, 0.6), 1: (0.2, 0.5), 2: (0.4, 0.3)}
    monkeypatch.setattr(runner, "agent_occupancy", lambda config, kind, seed: stays[seed][kind == "dynamics"])
    cfg = _noisy_config(agent_seeds=[0, 1, 2], min_occupancy_wins=2)
    report = run_noisytv_contrast(cfg)
    assert report["occupancy_wins"] == 2
    assert report["checks"]["dynamics_occupancy_higher"]
    report = run_noisytv_contrast(_noisy_config(agent_seeds=[0, 1, 2], min_occupancy_wins=3))
    assert not report["checks"]["dynamics_occupancy_higher"]
    assert not report["passed"]


def test_novelty_writes_a_curve(tmp_path: Path) -> None:
    cfg = tiny_config()
    cfg.novelty.n_values = [0, 20]
    cfg.novelty.total = 20
    cfg.novelty.seeds = [0, 1]
    cfg.novelty.train_steps = 5
    cfg.novelty.batch_size = 8
    cfg.novelty.hidden = 8
    cfg.novelty.embedding_dim = 4
    cfg.novelty.test_size = 10
    curves = run_novelty(cfg, tmp_path)
    assert [c.seed for c in curves] == [0, 1]
    lines = (tmp_path / "curve.csv").read_text().splitlines()
    assert lines[0] == "n,test_mse,seed"
    assert len(lines) == 5


def test_check_report_on_curves(tmp_path: Path) -> None:
    falling = [(10, 0.9), (100, 0.5), (1000, 0.2)]
    write_curve_csv(tmp_path / "curve.csv", [NoveltyCurve(falling, seed=s) for s in range(5)])
    report = check_report(tmp_path / "curve.csv")
    assert report.passed
    assert report.lines[-1] == "5 of 5 seeds negative (need 4)"
    assert not check_report(tmp_path, required=6).passed
    with pytest.raises(InvalidArgumentError):
        check_report(tmp_path / "missing.csv")


@pytest.mark.slow
def test_plain_ppo_solves_the_dense_corridor(tmp_path: Path) -> None:
    preset = Path(__file__).resolve().parent.parent / "configs" / "corridor_dense.yaml"
    rows = run_training(load_config(preset), tmp_path).rows
    tail = rows[-5:]
    assert np.mean([r["ep_return"] for r in tail]) >= 0.95


@pytest.mark.slow
def test_rnd_explores_further_than_plain_ppo() -> None:
    preset = Path(__file__).resolve().parent.parent / "configs" / "corridor_sparse.yaml"
    found = {"rnd": 0, "none": 0}
    wins = 0
    for seed in range(10):
        last = {}
        for kind in found:
            cfg = load_config(preset, {"seed": seed, "bonus.kind": kind})
            last[kind] = run_training(cfg).rows[-1]
            found[kind] += last[kind]["goal_hits"] > 0
        wins += last["rnd"]["visited_states"] > last["none"]["visited_states"]
    assert found["rnd"] >= 5
    assert found["none"] <= 1
    assert wins >= 7


@pytest.mark.slow
def test_noisy_room_traps_the_dynamics_bonus_only() -> None:
    preset = Path(__file__).resolve().parent.parent / "configs" / "noisytv.yaml"
    report = run_noisytv_contrast(load_config(preset), with_agents=False)
    assert report["checks"]["dynamics_ratio_above"]
    assert report["checks"]["rnd_ratio_in_band"]


@pytest.mark.slow
def test_dynamics_agents_linger_in_the_noisy_room() -> None:
    preset = Path(__file__).resolve().parent.parent / "configs" / "noisytv.yaml"
    cfg = load_config(preset, {"noisytv.seeds": [0]})
    report = run_noisytv_contrast(cfg)
    assert report["occupancy_wins"] >= 4
    assert report["checks"]["dynamics_occupancy_higher"]
