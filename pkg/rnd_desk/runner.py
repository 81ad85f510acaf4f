"""
Training loop, resumable run snapshots, and the noisy-TV contrast

Each update follows the RND pseudo-code: collect K steps per env (bonus on
s_{t+1}, reward normalizer advanced per step), normalize intrinsic rewards,
per-stream GAE, combine advantages, update observation normalizers with the
batch, then N_opt epochs of PPO with the bonus model trained alongside.
"""

import csv
import logging
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from . import agent, rnd, stats
from .agent import RolloutBuffer, StreamSpec, make_policy, PolicyNet
from .baselines import make_bonus
from .config import ExperimentConfig, config_from_dict, config_hash, dump_config
from .data import check_curves, load_dataset, novelty_experiment, read_curve_csv, write_curve_csv, NoveltyCurve
from .envs import NUM_ACTIONS, VecEnv, collect_random_transitions
from .errors import InvalidArgumentError, NonFiniteError, SnapshotError
from .numnet import derive_seed, make_rng
from .rnd import ExplorationBonus
from .snapshot import pack, restore_rng, rng_state, unpack
from .stats import RunningMeanStd

logger = logging.getLogger(__name__)

POLICY_STREAM = 41
ACTION_STREAM = 42
SHUFFLE_STREAM = 43
WALK_STREAM = 44
REPLAY_STREAM = 45

SNAPSHOT_FORMAT = "rnd-desk-run"

RUN_COLUMNS = (
    "update", "frames", "ext_reward", "int_reward", "int_reward_norm",
    "episodes", "ep_return", "ep_length", "goal_hits",
    "pg_loss", "vf_loss_ext", "vf_loss_int", "entropy", "approx_kl", "clipfrac", "predictor_loss",
    "visited_states", "max_room", "noisy_frac",
    "obs_norm_count", "ret_norm_count", "opt_steps", "predictor_steps",
)
TIMING_COLUMNS = ("update", "wall_seconds")


def _fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.8g}"


class RunLog:
    """Append-only CSV, flushed after every row so a crash leaves a complete tail"""

    def __init__(self, path: Optional[Path], columns: Sequence[str] = RUN_COLUMNS, append: bool = False,
                 keep_through: Optional[int] = None):
        self.path = path
        self.columns = tuple(columns)
        self.rows: List[Dict[str, Any]] = []
        self._fh = None
        if path is not None:
            existing = append and path.is_file() and path.stat().st_size > 0
            if existing and keep_through is not None:
                self._truncate(path, keep_through)
            self._fh = path.open("a" if existing else "w", newline="")
            self._writer = csv.writer(self._fh, lineterminator="\n")
            if not existing:
                self._writer.writerow(self.columns)
                self._fh.flush()

    def _truncate(self, path: Path, keep_through: int) -> None:
        """Drop rows past update keep_through so the update column stays increasing"""
        with path.open(newline="") as fh:
            lines = list(csv.reader(fh))
        header, body = lines[0], lines[1:]
        if tuple(header) != self.columns:
            raise InvalidArgumentError(f"{path} has columns {header}, expected {list(self.columns)}")
        kept = [line for line in body if line and int(line[0]) <= keep_through]
        if len(kept) < len(body):
            logger.warning("dropping %d rows past update %d from %s", len(body) - len(kept), keep_through, path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(kept)

    def write(self, row: Dict[str, Any]) -> None:
        """Record one row and flush it to disk"""
        self.rows.append(row)
        if self._fh is not None:
            self._writer.writerow([_fmt(row[c]) for c in self.columns])
            self._fh.flush()

    def close(self) -> None:
        """Close the file; rows stay in memory"""
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "RunLog":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


class Trainer:
    """
    One seeded RND (or baseline) training run.

    Every random draw comes from a stream derived from config.seed, so two
    trainers built from the same config produce byte-identical logs, and a
    trainer restored from `snapshot_bytes()` continues exactly where the
    original left off.
    """

    def __init__(self, config: ExperimentConfig, bonus: Optional[ExplorationBonus] = None):
        self.config = config
        self.config_hash = config_hash(config)
        cfg = config
        self.vecenv = VecEnv.make(cfg.num_envs, cfg.seed, **cfg.env.kwargs())
        obs_dim = self.vecenv.obs_dim
        self.policy = make_policy(
            obs_dim, NUM_ACTIONS, cfg.policy_hidden, derive_seed(cfg.seed, POLICY_STREAM), cfg.learning_rate,
        )
        self.bonus = bonus if bonus is not None else make_bonus(
            cfg.bonus.kind, obs_dim, cfg.num_envs, NUM_ACTIONS,
            gamma_int=cfg.gamma_int,
            keep_prob=cfg.keep_prob,
            reduction=cfg.bonus.reduction,
            reset_return_on_done=cfg.bonus.reset_return_on_done,
            centered_return_std=cfg.bonus.centered_return_std,
            embedding_dim=cfg.bonus.embedding_dim,
            hidden=cfg.bonus.hidden,
            learning_rate=cfg.bonus.learning_rate,
            count_form=cfg.bonus.count_form,
            seed=cfg.seed,
        )
        self.policy_rms = RunningMeanStd((obs_dim,))
        self.act_rng = make_rng(cfg.seed, ACTION_STREAM)
        self.shuffle_rng = make_rng(cfg.seed, SHUFFLE_STREAM)
        self.ext_stream = StreamSpec(cfg.gamma_ext, cfg.gae_lambda, cfg.episodic_ext, cfg.ext_coef)
        self.int_stream = StreamSpec(cfg.gamma_int, cfg.gae_lambda, cfg.episodic_int, cfg.int_coef)

        self.update = 0
        self.frames = 0
        self.goal_hits = 0
        self.visited = np.zeros(self.vecenv.template.num_cells, dtype=bool)
        self.counters: Counter = Counter()
        self.events: List[str] = []
        self.warmed_up = False
        self.last_good: Optional[bytes] = None

    # --- pipeline stages ---------------------------------------------------

    def _trace(self, event: str) -> None:
        self.events.append(event)
        self.counters[event] += 1

    def policy_input(self, obs: np.ndarray) -> np.ndarray:
        """Observations as the policy sees them"""
        if self.config.policy_obs_norm:
            return stats.normalize_obs(self.policy_rms, obs)
        return np.asarray(obs, dtype=np.float64).copy()

    def warmup(self) -> None:
        """Seed the normalizers from random-action steps and reset the envs"""
        also = (self.policy_rms,) if self.config.policy_obs_norm else ()
        rnd.warmup_obs_norm(self.bonus, self.vecenv, self.config.warmup_steps, self.config.seed, also_update=also)
        self.warmed_up = True
        self._trace("warmup")

    def collect(self):
        """K steps in every env; returns the filled buffer and finished episodes"""
        cfg = self.config
        buf = RolloutBuffer.allocate(cfg.rollout_length, cfg.num_envs, self.vecenv.obs_dim)
        episodes: List[Dict[str, Any]] = []
        obs = self.vecenv.obs.copy()
        for t in range(cfg.rollout_length):
            policy_obs = self.policy_input(obs)
            actions, log_probs, v_ext, v_int = agent.act(self.policy, policy_obs, self.act_rng)
            next_obs, rewards, dones, info = self.vecenv.step(actions)
            final_obs = info["final_obs"]
            state_index = info["state_index"]

            self.bonus.observe(state_index)
            if self.bonus.active:
                intrinsic = self.bonus.bonus(obs, actions, final_obs, state_index)
                if not np.all(np.isfinite(intrinsic)):
                    diagnostics = {"update": self.update, "step": t, "intrinsic": intrinsic.tolist()}
                    logger.error("non-finite intrinsic reward: %s", diagnostics)
                    raise NonFiniteError("intrinsic reward is not finite", diagnostics)
                self.bonus.ret_norm.update(intrinsic, dones)
                self._trace("ret_norm")
            else:
                intrinsic = np.zeros(cfg.num_envs)
            if cfg.clip_ext_reward:
                rewards = np.clip(rewards, -1.0, 1.0)

            buf.add(
                t,
                obs=policy_obs, raw_obs=obs, next_obs=final_obs, actions=actions, log_probs=log_probs,
                ext_rewards=rewards, int_rewards=intrinsic, dones=dones,
                values_ext=v_ext, values_int=v_int, state_index=state_index,
            )
            self.visited[state_index] = True
            episodes.extend(info["episodes"])
            obs = next_obs

        buf.bootstrap_ext, buf.bootstrap_int = agent.value_of(self.policy, self.policy_input(obs))
        self.frames += cfg.frames_per_update
        self._trace("collect")
        return buf, episodes

    def train_update(self) -> Dict[str, Any]:
        """One full update; returns its RunLog row"""
        cfg = self.config
        if not self.warmed_up:
            self.warmup()
        self.last_good = self.snapshot_bytes()
        self.events = []

        buf, episodes = self.collect()
        active = self.bonus.active
        zeros = np.zeros_like(buf.ext_rewards)
        if active:
            int_norm = stats.normalize_reward(self.bonus.ret_norm, buf.int_rewards)
            self._trace("normalize_reward")
        else:
            int_norm = zeros

        # reward coefficients act in reward space, before GAE
        ext = self.ext_stream.coef * buf.ext_rewards
        intr = self.int_stream.coef * int_norm
        if cfg.dual_value_heads:
            adv_ext, ret_ext = agent.compute_gae(ext, buf.values_ext, buf.bootstrap_ext, buf.dones, self.ext_stream)
            if active:
                adv_int, ret_int = agent.compute_gae(intr, buf.values_int, buf.bootstrap_int, buf.dones, self.int_stream)
            else:
                adv_int, ret_int = zeros, zeros
        else:
            adv_ext, ret_ext = agent.compute_gae(ext + intr, buf.values_ext, buf.bootstrap_ext, buf.dones,
                                                 self.ext_stream)
            adv_int, ret_int = zeros, zeros
        self._trace("gae")
        advantages = agent.combine_advantages(adv_ext, adv_int, 1.0, 1.0)

        if not cfg.freeze_obs_norm:
            batch = buf.flat("next_obs")
            stats.rms_update(self.bonus.obs_rms, batch)
            if cfg.policy_obs_norm:
                stats.rms_update(self.policy_rms, batch)
            self._trace("obs_norm")

        raw_obs, actions, next_obs = buf.flat("raw_obs"), buf.flat("actions"), buf.flat("next_obs")

        def train_bonus(idx: np.ndarray) -> float:
            if not active:
                return 0.0
            return self.bonus.train(raw_obs[idx], actions[idx], next_obs[idx])

        update_stats = agent.ppo_update(
            self.policy, buf, advantages, ret_ext, ret_int,
            cfg.epochs, cfg.minibatches, cfg.clip_eps, cfg.entropy_coef, cfg.value_coef,
            rng=self.shuffle_rng,
            normalize_advantages=cfg.normalize_advantages,
            use_int_head=active and cfg.dual_value_heads,
            max_grad_norm=cfg.max_grad_norm,
            on_minibatch=train_bonus,
        )
        self.counters["opt_steps"] += update_stats.opt_steps
        self._trace("optimize")
        self.update += 1
        return self._row(buf, int_norm, episodes, update_stats)

    def _row(self, buf: RolloutBuffer, int_norm: np.ndarray, episodes: List[Dict[str, Any]],
             update_stats: agent.UpdateStats) -> Dict[str, Any]:
        width = self.vecenv.template.room_width
        noisy_tile = self.vecenv.template.noisy_tile
        returns = [ep["return"] for ep in episodes]
        lengths = [ep["length"] for ep in episodes]
        self.goal_hits += sum(1 for ep in episodes if ep["reached_goal"])
        visited = np.flatnonzero(self.visited)
        return {
            "update": self.update,
            "frames": self.frames,
            "ext_reward": float(buf.ext_rewards.mean()),
            "int_reward": float(buf.int_rewards.mean()),
            "int_reward_norm": float(int_norm.mean()),
            "episodes": len(episodes),
            "ep_return": float(np.mean(returns)) if returns else 0.0,
            "ep_length": float(np.mean(lengths)) if lengths else 0.0,
            "goal_hits": self.goal_hits,
            "pg_loss": update_stats.pg_loss,
            "vf_loss_ext": update_stats.vf_loss_ext,
            "vf_loss_int": update_stats.vf_loss_int,
            "entropy": update_stats.entropy,
            "approx_kl": update_stats.approx_kl,
            "clipfrac": update_stats.clipfrac,
            "predictor_loss": update_stats.predictor_loss,
            "visited_states": int(visited.size),
            "max_room": int(visited.max() // width) if visited.size else 0,
            "noisy_frac": float(np.mean(buf.state_index // width == noisy_tile)) if noisy_tile is not None else 0.0,
            "obs_norm_count": int(self.bonus.obs_rms.count),
            "ret_norm_count": int(self.bonus.ret_norm.rms.count),
            "opt_steps": self.counters["opt_steps"],
            "predictor_steps": self.bonus.train_steps,
        }

    def run(
        self,
        num_updates: int,
        run_log: Optional[RunLog] = None,
        timing: Optional[RunLog] = None,
        on_update: Optional[Callable[[Dict[str, Any]], None]] = None,
        snapshot_dir: Optional[Path] = None,
    ) -> List[Dict[str, Any]]:
        """Train num_updates updates, logging each row and writing periodic snapshots"""
        rows = []
        for _ in range(num_updates):
            started = time.perf_counter()
            try:
                row = self.train_update()
            except NonFiniteError:
                if snapshot_dir is not None and self.last_good is not None:
                    path = snapshot_dir / "snapshot.bin"
                    path.write_bytes(self.last_good)
                    logger.error("training aborted; last good snapshot written to %s", path)
                raise
            rows.append(row)
            if run_log is not None:
                run_log.write(row)
            if timing is not None:
                timing.write({"update": self.update, "wall_seconds": time.perf_counter() - started})
            if on_update is not None:
                on_update(row)
            interval = self.config.snapshot_interval
            if snapshot_dir is not None and interval and self.update % interval == 0:
                (snapshot_dir / f"snapshot-{self.update:05d}.bin").write_bytes(self.snapshot_bytes())
        return rows

    # --- persistence -------------------------------------------------------

    def state_dict(self) -> Dict[str, Any]:
        """Everything needed to resume bit-exactly, config included"""
        return {
            "format": SNAPSHOT_FORMAT,
            "config": self.config.to_dict(),
            "config_hash": self.config_hash,
            "update": self.update,
            "frames": self.frames,
            "goal_hits": self.goal_hits,
            "warmed_up": self.warmed_up,
            "visited": self.visited.copy(),
            "counters": dict(sorted(self.counters.items())),
            "policy": self.policy.state_dict(),
            "policy_rms": self.policy_rms.state_dict(),
            "bonus": self.bonus.state_dict(),
            "vecenv": self.vecenv.state_dict(),
            "act_rng": rng_state(self.act_rng),
            "shuffle_rng": rng_state(self.shuffle_rng),
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        """Restore counters, nets, normalizers, envs and rng streams"""
        self.update = int(state["update"])
        self.frames = int(state["frames"])
        self.goal_hits = int(state["goal_hits"])
        self.warmed_up = bool(state["warmed_up"])
        self.visited = np.asarray(state["visited"], dtype=bool).copy()
        self.counters = Counter({k: int(v) for k, v in state["counters"].items()})
        self.policy = PolicyNet.from_state(state["policy"])
        self.policy_rms = RunningMeanStd.from_state(state["policy_rms"])
        self.bonus.load_state_dict(state["bonus"])
        self.vecenv.load_state_dict(state["vecenv"])
        self.act_rng = restore_rng(state["act_rng"])
        self.shuffle_rng = restore_rng(state["shuffle_rng"])

    def snapshot_bytes(self) -> bytes:
        """The packed state_dict, as written to snapshot.bin"""
        return pack(self.state_dict())

    @classmethod
    def from_snapshot(cls, blob: bytes, bonus: Optional[ExplorationBonus] = None) -> "Trainer":
        """Rebuild a trainer; the snapshot format and config hash must match"""
        state = unpack(blob)
        if state.get("format") != SNAPSHOT_FORMAT:
            raise SnapshotError("not a training-run snapshot")
        trainer = cls(config_from_dict(state["config"]), bonus)
        if trainer.config_hash != state["config_hash"]:
            raise SnapshotError(f"config hash mismatch: snapshot {state['config_hash']}, rebuilt {trainer.config_hash}")
        trainer.load_state_dict(state)
        return trainer


@dataclass
class TrainingResult:
    trainer: Trainer
    rows: List[Dict[str, Any]]
    out_dir: Optional[Path]


def _prepare_out(out_dir: Optional[Union[str, Path]]) -> Optional[Path]:
    if out_dir is None:
        return None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_training(
    config: ExperimentConfig,
    out_dir: Optional[Union[str, Path]] = None,
    *,
    num_updates: Optional[int] = None,
    on_update: Optional[Callable[[Dict[str, Any]], None]] = None,
    bonus: Optional[ExplorationBonus] = None,
) -> TrainingResult:
    """Warm-up, N updates, RunLog + timing sidecar + config.resolved + snapshot.bin"""
    out = _prepare_out(out_dir)
    trainer = Trainer(config, bonus)
    logger.info("training %s bonus for %d updates (%d frames), config %s",
                trainer.bonus.kind, num_updates or config.num_updates, config.total_frames, trainer.config_hash)
    if out is not None:
        dump_config(config, out / "config.resolved")
    trainer.warmup()
    with RunLog(out / "run.csv" if out else None) as run_log, \
            RunLog(out / "timing.csv" if out else None, TIMING_COLUMNS) as timing:
        rows = trainer.run(num_updates if num_updates is not None else config.num_updates,
                           run_log, timing, on_update, out)
    if out is not None:
        (out / "snapshot.bin").write_bytes(trainer.snapshot_bytes())
    return TrainingResult(trainer, rows, out)


def resume_training(
    snapshot: Union[str, Path, bytes],
    out_dir: Optional[Union[str, Path]] = None,
    *,
    num_updates: Optional[int] = None,
    on_update: Optional[Callable[[Dict[str, Any]], None]] = None,
) -> TrainingResult:
    """
    Continue a run from its snapshot, appending to run.csv in out_dir.

    Rows already logged past the snapshot's update are dropped first, so
    resuming from a periodic snapshot rewrites the tail it replays.

    Without num_updates the run continues up to config.num_updates.
    """
    if isinstance(snapshot, (bytes, bytearray)):
        blob = bytes(snapshot)
    else:
        path = Path(snapshot)
        blob = path.read_bytes()
        out_dir = out_dir if out_dir is not None else path.parent
    trainer = Trainer.from_snapshot(blob)
    remaining = num_updates if num_updates is not None else max(0, trainer.config.num_updates - trainer.update)
    logger.info("resuming at update %d for %d more updates", trainer.update, remaining)
    out = _prepare_out(out_dir)
    with RunLog(out / "run.csv" if out else None, append=True, keep_through=trainer.update) as run_log, \
            RunLog(out / "timing.csv" if out else None, TIMING_COLUMNS, append=True,
                   keep_through=trainer.update) as timing:
        rows = trainer.run(remaining, run_log, timing, on_update, out)
    if out is not None:
        (out / "snapshot.bin").write_bytes(trainer.snapshot_bytes())
    return TrainingResult(trainer, rows, out)


# --- novelty ---------------------------------------------------------------

def run_novelty(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> List[NoveltyCurve]:
    """One curve per novelty seed, written as curve.csv beside config.resolved"""
    nov = config.novelty
    digest = config_hash(config)
    dataset = load_dataset(nov.mnist_dir, config.seed)
    logger.info("novelty experiment on %s data, target class %d, n in %s", dataset.source, nov.target_class,
                nov.n_values)
    curves = [
        novelty_experiment(
            dataset, nov.target_class, nov.n_values,
            base_class=nov.base_class, total=nov.total, embedding_dim=nov.embedding_dim, hidden=nov.hidden,
            train_steps=nov.train_steps, batch_size=nov.batch_size, learning_rate=nov.learning_rate,
            test_size=nov.test_size, seed=seed, config_hash=digest,
        )
        for seed in nov.seeds
    ]
    out = _prepare_out(out_dir)
    if out is not None:
        dump_config(config, out / "config.resolved")
        write_curve_csv(out / "curve.csv", curves)
    return curves


# --- noisy TV ----------------------------------------------------------------

@dataclass
class TileContrast:
    kind: str
    seed: int
    noisy: float
    deterministic: float
    train_steps: int = 0
    converged: bool = False

    @property
    def ratio(self) -> float:
        """Noisy over matched error; inf when the matched error is zero"""
        return self.noisy / self.deterministic if self.deterministic > 0 else float("inf")

    def as_dict(self) -> Dict[str, Any]:
        return {
            "noisy": self.noisy,
            "deterministic": self.deterministic,
            "ratio": self.ratio,
            "train_steps": self.train_steps,
            "converged": self.converged,
        }


def _plateaued(previous: Sequence[float], current: Sequence[float], tol: float) -> bool:
    return all(abs(c - p) <= tol * max(abs(p), 1e-12) for p, c in zip(previous, current))


def replay_tile_contrast(config: ExperimentConfig, kind: str, seed: int,
                         transitions: Dict[str, np.ndarray]) -> TileContrast:
    """
    Train one bonus off-policy on a fixed random-walk replay and compare its
    converged value on transitions into the noisy room vs the matched room.

    Training runs for at least noisytv.train_steps, then stops once both tile
    means change by less than plateau_tol between two checks, or at
    max_train_steps.
    """
    tv = config.noisytv
    obs = transitions["obs"].reshape(-1, transitions["obs"].shape[-1])
    next_obs = transitions["next_obs"].reshape(obs.shape)
    actions = transitions["actions"].reshape(-1)
    rooms = transitions["state_index"].reshape(-1) // config.env.room_width
    noisy = rooms == config.env.noisy_tile
    matched = rooms == tv.deterministic_tile
    if not noisy.any() or not matched.any():
        raise InvalidArgumentError(
            f"random walk of {tv.walk_steps} steps never reached both rooms {config.env.noisy_tile} and "
            f"{tv.deterministic_tile}; raise noisytv.walk_steps or shrink the corridor"
        )

    bonus = make_bonus(
        kind, obs.shape[1], config.num_envs, NUM_ACTIONS,
        gamma_int=config.gamma_int, keep_prob=1.0, reduction=config.bonus.reduction,
        embedding_dim=config.bonus.embedding_dim, hidden=config.bonus.hidden,
        learning_rate=tv.learning_rate, seed=seed,
    )
    bonus.obs_rms.update(next_obs)
    batches = make_rng(seed, REPLAY_STREAM)

    def tile_means() -> Tuple[float, float]:
        values = bonus.bonus(obs, actions, next_obs)
        return float(values[noisy].mean()), float(values[matched].mean())

    steps, converged = 0, False
    previous = None
    while steps < tv.max_train_steps:
        chunk = min(tv.eval_every, tv.max_train_steps - steps)
        for _ in range(chunk):
            idx = batches.integers(obs.shape[0], size=tv.batch_size)
            bonus.train(obs[idx], actions[idx], next_obs[idx])
        steps += chunk
        current = tile_means()
        if not np.all(np.isfinite(current)):
            raise NonFiniteError(f"{kind} bonus diverged during replay training",
                                 {"kind": kind, "seed": seed, "step": steps})
        logger.debug("%s seed %d step %d: noisy %.4g, matched %.4g", kind, seed, steps, *current)
        if steps >= tv.train_steps and previous is not None and _plateaued(previous, current, tv.plateau_tol):
            converged = True
            break
        previous = current
    noisy_mean, matched_mean = tile_means()
    return TileContrast(kind, seed, noisy_mean, matched_mean, steps, converged)


def agent_occupancy(config: ExperimentConfig, kind: str, seed: int) -> float:
    """Fraction of steps spent in the noisy room over the second half of a short run"""
    updates = config.noisytv.agent_updates
    agent_cfg = replace(config, seed=seed, num_updates=updates, bonus=replace(config.bonus, kind=kind))
    trainer = Trainer(agent_cfg)
    trainer.warmup()
    rows = trainer.run(updates)
    tail = rows[len(rows) // 2:] or rows
    return float(np.mean([row["noisy_frac"] for row in tail]))


def run_noisytv_contrast(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None,
                         *, with_agents: bool = True) -> Dict[str, Any]:
    """
    Replay contrast of the rnd and dynamics bonuses per seed, then (with_agents)
    noisy-room occupancy of full agents driven by each bonus per agent seed.

    Writes noisytv_report.yaml; `passed` needs every replay check and, when
    agents ran, the dynamics agent out-staying the rnd agent in at least
    noisytv.min_occupancy_wins seeds.
    """
    env, tv = config.env, config.noisytv
    if env.noisy_tile is None:
        raise InvalidArgumentError("the noisy-TV contrast needs env.noisy_tile")
    if not 0 <= tv.deterministic_tile < env.num_rooms or tv.deterministic_tile == env.noisy_tile:
        raise InvalidArgumentError(
            f"noisytv.deterministic_tile must be another room index below {env.num_rooms}, got {tv.deterministic_tile}"
        )

    per_seed = []
    for seed in tv.seeds:
        vecenv = VecEnv.make(config.num_envs, seed, **env.kwargs())
        transitions = collect_random_transitions(vecenv, tv.walk_steps, make_rng(seed, WALK_STREAM))
        record: Dict[str, Any] = {"seed": int(seed)}
        for kind in ("rnd", "dynamics"):
            contrast = replay_tile_contrast(config, kind, seed, transitions)
            logger.info("seed %d %s: noisy %.4g, matched %.4g, ratio %.3g after %d steps", seed, kind,
                        contrast.noisy, contrast.deterministic, contrast.ratio, contrast.train_steps)
            record[kind] = contrast.as_dict()
        per_seed.append(record)

    low, high = tv.rnd_ratio_band
    checks = {
        "rnd_ratio_in_band": all(low <= r["rnd"]["ratio"] <= high for r in per_seed),
        "dynamics_ratio_above": all(r["dynamics"]["ratio"] >= tv.min_dynamics_ratio for r in per_seed),
    }
    occupancy = []
    if with_agents:
        for seed in tv.agent_seeds:
            entry = {"seed": int(seed)}
            for kind in ("rnd", "dynamics"):
                entry[kind] = agent_occupancy(config, kind, seed)
            logger.info("seed %d occupancy: rnd %.3f, dynamics %.3f", seed, entry["rnd"], entry["dynamics"])
            occupancy.append(entry)
        wins = sum(1 for entry in occupancy if entry["dynamics"] > entry["rnd"])
        checks["dynamics_occupancy_higher"] = wins >= tv.min_occupancy_wins

    report = {
        "config_hash": config_hash(config),
        "noisy_tile": env.noisy_tile,
        "deterministic_tile": tv.deterministic_tile,
        "rnd_ratio_band": [low, high],
        "min_dynamics_ratio": tv.min_dynamics_ratio,
        "seeds": per_seed,
        "checks": checks,
        "passed": all(checks.values()),
    }
    if with_agents:
        report["occupancy"] = occupancy
        report["occupancy_wins"] = wins
        report["min_occupancy_wins"] = tv.min_occupancy_wins
    out = _prepare_out(out_dir)
    if out is not None:
        dump_config(config, out / "config.resolved")
        (out / "noisytv_report.yaml").write_text(yaml.safe_dump(report, sort_keys=False))
    return report


# --- acceptance checks -----------------------------------------------------------

@dataclass
class CheckReport:
    source: Path
    passed: bool
    lines: List[str] = field(default_factory=list)


def check_report(path: Union[str, Path], required: int = 4) -> CheckReport:
    """Verdict for a curve.csv (Spearman per seed) or a noisytv_report.yaml"""
    path = Path(path)
    if path.is_dir():
        for name in ("curve.csv", "noisytv_report.yaml"):
            if (path / name).is_file():
                path = path / name
                break
    if not path.is_file():
        raise InvalidArgumentError(f"nothing to check at {path}")

    if path.suffix == ".csv":
        result = check_curves(read_curve_csv(path), required)
        lines = [f"seed {seed}: spearman {rho:+.3f}" for seed, rho in sorted(result.correlations.items())]
        lines.append(f"{result.negative} of {len(result.correlations)} seeds negative (need {required})")
        return CheckReport(path, result.passed, lines)

    try:
        report = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise InvalidArgumentError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(report, dict) or "seeds" not in report:
        raise InvalidArgumentError(f"{path} is not a noisy-TV report")
    lines = [
        f"seed {r['seed']}: rnd ratio {r['rnd']['ratio']:.3g}, dynamics ratio {r['dynamics']['ratio']:.3g}"
        for r in report["seeds"]
    ]
    lines.extend(
        f"seed {o['seed']}: occupancy rnd {o['rnd']:.3f}, dynamics {o['dynamics']:.3f}"
        for o in report.get("occupancy", [])
    )
    lines.extend(f"{name}: {value}" for name, value in report["checks"].items())
    return CheckReport(path, bool(report["passed"]), lines)
