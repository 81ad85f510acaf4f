"""
Random network distillation exploration bonus

A frozen, randomly initialized target net f embeds whitened observations;
a predictor f^ is trained to match it. The bonus on s_{t+1} is the squared
embedding error, high where the predictor has seen little similar data.
"""

import logging
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np

from .envs import VecEnv, collect_random_transitions
from .errors import InvalidArgumentError, ShapeError
from .numnet import (
    Activation,
    AdamState,
    DenseNet,
    InitScheme,
    adam_from_state,
    adam_state_dict,
    adam_step,
    backward,
    derive_seed,
    forward,
    init_dense_net,
    make_rng,
    net_from_state,
    net_state,
)
from .snapshot import restore_rng, rng_state
from .stats import ReturnNormalizer, RunningMeanStd, normalize_obs

logger = logging.getLogger(__name__)

TARGET_STREAM = 21
PREDICTOR_STREAM = 22
DROPOUT_STREAM = 23
WARMUP_STREAM = 24

REDUCTIONS = ("mean", "sum")


def embedding_error(pred: np.ndarray, target: np.ndarray, reduction: str = "mean") -> np.ndarray:
    """Per-sample squared error, averaged (or summed) over embedding dims"""
    sq = (pred - target) ** 2
    return sq.mean(axis=1) if reduction == "mean" else sq.sum(axis=1)


def fit_step(net: DenseNet, opt: AdamState, inputs: np.ndarray, targets: np.ndarray, reduction: str = "mean") -> float:
    """One Adam step on the batch-mean embedding error; returns the pre-step loss"""
    pred, cache = forward(net, inputs)
    if pred.shape != targets.shape:
        raise ShapeError(f"prediction shape {pred.shape} does not match target shape {targets.shape}")
    loss = float(embedding_error(pred, targets, reduction).mean())
    scale = pred.shape[0] * (pred.shape[1] if reduction == "mean" else 1)
    grads, _ = backward(net, cache, 2.0 * (pred - targets) / scale)
    adam_step(opt, net, grads)
    return loss


class ExplorationBonus:
    """
    Shared shape of every intrinsic reward source.

    Holds the observation normalizer used by its own networks, the intrinsic
    return normalizer, and the experience-dropout stream. `active` is False
    for the no-bonus control, which switches the intrinsic stream off.
    """

    kind = "base"
    active = True

    def __init__(
        self,
        obs_dim: int,
        num_envs: int,
        *,
        gamma_int: float = 0.99,
        keep_prob: float = 1.0,
        reduction: str = "mean",
        reset_return_on_done: bool = False,
        centered_return_std: bool = True,
        seed: int = 0,
    ):
        if not 0.0 < keep_prob <= 1.0:
            raise InvalidArgumentError(f"keep_prob must lie in (0, 1], got {keep_prob}")
        if reduction not in REDUCTIONS:
            raise InvalidArgumentError(f"reduction must be one of {REDUCTIONS}, got {reduction!r}")
        self.obs_dim = int(obs_dim)
        self.obs_rms = RunningMeanStd((self.obs_dim,))
        self.ret_norm = ReturnNormalizer(num_envs, gamma_int, reset_return_on_done, centered_return_std)
        self.keep_prob = float(keep_prob)
        self.reduction = reduction
        self.rng = make_rng(seed, DROPOUT_STREAM)
        self.train_steps = 0

    def observe(self, state_index: np.ndarray) -> None:
        """Hook called once per collected step before `bonus`"""

    def bonus(self, obs: np.ndarray, actions: np.ndarray, next_obs: np.ndarray,
              state_index: Optional[np.ndarray] = None) -> np.ndarray:
        raise NotImplementedError

    def train(self, obs: np.ndarray, actions: np.ndarray, next_obs: np.ndarray) -> float:
        return 0.0

    def dropout_mask(self, n: int) -> np.ndarray:
        return self.rng.random(n) < self.keep_prob

    def state_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "obs_rms": self.obs_rms.state_dict(),
            "ret_norm": self.ret_norm.state_dict(),
            "rng": rng_state(self.rng),
            "train_steps": self.train_steps,
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        if state["kind"] != self.kind:
            raise InvalidArgumentError(f"snapshot holds a {state['kind']!r} bonus, not {self.kind!r}")
        self.obs_rms = RunningMeanStd.from_state(state["obs_rms"])
        self.ret_norm = ReturnNormalizer.from_state(state["ret_norm"])
        self.rng = restore_rng(state["rng"])
        self.train_steps = int(state["train_steps"])


class RndBonus(ExplorationBonus):
    """Frozen target f, trained predictor f^ with one extra hidden layer"""

    kind = "rnd"

    def __init__(
        self,
        obs_dim: int,
        num_envs: int,
        *,
        embedding_dim: int = 64,
        hidden: int = 64,
        learning_rate: float = 1e-4,
        seed: int = 0,
        **kwargs: Any,
    ):
        super().__init__(obs_dim, num_envs, seed=seed, **kwargs)
        self.embedding_dim = int(embedding_dim)
        self.target = init_dense_net(
            [obs_dim, hidden, hidden, embedding_dim],
            InitScheme.SCALED_UNIFORM,
            derive_seed(seed, TARGET_STREAM),
            hidden_activation=Activation.LEAKY_RELU,
            trainable=False,
        )
        self.predictor = init_dense_net(
            [obs_dim, hidden, hidden, hidden, embedding_dim],
            InitScheme.SCALED_UNIFORM,
            derive_seed(seed, PREDICTOR_STREAM),
            hidden_activation=Activation.LEAKY_RELU,
        )
        self.predictor_opt = AdamState.for_net(self.predictor, learning_rate)

    def bonus(self, obs, actions, next_obs, state_index=None):
        return intrinsic_reward(self, next_obs)

    def train(self, obs, actions, next_obs):
        return train_predictor(self, next_obs)

    def state_dict(self) -> Dict[str, Any]:
        state = super().state_dict()
        state.update(
            target=net_state(self.target),
            predictor=net_state(self.predictor),
            predictor_opt=adam_state_dict(self.predictor_opt),
        )
        return state

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        super().load_state_dict(state)
        self.target = net_from_state(state["target"])
        self.predictor = net_from_state(state["predictor"])
        self.predictor_opt = adam_from_state(state["predictor_opt"])


def intrinsic_reward(rnd: RndBonus, next_obs_batch: np.ndarray) -> np.ndarray:
    """Bonus per observation: embedding error of f^ against f on whitened s_{t+1}"""
    z = normalize_obs(rnd.obs_rms, np.asarray(next_obs_batch, dtype=np.float64))
    target_emb, _ = forward(rnd.target, z)
    pred_emb, _ = forward(rnd.predictor, z)
    return embedding_error(pred_emb, target_emb, rnd.reduction)


def train_predictor(rnd: RndBonus, obs_batch: np.ndarray) -> float:
    """
    One Adam step of the predictor on a Bernoulli(keep_prob) subsample.

    Returns the pre-step loss over the kept elements, or 0.0 without a step
    when nothing was kept.
    """
    obs_batch = np.asarray(obs_batch, dtype=np.float64)
    if obs_batch.ndim != 2 or obs_batch.shape[0] == 0:
        raise ShapeError(f"expected a non-empty (batch, obs_dim) array, got shape {obs_batch.shape}")
    keep = rnd.dropout_mask(obs_batch.shape[0])
    if not keep.any():
        logger.debug("experience dropout kept no elements; skipping predictor step")
        return 0.0
    z = normalize_obs(rnd.obs_rms, obs_batch[keep])
    target_emb, _ = forward(rnd.target, z)
    rnd.train_steps += 1
    return fit_step(rnd.predictor, rnd.predictor_opt, z, target_emb, rnd.reduction)


def warmup_obs_norm(
    rnd: ExplorationBonus,
    vecenv: VecEnv,
    m_steps: int,
    seed: int = 0,
    also_update: Iterable[RunningMeanStd] = (),
) -> Tuple[ExplorationBonus, np.ndarray]:
    """
    Seed the observation normalizer from M random-action steps per env.

    The same observations optionally feed other normalizers (the policy's).
    The env is reset afterwards; returns the bonus and the fresh start obs.
    """
    if m_steps < 1:
        raise InvalidArgumentError(f"warm-up needs at least one step, got {m_steps}")
    vecenv.reset(seed)
    batch = collect_random_transitions(vecenv, m_steps, make_rng(seed, WARMUP_STREAM))
    next_obs = batch["next_obs"].reshape(-1, vecenv.obs_dim)
    rnd.obs_rms.update(next_obs)
    for rms in also_update:
        rms.update(next_obs)
    logger.debug("observation normalizer warmed up on %d observations", next_obs.shape[0])
    return rnd, vecenv.reset()
