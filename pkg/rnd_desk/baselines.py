"""
Comparison bonuses run under the same harness as RND

Forward dynamics on random features, autoencoder reconstruction error,
tabular visit counts, and the no-bonus control.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .numnet import (
    Activation,
    AdamState,
    InitScheme,
    adam_from_state,
    adam_state_dict,
    derive_seed,
    forward,
    init_dense_net,
    net_from_state,
    net_state,
)
from .rnd import PREDICTOR_STREAM, TARGET_STREAM, ExplorationBonus, RndBonus, embedding_error, fit_step
from .stats import normalize_obs

logger = logging.getLogger(__name__)

COUNT_FORMS = ("inverse", "inverse_sqrt")


def one_hot(actions: np.ndarray, num_actions: int) -> np.ndarray:
    actions = np.asarray(actions, dtype=np.int64).reshape(-1)
    encoded = np.zeros((actions.shape[0], num_actions))
    encoded[np.arange(actions.shape[0]), actions] = 1.0
    return encoded


class DynamicsBonus(ExplorationBonus):
    """
    Predicts the frozen random features of s_{t+1} from (s_t, a_t).

    Shares every setting with RndBonus (feature net, optimizer, keep
    probability, normalizers); only the predictor's input changes.
    """

    kind = "dynamics"

    def __init__(
        self,
        obs_dim: int,
        num_envs: int,
        num_actions: int,
        *,
        embedding_dim: int = 64,
        hidden: int = 64,
        learning_rate: float = 1e-4,
        seed: int = 0,
        **kwargs: Any,
    ):
        super().__init__(obs_dim, num_envs, seed=seed, **kwargs)
        self.num_actions = int(num_actions)
        self.embedding_dim = int(embedding_dim)
        self.feature_net = init_dense_net(
            [obs_dim, hidden, hidden, embedding_dim],
            InitScheme.SCALED_UNIFORM,
            derive_seed(seed, TARGET_STREAM),
            hidden_activation=Activation.LEAKY_RELU,
            trainable=False,
        )
        self.predictor = init_dense_net(
            [obs_dim + num_actions, hidden, hidden, hidden, embedding_dim],
            InitScheme.SCALED_UNIFORM,
            derive_seed(seed, PREDICTOR_STREAM),
            hidden_activation=Activation.LEAKY_RELU,
        )
        self.predictor_opt = AdamState.for_net(self.predictor, learning_rate)

    def predictor_inputs(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        z = normalize_obs(self.obs_rms, np.asarray(obs, dtype=np.float64))
        return np.concatenate([z, one_hot(actions, self.num_actions)], axis=1)

    def features(self, next_obs: np.ndarray) -> np.ndarray:
        emb, _ = forward(self.feature_net, normalize_obs(self.obs_rms, np.asarray(next_obs, dtype=np.float64)))
        return emb

    def predict(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        emb, _ = forward(self.predictor, self.predictor_inputs(obs, actions))
        return emb

    def bonus(self, obs, actions, next_obs, state_index=None):
        return dynamics_bonus(self, obs, actions, next_obs)

    def train(self, obs, actions, next_obs):
        return train_dynamics(self, obs, actions, next_obs)

    def state_dict(self) -> Dict[str, Any]:
        state = super().state_dict()
        state.update(
            feature_net=net_state(self.feature_net),
            predictor=net_state(self.predictor),
            predictor_opt=adam_state_dict(self.predictor_opt),
        )
        return state

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        super().load_state_dict(state)
        self.feature_net = net_from_state(state["feature_net"])
        self.predictor = net_from_state(state["predictor"])
        self.predictor_opt = adam_from_state(state["predictor_opt"])


def dynamics_bonus(db: DynamicsBonus, obs: np.ndarray, actions: np.ndarray, next_obs: np.ndarray) -> np.ndarray:
    return embedding_error(db.predict(obs, actions), db.features(next_obs), db.reduction)


def train_dynamics(db: DynamicsBonus, obs: np.ndarray, actions: np.ndarray, next_obs: np.ndarray) -> float:
    """Same schedule as train_predictor: Bernoulli keep mask, one Adam step"""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] == 0:
        raise ShapeError(f"expected a non-empty (batch, obs_dim) array, got shape {obs.shape}")
    keep = db.dropout_mask(obs.shape[0])
    if not keep.any():
        logger.debug("experience dropout kept no elements; skipping dynamics step")
        return 0.0
    targets = db.features(np.asarray(next_obs)[keep])
    db.train_steps += 1
    return fit_step(db.predictor, db.predictor_opt, db.predictor_inputs(obs[keep], np.asarray(actions)[keep]),
                    targets, db.reduction)


class AutoencoderBonus(ExplorationBonus):
    """Reconstruction error of a bottlenecked autoencoder on whitened s_{t+1}"""

    kind = "autoencoder"

    def __init__(
        self,
        obs_dim: int,
        num_envs: int,
        *,
        hidden: int = 64,
        bottleneck: Optional[int] = None,
        learning_rate: float = 1e-4,
        seed: int = 0,
        **kwargs: Any,
    ):
        super().__init__(obs_dim, num_envs, seed=seed, **kwargs)
        self.bottleneck = int(bottleneck) if bottleneck is not None else max(2, obs_dim // 2)
        self.net = init_dense_net(
            [obs_dim, hidden, self.bottleneck, hidden, obs_dim],
            InitScheme.SCALED_UNIFORM,
            derive_seed(seed, PREDICTOR_STREAM),
            hidden_activation=Activation.LEAKY_RELU,
        )
        self.opt = AdamState.for_net(self.net, learning_rate)

    def bonus(self, obs, actions, next_obs, state_index=None):
        return autoencoder_bonus(self, next_obs)

    def train(self, obs, actions, next_obs):
        return train_autoencoder(self, next_obs)

    def state_dict(self) -> Dict[str, Any]:
        state = super().state_dict()
        state.update(net=net_state(self.net), opt=adam_state_dict(self.opt))
        return state

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        super().load_state_dict(state)
        self.net = net_from_state(state["net"])
        self.opt = adam_from_state(state["opt"])


def autoencoder_bonus(ae: AutoencoderBonus, obs: np.ndarray) -> np.ndarray:
    z = normalize_obs(ae.obs_rms, np.asarray(obs, dtype=np.float64))
    recon, _ = forward(ae.net, z)
    return embedding_error(recon, z, "mean")


def train_autoencoder(ae: AutoencoderBonus, obs: np.ndarray) -> float:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] == 0:
        raise ShapeError(f"expected a non-empty (batch, obs_dim) array, got shape {obs.shape}")
    keep = ae.dropout_mask(obs.shape[0])
    if not keep.any():
        return 0.0
    z = normalize_obs(ae.obs_rms, obs[keep])
    ae.train_steps += 1
    return fit_step(ae.net, ae.opt, z, z, "mean")


@dataclass
class CountTable:
    """
    Visit counts n(s) keyed by state index.

    Querying a state that was never visited returns 1, as if it were a
    first visit, without touching the count.
    """

    form: str = "inverse_sqrt"
    counts: Counter = field(default_factory=Counter)

    def __post_init__(self) -> None:
        if self.form not in COUNT_FORMS:
            raise InvalidArgumentError(f"count bonus form must be one of {COUNT_FORMS}, got {self.form!r}")


def record_visit(table: CountTable, state_index: int) -> int:
    table.counts[int(state_index)] += 1
    return table.counts[int(state_index)]


def count_bonus(table: CountTable, state_index: int) -> float:
    n = table.counts[int(state_index)]
    if n == 0:
        return 1.0
    return 1.0 / n if table.form == "inverse" else 1.0 / np.sqrt(n)


class CountBonus(ExplorationBonus):
    """Exact tabular bonus 1/n(s) or 1/sqrt(n(s)) on the state reached"""

    kind = "count"

    def __init__(self, obs_dim: int, num_envs: int, *, form: str = "inverse_sqrt", seed: int = 0, **kwargs: Any):
        super().__init__(obs_dim, num_envs, seed=seed, **kwargs)
        self.table = CountTable(form)

    def observe(self, state_index: np.ndarray) -> None:
        for s in np.asarray(state_index).reshape(-1):
            record_visit(self.table, s)

    def bonus(self, obs, actions, next_obs, state_index=None):
        if state_index is None:
            raise InvalidArgumentError("the count bonus needs state indices")
        return np.array([count_bonus(self.table, s) for s in np.asarray(state_index).reshape(-1)])

    @property
    def visited_states(self) -> int:
        return len(self.table.counts)

    def state_dict(self) -> Dict[str, Any]:
        state = super().state_dict()
        state.update(form=self.table.form, counts={str(s): n for s, n in sorted(self.table.counts.items())})
        return state

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        super().load_state_dict(state)
        self.table = CountTable(state["form"], Counter({int(s): int(n) for s, n in state["counts"].items()}))


class NoBonus(ExplorationBonus):
    """Plain PPO control: zero bonus and the intrinsic stream switched off"""

    kind = "none"
    active = False

    def bonus(self, obs, actions, next_obs, state_index=None):
        return np.zeros(np.asarray(next_obs).shape[0])


BONUS_KINDS = ("rnd", "dynamics", "autoencoder", "count", "none")


def make_bonus(kind: str, obs_dim: int, num_envs: int, num_actions: int, **kwargs: Any) -> ExplorationBonus:
    """Build a bonus by name; kwargs not used by that kind are ignored"""
    shared = {k: kwargs[k] for k in ("gamma_int", "keep_prob", "reduction", "reset_return_on_done",
                                     "centered_return_std", "seed") if k in kwargs}
    nets = {k: kwargs[k] for k in ("embedding_dim", "hidden", "learning_rate") if k in kwargs}
    if kind == "rnd":
        return RndBonus(obs_dim, num_envs, **nets, **shared)
    if kind == "dynamics":
        return DynamicsBonus(obs_dim, num_envs, num_actions, **nets, **shared)
    if kind == "autoencoder":
        nets.pop("embedding_dim", None)
        return AutoencoderBonus(obs_dim, num_envs, **nets, **shared)
    if kind == "count":
        return CountBonus(obs_dim, num_envs, form=kwargs.get("count_form", "inverse_sqrt"), **shared)
    if kind == "none":
        return NoBonus(obs_dim, num_envs, **shared)
    raise InvalidArgumentError(f"unknown bonus kind {kind!r}; expected one of {BONUS_KINDS}")
