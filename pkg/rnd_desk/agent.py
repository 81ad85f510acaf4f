"""
PPO learner with separate extrinsic and intrinsic value heads

The policy is one DenseNet: its hidden layers form the shared trunk and the
rows of its final layer are the action logits followed by V_E and V_I, so
both value heads read the same trunk features.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError, NonFiniteError, ShapeError
from .numnet import (
    SQRT2,
    AdamState,
    DenseNet,
    InitScheme,
    adam_from_state,
    adam_state_dict,
    adam_step,
    backward,
    clip_grad_norm,
    forward,
    init_dense_net,
    net_from_state,
    net_state,
)

logger = logging.getLogger(__name__)

ADV_EPS = 1e-8
LOGIT_GAIN = 0.01


@dataclass
class StreamSpec:
    """Discount, GAE lambda, episode semantics and reward weight of one reward stream"""

    gamma: float
    gae_lambda: float = 0.95
    episodic: bool = True
    coef: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidArgumentError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise InvalidArgumentError(f"gae_lambda must lie in [0, 1], got {self.gae_lambda}")
        if self.coef < 0.0:
            raise InvalidArgumentError(f"reward coefficient must be non-negative, got {self.coef}")


def extrinsic_stream() -> StreamSpec:
    return StreamSpec(gamma=0.999, gae_lambda=0.95, episodic=True, coef=2.0)


def intrinsic_stream() -> StreamSpec:
    return StreamSpec(gamma=0.99, gae_lambda=0.95, episodic=False, coef=1.0)


@dataclass
class PolicyNet:
    net: DenseNet
    num_actions: int
    opt: AdamState

    @property
    def obs_dim(self) -> int:
        return self.net.in_dim

    def split(self, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = self.num_actions
        return Y[:, :a], Y[:, a], Y[:, a + 1]

    def state_dict(self) -> Dict[str, Any]:
        return {"net": net_state(self.net), "num_actions": self.num_actions, "opt": adam_state_dict(self.opt)}

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "PolicyNet":
        return cls(net_from_state(state["net"]), int(state["num_actions"]), adam_from_state(state["opt"]))


def make_policy(obs_dim: int, num_actions: int, hidden: Sequence[int] = (64, 64), seed: int = 0,
                learning_rate: float = 1e-4) -> PolicyNet:
    """Orthogonal init (gain sqrt 2) with logit rows scaled down for a near-uniform start"""
    net = init_dense_net(
        [obs_dim, *hidden, num_actions + 2],
        InitScheme.ORTHOGONAL,
        seed,
        gain=SQRT2,
        output_gain=1.0,
    )
    net.weights[-1][:num_actions] *= LOGIT_GAIN
    return PolicyNet(net, num_actions, AdamState.for_net(net, learning_rate))


@dataclass
class RolloutBuffer:
    """K steps x E envs of experience; every array leads with (K, E)"""

    obs: np.ndarray
    raw_obs: np.ndarray
    next_obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    ext_rewards: np.ndarray
    int_rewards: np.ndarray
    dones: np.ndarray
    values_ext: np.ndarray
    values_int: np.ndarray
    state_index: np.ndarray
    bootstrap_ext: np.ndarray
    bootstrap_int: np.ndarray

    @classmethod
    def allocate(cls, rollout_length: int, num_envs: int, obs_dim: int) -> "RolloutBuffer":
        k, e = rollout_length, num_envs
        return cls(
            obs=np.zeros((k, e, obs_dim)),
            raw_obs=np.zeros((k, e, obs_dim)),
            next_obs=np.zeros((k, e, obs_dim)),
            actions=np.zeros((k, e), dtype=np.int64),
            log_probs=np.zeros((k, e)),
            ext_rewards=np.zeros((k, e)),
            int_rewards=np.zeros((k, e)),
            dones=np.zeros((k, e), dtype=bool),
            values_ext=np.zeros((k, e)),
            values_int=np.zeros((k, e)),
            state_index=np.zeros((k, e), dtype=np.int64),
            bootstrap_ext=np.zeros(e),
            bootstrap_int=np.zeros(e),
        )

    @property
    def rollout_length(self) -> int:
        return self.actions.shape[0]

    @property
    def num_envs(self) -> int:
        return self.actions.shape[1]

    def add(self, t: int, **fields: np.ndarray) -> None:
        for name, value in fields.items():
            getattr(self, name)[t] = value

    def flat(self, name: str) -> np.ndarray:
        array = getattr(self, name)
        return array.reshape(-1, *array.shape[2:])


@dataclass
class UpdateStats:
    pg_loss: float = 0.0
    vf_loss_ext: float = 0.0
    vf_loss_int: float = 0.0
    entropy: float = 0.0
    approx_kl: float = 0.0
    clipfrac: float = 0.0
    grad_norm: float = 0.0
    predictor_loss: float = 0.0
    opt_steps: int = 0
    history: List[Dict[str, float]] = field(default_factory=list, repr=False)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def act(policy: PolicyNet, obs_batch: np.ndarray, rng: np.random.Generator
        ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Sample a ~ pi(.|s); returns (actions, log_probs, v_E, v_I)"""
    Y, _ = forward(policy.net, obs_batch)
    logits, v_ext, v_int = policy.split(Y)
    logp_all = log_softmax(logits)
    cdf = np.cumsum(np.exp(logp_all), axis=1)
    u = rng.random(Y.shape[0])
    actions = np.minimum((cdf <= u[:, None]).sum(axis=1), policy.num_actions - 1)
    log_probs = logp_all[np.arange(Y.shape[0]), actions]
    return actions.astype(np.int64), log_probs, v_ext.copy(), v_int.copy()


def value_of(policy: PolicyNet, obs_batch: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(V_E, V_I) without sampling; used for the bootstrap values at step K"""
    Y, _ = forward(policy.net, obs_batch)
    _, v_ext, v_int = policy.split(Y)
    return v_ext.copy(), v_int.copy()


def compute_gae(rewards: np.ndarray, values: np.ndarray, bootstrap_value: np.ndarray,
                dones: np.ndarray, spec: StreamSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    GAE over a (K, E) or (K,) stream.

    mask_t is 1 - done_t for episodic streams and 1 otherwise, so a
    non-episodic stream bootstraps straight through episode ends.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones)
    bootstrap_value = np.asarray(bootstrap_value, dtype=np.float64)
    if values.shape != rewards.shape or dones.shape != rewards.shape or bootstrap_value.shape != rewards.shape[1:]:
        raise ShapeError(
            f"GAE inputs disagree: rewards {rewards.shape}, values {values.shape}, "
            f"dones {dones.shape}, bootstrap {bootstrap_value.shape}"
        )

    mask = 1.0 - dones.astype(np.float64) if spec.episodic else np.ones_like(rewards)
    advantages = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:])
    next_value = bootstrap_value
    for t in reversed(range(rewards.shape[0])):
        delta = rewards[t] + spec.gamma * next_value * mask[t] - values[t]
        running = delta + spec.gamma * spec.gae_lambda * mask[t] * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values


def combine_advantages(adv_ext: np.ndarray, adv_int: np.ndarray, c_ext: float = 1.0, c_int: float = 1.0) -> np.ndarray:
    if c_ext < 0 or c_int < 0:
        raise InvalidArgumentError(f"advantage coefficients must be non-negative, got {c_ext}, {c_int}")
    adv_ext = np.asarray(adv_ext, dtype=np.float64)
    adv_int = np.asarray(adv_int, dtype=np.float64)
    if adv_ext.shape != adv_int.shape:
        raise ShapeError(f"advantage shapes differ: {adv_ext.shape} vs {adv_int.shape}")
    return c_ext * adv_ext + c_int * adv_int


def ppo_loss(
    policy: PolicyNet,
    obs: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns_ext: np.ndarray,
    returns_int: np.ndarray,
    *,
    clip_eps: float = 0.1,
    entropy_coef: float = 0.001,
    value_coef: float = 0.5,
    use_int_head: bool = True,
) -> Tuple[float, List[np.ndarray], Dict[str, float]]:
    """Clipped surrogate + value + entropy loss on one minibatch, with exact gradients"""
    B = obs.shape[0]
    rows = np.arange(B)
    Y, cache = forward(policy.net, obs)
    logits, v_ext, v_int = policy.split(Y)
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    log_probs = logp_all[rows, actions]

    ratio = np.exp(log_probs - old_log_probs)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    unclipped = surr1 <= surr2
    pg_loss = -float(np.mean(np.minimum(surr1, surr2)))

    entropy_per = -(probs * logp_all).sum(axis=1)
    entropy = float(entropy_per.mean())
    vf_ext = float(np.mean((v_ext - returns_ext) ** 2))
    vf_int = float(np.mean((v_int - returns_int) ** 2)) if use_int_head else 0.0
    loss = pg_loss + value_coef * (vf_ext + vf_int) - entropy_coef * entropy

    # the clipped branch is constant in the parameters
    dlogp = np.where(unclipped, -advantages * ratio / B, 0.0)
    onehot = np.zeros_like(probs)
    onehot[rows, actions] = 1.0
    dlogits = dlogp[:, None] * (onehot - probs)
    dlogits += (entropy_coef / B) * probs * (logp_all + entropy_per[:, None])

    dY = np.zeros_like(Y)
    dY[:, :policy.num_actions] = dlogits
    dY[:, policy.num_actions] = value_coef * 2.0 * (v_ext - returns_ext) / B
    if use_int_head:
        dY[:, policy.num_actions + 1] = value_coef * 2.0 * (v_int - returns_int) / B
    grads, _ = backward(policy.net, cache, dY)

    stats = {
        "loss": loss,
        "pg_loss": pg_loss,
        "vf_loss_ext": vf_ext,
        "vf_loss_int": vf_int,
        "entropy": entropy,
        "approx_kl": float(np.mean(old_log_probs - log_probs)),
        "clipfrac": float(np.mean(np.abs(ratio - 1.0) > clip_eps)),
    }
    return loss, grads, stats


def _diagnostics(**arrays: np.ndarray) -> Dict[str, Dict[str, float]]:
    summary = {}
    for name, array in arrays.items():
        array = np.asarray(array, dtype=np.float64)
        finite = array[np.isfinite(array)]
        summary[name] = {
            "mean": float(finite.mean()) if finite.size else float("nan"),
            "std": float(finite.std()) if finite.size else float("nan"),
            "min": float(finite.min()) if finite.size else float("nan"),
            "max": float(finite.max()) if finite.size else float("nan"),
            "non_finite": int(array.size - finite.size),
        }
    return summary


def ppo_update(
    policy: PolicyNet,
    buffer: RolloutBuffer,
    advantages: np.ndarray,
    returns_ext: np.ndarray,
    returns_int: np.ndarray,
    epochs: int = 4,
    minibatches: int = 4,
    clip_eps: float = 0.1,
    entropy_coef: float = 0.001,
    value_coef: float = 0.5,
    *,
    rng: np.random.Generator,
    normalize_advantages: bool = True,
    use_int_head: bool = True,
    max_grad_norm: Optional[float] = None,
    on_minibatch: Optional[Callable[[np.ndarray], float]] = None,
) -> UpdateStats:
    """
    `epochs` passes of shuffled minibatch Adam steps on the PPO loss.

    `on_minibatch(indices)` runs after each policy step with the flat sample
    indices of that minibatch; the runner uses it to train the bonus model
    inside the same loop.
    """
    obs = buffer.flat("obs")
    actions = buffer.flat("actions")
    old_log_probs = buffer.flat("log_probs")
    adv = np.asarray(advantages, dtype=np.float64).reshape(-1)
    ret_ext = np.asarray(returns_ext, dtype=np.float64).reshape(-1)
    ret_int = np.asarray(returns_int, dtype=np.float64).reshape(-1)
    n = obs.shape[0]
    if not adv.shape == ret_ext.shape == ret_int.shape == (n,):
        raise ShapeError(f"advantages/returns must hold {n} samples")
    if minibatches < 1 or minibatches > n:
        raise InvalidArgumentError(f"cannot split {n} samples into {minibatches} minibatches")
    if normalize_advantages:
        adv = (adv - adv.mean()) / (adv.std() + ADV_EPS)

    stats = UpdateStats()
    predictor_losses = []
    for _ in range(epochs):
        for idx in np.array_split(rng.permutation(n), minibatches):
            loss, grads, mb_stats = ppo_loss(
                policy, obs[idx], actions[idx], old_log_probs[idx], adv[idx], ret_ext[idx], ret_int[idx],
                clip_eps=clip_eps, entropy_coef=entropy_coef, value_coef=value_coef, use_int_head=use_int_head,
            )
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                diagnostics = _diagnostics(
                    advantages=adv[idx], returns_ext=ret_ext[idx], returns_int=ret_int[idx],
                    old_log_probs=old_log_probs[idx],
                )
                logger.error("non-finite PPO loss; batch statistics: %s", diagnostics)
                raise NonFiniteError("PPO loss is not finite", diagnostics)
            if max_grad_norm is not None:
                grads, mb_stats["grad_norm"] = clip_grad_norm(grads, max_grad_norm)
            adam_step(policy.opt, policy.net, grads)
            stats.opt_steps += 1
            stats.history.append(mb_stats)
            if on_minibatch is not None:
                predictor_losses.append(on_minibatch(idx))

    for name in ("pg_loss", "vf_loss_ext", "vf_loss_int", "entropy", "approx_kl", "clipfrac", "grad_norm"):
        setattr(stats, name, float(np.mean([h.get(name, 0.0) for h in stats.history])))
    if predictor_losses:
        stats.predictor_loss = float(np.mean(predictor_losses))
    return stats
