"""
Streaming moment estimates for observation whitening and reward scaling
"""

import logging
from typing import Any, Dict, Optional, Sequence

import numpy as np

from .errors import InvalidStateError, ShapeError

logger = logging.getLogger(__name__)

OBS_CLIP = 5.0
STD_EPS = 1e-8
WARMUP_STD = 1e-12


class RunningMeanStd:
    """
    Per-dimension running mean and population variance.

    Batches are merged with the parallel form of Welford's update, so the
    result matches a two-pass computation over the concatenated data.
    """

    def __init__(self, shape: Sequence[int] = ()):
        self.shape = tuple(shape)
        self.count = 0.0
        self.mean = np.zeros(self.shape)
        self.m2 = np.zeros(self.shape)

    @property
    def var(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros(self.shape)
        return np.maximum(self.m2 / self.count, 0.0)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    def update(self, batch: np.ndarray) -> "RunningMeanStd":
        batch = np.asarray(batch, dtype=np.float64)
        if batch.shape[1:] != self.shape:
            raise ShapeError(f"batch of shape {batch.shape} does not match statistics of shape {self.shape}")
        n = batch.shape[0]
        if n == 0:
            return self

        batch_mean = batch.mean(axis=0)
        batch_m2 = ((batch - batch_mean) ** 2).sum(axis=0)
        total = self.count + n
        delta = batch_mean - self.mean
        self.mean = np.asarray(self.mean + delta * (n / total))
        self.m2 = np.asarray(self.m2 + batch_m2 + delta * delta * (self.count * n / total))
        self.count = total
        return self

    def state_dict(self) -> Dict[str, Any]:
        return {"shape": list(self.shape), "count": self.count, "mean": self.mean.copy(), "m2": self.m2.copy()}

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "RunningMeanStd":
        rms = cls(tuple(state["shape"]))
        rms.count = float(state["count"])
        rms.mean = np.array(state["mean"], dtype=np.float64).reshape(rms.shape)
        rms.m2 = np.array(state["m2"], dtype=np.float64).reshape(rms.shape)
        return rms


def rms_update(rms: RunningMeanStd, batch: np.ndarray) -> RunningMeanStd:
    return rms.update(batch)


def normalize_obs(rms: RunningMeanStd, x: np.ndarray, clip: float = OBS_CLIP) -> np.ndarray:
    """clip((x - mu) / (sigma + eps), -clip, clip) per dimension"""
    if rms.count <= 0:
        raise InvalidStateError("observation normalizer used before any update")
    x = np.asarray(x, dtype=np.float64)
    if rms.shape and x.shape[-len(rms.shape):] != rms.shape:
        raise ShapeError(f"observation shape {x.shape} does not end with {rms.shape}")
    return np.clip((x - rms.mean) / (rms.std + STD_EPS), -clip, clip)


class ReturnNormalizer:
    """
    Scales intrinsic rewards by the std of their discounted running return.

    One forward accumulator r~_e <- gamma * r~_e + i_t per environment feeds a
    scalar RunningMeanStd. With reset_on_done False (the default) the
    accumulator runs straight through episode ends, matching the
    non-episodic treatment of the intrinsic stream.
    """

    def __init__(self, num_envs: int, gamma: float = 0.99, reset_on_done: bool = False, centered: bool = True):
        self.num_envs = int(num_envs)
        self.gamma = float(gamma)
        self.reset_on_done = reset_on_done
        self.centered = centered
        self.accumulators = np.zeros(self.num_envs)
        self.rms = RunningMeanStd(())
        self.warming_up = True

    @property
    def return_std(self) -> float:
        if self.centered:
            return float(self.rms.std)
        return float(np.sqrt(self.rms.var + self.rms.mean ** 2))

    def update(self, rewards: np.ndarray, dones: Optional[np.ndarray] = None) -> "ReturnNormalizer":
        """Advance the accumulators by one collected step (shape (E,)) or K steps (shape (K, E))"""
        steps = np.asarray(rewards, dtype=np.float64)
        if steps.ndim == 1:
            steps = steps[None, :]
        if steps.ndim != 2 or steps.shape[1] != self.num_envs:
            raise ShapeError(f"rewards of shape {np.shape(rewards)} do not match {self.num_envs} environments")
        done_steps = None if dones is None else np.asarray(dones, dtype=bool).reshape(steps.shape)

        returns = np.empty_like(steps)
        for t, step in enumerate(steps):
            self.accumulators = self.gamma * self.accumulators + step
            returns[t] = self.accumulators
            if self.reset_on_done and done_steps is not None:
                self.accumulators = np.where(done_steps[t], 0.0, self.accumulators)
        self.rms.update(returns.reshape(-1))
        return self

    def state_dict(self) -> Dict[str, Any]:
        return {
            "num_envs": self.num_envs,
            "gamma": self.gamma,
            "reset_on_done": self.reset_on_done,
            "centered": self.centered,
            "accumulators": self.accumulators.copy(),
            "rms": self.rms.state_dict(),
            "warming_up": self.warming_up,
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "ReturnNormalizer":
        rn = cls(state["num_envs"], state["gamma"], state["reset_on_done"], state["centered"])
        rn.accumulators = np.array(state["accumulators"], dtype=np.float64)
        rn.rms = RunningMeanStd.from_state(state["rms"])
        rn.warming_up = bool(state["warming_up"])
        return rn


def normalize_reward(rn: ReturnNormalizer, rewards: np.ndarray) -> np.ndarray:
    """
    Divide intrinsic rewards by the running return std; no centering, no clipping.

    While the std is still below 1e-12 the rewards pass through unscaled and
    `rn.warming_up` stays set.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    std = rn.return_std
    if not np.isfinite(std) or std < WARMUP_STD:
        if not rn.warming_up:
            logger.warning("intrinsic return std fell to %.3g; passing rewards through unscaled", std)
        rn.warming_up = True
        return rewards.copy()
    rn.warming_up = False
    return rewards / std
