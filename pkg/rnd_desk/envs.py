"""
Corridor-of-rooms toy environments and their vectorized wrapper

A CorridorWorld is a 1-D strip of num_rooms * room_width cells. The agent
starts in room 0, cell 0; the only reward (1.0, episode end) sits on the last
cell of the last room. One room can be a "noisy TV": while the agent stands
in it, the trailing noise dims of the observation are resampled from U[0, 1)
on every step.
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .numnet import make_rng
from .snapshot import restore_rng, rng_state

logger = logging.getLogger(__name__)

LEFT, RIGHT, STAY = 0, 1, 2
NUM_ACTIONS = 3
ACTION_NAMES = ("left", "right", "stay")

ENV_STREAM = 11


class CorridorWorld:
    """Sparse-reward corridor with optional noisy tile and sticky actions"""

    def __init__(
        self,
        num_rooms: int = 10,
        room_width: int = 4,
        *,
        max_episode_steps: Optional[int] = None,
        noisy_tile: Optional[int] = None,
        noise_dim: int = 8,
        sticky_prob: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ):
        if num_rooms < 1 or room_width < 1:
            raise InvalidArgumentError(f"need num_rooms >= 1 and room_width >= 1, got {num_rooms}, {room_width}")
        if not 0.0 <= sticky_prob < 1.0:
            raise InvalidArgumentError(f"sticky_prob must lie in [0, 1), got {sticky_prob}")
        if noisy_tile is not None and not 0 <= noisy_tile < num_rooms:
            raise InvalidArgumentError(f"noisy_tile {noisy_tile} is not a room index below {num_rooms}")
        if noisy_tile is not None and noise_dim < 1:
            raise InvalidArgumentError("a noisy tile needs noise_dim >= 1")

        self.num_rooms = int(num_rooms)
        self.room_width = int(room_width)
        self.num_cells = self.num_rooms * self.room_width
        self.max_episode_steps = int(max_episode_steps or 8 * self.num_cells)
        self.noisy_tile = noisy_tile
        self.noise_dim = int(noise_dim) if noisy_tile is not None else 0
        self.sticky_prob = float(sticky_prob)
        self.obs_dim = self.num_rooms + 1 + self.noise_dim
        self.rng = rng if rng is not None else np.random.default_rng(0)

        self.position = 0
        self.steps = 0
        self.episode_return = 0.0
        self.prev_action = STAY

    @property
    def room(self) -> int:
        return self.position // self.room_width

    @property
    def cell(self) -> int:
        return self.position % self.room_width

    @property
    def goal(self) -> int:
        return self.num_cells - 1

    def state_index(self) -> int:
        """room * room_width + cell; noise dims never enter the index"""
        return self.position

    def observation(self) -> np.ndarray:
        obs = np.zeros(self.obs_dim)
        obs[self.room] = 1.0
        if self.room_width > 1:
            obs[self.num_rooms] = self.cell / (self.room_width - 1)
        if self.noisy_tile is not None and self.room == self.noisy_tile:
            obs[self.num_rooms + 1:] = self.rng.random(self.noise_dim)
        return obs

    def reset(self) -> np.ndarray:
        self.position = 0
        self.steps = 0
        self.episode_return = 0.0
        self.prev_action = STAY
        return self.observation()

    def step(self, action: int) -> Tuple[np.ndarray, float, bool, Dict[str, Any]]:
        if action not in range(NUM_ACTIONS):
            raise InvalidArgumentError(f"invalid action {action!r}; expected 0..{NUM_ACTIONS - 1}")

        repeated = False
        if self.sticky_prob > 0.0 and self.rng.random() < self.sticky_prob:
            action = self.prev_action
            repeated = True
        self.prev_action = action

        if action == LEFT:
            self.position = max(0, self.position - 1)
        elif action == RIGHT:
            self.position = min(self.goal, self.position + 1)

        self.steps += 1
        reached = self.position == self.goal
        reward = 1.0 if reached else 0.0
        self.episode_return += reward
        done = reached or self.steps >= self.max_episode_steps
        info = {"repeated": repeated, "executed_action": action, "state_index": self.position}
        return self.observation(), reward, done, info

    def state_dict(self) -> Dict[str, Any]:
        return {
            "position": self.position,
            "steps": self.steps,
            "episode_return": self.episode_return,
            "prev_action": self.prev_action,
            "rng": rng_state(self.rng),
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.position = int(state["position"])
        self.steps = int(state["steps"])
        self.episode_return = float(state["episode_return"])
        self.prev_action = int(state["prev_action"])
        self.rng = restore_rng(state["rng"])


class VecEnv:
    """
    E corridors stepped in lockstep, each on its own random stream.

    Finished episodes reset automatically: the returned observation is the
    fresh start observation while info["final_obs"] keeps the true s_{t+1}.
    """

    def __init__(self, envs: List[CorridorWorld], seed: int = 0):
        if not envs:
            raise InvalidArgumentError("VecEnv needs at least one environment")
        self.envs = envs
        self.num_envs = len(envs)
        self.obs_dim = envs[0].obs_dim
        self.num_actions = NUM_ACTIONS
        self.seed = int(seed)
        self.obs = np.zeros((self.num_envs, self.obs_dim))

    @classmethod
    def make(cls, num_envs: int, seed: int = 0, **env_kwargs: Any) -> "VecEnv":
        vecenv = cls([CorridorWorld(**env_kwargs) for _ in range(num_envs)], seed)
        vecenv.reset(seed)
        return vecenv

    @property
    def template(self) -> CorridorWorld:
        return self.envs[0]

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        """Put every env at its start state; a seed re-derives all random streams"""
        if seed is not None:
            self.seed = int(seed)
            for i, env in enumerate(self.envs):
                env.rng = make_rng(self.seed, ENV_STREAM, i)
        self.obs = np.stack([env.reset() for env in self.envs])
        return self.obs.copy()

    def step(self, actions: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, Dict[str, Any]]:
        actions = np.asarray(actions)
        if actions.shape != (self.num_envs,):
            raise ShapeError(f"expected {self.num_envs} actions, got shape {actions.shape}")
        if not np.issubdtype(actions.dtype, np.integer) or actions.min() < 0 or actions.max() >= NUM_ACTIONS:
            raise InvalidArgumentError(f"actions must be integers in 0..{NUM_ACTIONS - 1}, got {actions.tolist()}")

        obs = np.empty((self.num_envs, self.obs_dim))
        final_obs = np.empty_like(obs)
        rewards = np.zeros(self.num_envs)
        dones = np.zeros(self.num_envs, dtype=bool)
        repeated = np.zeros(self.num_envs, dtype=bool)
        state_index = np.zeros(self.num_envs, dtype=np.int64)
        episodes = []

        for i, (env, action) in enumerate(zip(self.envs, actions)):
            next_obs, reward, done, info = env.step(int(action))
            final_obs[i] = next_obs
            rewards[i] = reward
            dones[i] = done
            repeated[i] = info["repeated"]
            state_index[i] = info["state_index"]
            if done:
                episodes.append({
                    "env": i,
                    "return": env.episode_return,
                    "length": env.steps,
                    "reached_goal": reward > 0,
                })
                next_obs = env.reset()
            obs[i] = next_obs

        self.obs = obs
        info = {"final_obs": final_obs, "repeated": repeated, "state_index": state_index, "episodes": episodes}
        return obs.copy(), rewards, dones, info

    def room_of(self, state_index: np.ndarray) -> np.ndarray:
        return np.asarray(state_index) // self.template.room_width

    def state_dict(self) -> Dict[str, Any]:
        return {"seed": self.seed, "obs": self.obs.copy(), "envs": [env.state_dict() for env in self.envs]}

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.seed = int(state["seed"])
        self.obs = np.asarray(state["obs"], dtype=np.float64).copy()
        for env, env_state in zip(self.envs, state["envs"]):
            env.load_state_dict(env_state)


def collect_random_transitions(vecenv: VecEnv, num_steps: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Step uniform-random actions; arrays are (num_steps, E, ...) in env order"""
    obs, actions, next_obs, dones, state_index = [], [], [], [], []
    current = vecenv.obs.copy()
    for _ in range(num_steps):
        action = rng.integers(vecenv.num_actions, size=vecenv.num_envs)
        following, _, done, info = vecenv.step(action)
        obs.append(current)
        actions.append(action)
        next_obs.append(info["final_obs"])
        dones.append(done)
        state_index.append(info["state_index"])
        current = following
    return {
        "obs": np.asarray(obs),
        "actions": np.asarray(actions),
        "next_obs": np.asarray(next_obs),
        "dones": np.asarray(dones),
        "state_index": np.asarray(state_index),
    }


def random_walk_goal_rate(num_episodes: int = 500, seed: int = 0, num_envs: int = 16, **env_kwargs: Any) -> float:
    """
    Fraction of uniform-random-action episodes that reach the goal.

    Calibrates the sparse presets: a "hard" corridor keeps this at or near
    zero, so any goal found by a learner comes from directed exploration.
    """
    if num_episodes < 1:
        raise InvalidArgumentError(f"need at least one episode, got {num_episodes}")
    vecenv = VecEnv.make(num_envs, seed, **env_kwargs)
    rng = make_rng(seed, ENV_STREAM)
    episodes: List[Dict[str, Any]] = []
    while len(episodes) < num_episodes:
        _, _, _, info = vecenv.step(rng.integers(NUM_ACTIONS, size=num_envs))
        episodes.extend(info["episodes"])
    return float(np.mean([ep["reached_goal"] for ep in episodes[:num_episodes]]))
