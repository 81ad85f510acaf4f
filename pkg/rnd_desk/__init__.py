"""
rnd-desk: random network distillation exploration at desk scale
"""

__version__ = "1.0.0"
__description__ = "RND exploration bonus, dual-head PPO and its baselines on toy environments"

from .errors import RndDeskError
from .rnd import RndBonus
from .agent import PolicyNet
from .envs import CorridorWorld, VecEnv
from .config import ExperimentConfig, load_config
from .runner import Trainer, run_training
from .main import main

__all__ = [
    'main',
    'RndDeskError',
    'RndBonus',
    'PolicyNet',
    'CorridorWorld',
    'VecEnv',
    'ExperimentConfig',
    'load_config',
    'Trainer',
    'run_training',
]
