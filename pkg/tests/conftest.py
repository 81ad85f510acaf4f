from pathlib import Path

import numpy as np
import pytest
import yaml

from rnd_desk.config import ExperimentConfig

from .helpers import TINY, tiny_config


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny() -> ExperimentConfig:
    return tiny_config()


@pytest.fixture
def tiny_config_file(tmp_path: Path) -> Path:
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path
