import math

import numpy as np
import pytest

from rnd_desk.baselines import (
    AutoencoderBonus,
    CountBonus,
    CountTable,
    DynamicsBonus,
    NoBonus,
    autoencoder_bonus,
    count_bonus,
    dynamics_bonus,
    make_bonus,
    one_hot,
    record_visit,
    train_autoencoder,
    train_dynamics,
)
from rnd_desk.errors import InvalidArgumentError
from rnd_desk.numnet import dumps, make_rng
from rnd_desk.rnd import RndBonus


def test_one_hot() -> None:
    assert one_hot(np.array([2, 0]), 3).tolist() == [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]


def test_inverse_sqrt_counts() -> None:
    table = CountTable()
    seen = []
    for _ in range(4):
        record_visit(table, 7)
        seen.append(count_bonus(table, 7))
    assert seen == [1.0, 1 / math.sqrt(2), 1 / math.sqrt(3), 0.5]


def test_inverse_counts() -> None:
    table = CountTable("inverse")
    for _ in range(10):
        record_visit(table, 3)
    assert count_bonus(table, 3) == 0.1


def test_unvisited_state_scores_one_without_counting() -> None:
    table = CountTable()
    record_visit(table, 1)
    record_visit(table, 1)
    assert count_bonus(table, 2) == 1.0
    assert table.counts[1] == 2
    assert 2 not in table.counts or table.counts[2] == 0
    assert record_visit(table, 2) == 1


def test_count_form_is_validated() -> None:
    with pytest.raises(InvalidArgumentError):
        CountTable("log")


def test_count_bonus_counts_the_reached_state() -> None:
    bonus = CountBonus(4, 2)
    bonus.observe(np.array([5, 5]))
    assert bonus.bonus(None, None, np.zeros((2, 4)), np.array([5, 6])) == pytest.approx([1 / math.sqrt(2), 1.0])
    assert bonus.visited_states == 1
    with pytest.raises(InvalidArgumentError):
        bonus.bonus(None, None, np.zeros((2, 4)))
    clone = CountBonus(4, 2)
    clone.load_state_dict(bonus.state_dict())
    assert clone.table.counts == bonus.table.counts


def _dynamics(obs_dim: int = 5, **kwargs) -> DynamicsBonus:
    db = DynamicsBonus(obs_dim, 2, 3, embedding_dim=8, hidden=32, **kwargs)
    db.obs_rms.update(make_rng(0).standard_normal((64, obs_dim)))
    return db


def test_dynamics_shapes_and_oracle() -> None:
    db = _dynamics()
    assert db.predictor.layer_sizes == (8, 32, 32, 32, 8)
    assert db.feature_net.layer_sizes == (5, 32, 32, 8)
    rng = make_rng(1)
    obs, next_obs = rng.standard_normal((2, 6, 5))
    actions = rng.integers(3, size=6)
    assert np.all(dynamics_bonus(db, obs, actions, next_obs) >= 0)
    db.predict = lambda o, a: db.features(next_obs)
    assert dynamics_bonus(db, obs, actions, next_obs) == pytest.approx(np.zeros(6), abs=1e-15)


def test_dynamics_learns_a_deterministic_transition() -> None:
    db = _dynamics(learning_rate=1e-3)
    rng = make_rng(2)
    obs, next_obs = rng.standard_normal((2, 8, 5))
    actions = rng.integers(3, size=8)
    blob = dumps(db.feature_net)
    losses = [train_dynamics(db, obs, actions, next_obs) for _ in range(1000)]
    assert losses[-1] < 0.1 * losses[0]
    assert dumps(db.feature_net) == blob


def test_dynamics_state_round_trip() -> None:
    db = _dynamics(learning_rate=1e-3)
    rng = make_rng(3)
    obs, next_obs = rng.standard_normal((2, 4, 5))
    actions = rng.integers(3, size=4)
    train_dynamics(db, obs, actions, next_obs)
    clone = DynamicsBonus(5, 2, 3, embedding_dim=8, hidden=32, seed=4)
    clone.load_state_dict(db.state_dict())
    assert np.array_equal(dynamics_bonus(clone, obs, actions, next_obs), dynamics_bonus(db, obs, actions, next_obs))


def test_autoencoder_layout() -> None:
    ae = AutoencoderBonus(9, 2, hidden=16)
    assert ae.net.layer_sizes == (9, 16, 4, 16, 9)
    assert AutoencoderBonus(3, 2, hidden=16).bottleneck == 2


def test_autoencoder_fits_a_repeated_observation() -> None:
    ae = AutoencoderBonus(6, 2, hidden=16, learning_rate=3e-3)
    rng = make_rng(5)
    ae.obs_rms.update(rng.standard_normal((64, 6)))
    state = rng.standard_normal((1, 6))
    fresh = rng.standard_normal((1, 6))
    assert autoencoder_bonus(ae, state)[0] > 0
    for _ in range(2000):
        train_autoencoder(ae, state)
    assert autoencoder_bonus(ae, state)[0] < 1e-3
    assert autoencoder_bonus(ae, fresh)[0] > autoencoder_bonus(ae, state)[0]


def test_no_bonus_is_inactive() -> None:
    bonus = NoBonus(4, 2)
    assert not bonus.active
    assert bonus.bonus(None, None, np.ones((3, 4))).tolist() == [0.0, 0.0, 0.0]
    assert bonus.train(None, None, np.ones((3, 4))) == 0.0


@pytest.mark.parametrize("kind, cls", [
    ("rnd", RndBonus),
    ("dynamics", DynamicsBonus),
    ("autoencoder", AutoencoderBonus),
    ("count", CountBonus),
    ("none", NoBonus),
])
def test_make_bonus(kind: str, cls: type) -> None:
    bonus = make_bonus(kind, 6, 4, 3, embedding_dim=8, hidden=16, learning_rate=1e-3, keep_prob=0.5,
                       count_form="inverse", seed=1)
    assert isinstance(bonus, cls)
    assert bonus.kind == kind
    assert bonus.keep_prob == 0.5


def test_make_bonus_rejects_unknown_kind() -> None:
    with pytest.raises(InvalidArgumentError):
        make_bonus("curiosity", 6, 4, 3)


def test_loading_a_different_kind_fails() -> None:
    with pytest.raises(InvalidArgumentError):
        NoBonus(4, 2).load_state_dict(CountBonus(4, 2).state_dict())
