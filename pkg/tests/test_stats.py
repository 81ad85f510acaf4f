import numpy as np
import pytest

from rnd_desk.errors import InvalidStateError, ShapeError
from rnd_desk.numnet import make_rng
from rnd_desk.snapshot import pack
from rnd_desk.stats import ReturnNormalizer, RunningMeanStd, normalize_obs, normalize_reward, rms_update


def test_three_point_example() -> None:
    rms = rms_update(RunningMeanStd((1,)), np.array([[1.0], [2.0], [3.0]]))
    assert rms.count == 3
    assert rms.mean == pytest.approx([2.0])
    assert rms.var == pytest.approx([2.0 / 3.0])


def test_identical_points_have_zero_variance() -> None:
    rms = RunningMeanStd((2,)).update(np.full((10, 2), 4.5))
    assert rms.mean == pytest.approx([4.5, 4.5])
    assert not rms.var.any()


def test_incremental_merge_matches_two_pass(rng: np.random.Generator) -> None:
    data = rng.normal(3.0, 2.0, size=(1000, 4))
    for trial in range(10):
        cuts = np.sort(make_rng(trial).choice(np.arange(1, 1000), size=7, replace=False))
        rms = RunningMeanStd((4,))
        for chunk in np.split(data, cuts):
            rms.update(chunk)
        assert rms.count == 1000
        assert rms.mean == pytest.approx(data.mean(0), abs=1e-9)
        assert rms.var == pytest.approx(data.var(0), abs=1e-9)


def test_large_sample_recovers_distribution(rng: np.random.Generator) -> None:
    rms = RunningMeanStd(())
    for _ in range(100):
        rms.update(rng.normal(0.0, 1.0, size=1000))
    assert abs(float(rms.mean)) < 0.02
    assert float(rms.var) == pytest.approx(1.0, abs=0.02)


def test_empty_batch_is_a_no_op() -> None:
    rms = RunningMeanStd((3,)).update(np.ones((2, 3)))
    rms.update(np.zeros((0, 3)))
    assert rms.count == 2


def test_update_rejects_wrong_shape() -> None:
    with pytest.raises(ShapeError):
        RunningMeanStd((3,)).update(np.ones((2, 4)))


def test_state_round_trip() -> None:
    rms = RunningMeanStd((2,)).update(np.arange(10.0).reshape(5, 2))
    copy = RunningMeanStd.from_state(rms.state_dict())
    assert copy.count == rms.count
    assert np.array_equal(copy.mean, rms.mean)
    assert np.array_equal(copy.m2, rms.m2)


def test_scalar_statistics_stay_arrays() -> None:
    rms = RunningMeanStd(()).update(np.array([1.0, 2.0, 4.0]))
    assert isinstance(rms.mean, np.ndarray)
    assert isinstance(rms.m2, np.ndarray)
    restored = RunningMeanStd.from_state(rms.state_dict())
    assert pack(restored.state_dict()) == pack(rms.state_dict())


def test_normalize_obs_centers_and_clips() -> None:
    rms = RunningMeanStd((2,)).update(np.array([[0.0, 1.0], [2.0, 1.0]]))
    mean, std = rms.mean, rms.std
    assert normalize_obs(rms, mean[None])[0] == pytest.approx([0.0, 0.0])
    far = normalize_obs(rms, (mean + 10 * std)[None])
    assert far[0, 0] == pytest.approx(5.0)
    # zero-variance dimension maps to 0 at the mean
    assert far[0, 1] == 0.0
    extreme = normalize_obs(rms, np.array([[1e9, -1e9], [-1e9, 1e9]]))
    assert np.all(np.abs(extreme) <= 5.0)


def test_normalize_obs_custom_clip() -> None:
    rms = RunningMeanStd((1,)).update(np.array([[-1.0], [1.0]]))
    assert normalize_obs(rms, np.array([[100.0]]), clip=2.0)[0, 0] == pytest.approx(2.0)


def test_normalize_obs_requires_an_update() -> None:
    with pytest.raises(InvalidStateError):
        normalize_obs(RunningMeanStd((2,)), np.zeros((1, 2)))


def test_return_accumulators_run_through_episode_ends() -> None:
    rn = ReturnNormalizer(2, gamma=0.5)
    rn.update(np.array([1.0, 2.0]), np.array([True, False]))
    rn.update(np.array([1.0, 0.0]), np.array([False, False]))
    assert rn.accumulators == pytest.approx([1.5, 1.0])
    assert rn.rms.count == 4


def test_return_accumulators_reset_when_asked() -> None:
    rn = ReturnNormalizer(2, gamma=0.5, reset_on_done=True)
    rn.update(np.array([1.0, 2.0]), np.array([True, False]))
    rn.update(np.array([1.0, 0.0]), np.array([False, False]))
    assert rn.accumulators == pytest.approx([1.0, 1.0])


def test_return_normalizer_accepts_a_block_of_steps() -> None:
    one, block = ReturnNormalizer(3, 0.9), ReturnNormalizer(3, 0.9)
    rewards = np.arange(12.0).reshape(4, 3)
    for row in rewards:
        one.update(row)
    block.update(rewards)
    assert one.accumulators == pytest.approx(block.accumulators)
    assert one.return_std == pytest.approx(block.return_std)
    with pytest.raises(ShapeError):
        one.update(np.ones(4))


def test_zero_stream_passes_through_while_warming_up() -> None:
    rn = ReturnNormalizer(4, 0.99)
    for _ in range(10):
        rn.update(np.zeros(4))
    out = normalize_reward(rn, np.zeros(4))
    assert not out.any()
    assert rn.warming_up


def test_constant_stream_normalizes_to_positive_values() -> None:
    rn = ReturnNormalizer(2, 0.99)
    for _ in range(50):
        rn.update(np.full(2, 0.3))
    out = normalize_reward(rn, np.full(2, 0.3))
    assert np.all(out > 0)
    assert not rn.warming_up


def test_reward_normalization_is_scale_invariant(rng: np.random.Generator) -> None:
    stream = rng.exponential(1.0, size=(10_000, 4))
    a, b = ReturnNormalizer(4, 0.99), ReturnNormalizer(4, 0.99)
    for row in stream:
        a.update(row)
        b.update(2 * row)
    assert normalize_reward(b, 2 * stream[-1]) == pytest.approx(normalize_reward(a, stream[-1]), rel=1e-9)


def test_normalized_returns_have_unit_scale(rng: np.random.Generator) -> None:
    stream = rng.exponential(1.0, size=(10_000, 4))
    rn = ReturnNormalizer(4, 0.99)
    normalized = np.empty_like(stream)
    for t, row in enumerate(stream):
        rn.update(row)
        normalized[t] = normalize_reward(rn, row)
    acc = np.zeros(4)
    returns = np.empty_like(stream)
    for t, row in enumerate(normalized):
        acc = 0.99 * acc + row
        returns[t] = acc
    assert 0.5 <= returns[1000:].std() <= 2.0


def test_uncentered_std_includes_mean() -> None:
    rn = ReturnNormalizer(1, 0.0, centered=False)
    for _ in range(5):
        rn.update(np.ones(1))
    assert rn.return_std == pytest.approx(1.0)
    assert ReturnNormalizer.from_state(rn.state_dict()).return_std == pytest.approx(1.0)
