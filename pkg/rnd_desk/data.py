"""
IDX tensors, the MNIST layout, and the held-out novelty experiment

The experiment distills a random target net into a predictor on a fixed-size
mix of base-class and target-class images and measures the bonus (test MSE)
on held-out target-class images as the target share grows.
"""

import csv
import gzip
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import spearmanr

from .errors import (
    BadMagicError,
    InvalidArgumentError,
    ShapeError,
    SizeMismatchError,
    TruncatedHeaderError,
    UnsupportedDtypeError,
)
from .numnet import make_rng
from .rnd import RndBonus, intrinsic_reward, train_predictor

logger = logging.getLogger(__name__)

UBYTE = 0x08
FLOAT32 = 0x0D
IDX_DTYPES = {UBYTE: np.dtype("u1"), FLOAT32: np.dtype(">f4")}

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

CURVE_HEADER = ("n", "test_mse", "seed")
SELECT_STREAM = 31
BATCH_STREAM = 32
SYNTH_STREAM = 33


@dataclass
class IdxTensor:
    dtype_code: int
    dims: Tuple[int, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        self.dims = tuple(int(d) for d in self.dims)
        if int(np.prod(self.dims, dtype=np.int64)) != self.data.size:
            raise ShapeError(f"dims {list(self.dims)} do not match {self.data.size} data elements")

    def array(self) -> np.ndarray:
        return self.data.reshape(self.dims)


def parse_idx(blob: bytes) -> IdxTensor:
    """
    Decode one IDX payload: 00 00 | dtype | ndims | ndims x u32 BE sizes | data.

    Every failure raises a typed IdxParseError naming the byte offset.
    """
    blob = bytes(blob)
    if len(blob) < 4:
        raise TruncatedHeaderError(f"need 4 magic bytes, got {len(blob)}", len(blob))
    if blob[0] != 0 or blob[1] != 0:
        raise BadMagicError(f"magic must start with 00 00, got {blob[:2].hex(' ')}", 0)
    dtype_code, ndims = blob[2], blob[3]
    if dtype_code not in IDX_DTYPES:
        raise UnsupportedDtypeError(f"unsupported dtype code 0x{dtype_code:02X}", 2)

    header_end = 4 + 4 * ndims
    if len(blob) < header_end:
        raise TruncatedHeaderError(f"header declares {ndims} dims but is cut short", len(blob))
    dims = struct.unpack(f">{ndims}I", blob[4:header_end])

    dtype = IDX_DTYPES[dtype_code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    actual = len(blob) - header_end
    if actual < expected:
        raise SizeMismatchError(f"dims {list(dims)} need {expected} data bytes, found {actual}", len(blob))
    if actual > expected:
        raise SizeMismatchError(f"{actual - expected} trailing bytes after the data", header_end + expected)

    count = expected // dtype.itemsize
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=header_end).astype(dtype.newbyteorder("="))
    return IdxTensor(dtype_code, dims, data)


def encode_idx(tensor: IdxTensor) -> bytes:
    dtype = IDX_DTYPES.get(tensor.dtype_code)
    if dtype is None:
        raise UnsupportedDtypeError(f"unsupported dtype code 0x{tensor.dtype_code:02X}", 2)
    header = bytes([0, 0, tensor.dtype_code, len(tensor.dims)]) + struct.pack(f">{len(tensor.dims)}I", *tensor.dims)
    return header + np.ascontiguousarray(tensor.data, dtype=dtype).tobytes()


@dataclass
class LabeledDataset:
    """Flattened uint8 images and integer labels for a train and a test split"""

    train_images: np.ndarray
    train_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray
    source: str = "mnist"

    def class_indices(self, label: int, split: str = "train") -> np.ndarray:
        labels = self.train_labels if split == "train" else self.test_labels
        return np.flatnonzero(labels == label)


def _read_idx_file(path: Path) -> IdxTensor:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return parse_idx(fh.read())


def _find(directory: Path, stem: str) -> Optional[Path]:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.is_file():
            return candidate
    return None


def load_mnist(directory: Union[str, Path]) -> LabeledDataset:
    """Read the standard 4-file IDX layout (plain or .gz) from a directory"""
    directory = Path(directory)
    tensors: Dict[str, np.ndarray] = {}
    for key, stem in MNIST_FILES.items():
        path = _find(directory, stem)
        if path is None:
            raise FileNotFoundError(f"{stem} not found in {directory}")
        array = _read_idx_file(path).array()
        tensors[key] = array.reshape(array.shape[0], -1) if key.endswith("images") else array.astype(np.int64)
    for split in ("train", "test"):
        if tensors[f"{split}_images"].shape[0] != tensors[f"{split}_labels"].shape[0]:
            raise ShapeError(f"{split} images and labels disagree in count")
    logger.info("loaded MNIST from %s: %d train, %d test", directory,
                tensors["train_images"].shape[0], tensors["test_images"].shape[0])
    return LabeledDataset(**tensors, source="mnist")


def synthetic_digits(
    seed: int = 0,
    num_classes: int = 10,
    train_per_class: int = 5000,
    test_per_class: int = 500,
    dim: int = 784,
    noise: float = 0.25,
) -> LabeledDataset:
    """
    Gaussian class prototypes plus pixel noise, quantized to uint8 like MNIST.

    Prototypes are smooth blobs on a 28x28 grid (when dim is 784) so classes
    overlap partially instead of being trivially separable.
    """
    rng = make_rng(seed, SYNTH_STREAM)
    side = int(round(np.sqrt(dim)))
    if side * side == dim:
        yy, xx = np.mgrid[0:side, 0:side] / max(side - 1, 1)
        prototypes = np.zeros((num_classes, dim))
        for c in range(num_classes):
            centers = rng.random((3, 2))
            blob = sum(np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 0.02) for cy, cx in centers)
            prototypes[c] = np.clip(blob, 0.0, 1.0).reshape(-1)
    else:
        prototypes = rng.random((num_classes, dim))

    def draw(per_class: int) -> Tuple[np.ndarray, np.ndarray]:
        images = np.empty((num_classes * per_class, dim), dtype=np.uint8)
        for c in range(num_classes):
            pixels = prototypes[c] + noise * rng.standard_normal((per_class, dim))
            images[c * per_class:(c + 1) * per_class] = np.round(np.clip(pixels, 0.0, 1.0) * 255)
        return images, np.repeat(np.arange(num_classes), per_class)

    train_images, train_labels = draw(train_per_class)
    test_images, test_labels = draw(test_per_class)
    return LabeledDataset(train_images, train_labels, test_images, test_labels, source="synthetic")


def load_dataset(mnist_dir: Optional[Union[str, Path]], seed: int = 0, **synthetic_kwargs) -> LabeledDataset:
    """MNIST when the directory holds all four files, else the synthetic stand-in"""
    if mnist_dir:
        try:
            return load_mnist(mnist_dir)
        except FileNotFoundError as exc:
            logger.warning("%s; using synthetic digits instead", exc)
    return synthetic_digits(seed, **synthetic_kwargs)


@dataclass
class NoveltyCurve:
    points: List[Tuple[int, float]]
    seed: int
    config_hash: str = ""
    target_class: Optional[int] = None

    def __post_init__(self) -> None:
        ns = [n for n, _ in self.points]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise InvalidArgumentError(f"curve n values must be strictly increasing, got {ns}")

    @property
    def n_values(self) -> List[int]:
        return [n for n, _ in self.points]

    @property
    def mse(self) -> List[float]:
        return [m for _, m in self.points]


def novelty_experiment(
    dataset: LabeledDataset,
    target_class: int,
    n_values: Sequence[int] = (10, 100, 1000, 5000),
    *,
    base_class: int = 0,
    total: int = 5000,
    embedding_dim: int = 64,
    hidden: int = 128,
    train_steps: int = 1000,
    batch_size: int = 128,
    learning_rate: float = 1e-3,
    test_size: Optional[int] = None,
    seed: int = 0,
    config_hash: str = "",
) -> NoveltyCurve:
    """
    Test MSE on held-out target-class images for each target count n.

    Every n trains on `total` images (n target, the rest base class) starting
    from the same target/predictor init for the seed, so n is the only
    thing that varies along the curve.
    """
    n_values = [int(n) for n in n_values]
    if target_class == base_class:
        raise InvalidArgumentError("target class must differ from the base class")
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise InvalidArgumentError(f"n values must be strictly increasing, got {n_values}")
    if not n_values or n_values[0] < 0 or n_values[-1] > total:
        raise InvalidArgumentError(f"n values must lie in [0, {total}], got {n_values}")

    target_pool = dataset.class_indices(target_class)
    base_pool = dataset.class_indices(base_class)
    test_pool = dataset.class_indices(target_class, split="test")
    if n_values[-1] > target_pool.size:
        raise InvalidArgumentError(
            f"n={n_values[-1]} exceeds the {target_pool.size} class-{target_class} training examples available"
        )
    if total - n_values[0] > base_pool.size:
        raise InvalidArgumentError(
            f"n={n_values[0]} needs {total - n_values[0]} class-{base_class} examples; "
            f"only {base_pool.size} available (limit n >= {total - base_pool.size})"
        )
    if test_pool.size == 0:
        raise InvalidArgumentError(f"no held-out class-{target_class} examples")

    select = make_rng(seed, SELECT_STREAM)
    target_order = select.permutation(target_pool)
    base_order = select.permutation(base_pool)
    test_idx = test_pool if test_size is None else select.permutation(test_pool)[:test_size]
    test_images = dataset.test_images[test_idx].astype(np.float64) / 255.0

    points = []
    for n in n_values:
        chosen = np.concatenate([target_order[:n], base_order[:total - n]])
        train_images = dataset.train_images[chosen].astype(np.float64) / 255.0
        rnd = RndBonus(
            train_images.shape[1], 1,
            embedding_dim=embedding_dim, hidden=hidden, learning_rate=learning_rate, keep_prob=1.0, seed=seed,
        )
        rnd.obs_rms.update(train_images)
        batches = make_rng(seed, BATCH_STREAM)
        for _ in range(train_steps):
            train_predictor(rnd, train_images[batches.integers(total, size=batch_size)])
        test_mse = float(intrinsic_reward(rnd, test_images).mean())
        logger.debug("seed %d, n=%d: held-out mse %.6g", seed, n, test_mse)
        points.append((n, test_mse))
    return NoveltyCurve(points, seed, config_hash, target_class)


def write_curve_csv(path: Union[str, Path], curves: Sequence[NoveltyCurve]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for curve in curves:
            for n, mse in curve.points:
                writer.writerow((n, repr(float(mse)), curve.seed))
    return path


def read_curve_csv(path: Union[str, Path]) -> List[NoveltyCurve]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CURVE_HEADER:
            raise InvalidArgumentError(f"{path} header must be {','.join(CURVE_HEADER)}, got {','.join(header)}")
        by_seed: Dict[int, List[Tuple[int, float]]] = {}
        for row in reader:
            if not row:
                continue
            n, mse, seed = row
            by_seed.setdefault(int(seed), []).append((int(n), float(mse)))
    return [NoveltyCurve(points, seed) for seed, points in by_seed.items()]


@dataclass
class CurveCheck:
    correlations: Dict[int, float] = field(default_factory=dict)
    required: int = 4

    @property
    def negative(self) -> int:
        return sum(1 for rho in self.correlations.values() if rho < 0)

    @property
    def passed(self) -> bool:
        return self.negative >= self.required


def check_curves(curves: Sequence[NoveltyCurve], required: int = 4) -> CurveCheck:
    """
    Spearman rank correlation between n and held-out MSE per seed.

    Ranks are invariant to the log transform, so log n and n give the same
    rho. A constant curve yields NaN and counts as not negative.
    """
    result = CurveCheck(required=required)
    for curve in curves:
        if len(curve.points) < 2:
            result.correlations[curve.seed] = float("nan")
            continue
        rho = spearmanr(curve.n_values, curve.mse).correlation
        result.correlations[curve.seed] = float(rho)
    return result
