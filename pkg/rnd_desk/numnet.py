"""
Dense feed-forward networks with explicit forward/backward passes and Adam

Every learned function in rnd-desk (policy, value heads, RND target and
predictor, dynamics model, autoencoder) is a DenseNet. Everything runs in
float64.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from . import snapshot
from .errors import InvalidArgumentError, InvalidStateError, ShapeError

logger = logging.getLogger(__name__)

LEAKY_SLOPE = 0.01
SQRT2 = float(np.sqrt(2.0))
_SEED_LIMIT = 2 ** 64


class Activation(str, Enum):
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"


class OutputActivation(str, Enum):
    IDENTITY = "identity"
    SIGMOID = "sigmoid"


class InitScheme(str, Enum):
    SCALED_UNIFORM = "scaled_uniform"
    ORTHOGONAL = "orthogonal"


@dataclass
class DenseNet:
    """Stack of affine layers; layer l maps layer_sizes[l] -> layer_sizes[l+1]"""

    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    hidden_activation: Activation = Activation.RELU
    output_activation: OutputActivation = OutputActivation.IDENTITY
    trainable: bool = True
    init_scheme: InitScheme = InitScheme.SCALED_UNIFORM
    seed: int = 0
    # bumped by every optimizer step so stale forward caches can be detected
    version: int = field(default=0, compare=False)

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> List[np.ndarray]:
        """Parameters in optimizer order: W0, b0, W1, b1, ..."""
        params = []
        for W, b in zip(self.weights, self.biases):
            params.extend((W, b))
        return params

    def copy(self, trainable: Union[bool, None] = None) -> "DenseNet":
        return DenseNet(
            layer_sizes=tuple(self.layer_sizes),
            weights=[W.copy() for W in self.weights],
            biases=[b.copy() for b in self.biases],
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
            trainable=self.trainable if trainable is None else trainable,
            init_scheme=self.init_scheme,
            seed=self.seed,
        )


@dataclass
class ForwardCache:
    net_id: int
    version: int
    activations: List[np.ndarray]
    pre_activations: List[np.ndarray]


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: DenseNet, learning_rate: float = 1e-4, beta1: float = 0.9,
                beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        params = net.parameters()
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


# --- random streams -------------------------------------------------------

def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent PCG64 stream for (seed, stream key)"""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=stream)))


def derive_seed(seed: int, *stream: int) -> int:
    """64-bit seed for a sub-component, e.g. the init seed of one network"""
    state = np.random.SeedSequence(seed, spawn_key=stream).generate_state(1, dtype=np.uint64)
    return int(state[0])


# --- construction ---------------------------------------------------------

def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    flat = rng.standard_normal((rows, cols))
    u, _, vt = np.linalg.svd(flat, full_matrices=False)
    q = u if u.shape == (rows, cols) else vt
    return gain * q


def init_dense_net(
    layer_sizes: Sequence[int],
    init_scheme: Union[InitScheme, str] = InitScheme.SCALED_UNIFORM,
    seed: int = 0,
    *,
    hidden_activation: Union[Activation, str] = Activation.RELU,
    output_activation: Union[OutputActivation, str] = OutputActivation.IDENTITY,
    trainable: bool = True,
    gain: float = SQRT2,
    output_gain: Union[float, None] = None,
) -> DenseNet:
    """
    Build a net whose parameters are a pure function of the arguments.

    scaled_uniform draws W ~ U(-sqrt(6/(fan_in+fan_out)), +sqrt(...));
    orthogonal draws a (semi-)orthogonal matrix scaled by `gain`
    (`output_gain` for the last layer). Biases start at zero.
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise InvalidArgumentError(f"need at least 2 layer sizes, got {list(sizes)}")
    if any(s <= 0 for s in sizes):
        raise InvalidArgumentError(f"layer sizes must be positive, got {list(sizes)}")
    if not 0 <= int(seed) < _SEED_LIMIT:
        raise InvalidArgumentError(f"seed must fit in 64 unsigned bits, got {seed}")
    try:
        scheme = InitScheme(init_scheme)
    except ValueError as exc:
        raise InvalidArgumentError(f"unknown init scheme {init_scheme!r}") from exc

    rng = np.random.Generator(np.random.PCG64(int(seed)))
    last_gain = gain if output_gain is None else output_gain
    weights, biases = [], []
    for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if scheme is InitScheme.SCALED_UNIFORM:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        else:
            layer_gain = last_gain if layer == len(sizes) - 2 else gain
            W = _orthogonal(rng, fan_out, fan_in, layer_gain)
        weights.append(W)
        biases.append(np.zeros(fan_out))

    return DenseNet(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        hidden_activation=Activation(hidden_activation),
        output_activation=OutputActivation(output_activation),
        trainable=trainable,
        init_scheme=scheme,
        seed=int(seed),
    )


# --- activations ----------------------------------------------------------

def _hidden(z: np.ndarray, kind: Activation) -> np.ndarray:
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    return np.where(z > 0, z, LEAKY_SLOPE * z)


def _hidden_grad(z: np.ndarray, kind: Activation) -> np.ndarray:
    if kind is Activation.RELU:
        return (z > 0).astype(np.float64)
    return np.where(z > 0, 1.0, LEAKY_SLOPE)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _output(z: np.ndarray, kind: OutputActivation) -> np.ndarray:
    if kind is OutputActivation.IDENTITY:
        return z
    return _sigmoid(z)


def _output_grad(y: np.ndarray, kind: OutputActivation) -> np.ndarray:
    if kind is OutputActivation.IDENTITY:
        return np.ones_like(y)
    return y * (1.0 - y)


# --- passes ---------------------------------------------------------------

def forward(net: DenseNet, X: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    """Pure forward pass over a (batch, in_dim) array"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.in_dim:
        raise ShapeError(f"expected input of shape (batch, {net.in_dim}), got {X.shape}")

    activations = [X]
    pre_activations = []
    a = X
    last = net.num_layers - 1
    for layer, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W.T + b
        a = _hidden(z, net.hidden_activation) if layer < last else _output(z, net.output_activation)
        pre_activations.append(z)
        activations.append(a)
    return a, ForwardCache(id(net), net.version, activations, pre_activations)


def backward(net: DenseNet, cache: ForwardCache, dY: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
    """Exact gradients of a scalar loss given dLoss/dY; order matches parameters()"""
    if cache.net_id != id(net) or cache.version != net.version or len(cache.pre_activations) != net.num_layers:
        raise InvalidStateError("forward cache does not belong to the current state of this net")
    dY = np.asarray(dY, dtype=np.float64)
    Y = cache.activations[-1]
    if dY.shape != Y.shape:
        raise ShapeError(f"dY shape {dY.shape} does not match output shape {Y.shape}")

    grads: List[np.ndarray] = [np.empty(0)] * (2 * net.num_layers)
    delta = dY * _output_grad(Y, net.output_activation)
    dX = delta
    for layer in reversed(range(net.num_layers)):
        grads[2 * layer] = delta.T @ cache.activations[layer]
        grads[2 * layer + 1] = delta.sum(axis=0)
        dX = delta @ net.weights[layer]
        if layer > 0:
            delta = dX * _hidden_grad(cache.pre_activations[layer - 1], net.hidden_activation)
    return grads, dX


def clip_grad_norm(grads: List[np.ndarray], max_norm: float) -> Tuple[List[np.ndarray], float]:
    """Rescale grads so their global L2 norm is at most max_norm"""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if norm > max_norm > 0:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


def adam_step(state: AdamState, net: DenseNet, grads: List[np.ndarray]) -> Tuple[DenseNet, AdamState]:
    """One bias-corrected Adam update applied in place to the net's parameters"""
    if not net.trainable:
        raise InvalidStateError("adam_step called on a frozen net")
    params = net.parameters()
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ShapeError(f"expected {len(params)} gradient arrays, got {len(grads)}")
    for p, g in zip(params, grads):
        if np.shape(g) != p.shape:
            raise ShapeError(f"gradient shape {np.shape(g)} does not match parameter shape {p.shape}")

    state.t += 1
    bias1 = 1.0 - state.beta1 ** state.t
    bias2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    net.version += 1
    return net, state


# --- persistence ----------------------------------------------------------

def net_state(net: DenseNet) -> Dict[str, Any]:
    return {
        "layer_sizes": list(net.layer_sizes),
        "hidden_activation": net.hidden_activation.value,
        "output_activation": net.output_activation.value,
        "trainable": net.trainable,
        "init_scheme": net.init_scheme.value,
        "seed": net.seed,
        "weights": [W.copy() for W in net.weights],
        "biases": [b.copy() for b in net.biases],
    }


def net_from_state(state: Dict[str, Any]) -> DenseNet:
    return DenseNet(
        layer_sizes=tuple(state["layer_sizes"]),
        weights=[np.array(W, dtype=np.float64) for W in state["weights"]],
        biases=[np.array(b, dtype=np.float64) for b in state["biases"]],
        hidden_activation=Activation(state["hidden_activation"]),
        output_activation=OutputActivation(state["output_activation"]),
        trainable=bool(state["trainable"]),
        init_scheme=InitScheme(state["init_scheme"]),
        seed=int(state["seed"]),
    )


def adam_state_dict(state: AdamState) -> Dict[str, Any]:
    return {
        "m": [a.copy() for a in state.m],
        "v": [a.copy() for a in state.v],
        "t": state.t,
        "learning_rate": state.learning_rate,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps": state.eps,
    }


def adam_from_state(state: Dict[str, Any]) -> AdamState:
    return AdamState(
        m=[np.array(a, dtype=np.float64) for a in state["m"]],
        v=[np.array(a, dtype=np.float64) for a in state["v"]],
        t=int(state["t"]),
        learning_rate=float(state["learning_rate"]),
        beta1=float(state["beta1"]),
        beta2=float(state["beta2"]),
        eps=float(state["eps"]),
    )


def dumps(net: DenseNet) -> bytes:
    return snapshot.pack(net_state(net))


def loads(blob: bytes) -> DenseNet:
    return net_from_state(snapshot.unpack(blob))
