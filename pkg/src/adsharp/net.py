"""A small fully-connected network with hand-written backpropagation.

The network is a stack of affine layers with an elementwise activation on
every hidden layer and a linear output (logits).  Forward passes cache the
intermediate activations; ``backward`` consumes the most recent cache and
returns gradients for every parameter plus the gradient w.r.t. the input
batch (needed by virtual adversarial perturbations).

Checkpoints are a fixed little-endian binary layout and round-trip the
float64 parameters bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "Activation",
    "InitScheme",
    "Gradients",
    "Net",
    "init_net",
    "OptimizerState",
    "make_optimizer",
    "sgd_step",
    "zero_like_grads",
    "add_grads",
    "scale_grads",
]

_MAGIC = b"ADSHNET1"
_VERSION = 1


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"


class InitScheme(str, Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"
    ZEROS = "zeros"


@dataclass
class Gradients:
    """Per-layer parameter gradients plus the input-batch gradient.

    Weight/bias entries are sums over the rows of the upstream gradient;
    scale the upstream gradient by 1/B beforehand to obtain batch means.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray | None = None


def zero_like_grads(net: "Net") -> Gradients:
    return Gradients(
        weights=[np.zeros_like(w) for w in net.weights],
        biases=[np.zeros_like(b) for b in net.biases],
    )


def add_grads(acc: Gradients, other: Gradients, scale: float = 1.0) -> Gradients:
    """acc += scale * other (in place on acc, which is also returned)."""
    for a, o in zip(acc.weights, other.weights):
        a += scale * o
    for a, o in zip(acc.biases, other.biases):
        a += scale * o
    return acc


def scale_grads(g: Gradients, scale: float) -> Gradients:
    for w in g.weights:
        w *= scale
    for b in g.biases:
        b *= scale
    return g


class Net:
    """Multi-layer perceptron with explicit parameters and cached forwards."""

    def __init__(
        self,
        layer_dims: tuple[int, ...],
        activation: Activation,
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        seed: int = 0,
    ) -> None:
        layer_dims = tuple(int(d) for d in layer_dims)
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise ValueError("layer_dims needs >= 2 positive entries")
        if len(weights) != len(layer_dims) - 1 or len(biases) != len(weights):
            raise ValueError("parameter count does not match layer_dims")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (layer_dims[i], layer_dims[i + 1]) or b.shape != (layer_dims[i + 1],):
                raise ValueError(f"layer {i} parameter shapes do not match layer_dims")
        self.layer_dims = layer_dims
        self.activation = Activation(activation)
        self.weights = weights
        self.biases = biases
        self.seed = int(seed)
        self._cache: dict | None = None

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def clone(self) -> "Net":
        return Net(
            self.layer_dims,
            self.activation,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            seed=self.seed,
        )

    # -- forward / backward -------------------------------------------------

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        """Logits for an input of shape (D,) or (B, D)."""
        x = np.asarray(x, dtype=np.float64)
        was_1d = x.ndim == 1
        X = x[None, :] if was_1d else x
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ValueError(f"input must have {self.in_dim} features")
        if not np.all(np.isfinite(X)):
            raise ValueError("input contains non-finite values")
        acts = [X]
        H = X
        for i in range(self.n_layers):
            Z = H @ self.weights[i] + self.biases[i]
            if i < self.n_layers - 1:
                if self.activation == Activation.RELU:
                    H = np.maximum(Z, 0.0)
                else:
                    H = np.tanh(Z)
            else:
                H = Z
            acts.append(H)
        if cache:
            self._cache = {"acts": acts, "was_1d": was_1d}
        return H[0] if was_1d else H

    def backward(self, grad_logits: np.ndarray) -> Gradients:
        """Backpropagate an upstream logits gradient through the last cached
        forward pass.  relu'(0) is taken as 0."""
        if self._cache is None:
            raise RuntimeError("backward called before any cached forward pass")
        acts = self._cache["acts"]
        was_1d = self._cache["was_1d"]
        g = np.asarray(grad_logits, dtype=np.float64)
        G = g[None, :] if was_1d else g
        if G.shape != acts[-1].shape:
            raise ValueError("grad_logits shape does not match the cached forward")
        d_weights: list[np.ndarray] = [None] * self.n_layers  # type: ignore[list-item]
        d_biases: list[np.ndarray] = [None] * self.n_layers  # type: ignore[list-item]
        delta = G
        for i in range(self.n_layers - 1, -1, -1):
            d_weights[i] = acts[i].T @ delta
            d_biases[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
            if i > 0:
                h = acts[i]
                if self.activation == Activation.RELU:
                    delta = delta * (h > 0.0)
                else:
                    delta = delta * (1.0 - h * h)
        grad_in = delta[0] if was_1d else delta
        return Gradients(weights=d_weights, biases=d_biases, inputs=grad_in)

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write a versioned little-endian binary checkpoint."""
        path = Path(path)
        act_code = 0 if self.activation == Activation.RELU else 1
        parts = [
            _MAGIC,
            struct.pack("<IIq", _VERSION, act_code, self.seed),
            struct.pack("<I", len(self.layer_dims)),
            struct.pack(f"<{len(self.layer_dims)}I", *self.layer_dims),
        ]
        for w, b in zip(self.weights, self.biases):
            parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
            parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
        path.write_bytes(b"".join(parts))

    @classmethod
    def load(cls, path: str | Path) -> "Net":
        """Read a checkpoint; malformed headers or truncated payloads raise."""
        raw = Path(path).read_bytes()
        if len(raw) < len(_MAGIC) or raw[: len(_MAGIC)] != _MAGIC:
            raise ValueError(f"{path}: not a network checkpoint (bad magic)")
        off = len(_MAGIC)
        version, act_code, seed = struct.unpack_from("<IIq", raw, off)
        off += struct.calcsize("<IIq")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        if act_code not in (0, 1):
            raise ValueError(f"{path}: unknown activation code {act_code}")
        (n_dims,) = struct.unpack_from("<I", raw, off)
        off += 4
        if n_dims < 2:
            raise ValueError(f"{path}: checkpoint has fewer than two layer dims")
        dims = struct.unpack_from(f"<{n_dims}I", raw, off)
        off += 4 * n_dims
        weights, biases = [], []
        for i in range(n_dims - 1):
            wn = dims[i] * dims[i + 1]
            need = 8 * (wn + dims[i + 1])
            if off + need > len(raw):
                raise ValueError(f"{path}: truncated checkpoint payload at layer {i}")
            w = np.frombuffer(raw, dtype="<f8", count=wn, offset=off).reshape(
                dims[i], dims[i + 1]
            )
            off += 8 * wn
            b = np.frombuffer(raw, dtype="<f8", count=dims[i + 1], offset=off)
            off += 8 * dims[i + 1]
            weights.append(w.astype(np.float64).copy())
            biases.append(b.astype(np.float64).copy())
        if off != len(raw):
            raise ValueError(f"{path}: {len(raw) - off} trailing bytes in checkpoint")
        activation = Activation.RELU if act_code == 0 else Activation.TANH
        return cls(tuple(dims), activation, weights, biases, seed=seed)


def init_net(
    layer_dims: tuple[int, ...],
    activation: Activation | str = Activation.RELU,
    seed: int = 0,
    scheme: InitScheme | str = InitScheme.NORMAL,
) -> Net:
    """Initialize a network.

    ``normal`` draws weights from N(0, 1/fan_in); ``uniform`` from
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)); ``zeros`` sets everything to zero.
    Biases start at zero in all schemes.
    """
    layer_dims = tuple(int(d) for d in layer_dims)
    if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
        raise ValueError("layer_dims needs >= 2 positive entries")
    scheme = InitScheme(scheme)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        if scheme == InitScheme.NORMAL:
            w = rng.normal(0.0, bound, size=(fan_in, fan_out))
        elif scheme == InitScheme.UNIFORM:
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        else:
            w = np.zeros((fan_in, fan_out))
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return Net(layer_dims, Activation(activation), weights, biases, seed=seed)


@dataclass
class OptimizerState:
    """SGD with classical momentum: v <- m v + g, p <- p - lr v."""

    learning_rate: float
    momentum: float
    v_weights: list[np.ndarray] = field(default_factory=list)
    v_biases: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not (self.learning_rate > 0.0 and np.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be a positive finite real")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")


def make_optimizer(net: Net, learning_rate: float, momentum: float) -> OptimizerState:
    opt = OptimizerState(learning_rate, momentum)
    opt.v_weights = [np.zeros_like(w) for w in net.weights]
    opt.v_biases = [np.zeros_like(b) for b in net.biases]
    return opt


def sgd_step(net: Net, grads: Gradients, opt: OptimizerState) -> None:
    """Apply one momentum-SGD update in place.

    Non-finite gradients abort with a diagnostic instead of silently
    corrupting the parameters.
    """
    if len(grads.weights) != net.n_layers:
        raise ValueError("gradient layer count does not match the network")
    for i, (gw, gb) in enumerate(zip(grads.weights, grads.biases)):
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise RuntimeError(f"non-finite gradient in layer {i}; training aborted")
        opt.v_weights[i] = opt.momentum * opt.v_weights[i] + gw
        opt.v_biases[i] = opt.momentum * opt.v_biases[i] + gb
        net.weights[i] -= opt.learning_rate * opt.v_weights[i]
        net.biases[i] -= opt.learning_rate * opt.v_biases[i]
