"""Network topologies, flat parameter vectors, gradients and training."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .layers import ConvSame, Dense, Flatten, FullExtentConv, Layer, ReLU, SelfCorrelation, Wrap

KINDS = ("MLP", "CNN", "MLP_CNN", "CNN_MLP")

# strategy-string spelling -> architecture kind
MODEL_KIND = {"MLP": "MLP", "CNN": "CNN", "MLP-CNN": "MLP_CNN", "CNN-MLP": "CNN_MLP"}


class NetError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, last_finite_loss: float):
        self.epoch = epoch
        self.last_finite_loss = last_finite_loss
        super().__init__(f"loss became non-finite at epoch {epoch} (last finite loss {last_finite_loss:.6g})")


@dataclass(frozen=True)
class ModelArch:
    kind: str = "MLP_CNN"
    mlp_widths: tuple[int, ...] = (512, 256, 128, 64, 32, 16)
    conv_channels: tuple[int, ...] = (64, 64, 128, 128)
    conv_kernels: tuple[tuple[int, int], ...] = ((3, 1), (1, 3), (3, 1), (1, 3))
    wrap_side: int | None = None
    head_width: int = 16

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NetError(f"unknown architecture {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "mlp_widths", tuple(int(w) for w in self.mlp_widths))
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        object.__setattr__(self, "conv_kernels", tuple(tuple(int(v) for v in k) for k in self.conv_kernels))
        if len(self.conv_channels) != len(self.conv_kernels):
            raise NetError("one kernel shape per conv layer is required")
        if self.kind in ("MLP", "MLP_CNN") and not self.mlp_widths:
            raise NetError(f"{self.kind} needs at least one dense layer")

    @classmethod
    def reduced(cls, kind: str, **overrides) -> "ModelArch":
        """Same topology at toy widths (for gradient checks and quick runs)."""
        base = dict(kind=kind, mlp_widths=(5, 4, 3), conv_channels=(2, 2, 3, 3), head_width=3)
        base.update(overrides)
        return cls(**base)

    def side_for(self, input_dim: int) -> int:
        if self.wrap_side is not None:
            return self.wrap_side
        side = math.isqrt(input_dim)
        if side * side != input_dim:
            raise NetError(f"{input_dim} features cannot be wrapped into a square matrix")
        return side

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_kernels"] = [list(k) for k in self.conv_kernels]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArch":
        return cls(**{**d, "conv_kernels": tuple(tuple(k) for k in d["conv_kernels"])})


def build_layers(arch: ModelArch, input_dim: int) -> list[Layer]:
    layers: list[Layer] = []

    def mlp(n_in):
        for w in arch.mlp_widths:
            layers.extend([Dense(n_in, w), ReLU()])
            n_in = w
        return n_in

    def convs(c_in):
        for c, k in zip(arch.conv_channels, arch.conv_kernels):
            layers.extend([ConvSame(c_in, c, k), ReLU()])
            c_in = c
        return c_in

    if arch.kind == "MLP":
        last = mlp(input_dim)
        layers.append(Dense(last, 1))
    elif arch.kind == "MLP_CNN":
        m = mlp(input_dim)
        layers.append(SelfCorrelation())
        c = convs(1)
        layers.append(FullExtentConv(m, m, c))
    else:
        side = arch.side_for(input_dim)
        layers.append(Wrap(side))
        c = convs(1)
        if arch.kind == "CNN":
            layers.append(FullExtentConv(side, side, c))
        else:
            layers.extend([Flatten(), Dense(side * side * c, arch.head_width), ReLU(),
                           Dense(arch.head_width, 1)])
    shape: tuple[int, ...] = (input_dim,)
    for layer in layers:
        shape = layer.out_shape(shape)
    if shape != (1,):
        raise NetError(f"network ends in shape {shape}, expected a scalar")
    return layers


class Network:
    """Layer stack plus the slicing of the flat parameter vector."""

    def __init__(self, arch: ModelArch, input_dim: int):
        self.arch = arch
        self.input_dim = input_dim
        self.layers = build_layers(arch, input_dim)
        self.slices: list[list[tuple[slice, tuple[int, ...]]]] = []
        pos = 0
        for layer in self.layers:
            entries = []
            for shape in layer.param_shapes:
                size = int(np.prod(shape))
                entries.append((slice(pos, pos + size), shape))
                pos += size
            self.slices.append(entries)
        self.n_params = pos

    def views(self, flat: np.ndarray) -> list[list[np.ndarray]]:
        return [[flat[s].reshape(shape) for s, shape in entries] for entries in self.slices]

    def layer_count(self) -> int:
        """Weighted layers plus the self-correlation connection."""
        return sum(1 for l in self.layers if l.param_shapes or isinstance(l, SelfCorrelation))


@lru_cache(maxsize=32)
def network(arch: ModelArch, input_dim: int) -> Network:
    return Network(arch, input_dim)


@dataclass(eq=False)
class NetParams:
    """All weights of one network as a single float64 vector; ``blocks`` are views into it."""

    arch: ModelArch
    input_dim: int
    flat: np.ndarray

    def __post_init__(self):
        self.flat = np.ascontiguousarray(self.flat, dtype=np.float64)
        n = network(self.arch, self.input_dim).n_params
        if self.flat.shape != (n,):
            raise NetError(f"expected {n} parameters, got {self.flat.shape}")

    @property
    def blocks(self) -> list[np.ndarray]:
        return [v for layer in network(self.arch, self.input_dim).views(self.flat) for v in layer]

    @classmethod
    def from_blocks(cls, arch: ModelArch, input_dim: int, blocks) -> "NetParams":
        flat = np.concatenate([np.asarray(b, dtype=float).ravel() for b in blocks]) if blocks else np.zeros(0)
        return cls(arch, input_dim, flat)

    def copy(self) -> "NetParams":
        return NetParams(self.arch, self.input_dim, self.flat.copy())

    @classmethod
    def zeros(cls, arch: ModelArch, input_dim: int) -> "NetParams":
        return cls(arch, input_dim, np.zeros(network(arch, input_dim).n_params))


def glorot_init(arch: ModelArch, input_dim: int, seed: int) -> NetParams:
    """Glorot-uniform weights, zero biases."""
    net = network(arch, input_dim)
    rng = np.random.default_rng(seed)
    flat = np.zeros(net.n_params)
    for layer, entries in zip(net.layers, net.slices):
        if not entries:
            continue
        (w_slice, w_shape), _bias = entries
        fan_in, fan_out = layer.fans()
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        flat[w_slice] = rng.uniform(-limit, limit, int(np.prod(w_shape)))
    return NetParams(arch, input_dim, flat)


def _check_batch(params: NetParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise NetError(f"expected a batch of shape (n, {params.input_dim}), got {X.shape}")
    return X


def _forward(params: NetParams, X, keep_cache: bool):
    net = network(params.arch, params.input_dim)
    views = net.views(params.flat)
    caches = []
    h = X
    for layer, p in zip(net.layers, views):
        h, cache = layer.forward(h, p)
        if keep_cache:
            caches.append(cache)
    return h[:, 0], caches


def forward(params: NetParams, X) -> np.ndarray:
    X = _check_batch(params, X)
    if X.shape[0] == 0:
        return np.zeros(0)
    return _forward(params, X, keep_cache=False)[0]


predict = forward


def loss_and_grad(params: NetParams, X, y) -> tuple[float, np.ndarray]:
    """Mean squared error and its exact gradient w.r.t. ``params.flat``."""
    X = _check_batch(params, X)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != X.shape[0] or y.size == 0:
        raise NetError("X and y must have the same, non-zero, number of rows")
    net = network(params.arch, params.input_dim)
    views = net.views(params.flat)
    pred, caches = _forward(params, X, keep_cache=True)
    err = pred - y
    loss = float(np.mean(err * err))
    grad = np.zeros_like(params.flat)
    g = (2.0 / y.size) * err[:, None]
    for layer, p, cache, entries in zip(reversed(net.layers), reversed(views),
                                        reversed(caches), reversed(net.slices)):
        g, pgrads = layer.backward(g, cache, p)
        for (s, _), pg in zip(entries, pgrads):
            grad[s] = pg.ravel()
    return loss, grad


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5000
    learning_rate: float = 1e-3
    optimizer: str = "gd"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise NetError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise NetError("learning rate must be >= 0")
        if self.optimizer not in ("gd", "adam"):
            raise NetError("optimizer must be 'gd' or 'adam'")


def train(arch: ModelArch, X, y, config: TrainConfig, init: NetParams | None = None):
    """Full-batch training. Returns (params, loss trace); trace[e] is the MSE after epoch e."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] < 1:
        raise NetError("need at least one training sample")
    params = init.copy() if init is not None else glorot_init(arch, X.shape[1], config.seed)
    trace = np.empty(config.epochs)
    loss, grad = loss_and_grad(params, X, y)
    last = loss
    m = np.zeros_like(params.flat)
    v = np.zeros_like(params.flat)
    lr = config.learning_rate
    for epoch in range(config.epochs):
        if config.optimizer == "gd":
            params.flat -= lr * grad
        else:
            t = epoch + 1
            m = config.beta1 * m + (1 - config.beta1) * grad
            v = config.beta2 * v + (1 - config.beta2) * grad * grad
            mhat = m / (1 - config.beta1**t)
            vhat = v / (1 - config.beta2**t)
            params.flat -= lr * mhat / (np.sqrt(vhat) + config.eps)
        loss, grad = loss_and_grad(params, X, y)
        if not math.isfinite(loss):
            raise TrainingDiverged(epoch + 1, last)
        trace[epoch] = last = loss
    return params, trace


# --------------------------------------------------------------------------
# Binary parameter blobs
# --------------------------------------------------------------------------
MAGIC = b"SSNNPAR\x00"
BLOB_VERSION = 1


def params_to_bytes(params: NetParams) -> bytes:
    desc = json.dumps({"arch": params.arch.to_dict(), "input_dim": params.input_dim},
                      sort_keys=True).encode("utf-8")
    head = MAGIC + struct.pack("<HI", BLOB_VERSION, len(desc)) + desc
    return head + struct.pack("<Q", params.flat.size) + params.flat.astype("<f8").tobytes()


def params_from_bytes(blob: bytes) -> NetParams:
    if not blob.startswith(MAGIC):
        raise NetError("not a parameter blob (bad magic)")
    pos = len(MAGIC)
    if len(blob) < pos + 6:
        raise NetError("truncated parameter blob")
    version, dlen = struct.unpack_from("<HI", blob, pos)
    if version != BLOB_VERSION:
        raise NetError(f"unsupported blob version {version}")
    pos += 6
    desc = json.loads(blob[pos:pos + dlen].decode("utf-8"))
    pos += dlen
    if len(blob) < pos + 8:
        raise NetError("truncated parameter blob")
    (count,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    if len(blob) != pos + 8 * count:
        raise NetError(f"blob holds {len(blob) - pos} value bytes, header says {8 * count}")
    flat = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).astype(np.float64)
    return NetParams(ModelArch.from_dict(desc["arch"]), int(desc["input_dim"]), flat)


def save_params(params: NetParams, path) -> None:
    Path(path).write_bytes(params_to_bytes(params))


def load_params(path) -> NetParams:
    return params_from_bytes(Path(path).read_bytes())


# --------------------------------------------------------------------------
# Regressor with feature/target standardisation
# --------------------------------------------------------------------------
@dataclass
class NeuralRegressor:
    """Standardises columns and target on the training rows, then trains a network."""

    arch: ModelArch
    config: TrainConfig = field(default_factory=TrainConfig)
    params: NetParams | None = None
    loss_trace: np.ndarray | None = None
    x_mean: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    y_mean: float = 0.0
    y_scale: float = 1.0

    def fit(self, X, y) -> "NeuralRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        self.x_mean = X.mean(axis=0)
        sd = X.std(axis=0)
        self.x_scale = np.where(sd > 1e-12, sd, 1.0)
        self.y_mean = float(y.mean())
        ysd = float(y.std())
        self.y_scale = ysd if ysd > 1e-12 else 1.0
        Z = (X - self.x_mean) / self.x_scale
        t = (y - self.y_mean) / self.y_scale
        self.params, self.loss_trace = train(self.arch, Z, t, self.config)
        return self

    def predict(self, X) -> np.ndarray:
        if self.params is None:
            raise NetError("regressor is not fitted")
        Z = (np.asarray(X, dtype=float) - self.x_mean) / self.x_scale
        return forward(self.params, Z) * self.y_scale + self.y_mean
