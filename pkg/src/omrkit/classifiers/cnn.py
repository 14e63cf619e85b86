"""Convolutional network trained from scratch with SGD + momentum.

Layers: grouped convolution, ReLU, cross-channel normalization, max pooling,
fully connected, dropout, softmax (folded into the cross-entropy loss).
Everything runs in float64 numpy with explicit backward passes so parameter
gradients can be checked against finite differences.

The default configuration is a small stack for 64x64 inputs; the full
227x227 reference architecture is constructible (and shape-checked) via
``table_architecture_config``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigInvalid, Divergence
from ..features import standardize_roi
from ..types import AnswerClass, RoiImage
from .base import ClassScores, LabeledSample

LayerSpec = tuple


@dataclass(frozen=True)
class CnnConfig:
    input_size: int = 64
    channels: int = 3
    layers: tuple[LayerSpec, ...] = (
        ("conv", 16, 5, 1, 0),
        ("relu",),
        ("pool", 2, 2),
        ("conv", 32, 3, 1, 0),
        ("relu",),
        ("pool", 2, 2),
        ("fc", 128),
        ("relu",),
        ("dropout", 0.5),
        ("fc", None),  # None = number of classes
    )
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 40
    batch_size: int = 32


def table_architecture_config() -> CnnConfig:
    """The full 227x227 reference stack (grouped convolutions, LRN, 4096-wide FCs)."""
    return CnnConfig(
        input_size=227,
        layers=(
            ("conv", 96, 11, 4, 0),
            ("relu",),
            ("norm", 5),
            ("pool", 3, 2),
            ("conv", 256, 5, 1, 2, 2),
            ("relu",),
            ("norm", 5),
            ("pool", 3, 2),
            ("conv", 384, 3, 1, 1),
            ("relu",),
            ("conv", 384, 3, 1, 1, 2),
            ("relu",),
            ("conv", 256, 3, 1, 1, 2),
            ("relu",),
            ("pool", 3, 2),
            ("fc", 4096),
            ("relu",),
            ("dropout", 0.5),
            ("fc", 4096),
            ("relu",),
            ("dropout", 0.5),
            ("fc", None),
        ),
    )


class Param:
    __slots__ = ("value", "grad", "velocity")

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad = np.zeros_like(value)
        self.velocity = np.zeros_like(value)


class Layer:
    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list[Param]:
        return []


class Conv2d(Layer):
    def __init__(self, in_ch: int, filters: int, kernel: int, stride: int,
                 pad: int, groups: int, rng: np.random.Generator):
        if in_ch % groups or filters % groups:
            raise ConfigInvalid("channels and filters must divide the group count")
        self.stride = stride
        self.pad = pad
        self.groups = groups
        self.kernel = kernel
        self.in_ch = in_ch
        cg = in_ch // groups
        fan_in = kernel * kernel * cg
        self.w = Param(rng.normal(0.0, np.sqrt(2.0 / fan_in), (filters, kernel, kernel, cg)))
        self.b = Param(np.zeros(filters))

    def params(self):
        return [self.w, self.b]

    def _cols(self, xp: np.ndarray) -> np.ndarray:
        win = sliding_window_view(xp, (self.kernel, self.kernel), axis=(1, 2))
        return win[:, ::self.stride, ::self.stride]  # (N, OH, OW, C, K, K)

    def forward(self, x, train):
        self.x_shape = x.shape
        xp = np.pad(x, ((0, 0), (self.pad, self.pad), (self.pad, self.pad), (0, 0))) \
            if self.pad else x
        self.xp_shape = xp.shape
        cols = self._cols(xp)
        n, oh, ow = cols.shape[:3]
        f = self.w.value.shape[0]
        fg = f // self.groups
        cg = self.in_ch // self.groups
        out = np.empty((n, oh, ow, f))
        self._cached_cols = []
        for g in range(self.groups):
            c = cols[:, :, :, g * cg:(g + 1) * cg]  # (N, OH, OW, Cg, K, K)
            cmat = np.ascontiguousarray(np.moveaxis(c, 3, 5)).reshape(n * oh * ow, -1)
            self._cached_cols.append(cmat)
            wg = self.w.value[g * fg:(g + 1) * fg]  # (Fg, K, K, Cg)
            out[:, :, :, g * fg:(g + 1) * fg] = (
                cmat @ wg.reshape(fg, -1).T + self.b.value[g * fg:(g + 1) * fg]
            ).reshape(n, oh, ow, fg)
        return out

    def backward(self, grad):
        n, oh, ow, f = grad.shape
        fg = f // self.groups
        cg = self.in_ch // self.groups
        dxp = np.zeros(self.xp_shape)
        k, s = self.kernel, self.stride
        for g in range(self.groups):
            gmat = grad[:, :, :, g * fg:(g + 1) * fg].reshape(n * oh * ow, fg)
            cmat = self._cached_cols[g]
            self.w.grad[g * fg:(g + 1) * fg] = (gmat.T @ cmat).reshape(fg, k, k, cg)
            self.b.grad[g * fg:(g + 1) * fg] = gmat.sum(axis=0)
            dcols = (gmat @ self.w.value[g * fg:(g + 1) * fg].reshape(fg, -1)
                     ).reshape(n, oh, ow, k, k, cg)
            for ky in range(k):
                for kx in range(k):
                    dxp[:, ky:ky + s * oh:s, kx:kx + s * ow:s, g * cg:(g + 1) * cg] += \
                        dcols[:, :, :, ky, kx, :]
        if self.pad:
            return dxp[:, self.pad:-self.pad, self.pad:-self.pad, :]
        return dxp


class ReLU(Layer):
    def forward(self, x, train):
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad):
        return grad * self.mask


class MaxPool(Layer):
    def __init__(self, size: int, stride: int):
        self.size = size
        self.stride = stride

    def forward(self, x, train):
        self.x_shape = x.shape
        win = sliding_window_view(x, (self.size, self.size), axis=(1, 2))
        win = win[:, ::self.stride, ::self.stride]  # (N, OH, OW, C, s, s)
        n, oh, ow, c = win.shape[:4]
        flat = win.reshape(n, oh, ow, c, -1)
        self.argmax = np.argmax(flat, axis=-1)
        self.out_shape = (n, oh, ow, c)
        return np.take_along_axis(flat, self.argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        n, oh, ow, c = self.out_shape
        dx = np.zeros(self.x_shape)
        ni, ohi, owi, ci = np.indices(self.out_shape)
        hy = ohi * self.stride + self.argmax // self.size
        hx = owi * self.stride + self.argmax % self.size
        np.add.at(dx, (ni, hy, hx, ci), grad)
        return dx


class CrossChannelNorm(Layer):
    """Local response normalization across channels: a / (k + alpha*sum(a^2))^beta."""

    def __init__(self, window: int = 5, alpha: float = 1e-4, beta: float = 0.75,
                 k: float = 1.0):
        self.window = window
        self.alpha = alpha
        self.beta = beta
        self.k = k

    def _window_sum(self, x: np.ndarray) -> np.ndarray:
        half = self.window // 2
        pad = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(half, half)])
        cs = np.cumsum(pad, axis=-1)
        cs = np.concatenate([np.zeros_like(cs[..., :1]), cs], axis=-1)
        c = x.shape[-1]
        idx_hi = np.arange(c) + self.window
        idx_lo = np.arange(c)
        return cs[..., idx_hi] - cs[..., idx_lo]

    def forward(self, x, train):
        self.x = x
        self.s = self.k + self.alpha * self._window_sum(x * x)
        self.s_beta = self.s ** (-self.beta)
        return x * self.s_beta

    def backward(self, grad):
        u = grad * self.x * self.s ** (-self.beta - 1.0)
        return grad * self.s_beta - 2.0 * self.alpha * self.beta * self.x * self._window_sum(u)


class Flatten(Layer):
    def forward(self, x, train):
        self.x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self.x_shape)


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.w = Param(rng.normal(0.0, np.sqrt(2.0 / in_dim), (in_dim, out_dim)))
        self.b = Param(np.zeros(out_dim))

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train):
        self.x = x
        return x @ self.w.value + self.b.value

    def backward(self, grad):
        self.w.grad = self.x.T @ grad
        self.b.grad = grad.sum(axis=0)
        return grad @ self.w.value.T


class Dropout(Layer):
    """Random unit masking during training; exact identity at inference."""

    def __init__(self, p: float, rng: np.random.Generator):
        self.p = p
        self.rng = rng

    def forward(self, x, train):
        if not train or self.p <= 0.0:
            self.mask = None
            return x
        self.mask = (self.rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self.mask

    def backward(self, grad):
        return grad if self.mask is None else grad * self.mask


class Network:
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def params(self) -> list[Param]:
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits = self.forward(x, train=False)
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray, train: bool = True) -> float:
        """Mean softmax cross-entropy; fills every Param.grad."""
        logits = self.forward(x, train)
        z = logits - logits.max(axis=1, keepdims=True)
        log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        n = x.shape[0]
        loss = -log_probs[np.arange(n), y].mean()
        grad = np.exp(log_probs)
        grad[np.arange(n), y] -= 1.0
        grad /= n
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return float(loss)


def build_network(config: CnnConfig, n_classes: int, rng: np.random.Generator) -> Network:
    """Instantiate the layer stack, checking that all shapes compose."""
    h = w = config.input_size
    c = config.channels
    flat: int | None = None
    layers: list[Layer] = []
    for spec in config.layers:
        kind = spec[0]
        if kind == "conv":
            if flat is not None:
                raise ConfigInvalid("conv layer after flattening")
            filters, kernel, stride, pad = spec[1:5]
            groups = spec[5] if len(spec) > 5 else 1
            if kernel > min(h, w) + 2 * pad:
                raise ConfigInvalid(f"kernel {kernel} larger than input {h}x{w}")
            if (h + 2 * pad - kernel) % stride or (w + 2 * pad - kernel) % stride:
                raise ConfigInvalid("convolution output size is not integral")
            layers.append(Conv2d(c, filters, kernel, stride, pad, groups, rng))
            h = (h + 2 * pad - kernel) // stride + 1
            w = (w + 2 * pad - kernel) // stride + 1
            c = filters
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "norm":
            if flat is not None:
                raise ConfigInvalid("norm layer after flattening")
            layers.append(CrossChannelNorm(window=spec[1] if len(spec) > 1 else 5))
        elif kind == "pool":
            size, stride = spec[1], spec[2]
            if flat is not None or size > min(h, w):
                raise ConfigInvalid("invalid pooling placement or size")
            layers.append(MaxPool(size, stride))
            h = (h - size) // stride + 1
            w = (w - size) // stride + 1
        elif kind == "dropout":
            layers.append(Dropout(spec[1], rng))
        elif kind == "fc":
            if flat is None:
                layers.append(Flatten())
                flat = h * w * c
            units = spec[1] if spec[1] is not None else n_classes
            layers.append(Dense(flat, units, rng))
            flat = units
        else:
            raise ConfigInvalid(f"unknown layer kind {kind!r}")
    if flat is None:
        raise ConfigInvalid("network has no fully connected head")
    if flat != n_classes:
        raise ConfigInvalid("final layer width does not match the class count")
    return Network(layers)


@dataclass
class CnnModel:
    config: CnnConfig
    classes: list[AnswerClass]
    network: Network
    epoch_losses: list[float] = field(default_factory=list)
    kind: str = "cnn"

    def _prepare(self, rois: list[RoiImage]) -> np.ndarray:
        batch = np.stack([
            standardize_roi(r, self.config.input_size).pixels for r in rois
        ]).astype(np.float64)
        return batch / 255.0 - 0.5  # zero-center normalization

    def classify(self, roi: RoiImage) -> ClassScores:
        probs = self.network.predict_proba(self._prepare([roi]))[0]
        return ClassScores.from_probs(self.classes, probs)


def train_cnn(samples: list[LabeledSample], classes,
              config: CnnConfig = CnnConfig(), seed: int = 0) -> CnnModel:
    """Train from scratch with SGD + momentum; deterministic given the seed."""
    classes = sorted(set(classes), key=int)
    use = [s for s in samples if s.label in classes]
    rng = np.random.default_rng(seed)
    net = build_network(config, len(classes), rng)
    model = CnnModel(config=config, classes=classes, network=net)

    x = model._prepare([s.roi for s in use])
    y = np.array([classes.index(s.label) for s in use])

    velocity_rng = np.random.default_rng(seed + 1)
    n = len(use)
    params = net.params()
    losses = []
    for _ in range(config.epochs):
        order = velocity_rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss = net.loss_and_grads(x[idx], y[idx], train=True)
            if not np.isfinite(loss):
                raise Divergence("training loss is not finite")
            for p in params:
                p.velocity = config.momentum * p.velocity - config.learning_rate * p.grad
                p.value = p.value + p.velocity
            epoch_loss += loss
            batches += 1
        losses.append(epoch_loss / max(batches, 1))
    model.epoch_losses = losses
    return model
