"""Convolutional regressor from kernel images to log decay rates.

The convolution filters span the whole ``2 x N x N`` image, so each filter
response is a single weighted sum of every pixel; the network is then

    image -> conv (4N, ReLU) -> dense (2N, ReLU) -> dense (2N, ReLU) -> linear (N)

Backpropagation is written out by hand for this fixed architecture.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

PARAM_ORDER = ("conv_w", "conv_b", "dense1_w", "dense1_b", "dense2_w", "dense2_b", "out_w", "out_b")
CKPT_MAGIC = b"RDDICKPT"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<8sIIIIII16sq")


class CheckpointError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training loss became non-finite at epoch {epoch}")


@dataclass(frozen=True)
class ModelConfig:
    n_atoms: int
    conv_filters: int
    dense_widths: tuple[int, int]
    init: str = "he_uniform"
    seed: int = 0

    @classmethod
    def for_atoms(cls, n_atoms: int, seed: int = 0, init: str = "he_uniform") -> "ModelConfig":
        return cls(n_atoms, 4 * n_atoms, (2 * n_atoms, 2 * n_atoms), init, seed)

    def __post_init__(self):
        if min(self.n_atoms, self.conv_filters, *self.dense_widths) < 1:
            raise ValueError(f"layer widths must be positive: {self}")
        if self.init not in ("he_uniform", "zeros"):
            raise ValueError(f"unknown init scheme {self.init!r}")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        n, f = self.n_atoms, self.conv_filters
        d1, d2 = self.dense_widths
        return {
            "conv_w": (f, 2, n, n),
            "conv_b": (f,),
            "dense1_w": (d1, f),
            "dense1_b": (d1,),
            "dense2_w": (d2, d1),
            "dense2_b": (d2,),
            "out_w": (n, d2),
            "out_b": (n,),
        }


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "epochs", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("moment decays must lie in [0, 1)")


def _relu(a):
    return np.maximum(a, 0.0)


class Model:
    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray] | None = None):
        self.config = config
        if params is None:
            params = self._initial_params()
        shapes = config.shapes()
        for name in PARAM_ORDER:
            if params[name].shape != shapes[name]:
                raise ValueError(f"{name} has shape {params[name].shape}, expected {shapes[name]}")
        self.params = {k: np.asarray(params[k], dtype=float) for k in PARAM_ORDER}

    def _initial_params(self) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(self.config.seed)
        out = {}
        for name, shape in self.config.shapes().items():
            if name.endswith("_b") or self.config.init == "zeros":
                out[name] = np.zeros(shape)
            else:
                fan_in = int(np.prod(shape[1:]))
                limit = np.sqrt(6.0 / fan_in)
                out[name] = rng.uniform(-limit, limit, size=shape)
        return out

    def copy(self) -> "Model":
        return Model(self.config, {k: v.copy() for k, v in self.params.items()})

    @property
    def n_atoms(self) -> int:
        return self.config.n_atoms

    def _flatten(self, images) -> tuple[np.ndarray, bool]:
        x = np.asarray(getattr(images, "channels", images), dtype=float)
        n = self.n_atoms
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.shape[1:] != (2, n, n):
            raise ValueError(f"expected images of shape (2, {n}, {n}), got {x.shape[1:]}")
        return x.reshape(len(x), 2 * n * n), single

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        p = self.params
        wc = p["conv_w"].reshape(self.config.conv_filters, -1)
        a1 = x @ wc.T + p["conv_b"]
        h1 = _relu(a1)
        a2 = h1 @ p["dense1_w"].T + p["dense1_b"]
        h2 = _relu(a2)
        a3 = h2 @ p["dense2_w"].T + p["dense2_b"]
        h3 = _relu(a3)
        y = h3 @ p["out_w"].T + p["out_b"]
        return y, [x, a1, h1, a2, h2, a3, h3]

    def forward(self, images) -> np.ndarray:
        """Predicted log decay rates, shape ``(N,)`` for one image or ``(B, N)`` for a batch."""
        x, single = self._flatten(images)
        y, _ = self._forward(x)
        return y[0] if single else y

    def _backprop(self, dy: np.ndarray, cache: list[np.ndarray], want_params: bool = True):
        """Propagate dL/dy back; returns (param grads or None, dL/dx)."""
        p = self.params
        x, a1, h1, a2, h2, a3, h3 = cache
        grads = {}
        if want_params:
            grads["out_w"] = dy.T @ h3
            grads["out_b"] = dy.sum(axis=0)
        da3 = (dy @ p["out_w"]) * (a3 > 0)
        if want_params:
            grads["dense2_w"] = da3.T @ h2
            grads["dense2_b"] = da3.sum(axis=0)
        da2 = (da3 @ p["dense2_w"]) * (a2 > 0)
        if want_params:
            grads["dense1_w"] = da2.T @ h1
            grads["dense1_b"] = da2.sum(axis=0)
        da1 = (da2 @ p["dense1_w"]) * (a1 > 0)
        wc = p["conv_w"].reshape(self.config.conv_filters, -1)
        if want_params:
            grads["conv_w"] = (da1.T @ x).reshape(p["conv_w"].shape)
            grads["conv_b"] = da1.sum(axis=0)
        dx = da1 @ wc
        return (grads if want_params else None), dx

    def backward(self, images, labels) -> tuple[float, dict[str, np.ndarray]]:
        """Batch-mean MSE loss and its exact gradient with respect to every parameter."""
        x, single = self._flatten(images)
        t = np.atleast_2d(np.asarray(labels, dtype=float))
        if t.shape != (len(x), self.n_atoms):
            raise ValueError(f"labels shape {t.shape} does not match predictions ({len(x)}, {self.n_atoms})")
        y, cache = self._forward(x)
        diff = y - t
        loss_value = float(np.mean(diff**2))
        dy = 2.0 * diff / diff.size
        grads, _ = self._backprop(dy, cache)
        return loss_value, grads

    def input_gradient(self, images, target_index: int, reference_value) -> np.ndarray:
        """Gradient of ``-(f_t(z) - reference)**2`` with respect to every input pixel."""
        n = self.n_atoms
        if not 0 <= target_index < n:
            raise IndexError(f"target_index {target_index} out of range for N = {n}")
        x, single = self._flatten(images)
        y, cache = self._forward(x)
        dy = np.zeros_like(y)
        dy[:, target_index] = -2.0 * (y[:, target_index] - reference_value)
        _, dx = self._backprop(dy, cache, want_params=False)
        dx = dx.reshape(len(x), 2, n, n)
        return dx[0] if single else dx


def loss(prediction, label) -> float:
    prediction = np.asarray(prediction, dtype=float)
    label = np.asarray(label, dtype=float)
    if prediction.shape != label.shape:
        raise ValueError(f"length mismatch: {prediction.shape} vs {label.shape}")
    return float(np.mean((prediction - label) ** 2))


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k in PARAM_ORDER:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] *= self.beta1
            self.m[k] += (1.0 - self.beta1) * g
            self.v[k] *= self.beta2
            self.v[k] += (1.0 - self.beta2) * (g * g)
            params[k] -= (self.lr / bc1) * self.m[k] / (np.sqrt(self.v[k] / bc2) + self.epsilon)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    steps: int = 0


def evaluate_loss(model: Model, images, labels, batch: int = 2048) -> float:
    total = 0.0
    for i in range(0, len(labels), batch):
        pred = model.forward(images[i : i + batch])
        total += float(np.sum((pred - labels[i : i + batch]) ** 2))
    return total / np.asarray(labels).size


def train(model: Model, train_images, train_labels, config: TrainConfig, test_images=None, test_labels=None):
    """Mini-batch Adam on the MSE loss; mutates and returns ``model`` with its per-epoch history."""
    train_images = np.asarray(train_images, dtype=float)
    train_labels = np.asarray(train_labels, dtype=float)
    n = len(train_labels)
    if n == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.shuffle_seed)
    opt = Adam(config.learning_rate, config.beta1, config.beta2, config.epsilon)
    history = TrainHistory()
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch_loss, grads = model.backward(train_images[idx], train_labels[idx])
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(epoch)
            running += batch_loss * len(idx)
            opt.step(model.params, grads)
            history.steps += 1
        history.train_loss.append(running / n)
        if test_images is not None:
            history.test_loss.append(evaluate_loss(model, test_images, test_labels))
        if not np.isfinite(history.train_loss[-1]):
            raise TrainingDiverged(epoch)
        log.info(
            "epoch %d train %.3e%s",
            epoch,
            history.train_loss[-1],
            f" test {history.test_loss[-1]:.3e}" if history.test_loss else "",
        )
    return model, history


def save_checkpoint(model: Model, path) -> None:
    cfg = model.config
    header = _CKPT_HEADER.pack(
        CKPT_MAGIC,
        CKPT_VERSION,
        cfg.n_atoms,
        cfg.conv_filters,
        cfg.dense_widths[0],
        cfg.dense_widths[1],
        cfg.n_atoms,
        cfg.init.encode("ascii"),
        cfg.seed,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for name in PARAM_ORDER:
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())


def load_checkpoint(path) -> Model:
    raw = Path(path).read_bytes()
    if len(raw) < _CKPT_HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, n, filters, d1, d2, n_out, init, seed = _CKPT_HEADER.unpack_from(raw)
    if magic != CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if n_out != n:
        raise CheckpointError(f"{path}: output width {n_out} does not match n_atoms {n}")
    try:
        cfg = ModelConfig(n, filters, (d1, d2), init.rstrip(b"\0").decode("ascii"), seed)
    except (ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: invalid model config: {exc}") from exc
    shapes = cfg.shapes()
    expected = sum(int(np.prod(s)) for s in shapes.values()) * 8
    body = raw[_CKPT_HEADER.size :]
    if len(body) != expected:
        raise CheckpointError(f"{path}: expected {expected} parameter bytes, found {len(body)}")
    flat = np.frombuffer(body, dtype="<f8")
    params, offset = {}, 0
    for name in PARAM_ORDER:
        size = int(np.prod(shapes[name]))
        params[name] = flat[offset : offset + size].reshape(shapes[name]).astype(float)
        offset += size
    return Model(cfg, params)
