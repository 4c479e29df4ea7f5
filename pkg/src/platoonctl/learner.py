"""Online residual regressor: a small relu network trained from a sliding
window of (features, residual) samples.

Architecture is fixed by design: 3 inputs (desired speed, measured speed,
previous residual), one 64-unit relu layer, one linear output. Training is
full-batch with the Adam rule, MSE loss, warm-started across update rounds
so the network keeps adapting instead of relearning from scratch.

Both features and targets are standardized with statistics taken from the
buffer. The network stores the statistics snapshot it was trained under and
uses it at inference, so a freshly initialized network (zero output layer,
identity statistics) predicts exactly zero until its first training round.
"""

import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ParameterError, StructuralError
from .rng import SplitMix64

SCALE_FLOOR = 1e-6


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 3
    hidden_units: int = 64
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 100
    validation_split: float = 0.2
    init_seed: int = 0
    min_train_samples: int = 5

    def __post_init__(self):
        if not 0 <= self.validation_split < 1:
            raise ParameterError("validation_split must be in [0, 1)")
        if self.epochs < 1:
            raise ParameterError("epochs must be at least 1")
        if self.hidden_units < 1 or self.input_dim < 1:
            raise ParameterError("layer sizes must be positive")


@dataclass
class Normalization:
    """Per-feature and target mean/scale applied around the network."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0
    degenerate: bool = False

    @classmethod
    def identity(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))


@dataclass
class Mlp:
    config: MlpConfig
    w1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    norm: Normalization
    moments: dict = field(default_factory=dict)  # Adam first/second moments
    step_count: int = 0


@dataclass(frozen=True)
class TrainReport:
    trained: bool
    epochs_run: int
    train_loss: Optional[float]
    val_loss: Optional[float]
    normalization_fallback: bool = False
    reason: str = ""


def init_mlp(config):
    """Seeded He-normal hidden weights; zero biases and zero output layer.

    The zero output layer makes the untrained network a null correction.
    """
    rng = SplitMix64(config.init_seed)
    std = np.sqrt(2.0 / config.input_dim)
    w1 = std * rng.normals(config.hidden_units * config.input_dim).reshape(
        config.hidden_units, config.input_dim
    )
    return Mlp(
        config=config,
        w1=w1,
        b1=np.zeros(config.hidden_units),
        w2=np.zeros(config.hidden_units),
        b2=0.0,
        norm=Normalization.identity(config.input_dim),
        moments={
            "w1": (np.zeros_like(w1), np.zeros_like(w1)),
            "b1": (np.zeros(config.hidden_units), np.zeros(config.hidden_units)),
            "w2": (np.zeros(config.hidden_units), np.zeros(config.hidden_units)),
            "b2": (0.0, 0.0),
        },
    )


def _forward_normalized(mlp, xn):
    """Hidden pre-activation, relu output, and normalized prediction."""
    z = xn @ mlp.w1.T + mlp.b1
    hidden = np.maximum(z, 0.0)
    return z, hidden, hidden @ mlp.w2 + mlp.b2


def forward(mlp, x):
    """Residual estimate for one feature vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x.reshape(1, -1) if single else x
    if xb.shape[1] != mlp.config.input_dim:
        raise StructuralError("feature dimension mismatch")
    xn = (xb - mlp.norm.x_mean) / mlp.norm.x_scale
    _, _, yn = _forward_normalized(mlp, xn)
    y = mlp.norm.y_mean + mlp.norm.y_scale * yn
    return float(y[0]) if single else y


def _gradients(mlp, xn, yn):
    """Analytic MSE-loss gradients on normalized data."""
    n = xn.shape[0]
    z, hidden, pred = _forward_normalized(mlp, xn)
    d_pred = 2.0 * (pred - yn) / n
    g_w2 = hidden.T @ d_pred
    g_b2 = float(d_pred.sum())
    d_hidden = np.outer(d_pred, mlp.w2)
    d_z = d_hidden * (z > 0)
    g_w1 = d_z.T @ xn
    g_b1 = d_z.sum(axis=0)
    loss = float(np.mean((pred - yn) ** 2))
    return {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}, loss


def _adam_step(mlp, grads):
    cfg = mlp.config
    mlp.step_count += 1
    t = mlp.step_count
    bias1 = 1.0 - cfg.adam_beta1**t
    bias2 = 1.0 - cfg.adam_beta2**t
    for name in ("w1", "b1", "w2", "b2"):
        g = grads[name]
        m, v = mlp.moments[name]
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g
        mlp.moments[name] = (m, v)
        update = cfg.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + cfg.adam_epsilon)
        if name == "b2":
            mlp.b2 -= update
        else:
            setattr(mlp, name, getattr(mlp, name) - update)


def train(mlp, buffer, config=None):
    """Full-batch training round over the buffer contents.

    A chronological split holds out the newest fraction for validation;
    the optimizer state carries over from previous rounds.
    """
    cfg = config or mlp.config
    n = len(buffer)
    if n < cfg.min_train_samples:
        return TrainReport(False, 0, None, None, reason=f"buffer has {n} < {cfg.min_train_samples} samples")
    X, y = buffer.arrays()
    norm = buffer.normalization()
    mlp.norm = norm
    xn = (X - norm.x_mean) / norm.x_scale
    yn = (y - norm.y_mean) / norm.y_scale
    n_val = int(np.floor(cfg.validation_split * n))
    n_train = n - n_val
    x_tr, y_tr = xn[:n_train], yn[:n_train]
    x_val, y_val = xn[n_train:], yn[n_train:]

    train_loss = None
    for _ in range(cfg.epochs):
        grads, train_loss = _gradients(mlp, x_tr, y_tr)
        _adam_step(mlp, grads)
    _, _, pred_tr = _forward_normalized(mlp, x_tr)
    train_loss = float(np.mean((pred_tr - y_tr) ** 2))
    if n_val:
        _, _, pred_val = _forward_normalized(mlp, x_val)
        val_loss = float(np.mean((pred_val - y_val) ** 2))
    else:
        val_loss = None
    return TrainReport(True, cfg.epochs, train_loss, val_loss, normalization_fallback=norm.degenerate)


def gradient_check(mlp, x, y, eps=1e-5):
    """Max relative error of analytic vs central finite-difference gradients.

    Uses the single-sample MSE loss in normalized space over every scalar
    parameter of the network.
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    xn = (x - mlp.norm.x_mean) / mlp.norm.x_scale
    yn = np.array([(y - mlp.norm.y_mean) / mlp.norm.y_scale])
    grads, _ = _gradients(mlp, xn, yn)

    def loss():
        _, _, pred = _forward_normalized(mlp, xn)
        return float(np.mean((pred - yn) ** 2))

    worst = 0.0
    for name in ("w1", "b1", "w2", "b2"):
        if name == "b2":
            base = mlp.b2
            mlp.b2 = base + eps
            up = loss()
            mlp.b2 = base - eps
            down = loss()
            mlp.b2 = base
            numeric = (up - down) / (2 * eps)
            denom = max(abs(grads[name]) + abs(numeric), 1e-8)
            worst = max(worst, abs(grads[name] - numeric) / denom)
            continue
        param = getattr(mlp, name)
        flat = param.ravel()
        gflat = np.asarray(grads[name]).ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss()
            flat[i] = orig - eps
            down = loss()
            flat[i] = orig
            numeric = (up - down) / (2 * eps)
            denom = max(abs(gflat[i]) + abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


class ReplayBuffer:
    """FIFO window of (features, residual) samples with running statistics."""

    def __init__(self, capacity, input_dim=3):
        if capacity < 1:
            raise ParameterError("capacity must be positive")
        self.capacity = capacity
        self.input_dim = input_dim
        self._features: List[np.ndarray] = []
        self._targets: List[float] = []

    def __len__(self):
        return len(self._features)

    def push(self, x, y):
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.input_dim:
            raise StructuralError("feature dimension mismatch")
        if not (np.all(np.isfinite(x)) and np.isfinite(y)):
            raise ParameterError("non-finite sample rejected")
        self._features.append(x)
        self._targets.append(float(y))
        if len(self._features) > self.capacity:
            del self._features[0]
            del self._targets[0]

    def arrays(self):
        return np.array(self._features), np.array(self._targets)

    def normalization(self):
        """Mean/scale over current contents; unit scale when variance vanishes."""
        X, y = self.arrays()
        x_mean = X.mean(axis=0)
        x_std = X.std(axis=0)
        degenerate = bool(np.any(x_std < SCALE_FLOOR)) or float(y.std()) < SCALE_FLOOR
        x_scale = np.where(x_std < SCALE_FLOOR, 1.0, x_std)
        y_std = float(y.std())
        y_scale = 1.0 if y_std < SCALE_FLOOR else y_std
        return Normalization(x_mean, x_scale, float(y.mean()), y_scale, degenerate)


def push_sample(buffer, x, y):
    buffer.push(x, y)


def save_weights(mlp, path):
    """Weight snapshot: JSON header plus one flat numeric array."""
    header = {
        "layout": [
            ["w1", [mlp.config.hidden_units, mlp.config.input_dim]],
            ["b1", [mlp.config.hidden_units]],
            ["w2", [mlp.config.hidden_units]],
            ["b2", [1]],
        ],
        "config": {
            "input_dim": mlp.config.input_dim,
            "hidden_units": mlp.config.hidden_units,
            "learning_rate": mlp.config.learning_rate,
            "epochs": mlp.config.epochs,
            "validation_split": mlp.config.validation_split,
            "init_seed": mlp.config.init_seed,
        },
        "normalization": {
            "x_mean": mlp.norm.x_mean.tolist(),
            "x_scale": mlp.norm.x_scale.tolist(),
            "y_mean": mlp.norm.y_mean,
            "y_scale": mlp.norm.y_scale,
            "degenerate": mlp.norm.degenerate,
        },
    }
    data = np.concatenate([mlp.w1.ravel(), mlp.b1, mlp.w2, [mlp.b2]])
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"header": header, "data": data.tolist()}, fh)


def load_weights(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    header = doc["header"]
    cfg = MlpConfig(**header["config"])
    data = np.asarray(doc["data"], dtype=float)
    mlp = init_mlp(cfg)
    pos = 0
    for name, shape in header["layout"]:
        size = int(np.prod(shape))
        block = data[pos : pos + size]
        pos += size
        if name == "b2":
            mlp.b2 = float(block[0])
        else:
            setattr(mlp, name, block.reshape(shape if len(shape) > 1 else (shape[0],)))
    nh = header["normalization"]
    mlp.norm = Normalization(
        np.asarray(nh["x_mean"], dtype=float),
        np.asarray(nh["x_scale"], dtype=float),
        float(nh["y_mean"]),
        float(nh["y_scale"]),
        bool(nh["degenerate"]),
    )
    return mlp
