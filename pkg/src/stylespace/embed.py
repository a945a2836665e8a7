"""Projection from feature space into the style space, trained with a contrastive loss."""

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._util import atomic_write
from .errors import DimensionError, DivergenceError, EmptyInputError, MissingFeatureError, NumericError, ParameterError, ParseError

logger = logging.getLogger(__name__)

MODEL_VERSION = "stylespace-model/1"


class ProjectionModel:
    """Multi-layer affine map with ReLU between layers (none after the last).

    All weights and biases live in one flat parameter vector; ``layers``
    returns views into it, so both members of a pair are embedded with
    literally the same storage.
    """

    def __init__(self, input_dim, output_dim, hidden_dims=(), params=None, margin=None, seed=None):
        self.input_dim = int(input_dim)
        self.output_dim = int(output_dim)
        self.hidden_dims = tuple(int(h) for h in hidden_dims)
        dims = self.dims
        if any(d < 1 for d in dims):
            raise ParameterError(f"layer dimensions must be positive, got {dims}")
        self.shapes = [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]
        size = sum(r * c + r for r, c in self.shapes)
        if params is None:
            params = np.zeros(size)
        params = np.array(params, dtype=np.float64)
        if params.shape != (size,):
            raise DimensionError(f"expected {size} parameters for dims {dims}, got {params.shape}")
        if not np.all(np.isfinite(params)):
            raise NumericError("model parameters must be finite")
        self.params = params
        self.margin = margin
        self.seed = seed

    @property
    def dims(self):
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def layers(self):
        out = []
        offset = 0
        for r, c in self.shapes:
            w = self.params[offset:offset + r * c].reshape(r, c)
            offset += r * c
            b = self.params[offset:offset + r]
            offset += r
            out.append((w, b))
        return out

    def copy(self, params=None):
        return ProjectionModel(self.input_dim, self.output_dim, self.hidden_dims,
                               self.params if params is None else params, self.margin, self.seed)

    def __eq__(self, other):
        if not isinstance(other, ProjectionModel):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.params, other.params)

    @classmethod
    def from_layers(cls, layers, margin=None, seed=None):
        ws = [np.asarray(w, dtype=np.float64) for w, _ in layers]
        dims = [ws[0].shape[1]] + [w.shape[0] for w in ws]
        params = np.concatenate([np.concatenate([w.ravel(), np.asarray(b, dtype=np.float64).ravel()])
                                 for w, (_, b) in zip(ws, layers)])
        return cls(dims[0], dims[-1], dims[1:-1], params, margin, seed)


def init_model(input_dim, output_dim=256, hidden_dims=(), seed=0, margin=None):
    """He-style Gaussian weights (std sqrt(2 / fan_in)), zero biases."""
    model = ProjectionModel(input_dim, output_dim, hidden_dims, margin=margin, seed=seed)
    rng = np.random.default_rng(seed)
    params = model.params.copy()
    offset = 0
    for r, c in model.shapes:
        params[offset:offset + r * c] = rng.normal(0.0, math.sqrt(2.0 / c), size=r * c)
        offset += r * c + r
    return model.copy(params)


def _forward(model, x):
    """Batch forward pass returning the output and the per-layer inputs."""
    acts = [x]
    layers = model.layers
    for i, (w, b) in enumerate(layers):
        x = x @ w.T + b
        if i < len(layers) - 1:
            x = np.maximum(x, 0.0)
        acts.append(x)
    return x, acts


def _backward(model, acts, grad_out):
    grads = []
    layers = model.layers
    g = grad_out
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads.append((g.T @ acts[i], g.sum(axis=0)))
        if i > 0:
            g = (g @ w) * (acts[i] > 0.0)
    grads.reverse()
    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


def embed(model, features):
    """Embed one D-vector, or a batch of them (rows)."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != model.input_dim or x.ndim not in (1, 2):
        raise DimensionError(f"expected features of length {model.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("features must be finite")
    out, _ = _forward(model, np.atleast_2d(x))
    return out[0] if x.ndim == 1 else out


def contrastive_loss(s_a, s_b, label, margin=1.0):
    """Loss and gradients for one pair.

    Positive pairs cost ``d**2``; negative pairs cost ``max(0, margin - d)**2``
    where ``d`` is the Euclidean distance. For a negative pair at ``d == 0``
    the gradient is taken as zero.
    """
    a = np.asarray(s_a, dtype=np.float64)
    b = np.asarray(s_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"embedding shapes differ: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NumericError("embeddings must be finite")
    if not margin > 0:
        raise ParameterError("margin must be positive")
    positive = label in ("pos", "positive", True)
    loss, ga, gb = kernels.contrastive_batch(a[None], b[None], np.array([positive]), margin)
    return float(loss[0]), ga[0], gb[0]


def batch_loss_and_grad(model, xa, xb, positive, margin):
    """Mean contrastive loss over a batch and its gradient w.r.t. the flat parameters."""
    n = len(xa)
    out, acts = _forward(model, np.vstack([xa, xb]))
    loss, ga, gb = kernels.contrastive_batch(out[:n], out[n:], positive, margin)
    grad = _backward(model, acts, np.vstack([ga, gb]) / n)
    return float(loss.mean()), grad


def mean_loss(model, xa, xb, positive, margin):
    if len(xa) == 0:
        return float("nan")
    out, _ = _forward(model, np.vstack([xa, xb]))
    loss, _, _ = kernels.contrastive_batch(out[:len(xa)], out[len(xa):], positive, margin)
    return float(loss.mean())


@dataclass(frozen=True)
class TrainConfig:
    margin: float = 1.0
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 20
    batch_size: int = 128
    seed: int = 0
    hidden_dims: tuple = ()

    def __post_init__(self):
        if not self.margin > 0:
            raise ParameterError("margin must be positive")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ParameterError("momentum must lie in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ParameterError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class LossTrace:
    per_epoch_mean_loss: list = field(default_factory=list)
    final_train_loss: float = float("nan")
    final_val_loss: float = float("nan")


def pair_arrays(features, pairs):
    """Stack endpoint features of ``pairs`` into (xa, xb, positive) arrays."""
    try:
        xa = np.array([features[p.a] for p in pairs], dtype=np.float64)
        xb = np.array([features[p.b] for p in pairs], dtype=np.float64)
    except KeyError as exc:
        raise MissingFeatureError(exc.args[0]) from None
    positive = np.array([p.label == "pos" for p in pairs], dtype=bool)
    return xa, xb, positive


def _run_epoch(current, params, velocity, xa, xb, positive, order, config, epoch):
    total = 0.0
    for start in range(0, len(order), config.batch_size):
        idx = order[start:start + config.batch_size]
        loss, grad = batch_loss_and_grad(current, xa[idx], xb[idx], positive[idx], config.margin)
        if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError(epoch)
        total += loss * len(idx)
        velocity *= config.momentum
        velocity -= config.learning_rate * grad
        params += velocity
    if not np.all(np.isfinite(params)):
        raise DivergenceError(epoch)
    return total / len(order)


def train(model, features, dataset, config):
    """Mini-batch gradient descent with momentum on the mean contrastive loss.

    ``dataset`` is a PairDataset (or anything with ``train`` and
    ``validation`` pair lists). Returns a new model and its LossTrace.
    """
    if not dataset.train:
        raise EmptyInputError("no training pairs")
    xa, xb, positive = pair_arrays(features, dataset.train)
    if xa.shape[1] != model.input_dim:
        raise DimensionError(f"features have {xa.shape[1]} dims, model expects {model.input_dim}")
    rng = np.random.default_rng(config.seed)
    current = model.copy()
    params = current.params  # updated in place; layer views follow
    velocity = np.zeros_like(params)
    trace = LossTrace()
    n = len(xa)

    for epoch in range(config.epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            epoch_loss = _run_epoch(current, params, velocity, xa, xb, positive, rng.permutation(n), config, epoch)
        trace.per_epoch_mean_loss.append(epoch_loss)
        logger.debug("epoch %d mean loss %.6f", epoch, epoch_loss)

    trained = ProjectionModel(model.input_dim, model.output_dim, model.hidden_dims, params,
                              config.margin, model.seed)
    trace.final_train_loss = mean_loss(trained, xa, xb, positive, config.margin)
    val = getattr(dataset, "validation", None) or []
    if val:
        trace.final_val_loss = mean_loss(trained, *pair_arrays(features, val), config.margin)
    return trained, trace


def _reference_loss(shapes, params, xa, xb, positive, margin):
    """Mean contrastive loss in extended precision, independent of the kernels.

    The difference ``h_a - h_b`` is carried alongside both activations. Units
    active on both sides pass it through linearly, so biases cancel exactly
    instead of leaving roundoff behind.
    """
    zero = np.longdouble(0)
    ha, hb = xa.astype(np.longdouble), xb.astype(np.longdouble)
    diff = ha - hb
    offset = 0
    for i, (r, c) in enumerate(shapes):
        w = params[offset:offset + r * c].reshape(r, c)
        offset += r * c
        b = params[offset:offset + r]
        offset += r
        za, zb, dz = ha @ w.T + b, hb @ w.T + b, diff @ w.T
        if i == len(shapes) - 1:
            diff = dz
        else:
            ha, hb = np.maximum(za, zero), np.maximum(zb, zero)
            both = (za > 0) & (zb > 0)
            diff = np.where(both, dz, ha - hb)
    d = np.sqrt((diff ** 2).sum(axis=1))
    hinge = np.maximum(np.longdouble(margin) - d, zero)
    return np.where(positive, d * d, hinge * hinge).mean()


def gradient_check(model, xa, xb, positive, margin=1.0, epsilon=1e-5):
    """Max relative error between analytic and central-difference gradients.

    Differences are taken over every parameter with an extended-precision
    forward pass in which biases cancel exactly, so parameters whose true
    gradient is zero (the output bias, by translation invariance) stay at 0.
    Each parameter's error is divided by ``max(|analytic|, |numeric|, 1e-8)``.
    """
    if not 0 < epsilon <= 1e-3:
        raise ParameterError("epsilon must lie in (0, 1e-3]")
    xa = np.atleast_2d(np.asarray(xa, dtype=np.float64))
    xb = np.atleast_2d(np.asarray(xb, dtype=np.float64))
    positive = np.atleast_1d(np.asarray(positive, dtype=bool))
    _, analytic = batch_loss_and_grad(model, xa, xb, positive, margin)
    base = model.params.astype(np.longdouble)
    eps = np.longdouble(epsilon)
    worst = 0.0
    for i in range(base.size):
        p = base.copy()
        p[i] = base[i] + eps
        up = _reference_loss(model.shapes, p, xa, xb, positive, margin)
        p[i] = base[i] - eps
        down = _reference_loss(model.shapes, p, xa, xb, positive, margin)
        numeric = float((up - down) / (2 * eps))
        denom = max(abs(analytic[i]), abs(numeric), 1e-8)
        worst = max(worst, float(abs(analytic[i] - numeric) / denom))
    return worst


def model_to_dict(model):
    return {
        "version": MODEL_VERSION,
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "hidden_dims": list(model.hidden_dims),
        "layers": [{"w": w.ravel().tolist(), "b": b.tolist()} for w, b in model.layers],
        "margin": model.margin,
        "seed": model.seed,
    }


def model_from_dict(obj):
    try:
        model = ProjectionModel(obj["input_dim"], obj["output_dim"], obj.get("hidden_dims", []),
                                margin=obj.get("margin"), seed=obj.get("seed"))
        params = np.concatenate([np.concatenate([np.asarray(l["w"], dtype=np.float64),
                                                 np.asarray(l["b"], dtype=np.float64)])
                                 for l in obj["layers"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model: {exc}") from exc
    return model.copy(params)


def save_model(model, path):
    with atomic_write(path) as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    return model_from_dict(obj)
