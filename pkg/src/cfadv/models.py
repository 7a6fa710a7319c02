"""Binary scoring models: a linear logit and a small ReLU MLP, both trained with Adam.

Layer weights are stored ``(out, in)`` so a layer maps ``a -> a @ W.T + b``.
The logit ``f(x)`` carries no output activation; labels come from
``sigmoid(f(x)) >= 0.5``, i.e. ``f(x) >= 0`` is class 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import expit

from .data import Dataset
from .optim import Adam, AdamConfig
from .rng import make_rng

FORMAT_VERSION = "v1"


class DegenerateDataError(ValueError):
    pass


@dataclass(frozen=True)
class Dense:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        W = np.array(self.weight, dtype=float)
        b = np.array(self.bias, dtype=float).ravel()
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ValueError(f"inconsistent layer shapes {W.shape} / {b.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", W)
        object.__setattr__(self, "bias", b)

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]

    def to_dict(self) -> dict:
        return {
            "shape": [self.n_out, self.n_in],
            "weight": [float(v) for v in self.weight.ravel(order="C")],
            "bias": [float(v) for v in self.bias],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dense":
        rows, cols = d["shape"]
        W = np.asarray(d["weight"], dtype=float)
        if W.size != rows * cols:
            raise ValueError(f"weight array of size {W.size} does not fit shape {d['shape']}")
        return cls(W.reshape(rows, cols), np.asarray(d["bias"], dtype=float))


def check_stack(layers) -> None:
    if len(layers) == 0:
        raise ValueError("empty layer stack")
    for a, b in zip(layers[:-1], layers[1:]):
        if a.n_out != b.n_in:
            raise ValueError(f"incompatible consecutive layers {a.weight.shape} -> {b.weight.shape}")


def forward(layers, X: np.ndarray, relu: bool = True):
    """Run a layer stack on rows of ``X``; ReLU after every layer but the last.

    Returns the output and the cache ``(activations, pre_activations)``. The
    ReLU derivative at 0 is taken to be 0.
    """
    acts = [X]
    pres = []
    a = X
    last = len(layers) - 1
    for i, layer in enumerate(layers):
        z = a @ layer.weight.T + layer.bias
        pres.append(z)
        a = np.maximum(z, 0.0) if (relu and i < last) else z
        acts.append(a)
    return a, (acts, pres)


def backward(layers, cache, grad_out: np.ndarray, relu: bool = True, params: bool = True):
    """Backpropagate ``grad_out`` (gradient w.r.t. the stack output).

    Returns ``(grad_input, [(dW, db), ...])``; the parameter list is empty when
    ``params`` is False.
    """
    acts, pres = cache
    g = grad_out
    grads = []
    for i in range(len(layers) - 1, -1, -1):
        if relu and i < len(layers) - 1:
            g = g * (pres[i] > 0.0)
        if params:
            grads.append((g.T @ acts[i], g.sum(axis=0)))
        g = g @ layers[i].weight
    grads.reverse()
    return g, grads


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if w.size < 1:
            raise ValueError("weight vector must be non-empty")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b)):
            raise ValueError("linear model parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def n_inputs(self) -> int:
        return self.w.size

    def logit(self, X: np.ndarray) -> np.ndarray:
        return X @ self.w + self.b

    def gradient(self, X: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.w, X.shape).copy()


@dataclass(frozen=True)
class MlpModel:
    layers: tuple[Dense, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        check_stack(layers)
        if layers[-1].n_out != 1:
            raise ValueError("final layer must have width 1")
        object.__setattr__(self, "layers", layers)

    @property
    def n_inputs(self) -> int:
        return self.layers[0].n_in

    def logit(self, X: np.ndarray) -> np.ndarray:
        out, _ = forward(self.layers, X)
        return out[:, 0]

    def gradient(self, X: np.ndarray) -> np.ndarray:
        out, cache = forward(self.layers, X)
        g, _ = backward(self.layers, cache, np.ones_like(out), params=False)
        return g

    def pre_activations(self, X: np.ndarray) -> list[np.ndarray]:
        return forward(self.layers, X)[1][1]


@dataclass(frozen=True)
class LocalLinearization:
    """First-order surrogate of a model around ``anchor``."""

    w: np.ndarray
    b: float
    anchor: np.ndarray

    def as_linear(self) -> LinearModel:
        return LinearModel(self.w, self.b)

    def logit(self, X: np.ndarray) -> np.ndarray:
        return X @ self.w + self.b


ScoringModel = Union[LinearModel, MlpModel]


def _as_batch(model, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ValueError(f"input dimension {X.shape[-1]} does not match model input {model.n_inputs}")
    return X, single


def predict_logit(model: ScoringModel, x):
    X, single = _as_batch(model, x)
    f = model.logit(X)
    return float(f[0]) if single else f


def predict_label(model: ScoringModel, x):
    X, single = _as_batch(model, x)
    lab = (model.logit(X) >= 0.0).astype(np.int64)
    return int(lab[0]) if single else lab


def input_gradient(model: ScoringModel, x):
    X, single = _as_batch(model, x)
    g = model.gradient(X)
    return g[0] if single else g


def local_linearize(model: ScoringModel, x) -> LocalLinearization:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("local_linearize expects a single instance")
    if isinstance(model, (LinearModel, LocalLinearization)):
        return LocalLinearization(np.array(model.w), float(model.b), x.copy())
    w = input_gradient(model, x)
    fx = predict_logit(model, x)
    return LocalLinearization(w, fx - float(w @ x), x.copy())


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 50
    learning_rate: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    init: str = "uniform"  # or "zeros"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.init not in ("uniform", "zeros"):
            raise ValueError(f"unknown init scheme {self.init!r}")

    def adam(self) -> AdamConfig:
        return AdamConfig(lr=self.learning_rate, beta1=self.beta1, beta2=self.beta2, eps=self.eps)


def init_layers(widths: list[int], rng: np.random.Generator, scheme: str = "uniform") -> list[list[np.ndarray]]:
    """Mutable ``[W, b]`` pairs, uniform in +-1/sqrt(fan_in) (or all zeros)."""
    params = []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        if scheme == "zeros":
            W, b = np.zeros((n_out, n_in)), np.zeros(n_out)
        else:
            bound = 1.0 / np.sqrt(n_in)
            W = rng.uniform(-bound, bound, size=(n_out, n_in))
            b = rng.uniform(-bound, bound, size=n_out)
        params.append([W, b])
    return params


def _bce(z: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def fit_classifier(dataset: Dataset, hidden, cfg: TrainConfig):
    """Mini-batch Adam on mean binary cross-entropy.

    Returns ``(layers, losses)`` where ``losses[0]`` is the loss at
    initialisation and ``losses[e]`` the full training loss after epoch ``e``.
    """
    X = dataset.X_train
    y = dataset.y_train.astype(float)
    if X.shape[0] == 0:
        raise DegenerateDataError("training split is empty")
    if len(np.unique(y)) < 2:
        raise DegenerateDataError("training split contains a single class")
    rng = make_rng(cfg.seed)
    widths = [X.shape[1], *[int(h) for h in hidden], 1]
    params = init_layers(widths, rng, cfg.init)
    flat = [a for pair in params for a in pair]
    opt = Adam(flat, cfg.adam())

    def stack():
        return [_Raw(W, b) for W, b in params]

    def full_loss():
        out, _ = forward(stack(), X)
        return _bce(out[:, 0], y)

    losses = [full_loss()]
    n = X.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            layers = stack()
            out, cache = forward(layers, X[idx])
            dz = (expit(out[:, 0]) - y[idx]) / len(idx)
            _, grads = backward(layers, cache, dz[:, None])
            opt.step([g for pair in grads for g in pair])
        losses.append(full_loss())
    return [Dense(W, b) for W, b in params], losses


class _Raw:
    """Mutable view used during training (Dense freezes its arrays)."""

    __slots__ = ("weight", "bias")

    def __init__(self, weight, bias):
        self.weight = weight
        self.bias = bias


def train_logistic(dataset: Dataset, cfg: TrainConfig) -> LinearModel:
    (layer,), _ = fit_classifier(dataset, [], cfg)
    return LinearModel(layer.weight[0], float(layer.bias[0]))


def train_mlp(dataset: Dataset, hidden, cfg: TrainConfig) -> MlpModel:
    layers, _ = fit_classifier(dataset, hidden, cfg)
    return MlpModel(tuple(layers))


def accuracy(model: ScoringModel, X, y) -> float:
    if len(y) == 0:
        return float("nan")
    return float(np.mean(predict_label(model, X) == np.asarray(y)))


def model_to_dict(model: ScoringModel) -> dict:
    if isinstance(model, LinearModel):
        layer = Dense(model.w[None, :], np.array([model.b]))
        return {"version": FORMAT_VERSION, "kind": "linear", "layers": [layer.to_dict()]}
    return {"version": FORMAT_VERSION, "kind": "mlp", "layers": [l.to_dict() for l in model.layers]}


def model_from_dict(d: dict) -> ScoringModel:
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')!r}")
    layers = [Dense.from_dict(l) for l in d["layers"]]
    kind = d.get("kind")
    if kind == "linear":
        if len(layers) != 1 or layers[0].n_out != 1:
            raise ValueError("linear model must have a single 1-output layer")
        return LinearModel(layers[0].weight[0], float(layers[0].bias[0]))
    if kind == "mlp":
        return MlpModel(tuple(layers))
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model: ScoringModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> ScoringModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
