"""Restricted Boltzmann machines trained by contrastive divergence, and the
greedy layer-wise stack (deep belief network) built from them.

Two layer kinds are supported:

* ``gaussian-bernoulli``: real-valued visible units with fixed unit
  variance after a fixed per-unit offset and scale, binary hidden units.
* ``bernoulli-bernoulli``: binary visible and hidden units.

Parameters are held in immutable :class:`RbmLayer` objects; every training
step returns a new layer.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DivergenceError, ShapeError, ValidationError
from .util import FORMAT_VERSION, array_from_dict, array_to_dict, derive_seed

GAUSSIAN = "gaussian-bernoulli"
BERNOULLI = "bernoulli-bernoulli"
KINDS = (GAUSSIAN, BERNOULLI)

DEFAULT_LEARNING_RATE = {GAUSSIAN: 0.01, BERNOULLI: 0.1}
INIT_WEIGHT_STD = 0.01
EXACT_MAX_UNITS = 16


def sigmoid(x):
    """Logistic function, evaluated without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out[()] if out.ndim == 0 else out


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _readonly(arr) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RbmLayer:
    """One RBM.

    For Gaussian visible units the model sees ``(v - visible_offset) /
    visible_scale`` with unit variance; offset and scale are fixed data
    statistics, not trained. They default to 0 and 1.
    """

    kind: str
    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    visible_offset: np.ndarray | None = None
    visible_scale: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown RBM kind {self.kind!r}")
        w = _readonly(self.weights)
        b = _readonly(self.visible_bias)
        c = _readonly(self.hidden_bias)
        if w.ndim != 2 or b.shape != (w.shape[0],) or c.shape != (w.shape[1],):
            raise ShapeError(f"inconsistent RBM shapes: W{w.shape}, b{b.shape}, c{c.shape}")
        offset = np.zeros(w.shape[0]) if self.visible_offset is None else self.visible_offset
        scale = np.ones(w.shape[0]) if self.visible_scale is None else self.visible_scale
        offset, scale = _readonly(offset), _readonly(scale)
        if offset.shape != b.shape or scale.shape != b.shape or np.any(scale <= 0):
            raise ShapeError("visible offset/scale must be n_visible vectors with positive scale")
        if self.kind == BERNOULLI and (np.any(offset != 0) or np.any(scale != 1)):
            raise ValidationError("visible offset/scale apply to gaussian-bernoulli layers only")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "visible_bias", b)
        object.__setattr__(self, "hidden_bias", c)
        object.__setattr__(self, "visible_offset", offset)
        object.__setattr__(self, "visible_scale", scale)

    @property
    def n_visible(self) -> int:
        return self.weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.weights.shape[1]

    def with_params(self, weights, visible_bias, hidden_bias) -> "RbmLayer":
        return RbmLayer(
            self.kind, weights, visible_bias, hidden_bias, self.visible_offset, self.visible_scale
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.weights))
            and np.all(np.isfinite(self.visible_bias))
            and np.all(np.isfinite(self.hidden_bias))
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": array_to_dict(self.weights),
            "visible_bias": array_to_dict(self.visible_bias),
            "hidden_bias": array_to_dict(self.hidden_bias),
            "visible_offset": array_to_dict(self.visible_offset),
            "visible_scale": array_to_dict(self.visible_scale),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RbmLayer":
        return cls(
            d["kind"],
            array_from_dict(d["weights"]),
            array_from_dict(d["visible_bias"]),
            array_from_dict(d["hidden_bias"]),
            array_from_dict(d["visible_offset"]),
            array_from_dict(d["visible_scale"]),
        )


def init_layer(kind: str, n_visible: int, n_hidden: int, rng: np.random.Generator) -> RbmLayer:
    """Small Gaussian weights, zero biases."""
    return RbmLayer(
        kind,
        rng.normal(0.0, INIT_WEIGHT_STD, size=(n_visible, n_hidden)),
        np.zeros(n_visible),
        np.zeros(n_hidden),
    )


@dataclass(frozen=True)
class CdConfig:
    """Contrastive-divergence hyper-parameters.

    ``learning_rate=None`` picks the default for the layer kind.
    ``gaussian_visible_noise`` adds unit-variance noise to real-valued
    reconstructions inside the Gibbs chain; off by default, so the chain
    uses the conditional mean for those units.
    """

    cd_steps: int = 1
    learning_rate: float | None = None
    epochs: int = 100
    minibatch_size: int = 100
    rng_seed: int = 0
    shuffle_each_epoch: bool = True
    gaussian_visible_noise: bool = False

    def __post_init__(self):
        if self.cd_steps < 1 or self.minibatch_size < 1 or self.epochs < 0:
            raise ValidationError(f"invalid CD configuration: {self}")
        if self.learning_rate is not None and not self.learning_rate >= 0:
            raise ValidationError(f"learning rate must be non-negative, got {self.learning_rate}")

    def rate_for(self, kind: str) -> float:
        return DEFAULT_LEARNING_RATE[kind] if self.learning_rate is None else float(self.learning_rate)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RbmGradient:
    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.visible_bias, self.hidden_bias])


@dataclass
class TrainTrace:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_mse)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["epoch", "train_mse", "val_mse"])
        for i, (t, v) in enumerate(zip(self.train_mse, self.val_mse), start=1):
            writer.writerow([i, repr(t), repr(v)])
        return out.getvalue()


def _as_matrix(x, width: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(getattr(x, "rows", x), dtype=np.float64)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != width:
        raise ShapeError(f"{what} has shape {x.shape}, expected width {width}")
    return x2, single


def _standardize(layer: RbmLayer, v: np.ndarray) -> np.ndarray:
    if layer.kind == BERNOULLI:
        return v
    return (v - layer.visible_offset) / layer.visible_scale


def _hidden_given(layer: RbmLayer, u: np.ndarray) -> np.ndarray:
    return sigmoid(u @ layer.weights + layer.hidden_bias)


def _visible_given(layer: RbmLayer, h: np.ndarray, sample: bool, rng) -> np.ndarray:
    """Visible conditional in model units (standardized for Gaussian units)."""
    activation = h @ layer.weights.T + layer.visible_bias
    if layer.kind == BERNOULLI:
        out = sigmoid(activation)
        return _sample_bernoulli(out, rng) if sample else out
    return activation + rng.standard_normal(activation.shape) if sample else activation


def hidden_probabilities(layer: RbmLayer, v) -> np.ndarray:
    """p(h_j = 1 | v) for a single visible vector or a batch of rows."""
    v2, single = _as_matrix(v, layer.n_visible, "visible input")
    p = _hidden_given(layer, _standardize(layer, v2))
    return p[0] if single else p


def visible_reconstruction(
    layer: RbmLayer, h, sample: bool = False, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Visible conditional given hidden states, in data units.

    Bernoulli units return probabilities (binary draws when ``sample``);
    Gaussian units return the conditional mean (plus unit-variance noise in
    model units when ``sample``).
    """
    h2, single = _as_matrix(h, layer.n_hidden, "hidden input")
    out = _visible_given(layer, h2, sample, rng)
    if layer.kind == GAUSSIAN:
        out = layer.visible_offset + layer.visible_scale * out
    return out[0] if single else out


def _sample_bernoulli(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(p.shape) < p).astype(np.float64)


def cd_gradient(
    layer: RbmLayer,
    minibatch,
    cd_steps: int,
    rng: np.random.Generator,
    gaussian_visible_noise: bool = False,
) -> RbmGradient:
    """CD-k estimate of the mean log-likelihood gradient over a minibatch.

    Hidden states are sampled at every Gibbs step; the statistics at both
    ends of the chain use hidden probabilities. Bernoulli visible units are
    sampled inside the chain. Gradients are in model units.
    """
    v0, _ = _as_matrix(minibatch, layer.n_visible, "minibatch")
    u0 = _standardize(layer, v0)
    m = u0.shape[0]
    ph0 = _hidden_given(layer, u0)
    ph, uk = ph0, u0
    sample_visible = layer.kind == BERNOULLI or gaussian_visible_noise
    for _ in range(cd_steps):
        hk = _sample_bernoulli(ph, rng)
        uk = _visible_given(layer, hk, sample_visible, rng)
        ph = _hidden_given(layer, uk)
    return RbmGradient(
        (u0.T @ ph0 - uk.T @ ph) / m,
        (u0 - uk).mean(axis=0),
        (ph0 - ph).mean(axis=0),
    )


def apply_gradient(layer: RbmLayer, grad: RbmGradient, rate: float) -> RbmLayer:
    if rate == 0.0:
        return layer
    return layer.with_params(
        layer.weights + rate * grad.weights,
        layer.visible_bias + rate * grad.visible_bias,
        layer.hidden_bias + rate * grad.hidden_bias,
    )


def cd_update(
    layer: RbmLayer,
    minibatch,
    config: CdConfig,
    rng: np.random.Generator,
    epoch: int | None = None,
) -> RbmLayer:
    """One CD-k ascent step on a minibatch."""
    rate = config.rate_for(layer.kind)
    grad = cd_gradient(layer, minibatch, config.cd_steps, rng, config.gaussian_visible_noise)
    updated = apply_gradient(layer, grad, rate)
    if not updated.is_finite():
        raise DivergenceError(f"non-finite parameters after CD update of {layer.kind} layer", epoch)
    return updated


def reconstruction_mse(layer: RbmLayer, data) -> float:
    """Mean squared error between data and its mean-field reconstruction."""
    v, _ = _as_matrix(data, layer.n_visible, "data")
    recon = visible_reconstruction(layer, hidden_probabilities(layer, v))
    return float(np.mean((v - recon) ** 2))


def training_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for minibatch order and Gibbs sampling.

    Keeping them apart means a pre-shuffled dataset trained without
    shuffling consumes the sampling stream identically.
    """
    order_ss, sample_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(order_ss), np.random.default_rng(sample_ss)


def train_rbm(layer: RbmLayer, train, val, config: CdConfig) -> tuple[RbmLayer, TrainTrace]:
    """Minibatch CD training for ``config.epochs`` passes over ``train``.

    After each epoch the reconstruction MSE on ``train`` and ``val`` is
    appended to the returned trace.
    """
    x, _ = _as_matrix(train, layer.n_visible, "training data")
    xv, _ = _as_matrix(val, layer.n_visible, "validation data")
    order_rng, sample_rng = training_streams(config.rng_seed)
    trace = TrainTrace()
    n = x.shape[0]
    for epoch in range(1, config.epochs + 1):
        data = x[order_rng.permutation(n)] if config.shuffle_each_epoch else x
        for start in range(0, n, config.minibatch_size):
            layer = cd_update(layer, data[start:start + config.minibatch_size], config, sample_rng, epoch)
        trace.train_mse.append(reconstruction_mse(layer, x))
        trace.val_mse.append(reconstruction_mse(layer, xv))
    return layer, trace


# exact enumeration, used as a test oracle for small Bernoulli RBMs


def _binary_states(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=n)), dtype=np.float64).reshape(-1, n)


def _check_enumerable(layer: RbmLayer) -> None:
    if layer.kind != BERNOULLI:
        raise ValidationError("exact enumeration is defined for Bernoulli-Bernoulli layers only")
    if layer.n_visible + layer.n_hidden > EXACT_MAX_UNITS:
        raise ValidationError(
            f"{layer.n_visible}+{layer.n_hidden} units exceeds the enumeration bound {EXACT_MAX_UNITS}"
        )


def _model_distribution(layer: RbmLayer):
    vs, hs = _binary_states(layer.n_visible), _binary_states(layer.n_hidden)
    neg_energy = (
        (vs @ layer.weights) @ hs.T
        + (vs @ layer.visible_bias)[:, None]
        + (hs @ layer.hidden_bias)[None, :]
    )
    top = neg_energy.max()
    log_z = top + np.log(np.exp(neg_energy - top).sum())
    return vs, hs, np.exp(neg_energy - log_z), log_z


def log_likelihood(layer: RbmLayer, data) -> float:
    """Mean log-probability of binary ``data`` under the RBM, by summing
    over every joint visible/hidden state."""
    _check_enumerable(layer)
    v, _ = _as_matrix(data, layer.n_visible, "data")
    _, hs, _, log_z = _model_distribution(layer)
    neg_energy = (v @ layer.weights) @ hs.T + (v @ layer.visible_bias)[:, None] + (hs @ layer.hidden_bias)[None, :]
    top = neg_energy.max(axis=1, keepdims=True)
    log_marginal = top[:, 0] + np.log(np.exp(neg_energy - top).sum(axis=1))
    return float(np.mean(log_marginal) - log_z)


def exact_gradient(layer: RbmLayer, data) -> RbmGradient:
    """Exact gradient of :func:`log_likelihood` with respect to each parameter."""
    _check_enumerable(layer)
    v, _ = _as_matrix(data, layer.n_visible, "data")
    ph = hidden_probabilities(layer, v)
    vs, hs, joint, _ = _model_distribution(layer)
    p_v = joint.sum(axis=1)
    p_h = joint.sum(axis=0)
    return RbmGradient(
        v.T @ ph / v.shape[0] - vs.T @ joint @ hs,
        v.mean(axis=0) - p_v @ vs,
        ph.mean(axis=0) - p_h @ hs,
    )


@dataclass(frozen=True, eq=False)
class DbnModel:
    layers: tuple[RbmLayer, ...]
    config: CdConfig | None = None

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ShapeError("a DBN needs at least one layer")
        if layers[0].kind != GAUSSIAN or any(l.kind != BERNOULLI for l in layers[1:]):
            raise ShapeError("DBN layers must be one gaussian-bernoulli layer followed by bernoulli layers")
        for lower, upper in zip(layers, layers[1:]):
            if lower.n_hidden != upper.n_visible:
                raise ShapeError(f"layer widths do not chain: {lower.n_hidden} -> {upper.n_visible}")

    @property
    def input_width(self) -> int:
        return self.layers[0].n_visible

    @property
    def output_width(self) -> int:
        return self.layers[-1].n_hidden

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model": "dbn",
            "layers": [layer.to_dict() for layer in self.layers],
            "cd_config": None if self.config is None else self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DbnModel":
        if d.get("model") != "dbn":
            raise ValidationError(f"not a DBN model file: {d.get('model')!r}")
        config = None if d.get("cd_config") is None else CdConfig(**d["cd_config"])
        return cls(tuple(RbmLayer.from_dict(l) for l in d["layers"]), config)


def dbn_pretrain(
    train,
    val,
    sizes: Sequence[int] = (15, 20),
    config: CdConfig = CdConfig(),
    standardize_input: bool = True,
) -> tuple[DbnModel, list[TrainTrace]]:
    """Greedy layer-wise pretraining.

    The first layer is Gaussian-Bernoulli on the scaled features; each
    following Bernoulli layer trains on the hidden probabilities of the one
    below. Every layer draws its initial weights and its CD streams from a
    seed derived from ``config.rng_seed`` and the layer index.

    With ``standardize_input`` the Gaussian layer's fixed offset and scale
    are the training columns' mean and standard deviation. Min-max scaled
    features have a variance far below one, and a unit-variance Gaussian
    RBM fit to them learns next to nothing.
    """
    x = np.asarray(getattr(train, "rows", train), dtype=np.float64)
    xv = np.asarray(getattr(val, "rows", val), dtype=np.float64)
    layers, traces = [], []
    width = x.shape[1]
    for i, n_hidden in enumerate(sizes):
        kind = GAUSSIAN if i == 0 else BERNOULLI
        init_rng = np.random.default_rng(derive_seed(config.rng_seed, "rbm-init", i))
        layer = init_layer(kind, width, n_hidden, init_rng)
        if kind == GAUSSIAN and standardize_input:
            std = x.std(axis=0)
            layer = RbmLayer(
                kind, layer.weights, layer.visible_bias, layer.hidden_bias,
                x.mean(axis=0), np.where(std > 0, std, 1.0),
            )
        layer_config = replace(config, rng_seed=derive_seed(config.rng_seed, "rbm-train", i))
        layer, trace = train_rbm(layer, x, xv, layer_config)
        layers.append(layer)
        traces.append(trace)
        x, xv = hidden_probabilities(layer, x), hidden_probabilities(layer, xv)
        width = n_hidden
    return DbnModel(tuple(layers), config), traces


def dbn_propagate(model: DbnModel, features) -> np.ndarray:
    """Top-layer hidden probabilities (mean-field pass through every layer)."""
    x, _ = _as_matrix(features, model.input_width, "features")
    for layer in model.layers:
        x = hidden_probabilities(layer, x)
    return x


def dbn_transform(
    model: DbnModel, features, mode: str = "threshold", rng: np.random.Generator | None = None
) -> np.ndarray:
    """Binary latent representation: top-layer probabilities thresholded at
    0.5 (inclusive) or, in ``sample`` mode, drawn as Bernoulli variables."""
    p = dbn_propagate(model, features)
    if mode == "threshold":
        return (p >= 0.5).astype(np.float64)
    if mode == "sample":
        if rng is None:
            raise ValidationError("sample mode needs a seeded generator")
        return _sample_bernoulli(p, rng)
    raise ValidationError(f"unknown transform mode {mode!r}")
