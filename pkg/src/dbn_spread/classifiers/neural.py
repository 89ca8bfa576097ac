"""Sigmoid feedforward network trained on squared error with momentum SGD,
initialized from a pretrained DBN."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DivergenceError, ShapeError
from ..rbm import DbnModel, GAUSSIAN, sigmoid
from ..util import array_from_dict, array_to_dict


def _readonly_list(arrays) -> tuple[np.ndarray, ...]:
    out = []
    for a in arrays:
        a = np.array(a, dtype=np.float64)
        a.setflags(write=False)
        out.append(a)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class NeuralNet:
    """Layer ``k`` maps activations through ``sigmoid(a @ weights[k] + biases[k])``;
    the last layer has a single sigmoid output."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    momentum: float = 0.5
    learning_rate: float = 0.1

    def __post_init__(self):
        ws, bs = _readonly_list(self.weights), _readonly_list(self.biases)
        if len(ws) != len(bs) or not ws:
            raise ShapeError("need one bias vector per weight matrix")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {k}: W{w.shape} vs b{b.shape}")
            if k and ws[k - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"layer {k} input {w.shape[0]} != previous output {ws[k - 1].shape[1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ShapeError(f"layer {k} has non-finite parameters")
        if ws[-1].shape[1] != 1:
            raise ShapeError("the output layer must have a single unit")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for pair in zip(self.weights, self.biases) for p in pair])

    def with_flat(self, theta) -> "NeuralNet":
        ws, bs, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(np.asarray(theta[pos:pos + w.size]).reshape(w.shape))
            pos += w.size
            bs.append(np.asarray(theta[pos:pos + b.size]))
            pos += b.size
        return NeuralNet(tuple(ws), tuple(bs), self.momentum, self.learning_rate)

    def to_dict(self) -> dict:
        return {
            "weights": [array_to_dict(w) for w in self.weights],
            "biases": [array_to_dict(b) for b in self.biases],
            "momentum": self.momentum,
            "learning_rate": self.learning_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralNet":
        return cls(
            tuple(array_from_dict(w) for w in d["weights"]),
            tuple(array_from_dict(b) for b in d["biases"]),
            d["momentum"],
            d["learning_rate"],
        )


def nn_from_dbn(dbn: DbnModel, rng: np.random.Generator, momentum: float = 0.5,
                learning_rate: float = 0.1) -> NeuralNet:
    """Hidden layers copy each RBM's weights and hidden biases; the output
    layer starts at Normal(0, 0.01) weights and zero bias.

    A Gaussian layer's fixed input offset and scale are folded into the
    first layer, so the network's hidden activations equal the DBN's
    hidden probabilities.
    """
    ws, bs = [], []
    for layer in dbn.layers:
        w, c = layer.weights, layer.hidden_bias
        if layer.kind == GAUSSIAN:
            w = w / layer.visible_scale[:, None]
            c = c - (layer.visible_offset / layer.visible_scale) @ layer.weights
        ws.append(w)
        bs.append(c)
    ws.append(rng.normal(0.0, 0.01, size=(dbn.output_width, 1)))
    bs.append(np.zeros(1))
    return NeuralNet(tuple(ws), tuple(bs), momentum, learning_rate)


def _forward(net: NeuralNet, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    for w, b in zip(net.weights, net.biases):
        acts.append(sigmoid(acts[-1] @ w + b))
    return acts


def nn_score(net: NeuralNet, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.n_inputs:
        raise ShapeError(f"input width {x.shape[-1]}, network expects {net.n_inputs}")
    out = _forward(net, np.atleast_2d(x))[-1][:, 0]
    return float(out[0]) if x.ndim == 1 else out


def mse(net: NeuralNet, X, targets) -> float:
    """Mean over samples of the squared output error."""
    out = _forward(net, np.asarray(X, dtype=np.float64))[-1][:, 0]
    return float(np.mean((np.asarray(targets, dtype=np.float64) - out) ** 2))


def mse_gradient(net: NeuralNet, X, targets) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backpropagated gradient of :func:`mse` for every weight and bias."""
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    acts = _forward(net, X)
    delta = (2.0 / X.shape[0]) * (acts[-1] - t) * acts[-1] * (1.0 - acts[-1])
    gw, gb = [], []
    for k in range(len(net.weights) - 1, -1, -1):
        gw.append(acts[k].T @ delta)
        gb.append(delta.sum(axis=0))
        if k:
            delta = (delta @ net.weights[k].T) * acts[k] * (1.0 - acts[k])
    return gw[::-1], gb[::-1]


def to_targets(y) -> np.ndarray:
    """Map +/-1 labels onto the {0, 1} targets the sigmoid output fits."""
    return (np.asarray(y) > 0).astype(np.float64)


def nn_train(
    net: NeuralNet,
    X,
    y,
    epochs: int,
    minibatch_size: int = 100,
    lr: float | None = None,
    momentum: float | None = None,
    rng: np.random.Generator | None = None,
    on_epoch: Callable[[int, NeuralNet], None] | None = None,
) -> tuple[NeuralNet, list[float]]:
    """Minibatch gradient descent on squared error with classical momentum,
    ``v <- mu v - lr grad; theta <- theta + v``.

    ``y`` holds +/-1 labels. Rows are reshuffled each epoch when ``rng`` is
    given. Returns the trained network and the full-data MSE after each epoch.
    """
    lr = net.learning_rate if lr is None else lr
    mu = net.momentum if momentum is None else momentum
    X = np.asarray(X, dtype=np.float64)
    t = to_targets(y)
    if X.shape[0] != t.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows but {t.shape[0]} labels")
    ws = [w.copy() for w in net.weights]
    bs = [b.copy() for b in net.biases]
    vw = [np.zeros_like(w) for w in ws]
    vb = [np.zeros_like(b) for b in bs]
    trace = []
    current = NeuralNet(tuple(ws), tuple(bs), mu, lr)
    n = X.shape[0]
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n) if rng is not None else np.arange(n)
        for start in range(0, n, minibatch_size):
            idx = order[start:start + minibatch_size]
            gw, gb = mse_gradient(current, X[idx], t[idx])
            for k in range(len(ws)):
                vw[k] = mu * vw[k] - lr * gw[k]
                vb[k] = mu * vb[k] - lr * gb[k]
                ws[k] = ws[k] + vw[k]
                bs[k] = bs[k] + vb[k]
            if not all(np.all(np.isfinite(w)) for w in ws):
                raise DivergenceError("network weights became non-finite", epoch)
            current = NeuralNet(tuple(ws), tuple(bs), mu, lr)
        loss = mse(current, X, t)
        if not np.isfinite(loss):
            raise DivergenceError("network loss became non-finite", epoch)
        trace.append(loss)
        if on_epoch is not None:
            on_epoch(epoch, current)
    return current, trace
