"""Dense feed-forward classifier with analytic gradients and a growable head.

Everything is float64. A model is a stack of affine layers with ReLU between
them; the last affine output is the logit vector. The output head can be
extended in place-preserving fashion: old parameters are copied bit-exact and
only the added output units get fresh random rows, so logits for existing
classes are unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, StateError


@dataclass
class MlpClassifier:
    """layer_dims = [input_dim, hidden..., output_dim]; weights[i] maps
    layer_dims[i] -> layer_dims[i+1] (stored as in x out matrices)."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpClassifier":
        return MlpClassifier(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass
class ForwardTrace:
    """Per-layer tensors retained by forward() so backward() can replay the pass."""

    model: MlpClassifier
    inputs: np.ndarray
    pre_activations: list[np.ndarray]   # one per layer, before ReLU / logits
    activations: list[np.ndarray]       # post-ReLU, excludes the final logits
    logits: np.ndarray


@dataclass
class Gradients:
    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            [factor * g for g in self.d_weights],
            [factor * g for g in self.d_biases],
        )


def init_mlp(layer_dims, seed) -> MlpClassifier:
    """Seeded scaled-uniform init: every parameter of layer i is drawn from
    uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ShapeError(f"layer_dims must be >= 2 positive entries, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpClassifier(dims, weights, biases)


def _check_batch(model: MlpClassifier, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.input_dim:
        raise ShapeError(
            f"batch shape {batch.shape} incompatible with input dim {model.input_dim}"
        )
    return batch


def forward(model: MlpClassifier, batch: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """Run the affine/ReLU stack on a batch; returns logits and the trace
    needed for exact backprop."""
    batch = _check_batch(model, batch)
    pre_acts, acts = [], []
    a = batch
    last = model.n_layers - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        if i < last:
            z = a @ w + b
            pre_acts.append(z)
            a = np.maximum(z, 0.0)
            acts.append(a)
        else:
            # column-by-column so each logit's rounding is independent of the
            # head width; expand_head then preserves old logits bit-exact
            z = np.stack([a @ w[:, j] for j in range(w.shape[1])], axis=1) + b
            pre_acts.append(z)
    logits = pre_acts[-1]
    return logits, ForwardTrace(model, batch, pre_acts, acts, logits)


def features(model: MlpClassifier, batch: np.ndarray) -> np.ndarray:
    """Penultimate representation: activations of the last hidden layer.
    A model with no hidden layer simply passes the input through."""
    _, trace = forward(model, batch)
    if trace.activations:
        return trace.activations[-1]
    return trace.inputs


def backward(model: MlpClassifier, trace: ForwardTrace, d_logits: np.ndarray) -> Gradients:
    """Exact parameter gradients given the upstream loss gradient w.r.t. logits."""
    if trace.model is not model:
        raise StateError("trace was produced by a different model")
    d_logits = np.asarray(d_logits, dtype=np.float64)
    if d_logits.shape != trace.logits.shape:
        raise ShapeError(
            f"d_logits shape {d_logits.shape} != logits shape {trace.logits.shape}"
        )
    d_w = [np.empty(0)] * model.n_layers
    d_b = [np.empty(0)] * model.n_layers
    delta = d_logits
    for i in range(model.n_layers - 1, -1, -1):
        a_in = trace.inputs if i == 0 else trace.activations[i - 1]
        d_w[i] = a_in.T @ delta
        d_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (trace.pre_activations[i - 1] > 0)
    return Gradients(d_w, d_b)


def sgd_step(model: MlpClassifier, grads: Gradients, lr: float) -> None:
    """In-place p -= lr * g for every parameter."""
    for w, g in zip(model.weights, grads.d_weights):
        if w.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != weight shape {w.shape}")
    for b, g in zip(model.biases, grads.d_biases):
        if b.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != bias shape {b.shape}")
    for w, g in zip(model.weights, grads.d_weights):
        w -= lr * g
    for b, g in zip(model.biases, grads.d_biases):
        b -= lr * g


def expand_head(model: MlpClassifier, extra_outputs: int, init_scale: float, seed) -> MlpClassifier:
    """New classifier with extra_outputs additional output units. All existing
    parameters are copied bit-exact; the added units' weights and biases are
    drawn from uniform(-init_scale, init_scale) with the given seed."""
    if extra_outputs < 1:
        raise ShapeError(f"extra_outputs must be >= 1, got {extra_outputs}")
    rng = np.random.default_rng(seed)
    out = model.copy()
    h = out.layer_dims[-2]
    new_w = rng.uniform(-init_scale, init_scale, size=(h, extra_outputs))
    new_b = rng.uniform(-init_scale, init_scale, size=extra_outputs)
    out.weights[-1] = np.concatenate([out.weights[-1], new_w], axis=1)
    out.biases[-1] = np.concatenate([out.biases[-1], new_b])
    out.layer_dims = out.layer_dims[:-1] + [out.layer_dims[-1] + extra_outputs]
    return out
