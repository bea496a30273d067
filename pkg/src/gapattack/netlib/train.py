"""Desk-scale trainer for softmax victims (dense/relu stacks only).

Full-batch gradient descent on cross-entropy. Deterministic for a fixed
seed; no momentum, no regularization — the goal is a real trained victim
for attack experiments, not benchmark accuracy.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from ..errors import ShapeMismatchError
from .model import NetworkModel, flatten, random_model


@dataclasses.dataclass(frozen=True)
class TrainResult:
    model: NetworkModel
    loss_history: tuple[float, ...]
    train_accuracy: float


def train_toy(examples, layers, epochs: int, lr: float, seed: int) -> TrainResult:
    """Train a dense/relu/softmax stack on labeled images.

    ``examples`` is a sequence of (Image, label) pairs, all images the same
    shape. ``layers`` must end with softmax; a flatten layer is prepended
    automatically. loss_history holds the cross-entropy before each update
    plus the post-training value (so epochs+1 entries); epochs=0 returns
    the seeded initial weights untouched.
    """
    if not examples:
        raise ValueError("training set is empty")
    allowed = {"dense", "relu", "softmax"}
    kinds = [layer.kind for layer in layers]
    if not set(kinds) <= allowed:
        raise ValueError(f"trainer supports {sorted(allowed)} layers only, got {kinds}")
    if kinds[-1] != "softmax" or "dense" not in kinds:
        raise ValueError("trainer needs at least one dense layer and a final softmax")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")

    input_shape = examples[0][0].shape
    for img, _ in examples:
        if img.shape != input_shape:
            raise ShapeMismatchError(
                f"training images disagree: {img.shape} vs {input_shape}"
            )
    model = random_model((flatten(),) + tuple(layers), input_shape, seed)
    class_count = model.class_count
    labels = np.array([label for _, label in examples], dtype=np.int64)
    if labels.min() < 0 or labels.max() >= class_count:
        raise ValueError(
            f"labels must lie in [0, {class_count}), got [{labels.min()}, {labels.max()}]"
        )

    n = len(examples)
    x0 = np.stack([img.data.reshape(-1) for img, _ in examples])
    onehot = np.zeros((n, class_count))
    onehot[np.arange(n), labels] = 1.0

    # mutable copies of the dense weights, aligned with model.layers
    params = [dict((k, v.copy()) for k, v in w.items()) for w in model.weights]
    stack = [
        (idx, layer.kind)
        for idx, layer in enumerate(model.layers)
        if layer.kind in ("dense", "relu")
    ]

    def batch_forward():
        a = x0
        cache = []  # (kind, idx, input to the layer)
        for idx, kind in stack:
            cache.append((kind, idx, a))
            if kind == "dense":
                a = a @ params[idx]["kernel"] + params[idx]["bias"]
            else:
                a = np.maximum(a, 0.0)
        shifted = a - a.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        probs = exp / exp.sum(axis=1, keepdims=True)
        loss = float(-np.mean(np.log(probs[np.arange(n), labels])))
        return probs, loss, cache

    history = []
    for _ in range(epochs):
        probs, loss, cache = batch_forward()
        history.append(loss)
        grad = (probs - onehot) / n
        for kind, idx, inp in reversed(cache):
            if kind == "dense":
                kernel = params[idx]["kernel"]
                grad_kernel = inp.T @ grad
                grad_bias = grad.sum(axis=0)
                grad = grad @ kernel.T
                params[idx]["kernel"] = kernel - lr * grad_kernel
                params[idx]["bias"] = params[idx]["bias"] - lr * grad_bias
            else:
                grad = grad * (inp > 0.0)

    probs, final_loss, _ = batch_forward()
    history.append(final_loss)
    accuracy = float(np.mean(probs.argmax(axis=1) == labels))
    trained = dataclasses.replace(
        model, weights=tuple({k: v.copy() for k, v in w.items()} for w in params)
    )
    return TrainResult(trained, tuple(history), accuracy)
