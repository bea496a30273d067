"""Minimal forward-pass engine for the built-in victim classifiers.

Supports plain CNN layers (conv/pool/dense/softmax) and capsule layers
(squash + routing-by-agreement), a binary weight-file format, and a
desk-scale gradient-descent trainer for softmax victims.
"""

from .capsule import route, squash
from .model import (
    LayerSpec,
    NetworkModel,
    caps_fc,
    conv2d,
    dense,
    flatten,
    forward,
    infer_shapes,
    load_architecture,
    maxpool,
    primary_caps,
    random_model,
    relu,
    save_architecture,
    softmax,
)
from .presets import capsnet_layers, lenet_layers, tiny_capsnet_layers, vggnet_layers
from .train import TrainResult, train_toy
from .weights import load_weights, save_weights

__all__ = [
    "LayerSpec",
    "NetworkModel",
    "TrainResult",
    "caps_fc",
    "capsnet_layers",
    "conv2d",
    "dense",
    "flatten",
    "forward",
    "infer_shapes",
    "lenet_layers",
    "load_architecture",
    "load_weights",
    "maxpool",
    "primary_caps",
    "random_model",
    "relu",
    "route",
    "save_architecture",
    "save_weights",
    "softmax",
    "squash",
    "tiny_capsnet_layers",
    "train_toy",
    "vggnet_layers",
]
