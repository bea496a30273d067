"""Victim architectures as layer lists.

These are structural stand-ins at realistic depths: a capsule network
(conv -> conv-capsule -> routed class capsules), a 5-weight-layer CNN, and
a 9-weight-layer CNN. Instantiate with random_model() or file weights.
"""

from __future__ import annotations

from .model import (
    LayerSpec,
    caps_fc,
    conv2d,
    dense,
    flatten,
    maxpool,
    primary_caps,
    relu,
    softmax,
)


def capsnet_layers(class_count: int = 43) -> tuple[LayerSpec, ...]:
    """Capsule victim for 32x32 inputs: 9x9 conv, 5x5 capsule conv,
    routed fully connected capsules whose norms are the class scores."""
    return (
        conv2d((9, 9), 32),
        relu(),
        primary_caps((5, 5), capsule_count=8, capsule_dim=8, stride=2),
        caps_fc(capsule_count=class_count, capsule_dim=16, routing_iters=3),
    )


def tiny_capsnet_layers(class_count: int = 4) -> tuple[LayerSpec, ...]:
    """Same shape of architecture as capsnet_layers but sized for 8x8
    test images, so routing behavior can be exercised cheaply."""
    return (
        conv2d((3, 3), 8),
        relu(),
        primary_caps((3, 3), capsule_count=4, capsule_dim=4, stride=2),
        caps_fc(capsule_count=class_count, capsule_dim=8, routing_iters=3),
    )


def lenet_layers(class_count: int = 43) -> tuple[LayerSpec, ...]:
    # 5 weight layers: 2 conv + 3 dense, for 32x32 inputs
    return (
        conv2d((5, 5), 6),
        relu(),
        maxpool((2, 2)),
        conv2d((5, 5), 16),
        relu(),
        maxpool((2, 2)),
        flatten(),
        dense(120),
        relu(),
        dense(84),
        relu(),
        dense(class_count),
        softmax(),
    )


def vggnet_layers(class_count: int = 43) -> tuple[LayerSpec, ...]:
    # 9 weight layers: 6 conv + 3 dense, for 32x32 inputs
    return (
        conv2d((3, 3), 16),
        relu(),
        conv2d((3, 3), 16),
        relu(),
        maxpool((2, 2)),
        conv2d((3, 3), 32),
        relu(),
        conv2d((3, 3), 32),
        relu(),
        maxpool((2, 2)),
        conv2d((3, 3), 64),
        relu(),
        conv2d((3, 3), 64),
        relu(),
        flatten(),
        dense(128),
        relu(),
        dense(64),
        relu(),
        dense(class_count),
        softmax(),
    )
