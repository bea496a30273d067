"""Network description and the forward pass.

A model is an ordered list of LayerSpecs plus per-layer weight arrays.
Shapes flow through three forms: ("grid", h, w, c) for image-like tensors,
("caps", count, dim) for capsule stacks, ("vec", n) for flat vectors.
Convolutions are valid-only (no padding); pooling is non-overlapping.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from ..errors import MalformedFileError, ShapeMismatchError
from ..image import Image, ProbVector
from .capsule import route, squash

_KINDS = (
    "conv2d",
    "relu",
    "maxpool",
    "flatten",
    "dense",
    "softmax",
    "primary_caps",
    "caps_fc",
)


@dataclasses.dataclass(frozen=True)
class LayerSpec:
    kind: str
    kernel: tuple[int, int] | None = None
    stride: int = 1
    units: int | None = None
    filters: int | None = None
    capsule_count: int | None = None
    capsule_dim: int | None = None
    routing_iters: int = 3

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.kind in ("conv2d", "maxpool", "primary_caps"):
            if self.kernel is None or min(self.kernel) < 1:
                raise ValueError(f"{self.kind} needs a positive kernel, got {self.kernel}")
        if self.kind == "conv2d" and (self.filters is None or self.filters < 1):
            raise ValueError("conv2d needs filters >= 1")
        if self.kind == "dense" and (self.units is None or self.units < 1):
            raise ValueError("dense needs units >= 1")
        if self.kind in ("primary_caps", "caps_fc"):
            if self.capsule_count is None or self.capsule_count < 1:
                raise ValueError(f"{self.kind} needs capsule_count >= 1")
            if self.capsule_dim is None or self.capsule_dim < 1:
                raise ValueError(f"{self.kind} needs capsule_dim >= 1")
        if self.kind == "caps_fc" and self.routing_iters < 1:
            raise ValueError("caps_fc needs routing_iters >= 1")


def conv2d(kernel: tuple[int, int], filters: int, stride: int = 1) -> LayerSpec:
    return LayerSpec("conv2d", kernel=tuple(kernel), stride=stride, filters=filters)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def maxpool(kernel: tuple[int, int] = (2, 2)) -> LayerSpec:
    return LayerSpec("maxpool", kernel=tuple(kernel))


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def dense(units: int) -> LayerSpec:
    return LayerSpec("dense", units=units)


def softmax() -> LayerSpec:
    return LayerSpec("softmax")


def primary_caps(
    kernel: tuple[int, int], capsule_count: int, capsule_dim: int, stride: int = 1
) -> LayerSpec:
    return LayerSpec(
        "primary_caps",
        kernel=tuple(kernel),
        stride=stride,
        capsule_count=capsule_count,
        capsule_dim=capsule_dim,
    )


def caps_fc(capsule_count: int, capsule_dim: int, routing_iters: int = 3) -> LayerSpec:
    return LayerSpec(
        "caps_fc",
        capsule_count=capsule_count,
        capsule_dim=capsule_dim,
        routing_iters=routing_iters,
    )


def _conv_extent(size: int, kernel: int, stride: int) -> int:
    if kernel > size:
        raise ValueError(f"kernel {kernel} exceeds input extent {size}")
    return (size - kernel) // stride + 1


def infer_shapes(layers, input_shape: tuple[int, int, int]) -> list[tuple]:
    """Shape after each layer, starting from ("grid", H, W, C).

    Raises ValueError when adjacent layers do not compose.
    """
    h, w, c = input_shape
    shape: tuple = ("grid", h, w, c)
    out = []
    for idx, layer in enumerate(layers):
        kind = layer.kind
        try:
            if kind == "conv2d":
                _, h, w, c = _want(shape, "grid", kind)
                oh = _conv_extent(h, layer.kernel[0], layer.stride)
                ow = _conv_extent(w, layer.kernel[1], layer.stride)
                shape = ("grid", oh, ow, layer.filters)
            elif kind == "relu":
                if shape[0] not in ("grid", "vec"):
                    raise ValueError("relu expects a grid or vector input")
            elif kind == "maxpool":
                _, h, w, c = _want(shape, "grid", kind)
                kh, kw = layer.kernel
                if kh > h or kw > w:
                    raise ValueError(f"pool kernel {layer.kernel} exceeds {h}x{w}")
                shape = ("grid", h // kh, w // kw, c)
            elif kind == "flatten":
                _, h, w, c = _want(shape, "grid", kind)
                shape = ("vec", h * w * c)
            elif kind == "dense":
                _want(shape, "vec", kind)
                shape = ("vec", layer.units)
            elif kind == "softmax":
                _want(shape, "vec", kind)
            elif kind == "primary_caps":
                _, h, w, c = _want(shape, "grid", kind)
                oh = _conv_extent(h, layer.kernel[0], layer.stride)
                ow = _conv_extent(w, layer.kernel[1], layer.stride)
                shape = ("caps", oh * ow * layer.capsule_count, layer.capsule_dim)
            elif kind == "caps_fc":
                _want(shape, "caps", kind)
                shape = ("caps", layer.capsule_count, layer.capsule_dim)
        except ValueError as exc:
            raise ValueError(f"layer {idx} ({kind}): {exc}") from exc
        out.append(shape)
    return out


def _want(shape: tuple, form: str, kind: str) -> tuple:
    if shape[0] != form:
        raise ValueError(f"{kind} expects a {form} input, got {shape}")
    return shape


def weight_shapes(layers, input_shape) -> list[dict[str, tuple[int, ...]]]:
    """Per-layer weight array shapes; layers without weights get {}."""
    shapes = [("grid",) + tuple(input_shape)] + infer_shapes(layers, input_shape)
    out = []
    for layer, before in zip(layers, shapes):
        if layer.kind == "conv2d":
            kh, kw = layer.kernel
            out.append(
                {"kernel": (kh, kw, before[3], layer.filters), "bias": (layer.filters,)}
            )
        elif layer.kind == "primary_caps":
            kh, kw = layer.kernel
            span = layer.capsule_count * layer.capsule_dim
            out.append({"kernel": (kh, kw, before[3], span), "bias": (span,)})
        elif layer.kind == "dense":
            out.append({"kernel": (before[1], layer.units), "bias": (layer.units,)})
        elif layer.kind == "caps_fc":
            out.append(
                {
                    "kernel": (
                        before[1],
                        layer.capsule_count,
                        layer.capsule_dim,
                        before[2],
                    )
                }
            )
        else:
            out.append({})
    return out


@dataclasses.dataclass(frozen=True)
class NetworkModel:
    """Immutable layer list + weights; class_count matches the output layer."""

    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    weights: tuple[dict, ...]
    class_count: int

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "weights", tuple(self.weights))
        if not self.layers:
            raise ValueError("a model needs at least one layer")
        if self.layers[-1].kind not in ("softmax", "caps_fc"):
            raise ValueError("last layer must be softmax or caps_fc to yield class scores")
        produced = infer_shapes(self.layers, self.input_shape)[-1][1]
        if produced != self.class_count:
            raise ValueError(
                f"output layer yields {produced} classes, model declares {self.class_count}"
            )
        expected = weight_shapes(self.layers, self.input_shape)
        if len(self.weights) != len(self.layers):
            raise ValueError("weights must align with layers")
        for idx, (want, got) in enumerate(zip(expected, self.weights)):
            if sorted(want) != sorted(got):
                raise ValueError(f"layer {idx}: weight names {sorted(got)} != {sorted(want)}")
            for name, shape in want.items():
                if tuple(got[name].shape) != shape:
                    raise ValueError(
                        f"layer {idx}.{name}: shape {got[name].shape} != {shape}"
                    )


def random_model(layers, input_shape, seed: int, class_count: int | None = None) -> NetworkModel:
    """Seeded Gaussian init: std 1/sqrt(fan_in) kernels, zero biases."""
    rng = np.random.default_rng(seed)
    weights = []
    for layer, shapes in zip(layers, weight_shapes(layers, input_shape)):
        arrays = {}
        for name in sorted(shapes):
            shape = shapes[name]
            if name == "bias":
                arrays[name] = np.zeros(shape, dtype=np.float64)
            else:
                if layer.kind in ("conv2d", "primary_caps"):
                    fan_in = shape[0] * shape[1] * shape[2]
                elif layer.kind == "caps_fc":
                    fan_in = shape[3]
                else:
                    fan_in = shape[0]
                arrays[name] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)
        weights.append(arrays)
    if class_count is None:
        class_count = infer_shapes(layers, input_shape)[-1][1]
    return NetworkModel(tuple(input_shape), tuple(layers), tuple(weights), class_count)


def _conv(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int) -> np.ndarray:
    kh, kw, _, _ = kernel.shape
    oh = (x.shape[0] - kh) // stride + 1
    ow = (x.shape[1] - kw) // stride + 1
    out = np.broadcast_to(bias, (oh, ow, bias.shape[0])).copy()
    for di in range(kh):
        for dj in range(kw):
            patch = x[di : di + (oh - 1) * stride + 1 : stride,
                      dj : dj + (ow - 1) * stride + 1 : stride]
            out += patch @ kernel[di, dj]
    return out


def _maxpool(x: np.ndarray, kernel: tuple[int, int]) -> np.ndarray:
    kh, kw = kernel
    oh, ow = x.shape[0] // kh, x.shape[1] // kw
    trimmed = x[: oh * kh, : ow * kw]
    return trimmed.reshape(oh, kh, ow, kw, x.shape[2]).max(axis=(1, 3))


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def forward(model: NetworkModel, img: Image) -> ProbVector:
    """Deterministic class scores for one image.

    Softmax output layers yield simplex probabilities; capsule output
    layers yield per-class capsule norms (each in [0, 1)).
    """
    if img.shape != model.input_shape:
        raise ShapeMismatchError(
            f"image shape {img.shape} does not match model input {model.input_shape}"
        )
    x = img.data
    for layer, arrays in zip(model.layers, model.weights):
        kind = layer.kind
        if kind == "conv2d":
            x = _conv(x, arrays["kernel"], arrays["bias"], layer.stride)
        elif kind == "relu":
            x = np.maximum(x, 0.0)
        elif kind == "maxpool":
            x = _maxpool(x, layer.kernel)
        elif kind == "flatten":
            x = x.reshape(-1)
        elif kind == "dense":
            x = x @ arrays["kernel"] + arrays["bias"]
        elif kind == "softmax":
            x = _softmax(x)
        elif kind == "primary_caps":
            x = _conv(x, arrays["kernel"], arrays["bias"], layer.stride)
            x = squash(x.reshape(-1, layer.capsule_dim), axis=-1)
        elif kind == "caps_fc":
            votes = np.einsum("njdi,ni->njd", arrays["kernel"], x)
            x = route(votes, layer.routing_iters)
    if model.layers[-1].kind == "caps_fc":
        scores = np.sqrt(np.sum(np.square(x), axis=-1))
    else:
        scores = x
    return ProbVector(scores)


def save_architecture(model_or_parts, path: str) -> None:
    """Write the declarative architecture config (JSON): input shape,
    class count, and the layer list."""
    if isinstance(model_or_parts, NetworkModel):
        input_shape = model_or_parts.input_shape
        layers = model_or_parts.layers
        class_count = model_or_parts.class_count
    else:
        input_shape, layers, class_count = model_or_parts
    entries = []
    for layer in layers:
        entry = {"kind": layer.kind}
        if layer.kernel is not None:
            entry["kernel"] = list(layer.kernel)
        if layer.stride != 1:
            entry["stride"] = layer.stride
        if layer.units is not None:
            entry["units"] = layer.units
        if layer.filters is not None:
            entry["filters"] = layer.filters
        if layer.capsule_count is not None:
            entry["capsule_count"] = layer.capsule_count
        if layer.capsule_dim is not None:
            entry["capsule_dim"] = layer.capsule_dim
        if layer.kind == "caps_fc":
            entry["routing_iters"] = layer.routing_iters
        entries.append(entry)
    doc = {
        "input_shape": list(input_shape),
        "class_count": class_count,
        "layers": entries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_architecture(path: str):
    """Read an architecture config; returns (input_shape, layers, class_count)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}: not valid JSON ({exc})") from exc
    try:
        input_shape = tuple(int(v) for v in doc["input_shape"])
        class_count = int(doc["class_count"])
        layers = []
        for entry in doc["layers"]:
            kwargs = dict(entry)
            kind = kwargs.pop("kind")
            if "kernel" in kwargs:
                kwargs["kernel"] = tuple(kwargs["kernel"])
            layers.append(LayerSpec(kind, **kwargs))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"{path}: bad architecture config ({exc})") from exc
    if len(input_shape) != 3:
        raise MalformedFileError(f"{path}: input_shape must be [H, W, C]")
    return input_shape, tuple(layers), class_count
