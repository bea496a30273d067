"""Binary weight files.

Layout: magic "CAPW", u32 version (1), u32 entry count, then per entry a
u32 name length, the UTF-8 name, and a u64 element count; after the
manifest comes the payload — every entry's float64 data, little-endian,
concatenated in manifest order. Entry names are "layerNN.kernel" /
"layerNN.bias" in layer order, names sorted within a layer.
"""

from __future__ import annotations

import dataclasses
import struct

import numpy as np

from ..errors import MalformedFileError, ManifestMismatchError
from .model import NetworkModel, weight_shapes

_MAGIC = b"CAPW"
_VERSION = 1


def _manifest_for(model: NetworkModel) -> list[tuple[str, tuple[int, ...]]]:
    entries = []
    for idx, shapes in enumerate(weight_shapes(model.layers, model.input_shape)):
        for name in sorted(shapes):
            entries.append((f"layer{idx:02d}.{name}", shapes[name]))
    return entries


def save_weights(model: NetworkModel, path: str) -> None:
    manifest = _manifest_for(model)
    arrays = []
    for name, _ in manifest:
        layer_idx, field = name.split(".")
        arrays.append(model.weights[int(layer_idx[5:])][field])
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(manifest)))
        for (name, _), arr in zip(manifest, arrays):
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<Q", arr.size))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_weights(path: str, model: NetworkModel) -> NetworkModel:
    """Read a weight file into ``model``'s architecture.

    The file's manifest carries only names and element counts, so the
    architecture (and thus every array's shape) must be supplied; the
    result is a new model with the loaded arrays.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise MalformedFileError(f"{path}: bad magic {blob[:4]!r}, expected {_MAGIC!r}")
    if len(blob) < 12:
        raise MalformedFileError(f"{path}: truncated header")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != _VERSION:
        raise MalformedFileError(f"{path}: unsupported version {version}")

    offset = 12
    manifest = []
    for _ in range(count):
        if offset + 4 > len(blob):
            raise MalformedFileError(f"{path}: truncated manifest")
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + name_len + 8 > len(blob):
            raise MalformedFileError(f"{path}: truncated manifest")
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (elems,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        manifest.append((name, elems))

    expected = _manifest_for(model)
    got_names = [(name, elems) for name, elems in manifest]
    want_names = [(name, int(np.prod(shape))) for name, shape in expected]
    if got_names != want_names:
        raise ManifestMismatchError(
            f"{path}: manifest {got_names} does not match architecture {want_names}"
        )

    total = sum(elems for _, elems in manifest)
    payload = blob[offset:]
    if len(payload) != total * 8:
        raise ManifestMismatchError(
            f"{path}: payload holds {len(payload)} bytes, manifest declares {total * 8}"
        )

    flat = np.frombuffer(payload, dtype="<f8")
    cursor = 0
    new_weights = [dict(w) for w in model.weights]
    for (name, elems), (_, shape) in zip(manifest, expected):
        layer_idx, field = name.split(".")
        arr = flat[cursor : cursor + elems].reshape(shape).astype(np.float64)
        new_weights[int(layer_idx[5:])][field] = arr
        cursor += elems
    return dataclasses.replace(model, weights=tuple(new_weights))
