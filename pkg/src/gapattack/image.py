"""Image and probability containers plus 8-bit file I/O (PPM/PGM and PNG).

Intensities are stored as float64 in [0, 1]; 8-bit files are mapped by /255
on load and round-half-up quantization on save, so load/save round-trips are
the identity on 8-bit payloads.
"""

from __future__ import annotations

import dataclasses
import io
import os
from typing import NamedTuple

import numpy as np
from PIL import Image as PILImage

from .errors import MalformedFileError


class PixelCoord(NamedTuple):
    """Location of one intensity value: (row, col, channel)."""

    row: int
    col: int
    channel: int


@dataclasses.dataclass(frozen=True)
class Image:
    """An H x W x C block of intensities in [0, 1], immutable once built.

    ``data`` is float64 and marked read-only; operations that change pixels
    return a new Image. 2-D input is promoted to a single channel; only
    1- and 3-channel images exist in this toolkit.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"image data must be HxWxC, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must have positive extent, got {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {arr.shape[2]}")
        if not np.isfinite(arr).all():
            raise ValueError("image intensities must be finite")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(
                f"image intensities must lie in [0, 1], got [{lo}, {hi}]; use clip()"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @classmethod
    def _trusted(cls, arr: np.ndarray) -> "Image":
        """Wrap an array known to satisfy the invariants, skipping checks.

        Internal fast path for hot loops (gap probing); callers own the
        guarantee that ``arr`` is float64 HxWxC in [0, 1] and not aliased
        to writable state.
        """
        img = object.__new__(cls)
        arr.flags.writeable = False
        object.__setattr__(img, "data", arr)
        return img

    def with_pixel(self, coord: PixelCoord, value: float) -> "Image":
        """Return a copy with one intensity replaced (clamped into [0, 1])."""
        arr = self.data.copy()
        arr[coord] = min(1.0, max(0.0, value))
        return Image._trusted(arr)


def clip(img) -> Image:
    """Clamp every intensity into [0, 1]; in-range values are untouched.

    Accepts an Image or a raw array (the latter is how out-of-range values
    produced by arithmetic enter in the first place). Idempotent.
    """
    arr = img.data if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    return Image(np.clip(arr, 0.0, 1.0))


@dataclasses.dataclass(frozen=True)
class ProbVector:
    """Per-class scores in [0, 1].

    Scores are not required to sum to 1: capsule-length outputs are valid
    score vectors without forming a simplex. Ties in ``argmax`` resolve to
    the lowest class index.
    """

    scores: np.ndarray
    class_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise ValueError(f"scores must be a vector of length >= 2, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("scores must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("scores must lie in [0, 1]")
        if self.class_labels is not None and len(self.class_labels) != arr.shape[0]:
            raise ValueError("class_labels length must match score count")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "scores", arr)

    def __len__(self) -> int:
        return self.scores.shape[0]

    def argmax(self) -> int:
        """Index of the highest score; ties go to the lowest index."""
        return int(np.argmax(self.scores))

    def rank(self, k: int) -> int:
        """Index of the k-th highest score (k=1 is the argmax).

        Equal scores are ranked in index order, so the result is stable.
        """
        if not 1 <= k <= len(self):
            raise ValueError(f"rank must be in [1, {len(self)}], got {k}")
        order = np.lexsort((np.arange(len(self)), -self.scores))
        return int(order[k - 1])


def _quantize(data: np.ndarray) -> np.ndarray:
    # round-half-up, not banker's rounding: deterministic across platforms
    return np.floor(data * 255.0 + 0.5).astype(np.uint8)


def _read_pnm_token(stream: io.BufferedReader) -> bytes:
    # whitespace-separated tokens; '#' starts a comment running to end of line
    token = b""
    while True:
        ch = stream.read(1)
        if ch == b"":
            if token:
                return token
            raise MalformedFileError("unexpected end of PNM header")
        if ch == b"#":
            while ch not in (b"", b"\n"):
                ch = stream.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def _load_pnm(path: str) -> Image:
    with open(path, "rb") as fh:
        magic = _read_pnm_token(fh)
        if magic not in (b"P5", b"P6"):
            raise MalformedFileError(f"{path}: not a P5/P6 PNM file (magic {magic!r})")
        channels = 3 if magic == b"P6" else 1
        try:
            width = int(_read_pnm_token(fh))
            height = int(_read_pnm_token(fh))
            maxval = int(_read_pnm_token(fh))
        except ValueError as exc:
            raise MalformedFileError(f"{path}: bad PNM header") from exc
        if width < 1 or height < 1:
            raise MalformedFileError(f"{path}: bad PNM dimensions {width}x{height}")
        if maxval != 255:
            raise MalformedFileError(f"{path}: only maxval 255 is supported, got {maxval}")
        payload = fh.read(height * width * channels)
        if len(payload) != height * width * channels:
            raise MalformedFileError(f"{path}: truncated PNM payload")
        raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Image(raw.astype(np.float64) / 255.0)


def _save_pnm(img: Image, path: str) -> None:
    magic = b"P6" if img.channels == 3 else b"P5"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(_quantize(img.data).tobytes())


def _load_png(path: str) -> Image:
    try:
        with PILImage.open(path) as pil:
            if pil.mode not in ("L", "RGB"):
                raise MalformedFileError(
                    f"{path}: only 8-bit gray/RGB PNG is supported, got mode {pil.mode}"
                )
            raw = np.asarray(pil, dtype=np.uint8)
    except MalformedFileError:
        raise
    except Exception as exc:
        raise MalformedFileError(f"{path}: cannot decode PNG ({exc})") from exc
    if raw.ndim == 2:
        raw = raw[:, :, np.newaxis]
    return Image(raw.astype(np.float64) / 255.0)


def _save_png(img: Image, path: str) -> None:
    q = _quantize(img.data)
    if img.channels == 1:
        pil = PILImage.fromarray(q[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(q, mode="RGB")
    pil.save(path, format="PNG")


def _pick_format(path: str, format: str | None) -> str:
    if format is not None:
        if format not in ("ppm", "png"):
            raise ValueError(f"unsupported format {format!r}")
        return format
    ext = os.path.splitext(path)[1].lower()
    if ext in (".ppm", ".pgm", ".pnm"):
        return "ppm"
    if ext == ".png":
        return "png"
    raise ValueError(f"cannot infer format from {path!r}; pass format=")


def load_image(path: str, format: str | None = None) -> Image:
    """Load an 8-bit PPM/PGM or PNG file; intensities are mapped by /255."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if _pick_format(path, format) == "ppm":
        return _load_pnm(path)
    return _load_png(path)


def save_image(img: Image, path: str, format: str | None = None) -> None:
    """Write an image as 8-bit PPM/PGM or PNG, quantizing round-half-up.

    1-channel images requested as "ppm" are written as binary PGM (P5);
    3-channel as PPM (P6), maxval 255.
    """
    if _pick_format(path, format) == "ppm":
        _save_pnm(img, path)
    else:
        _save_png(img, path)
