"""Affine image transforms: rotation, shift, zoom.

Rotation and zoom resample with bilinear interpolation around the image
center ((H-1)/2, (W-1)/2) and fill uncovered regions with zero; shift
moves whole pixels. Identity parameters (angle 0, shift (0,0), factor 1)
return the input pixels bit-exactly, and square images rotated by
multiples of 90 degrees take an exact grid path instead of trigonometry.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .image import Image


@dataclasses.dataclass(frozen=True)
class AffineSpec:
    """One transform request; only the fields of its kind are meaningful.

    kind            "rotate" | "shift" | "zoom"
    angle_degrees   rotation; positive is counter-clockwise
    dx, dy          shift in pixels: dx right, dy down
    factor          zoom; > 1 magnifies, < 1 shrinks
    """

    kind: str
    angle_degrees: float = 0.0
    dx: int = 0
    dy: int = 0
    factor: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rotate", "shift", "zoom"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.factor <= 0:
            raise ValueError(f"zoom factor must be positive, got {self.factor}")

    def label(self) -> str:
        """Filename-friendly tag, e.g. rotate+30deg, shift+2x-1y, zoom1.5x."""
        if self.kind == "rotate":
            return f"rotate{self.angle_degrees:+g}deg"
        if self.kind == "shift":
            return f"shift{self.dx:+d}x{self.dy:+d}y"
        return f"zoom{self.factor:g}x"


def parse_spec(text: str) -> AffineSpec:
    """Parse "rotate:30", "shift:2,-1" (dx,dy), or "zoom:1.5"."""
    kind, sep, arg = text.partition(":")
    kind = kind.strip().lower()
    if not sep or not arg.strip():
        raise ValueError(f"transform spec needs an argument: {text!r}")
    try:
        if kind == "rotate":
            return AffineSpec("rotate", angle_degrees=float(arg))
        if kind == "shift":
            dx, dy = arg.split(",")
            return AffineSpec("shift", dx=int(dx), dy=int(dy))
        if kind == "zoom":
            return AffineSpec("zoom", factor=float(arg))
    except ValueError as exc:
        if "factor" in str(exc):
            raise
        raise ValueError(f"bad transform argument in {text!r}") from exc
    raise ValueError(f"unknown transform kind {kind!r}")


def _bilinear_sample(data: np.ndarray, src_r: np.ndarray, src_c: np.ndarray) -> np.ndarray:
    """Sample data at fractional (src_r, src_c) grids; outside -> 0."""
    h, w, channels = data.shape
    r0 = np.floor(src_r).astype(np.int64)
    c0 = np.floor(src_c).astype(np.int64)
    fr = src_r - r0
    fc = src_c - c0

    out = np.zeros(src_r.shape + (channels,), dtype=np.float64)
    for dr in (0, 1):
        for dc in (0, 1):
            rr = r0 + dr
            cc = c0 + dc
            weight = (fr if dr else 1.0 - fr) * (fc if dc else 1.0 - fc)
            inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            if not inside.any():
                continue
            contrib = np.zeros(src_r.shape + (channels,), dtype=np.float64)
            contrib[inside] = data[rr[inside], cc[inside]]
            out += weight[..., np.newaxis] * contrib
    return out


def rotate(img: Image, angle_degrees: float) -> Image:
    """Rotate about the image center; positive angle is counter-clockwise.

    Square images at exact multiples of 90 degrees are remapped on the
    grid (no interpolation error); everything else is bilinear with zero
    fill outside the original frame.
    """
    turns = angle_degrees / 90.0
    if turns == int(turns):
        k = int(turns) % 4
        if k == 0:
            return Image._trusted(img.data.copy())
        if img.height == img.width:
            return Image._trusted(np.ascontiguousarray(np.rot90(img.data, k)))

    h, w = img.height, img.width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(angle_degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    # inverse map: rotate each output coordinate back to its source. x
    # grows right and y grows down, so on-screen CCW is CW in (row, col).
    x_out = cols - cx
    y_out = rows - cy
    src_c = x_out * cos_t - y_out * sin_t + cx
    src_r = x_out * sin_t + y_out * cos_t + cy
    return Image(np.clip(_bilinear_sample(img.data, src_r, src_c), 0.0, 1.0))


def shift(img: Image, dx: int, dy: int) -> Image:
    """Translate by whole pixels (dx right, dy down); vacated pixels are 0.

    out[r, c] = in[r - dy, c - dx]. |dx| and |dy| must be smaller than the
    image extent on their axis — a larger shift would blank the frame.
    """
    dx, dy = int(dx), int(dy)
    h, w = img.height, img.width
    if abs(dx) >= w or abs(dy) >= h:
        raise ValueError(f"shift ({dx}, {dy}) moves every pixel outside {h}x{w}")
    if dx == 0 and dy == 0:
        return Image._trusted(img.data.copy())

    out = np.zeros_like(img.data)
    out[max(0, dy) : min(h, h + dy), max(0, dx) : min(w, w + dx)] = img.data[
        max(0, -dy) : min(h, h - dy), max(0, -dx) : min(w, w - dx)
    ]
    return Image._trusted(out)


def zoom(img: Image, factor: float) -> Image:
    """Scale about the center; factor > 1 magnifies (edges crop away),
    factor < 1 shrinks (a zero border appears). Output keeps the input size."""
    if factor <= 0:
        raise ValueError(f"zoom factor must be positive, got {factor}")
    if factor == 1.0:
        return Image._trusted(img.data.copy())

    h, w = img.height, img.width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    src_r = cy + (rows - cy) / factor
    src_c = cx + (cols - cx) / factor
    return Image(np.clip(_bilinear_sample(img.data, src_r, src_c), 0.0, 1.0))


def apply_spec(img: Image, spec: AffineSpec) -> Image:
    if spec.kind == "rotate":
        return rotate(img, spec.angle_degrees)
    if spec.kind == "shift":
        return shift(img, spec.dx, spec.dy)
    return zoom(img, spec.factor)
