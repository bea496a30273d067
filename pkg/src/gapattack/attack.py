"""Greedy targeted black-box perturbation.

One attack round costs 1 + 2*len(candidates) oracle queries: a baseline
classification of the current image, then a +noise and a -noise probe per
candidate pixel. Candidates are the highest-local-contrast pixels (top P
per channel of the windowed standard-deviation map, recomputed each
round); the V pixels whose probes promise the best gap improvement —
weighted by that contrast, so changes hide in busy areas — are perturbed,
and the perceptual cost of the applied changes accumulates into a running
distance. The loop stops when the distance budget is exhausted or the
round cap is hit; it never stops early just because the target class has
taken over, so traces show how the attack consolidates past the flip.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from .errors import DegenerateImageError, ShapeMismatchError
from .image import Image, PixelCoord, ProbVector
from .oracle import Oracle


class Region(NamedTuple):
    """Window the attack works inside: top-left corner + extent."""

    row0: int
    col0: int
    height: int
    width: int


@dataclasses.dataclass(frozen=True)
class AttackParams:
    """Knobs of the greedy loop.

    max_distance         perceptual budget; the loop ends once the
                         accumulated distance reaches it (required)
    candidates_per_channel   pixels probed per channel each round
    pixels_per_round     pixels actually perturbed each round (pooled
                         across channels)
    noise_magnitude      intensity step per perturbation; None means 10%
                         of the input image's maximum intensity, resolved
                         once at the start of the run
    target_rank          attack toward the class holding this rank in the
                         initial classification (2 = runner-up)
    target_class         explicit class index; overrides target_rank
    region_height/width  restrict the attack to a centered window; None
                         means the whole image
    max_iterations       hard cap on rounds
    sd_floor             pixels with local contrast below this are never
                         candidates, and distance denominators are clamped
                         to it
    snapshot_every       keep an image snapshot in the trace every k
                         rounds (0 = off)
    """

    max_distance: float
    candidates_per_channel: int = 100
    pixels_per_round: int = 20
    noise_magnitude: float | None = None
    target_rank: int | None = 2
    target_class: int | None = None
    region_height: int | None = None
    region_width: int | None = None
    max_iterations: int = 100
    sd_floor: float = 1e-6
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.max_distance > 0:
            raise ValueError(f"max_distance must be positive, got {self.max_distance}")
        if self.candidates_per_channel < 1:
            raise ValueError("candidates_per_channel must be >= 1")
        if not 0 < self.pixels_per_round <= 3 * self.candidates_per_channel:
            raise ValueError(
                f"pixels_per_round must be in (0, 3*candidates_per_channel], "
                f"got {self.pixels_per_round}"
            )
        if self.noise_magnitude is not None and not self.noise_magnitude > 0:
            raise ValueError(f"noise_magnitude must be positive, got {self.noise_magnitude}")
        if self.target_class is None:
            if self.target_rank is None or self.target_rank < 1:
                raise ValueError("need target_rank >= 1 or an explicit target_class")
        elif self.target_class < 0:
            raise ValueError(f"target_class must be >= 0, got {self.target_class}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not self.sd_floor > 0:
            raise ValueError(f"sd_floor must be positive, got {self.sd_floor}")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")
        for name in ("region_height", "region_width"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")


@dataclasses.dataclass(frozen=True)
class SdMap:
    """Per-pixel, per-channel windowed standard deviation.

    For pixel x_ij in its channel's window: mu is the window mean and
    sd(x_ij) = sqrt((sum_kl (x_kl - mu)^2 - (x_ij - mu)^2) / (window area))
    — the pixel's own squared deviation is excluded from the numerator.
    values is zero outside the window.
    """

    values: np.ndarray
    region: Region

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


@dataclasses.dataclass(frozen=True)
class GapProbe:
    """Both probe outcomes for one candidate pixel.

    priority is (best probed gap - baseline gap) * sd at the pixel; sign
    records which direction won, subtract on ties.
    """

    pixel: PixelCoord
    gap_plus: float
    gap_minus: float
    baseline_gap: float
    priority: float
    sign: str  # "add" | "subtract"


@dataclasses.dataclass(frozen=True)
class TraceRow:
    """State of the attacked image after `iteration` completed rounds."""

    iteration: int
    gap: float
    distance: float
    predicted_class: int
    target_prob: float
    max_other_prob: float
    queries: int
    probs: ProbVector
    snapshot: Image | None = None


@dataclasses.dataclass(frozen=True)
class AttackTrace:
    rows: tuple[TraceRow, ...]
    first_misclassification_iteration: int | None
    final_image: Image
    misclassified_image: Image | None
    termination: str  # d_max_reached | max_iterations | target_reached_and_d_max
    target: int
    total_queries: int
    final_distance: float
    noise_magnitude: float
    distance_sd: str

    @property
    def iterations(self) -> int:
        return len(self.rows)


def _resolve_region(img: Image, params: AttackParams) -> Region:
    height = params.region_height or img.height
    width = params.region_width or img.width
    if height > img.height or width > img.width:
        raise ShapeMismatchError(
            f"region {height}x{width} exceeds image {img.height}x{img.width}"
        )
    return Region((img.height - height) // 2, (img.width - width) // 2, height, width)


def compute_sd_map(img: Image, region: Region | None = None) -> SdMap:
    """Windowed standard-deviation map (see SdMap for the formula)."""
    if region is None:
        region = Region(0, 0, img.height, img.width)
    if (
        region.row0 < 0
        or region.col0 < 0
        or region.row0 + region.height > img.height
        or region.col0 + region.width > img.width
        or region.height < 1
        or region.width < 1
    ):
        raise ShapeMismatchError(f"region {region} does not fit image {img.shape}")

    values = np.zeros_like(img.data)
    area = region.height * region.width
    window = img.data[
        region.row0 : region.row0 + region.height,
        region.col0 : region.col0 + region.width,
    ]
    mu = window.mean(axis=(0, 1), keepdims=True)
    deviations_sq = np.square(window - mu)
    total = deviations_sq.sum(axis=(0, 1), keepdims=True)
    # exclude each pixel's own deviation; clamp the tiny negatives fp leaves
    numerator = np.maximum(total - deviations_sq, 0.0)
    values[
        region.row0 : region.row0 + region.height,
        region.col0 : region.col0 + region.width,
    ] = np.sqrt(numerator / area)
    return SdMap(values, region)


def select_candidates(sd: SdMap, per_channel: int, sd_floor: float = 0.0) -> list[PixelCoord]:
    """Top `per_channel` pixels by sd, independently per channel.

    Pixels with sd below sd_floor are excluded entirely; ties go to
    row-major coordinate order. The result is ordered (channel, row, col)
    and may hold fewer than per_channel entries per channel when the floor
    bites.
    """
    region = sd.region
    if per_channel > region.height * region.width:
        raise ValueError(
            f"cannot pick {per_channel} pixels from a {region.height}x{region.width} window"
        )
    out: list[PixelCoord] = []
    window = sd.values[
        region.row0 : region.row0 + region.height,
        region.col0 : region.col0 + region.width,
    ]
    for channel in range(window.shape[2]):
        flat = window[:, :, channel].ravel()
        keep = np.flatnonzero(flat >= sd_floor) if sd_floor > 0 else np.arange(flat.size)
        if keep.size == 0:
            continue
        # stable sort on negated sd: equal values stay in row-major order
        order = keep[np.argsort(-flat[keep], kind="stable")][:per_channel]
        for idx in np.sort(order):
            out.append(
                PixelCoord(
                    region.row0 + int(idx) // region.width,
                    region.col0 + int(idx) % region.width,
                    channel,
                )
            )
    return out


def gap(probs: ProbVector, target: int) -> float:
    """Target's score minus the best score among all other classes.

    Positive means the oracle currently predicts the target.
    """
    if not 0 <= target < len(probs):
        raise ValueError(f"target {target} out of range for {len(probs)} classes")
    scores = probs.scores
    others = np.delete(scores, target)
    return float(scores[target]) - float(others.max())


def _probe_one(oracle, img, pixel, delta, target, sd_value, baseline_gap):
    base_value = float(img.data[pixel])
    gap_plus = gap(oracle.classify(img.with_pixel(pixel, base_value + delta)), target)
    gap_minus = gap(oracle.classify(img.with_pixel(pixel, base_value - delta)), target)
    if gap_minus >= gap_plus:
        best, sign = gap_minus, "subtract"
    else:
        best, sign = gap_plus, "add"
    return GapProbe(
        pixel=pixel,
        gap_plus=gap_plus,
        gap_minus=gap_minus,
        baseline_gap=baseline_gap,
        priority=(best - baseline_gap) * sd_value,
        sign=sign,
    )


def _probe_all(oracle, img, candidates, delta, target, sd, baseline_gap, jobs=1):
    args = [
        (oracle, img, pixel, delta, target, float(sd.values[pixel]), baseline_gap)
        for pixel in candidates
    ]
    if jobs > 1 and oracle.concurrency_safe:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda a: _probe_one(*a), args))
    return [_probe_one(*a) for a in args]


def probe_gaps(
    oracle: Oracle,
    img: Image,
    candidates,
    delta: float,
    target: int,
    sd: SdMap,
) -> list[GapProbe]:
    """Probe every candidate pixel with +delta and -delta (one query each,
    on clipped single-pixel copies; img is never mutated) against a fresh
    baseline classification of img."""
    baseline_gap = gap(oracle.classify(img), target)
    return _probe_all(oracle, img, list(candidates), delta, target, sd, baseline_gap)


def apply_top_v(
    img: Image, probes, count: int, delta: float
) -> tuple[Image, list[tuple[PixelCoord, float]]]:
    """Perturb the `count` highest-priority probed pixels, channels pooled.

    Ties break by row-major coordinate, then channel. Each pixel moves by
    +-delta per its probe's sign and is clipped to [0,1]; returns the new
    image and the per-pixel deltas that actually landed after clipping.
    """
    if count > len(probes):
        raise ValueError(f"asked for {count} pixels but only {len(probes)} probes")
    ranked = sorted(
        probes,
        key=lambda p: (-p.priority, p.pixel.row, p.pixel.col, p.pixel.channel),
    )
    arr = img.data.copy()
    applied: list[tuple[PixelCoord, float]] = []
    for probe in ranked[:count]:
        step = -delta if probe.sign == "subtract" else delta
        before = arr[probe.pixel]
        after = min(1.0, max(0.0, before + step))
        arr[probe.pixel] = after
        applied.append((probe.pixel, float(after - before)))
    return Image._trusted(arr), applied


def distance(
    original: Image, adversarial: Image, sd_of_original: SdMap, sd_floor: float
) -> float:
    """Perceptual distance: sum over pixels/channels of
    |adversarial - original| / max(sd, sd_floor)."""
    if original.shape != adversarial.shape:
        raise ShapeMismatchError(
            f"shapes differ: {original.shape} vs {adversarial.shape}"
        )
    denom = np.maximum(sd_of_original.values, sd_floor)
    return float(np.sum(np.abs(adversarial.data - original.data) / denom))


def resolve_target(initial: ProbVector, params: AttackParams) -> int:
    if params.target_class is not None:
        if params.target_class >= len(initial):
            raise ValueError(
                f"target_class {params.target_class} out of range for {len(initial)} classes"
            )
        return params.target_class
    if params.target_rank > len(initial):
        raise ValueError(
            f"target_rank {params.target_rank} out of range for {len(initial)} classes"
        )
    return initial.rank(params.target_rank)


def run_attack(
    oracle: Oracle,
    img: Image,
    params: AttackParams,
    distance_sd: str = "original",
    jobs: int = 1,
) -> AttackTrace:
    """Run the greedy loop; see the module docstring for the round shape.

    distance_sd picks the distance denominator: "original" freezes the
    input image's sd map (distance is then a strict accumulator against
    the starting point), "current" uses each round's recomputed map.
    Trace row k describes the image after k completed rounds; the final
    perturbed image is never classified, so it has no row.
    """
    if distance_sd not in ("original", "current"):
        raise ValueError(f"distance_sd must be 'original' or 'current', got {distance_sd}")
    region = _resolve_region(img, params)
    if params.candidates_per_channel > region.height * region.width:
        raise ValueError(
            f"candidates_per_channel={params.candidates_per_channel} exceeds the "
            f"{region.height}x{region.width} attack window"
        )

    delta = params.noise_magnitude
    if delta is None:
        delta = 0.1 * float(img.data.max())
    sd_original = compute_sd_map(img, region)

    current = img
    dist = 0.0
    rows: list[TraceRow] = []
    first_mis: int | None = None
    mis_image: Image | None = None
    target: int | None = params.target_class
    queries_at_start = oracle.query_count

    while dist < params.max_distance and len(rows) < params.max_iterations:
        iteration = len(rows)
        probs = oracle.classify(current)
        if iteration == 0:
            target = resolve_target(probs, params)
        predicted = probs.argmax()
        target_prob = float(probs.scores[target])
        others = np.delete(probs.scores, target)
        snapshot = None
        if params.snapshot_every and iteration and iteration % params.snapshot_every == 0:
            snapshot = current
        rows.append(
            TraceRow(
                iteration=iteration,
                gap=gap(probs, target),
                distance=dist,
                predicted_class=predicted,
                target_prob=target_prob,
                max_other_prob=float(others.max()),
                queries=oracle.query_count - queries_at_start,
                probs=probs,
                snapshot=snapshot,
            )
        )
        if predicted == target and first_mis is None:
            first_mis = iteration
            mis_image = current

        sd_current = compute_sd_map(current, region)
        candidates = select_candidates(
            sd_current, params.candidates_per_channel, params.sd_floor
        )
        if not candidates:
            raise DegenerateImageError(
                f"no pixel in the {region.height}x{region.width} window has local "
                f"contrast above sd_floor={params.sd_floor}; nothing to perturb"
            )
        probes = _probe_all(
            oracle, current, candidates, delta, target, sd_current,
            baseline_gap=gap(probs, target), jobs=jobs,
        )
        current, applied = apply_top_v(
            current, probes, min(params.pixels_per_round, len(probes)), delta
        )
        denom_map = sd_original if distance_sd == "original" else sd_current
        for pixel, signed_delta in applied:
            denom = max(float(denom_map.values[pixel]), params.sd_floor)
            dist += abs(signed_delta) / denom

    if dist >= params.max_distance:
        termination = "target_reached_and_d_max" if first_mis is not None else "d_max_reached"
    else:
        termination = "max_iterations"
    return AttackTrace(
        rows=tuple(rows),
        first_misclassification_iteration=first_mis,
        final_image=current,
        misclassified_image=mis_image,
        termination=termination,
        target=target if target is not None else -1,
        total_queries=oracle.query_count - queries_at_start,
        final_distance=dist,
        noise_magnitude=delta,
        distance_sd=distance_sd,
    )


CSV_HEADER = "iteration,gap,distance,predicted_class,target_prob,max_other_prob,queries"


def trace_to_csv(trace: AttackTrace) -> str:
    """One row per iteration; floats as their shortest exact form."""
    lines = [CSV_HEADER]
    for row in trace.rows:
        lines.append(
            f"{row.iteration},{row.gap!r},{row.distance!r},{row.predicted_class},"
            f"{row.target_prob!r},{row.max_other_prob!r},{row.queries}"
        )
    return "\n".join(lines) + "\n"


def trace_summary(trace: AttackTrace, params: AttackParams) -> dict:
    """JSON-ready run summary: parameter echo plus outcomes."""
    return {
        "params": {
            "max_distance": params.max_distance,
            "candidates_per_channel": params.candidates_per_channel,
            "pixels_per_round": params.pixels_per_round,
            "noise_magnitude": trace.noise_magnitude,
            "target_rank": params.target_rank,
            "target_class": params.target_class,
            "region_height": params.region_height,
            "region_width": params.region_width,
            "max_iterations": params.max_iterations,
            "sd_floor": params.sd_floor,
            "snapshot_every": params.snapshot_every,
            "distance_sd": trace.distance_sd,
        },
        "target": trace.target,
        "termination": trace.termination,
        "iterations": trace.iterations,
        "first_misclassification_iteration": trace.first_misclassification_iteration,
        "final_distance": trace.final_distance,
        "total_queries": trace.total_queries,
    }
