"""Flow-vector sampling, object/background labelling and the rose histogram."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .flow import FlowField

SATURATED = math.inf
"""Object ratio reported when object vectors exist but no background ones."""


class VectorClass(enum.Enum):
    OBJECT = "object"
    BACKGROUND = "background"
    STATIONARY = "stationary"


@dataclass(frozen=True)
class FlowVectorSample:
    x: float
    y: float
    u: float
    v: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.u, self.v)

    @property
    def angle(self) -> float:
        """Direction in (-pi, pi]; 0 points along +x."""
        return math.atan2(self.v, self.u)


@dataclass(frozen=True)
class ClassifyParams:
    magnitude_threshold: float = 0.25
    object_heading: float = 0.0
    angle_window: float = math.pi / 4
    grid_stride: int = 8

    def __post_init__(self):
        if self.magnitude_threshold < 0:
            raise ValueError("magnitude_threshold must be >= 0")
        if not 0 < self.angle_window <= math.pi:
            raise ValueError("angle_window must lie in (0, pi]")
        if self.grid_stride < 1:
            raise ValueError("grid_stride must be >= 1")

    def mirrored(self) -> "ClassifyParams":
        """Parameters for the opposite-side mirror (objects approach leftward)."""
        heading = wrap_angle(self.object_heading + math.pi)
        return ClassifyParams(self.magnitude_threshold, heading, self.angle_window, self.grid_stride)


@dataclass(frozen=True)
class Classified:
    sample: FlowVectorSample
    label: VectorClass

    # convenience pass-throughs used all over the tracker
    @property
    def x(self) -> float:
        return self.sample.x

    @property
    def y(self) -> float:
        return self.sample.y


@dataclass(frozen=True)
class RoseHistogram:
    n_bins: int
    object_counts: tuple[int, ...]
    background_counts: tuple[int, ...]

    @property
    def bin_width(self) -> float:
        return 2 * math.pi / self.n_bins

    def bin_starts(self) -> list[float]:
        return [-math.pi + i * self.bin_width for i in range(self.n_bins)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_start_rad", "object_count", "background_count"])
        for start, o, b in zip(self.bin_starts(), self.object_counts, self.background_counts):
            w.writerow([f"{start:.6f}", o, b])
        return buf.getvalue()


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


def sample_vectors(flow: FlowField, stride: int) -> list[FlowVectorSample]:
    if stride < 1 or stride > min(flow.width, flow.height):
        raise ValueError(f"stride {stride} out of range for {flow.width}x{flow.height} field")
    samples = []
    for y in range(0, flow.height, stride):
        for x in range(0, flow.width, stride):
            samples.append(FlowVectorSample(float(x), float(y), float(flow.u[y, x]), float(flow.v[y, x])))
    return samples


def classify(sample: FlowVectorSample, p: ClassifyParams) -> VectorClass:
    if sample.magnitude < p.magnitude_threshold:
        return VectorClass.STATIONARY
    if abs(wrap_angle(sample.angle - p.object_heading)) <= p.angle_window / 2:
        return VectorClass.OBJECT
    return VectorClass.BACKGROUND


def object_mask(flow: FlowField, p: ClassifyParams) -> np.ndarray:
    """Per-pixel version of :func:`classify`: True where the flow is an object vector."""
    mag = np.hypot(flow.u, flow.v)
    ang = np.arctan2(flow.v, flow.u)
    off = np.angle(np.exp(1j * (ang - p.object_heading)))
    return (mag >= p.magnitude_threshold) & (np.abs(off) <= p.angle_window / 2)


def classify_samples(samples: Iterable[FlowVectorSample], p: ClassifyParams) -> list[Classified]:
    return [Classified(s, classify(s, p)) for s in samples]


def rose_bin(angle: float, n_bins: int) -> int:
    # bin i covers (-pi + i*w, -pi + (i+1)*w]
    w = 2 * math.pi / n_bins
    i = math.ceil((angle + math.pi) / w) - 1
    return min(max(i, 0), n_bins - 1)


def rose_histogram(samples: Sequence[Classified], n_bins: int = 24) -> RoseHistogram:
    if n_bins < 4:
        raise ValueError("n_bins must be >= 4")
    obj = [0] * n_bins
    bg = [0] * n_bins
    for c in samples:
        if c.label is VectorClass.OBJECT:
            obj[rose_bin(c.sample.angle, n_bins)] += 1
        elif c.label is VectorClass.BACKGROUND:
            bg[rose_bin(c.sample.angle, n_bins)] += 1
    return RoseHistogram(n_bins, tuple(obj), tuple(bg))


def count_labels(samples: Sequence[Classified]) -> tuple[int, int]:
    """(object count, background count)."""
    n_obj = sum(1 for c in samples if c.label is VectorClass.OBJECT)
    n_bg = sum(1 for c in samples if c.label is VectorClass.BACKGROUND)
    return n_obj, n_bg


def object_ratio(samples: Sequence[Classified], include_stationary: bool = False) -> float:
    """Object over background count; ``include_stationary`` adds Stationary to the denominator."""
    n_obj, n_bg = count_labels(samples)
    if include_stationary:
        n_bg += sum(1 for c in samples if c.label is VectorClass.STATIONARY)
    if n_bg == 0:
        return SATURATED if n_obj > 0 else 0.0
    return n_obj / n_bg


def sample_arrays(samples: Sequence[Classified]) -> dict[str, np.ndarray]:
    """Column arrays (x, y, u, v, label) for plotting and overlays."""
    return {
        "x": np.array([c.sample.x for c in samples]),
        "y": np.array([c.sample.y for c in samples]),
        "u": np.array([c.sample.u for c in samples]),
        "v": np.array([c.sample.v for c in samples]),
        "label": np.array([c.label.value for c in samples]),
    }
