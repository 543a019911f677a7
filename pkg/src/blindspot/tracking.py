"""Box capture: turn one frame's object vectors into a tracked detection box.

The per-frame pipeline is a fixed chain of gates, cheapest first:

    ratio -> center -> std-dev refinement -> sizing -> containment
          -> movement (recent box) | midfield (no recent box) -> size/position

A rejection is a normal outcome and carries the name of the gate that
fired.  Object counts are recorded in the state on every non-empty frame so
the midfield surge exception can compare against the previous frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .vectors import Classified, VectorClass, object_ratio

RATIO_GATE = "ratio_gate"
CONTAINMENT_GATE = "containment_gate"
MOVEMENT_GATE = "movement_gate"
MIDFIELD_GATE = "midfield_gate"
SIZE_POSITION_GATE = "size_position_gate"


@dataclass(frozen=True)
class Box:
    cx: float
    cy: float
    half_w: float
    half_h: float

    def __post_init__(self):
        if not (self.half_w > 0 and self.half_h > 0):
            raise ValueError("box half-extents must be positive")

    @property
    def side(self) -> float:
        return 2 * max(self.half_w, self.half_h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def bounds(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1), closed."""
        return (self.cx - self.half_w, self.cy - self.half_h, self.cx + self.half_w, self.cy + self.half_h)

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bounds()
        return x0 <= x <= x1 and y0 <= y <= y1

    def clipped(self, width: int, height: int) -> "Box":
        x0, y0, x1, y1 = self.bounds()
        x0, x1 = max(x0, 0.0), min(x1, width - 1.0)
        y0, y1 = max(y0, 0.0), min(y1, height - 1.0)
        hw = max((x1 - x0) / 2, 0.5)
        hh = max((y1 - y0) / 2, 0.5)
        return Box((x0 + x1) / 2, (y0 + y1) / 2, hw, hh)

    def iou(self, other: "Box") -> float:
        ax0, ay0, ax1, ay1 = self.bounds()
        bx0, by0, bx1, by1 = other.bounds()
        iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
        ih = max(0.0, min(ay1, by1) - max(ay0, by0))
        inter = iw * ih
        union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
        return inter / union if union > 0 else 0.0

    def translated(self, dx: float, dy: float) -> "Box":
        return replace(self, cx=self.cx + dx, cy=self.cy + dy)


@dataclass(frozen=True)
class TrackParams:
    ratio_gate: float = 0.1
    containment_fraction: float = 0.5
    stddev_schedule: tuple[float, ...] = (3.0, 2.0, 1.0)
    base_size: float = 40.0
    size_gain: float = 200.0
    ratio_cap: float = 1.0
    max_step: float = 40.0
    step_window: int = 5
    left_region_fraction: float = 1 / 3
    min_credible_size: float = 24.0
    mid_region: tuple[float, float] = (0.3, 0.7)
    surge_factor: float = 3.0
    surge_enabled: bool = True
    mirrored: bool = False
    history_len: int = 16
    stationary_in_ratio: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stddev_schedule", tuple(float(k) for k in self.stddev_schedule))
        object.__setattr__(self, "mid_region", tuple(float(f) for f in self.mid_region))
        if not self.ratio_gate > 0:
            raise ValueError("ratio_gate must be > 0")
        if not 0 < self.containment_fraction <= 1:
            raise ValueError("containment_fraction must lie in (0, 1]")
        sched = self.stddev_schedule
        if any(k <= 0 for k in sched) or any(a <= b for a, b in zip(sched, sched[1:])):
            raise ValueError("stddev_schedule must be positive and strictly decreasing")
        lo, hi = self.mid_region
        if not 0 <= lo < hi <= 1:
            raise ValueError("mid_region must satisfy 0 <= lo < hi <= 1")


@dataclass(frozen=True)
class TrackState:
    last_box: Optional[Box] = None
    last_box_frame: int = -1
    last_object_count: int = 0
    frame_index: int = -1
    history: tuple[tuple[int, Box], ...] = ()


@dataclass(frozen=True)
class TrackVerdict:
    state: TrackState
    box: Optional[Box]
    gate: Optional[str]
    """Name of the rejecting gate, ``None`` when a box was emitted or no samples."""
    ratio: float = 0.0
    object_count: int = 0
    background_count: int = 0
    candidate: Optional[Box] = None
    route: Optional[str] = None
    """``"movement"`` or ``"midfield"``: which history gate judged the candidate."""


# --------------------------------------------------------------------------
# building blocks
# --------------------------------------------------------------------------


def _coords(samples: Sequence) -> np.ndarray:
    return np.array([(s.x, s.y) for s in samples], dtype=np.float64).reshape(-1, 2)


def initial_center(object_samples: Sequence) -> tuple[float, float]:
    """Mean (x, y) of the object vectors."""
    if len(object_samples) == 0:
        raise ValueError("initial_center needs at least one sample")
    c = _coords(object_samples).mean(axis=0)
    return (float(c[0]), float(c[1]))


def stddev_refine(object_samples: Sequence, center, schedule=(3.0, 2.0, 1.0)):
    """Iteratively drop samples farther than k radial std-devs from the center.

    The radial std-dev is the RMS distance of the current inliers from the
    current center.  A pass that would leave fewer than two samples is not
    applied; refinement stops there.
    """
    if len(object_samples) == 0:
        raise ValueError("stddev_refine needs at least one sample")
    inliers = list(object_samples)
    center = (float(center[0]), float(center[1]))
    if len(inliers) < 2:
        return center, inliers
    for k in schedule:
        xy = _coords(inliers)
        dist = np.hypot(xy[:, 0] - center[0], xy[:, 1] - center[1])
        sigma = math.sqrt(float(np.mean(dist**2)))
        keep = dist <= k * sigma
        if keep.sum() < 2:
            break
        inliers = [s for s, kept in zip(inliers, keep) if kept]
        c = xy[keep].mean(axis=0)
        center = (float(c[0]), float(c[1]))
    return center, inliers


def box_size(ratio: float, p: TrackParams) -> tuple[float, float]:
    """Side grows linearly with the object/background ratio, capped."""
    side = p.base_size + p.size_gain * min(ratio, p.ratio_cap)
    return side / 2, side / 2


def containment_check(box: Box, object_samples: Sequence, p: TrackParams = TrackParams()) -> bool:
    if len(object_samples) == 0:
        raise ValueError("containment_check needs at least one sample")
    inside = sum(1 for s in object_samples if box.contains(s.x, s.y))
    # closed threshold: exactly containment_fraction of the samples accepts
    return inside >= p.containment_fraction * len(object_samples) - 1e-12


def movement_gate(state: TrackState, candidate: Box, frame_idx: int, p: TrackParams) -> Optional[bool]:
    """True/False when a recent box exists, ``None`` to defer to the midfield gate."""
    if state.last_box is None:
        return None
    elapsed = frame_idx - state.last_box_frame
    if elapsed <= 0 or elapsed > p.step_window:
        return None
    step = math.hypot(candidate.cx - state.last_box.cx, candidate.cy - state.last_box.cy)
    return step <= p.max_step * elapsed


def size_position_gate(candidate: Box, frame_width: float, p: TrackParams, frame_left: float = 0.0) -> bool:
    """Reject small boxes on the far side of the frame."""
    small = candidate.side < p.min_credible_size
    rel = (candidate.cx - frame_left) / frame_width
    far_side = rel > 1 - p.left_region_fraction if p.mirrored else rel < p.left_region_fraction
    return not (small and far_side)


def midfield_gate(
    state: TrackState,
    candidate: Box,
    object_count: int,
    frame_width: float,
    p: TrackParams,
    frame_left: float = 0.0,
) -> bool:
    """New boxes should appear at the frame sides unless vectors surge (wall reveal)."""
    lo, hi = p.mid_region
    rel = (candidate.cx - frame_left) / frame_width
    if rel < lo or rel > hi:
        return True
    return p.surge_enabled and object_count >= p.surge_factor * state.last_object_count


# --------------------------------------------------------------------------
# per-frame driver
# --------------------------------------------------------------------------


def track_frame(
    state: TrackState,
    samples: Sequence[Classified],
    frame_idx: int,
    p: TrackParams,
    frame_width: float,
    frame_left: float = 0.0,
) -> TrackVerdict:
    if len(samples) == 0:
        return TrackVerdict(replace(state, frame_index=frame_idx), None, RATIO_GATE)

    objects = [c for c in samples if c.label is VectorClass.OBJECT]
    n_obj = len(objects)
    n_bg = sum(1 for c in samples if c.label is VectorClass.BACKGROUND)
    ratio = object_ratio(samples, p.stationary_in_ratio)
    counted = replace(state, frame_index=frame_idx, last_object_count=n_obj)

    def reject(gate, candidate=None, route=None):
        return TrackVerdict(counted, None, gate, ratio, n_obj, n_bg, candidate, route)

    if n_obj == 0 or ratio < p.ratio_gate:
        return reject(RATIO_GATE)

    center = initial_center(objects)
    center, _ = stddev_refine(objects, center, p.stddev_schedule)
    hw, hh = box_size(ratio, p)
    candidate = Box(center[0], center[1], hw, hh)

    if not containment_check(candidate, objects, p):
        return reject(CONTAINMENT_GATE, candidate)

    moved = movement_gate(state, candidate, frame_idx, p)
    if moved is None:
        route = "midfield"
        if not midfield_gate(state, candidate, n_obj, frame_width, p, frame_left):
            return reject(MIDFIELD_GATE, candidate, route)
    else:
        route = "movement"
        if not moved:
            return reject(MOVEMENT_GATE, candidate, route)

    if not size_position_gate(candidate, frame_width, p, frame_left):
        return reject(SIZE_POSITION_GATE, candidate, route)

    history = (counted.history + ((frame_idx, candidate),))[-p.history_len :]
    accepted = replace(counted, last_box=candidate, last_box_frame=frame_idx, history=history)
    return TrackVerdict(accepted, candidate, None, ratio, n_obj, n_bg, candidate, route)
