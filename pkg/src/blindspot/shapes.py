"""Wheel detection: Sobel/hysteresis edges and circular Hough voting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import ShapeMismatchError
from .frames import Frame


@dataclass(frozen=True)
class HoughParams:
    r_min: int = 6
    r_max: int = 24
    vote_threshold: Optional[int] = None
    """Fixed vote threshold; ``None`` uses ceil(vote_fraction * 2*pi*r) per radius."""
    vote_fraction: float = 0.6
    nms_radius: float = 8.0
    edge_low: float = 0.1
    edge_high: float = 0.25
    corner_fraction: float = 0.2

    def __post_init__(self):
        if not 0 < self.r_min <= self.r_max:
            raise ValueError("need 0 < r_min <= r_max")
        if self.vote_threshold is not None and self.vote_threshold < 1:
            raise ValueError("vote_threshold must be >= 1")
        if not 0 <= self.edge_low <= self.edge_high:
            raise ValueError("need 0 <= edge_low <= edge_high")

    @property
    def radii(self) -> range:
        return range(self.r_min, self.r_max + 1)

    def threshold(self, r: int) -> int:
        if self.vote_threshold is not None:
            return self.vote_threshold
        return math.ceil(self.vote_fraction * 2 * math.pi * r)


@dataclass(frozen=True, eq=False)
class EdgeMap:
    edges: np.ndarray

    @property
    def width(self) -> int:
        return self.edges.shape[1]

    @property
    def height(self) -> int:
        return self.edges.shape[0]

    @property
    def shape(self):
        return self.edges.shape


@dataclass(frozen=True, eq=False)
class RegionMask:
    allowed: np.ndarray

    @property
    def shape(self):
        return self.allowed.shape

    @classmethod
    def everywhere(cls, width: int, height: int) -> "RegionMask":
        return cls(np.ones((height, width), dtype=bool))


@dataclass(frozen=True, order=True)
class CircleHit:
    cx: int
    cy: int
    r: int
    votes: int


def gradient(frame: Frame) -> tuple[np.ndarray, np.ndarray]:
    """Sobel derivatives scaled so a unit-slope ramp gives 1."""
    img = frame.pixels
    gx = ndimage.sobel(img, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(img, axis=0, mode="nearest") / 8.0
    return gx, gy


def _non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    p = np.pad(mag, 1, mode="constant")
    h, w = mag.shape

    def shifted(dy, dx):
        return p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    # direction sector of the gradient, folded into [0, pi)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.floor((theta + np.pi / 8) / (np.pi / 4)).astype(int) % 4
    keep = np.zeros_like(mag, dtype=bool)
    for s, (dy, dx) in enumerate([(0, 1), (1, 1), (1, 0), (1, -1)]):
        sel = sector == s
        a = shifted(dy, dx)
        b = shifted(-dy, -dx)
        # strict on one side so a two-pixel plateau keeps a single pixel
        keep |= sel & (mag > a) & (mag >= b)
    return keep & (mag > 0)


def detect_edges(frame: Frame, p: HoughParams = HoughParams()) -> EdgeMap:
    gx, gy = gradient(frame)
    mag = np.hypot(gx, gy)
    thin = _non_max_suppression(mag, gx, gy)
    weak = thin & (mag >= p.edge_low)
    strong = thin & (mag >= p.edge_high)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return EdgeMap(np.zeros_like(weak))
    has_strong = np.zeros(n + 1, dtype=bool)
    has_strong[labels[strong]] = True
    has_strong[0] = False
    return EdgeMap(has_strong[labels])


def ring_offsets(r: int) -> np.ndarray:
    """Integer offsets (dy, dx) whose length lies in [r - 1/2, r + 1/2)."""
    span = np.arange(-r - 1, r + 2)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    d4 = 4 * (dx * dx + dy * dy)
    sel = (d4 >= (2 * r - 1) ** 2) & (d4 < (2 * r + 1) ** 2)
    return np.stack([dy[sel], dx[sel]], axis=1)


def circle_accumulator(edges: EdgeMap, radii: Sequence[int]) -> np.ndarray:
    """Vote counts with shape (len(radii), height, width)."""
    h, w = edges.shape
    ys, xs = np.nonzero(edges.edges)
    acc = np.zeros((len(radii), h, w), dtype=np.int64)
    if ys.size == 0:
        return acc
    for i, r in enumerate(radii):
        off = ring_offsets(r)
        cy = ys[:, None] + off[None, :, 0]
        cx = xs[:, None] + off[None, :, 1]
        ok = (cy >= 0) & (cy < h) & (cx >= 0) & (cx < w)
        flat = (cy[ok] * w + cx[ok]).ravel()
        acc[i] = np.bincount(flat, minlength=h * w).reshape(h, w)
    return acc


def hough_circles(edges: EdgeMap, p: HoughParams = HoughParams(), mask: Optional[RegionMask] = None) -> list[CircleHit]:
    h, w = edges.shape
    if mask is None:
        mask = RegionMask.everywhere(w, h)
    if mask.shape != edges.shape:
        raise ShapeMismatchError(f"mask {mask.shape} vs edges {edges.shape}")
    radii = list(p.radii)
    acc = circle_accumulator(edges, radii)
    cand = []
    for i, r in enumerate(radii):
        plane = np.where(mask.allowed, acc[i], 0)
        ys, xs = np.nonzero(plane >= p.threshold(r))
        cand.extend((int(plane[y, x]), int(y), int(x), r) for y, x in zip(ys, xs))
    # strongest first; ties resolved by (cy, cx, r) ascending
    cand.sort(key=lambda c: (-c[0], c[1], c[2], c[3]))
    hits: list[CircleHit] = []
    r2 = p.nms_radius**2
    for votes, cy, cx, r in cand:
        # suppression spans every radius: a drawn ring's inner and outer
        # edges are concentric and must count as one wheel
        if any((cx - k.cx) ** 2 + (cy - k.cy) ** 2 <= r2 for k in hits):
            continue
        hits.append(CircleHit(cx, cy, r, votes))
    return hits


def default_region_mask(width: int, height: int, corner_fraction: float = 0.2) -> RegionMask:
    if not 0 <= corner_fraction < 0.5:
        raise ValueError("corner_fraction must lie in [0, 0.5)")
    side = corner_fraction * min(width, height)
    ys, xs = np.mgrid[0:height, 0:width]
    near_x = (xs < side) | (xs >= width - side)
    near_y = (ys < side) | (ys >= height - side)
    return RegionMask(~(near_x & near_y))


def static_object_alert(hits: Sequence[CircleHit]) -> bool:
    """Two or more circles mean a wheeled object is present."""
    return len(hits) >= 2


def hits_to_csv(hits: Sequence[CircleHit]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["cx", "cy", "r", "votes"])
    for k in hits:
        wr.writerow([k.cx, k.cy, k.r, k.votes])
    return buf.getvalue()
