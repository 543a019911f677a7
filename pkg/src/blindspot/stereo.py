"""Depth-map alerting: disparity, background removal, lane bands, blob counts."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeMismatchError
from .frames import DepthFrame, Frame

BACKGROUND = 1.0


class AlertLevel(enum.Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"


@dataclass(frozen=True)
class LaneBands:
    t1: float = 0.35
    t2: float = 0.55
    t3: float = 0.75

    def __post_init__(self):
        if not 0 < self.t1 < self.t2 < self.t3 <= 1:
            raise ValueError("need 0 < t1 < t2 < t3 <= 1")


@dataclass(frozen=True)
class StereoParams:
    max_disparity: int = 16
    block_size: int = 9
    far_cutoff: float = 0.8
    min_blob_area: int = 50
    connectivity: int = 4
    flatness_tol: float = 1e-3
    """Mean absolute difference spread below which a block counts as textureless."""

    def __post_init__(self):
        if self.block_size < 3 or self.block_size % 2 == 0:
            raise ValueError("block_size must be odd and >= 3")
        if not 0 < self.far_cutoff <= 1:
            raise ValueError("far_cutoff must lie in (0, 1]")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.max_disparity < 1:
            raise ValueError("max_disparity must be >= 1")


@dataclass(frozen=True)
class StereoVerdict:
    alert: AlertLevel
    band_counts: tuple[int, int, int]
    """Blob counts in [0, t1), [t1, t2), [t2, t3)."""


def compute_disparity(left: Frame, right: Frame, p: StereoParams = StereoParams()) -> DepthFrame:
    """SAD block matching along rows; left pixel x matches right pixel x - d."""
    if left.shape != right.shape:
        raise ShapeMismatchError(f"stereo pair sizes differ: {left.shape} vs {right.shape}")
    L = left.pixels
    R = right.pixels
    h, w = L.shape
    n_d = p.max_disparity + 1
    cost = np.empty((n_d, h, w))
    for d in range(n_d):
        shifted = np.empty_like(R)
        shifted[:, d:] = R[:, : w - d]
        shifted[:, :d] = R[:, :1]
        cost[d] = ndimage.uniform_filter(np.abs(L - shifted), size=p.block_size, mode="nearest")
    best = np.argmin(cost, axis=0)
    spread = cost.max(axis=0) - cost.min(axis=0)
    proxy = 1.0 - best / p.max_disparity
    proxy[spread < p.flatness_tol] = BACKGROUND
    return DepthFrame(np.clip(proxy, 0.0, 1.0))


def remove_background(depth: DepthFrame, far_cutoff: float) -> DepthFrame:
    vals = np.where(depth.pixels >= far_cutoff, BACKGROUND, depth.pixels)
    return DepthFrame(vals)


def isolate_band(depth: DepthFrame, lo: float, hi: float) -> np.ndarray:
    if lo >= hi:
        raise ValueError("band needs lo < hi")
    return (depth.pixels >= lo) & (depth.pixels < hi)


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    return ndimage.generate_binary_structure(2, 1)


def count_objects(mask: np.ndarray, p: StereoParams = StereoParams()) -> int:
    labels, n = ndimage.label(np.asarray(mask, dtype=bool), structure=_structure(p.connectivity))
    if n == 0:
        return 0
    areas = np.bincount(labels.ravel())[1:]
    return int(np.sum(areas >= p.min_blob_area))


def classify_alert(depth: DepthFrame, bands: LaneBands = LaneBands(), p: StereoParams = StereoParams()) -> StereoVerdict:
    d = remove_background(depth, p.far_cutoff)
    near = count_objects(isolate_band(d, 0.0, bands.t1), p)
    mid = count_objects(isolate_band(d, bands.t1, bands.t2), p)
    far = count_objects(isolate_band(d, bands.t2, bands.t3), p)
    if near >= 1:
        level = AlertLevel.RED
    elif count_objects(isolate_band(d, bands.t1, bands.t3), p) >= 1:
        level = AlertLevel.YELLOW
    else:
        level = AlertLevel.GREEN
    return StereoVerdict(level, (near, mid, far))


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def smooth_depth(depth: DepthFrame, sigma: float) -> DepthFrame:
    """Gaussian blur that ignores background-sentinel pixels (normalized convolution)."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    k = gaussian_kernel(sigma)
    vals = depth.pixels
    weight = (vals < BACKGROUND).astype(np.float64)

    def blur(a):
        a = ndimage.correlate1d(a, k, axis=0, mode="nearest")
        return ndimage.correlate1d(a, k, axis=1, mode="nearest")

    num = blur(vals * weight)
    den = blur(weight)
    out = np.where(weight > 0, num / np.where(den > 0, den, 1.0), BACKGROUND)
    return DepthFrame(np.clip(out, 0.0, 1.0))
