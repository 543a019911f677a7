"""Focus of expansion, per-column time to collision and the advisory heading.

Image coordinates are measured relative to the focus of expansion (FOE) with
the focal length fixed to 1, so a point at radial offset rho expanding at
rate rho_dot has time to collision rho / rho_dot frames.  No metric depth
enters the computation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParallelFieldError, ShapeMismatchError, TooFewVectorsError
from .flow import FlowField

MIN_FOE_SAMPLES = 8
HEADING_RULES = ("longest", "avoid")


@dataclass(frozen=True)
class TTCParams:
    column_width: int = 16
    max_steer: float = 0.35
    """Largest heading magnitude in radians."""
    magnitude_floor: float = 0.25
    heading_rule: str = "longest"
    """``longest`` steers toward the longest TTC, ``avoid`` away from the shortest."""

    def __post_init__(self):
        if self.heading_rule not in HEADING_RULES:
            raise ValueError(f"heading_rule must be one of {HEADING_RULES}")
        if self.column_width < 1:
            raise ValueError("column_width must be >= 1")
        if not self.max_steer > 0:
            raise ValueError("max_steer must be > 0")


@dataclass(frozen=True)
class FocusOfExpansion:
    x: float
    y: float
    residual: float


@dataclass(frozen=True)
class TTCProfile:
    values: tuple[float, ...]
    """Time to collision per column in frames; ``math.inf`` when nothing expands."""
    column_width: int

    @property
    def n_columns(self) -> int:
        return len(self.values)

    def minimum(self) -> float:
        return min(self.values) if self.values else math.inf

    def in_seconds(self, frame_period: float) -> tuple[float, ...]:
        return tuple(v * frame_period for v in self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["column_index", "ttc_frames"])
        for i, v in enumerate(self.values):
            w.writerow([i, "inf" if math.isinf(v) else repr(float(v))])
        return buf.getvalue()


@dataclass(frozen=True)
class HeadingAngle:
    angle: float
    """Radians; negative steers left, 0 is straight ahead."""
    column: Optional[int] = None


def region_mask(shape, region) -> np.ndarray:
    h, w = shape
    if region is None:
        return np.ones(shape, dtype=bool)
    if isinstance(region, np.ndarray):
        if region.shape != tuple(shape):
            raise ShapeMismatchError(f"region mask {region.shape} vs flow {tuple(shape)}")
        return region.astype(bool)
    x0, y0, x1, y1 = region.bounds()
    ys, xs = np.mgrid[0:h, 0:w]
    return (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)


def foe_from_vectors(x, y, u, v) -> FocusOfExpansion:
    """Least-squares point closest to every line through (x, y) along (u, v)."""
    x, y, u, v = (np.asarray(a, dtype=np.float64).ravel() for a in (x, y, u, v))
    if x.size < MIN_FOE_SAMPLES:
        raise TooFewVectorsError(f"need >= {MIN_FOE_SAMPLES} vectors, got {x.size}")
    mag = np.hypot(u, v)
    nx, ny = -v / mag, u / mag
    a = np.array([[np.sum(nx * nx), np.sum(nx * ny)], [np.sum(nx * ny), np.sum(ny * ny)]])
    proj = nx * x + ny * y
    b = np.array([np.sum(nx * proj), np.sum(ny * proj)])
    eig = np.linalg.eigvalsh(a)
    if eig[0] <= 1e-6 * eig[1]:
        raise ParallelFieldError("flow lines are near-parallel; no finite focus of expansion")
    fx, fy = np.linalg.solve(a, b)
    dist = nx * fx + ny * fy - proj
    return FocusOfExpansion(float(fx), float(fy), float(np.sqrt(np.mean(dist**2))))


def estimate_foe(flow: FlowField, magnitude_floor: float = 0.25, region=None) -> FocusOfExpansion:
    """FOE from every pixel whose flow magnitude reaches ``magnitude_floor``.

    ``region`` restricts the fit: either anything with ``bounds()`` (e.g. a
    tracked Box) or a boolean mask of the flow's shape.
    """
    mag = np.hypot(flow.u, flow.v)
    sel = (mag >= magnitude_floor) & (mag > 0) & region_mask(flow.shape, region)
    ys, xs = np.nonzero(sel)
    return foe_from_vectors(xs, ys, flow.u[sel], flow.v[sel])


def column_ttc(
    flow: FlowField,
    foe: FocusOfExpansion,
    column_width: int = 16,
    region=None,
    magnitude_floor: float = 0.0,
) -> TTCProfile:
    h, w = flow.shape
    n_cols = math.ceil(w / column_width)
    ys, xs = np.mgrid[0:h, 0:w]
    rx = xs - foe.x
    ry = ys - foe.y
    rho = np.hypot(rx, ry)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho_dot = (flow.u * rx + flow.v * ry) / rho
        ttc = rho / rho_dot
    mag = np.hypot(flow.u, flow.v)
    ok = (rho > 0) & (rho_dot > 0) & (mag >= magnitude_floor) & region_mask(flow.shape, region)
    cols = xs // column_width
    values = []
    for c in range(n_cols):
        sel = ok & (cols == c)
        values.append(float(np.median(ttc[sel])) if sel.any() else math.inf)
    return TTCProfile(tuple(values), column_width)


def heading_angle(profile: TTCProfile, max_steer: float = 0.35, rule: str = "longest") -> HeadingAngle:
    """Steer toward the column with the longest time to collision.

    Ties go to the column closest to the centre, then to the leftmost one.
    A profile with no finite value gives 0.  With ``rule="avoid"`` the
    column with the shortest time is found the same way and the heading is
    its mirror image about the centre.
    """
    n = profile.n_columns
    if n == 0:
        raise ValueError("profile has no columns")
    if rule not in HEADING_RULES:
        raise ValueError(f"rule must be one of {HEADING_RULES}")
    vals = profile.values
    if all(math.isinf(v) for v in vals) or n == 1:
        return HeadingAngle(0.0, None)
    mid = (n - 1) / 2
    best = max(vals) if rule == "longest" else min(vals)
    winners = [i for i, v in enumerate(vals) if v == best]
    c = min(winners, key=lambda i: (abs(i - mid), i))
    angle = max_steer * (c - mid) / mid
    if rule == "avoid" and angle:
        angle = -angle
    return HeadingAngle(float(np.clip(angle, -max_steer, max_steer)), c)
