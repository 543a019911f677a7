"""RGB overlays: flow arrows, the tracked box, circle hits and an alert badge."""

from __future__ import annotations

import math

import numpy as np

from .frames import Frame, encode_ppm
from .stereo import AlertLevel
from .vectors import VectorClass

OBJECT_COLOR = (40, 220, 40)
BACKGROUND_COLOR = (220, 40, 40)
BOX_COLOR = (40, 90, 255)
CIRCLE_COLOR = (255, 220, 0)
ALERT_COLORS = {
    AlertLevel.GREEN: (0, 200, 0),
    AlertLevel.YELLOW: (240, 200, 0),
    AlertLevel.RED: (230, 0, 0),
}
ARROW_SCALE = 3.0
BADGE_SIZE = 10


def _put(img: np.ndarray, xs, ys, color):
    h, w, _ = img.shape
    xs = np.asarray(xs, dtype=int)
    ys = np.asarray(ys, dtype=int)
    ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    img[ys[ok], xs[ok]] = color


def draw_line(img: np.ndarray, x0: float, y0: float, x1: float, y1: float, color) -> None:
    n = int(math.ceil(max(abs(x1 - x0), abs(y1 - y0)))) + 1
    t = np.linspace(0.0, 1.0, n)
    _put(img, np.rint(x0 + t * (x1 - x0)), np.rint(y0 + t * (y1 - y0)), color)


def draw_rect(img: np.ndarray, x0: int, y0: int, x1: int, y1: int, color) -> None:
    xs = np.arange(x0, x1 + 1)
    ys = np.arange(y0, y1 + 1)
    _put(img, xs, np.full_like(xs, y0), color)
    _put(img, xs, np.full_like(xs, y1), color)
    _put(img, np.full_like(ys, x0), ys, color)
    _put(img, np.full_like(ys, x1), ys, color)


def draw_circle(img: np.ndarray, cx: int, cy: int, r: int, color) -> None:
    n = max(16, int(2 * math.pi * r * 2))
    a = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    _put(img, np.rint(cx + r * np.cos(a)), np.rint(cy + r * np.sin(a)), color)


def box_pixels(box, width: int, height: int) -> tuple[int, int, int, int]:
    """Integer outline corners of a box, clipped to the frame."""
    x0, y0, x1, y1 = box.bounds()
    return (
        int(np.clip(round(x0), 0, width - 1)),
        int(np.clip(round(y0), 0, height - 1)),
        int(np.clip(round(x1), 0, width - 1)),
        int(np.clip(round(y1), 0, height - 1)),
    )


def emit_overlay(frame: Frame, record, pure: bool = False, arrow_scale: float = ARROW_SCALE) -> np.ndarray:
    """Annotated ``(h, w, 3)`` uint8 image for one detection record.

    ``pure`` draws the annotations alone on black and leaves out the badge.
    """
    h, w = frame.shape
    if pure:
        img = np.zeros((h, w, 3), dtype=np.uint8)
    else:
        gray = np.rint(frame.pixels * 255).astype(np.uint8)
        img = np.repeat(gray[:, :, None], 3, axis=2)
    for c in record.samples:
        if c.label is VectorClass.STATIONARY:
            continue
        color = OBJECT_COLOR if c.label is VectorClass.OBJECT else BACKGROUND_COLOR
        s = c.sample
        draw_line(img, s.x, s.y, s.x + arrow_scale * s.u, s.y + arrow_scale * s.v, color)
    for k in record.circles:
        draw_circle(img, k.cx, k.cy, k.r, CIRCLE_COLOR)
    if record.box is not None:
        draw_rect(img, *box_pixels(record.box, w, h), BOX_COLOR)
    if not pure:
        img[:BADGE_SIZE, :BADGE_SIZE] = ALERT_COLORS[record.alert]
    return img


def overlay_ppm(frame: Frame, record, pure: bool = False) -> bytes:
    return encode_ppm(emit_overlay(frame, record, pure))
