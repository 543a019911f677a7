"""Per-frame orchestration of the flow, shape, stereo and TTC paths."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .config import PipelineConfig
from .errors import DegenerateInputError, SequenceError, ShapeMismatchError
from .flow import FlowField, solve_horn_schunck
from .frames import DepthFrame, FrameSequence
from .shapes import CircleHit, default_region_mask, detect_edges, hough_circles, static_object_alert
from .stereo import AlertLevel, classify_alert
from .tracking import Box, TrackState, track_frame
from .ttc import column_ttc, estimate_foe, heading_angle, region_mask
from .vectors import Classified, classify_samples, object_mask, sample_vectors


@dataclass(frozen=True)
class DetectionRecord:
    frame_index: int
    box: Optional[Box] = None
    gate: Optional[str] = None
    ratio: float = 0.0
    object_count: int = 0
    background_count: int = 0
    circles: tuple[CircleHit, ...] = ()
    shape_ran: bool = False
    stereo_alert: Optional[AlertLevel] = None
    band_counts: Optional[tuple[int, int, int]] = None
    ttc_min: Optional[float] = None
    """Frames; ``None`` when TTC was not computed."""
    heading: Optional[float] = None
    alert: AlertLevel = AlertLevel.GREEN
    elapsed: float = 0.0
    samples: tuple[Classified, ...] = field(default=(), compare=False, repr=False)
    """Classified flow samples, kept for overlays; not serialized."""

    def to_dict(self, canonical: bool = False) -> dict:
        d = {
            "frame_index": self.frame_index,
            "box": None if self.box is None else [_r(self.box.cx), _r(self.box.cy), _r(self.box.half_w), _r(self.box.half_h)],
            "gate": self.gate,
            "ratio": _num(self.ratio),
            "object_count": self.object_count,
            "background_count": self.background_count,
            "circles": [[c.cx, c.cy, c.r, c.votes] for c in self.circles],
            "shape_ran": self.shape_ran,
            "stereo_alert": None if self.stereo_alert is None else self.stereo_alert.value,
            "band_counts": None if self.band_counts is None else list(self.band_counts),
            "ttc_min": _num(self.ttc_min),
            "heading": _num(self.heading),
            "alert": self.alert.value,
        }
        if not canonical:
            d["elapsed"] = round(self.elapsed, 6)
        return d

    def to_json(self, canonical: bool = False) -> str:
        return json.dumps(self.to_dict(canonical), sort_keys=False)


def _r(x: float) -> float:
    return round(float(x), 6)


def _num(x):
    # JSON has no infinity; keep it readable instead of emitting null
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return _r(x)


def _denum(x):
    if x in ("inf", "-inf"):
        return float(x)
    return x


def record_from_dict(d: dict) -> DetectionRecord:
    box = None if d["box"] is None else Box(*d["box"])
    return DetectionRecord(
        frame_index=d["frame_index"],
        box=box,
        gate=d["gate"],
        ratio=_denum(d["ratio"]),
        object_count=d["object_count"],
        background_count=d["background_count"],
        circles=tuple(CircleHit(*c) for c in d["circles"]),
        shape_ran=d["shape_ran"],
        stereo_alert=None if d["stereo_alert"] is None else AlertLevel(d["stereo_alert"]),
        band_counts=None if d["band_counts"] is None else tuple(d["band_counts"]),
        ttc_min=_denum(d["ttc_min"]),
        heading=d["heading"],
        alert=AlertLevel(d["alert"]),
        elapsed=d.get("elapsed", 0.0),
    )


def fuse(box: Optional[Box], circles: Sequence[CircleHit], stereo_alert: Optional[AlertLevel]) -> AlertLevel:
    """Stereo wins when it ran (it alone knows distance); otherwise presence means Red."""
    if stereo_alert is not None:
        return stereo_alert
    if box is not None or static_object_alert(circles):
        return AlertLevel.RED
    return AlertLevel.GREEN


def fused_alert(record: DetectionRecord) -> AlertLevel:
    return fuse(record.box, record.circles, record.stereo_alert)


@dataclass(frozen=True)
class RunReport:
    frames_total: int
    frames_processed: int
    frames_skipped: int
    boxes_emitted: int
    alerts: dict
    elapsed: float
    throughput: float
    """Processed frames per second of wall-clock time."""

    @classmethod
    def from_records(cls, records: Sequence[DetectionRecord], n_frames: int, elapsed: Optional[float] = None):
        if elapsed is None:
            elapsed = sum(r.elapsed for r in records)
        alerts = {lvl.value: 0 for lvl in AlertLevel}
        for r in records:
            alerts[r.alert.value] += 1
        n = len(records)
        return cls(
            frames_total=n_frames,
            frames_processed=n,
            frames_skipped=n_frames - n,
            boxes_emitted=sum(r.box is not None for r in records),
            alerts=alerts,
            elapsed=elapsed,
            throughput=n / elapsed if elapsed > 0 else math.inf,
        )

    def to_dict(self, canonical: bool = False) -> dict:
        d = {
            "frames_total": self.frames_total,
            "frames_processed": self.frames_processed,
            "frames_skipped": self.frames_skipped,
            "boxes_emitted": self.boxes_emitted,
            "alerts": dict(self.alerts),
        }
        if not canonical:
            d["elapsed"] = round(self.elapsed, 6)
            d["throughput"] = _num(self.throughput)
        return d

    def to_json(self, canonical: bool = False) -> str:
        return json.dumps(self.to_dict(canonical), indent=2)


def flow_pair(n_frames: int, i: int) -> tuple[int, int]:
    """Frames whose flow stands for frame ``i``: (i, i+1), or (i-1, i) for the last frame."""
    if i + 1 < n_frames:
        return i, i + 1
    return i - 1, i


def processed_indices(n_frames: int, frame_skip: int) -> range:
    return range(0, n_frames, frame_skip)


def _ttc_for(flow: FlowField, box: Box, cfg: PipelineConfig):
    # the tracked object's own pixels: inside the box and moving like an object
    region = region_mask(flow.shape, box) & object_mask(flow, cfg.classify_params)
    try:
        foe = estimate_foe(flow, cfg.ttc.magnitude_floor, region)
    except DegenerateInputError:
        return None, None
    profile = column_ttc(flow, foe, cfg.ttc.column_width, region, cfg.ttc.magnitude_floor)
    return profile.minimum(), heading_angle(profile, cfg.ttc.max_steer, cfg.ttc.heading_rule).angle


class Detector:
    """Stateful frame-by-frame runner; ``run_detection`` wraps it."""

    def __init__(self, shape: tuple[int, int], cfg: PipelineConfig = PipelineConfig()):
        self.cfg = cfg
        self.shape = shape
        self.state = TrackState()
        h, w = shape
        self.roi = default_region_mask(w, h, cfg.hough.corner_fraction)
        self.last_flow: Optional[FlowField] = None

    def step(self, index: int, f1, f2, depth: Optional[DepthFrame] = None, frame=None) -> DetectionRecord:
        """Process one frame: ``f1``/``f2`` are its flow pair, ``frame`` feeds the shape path."""
        cfg = self.cfg
        t0 = time.perf_counter()
        frame = f1 if frame is None else frame
        box = gate = None
        ratio = 0.0
        n_obj = n_bg = 0
        samples: tuple[Classified, ...] = ()
        ttc_min = heading = None
        self.last_flow = None
        if cfg.flow_enabled:
            flow = solve_horn_schunck(f1, f2, cfg.solver)
            self.last_flow = flow
            samples = tuple(classify_samples(sample_vectors(flow, cfg.classify.grid_stride), cfg.classify_params))
            v = track_frame(self.state, samples, index, cfg.track_params, flow.width)
            self.state = v.state
            box, gate, ratio = v.box, v.gate, v.ratio
            n_obj, n_bg = v.object_count, v.background_count
            if cfg.ttc_enabled and box is not None:
                ttc_min, heading = _ttc_for(flow, box, cfg)
        circles: tuple[CircleHit, ...] = ()
        shape_ran = cfg.shape_mode == "always" or (cfg.shape_mode == "fallback" and box is None)
        if shape_ran:
            circles = tuple(hough_circles(detect_edges(frame, cfg.hough), cfg.hough, self.roi))
        stereo_alert = bands = None
        if cfg.stereo_enabled and depth is not None:
            sv = classify_alert(depth, cfg.bands, cfg.stereo)
            stereo_alert, bands = sv.alert, sv.band_counts
        return DetectionRecord(
            frame_index=index,
            box=box,
            gate=gate,
            ratio=ratio,
            object_count=n_obj,
            background_count=n_bg,
            circles=circles,
            shape_ran=shape_ran,
            stereo_alert=stereo_alert,
            band_counts=bands,
            ttc_min=ttc_min,
            heading=heading,
            alert=fuse(box, circles, stereo_alert),
            elapsed=time.perf_counter() - t0,
            samples=samples,
        )


def _check_inputs(seq: FrameSequence, depth):
    if len(seq) == 0:
        raise SequenceError("empty frame sequence")
    if len(seq) < 2:
        raise SequenceError("flow needs at least 2 frames")
    if depth is not None:
        if len(depth) != len(seq):
            raise SequenceError(f"depth sequence has {len(depth)} frames, expected {len(seq)}")
        for i, d in enumerate(depth):
            if d.shape != seq.shape:
                raise ShapeMismatchError(f"depth frame {i} has shape {d.shape}, expected {seq.shape}")


def iter_detection(seq: FrameSequence, depth: Optional[Sequence[DepthFrame]] = None, cfg: PipelineConfig = PipelineConfig()):
    """Yield one DetectionRecord per processed frame, in order."""
    _check_inputs(seq, depth)
    det = Detector(seq.shape, cfg)
    n = len(seq)
    for i in processed_indices(n, cfg.frame_skip):
        a, b = flow_pair(n, i)
        yield det.step(i, seq[a], seq[b], None if depth is None else depth[i], frame=seq[i])


def run_detection(seq: FrameSequence, depth: Optional[Sequence[DepthFrame]] = None, cfg: PipelineConfig = PipelineConfig()) -> list[DetectionRecord]:
    return list(iter_detection(seq, depth, cfg))


def records_to_jsonl(records: Sequence[DetectionRecord], canonical: bool = False) -> str:
    return "".join(r.to_json(canonical) + "\n" for r in records)


def records_from_jsonl(text: str) -> list[DetectionRecord]:
    return [record_from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]

