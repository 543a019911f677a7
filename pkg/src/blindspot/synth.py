"""Deterministic synthetic blind-spot scenes with ground truth.

Scenes are composited in 2-D: a textured panorama that pans under the
camera, sprite objects whose texture is attached to the object (so growth is
a true expansion of the image content), dark wheel discs, and static
occluding walls.  Everything is a pure function of the :class:`SceneSpec`
and its seed.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .frames import DepthFrame, Frame, FrameSequence
from .stereo import LaneBands


@dataclass(frozen=True)
class BackgroundSpec:
    style: str = "day"
    """``day`` (sky + textured ground), ``night`` (dark with lamps) or ``flat`` (gray)."""
    noise_scale: float = 4.0
    shape_count: int = 40
    sky_fraction: float = 0.4


@dataclass(frozen=True)
class ObjectSpec:
    shape: str = "wheeled"
    """``wheeled``, ``plain`` or ``headlights``."""
    x: float = 0.0
    y: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    width: float = 60.0
    height: float = 36.0
    growth_w: float = 0.0
    growth_h: float = 0.0
    entry_frame: int = 0
    exit_frame: Optional[int] = None
    depth: float = 0.5
    depth_rate: float = 0.0
    wheel_radius: float = 0.0
    """Wheel radius at the initial width; wheels scale with the object."""

    def visible_at(self, t: int) -> bool:
        return t >= self.entry_frame and (self.exit_frame is None or t < self.exit_frame)

    def center(self, t: float) -> tuple[float, float]:
        return (self.x + self.vx * t, self.y + self.vy * t)

    def size(self, t: float) -> tuple[float, float]:
        return (self.width + self.growth_w * t, self.height + self.growth_h * t)

    def depth_at(self, t: float) -> float:
        return float(np.clip(self.depth + self.depth_rate * t, 0.0, 1.0))

    def wheels(self, t: float) -> list[tuple[float, float, float]]:
        if self.shape != "wheeled" or self.wheel_radius <= 0:
            return []
        cx, cy = self.center(t)
        w, h = self.size(t)
        r = self.wheel_radius * w / self.width
        wy = cy + h / 2 - 1.2 * r
        return [(cx - 0.3 * w, wy, r), (cx + 0.3 * w, wy, r)]

    def ttc(self, t: float) -> float:
        """Scale-based time to collision, width / (d width / d frame)."""
        if self.growth_w <= 0:
            return math.inf
        return self.size(t)[0] / self.growth_w


@dataclass(frozen=True)
class WallSpec:
    x0: float
    y0: float
    x1: float
    y1: float
    until_frame: Optional[int] = None
    """First frame without the wall (the camera has passed it)."""
    depth: Optional[float] = None

    def present_at(self, t: int) -> bool:
        return self.until_frame is None or t < self.until_frame


@dataclass(frozen=True)
class SceneSpec:
    name: str = "scene"
    width: int = 320
    height: int = 240
    n_frames: int = 60
    seed: int = 0
    camera_pan: float = -2.0
    frame_period: float = 1.0 / 30.0
    background: BackgroundSpec = BackgroundSpec()
    objects: tuple[ObjectSpec, ...] = ()
    walls: tuple[WallSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "walls", tuple(self.walls))
        if self.width < 2 or self.height < 2 or self.n_frames < 1:
            raise ConfigError("scene needs width, height >= 2 and n_frames >= 1")


@dataclass
class ObjectTruth:
    id: int
    bbox: tuple[int, int, int, int]
    """Inclusive pixel bounds (x0, y0, x1, y1) of the drawn, unoccluded pixels."""
    centroid: tuple[float, float]
    size: tuple[float, float]
    depth: float
    depth_band: str
    visible_fraction: float
    wheels: list
    ttc_frames: float
    speed: float


@dataclass
class FrameTruth:
    frame_index: int
    objects: list = field(default_factory=list)
    walls_present: int = 0

    @property
    def min_ttc(self) -> float:
        return min((o.ttc_frames for o in self.objects), default=math.inf)

    def to_json(self) -> str:
        def enc(x):
            if isinstance(x, float) and math.isinf(x):
                return None
            return x

        objs = []
        for o in self.objects:
            d = dataclasses.asdict(o)
            d["ttc_frames"] = enc(d["ttc_frames"])
            objs.append(d)
        return json.dumps(
            {"frame_index": self.frame_index, "objects": objs, "walls_present": self.walls_present,
             "min_ttc_frames": enc(self.min_ttc)},
            sort_keys=False,
        )


GroundTruth = list  # list[FrameTruth], one per frame


# --------------------------------------------------------------------------
# texture helpers
# --------------------------------------------------------------------------


def _value_noise(rng, height: int, width: int, scale: float) -> np.ndarray:
    gh = int(math.ceil(height / scale)) + 4
    gw = int(math.ceil(width / scale)) + 4
    lattice = rng.random((gh, gw))
    zoomed = ndimage.zoom(lattice, scale, order=1, mode="nearest")
    out = zoomed[:height, :width]
    lo, hi = out.min(), out.max()
    return (out - lo) / (hi - lo + 1e-12)


def _coverage_1d(lo: float, hi: float, n: int) -> np.ndarray:
    """Fraction of each unit pixel [i - 1/2, i + 1/2] inside [lo, hi]."""
    c = np.arange(n, dtype=np.float64)
    return np.clip(np.minimum(c + 0.5, hi) - np.maximum(c - 0.5, lo), 0.0, 1.0)


def rect_coverage(height: int, width: int, x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    return np.outer(_coverage_1d(y0, y1, height), _coverage_1d(x0, x1, width))


def disc_coverage(height: int, width: int, cx: float, cy: float, r: float) -> np.ndarray:
    """Antialiased disc via the signed distance of each pixel centre."""
    ys, xs = np.mgrid[0:height, 0:width]
    d = np.hypot(xs - cx, ys - cy)
    return np.clip(r + 0.5 - d, 0.0, 1.0)


class _ObjectTexture:
    """Texture in object-normalised coordinates s, q in [-1/2, 1/2]."""

    def __init__(self, rng, style: str):
        self.style = style
        self.fx = rng.uniform(6.5, 7.5)
        self.fy = rng.uniform(4.5, 5.5)
        self.px, self.py = rng.uniform(0, 2 * math.pi, size=2)

    def __call__(self, s: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.style == "headlights":
            body = np.full_like(s, 0.06)
            for hx in (-0.3, 0.3):
                body += 0.9 * np.exp(-(((s - hx) / 0.12) ** 2 + ((q + 0.05) / 0.2) ** 2))
            return np.clip(body, 0.0, 1.0)
        # full-contrast product of sinusoids; strong gradients keep the
        # flow solver well conditioned at alpha = 1
        base = np.sin(2 * math.pi * self.fx * s + self.px) * np.sin(2 * math.pi * self.fy * q + self.py)
        return 0.5 + 0.45 * base


# --------------------------------------------------------------------------
# renderer
# --------------------------------------------------------------------------


class SceneRenderer:
    def __init__(self, spec: SceneSpec):
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        self.margin = int(math.ceil(abs(spec.camera_pan) * spec.n_frames)) + 2
        self.panorama = self._panorama(rng)
        self.wall_texture = 0.45 + 0.25 * _value_noise(rng, spec.height, spec.width, 6.0)
        self.textures = [
            _ObjectTexture(np.random.default_rng([spec.seed, i]), "headlights" if o.shape == "headlights" else "body")
            for i, o in enumerate(spec.objects)
        ]
        self._check_bounds()

    # background ---------------------------------------------------------

    def _panorama(self, rng) -> np.ndarray:
        spec = self.spec
        bg = spec.background
        h = spec.height
        w = spec.width + 2 * self.margin
        if bg.style == "flat":
            return np.full((h, w), 0.5)
        horizon = int(round(bg.sky_fraction * h))
        ys = np.arange(h, dtype=np.float64)[:, None]
        if bg.style == "night":
            pano = np.full((h, w), 0.03)
            n_lamps = max(bg.shape_count // 3, 1)
            for _ in range(n_lamps):
                lx = rng.uniform(0, w)
                ly = rng.uniform(0.05 * h, 0.45 * h)
                rad = rng.uniform(3.0, 6.0)
                xs = np.arange(w, dtype=np.float64)[None, :]
                pano += 0.85 * np.exp(-((xs - lx) ** 2 + (ys - ly) ** 2) / (2 * rad**2))
            return np.clip(pano, 0.0, 1.0)
        ground = 0.1 + 0.8 * _value_noise(rng, h, w, bg.noise_scale)
        for _ in range(bg.shape_count):
            sx = rng.uniform(0, w)
            sy = rng.uniform(horizon, h)
            sw, sh = rng.uniform(6, 30, size=2)
            level = rng.uniform(0.1, 0.9)
            x0, x1 = int(sx), int(min(sx + sw, w))
            y0, y1 = int(sy), int(min(sy + sh, h))
            if rng.random() < 0.5:
                ground[y0:y1, x0:x1] = level
            else:
                # right triangle below the diagonal of the bounding rect
                yy, xx = np.mgrid[y0:y1, x0:x1]
                tri = (xx - x0) * max(y1 - y0, 1) <= (yy - y0) * max(x1 - x0, 1)
                ground[y0:y1, x0:x1][tri] = level
        sky = 0.8 + 0.1 * (ys / max(horizon, 1))
        pano = np.where(ys < horizon, np.broadcast_to(sky, (h, w)), ground)
        return pano

    def _background(self, t: int) -> np.ndarray:
        offset = self.margin - self.spec.camera_pan * t
        start = int(math.floor(offset))
        frac = offset - start
        w = self.spec.width
        a = self.panorama[:, start : start + w]
        if frac == 0:
            return a.copy()
        b = self.panorama[:, start + 1 : start + 1 + w]
        return (1 - frac) * a + frac * b

    # objects ---------------------------------------------------------------

    def _object_layer(self, i: int, t: int):
        """(coverage, intensity) arrays for object i at frame t."""
        o = self.spec.objects[i]
        h, w = self.spec.height, self.spec.width
        cx, cy = o.center(t)
        ow, oh = o.size(t)
        cov = rect_coverage(h, w, cx - ow / 2, cy - oh / 2, cx + ow / 2, cy + oh / 2)
        ys, xs = np.mgrid[0:h, 0:w]
        tex = self.textures[i]((xs - cx) / ow, (ys - cy) / oh)
        for wx, wy, r in o.wheels(t):
            rim = disc_coverage(h, w, wx, wy, r + 2.0)
            tire = disc_coverage(h, w, wx, wy, r)
            hub = disc_coverage(h, w, wx, wy, 0.45 * r)
            tex = tex * (1 - rim) + 0.95 * rim
            tex = tex * (1 - tire) + 0.02 * tire
            tex = tex * (1 - hub) + 0.55 * hub
        return cov, tex

    def _wall_coverage(self, t: int) -> np.ndarray:
        h, w = self.spec.height, self.spec.width
        cov = np.zeros((h, w))
        for wall in self.spec.walls:
            if wall.present_at(t):
                cov = np.maximum(cov, rect_coverage(h, w, wall.x0, wall.y0, wall.x1, wall.y1))
        return cov

    def _check_bounds(self):
        spec = self.spec
        for i, o in enumerate(spec.objects):
            ok = False
            for t in range(spec.n_frames):
                if not o.visible_at(t):
                    continue
                cx, cy = o.center(t)
                ow, oh = o.size(t)
                if ow <= 0 or oh <= 0:
                    continue
                if cx + ow / 2 > -0.5 and cx - ow / 2 < spec.width - 0.5 and cy + oh / 2 > -0.5 and cy - oh / 2 < spec.height - 0.5:
                    ok = True
                    break
            if not ok:
                raise ConfigError(f"object {i} is outside the frame in every frame")

    def render_frame(self, t: int) -> tuple[Frame, FrameTruth]:
        img = self._background(t)
        truth = FrameTruth(t)
        wall_cov = self._wall_coverage(t)
        bands = LaneBands()
        for i, o in enumerate(self.spec.objects):
            if not o.visible_at(t):
                continue
            cov, tex = self._object_layer(i, t)
            img = img * (1 - cov) + tex * cov
            shown = cov * (1 - wall_cov)
            if shown.sum() <= 0:
                continue
            ys, xs = np.nonzero(shown > 0)
            dep = o.depth_at(t)
            truth.objects.append(
                ObjectTruth(
                    id=i,
                    bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
                    centroid=o.center(t),
                    size=o.size(t),
                    depth=dep,
                    depth_band=depth_band(dep, bands),
                    visible_fraction=float(shown.sum() / cov.sum()),
                    wheels=[list(wh) for wh in o.wheels(t)],
                    ttc_frames=o.ttc(t),
                    speed=math.hypot(o.vx, o.vy) + abs(o.growth_w),
                )
            )
        if wall_cov.any():
            img = img * (1 - wall_cov) + self.wall_texture * wall_cov
        truth.walls_present = sum(1 for wall in self.spec.walls if wall.present_at(t))
        return Frame(np.clip(img, 0.0, 1.0)), truth

    def render_depth(self, t: int) -> DepthFrame:
        h, w = self.spec.height, self.spec.width
        depth = np.ones((h, w))
        layers = []
        for i, o in enumerate(self.spec.objects):
            if not o.visible_at(t):
                continue
            cx, cy = o.center(t)
            ow, oh = o.size(t)
            cov = rect_coverage(h, w, cx - ow / 2, cy - oh / 2, cx + ow / 2, cy + oh / 2)
            layers.append((o.depth_at(t), cov >= 0.5))
        for wall in self.spec.walls:
            if wall.present_at(t) and wall.depth is not None:
                layers.append((wall.depth, rect_coverage(h, w, wall.x0, wall.y0, wall.x1, wall.y1) >= 0.5))
        # nearer layers win
        for dep, m in sorted(layers, key=lambda l: -l[0]):
            depth[m] = dep
        return DepthFrame(depth)


def depth_band(depth: float, bands: LaneBands = LaneBands()) -> str:
    if depth < bands.t1:
        return "near"
    if depth < bands.t2:
        return "mid"
    if depth < bands.t3:
        return "far"
    return "beyond"


def render_sequence(spec: SceneSpec) -> tuple[FrameSequence, GroundTruth]:
    r = SceneRenderer(spec)
    frames, truth = [], []
    for t in range(spec.n_frames):
        f, gt = r.render_frame(t)
        frames.append(f)
        truth.append(gt)
    return FrameSequence(tuple(frames), spec.frame_period), truth


def render_depth_sequence(spec: SceneSpec) -> list[DepthFrame]:
    r = SceneRenderer(spec)
    return [r.render_depth(t) for t in range(spec.n_frames)]


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------


def _approach(seed=1, n=60, width=320, height=240, shape="wheeled", style="day") -> SceneSpec:
    # width 5% -> 40% of the frame over the run, sliding right while growing
    w0, w1 = 0.05 * width, 0.40 * width
    gw = (w1 - w0) / (n - 1)
    obj = ObjectSpec(
        shape=shape, x=0.03 * width, y=0.62 * height, vx=2.0, width=w0, height=0.75 * w0,
        growth_w=gw, growth_h=0.75 * gw, depth=0.7, depth_rate=-0.55 / (n - 1),
        wheel_radius=0.1 * w0,
    )
    return SceneSpec("approach", width, height, n, seed, -2.0,
                     background=BackgroundSpec(style=style, sky_fraction=0.5), objects=(obj,))


def preset_scenarios(width: int = 320, height: int = 240, n_frames: int = 60, seed: int = 7) -> dict[str, SceneSpec]:
    W, H, N = width, height, n_frames
    sx, sy = W / 320, H / 240
    presets = {}
    presets["approach"] = dataclasses.replace(_approach(seed, N, W, H), name="approach")
    presets["overtake"] = SceneSpec(
        "overtake", W, H, N, seed + 1, -2.0,
        objects=(ObjectSpec("wheeled", x=40 * sx, y=150 * sy, vx=3.0, width=100 * sx, height=60 * sy,
                            depth=0.3, wheel_radius=10 * sx),),
    )
    presets["zero_relative_hold"] = SceneSpec(
        "zero_relative_hold", W, H, N, seed + 2, -2.0,
        objects=(ObjectSpec("wheeled", x=165 * sx, y=150 * sy, width=150 * sx, height=70 * sy,
                            depth=0.25, wheel_radius=13 * sx),),
    )
    presets["wall_reveal"] = SceneSpec(
        "wall_reveal", W, H, N, seed + 3, -2.0,
        objects=(ObjectSpec("plain", x=165 * sx, y=150 * sy, vx=0.8, width=100 * sx, height=70 * sy,
                            depth=0.3),),
        walls=(WallSpec(95 * sx, 80 * sy, 240 * sx, 215 * sy, until_frame=min(20, N // 3)),),
    )
    presets["multi_lane"] = SceneSpec(
        "multi_lane", W, H, N, seed + 4, -2.0,
        objects=(
            ObjectSpec("wheeled", x=70 * sx, y=175 * sy, vx=1.0, width=110 * sx, height=62 * sy, depth=0.2,
                       wheel_radius=10 * sx),
            ObjectSpec("plain", x=190 * sx, y=135 * sy, vx=0.6, width=70 * sx, height=40 * sy, depth=0.45),
            ObjectSpec("plain", x=270 * sx, y=112 * sy, vx=0.3, width=40 * sx, height=24 * sy, depth=0.65),
        ),
    )
    presets["frontal_decel"] = SceneSpec(
        "frontal_decel", W, H, N, seed + 5, -2.0,
        objects=(ObjectSpec("wheeled", x=230 * sx, y=150 * sy, vx=-0.8, width=140 * sx, height=70 * sy,
                            depth=0.3, wheel_radius=12 * sx),),
    )
    night = _approach(seed + 6, N, W, H, shape="headlights", style="night")
    presets["night"] = dataclasses.replace(night, name="night")
    presets["empty_road"] = SceneSpec("empty_road", W, H, N, seed + 7, -2.0)
    return presets


def static_gray_fixture(width: int = 64, height: int = 64, n_frames: int = 4) -> SceneSpec:
    """Featureless, motionless background: the documented failure mode."""
    return SceneSpec("static_gray", width, height, n_frames, 0, 0.0, background=BackgroundSpec(style="flat"))


# --------------------------------------------------------------------------
# scene files (INI)
# --------------------------------------------------------------------------


def _coerce(tp, raw: str):
    raw = raw.strip()
    if tp in ("Optional[int]", "Optional[float]"):
        if raw.lower() in ("", "none"):
            return None
        return int(raw) if tp == "Optional[int]" else float(raw)
    if tp == "int":
        return int(raw)
    if tp == "float":
        return float(raw)
    return raw


def _section_to(cls, section, where: str):
    kwargs = {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key, raw in section.items():
        if key not in fields:
            raise ConfigError(f"[{where}] unknown key {key!r}")
        try:
            kwargs[key] = _coerce(fields[key].type, raw)
        except ValueError as exc:
            raise ConfigError(f"[{where}] bad value for {key}: {exc}") from None
    return cls(**kwargs)


def scene_from_ini(text: str) -> SceneSpec:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    scene = dict(cp["scene"]) if cp.has_section("scene") else {}
    bg = _section_to(BackgroundSpec, cp["background"], "background") if cp.has_section("background") else BackgroundSpec()
    objects, walls = [], []
    for name in cp.sections():
        if name.startswith("object"):
            objects.append(_section_to(ObjectSpec, cp[name], name))
        elif name.startswith("wall"):
            walls.append(_section_to(WallSpec, cp[name], name))
        elif name not in ("scene", "background"):
            raise ConfigError(f"unknown section [{name}]")
    base = _section_to(
        SceneSpec, {k: v for k, v in scene.items()}, "scene"
    ) if scene else SceneSpec()
    return dataclasses.replace(base, background=bg, objects=tuple(objects), walls=tuple(walls))


def scene_to_ini(spec: SceneSpec) -> str:
    cp = configparser.ConfigParser()
    cp["scene"] = {
        f.name: str(getattr(spec, f.name))
        for f in dataclasses.fields(SceneSpec)
        if f.name not in ("background", "objects", "walls")
    }
    cp["background"] = {k: str(v) for k, v in dataclasses.asdict(spec.background).items()}
    for i, o in enumerate(spec.objects):
        cp[f"object.{i}"] = {k: str(v) for k, v in dataclasses.asdict(o).items()}
    for i, w in enumerate(spec.walls):
        cp[f"wall.{i}"] = {k: str(v) for k, v in dataclasses.asdict(w).items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
