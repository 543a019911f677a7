"""Pipeline configuration and its INI file form.

Every parameter block maps to one section; keys are the dataclass field
names.  Unknown sections or keys are errors so typos do not pass silently.

    [pipeline]
    frame_skip = 5
    shape_mode = fallback

    [flow]
    max_iters = 400
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .flow import SolverParams
from .shapes import HoughParams
from .stereo import LaneBands, StereoParams
from .tracking import TrackParams
from .ttc import TTCParams
from .vectors import ClassifyParams

SHAPE_MODES = ("fallback", "always", "off")


def _default_solver() -> SolverParams:
    # the solver's own default (100 sweeps) stops far short of convergence on
    # 320x240 scenes; 400 brings the object flow within a few percent
    return SolverParams(max_iters=400)


@dataclass(frozen=True)
class PipelineConfig:
    solver: SolverParams = field(default_factory=_default_solver)
    classify: ClassifyParams = ClassifyParams()
    track: TrackParams = TrackParams()
    hough: HoughParams = HoughParams()
    stereo: StereoParams = StereoParams()
    bands: LaneBands = LaneBands()
    ttc: TTCParams = TTCParams()
    frame_skip: int = 5
    flow_enabled: bool = True
    shape_mode: str = "fallback"
    stereo_enabled: bool = True
    ttc_enabled: bool = True
    mirrored: bool = False
    overlays: bool = False

    def __post_init__(self):
        if self.frame_skip < 1:
            raise ConfigError("frame_skip must be >= 1")
        if self.shape_mode not in SHAPE_MODES:
            raise ConfigError(f"shape_mode must be one of {SHAPE_MODES}, got {self.shape_mode!r}")
        if not (self.flow_enabled or self.shape_mode != "off" or self.stereo_enabled):
            raise ConfigError("at least one of the flow, shape and stereo paths must be enabled")

    @property
    def classify_params(self) -> ClassifyParams:
        """Classification parameters with the mirror flag applied."""
        return self.classify.mirrored() if self.mirrored else self.classify

    @property
    def track_params(self) -> TrackParams:
        if self.mirrored and not self.track.mirrored:
            return dataclasses.replace(self.track, mirrored=True)
        return self.track


# section name -> PipelineConfig attribute holding that block
SECTIONS = {
    "flow": "solver",
    "classify": "classify",
    "track": "track",
    "hough": "hough",
    "stereo": "stereo",
    "bands": "bands",
    "ttc": "ttc",
}


def _parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _coerce(default, raw: str):
    """Convert ``raw`` to the type of the field's default value."""
    raw = raw.strip()
    if isinstance(default, bool):
        return _parse_bool(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(float(x) for x in raw.replace(",", " ").split())
    if default is None:
        return None if raw.lower() in ("", "none") else int(raw)
    return raw


def _apply(block, items, where: str, exclude=()):
    names = {f.name for f in dataclasses.fields(block)} - set(exclude)
    changes = {}
    for key, raw in items:
        if key not in names:
            raise ConfigError(f"[{where}] unknown key {key!r}")
        try:
            changes[key] = _coerce(getattr(block, key), raw)
        except ValueError as exc:
            raise ConfigError(f"[{where}] bad value for {key}: {exc}") from None
    try:
        return dataclasses.replace(block, **changes)
    except ValueError as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def config_from_ini(text: str, base: PipelineConfig = None) -> PipelineConfig:
    cfg = base or PipelineConfig()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for name in cp.sections():
        items = list(cp[name].items())
        if name == "pipeline":
            cfg = _apply(cfg, items, name, exclude=SECTIONS.values())
        elif name in SECTIONS:
            attr = SECTIONS[name]
            block = _apply(getattr(cfg, attr), items, name)
            cfg = dataclasses.replace(cfg, **{attr: block})
        else:
            raise ConfigError(f"unknown section [{name}]")
    return cfg


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_ini(text)


def config_to_ini(cfg: PipelineConfig) -> str:
    def fmt(v):
        if isinstance(v, tuple):
            return ", ".join(repr(x) for x in v)
        return str(v)

    cp = configparser.ConfigParser()
    top = {}
    for f in dataclasses.fields(cfg):
        if f.name not in SECTIONS.values():
            top[f.name] = fmt(getattr(cfg, f.name))
    cp["pipeline"] = top
    for section, attr in SECTIONS.items():
        block = getattr(cfg, attr)
        cp[section] = {f.name: fmt(getattr(block, f.name)) for f in dataclasses.fields(block)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()

