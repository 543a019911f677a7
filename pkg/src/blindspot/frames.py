"""Grayscale frames, depth frames and numbered frame sequences on disk.

Frames are stored as binary PGM (``P5``).  Intensity frames use maxval 255,
depth frames use 16-bit samples (maxval 65535).  A sequence is a directory of
``frame_000000.pgm``, ``frame_000001.pgm``, ... files with contiguous indices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionError,
    HeaderError,
    MagicError,
    RangeError,
    SequenceError,
    ShapeMismatchError,
    TruncatedError,
)

DEFAULT_FRAME_PERIOD = 1.0 / 30.0
FRAME_PATTERN = re.compile(r"^(?P<prefix>[A-Za-z]+_)(?P<index>\d{6})\.pgm$")
_WHITESPACE = b" \t\n\r\v\f"


def _frozen(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{what} must be a 2-D grid, got shape {arr.shape}")
    h, w = arr.shape
    if w < 2 or h < 2:
        raise DimensionError(f"{what} must be at least 2x2, got {w}x{h}")
    if not np.all(np.isfinite(arr)):
        raise RangeError(f"{what} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise RangeError(f"{what} values must lie in [0, 1]")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Frame:
    """Grayscale image with intensities in [0, 1], indexed ``pixels[y, x]``."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _frozen(self.pixels, "frame"))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def intensities(self) -> np.ndarray:
        """Row-major flat view of the pixels."""
        return self.pixels.ravel()

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((type(self).__name__, self.pixels.shape, self.pixels.tobytes()))


class DepthFrame(Frame):
    """Distance-proxy map in [0, 1]; larger values are farther, 1.0 is farthest."""

    @property
    def values(self) -> np.ndarray:
        return self.pixels.ravel()


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple[Frame, ...]
    frame_period: float = DEFAULT_FRAME_PERIOD

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if self.frame_period <= 0:
            raise ValueError("frame_period must be positive")
        if frames:
            shape = frames[0].shape
            for i, f in enumerate(frames):
                if f.shape != shape:
                    raise ShapeMismatchError(
                        f"frame {i} is {f.width}x{f.height}, expected {shape[1]}x{shape[0]}"
                    )

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def __iter__(self):
        return iter(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape


# --------------------------------------------------------------------------
# PGM codec
# --------------------------------------------------------------------------


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace separated header tokens after the magic.

    Returns the tokens and the offset of the first payload byte (one
    whitespace byte after the last token).
    """
    tokens = []
    pos = 2
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos] in _WHITESPACE:
            pos += 1
        if pos < n and data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise HeaderError("unexpected end of header")
        tokens.append(data[start:pos])
    if pos >= n or data[pos] not in _WHITESPACE:
        raise HeaderError("header must end with a single whitespace byte")
    return tokens, pos + 1


def decode_pgm(data: bytes) -> tuple[np.ndarray, int]:
    """Parse a binary PGM, returning raw integer samples and maxval."""
    if len(data) < 2 or data[:2] != b"P5":
        raise MagicError(f"expected P5 magic, got {data[:2]!r}")
    tokens, offset = _header_tokens(data, 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise HeaderError(f"non-numeric header field: {exc}") from None
    if width < 2 or height < 2:
        raise DimensionError(f"dimensions must be >= 2, got {width}x{height}")
    if not 0 < maxval < 65536:
        raise HeaderError(f"maxval out of range: {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    needed = width * height * dtype.itemsize
    payload = data[offset : offset + needed]
    if len(payload) < needed:
        raise TruncatedError(f"payload has {len(payload)} bytes, need {needed}")
    raw = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    if raw.max() > maxval:
        raise RangeError(f"sample {int(raw.max())} exceeds maxval {maxval}")
    return raw.astype(np.int64), maxval


def encode_pgm(pixels: np.ndarray, maxval: int = 255) -> bytes:
    h, w = pixels.shape
    raw = np.rint(np.asarray(pixels, dtype=np.float64) * maxval).astype(np.int64)
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    return header + raw.astype(dtype).tobytes()


def load_pgm(data: bytes) -> Frame:
    raw, maxval = decode_pgm(data)
    return Frame(raw / maxval)


def save_pgm(frame: Frame, maxval: int = 255) -> bytes:
    return encode_pgm(frame.pixels, maxval)


def load_depth_pgm(data: bytes) -> DepthFrame:
    raw, maxval = decode_pgm(data)
    return DepthFrame(raw / maxval)


def save_depth_pgm(depth: DepthFrame) -> bytes:
    return encode_pgm(depth.pixels, 65535)


def read_frame(path) -> Frame:
    return load_pgm(Path(path).read_bytes())


def write_frame(path, frame: Frame) -> None:
    if isinstance(frame, DepthFrame):
        Path(path).write_bytes(save_depth_pgm(frame))
    else:
        Path(path).write_bytes(save_pgm(frame))


def read_depth(path) -> DepthFrame:
    return load_depth_pgm(Path(path).read_bytes())


def encode_ppm(rgb: np.ndarray) -> bytes:
    """Binary P6 for an ``(h, w, 3)`` uint8 array."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


# --------------------------------------------------------------------------
# sequences
# --------------------------------------------------------------------------


def frame_filename(index: int, prefix: str = "frame_") -> str:
    return f"{prefix}{index:06d}.pgm"


def _numbered_files(directory: Path, prefix: str) -> list[Path]:
    if not directory.is_dir():
        raise SequenceError(f"not a directory: {directory}")
    found = {}
    for p in directory.iterdir():
        m = FRAME_PATTERN.match(p.name)
        if m and m.group("prefix") == prefix:
            found[int(m.group("index"))] = p
    if len(found) < 2:
        raise SequenceError(f"need at least 2 frames in {directory}, found {len(found)}")
    indices = sorted(found)
    first = indices[0]
    for expected, actual in enumerate(indices, start=first):
        if expected != actual:
            raise SequenceError(f"gap in numbering: missing index {expected}")
    return [found[i] for i in indices]


def load_sequence(
    directory, frame_period: float = DEFAULT_FRAME_PERIOD, prefix: str = "frame_"
) -> FrameSequence:
    files = _numbered_files(Path(directory), prefix)
    frames = [read_frame(p) for p in files]
    return FrameSequence(tuple(frames), frame_period)


def load_depth_sequence(directory, prefix: str = "frame_") -> list[DepthFrame]:
    files = _numbered_files(Path(directory), prefix)
    depths = [read_depth(p) for p in files]
    shape = depths[0].shape
    for i, d in enumerate(depths):
        if d.shape != shape:
            raise ShapeMismatchError(f"depth frame {i} has shape {d.shape}, expected {shape}")
    return depths


def save_sequence(directory, frames: Iterable[Frame], prefix: str = "frame_") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, f in enumerate(frames):
        p = directory / frame_filename(i, prefix)
        write_frame(p, f)
        paths.append(p)
    return paths


def quantize(frame: Frame, maxval: int = 255) -> Frame:
    return type(frame)(np.rint(frame.pixels * maxval) / maxval)


def as_frame(values: Sequence, width: int, height: int) -> Frame:
    """Build a Frame from a row-major flat list."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size != width * height:
        raise DimensionError(f"expected {width * height} intensities, got {arr.size}")
    return Frame(arr.reshape(height, width))
