import functools

import numpy as np
import pytest

from blindspot.frames import Frame
from blindspot.synth import preset_scenarios, render_depth_sequence, render_sequence


def sinusoid(width=64, height=64, period=8.0, shift=0.0):
    """Smooth texture 0.5 + 0.5 sin(2 pi (x - shift)/p) sin(2 pi y/p)."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return 0.5 + 0.5 * np.sin(2 * np.pi * (xs - shift) / period) * np.sin(2 * np.pi * ys / period)


@pytest.fixture
def shifted_sinusoid_pair():
    return Frame(sinusoid()), Frame(sinusoid(shift=1.0))


@functools.lru_cache(maxsize=None)
def rendered(name):
    """Render a preset once per test session."""
    spec = preset_scenarios()[name]
    seq, truth = render_sequence(spec)
    return spec, seq, truth


@functools.lru_cache(maxsize=None)
def rendered_depth(name):
    return render_depth_sequence(preset_scenarios()[name])


@functools.lru_cache(maxsize=None)
def detected(name, frame_skip=5, shape_mode="fallback", with_depth=False):
    """Run the pipeline on a preset once per test session."""
    import dataclasses

    from blindspot.config import PipelineConfig
    from blindspot.pipeline import run_detection

    _, seq, _ = rendered(name)
    cfg = dataclasses.replace(PipelineConfig(), frame_skip=frame_skip, shape_mode=shape_mode)
    depth = rendered_depth(name) if with_depth else None
    return tuple(run_detection(seq, depth, cfg))
