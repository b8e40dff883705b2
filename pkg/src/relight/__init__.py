"""Low-light video enhancement by stagewise consensus optimization.

The restoration model splits each frame into a data-fidelity term and two
prior terms -- a spatial one (illumination correction + patch denoising)
and a temporal one (flow-aligned fusion across a short window) -- and
alternates closed-form data updates with the two proximal steps.  Spatial
candidates are ranked by a no-reference quality score, so the illumination
correction picks whatever the quality model likes best.

Quick start::

    import numpy as np
    from relight import DegradeParams, PipelineConfig, degrade_sequence
    from relight import enhance_sequence, synth
    from relight.intra import build_profile
    from relight.quality import default_model

    clean = synth.make_sequence(96, 96, length=8, seed=1)
    dark = degrade_sequence(clean, DegradeParams(gain=0.2, shot=0.005, read=0.02))
    out, picks = enhance_sequence(
        dark, PipelineConfig(), build_profile(clean.frames), default_model()
    )
"""

from . import degrade, frameio, inter, intra, metrics, quality, solver, synth
from .config import ConfigError, RunConfig, parse_config
from .degrade import DegradeParams, degrade_frame, degrade_sequence
from .frameio import (
    FrameIOError,
    FrameWindow,
    Sequence,
    read_frame,
    read_sequence,
    window_at,
    write_frame,
    write_sequence,
)
from .pipeline import PipelineConfig, enhance_frame, enhance_sequence
from .solver import NumericalError, SolverState, StageConfig

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegradeParams",
    "FrameIOError",
    "FrameWindow",
    "NumericalError",
    "PipelineConfig",
    "RunConfig",
    "Sequence",
    "SolverState",
    "StageConfig",
    "degrade",
    "degrade_frame",
    "degrade_sequence",
    "enhance_frame",
    "enhance_sequence",
    "frameio",
    "inter",
    "intra",
    "metrics",
    "parse_config",
    "quality",
    "read_frame",
    "read_sequence",
    "solver",
    "synth",
    "window_at",
    "write_frame",
    "write_sequence",
    "__version__",
]
