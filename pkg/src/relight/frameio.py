"""Frame and sequence I/O.

Frames are numpy float64 arrays in [0, 1], shaped (H, W) for grayscale or
(H, W, 3) for RGB.  Disk containers are 8-bit: PNG, binary PPM/PGM, and
YUV4MPEG2 (4:4:4 or mono only).  Integer samples map to float as s / 255 on
read and round(x * 255) after clamping on write, so a write/read round trip
is exact to within half a quantization step for PNG/PPM.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "FrameIOError",
    "Sequence",
    "FrameWindow",
    "FORMATS",
    "validate_frame",
    "to_luma",
    "quantize",
    "dequantize",
    "read_frame",
    "write_frame",
    "read_sequence",
    "write_sequence",
    "window_at",
]

FORMATS = ("png_seq", "ppm_seq", "y4m")

#: Rec.601 luma weights, used everywhere a scalar luminance is needed.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class FrameIOError(Exception):
    """Raised for unreadable, inconsistent or unsupported frame data."""


def validate_frame(frame: np.ndarray) -> np.ndarray:
    """Check shape/dtype conventions and return the frame as float64.

    Accepts (H, W) or (H, W, 3) arrays; anything else raises ValueError.
    Values are expected in [0, 1] but are not clamped here.
    """
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr
    raise ValueError(f"frame must be (H, W) or (H, W, 3), got shape {arr.shape}")


def to_luma(frame: np.ndarray) -> np.ndarray:
    """Rec.601 luma of a frame; grayscale frames pass through."""
    arr = validate_frame(frame)
    if arr.ndim == 2:
        return arr
    return arr @ LUMA_WEIGHTS


def quantize(frame: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and round to 8-bit samples."""
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)


def dequantize(samples: np.ndarray) -> np.ndarray:
    """Map 8-bit samples back to float64 in [0, 1]."""
    return np.asarray(samples, dtype=np.float64) / 255.0


@dataclass
class Sequence:
    """An ordered list of frames sharing one shape, plus a frame rate."""

    frames: list[np.ndarray]
    frame_rate: float = 24.0

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError("sequence must contain at least one frame")
        self.frames = [validate_frame(f) for f in self.frames]
        shape = self.frames[0].shape
        for i, f in enumerate(self.frames):
            if f.shape != shape:
                raise FrameIOError(
                    f"mixed frame dimensions: frame 0 is {shape}, frame {i} is {f.shape}"
                )
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.frames[0].shape


@dataclass
class FrameWindow:
    """Five consecutive frames centred on one target frame.

    ``members[2]`` is the centre.  Flow slots are filled lazily by the
    temporal prior: ``flows_to_center[j]`` is sampled on the centre grid and
    pulls member j onto the centre; ``flows_from_center[j]`` is sampled on
    member j's grid and pulls the centre onto member j.  Both lists follow
    the member order with the centre itself skipped.
    """

    center_index: int
    members: list[np.ndarray]
    flows_to_center: list = field(default_factory=lambda: [None] * 4)
    flows_from_center: list = field(default_factory=lambda: [None] * 4)

    def __post_init__(self) -> None:
        if len(self.members) != 5:
            raise ValueError("window must hold exactly 5 members")

    @property
    def center(self) -> np.ndarray:
        return self.members[2]

    def neighbors(self) -> list[np.ndarray]:
        return [self.members[i] for i in (0, 1, 3, 4)]


def window_at(seq: Sequence, t: int) -> FrameWindow:
    """Build the 5-frame window around index ``t`` with edge clamping."""
    n = len(seq)
    if not 0 <= t < n:
        raise IndexError(f"frame index {t} out of range for sequence of {n}")
    members = [seq.frames[min(max(t + d, 0), n - 1)] for d in (-2, -1, 0, 1, 2)]
    return FrameWindow(center_index=t, members=members)


# ---------------------------------------------------------------------------
# container back ends
# ---------------------------------------------------------------------------

_FRAME_NAME = "frame_{:06d}.{}"
_FRAME_RE = re.compile(r"frame_(\d+)\.(png|ppm|pgm)$")


def _infer_format(path: Path) -> str:
    if path.suffix.lower() == ".y4m":
        return "y4m"
    if path.is_dir():
        exts = {p.suffix.lower() for p in path.iterdir() if p.is_file()}
        if ".png" in exts:
            return "png_seq"
        if ".ppm" in exts or ".pgm" in exts:
            return "ppm_seq"
    raise FrameIOError(f"cannot infer container format for {path}")


def _read_png(path: Path) -> np.ndarray:
    try:
        img = Image.open(path)
        img.load()
    except OSError as exc:
        raise FrameIOError(f"unreadable PNG {path}: {exc}") from exc
    if img.mode not in ("L", "RGB"):
        raise FrameIOError(
            f"unsupported bit depth or mode {img.mode!r} in {path}; 8-bit L/RGB only"
        )
    return dequantize(np.asarray(img, dtype=np.uint8))


def _write_png(path: Path, frame: np.ndarray) -> None:
    Image.fromarray(quantize(frame)).save(path, format="PNG")


def read_frame(path: str | Path) -> np.ndarray:
    """Read a single still image (PNG, PPM or PGM)."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        return _read_png(path)
    if path.suffix.lower() in (".ppm", ".pgm"):
        return _read_pnm(path)
    raise FrameIOError(f"cannot infer still-image format for {path}")


def write_frame(path: str | Path, frame: np.ndarray) -> None:
    """Write a single still image; format chosen from the extension."""
    path = Path(path)
    frame = validate_frame(frame)
    if path.suffix.lower() == ".png":
        _write_png(path, frame)
    elif path.suffix.lower() in (".ppm", ".pgm"):
        _write_pnm(path, frame)
    else:
        raise FrameIOError(f"cannot infer still-image format for {path}")


def _read_pnm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if data[:2] not in (b"P5", b"P6"):
        raise FrameIOError(f"{path}: not a binary PGM/PPM file")
    # header = magic, width, height, maxval; '#' comments allowed between tokens
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3 and pos < len(data):
        m = re.match(rb"\s*(?:#[^\n]*\n\s*)*(\d+)", data[pos:])
        if m is None:
            raise FrameIOError(f"{path}: malformed PNM header")
        tokens.append(m.group(1))
        pos += m.end()
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise FrameIOError(f"{path}: unsupported bit depth (maxval {maxval}, need 255)")
    channels = 3 if data[:2] == b"P6" else 1
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height * channels, offset=pos)
    if raster.size != width * height * channels:
        raise FrameIOError(f"{path}: truncated raster")
    samples = raster.reshape(height, width, channels)
    return dequantize(samples[:, :, 0] if channels == 1 else samples)


def _write_pnm(path: Path, frame: np.ndarray) -> None:
    samples = quantize(frame)
    if samples.ndim == 2:
        header = f"P5\n{samples.shape[1]} {samples.shape[0]}\n255\n"
    else:
        header = f"P6\n{samples.shape[1]} {samples.shape[0]}\n255\n"
    path.write_bytes(header.encode("ascii") + samples.tobytes())


# Full-range BT.601 YCbCr, the JPEG convention.
def _rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    y = rgb @ LUMA_WEIGHTS
    cb = (rgb[:, :, 2] - y) * (0.5 / 0.886) + 0.5
    cr = (rgb[:, :, 0] - y) * (0.5 / 0.701) + 0.5
    return np.stack([y, cb, cr], axis=-1)


def _ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y, cb, cr = ycc[:, :, 0], ycc[:, :, 1] - 0.5, ycc[:, :, 2] - 0.5
    r = y + 1.402 * cr
    b = y + 1.772 * cb
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return np.stack([r, g, b], axis=-1)


def _read_y4m(path: Path) -> Sequence:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FrameIOError(f"unreadable file {path}: {exc}") from exc
    eol = data.find(b"\n")
    if eol < 0 or not data.startswith(b"YUV4MPEG2"):
        raise FrameIOError(f"{path}: not a YUV4MPEG2 stream")
    width = height = None
    rate = 24.0
    chroma = "420"  # y4m default when the C tag is absent
    for token in data[:eol].split()[1:]:
        tag, value = chr(token[0]), token[1:].decode("ascii", "replace")
        if tag == "W":
            width = int(value)
        elif tag == "H":
            height = int(value)
        elif tag == "F":
            num, den = value.split(":")
            rate = int(num) / int(den)
        elif tag == "C":
            chroma = value
    if width is None or height is None:
        raise FrameIOError(f"{path}: missing W/H in stream header")
    if chroma not in ("444", "mono"):
        raise FrameIOError(f"{path}: unsupported chroma; require 444 or mono")
    planes = 3 if chroma == "444" else 1
    frame_bytes = width * height * planes
    frames = []
    pos = eol + 1
    while pos < len(data):
        eol = data.find(b"\n", pos)
        if eol < 0 or not data[pos:eol].startswith(b"FRAME"):
            raise FrameIOError(f"{path}: malformed FRAME marker at byte {pos}")
        pos = eol + 1
        raw = np.frombuffer(data, dtype=np.uint8, count=frame_bytes, offset=pos)
        if raw.size != frame_bytes:
            raise FrameIOError(f"{path}: truncated frame payload")
        pos += frame_bytes
        if planes == 1:
            frames.append(dequantize(raw.reshape(height, width)))
        else:
            ycc = dequantize(raw.reshape(3, height, width).transpose(1, 2, 0))
            frames.append(np.clip(_ycbcr_to_rgb(ycc), 0.0, 1.0))
    if not frames:
        raise FrameIOError(f"{path}: stream contains no frames")
    return Sequence(frames, frame_rate=rate)


def _write_y4m(path: Path, seq: Sequence) -> None:
    color = seq.shape[-1:] == (3,) and len(seq.shape) == 3
    chroma = "444" if color else "mono"
    rate = Fraction(seq.frame_rate).limit_denominator(1001)
    header = f"YUV4MPEG2 W{seq.shape[1]} H{seq.shape[0]} F{rate.numerator}:{rate.denominator} Ip A1:1 C{chroma}\n"
    chunks = [header.encode("ascii")]
    for frame in seq.frames:
        chunks.append(b"FRAME\n")
        if color:
            ycc = quantize(_rgb_to_ycbcr(np.clip(frame, 0.0, 1.0)))
            chunks.append(ycc.transpose(2, 0, 1).tobytes())
        else:
            chunks.append(quantize(frame).tobytes())
    path.write_bytes(b"".join(chunks))


def read_sequence(path: str | Path, format: str | None = None) -> Sequence:
    """Read a frame sequence from a directory of images or a .y4m file.

    Directory members are ordered by their zero-padded numeric filename.
    ``format`` is one of FORMATS; None infers it from the path.
    """
    path = Path(path)
    if not path.exists():
        raise FrameIOError(f"missing input path {path}")
    fmt = format or _infer_format(path)
    if fmt not in FORMATS:
        raise FrameIOError(f"unknown sequence format {fmt!r}")
    if fmt == "y4m":
        return _read_y4m(path)
    if not path.is_dir():
        raise FrameIOError(f"{path} is not a directory of frames")
    ext = (".png",) if fmt == "png_seq" else (".ppm", ".pgm")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in ext)
    if not files:
        raise FrameIOError(f"no {'/'.join(ext)} frames found in {path}")
    reader = _read_png if fmt == "png_seq" else _read_pnm
    return Sequence([reader(p) for p in files])


def write_sequence(seq: Sequence, path: str | Path, format: str = "png_seq") -> list[Path]:
    """Write a sequence; returns the paths written (for cleanup on failure).

    Image-sequence formats write ``frame_000000.ext`` style names into the
    directory ``path`` (created if needed); y4m writes one stream file.
    """
    if format not in FORMATS:
        raise FrameIOError(f"unknown sequence format {format!r}")
    path = Path(path)
    gray = seq.frames[0].ndim == 2
    if format == "y4m":
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_y4m(path, seq)
        return [path]
    path.mkdir(parents=True, exist_ok=True)
    written = []
    ext = "png" if format == "png_seq" else ("pgm" if gray else "ppm")
    writer = _write_png if format == "png_seq" else _write_pnm
    for i, frame in enumerate(seq.frames):
        target = path / _FRAME_NAME.format(i, ext)
        try:
            writer(target, frame)
        except Exception:
            for p in written:
                p.unlink(missing_ok=True)
            raise
        written.append(target)
    return written
