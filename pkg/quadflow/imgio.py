"""
quadflow - Image and Flow I/O

Value types for rasters (``Image``), displacement fields (``FlowField``) and
hole annotations (``HoleMask``), plus bit-exact file I/O for binary PNM frames
and Middlebury ``.flo`` flow maps.

All value types are immutable: their arrays are copied on construction and
marked read-only.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image as PILImage

from common.utils import atomic_write
from .errors import DimensionMismatchError, FormatError, ParameterError, StorageError

PathLike = Union[str, Path]

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
FLO_MAGIC = b"PIEH"
_PNM_WHITESPACE = b" \t\n\r"
_DIGITS = b"0123456789"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# =============================================================================
# Value Types
# =============================================================================
@dataclass(frozen=True, eq=False)
class Image:
    """
    H x W x C raster with finite samples in [0, 1]; C is 1 (gray) or 3 (RGB).
    """
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ParameterError(f"image data must be HxW, HxWx1 or HxWx3, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ParameterError(f"image must be at least 1x1, got {arr.shape[1]}x{arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("image samples must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ParameterError("image samples must lie in [0, 1]; use Image.from_array(..., clamp=True)")
        object.__setattr__(self, "data", _frozen(arr))

    @classmethod
    def from_array(cls, arr: np.ndarray, clamp: bool = True) -> "Image":
        """Build an image from any float array, clamping into [0, 1] by default"""
        arr = np.asarray(arr, dtype=np.float64)
        return cls(np.clip(arr, 0.0, 1.0) if clamp else arr)

    @classmethod
    def from_uint8(cls, arr: np.ndarray) -> "Image":
        return cls(np.asarray(arr, dtype=np.float64) / 255.0)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def size(self) -> Tuple[int, int]:
        """(height, width)"""
        return self.data.shape[0], self.data.shape[1]

    def luma(self) -> np.ndarray:
        """H x W luma, Y = 0.299 R + 0.587 G + 0.114 B for RGB"""
        if self.channels == 1:
            return self.data[:, :, 0]
        return self.data @ LUMA_WEIGHTS

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.data * 255.0), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class FlowField:
    """
    H x W field of (u, v) displacements in pixels; u is horizontal, v vertical.
    Never holds NaN or infinity: unknown flow is reported through a HoleMask.
    """
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ParameterError(f"flow data must be HxWx2, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("flow components must be finite")
        object.__setattr__(self, "data", _frozen(arr))

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width, 2)))

    @classmethod
    def constant(cls, height: int, width: int, u: float, v: float) -> "FlowField":
        data = np.empty((height, width, 2))
        data[:, :, 0] = u
        data[:, :, 1] = v
        return cls(data)

    @classmethod
    def from_components(cls, u: np.ndarray, v: np.ndarray) -> "FlowField":
        return cls(np.stack([u, v], axis=-1))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def size(self) -> Tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    @property
    def u(self) -> np.ndarray:
        return self.data[:, :, 0]

    @property
    def v(self) -> np.ndarray:
        return self.data[:, :, 1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


@dataclass(frozen=True, eq=False)
class HoleMask:
    """H x W booleans, True where a flow field has no value"""
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=bool)
        if arr.ndim != 2:
            raise ParameterError(f"hole mask must be HxW, got shape {arr.shape}")
        object.__setattr__(self, "data", _frozen(arr))

    @classmethod
    def empty(cls, height: int, width: int) -> "HoleMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def size(self) -> Tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    @property
    def count(self) -> int:
        return int(self.data.sum())


def check_same_size(what: str, expected: Tuple[int, int], actual: Tuple[int, int]) -> None:
    """Raise DimensionMismatchError unless two (height, width) pairs agree"""
    if tuple(expected) != tuple(actual):
        raise DimensionMismatchError(what, tuple(expected), tuple(actual))


# =============================================================================
# PNM (P5 / P6, maxval 255)
# =============================================================================
def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}") from e


def _parse_pnm_header(buf: bytes, path: str) -> Tuple[int, int, int, int]:
    """Return (width, height, channels, payload offset)"""
    if len(buf) < 2:
        raise FormatError("truncated header", offset=len(buf), path=path)
    magic = buf[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(f"unsupported magic {magic!r}, expected P5 or P6", offset=0, path=path)

    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        if pos >= len(buf) or buf[pos] not in _PNM_WHITESPACE:
            raise FormatError(f"expected whitespace before {name}", offset=pos, path=path)
        pos += 1
        start = pos
        while pos < len(buf) and buf[pos] in _DIGITS:
            pos += 1
        if pos == start:
            raise FormatError(f"expected decimal {name}", offset=start, path=path)
        fields.append((int(buf[start:pos]), start))
    if pos >= len(buf) or buf[pos] not in _PNM_WHITESPACE:
        raise FormatError("expected a single whitespace after maxval", offset=pos, path=path)
    pos += 1

    (width, w_at), (height, h_at), (maxval, m_at) = fields
    if width < 1:
        raise FormatError("width must be positive", offset=w_at, path=path)
    if height < 1:
        raise FormatError("height must be positive", offset=h_at, path=path)
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}, only 255 is accepted", offset=m_at, path=path)
    return width, height, channels, pos


def read_image(path: PathLike) -> Image:
    """Read a binary P5/P6 file with maxval 255; samples map to s/255"""
    buf = _read_bytes(path)
    width, height, channels, offset = _parse_pnm_header(buf, str(path))
    expected = width * height * channels
    available = len(buf) - offset
    if available < expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes, found {available}",
            offset=len(buf), path=str(path),
        )
    if available > expected:
        raise FormatError(
            f"{available - expected} trailing bytes after payload",
            offset=offset + expected, path=str(path),
        )
    samples = np.frombuffer(buf, dtype=np.uint8, count=expected, offset=offset)
    return Image.from_uint8(samples.reshape(height, width, channels))


def write_image(image: Image, path: PathLike) -> None:
    """Write P5 (gray) or P6 (RGB); samples map to round(s*255) clamped to [0, 255]"""
    pixels = image.to_uint8()
    pil = PILImage.fromarray(pixels[:, :, 0] if image.channels == 1 else pixels)
    try:
        with atomic_write(path) as fh:
            pil.save(fh, format="PPM")
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e


def write_mask(mask: HoleMask, path: PathLike) -> None:
    """Write a hole mask as P5 with 255 marking holes"""
    write_image(Image(mask.data.astype(np.float64)), path)


def read_mask(path: PathLike) -> HoleMask:
    image = read_image(path)
    if image.channels != 1:
        raise FormatError("hole mask must be a P5 (grayscale) file", offset=0, path=str(path))
    return HoleMask(image.data[:, :, 0] >= 0.5)


# =============================================================================
# Middlebury .flo
# =============================================================================
def read_flo(path: PathLike) -> FlowField:
    """
    Read ``PIEH`` magic, int32 LE width and height, then width*height*2 float32
    LE values interleaved (u, v), row-major.
    """
    buf = _read_bytes(path)
    if len(buf) < 12:
        raise FormatError("truncated header", offset=len(buf), path=str(path))
    if buf[:4] != FLO_MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {FLO_MAGIC!r}", offset=0, path=str(path))
    width, height = (int(x) for x in np.frombuffer(buf, dtype="<i4", count=2, offset=4))
    if width < 1 or height < 1:
        raise FormatError(f"nonpositive dimensions {width}x{height}", offset=4, path=str(path))

    count = width * height * 2
    expected = 12 + count * 4
    if len(buf) != expected:
        raise FormatError(
            f"size mismatch: {width}x{height} needs {expected} bytes, file has {len(buf)}",
            offset=min(len(buf), expected), path=str(path),
        )
    values = np.frombuffer(buf, dtype="<f4", count=count, offset=12)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise FormatError("non-finite flow value", offset=12 + int(bad[0]) * 4, path=str(path))
    return FlowField(values.astype(np.float64).reshape(height, width, 2))


def encode_flo(flow: FlowField) -> bytes:
    values = flow.data.astype("<f4")
    if not np.all(np.isfinite(values)):
        raise ParameterError("flow components overflow float32")
    header = FLO_MAGIC + np.array([flow.width, flow.height], dtype="<i4").tobytes()
    return header + values.tobytes()


def write_flo(flow: FlowField, path: PathLike) -> None:
    payload = encode_flo(flow)
    try:
        with atomic_write(path) as fh:
            fh.write(payload)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
