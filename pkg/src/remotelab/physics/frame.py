"""Camera frames: 8-bit grayscale rasters with binary PGM serialization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_WIDTH = 320
DEFAULT_HEIGHT = 240


@dataclass
class Frame:
    """One grayscale capture. `pixels` is a (height, width) uint8 array."""

    pixels: np.ndarray
    timestamp_ms: float = 0.0
    camera_id: str = ""
    seq: int = field(default=0, compare=False)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {self.pixels.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def encode_pgm(frame: Frame | np.ndarray, metadata: dict | None = None) -> bytes:
    """Binary PGM (P5, maxval 255) encoding of a frame or raw pixel array.

    `metadata` key=value pairs ride in a comment line, so the result stays a
    valid PGM any viewer opens while carrying camera id and timing in-band.
    """
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame, dtype=np.uint8)
    if pixels.ndim != 2:
        raise ValueError("PGM encoding needs a 2-D grayscale array")
    comment = ""
    if metadata:
        fields = " ".join(f"{k}={v}" for k, v in metadata.items())
        comment = f"# {fields}\n"
    header = f"P5\n{comment}{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii")
    return header + pixels.tobytes()


def parse_pgm_metadata(data: bytes) -> dict:
    """key=value pairs from the first comment line of a PGM, if any."""
    out: dict[str, str] = {}
    for line in data.split(b"\n", 8):
        if line.startswith(b"#"):
            for token in line[1:].strip().decode("ascii", errors="replace").split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    out[key] = value
            break
    return out


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse a binary PGM produced by encode_pgm (P5, maxval 255)."""
    if not data.startswith(b"P5"):
        raise ValueError("not a binary PGM (missing P5 magic)")
    # Header tokens may be separated by arbitrary whitespace or comment lines.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    width, height, maxval = tokens
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError("truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()
