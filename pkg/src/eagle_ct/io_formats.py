"""Raw float32 images with JSON sidecars, 8-bit PGM export, and CSV tables.

An image ``foo.f32`` is stored as row-major little-endian float32 samples;
``foo.f32.json`` holds ``{"width", "height", "dtype": "f32le", "description"}``.
"""
import csv
from dataclasses import dataclass
import json
import os

import numpy as np

from .errors import CorruptHeaderError, ImageFormatError, ParameterError, SizeMismatchError

DTYPE_TAG = "f32le"
HEADER_SUFFIX = ".json"


@dataclass(frozen=True)
class ImageFileHeader:
    width: int
    height: int
    dtype: str = DTYPE_TAG
    description: str = ""

    @property
    def payload_bytes(self):
        return self.width * self.height * 4


def header_path(path):
    return os.fspath(path) + HEADER_SUFFIX


def write_image(path, image, description=""):
    """Write ``image`` as f32le plus its sidecar header; returns the header."""
    arr = np.asarray(image)
    if arr.ndim != 2 or arr.size == 0:
        raise ImageFormatError(f"expected a non-empty 2D image, got shape {arr.shape}")
    data = np.ascontiguousarray(arr, dtype="<f4")
    header = ImageFileHeader(width=int(arr.shape[1]), height=int(arr.shape[0]),
                             description=str(description))
    with open(path, "wb") as fh:
        fh.write(data.tobytes())
    with open(header_path(path), "w", encoding="utf-8") as fh:
        json.dump({"width": header.width, "height": header.height, "dtype": header.dtype,
                   "description": header.description}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return header


def read_header(path):
    try:
        with open(header_path(path), encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise CorruptHeaderError(f"missing header file {header_path(path)}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptHeaderError(f"unparseable header {header_path(path)}: {exc}") from None
    try:
        width, height = raw["width"], raw["height"]
        dtype = raw["dtype"]
    except (KeyError, TypeError):
        raise CorruptHeaderError(f"header {header_path(path)} lacks width/height/dtype") from None
    if not (isinstance(width, int) and isinstance(height, int) and width > 0 and height > 0):
        raise CorruptHeaderError(f"header dimensions must be positive integers, got {width}x{height}")
    if dtype != DTYPE_TAG:
        raise CorruptHeaderError(f"unsupported dtype {dtype!r}, expected {DTYPE_TAG!r}")
    return ImageFileHeader(width, height, dtype, str(raw.get("description", "")))


def read_image(path):
    """Read an image written by :func:`write_image` as a float32 array."""
    header = read_header(path)
    with open(path, "rb") as fh:
        payload = fh.read()
    if len(payload) % 4:
        raise SizeMismatchError(
            f"payload of {path} is {len(payload)} bytes, expected {header.payload_bytes}")
    if len(payload) != header.payload_bytes:
        if len(payload) < header.payload_bytes:
            raise SizeMismatchError(
                f"payload of {path} is {len(payload)} bytes, expected {header.payload_bytes}")
        raise CorruptHeaderError(
            f"header says {header.width}x{header.height} ({header.payload_bytes} bytes) "
            f"but payload has {len(payload)} bytes")
    return np.frombuffer(payload, dtype="<f4").reshape(header.height, header.width).copy()


def window_to_bytes(image, window_min, window_max):
    """Linear map of ``[window_min, window_max]`` onto 0..255 (floor, clamped)."""
    if not window_max > window_min:
        raise ParameterError(f"window_max ({window_max}) must exceed window_min ({window_min})")
    arr = np.asarray(image, dtype=np.float64)
    scaled = np.floor((arr - window_min) / (window_max - window_min) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def export_pgm(path, image, window_min, window_max):
    """Write a binary (P5) 8-bit PGM."""
    data = window_to_bytes(image, window_min, window_max)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return value


def write_csv(path_or_file, fieldnames, rows):
    """Write dict rows with a header; floats use shortest round-trip repr."""
    own = not hasattr(path_or_file, "write")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in fieldnames})
    finally:
        if own:
            fh.close()


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
