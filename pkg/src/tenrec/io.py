"""Binary tensor and observation files, and image-stack ingestion.

A tensor file is a magic line, one JSON header line and a raw payload::

    TNSR1\\n
    {"dtype": "f64", "layout": "col-major", "shape": [3, 4, 5]}\\n
    <prod(shape) little-endian float64 values, column-major>

Observation files use the magic ``OBSV1``; the header adds the sample count
and quantizer settings, and the payload is the int64 linear indices followed
by the float64 values.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .degrade import Observation

TENSOR_MAGIC = b"TNSR1"
OBS_MAGIC = b"OBSV1"
IMAGE_SUFFIXES = {".png", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg", ".pgm", ".ppm"}


class FormatError(ValueError):
    """Raised for malformed tensor or observation files."""


def _header_bytes(header: dict) -> bytes:
    return (json.dumps(header, sort_keys=True) + "\n").encode("ascii")


def _read_header(fh, magic: bytes) -> dict:
    line = fh.readline()
    if line.rstrip(b"\n") != magic:
        raise FormatError(f"bad magic {line[:16]!r}, expected {magic!r}")
    raw = fh.readline()
    if not raw.endswith(b"\n"):
        raise FormatError("truncated header")
    try:
        header = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed header: {exc}") from None
    if not isinstance(header, dict):
        raise FormatError("header must be a JSON object")
    if header.get("dtype") != "f64":
        raise FormatError(f"unsupported dtype {header.get('dtype')!r}")
    if header.get("layout", "col-major") != "col-major":
        raise FormatError(f"unsupported layout {header.get('layout')!r}")
    shape = header.get("shape")
    if not isinstance(shape, list) or not shape or not all(isinstance(s, int) and s > 0 for s in shape):
        raise FormatError(f"shape must be a nonempty list of positive ints, got {shape!r}")
    return header


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what}: expected {n} bytes, got {len(buf)}")
    return buf


def write_tensor(t: np.ndarray, path) -> None:
    t = np.asarray(t)
    if t.ndim == 0 or t.size == 0:
        raise ValueError("cannot store an empty-shape tensor")
    header = {"dtype": "f64", "layout": "col-major", "shape": [int(s) for s in t.shape]}
    payload = np.asarray(t, dtype="<f8").ravel(order="F").tobytes()
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC + b"\n")
        fh.write(_header_bytes(header))
        fh.write(payload)


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = _read_header(fh, TENSOR_MAGIC)
        shape = tuple(header["shape"])
        n = int(np.prod(shape))
        data = _read_exact(fh, 8 * n, "payload")
        if fh.read(1):
            raise FormatError("trailing bytes after payload")
    return np.frombuffer(data, dtype="<f8").astype(float).reshape(shape, order="F")


def write_observation(obs: Observation, path) -> None:
    header = {
        "dtype": "f64",
        "layout": "col-major",
        "shape": list(obs.shape),
        "count": int(obs.indices.size),
        "delta": obs.delta,
        "one_bit": bool(obs.one_bit),
        "meta": obs.meta,
    }
    with open(path, "wb") as fh:
        fh.write(OBS_MAGIC + b"\n")
        fh.write(_header_bytes(header))
        fh.write(np.asarray(obs.indices, dtype="<i8").tobytes())
        fh.write(np.asarray(obs.values, dtype="<f8").tobytes())


def read_observation(path) -> Observation:
    with open(path, "rb") as fh:
        header = _read_header(fh, OBS_MAGIC)
        count = header.get("count")
        if not isinstance(count, int) or count < 0:
            raise FormatError("observation header needs a nonnegative count")
        idx = np.frombuffer(_read_exact(fh, 8 * count, "indices"), dtype="<i8").astype(np.int64)
        vals = np.frombuffer(_read_exact(fh, 8 * count, "values"), dtype="<f8").astype(float)
        if fh.read(1):
            raise FormatError("trailing bytes after payload")
    return Observation(tuple(header["shape"]), idx, vals, delta=header.get("delta"),
                       one_bit=bool(header.get("one_bit", False)), meta=header.get("meta") or {})


def ingest_image_stack(paths, layout: str = "auto") -> np.ndarray:
    """Load 8-bit images of equal size into a tensor scaled to ``[0, 1]``.

    ``layout`` is ``"rgb"`` (``H x W x 3``, plus a trailing frame mode when
    there are several images), ``"gray"`` (``H x W``, frames stacked along
    mode 3) or ``"auto"`` (RGB unless every image is single-channel).
    """
    from PIL import Image

    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    paths = [Path(p) for p in paths]
    if not paths:
        raise ValueError("no images given")
    if layout not in ("auto", "rgb", "gray"):
        raise ValueError("layout must be 'auto', 'rgb' or 'gray'")
    frames = []
    for p in paths:
        with Image.open(p) as im:
            if layout == "auto":
                mode = "L" if im.mode in ("L", "1") else "RGB"
            else:
                mode = "RGB" if layout == "rgb" else "L"
            frames.append((mode, np.asarray(im.convert(mode), dtype=np.uint8)))
    modes = {m for m, _ in frames}
    if layout == "auto" and len(modes) > 1:
        frames = [("RGB", np.repeat(a[..., None], 3, axis=2)) if m == "L" else (m, a) for m, a in frames]
    sizes = {a.shape for _, a in frames}
    if len(sizes) != 1:
        raise ValueError(f"images differ in size: {sorted(sizes)}")
    arrs = [a.astype(float) / 255.0 for _, a in frames]
    if len(arrs) == 1:
        return arrs[0]
    return np.stack(arrs, axis=-1)
