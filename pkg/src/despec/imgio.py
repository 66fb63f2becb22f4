"""Minimal image I/O: binary PPM (8/16 bit) and float PFM.

Loading always yields (H, W, 3) float64 in linear light: integer PPM
samples are divided by their maxval, PFM floats are taken verbatim.
Saving to an integer format rounds half up and reports how many samples
had to be clipped from above (linear-light values above 1.0).  PFM is
written as 32-bit little-endian floats, so a load/save cycle of a PFM
file is byte-exact.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    CorruptHeaderError,
    IoFailureError,
    TruncatedDataError,
    UnsupportedFormatError,
)

_WHITESPACE = b" \t\r\n\f\v"


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc


def _write_bytes(path, payload: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


class _Tokens:
    """Whitespace/comment-aware token scanner over a PPM/PFM header."""

    def __init__(self, data: bytes, start: int):
        self.data = data
        self.pos = start

    def next_token(self) -> bytes:
        data, n = self.data, len(self.data)
        i = self.pos
        while i < n:
            c = data[i:i + 1]
            if c == b"#":
                while i < n and data[i:i + 1] not in b"\r\n":
                    i += 1
            elif c in _WHITESPACE:
                i += 1
            else:
                break
        if i >= n:
            raise CorruptHeaderError("header ended unexpectedly")
        j = i
        while j < n and data[j:j + 1] not in _WHITESPACE:
            j += 1
        self.pos = j
        return data[i:j]

    def skip_single_whitespace(self) -> None:
        if self.pos >= len(self.data):
            raise CorruptHeaderError("missing raster after header")
        if self.data[self.pos:self.pos + 1] not in _WHITESPACE:
            raise CorruptHeaderError("expected whitespace before raster")
        self.pos += 1

    def int_token(self, what: str) -> int:
        tok = self.next_token()
        try:
            return int(tok)
        except ValueError as exc:
            raise CorruptHeaderError(f"bad {what}: {tok!r}") from exc

    def float_token(self, what: str) -> float:
        tok = self.next_token()
        try:
            return float(tok)
        except ValueError as exc:
            raise CorruptHeaderError(f"bad {what}: {tok!r}") from exc


def _load_ppm(data: bytes) -> np.ndarray:
    toks = _Tokens(data, 2)
    width = toks.int_token("width")
    height = toks.int_token("height")
    maxval = toks.int_token("maxval")
    if width <= 0 or height <= 0:
        raise CorruptHeaderError(f"bad dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise CorruptHeaderError(f"bad maxval {maxval}")
    toks.skip_single_whitespace()
    two_byte = maxval > 255
    need = width * height * 3 * (2 if two_byte else 1)
    raster = data[toks.pos:toks.pos + need]
    if len(raster) < need:
        raise TruncatedDataError(
            f"raster holds {len(raster)} bytes, header promises {need}"
        )
    dtype = ">u2" if two_byte else np.uint8  # network byte order for 16 bit
    samples = np.frombuffer(raster, dtype=dtype).astype(np.float64)
    return (samples / maxval).reshape(height, width, 3)


def _load_pfm(data: bytes) -> np.ndarray:
    toks = _Tokens(data, 2)
    width = toks.int_token("width")
    height = toks.int_token("height")
    scale = toks.float_token("scale")
    if width <= 0 or height <= 0:
        raise CorruptHeaderError(f"bad dimensions {width}x{height}")
    if scale == 0:
        raise CorruptHeaderError("zero scale")
    toks.skip_single_whitespace()
    need = width * height * 3 * 4
    raster = data[toks.pos:toks.pos + need]
    if len(raster) < need:
        raise TruncatedDataError(
            f"raster holds {len(raster)} bytes, header promises {need}"
        )
    dtype = "<f4" if scale < 0 else ">f4"  # scale sign encodes endianness
    samples = np.frombuffer(raster, dtype=dtype).astype(np.float64)
    img = samples.reshape(height, width, 3)
    return img[::-1].copy()  # PFM rows run bottom to top


def load(path) -> np.ndarray:
    """Read a PPM (P6) or PFM (PF) image as (H, W, 3) float64."""
    data = _read_bytes(path)
    magic = data[:2]
    if magic == b"P6":
        return _load_ppm(data)
    if magic == b"PF":
        return _load_pfm(data)
    if magic == b"Pf":
        raise UnsupportedFormatError("grayscale PFM is not supported")
    raise UnsupportedFormatError(f"unrecognized magic {magic!r}")


def _save_ppm(img: np.ndarray, path, maxval: int) -> int:
    quant = np.floor(img * maxval + 0.5)  # round half up
    clipped = int(np.count_nonzero(quant > maxval))
    quant = np.clip(quant, 0, maxval)
    dtype = ">u2" if maxval > 255 else np.uint8
    header = b"P6\n%d %d\n%d\n" % (img.shape[1], img.shape[0], maxval)
    _write_bytes(path, header + quant.astype(dtype).tobytes())
    return clipped


def _save_pfm(img: np.ndarray, path) -> int:
    header = b"PF\n%d %d\n-1.0\n" % (img.shape[1], img.shape[0])
    _write_bytes(path, header + img[::-1].astype("<f4").tobytes())
    return 0


def save(img, path, format: str | None = None) -> int:
    """Write an image; returns the count of clipped samples.

    ``format`` is "ppm8", "ppm16" or "pfm"; None infers from the
    extension (.pfm -> pfm, .ppm -> ppm16).  Only integer formats ever
    clip; values above 1.0 survive a PFM round trip untouched.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise UnsupportedFormatError(f"image shape {img.shape} is not (H, W, 3)")
    if format is None:
        lower = str(path).lower()
        if lower.endswith(".pfm"):
            format = "pfm"
        elif lower.endswith(".ppm"):
            format = "ppm16"
        else:
            raise UnsupportedFormatError(f"cannot infer format for {path}")
    if format == "pfm":
        return _save_pfm(img, path)
    if format == "ppm16":
        return _save_ppm(img, path, 65535)
    if format == "ppm8":
        return _save_ppm(img, path, 255)
    raise UnsupportedFormatError(f"unknown format {format!r}")


def save_labels(labels, path) -> None:
    """Cluster/material labels as an 8-bit PPM.

    Nonnegative labels map to evenly spread gray levels in [0, 254];
    flagged (negative) pixels become 255.
    """
    labels = np.asarray(labels)
    k = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 1
    if k > 255:
        raise UnsupportedFormatError(f"{k} labels exceed an 8-bit label map")
    levels = (np.arange(k) * (254 // max(k - 1, 1))).astype(np.uint8) if k > 1 \
        else np.zeros(1, dtype=np.uint8)
    flat = np.where(labels >= 0, levels[np.clip(labels, 0, k - 1)], 255).astype(np.uint8)
    gray = np.repeat(flat[..., None], 3, axis=-1)
    header = b"P6\n%d %d\n255\n" % (labels.shape[1], labels.shape[0])
    _write_bytes(path, header + gray.tobytes())


def load_labels(path) -> np.ndarray:
    """Read a label map written by save_labels back to compact ids.

    Distinct gray levels become label ids in increasing-gray order;
    level 255 becomes -1 (flagged).
    """
    img = load(path)
    gray = np.round(img[..., 0] * 255).astype(np.int64)
    flagged = gray == 255
    values = np.unique(gray[~flagged])
    out = np.full(gray.shape, -1, dtype=np.int32)
    for i, v in enumerate(values):
        out[gray == v] = i
    return out
