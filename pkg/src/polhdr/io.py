"""Readers and writers for PFM (float HDR) and PNG/PGM (integer LDR) images."""

from __future__ import annotations

import hashlib
import math
import re
from pathlib import Path

import numpy as np
from PIL import Image, PngImagePlugin

from .core import InvalidInputError, LdrImage, as_image

_BIT_DEPTH_KEY = "polhdr:bit_depth"


def read_pfm(path) -> np.ndarray:
    """Read a single-channel ``Pf`` file into a float64 array (top row first)."""
    with open(path, "rb") as f:
        tag = f.readline().strip()
        if tag != b"Pf":
            if tag == b"PF":
                raise InvalidInputError(f"{path}: colour PFM not supported, expected 'Pf'")
            raise InvalidInputError(f"{path}: not a PFM file")
        dims = f.readline().split()
        while not dims:
            dims = f.readline().split()
        try:
            width, height = int(dims[0]), int(dims[1])
            scale = float(f.readline().strip())
        except (ValueError, IndexError) as exc:
            raise InvalidInputError(f"{path}: malformed PFM header") from exc
        if scale == 0 or width <= 0 or height <= 0:
            raise InvalidInputError(f"{path}: malformed PFM header")
        dtype = "<f4" if scale < 0 else ">f4"
        buf = f.read(width * height * 4)
    if len(buf) != width * height * 4:
        raise InvalidInputError(f"{path}: truncated PFM data")
    # rows are stored bottom-to-top
    data = np.frombuffer(buf, dtype=dtype).reshape(height, width)[::-1]
    return as_image(data.astype(np.float64), str(path))


def write_pfm(path, image, little_endian: bool = True) -> None:
    """Write a 2-D image as a ``Pf`` file; values are stored as float32."""
    img = as_image(image)
    height, width = img.shape
    dtype = "<f4" if little_endian else ">f4"
    scale = -1.0 if little_endian else 1.0
    with open(path, "wb") as f:
        f.write(f"Pf\n{width} {height}\n{scale:.6f}\n".encode("ascii"))
        f.write(np.ascontiguousarray(img[::-1], dtype=dtype).tobytes())


def _bits_for_maxval(maxval: int) -> int:
    return max(1, math.ceil(math.log2(maxval + 1)))


def _read_pgm(path) -> LdrImage:
    raw = Path(path).read_bytes()
    # header: magic, width, height, maxval separated by whitespace/comments
    tokens = []
    pos = 0
    pattern = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)")
    for _ in range(4):
        m = pattern.match(raw, pos)
        if m is None:
            raise InvalidInputError(f"{path}: malformed PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    if tokens[0] != b"P5":
        raise InvalidInputError(f"{path}: only binary (P5) PGM is supported")
    width, height, maxval = (int(t) for t in tokens[1:])
    pos += 1  # single whitespace after maxval
    dtype = np.uint8 if maxval < 256 else ">u2"
    count = width * height
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).reshape(height, width)
    return LdrImage(data.astype(np.float64), _bits_for_maxval(maxval))


def _write_pgm(path, img: LdrImage, codes: np.ndarray) -> None:
    height, width = codes.shape
    dtype = np.uint8 if img.max_code < 256 else ">u2"
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n{img.max_code}\n".encode("ascii"))
        f.write(codes.astype(dtype).tobytes())


def read_ldr(path, bit_depth: int | None = None) -> LdrImage:
    """Read an 8/16-bit grayscale PNG or PGM.

    The bit depth is taken from ``bit_depth`` if given, else from the PGM
    maxval or the PNG's embedded tag, else from the PNG sample size.
    """
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".pnm"):
        img = _read_pgm(path)
        return img if bit_depth is None else LdrImage(img.data, bit_depth)
    with Image.open(path) as pil:
        if pil.mode not in ("L", "I;16", "I;16B", "I"):
            raise InvalidInputError(f"{path}: expected single-channel image, got mode {pil.mode}")
        tagged = pil.info.get(_BIT_DEPTH_KEY)
        data = np.asarray(pil, dtype=np.float64)
        native = 8 if pil.mode == "L" else 16
    if bit_depth is None:
        bit_depth = int(tagged) if tagged else native
    return LdrImage(data, bit_depth)


def write_ldr(path, img: LdrImage) -> None:
    """Write an :class:`LdrImage` as PNG or PGM, rounding codes to integers."""
    path = Path(path)
    codes = np.rint(img.data)
    if path.suffix.lower() in (".pgm", ".pnm"):
        _write_pgm(path, img, codes)
        return
    if img.bit_depth <= 8:
        pil = Image.fromarray(codes.astype(np.uint8), mode="L")
    else:
        pil = Image.fromarray(codes.astype(np.uint16))
    meta = PngImagePlugin.PngInfo()
    meta.add_text(_BIT_DEPTH_KEY, str(img.bit_depth))
    pil.save(path, pnginfo=meta)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()

