"""Binary PPM (P6) and PGM (P5) image I/O, maxval 255.

Pixel values live in [-1, 1] everywhere else in this package; on disk a
byte b represents v = b/127.5 - 1 and writing quantizes with round-half-up.
Quantize-then-write-then-read is an exact identity.  Header comments are
supported and used to carry a schema_version marker.
"""

from __future__ import annotations

import os
from typing import Sequence, Union

import numpy as np

SCHEMA_COMMENT = "schema_version=1"


class ImageFormatError(ValueError):
    """File is not a well-formed binary PPM/PGM in the supported profile."""


def quantize(image: np.ndarray) -> np.ndarray:
    """[-1,1] floats to uint8 via round-half-up, clamped."""
    scaled = np.floor((np.asarray(image, dtype=np.float64) + 1.0) * 127.5 + 0.5)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def dequantize(raw: np.ndarray) -> np.ndarray:
    """uint8 back to [-1,1] float32."""
    return (raw.astype(np.float32) / np.float32(127.5)) - np.float32(1.0)


def write_image(path: Union[str, os.PathLike], image: np.ndarray,
                comments: Sequence[str] = (SCHEMA_COMMENT,)) -> None:
    """Write a (1,H,W) array as PGM or a (3,H,W) array as PPM."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ImageFormatError(f"expected (1,H,W) or (3,H,W), got {img.shape}")
    c, h, w = img.shape
    magic = b"P5" if c == 1 else b"P6"
    header = [magic]
    for comment in comments:
        header.append(b"# " + comment.encode("ascii"))
    header.append(f"{w} {h}".encode("ascii"))
    header.append(b"255")
    payload = quantize(img).transpose(1, 2, 0).tobytes()
    with open(path, "wb") as fh:
        fh.write(b"\n".join(header) + b"\n")
        fh.write(payload)


def _read_header_tokens(fh, count: int) -> list[bytes]:
    """Read whitespace-separated header tokens, skipping # comments."""
    tokens = []
    while len(tokens) < count:
        ch = fh.read(1)
        if not ch:
            raise ImageFormatError("truncated header")
        if ch.isspace():
            continue
        if ch == b"#":
            while ch not in (b"\n", b"\r", b""):
                ch = fh.read(1)
            continue
        token = ch
        while True:
            ch = fh.read(1)
            if not ch or ch.isspace():
                break
            if ch == b"#":  # comment glued to a token ends it
                while ch not in (b"\n", b"\r", b""):
                    ch = fh.read(1)
                break
            token += ch
        tokens.append(token)
    return tokens


def read_image(path: Union[str, os.PathLike]) -> np.ndarray:
    """Read a binary PPM/PGM into a float32 (C,H,W) array in [-1,1]."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
        if magic == b"P5":
            channels = 1
        elif magic == b"P6":
            channels = 3
        else:
            raise ImageFormatError(f"unsupported magic {magic!r} (want P5 or P6)")
        try:
            w_tok, h_tok, maxval_tok = _read_header_tokens(fh, 3)
            w, h, maxval = int(w_tok), int(h_tok), int(maxval_tok)
        except ValueError as exc:
            raise ImageFormatError(f"malformed header: {exc}") from None
        if w < 1 or h < 1:
            raise ImageFormatError(f"bad dimensions {w}x{h}")
        if maxval != 255:
            raise ImageFormatError(f"unsupported maxval {maxval} (want 255)")
        # exactly one whitespace byte separates the header from the payload;
        # _read_header_tokens already consumed it while ending the maxval token
        payload = fh.read(w * h * channels)
        if len(payload) != w * h * channels:
            raise ImageFormatError(
                f"truncated payload: want {w * h * channels} bytes, got {len(payload)}")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, channels)
    return dequantize(raw.transpose(2, 0, 1))
