"""PGM I/O, ground-truth loading, noise injection and synthetic stereo pairs."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ParseError, ShapeMismatch, Unsupported

_WS = b" \t\r\n\v\f"


@dataclass(eq=False)
class GrayImage:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise InvalidInput("image must be a non-empty 2-d array")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise InvalidInput("pixel values must be in [0, 255]")
            px = px.astype(np.uint8)
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)


def _tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and (data[pos] in _WS or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise ParseError("unexpected end of header", pos)
        out.append((data[start:pos], start))
    return out, pos


def _int_token(tok, name):
    raw, offset = tok
    try:
        value = int(raw)
    except ValueError:
        raise ParseError(f"bad {name} {raw!r}", offset) from None
    if value <= 0:
        raise ParseError(f"{name} must be positive, got {value}", offset)
    return value


def parse_pgm(data: bytes) -> GrayImage:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ParseError(f"not a P2/P5 PGM (magic {magic!r})", 0)
    toks, pos = _tokens(data, 3, 2)
    width = _int_token(toks[0], "width")
    height = _int_token(toks[1], "height")
    maxval = _int_token(toks[2], "maxval")
    if maxval > 255:
        raise Unsupported(f"maxval {maxval} > 255 (16-bit PGM) is not supported")
    n = width * height
    if magic == b"P5":
        if pos >= len(data) or data[pos] not in _WS:
            raise ParseError("missing whitespace after maxval", pos)
        pos += 1
        if len(data) - pos < n:
            raise ParseError(
                f"pixel data truncated: need {n} bytes, have {len(data) - pos}", len(data)
            )
        px = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
    else:
        fields = data[pos:].split()
        if len(fields) < n:
            raise ParseError(f"pixel data truncated: need {n} values, have {len(fields)}", len(data))
        try:
            px = np.array([int(f) for f in fields[:n]], dtype=np.int64)
        except ValueError:
            raise ParseError("non-integer pixel value", pos) from None
    if px.max() > maxval:
        raise ParseError(f"pixel value {int(px.max())} exceeds maxval {maxval}", pos)
    return GrayImage(px.reshape(height, width).astype(np.uint8))


def load_pgm(path) -> GrayImage:
    with open(path, "rb") as f:
        data = f.read()
    try:
        return parse_pgm(data)
    except ParseError as exc:
        raise ParseError(f"{os.fspath(path)}: {exc.args[0]}") from exc


def format_pgm(image: GrayImage, ascii: bool = False) -> bytes:
    h, w = image.pixels.shape
    if ascii:
        rows = "\n".join(" ".join(str(v) for v in row) for row in image.pixels)
        return f"P2 {w} {h} 255\n{rows}\n".encode()
    return f"P5 {w} {h} 255\n".encode() + image.pixels.tobytes()


def save_pgm(image: GrayImage, path, ascii: bool = False):
    with open(path, "wb") as f:
        f.write(format_pgm(image, ascii=ascii))


@dataclass(eq=False)
class GroundTruth:
    disparities: np.ndarray
    valid_mask: np.ndarray
    scale: int = 1
    clamped: int = 0

    def __post_init__(self):
        self.disparities = np.asarray(self.disparities, dtype=np.int64)
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if self.disparities.shape != self.valid_mask.shape:
            raise ShapeMismatch("disparities and valid_mask shapes differ")


def load_ground_truth(path, scale: int, n_labels: int) -> GroundTruth:
    """Scaled disparity PGM; raw 0 marks an unknown pixel, overflow is clamped."""
    if scale < 1:
        raise InvalidInput("scale must be a positive integer")
    raw = load_pgm(path).pixels.astype(np.int64)
    valid = raw != 0
    disp = np.floor(raw / scale + 0.5).astype(np.int64)
    over = valid & (disp > n_labels - 1)
    disp[over] = n_labels - 1
    return GroundTruth(disp, valid, scale=scale, clamped=int(over.sum()))


def add_gaussian_noise(image: GrayImage, sigma: float, seed) -> GrayImage:
    if sigma < 0:
        raise InvalidInput("sigma must be >= 0")
    if sigma == 0:
        return GrayImage(image.pixels.copy())
    rng = np.random.default_rng(seed)
    noisy = image.pixels + rng.normal(0.0, sigma, size=image.pixels.shape)
    return GrayImage(np.clip(np.rint(noisy), 0, 255).astype(np.uint8))


@dataclass(frozen=True)
class ShiftRegion:
    """Rectangle ``[top, bottom) x [left, right)`` of the left image at ``disparity``."""

    top: int
    left: int
    bottom: int
    right: int
    disparity: int


def centered_region(width: int, height: int, disparity: int) -> ShiftRegion:
    return ShiftRegion(height // 4, width // 4, height - height // 4, width - width // 4, disparity)


def make_random_dot_stereogram(width: int, height: int, n_labels: int, shift_region, seed,
                               levels=(64, 192)):
    """Random binary-dot pair with a fronto-parallel square at a known disparity.

    Left pixel ``(r, c)`` at disparity ``d`` is seen at ``(r, c - d)`` in the
    right image. Background pixels whose match is hidden by the shifted
    square are marked invalid in the ground truth.
    """
    reg = shift_region if isinstance(shift_region, ShiftRegion) else ShiftRegion(*shift_region)
    s = reg.disparity
    if not 0 <= s < n_labels <= width:
        raise InvalidInput(f"need 0 <= disparity < D <= width; got {s}, {n_labels}, {width}")
    if not (0 <= reg.top < reg.bottom <= height and 0 <= reg.left < reg.right <= width):
        raise InvalidInput(f"region {reg} outside a {width}x{height} image")
    if reg.left - s < 0:
        raise InvalidInput("shifted region leaves the right image")
    rng = np.random.default_rng(seed)
    lo, hi = levels
    left = np.where(rng.random((height, width)) < 0.5, lo, hi).astype(np.uint8)
    right = left.copy()
    rows = slice(reg.top, reg.bottom)
    if s > 0:
        # background uncovered in the right view: fresh dots nobody in the left sees
        right[rows, reg.right - s:reg.right] = np.where(
            rng.random((reg.bottom - reg.top, s)) < 0.5, lo, hi
        )
        right[rows, reg.left - s:reg.right - s] = left[rows, reg.left:reg.right]
    gt = np.zeros((height, width), dtype=np.int64)
    gt[rows, reg.left:reg.right] = s
    valid = np.ones((height, width), dtype=bool)
    if s > 0:
        valid[rows, reg.left - s:reg.left] = False
    return GrayImage(left), GrayImage(right), GroundTruth(gt, valid)
