"""Text formats for masks and float matrices, and 8-bit netpbm images.

Masks::

    m T floor
    <m lines of m values>        frame 0
    <blank line>
    <m lines of m values>        frame 1
    ...

Matrices::

    rows cols
    <rows lines of cols values>

Values are written with ``repr`` (shortest round-trip decimal), so
``read(write(x))`` is bit-exact.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .coherence import CodeMask
from .errors import DimensionError, InvalidParameterError, ParseError, ValidationError
from .sensing import FrameStack, Snapshot

_TOKEN = re.compile(rb"\S+")


def _read_bytes(path) -> bytes:
    return Path(path).read_bytes()


def _tokens(data: bytes):
    return [(m.group().decode("ascii", "replace"), m.start()) for m in _TOKEN.finditer(data)]


def _int(tok, what):
    text, offset = tok
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"expected integer {what}, found {text!r}", offset) from None
    if value < 0:
        raise ParseError(f"{what} must be non-negative, found {value}", offset)
    return value


def _floats(tokens, count, end):
    if len(tokens) != count:
        offset = tokens[count][1] if len(tokens) > count else end
        raise ParseError(f"expected {count} values, found {len(tokens)}", offset)
    out = np.empty(count)
    for i, (text, offset) in enumerate(tokens):
        try:
            out[i] = float(text)
        except ValueError:
            raise ParseError(f"invalid number {text!r}", offset) from None
    return out


def _fmt(row) -> str:
    return " ".join(repr(float(v)) for v in row)


def write_mask(mask: CodeMask, path) -> None:
    m, T = mask.side, mask.frames
    blocks = ["\n".join(_fmt(row) for row in frame) for frame in mask.values]
    Path(path).write_text(f"{m} {T} {mask.floor!r}\n" + "\n\n".join(blocks) + "\n")


def read_mask(path) -> CodeMask:
    data = _read_bytes(path)
    toks = _tokens(data)
    if len(toks) < 3:
        raise ParseError("mask header needs 'm T floor'", len(data))
    m = _int(toks[0], "side")
    T = _int(toks[1], "frame count")
    if m < 1 or T < 1:
        raise ParseError(f"invalid mask dimensions m={m}, T={T}", toks[0][1])
    try:
        floor = float(toks[2][0])
    except ValueError:
        raise ParseError(f"invalid floor {toks[2][0]!r}", toks[2][1]) from None
    values = _floats(toks[3:], T * m * m, len(data)).reshape(T, m, m)
    try:
        return CodeMask(values, floor=floor)
    except InvalidParameterError as err:
        raise ValidationError(str(err)) from None


def write_matrix(matrix, path) -> None:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    rows, cols = a.shape
    body = "".join(_fmt(row) + "\n" for row in a)
    Path(path).write_text(f"{rows} {cols}\n" + body)


def read_matrix(path) -> np.ndarray:
    data = _read_bytes(path)
    toks = _tokens(data)
    if len(toks) < 2:
        raise ParseError("matrix header needs 'rows cols'", len(data))
    rows = _int(toks[0], "row count")
    cols = _int(toks[1], "column count")
    return _floats(toks[2:], rows * cols, len(data)).reshape(rows, cols)


def write_snapshot(snap: Snapshot, path) -> None:
    write_matrix(snap.y, path)


def read_snapshot(path) -> Snapshot:
    return Snapshot(read_matrix(path))


# netpbm

def _header(data: bytes):
    """Parse a P5/P6 header; returns (magic, width, height, maxval, payload offset)."""
    pos = 0
    fields = []
    n = len(data)
    while len(fields) < 4:
        while pos < n and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                nl = data.find(b"\n", pos)
                pos = n if nl < 0 else nl + 1
            else:
                pos += 1
        if pos >= n:
            raise ParseError("truncated header", pos)
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        fields.append((data[start:pos].decode("ascii", "replace"), start))
    magic = fields[0][0]
    if magic not in ("P5", "P6"):
        raise ParseError(f"unsupported netpbm magic {magic!r}", 0)
    width = _int(fields[1], "width")
    height = _int(fields[2], "height")
    maxval = _int(fields[3], "maxval")
    if width < 1 or height < 1:
        raise ParseError(f"empty image {width}x{height}", fields[1][1])
    if not 1 <= maxval <= 255:
        raise ParseError(f"only 8-bit images are supported, maxval={maxval}", fields[3][1])
    if pos >= n or not data[pos:pos + 1].isspace():
        raise ParseError("missing whitespace after header", pos)
    return magic, width, height, maxval, pos + 1


def read_image(path) -> np.ndarray:
    """Read a binary PGM or PPM as floats in ``[0, 1]``.

    PGM gives shape ``(H, W)``; PPM gives ``(3, H, W)`` in R, G, B order.
    """
    data = _read_bytes(path)
    magic, w, h, maxval, offset = _header(data)
    planes = 1 if magic == "P5" else 3
    need = w * h * planes
    payload = data[offset:offset + need]
    if len(payload) < need:
        raise ParseError(f"truncated payload: expected {need} bytes, found {len(payload)}",
                         offset + len(payload))
    pix = np.frombuffer(payload, dtype=np.uint8).astype(float)
    if pix.max(initial=0) > maxval:
        bad = int(np.argmax(pix > maxval))
        raise ParseError(f"sample exceeds maxval {maxval}", offset + bad)
    pix /= maxval
    if planes == 1:
        return pix.reshape(h, w)
    return np.ascontiguousarray(pix.reshape(h, w, 3).transpose(2, 0, 1))


def to_bytes(image) -> np.ndarray:
    """Quantize ``[0, 1]`` floats to 8-bit levels (values outside are clipped)."""
    a = np.asarray(image, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidParameterError("image contains non-finite values")
    return np.round(np.clip(a, 0.0, 1.0) * 255).astype(np.uint8)


def write_image(image, path) -> None:
    """Write ``(H, W)`` as PGM or ``(3, H, W)`` as PPM, 8-bit."""
    a = np.asarray(image)
    if a.ndim == 2:
        magic, h, w = b"P5", *a.shape
        payload = to_bytes(a).tobytes()
    elif a.ndim == 3 and a.shape[0] == 3:
        magic, h, w = b"P6", a.shape[1], a.shape[2]
        payload = to_bytes(a).transpose(1, 2, 0).tobytes()
    else:
        raise DimensionError(f"expected (H, W) or (3, H, W) image, got {a.shape}")
    Path(path).write_bytes(magic + f"\n{w} {h}\n255\n".encode() + payload)


def read_frames(paths) -> FrameStack:
    """Grayscale frames from PGM files, in the given order."""
    frames = []
    for p in paths:
        img = read_image(p)
        if img.ndim != 2:
            raise DimensionError(f"{p}: expected a grayscale frame")
        frames.append(img)
    if len({f.shape for f in frames}) > 1:
        raise DimensionError("frames differ in size")
    return FrameStack(np.stack(frames))


def write_snapshot_preview(snap: Snapshot, T: int, path) -> None:
    """PGM view of a snapshot, rescaling ``[0, T]`` to ``[0, 255]``."""
    write_image(np.asarray(snap.y) / T, path)
