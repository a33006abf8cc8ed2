"""Binary portable pixmap (P6, 8-bit) reading and writing."""

import numpy as np

from rfcnn.errors import FormatError


def write_ppm(path, image):
    """Write ``image`` ([3,H,W] floats in [0,1] or [H,W,3] uint8) as P6."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an RGB image, got shape {arr.shape}")
    h, w, _ = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(arr).tobytes())


def _tokens(data, count):
    """First ``count`` header tokens of a PNM file plus the payload offset."""
    out = []
    i = 0
    n = len(data)
    while len(out) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise FormatError("truncated PNM header")
        out.append(data[start:i])
    # exactly one whitespace byte separates the header from the raster
    return out, i + 1


def read_ppm_bytes(path):
    """Return the raw ``[H,W,3]`` uint8 raster of a P6 file."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks, offset = _tokens(data, 4)
    if toks[0] != b"P6":
        raise FormatError(f"{path}: not a binary PPM (magic {toks[0]!r})")
    try:
        w, h, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PPM header") from exc
    if w <= 0 or h <= 0 or maxval != 255:
        raise FormatError(f"{path}: unsupported PPM geometry {w}x{h} maxval {maxval}")
    raster = data[offset:offset + w * h * 3]
    if len(raster) != w * h * 3:
        raise FormatError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)


def read_ppm(path):
    """Read a P6 file as a ``[3,H,W]`` float64 array in [0,1]."""
    return read_ppm_bytes(path).transpose(2, 0, 1).astype(np.float64) / 255.0
