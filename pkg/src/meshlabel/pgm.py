"""Binary PGM (P5) reading and writing, 8- and 16-bit."""

import numpy as np


def write_pgm(path, image, maxval=None):
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM images are 2-D")
    if maxval is None:
        maxval = 255 if image.dtype == np.uint8 else 65535
    if not 0 < maxval < 65536:
        raise ValueError(f"invalid maxval {maxval}")
    if image.size and (image.min() < 0 or image.max() > maxval):
        raise ValueError("pixel values outside [0, maxval]")
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(image.astype(dtype).tobytes())


def _tokens(data):
    """Yield (token, end_offset) for PGM header fields, skipping comments."""
    pos = 0
    while True:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        yield data[start:pos], pos


def read_pgm(path):
    """Return ``(image, maxval)``; image is uint8 or uint16."""
    with open(path, "rb") as fh:
        data = fh.read()
    tok = _tokens(data)
    try:
        magic, _ = next(tok)
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
        w, _ = next(tok)
        h, _ = next(tok)
        maxval, end = next(tok)
        w, h, maxval = int(w), int(h), int(maxval)
    except (StopIteration, ValueError) as exc:
        raise ValueError(f"{path}: bad PGM header: {exc}") from None
    start = end + 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * dtype.itemsize
    if len(data) - start < need:
        raise ValueError(f"{path}: PGM pixel data truncated")
    img = np.frombuffer(data, dtype=dtype, count=w * h, offset=start).reshape(h, w)
    return img.astype(np.uint16 if maxval > 255 else np.uint8), maxval
