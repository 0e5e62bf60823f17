"""Binary PGM (P5) reading and writing.

This is the only codec the pipeline requires; every fixture and every
pattern file on disk is an 8-bit P5. Other formats (PNG, JPEG) are decoded
through Pillow when it is installed, behind the same grayscale interface.
"""

import numpy as np

from .errors import DataError


def read_pgm(path):
    """Read a binary (P5) PGM into an HxW uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()

    fields = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(data):
            raise DataError(f"{path}: truncated PGM header")
        ch = data[pos : pos + 1]
        if ch == b"#":  # comment runs to end of line
            eol = data.find(b"\n", pos)
            pos = len(data) if eol < 0 else eol + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            fields.append(data[pos:end])
            pos = end
    pos += 1  # single whitespace byte after maxval

    if fields[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise DataError(f"{path}: non-numeric PGM header field") from None
    if width < 1 or height < 1:
        raise DataError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise DataError(f"{path}: unsupported PGM maxval {maxval} (8-bit only)")

    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise DataError(f"{path}: PGM raster short ({len(raster)} of {width * height} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path, img):
    """Write an HxW uint8 array as binary PGM."""
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise DataError("write_pgm expects a 2-D uint8 array")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def load_gray(path):
    """Load any supported image as grayscale uint8.

    PGM is decoded natively; anything else goes through Pillow if present.
    """
    path = str(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return read_pgm(path)
    try:
        from PIL import Image
    except ImportError:
        raise DataError(
            f"{path}: only PGM (P5) is supported without Pillow installed"
        ) from None
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    from .geometry import to_gray

    return to_gray(arr)
