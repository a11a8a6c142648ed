"""Binary PNM images: P6 (RGB) read/write and P5 (grayscale) write

Images are exchanged as float arrays in [0, 1]: (3, H, W) for color,
(H, W) for grayscale. Only 8-bit files (max value 255) are handled.
"""
import numpy as np


MAX_VALUE = 255


class PnmFormatError(ValueError):
    """File is not a well-formed 8-bit binary PNM"""


def _read_header(data, path):
    """Parse magic, width, height and max value; skip '#' comments

    Returns:
        (magic, width, height, max_value, offset of the first pixel byte)
    """
    fields = []
    pos = 0
    while len(fields) < 4:
        # Skip whitespace and comment lines between tokens
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise PnmFormatError(f"{path}: unterminated comment in header")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PnmFormatError(f"{path}: truncated header")
        fields.append(data[start:pos])
    # Exactly one whitespace byte separates the header from the raster
    pos += 1

    magic = fields[0].decode("ascii", errors="replace")
    try:
        width, height, max_value = (int(f) for f in fields[1:])
    except ValueError:
        raise PnmFormatError(f"{path}: non-numeric size or max value in header") from None
    if width < 1 or height < 1:
        raise PnmFormatError(f"{path}: invalid size {width}x{height}")
    if max_value != MAX_VALUE:
        raise PnmFormatError(f"{path}: max value {max_value} unsupported (need {MAX_VALUE})")
    return magic, width, height, max_value, pos


def read_ppm(path):
    """Load a binary P6 file as a (3, H, W) float array in [0, 1]

    Raises:
        PnmFormatError: If the file is not an 8-bit P6 image
        OSError: If the file cannot be read
    """
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P6"):
        raise PnmFormatError(f"{path}: not a binary PPM (P6) file")
    _, width, height, _, offset = _read_header(data, path)

    expected = width * height * 3
    raster = data[offset:offset + expected]
    if len(raster) != expected:
        raise PnmFormatError(f"{path}: expected {expected} pixel bytes, found {len(raster)}")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return img.transpose(2, 0, 1).astype(np.float64) / MAX_VALUE


def _to_bytes(values):
    return np.clip(np.rint(np.asarray(values) * MAX_VALUE), 0, MAX_VALUE).astype(np.uint8)


def write_ppm(path, image):
    """Write a (3, H, W) image in [0, 1] as binary P6"""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"PPM image must have shape (3, H, W), got {image.shape}")
    _, height, width = image.shape
    raster = _to_bytes(image).transpose(1, 2, 0)
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n{MAX_VALUE}\n".encode("ascii"))
        f.write(np.ascontiguousarray(raster).tobytes())


def write_pgm(path, image):
    """Write an (H, W) image in [0, 1] as binary P5"""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"PGM image must have shape (H, W), got {image.shape}")
    height, width = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n{MAX_VALUE}\n".encode("ascii"))
        f.write(np.ascontiguousarray(_to_bytes(image)).tobytes())


def read_pgm(path):
    """Load a binary P5 file as an (H, W) float array in [0, 1]"""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise PnmFormatError(f"{path}: not a binary PGM (P5) file")
    _, width, height, _, offset = _read_header(data, path)
    raster = data[offset:offset + width * height]
    if len(raster) != width * height:
        raise PnmFormatError(f"{path}: expected {width * height} pixel bytes, found {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width) / MAX_VALUE
