"""Image file I/O: PFM float maps and 8/16-bit grayscale PNG.

PFM files are written grayscale ("Pf"), little-endian, scale -1.0, rows
bottom-to-top per the format convention.  PNG intensities are 16-bit;
masks are 8-bit 0/255.
"""

import numpy as np
from PIL import Image

from .errors import PolarimetryError


def write_pfm(path, image):
    """Write a 2D float array as a grayscale little-endian PFM."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise PolarimetryError("only grayscale PFM is supported")
    data = np.flipud(img).astype("<f4")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{img.shape[1]} {img.shape[0]}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(data.tobytes())


def read_pfm(path):
    """Read a grayscale PFM into a float64 (H, W) array."""
    with open(path, "rb") as f:
        header = f.readline().rstrip()
        if header != b"Pf":
            raise PolarimetryError(f"not a grayscale PFM file: {path}")
        dims = f.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(width * height * 4), dtype=dtype)
    if data.size != width * height:
        raise PolarimetryError(f"truncated PFM file: {path}")
    return np.flipud(data.reshape(height, width)).astype(np.float64)


def write_png16(path, image):
    """Write a uint16 (H, W) array as a 16-bit grayscale PNG."""
    arr = np.asarray(image)
    if arr.dtype != np.uint16:
        raise PolarimetryError("write_png16 expects uint16 data")
    Image.fromarray(arr).save(path, format="PNG")


def read_png(path):
    """Read an 8- or 16-bit grayscale PNG as uint8/uint16 (H, W)."""
    with Image.open(path) as im:
        if im.mode == "I;16":
            return np.asarray(im, dtype=np.uint16)
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        if im.mode == "I":
            return np.asarray(im, dtype=np.int32).astype(np.uint16)
        raise PolarimetryError(f"unsupported PNG mode {im.mode!r} in {path}")


def write_mask(path, mask):
    """Write a boolean mask as an 8-bit PNG with 0/255 values."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def read_mask(path):
    return read_png(path) > 0
