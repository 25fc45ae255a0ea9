"""Image file IO: 8-bit PNG for color/masks, PFM for float depth maps."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import SchemaError


def write_png(path, image: np.ndarray) -> None:
    """Write an (H,W,3) float image in [0,1] as 8-bit PNG (round(255*x))."""
    arr = np.rint(255.0 * np.clip(image, 0.0, 1.0)).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def read_png(path) -> np.ndarray:
    """Read a PNG as (H,W,3) float in [0,1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def write_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


def read_mask_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr >= 128


def write_pfm(path, data: np.ndarray) -> None:
    """Write an (H,W) float map as little-endian grayscale PFM (scale -1.0).

    +inf values are stored as 0. PFM rows run bottom-to-top.
    """
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise SchemaError("PFM writer expects a 2D array")
    out = np.where(np.isinf(data), np.float32(0.0), data)
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{data.shape[1]} {data.shape[0]}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(out[::-1].astype("<f4").tobytes())


def read_pfm(path, zero_to_inf: bool = True) -> np.ndarray:
    """Read a grayscale PFM; zeros are restored to +inf by default."""
    with open(path, "rb") as f:
        if f.readline().strip() != b"Pf":
            raise SchemaError("not a grayscale PFM file")
        w, h = (int(v) for v in f.readline().split())
        scale = float(f.readline())
        dt = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(w * h * 4), dtype=dt).reshape(h, w)[::-1]
    data = data.astype(np.float64)
    if zero_to_inf:
        data = np.where(data == 0.0, np.inf, data)
    return data
