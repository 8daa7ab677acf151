"""8-bit PNG/PGM reading and writing for images and binary masks."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

__all__ = ["read_rgb", "read_mask", "write_mask", "to_network_input"]

MASK_THRESHOLD = 128


def _open(path) -> Image.Image:
    with Image.open(Path(path)) as img:
        img.load()
        return img


def read_rgb(path) -> np.ndarray:
    """``(H, W, 3)`` uint8 array from an 8-bit RGB image (alpha is dropped)."""
    img = _open(path)
    if img.mode == "RGBA":
        img = img.convert("RGB")
    if img.mode != "RGB":
        raise ValueError(f"{path}: expected an 8-bit RGB image, got mode {img.mode!r}")
    return np.asarray(img, dtype=np.uint8)


def read_mask(path) -> np.ndarray:
    """Binary ``(H, W)`` uint8 mask; grey levels >= 128 count as foreground."""
    img = _open(path)
    if img.mode == "1":
        return np.asarray(img, dtype=np.uint8)
    if img.mode != "L":
        raise ValueError(f"{path}: expected a single-channel 8-bit mask, got mode {img.mode!r}")
    return (np.asarray(img) >= MASK_THRESHOLD).astype(np.uint8)


def write_mask(mask, path) -> None:
    """Write a 0/1 mask as 0/255 greyscale; format follows the suffix (.png or .pgm)."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    suffix = Path(path).suffix.lower()
    fmt = {".png": "PNG", ".pgm": "PPM"}.get(suffix)
    if fmt is None:
        raise ValueError(f"unsupported mask format {suffix!r}; use .png or .pgm")
    Image.fromarray((arr * 255).astype(np.uint8), mode="L").save(path, format=fmt)


def to_network_input(rgb: np.ndarray) -> np.ndarray:
    """``(H, W, 3)`` uint8 to ``(3, H, W)`` float32 in [0, 1] (x / 255, no mean shift)."""
    return np.ascontiguousarray(np.transpose(rgb, (2, 0, 1)), dtype=np.float32) / np.float32(255)
