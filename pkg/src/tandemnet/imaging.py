"""Image decoding and the preprocessing chain.

Images are channel-major [3,H,W] float64 tensors holding 0..255 values.
The only on-disk format is binary PPM (P6, maxval 255): trivially bit-exact
and free of codec dependencies.

Preprocessing follows a fixed recipe: stretch-resize to a square (aspect
ratio is not preserved), subtract a per-pixel mean image computed from
training data only, then cut fixed windows.  Training uses the four corner
crops plus the center crop and their horizontal mirrors (10 windows); test
uses the single center crop.
"""

from __future__ import annotations

import numpy as np

TRAIN = "train"
TEST = "test"


# ---------------------------------------------------------------------------
# PPM


def load_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != b"P6":
        raise ValueError(f"{path}: bad magic {raw[:2]!r} at byte 0, expected b'P6'")
    pos = 2
    fields = []
    while len(fields) < 3:
        token, pos = _next_token(raw, pos, path)
        fields.append(token)
    width, height, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError(f"{path}: maxval {maxval} unsupported, need 255")
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    need = width * height * 3
    payload = raw[pos : pos + need]
    if len(payload) < need:
        raise ValueError(
            f"{path}: truncated payload at byte {pos + len(payload)}, "
            f"expected {need} pixel bytes"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return pixels.transpose(2, 0, 1).astype(np.float64)


def _next_token(raw: bytes, pos: int, path) -> tuple[bytes, int]:
    while pos < len(raw):
        ch = raw[pos : pos + 1]
        if ch == b"#":  # comment runs to end of line
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(raw) and not raw[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError(f"{path}: truncated header at byte {pos}")
    token = raw[start:pos]
    if not token.isdigit():
        raise ValueError(f"{path}: bad header token {token!r} at byte {start}")
    return token, pos


def save_ppm(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"image must be [3,H,W], got shape {tuple(img.shape)}")
    if img.min() < 0 or img.max() > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    rounded = np.rint(img)
    if not np.array_equal(rounded, img):
        raise ValueError("pixel values must be integral for bit-exact storage")
    _, h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rounded.astype(np.uint8).transpose(1, 2, 0).tobytes())


# ---------------------------------------------------------------------------
# preprocessing


def resize_to(img: np.ndarray, side: int) -> np.ndarray:
    """Bilinear stretch to side x side; aspect ratio is not preserved."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[1] < 1 or img.shape[2] < 1:
        raise ValueError(f"cannot resize empty image of shape {tuple(img.shape)}")
    if side < 1:
        raise ValueError(f"target side must be >= 1, got {side}")
    _, h, w = img.shape
    ys = _source_coords(h, side)
    xs = _source_coords(w, side)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[None, :, None]
    fx = (xs - x0)[None, None, :]
    top = img[:, y0, :][:, :, x0] * (1 - fx) + img[:, y0, :][:, :, x1] * fx
    bottom = img[:, y1, :][:, :, x0] * (1 - fx) + img[:, y1, :][:, :, x1] * fx
    return top * (1 - fy) + bottom * fy


def _source_coords(n_in: int, n_out: int) -> np.ndarray:
    # pixel-center alignment; identity when sizes match
    coords = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    return np.clip(coords, 0.0, n_in - 1)


def compute_mean_image(frames, side: int) -> np.ndarray:
    """Per-pixel mean of the resized images named by ``frames``.

    Accepts frame records (anything with an ``image_path``) or plain paths.
    Call this on training folds only; the result is what gets subtracted at
    both train and test time.
    """
    total = None
    count = 0
    for frame in frames:
        path = getattr(frame, "image_path", frame)
        resized = resize_to(load_ppm(path), side)
        total = resized if total is None else total + resized
        count += 1
    if count == 0:
        raise ValueError("cannot compute a mean image from zero frames")
    return total / count


def subtract_mean(img: np.ndarray, mean: np.ndarray) -> np.ndarray:
    if img.shape != mean.shape:
        raise ValueError(
            f"image shape {tuple(img.shape)} does not match mean shape {tuple(mean.shape)}"
        )
    return img - mean


def crop_windows(img: np.ndarray, crop: int, mode: str) -> list[np.ndarray]:
    """Cut crop x crop windows; 10 mirrored corner/center crops for training,
    the single center crop for test."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[1] != img.shape[2]:
        raise ValueError(f"expected a square [C,S,S] image, got shape {tuple(img.shape)}")
    side = img.shape[1]
    if crop > side:
        raise ValueError(f"crop {crop} exceeds image side {side}")
    if crop < 1:
        raise ValueError(f"crop must be >= 1, got {crop}")
    center = (side - crop) // 2
    if mode == TEST:
        return [np.ascontiguousarray(img[:, center : center + crop, center : center + crop])]
    if mode != TRAIN:
        raise ValueError(f"mode must be {TRAIN!r} or {TEST!r}, got {mode!r}")
    far = side - crop
    offsets = [(0, 0), (0, far), (far, 0), (far, far), (center, center)]
    windows = [
        np.ascontiguousarray(img[:, dy : dy + crop, dx : dx + crop]) for dy, dx in offsets
    ]
    windows += [np.ascontiguousarray(w[:, :, ::-1]) for w in windows]
    return windows
