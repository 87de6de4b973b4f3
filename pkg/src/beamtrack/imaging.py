"""Synthetic camera frames and the spot-locating pipeline.

Plane coordinates have their origin at the frame centre. Pixel ``i`` (column)
covers plane x in ``[(i - w/2) / px_per_m, (i + 1 - w/2) / px_per_m)`` and is
sampled at its centre; rows map to plane y the same way.

Pipeline: grayscale -> bilinear resize to 100x100 -> threshold at a fraction
of the peak -> morphological opening -> largest connected blob ->
intensity-weighted centroid.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

__all__ = [
    "Frame",
    "Blob",
    "PipelineConfig",
    "render_frame",
    "preprocess",
    "adaptive_threshold",
    "morph_open",
    "detect_blob",
    "locate_spot",
    "pixel_to_plane",
    "plane_to_pixel",
    "write_pgm",
    "read_pgm",
]

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Frame:
    pixels: np.ndarray      # (height, width), values in [0, 255]
    px_per_m: float

    def __post_init__(self):
        if self.pixels.ndim != 2 or 0 in self.pixels.shape:
            raise ValueError("frame must be a non-empty 2-D grid")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Blob:
    cx: float
    cy: float
    area: int


@dataclass(frozen=True)
class PipelineConfig:
    resize_to: int = 100
    threshold_frac: float = 0.20
    open_kernel: int = 1          # radius; 1 -> 3x3 square
    min_area: int = 4
    noise_sigma: float = 2.0
    native_px: int = 200          # rendered frame is native_px square
    window_m: float = 0.24        # plane extent covered by the native frame
    min_peak: float = 20.0        # resampled peak below this is noise only: no spot

    def __post_init__(self):
        if not 0 < self.threshold_frac < 1:
            raise ValueError("threshold_frac must lie in (0, 1)")
        if self.min_area < 1:
            raise ValueError("min_area must be at least 1")
        if self.open_kernel < 0:
            raise ValueError("open_kernel must be non-negative")
        if self.resize_to < 1 or self.native_px < 1 or not self.window_m > 0:
            raise ValueError("frame geometry must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.min_peak < 0:
            raise ValueError("min_peak must be non-negative")

    @property
    def native_px_per_m(self) -> float:
        return self.native_px / self.window_m


def pixel_to_plane(col, row, width: int, height: int, px_per_m: float):
    return (col + 0.5 - width / 2) / px_per_m, (row + 0.5 - height / 2) / px_per_m


def plane_to_pixel(x, y, width: int, height: int, px_per_m: float):
    return x * px_per_m + width / 2 - 0.5, y * px_per_m + height / 2 - 0.5


def render_frame(spot_center, spot_sigma: float, peak: float,
                 cfg: PipelineConfig = PipelineConfig(), rng_seed=None) -> Frame:
    """Gaussian spot plus additive Gaussian noise, quantised to 8 bits.

    A non-finite centre (no beam reaching the plane) renders a dark frame.
    """
    if not spot_sigma > 0:
        raise ValueError("spot_sigma must be positive")
    n = cfg.native_px
    ppm = cfg.native_px_per_m
    cx, cy = spot_center
    coords = (np.arange(n) + 0.5 - n / 2) / ppm
    if np.isfinite(cx) and np.isfinite(cy) and peak > 0:
        gx = np.exp(-((coords - cx) ** 2) / (2 * spot_sigma ** 2))
        gy = np.exp(-((coords - cy) ** 2) / (2 * spot_sigma ** 2))
        img = peak * np.outer(gy, gx)
    else:
        img = np.zeros((n, n))
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        img = img + rng.normal(0.0, cfg.noise_sigma, img.shape)
    return Frame(np.rint(np.clip(img, 0, 255)).astype(np.uint8), ppm)


def _linear_weights(n_in: int, n_out: int) -> np.ndarray:
    # half-pixel-centre alignment, edge clamped
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    w = np.zeros((n_out, n_in))
    w[np.arange(n_out), lo] += 1 - frac
    w[np.arange(n_out), hi] += frac
    return w


def preprocess(f: Frame, cfg: PipelineConfig = PipelineConfig()) -> Frame:
    """Bilinear resample to ``resize_to`` square. Frames are already single-channel."""
    img = np.asarray(f.pixels, dtype=float)
    n = cfg.resize_to
    out = _linear_weights(f.height, n) @ img @ _linear_weights(f.width, n).T
    # non-square input gets anisotropic scale; px_per_m follows the x axis
    return Frame(out, f.px_per_m * n / f.width)


def adaptive_threshold(pixels, threshold_frac: float = 0.20) -> np.ndarray:
    """Mask of pixels brighter than ``threshold_frac`` of the frame's peak."""
    img = np.asarray(getattr(pixels, "pixels", pixels), dtype=float)
    peak = img.max()
    if peak <= 0:
        return np.zeros(img.shape, dtype=bool)
    return img > threshold_frac * peak


def morph_open(mask, kernel_radius: int = 1) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if kernel_radius == 0:
        return mask.copy()
    side = 2 * kernel_radius + 1
    return ndimage.binary_opening(mask, structure=np.ones((side, side), dtype=bool))


def detect_blob(mask, original: Frame, min_area: int = 4) -> Blob | None:
    """Brightest surviving 8-connected component, or None on tracking loss.

    Components smaller than ``min_area`` are dropped. Among the rest, the
    one with the largest summed intensity wins; its centroid is the
    intensity-weighted mean of member pixel coordinates.
    """
    mask = np.asarray(mask, dtype=bool)
    img = np.asarray(original.pixels, dtype=float)
    if mask.shape != img.shape:
        raise ValueError("mask and frame must share dimensions")
    labels, count = ndimage.label(mask, structure=_EIGHT)
    if count == 0:
        return None
    index = np.arange(1, count + 1)
    areas = ndimage.sum_labels(mask, labels, index)
    mass = ndimage.sum_labels(img, labels, index)
    keep = (areas >= min_area) & (mass > 0)
    if not keep.any():
        return None
    best = index[keep][np.argmax(mass[keep])]
    cy, cx = ndimage.center_of_mass(img, labels, best)
    return Blob(float(cx), float(cy), int(areas[best - 1]))


def locate_spot(f: Frame, cfg: PipelineConfig = PipelineConfig()):
    """Spot centre in plane metres (origin at frame centre), or None."""
    small = preprocess(f, cfg)
    peak = small.pixels.max()
    # the threshold is relative, so a noise-only frame would otherwise
    # always yield some blob
    if peak <= 0 or peak < cfg.min_peak:
        return None
    mask = morph_open(adaptive_threshold(small, cfg.threshold_frac), cfg.open_kernel)
    blob = detect_blob(mask, small, cfg.min_area)
    if blob is None:
        return None
    return pixel_to_plane(blob.cx, blob.cy, small.width, small.height, small.px_per_m)


def write_pgm(f: Frame, path, binary: bool = True) -> Path:
    """Dump a frame as a portable graymap (P5 binary or P2 ASCII)."""
    path = Path(path)
    data = np.clip(np.rint(np.asarray(f.pixels, dtype=float)), 0, 255).astype(np.uint8)
    header = f"{'P5' if binary else 'P2'}\n{f.width} {f.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            fh.write(data.tobytes())
        else:
            for row in data:
                fh.write((" ".join(str(v) for v in row) + "\n").encode("ascii"))
    return path


def read_pgm(path, px_per_m: float = 1.0) -> Frame:
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    # magic, width, height, maxval
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    magic, w, h, _ = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == "P5":
        data = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    elif magic == "P2":
        data = np.array(raw[pos:].split(), dtype=np.uint8)
    else:
        raise ValueError(f"unsupported PGM magic {magic!r}")
    return Frame(data.reshape(h, w).copy(), px_per_m)
