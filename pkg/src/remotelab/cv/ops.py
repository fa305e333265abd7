"""Image-processing stages for the automated checks.

All operations take and return (h, w) uint8 arrays. They are written against
plain numpy so the whole pipeline stays dependency-light and auditable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _as_gray(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-D grayscale array, got shape {arr.shape}")
    return arr.astype(np.uint8, copy=False)


def _check_odd_kernel(k: int) -> None:
    if k < 3 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 3, got {k}")


def subtract_background(frame: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Per-pixel absolute difference; symmetric in its arguments."""
    a = _as_gray(frame)
    b = _as_gray(background)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.abs(a.astype(np.int16) - b.astype(np.int16)).astype(np.uint8)


def _max_filter(img: np.ndarray, k: int) -> np.ndarray:
    windows = sliding_window_view(img, (k, k))
    return windows.max(axis=(2, 3))


def _min_filter(img: np.ndarray, k: int) -> np.ndarray:
    windows = sliding_window_view(img, (k, k))
    return windows.min(axis=(2, 3))


def morph_close(img: np.ndarray, kernel_size: int = 5) -> np.ndarray:
    """Closing (dilation then erosion) with a square structuring element.

    Computed on a zero-extended canvas wide enough that the crop equals the
    closing of the infinite zero-padded plane, which keeps the operation
    idempotent right up to the borders.
    """
    arr = _as_gray(img)
    _check_odd_kernel(kernel_size)
    pad = kernel_size  # covers dilation growth plus the erosion window
    canvas = np.pad(arr, pad, mode="constant", constant_values=0)
    r = kernel_size // 2
    dilated = _max_filter(np.pad(canvas, r, mode="constant", constant_values=0), kernel_size)
    eroded = _min_filter(np.pad(dilated, r, mode="edge"), kernel_size)
    return eroded[pad:-pad, pad:-pad].astype(np.uint8)


def median_filter(img: np.ndarray, k: int = 5) -> np.ndarray:
    """k x k median with clamp-replicated borders."""
    arr = _as_gray(img)
    _check_odd_kernel(k)
    r = k // 2
    padded = np.pad(arr, r, mode="edge")
    windows = sliding_window_view(padded, (k, k))
    return np.median(windows, axis=(2, 3)).astype(np.uint8)


def threshold(img: np.ndarray, t: int) -> np.ndarray:
    """Binary image: 255 where pixel >= t, else 0."""
    arr = _as_gray(img)
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {t}")
    return np.where(arr >= t, 255, 0).astype(np.uint8)


@dataclass(frozen=True)
class Box:
    """Axis-aligned bounding box of one connected foreground component.

    `area` counts filled foreground pixels, not w*h; (cx, cy) is the pixel
    centroid of the component.
    """

    x: int
    y: int
    w: int
    h: int
    area: int
    cx: float
    cy: float

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.cx, self.cy)


def find_bounding_boxes(binary: np.ndarray, min_area: int = 50) -> list[Box]:
    """Boxes of 8-connected components with area >= min_area, sorted by x.

    Two-pass labelling with union-find over run-length scanlines.
    """
    arr = _as_gray(binary)
    h, w = arr.shape
    fg = arr > 0

    parent: list[int] = [0]  # parent[label]; label 0 unused

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    labels = np.zeros((h, w), dtype=np.int32)
    next_label = 1
    for y in range(h):
        row = fg[y]
        x = 0
        while x < w:
            if not row[x]:
                x += 1
                continue
            x_end = x
            while x_end < w and row[x_end]:
                x_end += 1
            # neighbours in the previous row, including diagonals (8-conn)
            label = 0
            if y > 0:
                lo = max(0, x - 1)
                hi = min(w, x_end + 1)
                above = labels[y - 1, lo:hi]
                for lbl in above[above > 0]:
                    if label == 0:
                        label = int(lbl)
                    else:
                        union(label, int(lbl))
            if label == 0:
                label = next_label
                parent.append(label)
                next_label += 1
            labels[y, x:x_end] = label
            x = x_end

    if next_label == 1:
        return []

    roots = np.array([find(i) for i in range(next_label)], dtype=np.int32)
    flat = roots[labels]

    boxes: list[Box] = []
    for root in np.unique(flat):
        if root == 0:
            continue
        ys, xs = np.nonzero(flat == root)
        area = int(xs.size)
        if area < min_area:
            continue
        x0, x1 = int(xs.min()), int(xs.max())
        y0, y1 = int(ys.min()), int(ys.max())
        boxes.append(
            Box(
                x=x0,
                y=y0,
                w=x1 - x0 + 1,
                h=y1 - y0 + 1,
                area=area,
                cx=float(xs.mean()),
                cy=float(ys.mean()),
            )
        )
    boxes.sort(key=lambda b: (b.x, b.y))
    return boxes
