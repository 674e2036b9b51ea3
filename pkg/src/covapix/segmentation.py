"""Region segmentation: label maps, grid tiling, and SLIC superpixels.

Everything here is deterministic: SLIC seeds its cluster centers on a regular
grid and breaks distance ties by center index, so the same image and
parameters always produce the same label map. No RNG is involved anywhere.

A LabelMap can be serialized to a small binary format (magic "CVPXLBL1",
little-endian u32 header and payload) shared with the command-line tools.
"""

from __future__ import annotations

import math
import struct
from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    EmptyImage,
    KTooLarge,
    MalformedHeader,
    UnexpectedEof,
    WrongColorSpace,
    ZeroDimension,
)

if TYPE_CHECKING:
    from .imaging import ImageBuffer

LABEL_MAP_MAGIC = b"CVPXLBL1"


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel region ids for a width x height image.

    labels has shape (height, width); ids cover the contiguous range
    [0, region_count), every id appearing at least once.
    """

    width: int
    height: int
    labels: np.ndarray
    region_count: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ZeroDimension(f"label map needs positive dimensions, got {self.width}x{self.height}")
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if labels.shape != (self.height, self.width):
            raise ZeroDimension(
                f"labels shape {labels.shape} does not match (height={self.height}, width={self.width})"
            )
        ids = np.unique(labels)
        if (self.region_count < 1 or ids[0] != 0 or ids[-1] != self.region_count - 1
                or ids.size != self.region_count):
            raise ValueError("label ids must cover the contiguous range [0, region_count)")
        object.__setattr__(self, "labels", labels)

    def region_sizes(self) -> np.ndarray:
        """Pixel count per region id."""
        return np.bincount(self.labels.ravel(), minlength=self.region_count)


@dataclass(frozen=True)
class SlicParams:
    """SLIC knobs: target region count, compactness weight, iteration count."""

    target_regions: int
    compactness: float = 10.0
    iterations: int = 10

    def __post_init__(self):
        if self.target_regions < 1:
            raise ValueError("target_regions must be at least 1")
        if not (self.compactness > 0.0):
            raise ValueError("compactness must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")


def grid_segment(width: int, height: int, tile_w: int, tile_h: int) -> LabelMap:
    """Tile the image plane into a regular grid, row-major tile ids.

    Right and bottom edge tiles are smaller when the tile size does not
    divide the image size.
    """
    if min(width, height, tile_w, tile_h) < 1:
        raise ZeroDimension("image and tile dimensions must all be at least 1")
    tiles_x = -(-width // tile_w)
    tiles_y = -(-height // tile_h)
    col_tile = np.arange(width, dtype=np.int32) // tile_w
    row_tile = np.arange(height, dtype=np.int32) // tile_h
    labels = row_tile[:, None] * tiles_x + col_tile[None, :]
    return LabelMap(width, height, labels, tiles_x * tiles_y)


def slic_segment(image: "ImageBuffer", params: SlicParams) -> LabelMap:
    """SLIC superpixels over a CIELAB image.

    Centers start on a regular grid with spacing S = sqrt(W*H/K). Each
    assignment round scans centers in index order over a window of +-S
    around the center; a pixel takes the center with the strictly smallest
    distance D^2 = dc^2 + (ds^2 / S^2) * m^2, so ties stay with the lower
    center index. Update recomputes each center as the mean of its pixels.
    The final map is cleaned up with enforce_connectivity.
    """
    if image.space != "lab":
        raise WrongColorSpace("slic_segment expects a CIELAB image, convert first")
    height, width = image.height, image.width
    n_pixels = width * height
    if n_pixels == 0:
        raise EmptyImage("image has no pixels")
    k = params.target_regions
    if k > n_pixels:
        raise KTooLarge(f"{k} regions requested for {n_pixels} pixels")

    spacing = math.sqrt(n_pixels / k)
    nx = max(1, round(width / spacing))
    ny = max(1, round(height / spacing))
    n_centers = nx * ny

    # pixel j sits at index coordinate j, so the centroid of a tile spanning
    # [a, b) is (a + b - 1) / 2; the -0.5 keeps centers on pixel centroids
    cy = (np.arange(ny, dtype=np.float64)[:, None] + 0.5) * (height / ny) - 0.5
    cx = (np.arange(nx, dtype=np.float64)[None, :] + 0.5) * (width / nx) - 0.5
    center_y = np.broadcast_to(cy, (ny, nx)).ravel().copy()
    center_x = np.broadcast_to(cx, (ny, nx)).ravel().copy()
    py = np.clip(np.rint(center_y).astype(np.int64), 0, height - 1)
    px = np.clip(np.rint(center_x).astype(np.int64), 0, width - 1)
    center_color = image.data[py, px].copy()

    ratio = (params.compactness / spacing) ** 2
    row_coord = np.arange(height, dtype=np.float64)
    col_coord = np.arange(width, dtype=np.float64)
    assign = np.full((height, width), -1, dtype=np.int32)

    for _ in range(params.iterations):
        best = np.full((height, width), np.inf)
        assign.fill(-1)
        for c in range(n_centers):
            y0 = max(0, int(math.floor(center_y[c] - spacing)))
            y1 = min(height, int(math.floor(center_y[c] + spacing)) + 1)
            x0 = max(0, int(math.floor(center_x[c] - spacing)))
            x1 = min(width, int(math.floor(center_x[c] + spacing)) + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            patch = image.data[y0:y1, x0:x1]
            dc2 = np.sum((patch - center_color[c]) ** 2, axis=2)
            dy = row_coord[y0:y1, None] - center_y[c]
            dx = col_coord[None, x0:x1] - center_x[c]
            d2 = dc2 + (dy * dy + dx * dx) * ratio
            window_best = best[y0:y1, x0:x1]
            better = d2 < window_best
            window_best[better] = d2[better]
            assign[y0:y1, x0:x1][better] = c

        miss_y, miss_x = np.nonzero(assign < 0)
        if miss_y.size:
            # window geometry covers the plane for any aspect ratio, but keep
            # a full-distance fallback so adversarial inputs cannot strand pixels
            colors = image.data[miss_y, miss_x]
            d2 = (np.sum((colors[:, None, :] - center_color[None, :, :]) ** 2, axis=2)
                  + ((miss_y[:, None] - center_y[None, :]) ** 2
                     + (miss_x[:, None] - center_x[None, :]) ** 2) * ratio)
            assign[miss_y, miss_x] = np.argmin(d2, axis=1).astype(np.int32)

        flat = assign.ravel()
        counts = np.bincount(flat, minlength=n_centers).astype(np.float64)
        occupied = counts > 0
        sum_y = np.bincount(flat, weights=np.broadcast_to(row_coord[:, None], (height, width)).ravel(),
                            minlength=n_centers)
        sum_x = np.bincount(flat, weights=np.broadcast_to(col_coord[None, :], (height, width)).ravel(),
                            minlength=n_centers)
        center_y[occupied] = sum_y[occupied] / counts[occupied]
        center_x[occupied] = sum_x[occupied] / counts[occupied]
        for ch in range(3):
            sum_c = np.bincount(flat, weights=image.data[:, :, ch].ravel(), minlength=n_centers)
            center_color[occupied, ch] = sum_c[occupied] / counts[occupied]

    merged, count = _enforce_raw(assign, n_centers)
    return LabelMap(width, height, merged, count)


def _components(labels: np.ndarray):
    """4-connected components of equal-label pixels, discovered row-major.

    Returns (component id per pixel as int64 array, list of component sizes).
    Component ids follow discovery order, so id 0 contains pixel (0, 0).
    """
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int64)
    sizes: list[int] = []
    for sy in range(h):
        for sx in range(w):
            if comp[sy, sx] >= 0:
                continue
            cid = len(sizes)
            val = labels[sy, sx]
            comp[sy, sx] = cid
            stack = [(sy, sx)]
            count = 0
            while stack:
                y, x = stack.pop()
                count += 1
                if y > 0 and comp[y - 1, x] < 0 and labels[y - 1, x] == val:
                    comp[y - 1, x] = cid
                    stack.append((y - 1, x))
                if y + 1 < h and comp[y + 1, x] < 0 and labels[y + 1, x] == val:
                    comp[y + 1, x] = cid
                    stack.append((y + 1, x))
                if x > 0 and comp[y, x - 1] < 0 and labels[y, x - 1] == val:
                    comp[y, x - 1] = cid
                    stack.append((y, x - 1))
                if x + 1 < w and comp[y, x + 1] < 0 and labels[y, x + 1] == val:
                    comp[y, x + 1] = cid
                    stack.append((y, x + 1))
            sizes.append(count)
    return comp, sizes


def _enforce_raw(labels: np.ndarray, region_count: int):
    """Connectivity cleanup on a raw int label array.

    Splits every label into its 4-connected components, then absorbs each
    component smaller than (W*H / region_count) / 4 into its largest
    4-adjacent neighbor (ties to the earlier-discovered one). Components
    with no neighbor are kept whatever their size. Output ids are compacted
    in order of first row-major appearance.
    """
    h, w = labels.shape
    comp, sizes = _components(labels)
    n_comp = len(sizes)
    threshold = (h * w / region_count) / 4.0

    neighbors: dict[int, set[int]] = defaultdict(set)
    for a, b in ((comp[:, :-1], comp[:, 1:]), (comp[:-1, :], comp[1:, :])):
        diff = a != b
        for ca, cb in zip(a[diff].tolist(), b[diff].tolist()):
            neighbors[ca].add(cb)
            neighbors[cb].add(ca)

    parent = list(range(n_comp))
    size = list(sizes)

    def find(c: int) -> int:
        root = c
        while parent[root] != root:
            root = parent[root]
        while parent[c] != root:
            parent[c], c = root, parent[c]
        return root

    for c in range(n_comp):
        root = find(c)
        if size[root] >= threshold:
            continue
        nbr_roots = {find(n) for n in neighbors[root]} - {root}
        if not nbr_roots:
            continue
        target = max(nbr_roots, key=lambda r: (size[r], -r))
        parent[root] = target
        size[target] += size[root]
        neighbors[target] |= neighbors[root]

    new_id: dict[int, int] = {}
    remap = np.empty(n_comp, dtype=np.int32)
    for c in range(n_comp):
        root = find(c)
        if root not in new_id:
            new_id[root] = len(new_id)
        remap[c] = new_id[root]
    return remap[comp], len(new_id)


def enforce_connectivity(labels: LabelMap) -> LabelMap:
    """Split disconnected labels and absorb undersized fragments.

    An already 4-connected map comes back unchanged apart from id
    compaction into first-appearance order.
    """
    merged, count = _enforce_raw(labels.labels, labels.region_count)
    return LabelMap(labels.width, labels.height, merged, count)


def label_map_to_bytes(labels: LabelMap) -> bytes:
    """Serialize to the CVPXLBL1 binary layout."""
    header = LABEL_MAP_MAGIC + struct.pack(
        "<III", labels.width, labels.height, labels.region_count
    )
    return header + labels.labels.astype("<u4").tobytes()


def label_map_from_bytes(data: bytes) -> LabelMap:
    """Parse the CVPXLBL1 binary layout back into a LabelMap."""
    if len(data) < len(LABEL_MAP_MAGIC) + 12:
        raise UnexpectedEof("label map shorter than its fixed header")
    if data[: len(LABEL_MAP_MAGIC)] != LABEL_MAP_MAGIC:
        raise MalformedHeader("bad label map magic")
    width, height, region_count = struct.unpack_from("<III", data, len(LABEL_MAP_MAGIC))
    offset = len(LABEL_MAP_MAGIC) + 12
    need = width * height * 4
    if len(data) - offset < need:
        raise UnexpectedEof(
            f"label payload truncated: {len(data) - offset} of {need} bytes"
        )
    raw = np.frombuffer(data, dtype="<u4", count=width * height, offset=offset)
    if raw.size and int(raw.max()) >= region_count:
        raise MalformedHeader("label id outside declared region count")
    try:
        return LabelMap(width, height, raw.reshape(height, width).astype(np.int32), region_count)
    except (ValueError, ZeroDimension) as err:
        raise MalformedHeader(f"inconsistent label map: {err}") from err
