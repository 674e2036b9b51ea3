"""Covapixels: per-region (mean, covariance) summaries of image content.

A covapixel condenses one region of a segmented image into the first two
moments of its per-pixel feature vectors. Feature vectors always start with
the pixel coordinates (x = column, y = row, in pixels) and optionally append
color channels normalized to [0, 1]. Covariances are population covariances
(divide by n) with eps added to the diagonal at extraction time, so even a
single-pixel region carries an invertible summary.

The covapix-1 document format stores a set of covapixels as JSON text with
covariances in Cholesky square-root form, which keeps reloaded matrices
symmetric PSD by construction.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    ColorSpaceMismatch,
    DimensionMismatch,
    FeatureSpaceMismatch,
    MalformedHeader,
)
from .fusion import Estimate
from .psd import SymPsdMatrix, cholesky
from .segmentation import LabelMap

if TYPE_CHECKING:
    from .imaging import ImageBuffer

FORMAT_TAG = "covapix-1"


class FeatureSpace(enum.Enum):
    """Per-pixel feature layout: spatial coordinates, optionally color."""

    XY = "xy"
    XY_RGB = "xy_rgb"
    XY_LAB = "xy_lab"

    @property
    def dim(self) -> int:
        return 2 if self is FeatureSpace.XY else 5

    @property
    def color_space(self) -> str | None:
        """Image color space this layout samples from, None for spatial-only."""
        if self is FeatureSpace.XY_RGB:
            return "rgb"
        if self is FeatureSpace.XY_LAB:
            return "lab"
        return None


@dataclass(frozen=True)
class Covapixel:
    """One region's summary: id, pixel count, and feature moments."""

    id: int
    n: int
    est: Estimate
    feature_space: FeatureSpace

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("covapixel pixel count must be at least 1")
        if self.est.dim != self.feature_space.dim:
            raise DimensionMismatch(
                f"estimate dimension {self.est.dim} does not match "
                f"feature space {self.feature_space.value} (k={self.feature_space.dim})"
            )


@dataclass(frozen=True)
class AdjacencyGraph:
    """Undirected region adjacency; edges are (low id, high id) pairs."""

    region_count: int
    edges: frozenset


def normalize_color(data: np.ndarray, space: str) -> np.ndarray:
    """Map color channels into [0, 1] feature coordinates.

    rgb passes through; lab uses (L/100, (a+128)/255, (b+128)/255).
    """
    if space == "rgb":
        return np.asarray(data, dtype=np.float64)
    if space == "lab":
        data = np.asarray(data, dtype=np.float64)
        out = np.empty_like(data)
        out[..., 0] = data[..., 0] / 100.0
        out[..., 1] = (data[..., 1] + 128.0) / 255.0
        out[..., 2] = (data[..., 2] + 128.0) / 255.0
        return out
    raise ColorSpaceMismatch(f"unknown color space {space!r}")


def denormalize_color(features: np.ndarray, space: str) -> np.ndarray:
    """Inverse of normalize_color."""
    if space == "rgb":
        return np.asarray(features, dtype=np.float64)
    if space == "lab":
        features = np.asarray(features, dtype=np.float64)
        out = np.empty_like(features)
        out[..., 0] = features[..., 0] * 100.0
        out[..., 1] = features[..., 1] * 255.0 - 128.0
        out[..., 2] = features[..., 2] * 255.0 - 128.0
        return out
    raise ColorSpaceMismatch(f"unknown color space {space!r}")


def extract_covapixels(image: "ImageBuffer", labels: LabelMap,
                       feature_space: FeatureSpace, eps: float = 1e-8) -> list[Covapixel]:
    """Summarize every region of a segmented image, ordered by region id.

    Means are plain per-region feature averages; because pixel coordinates
    are exact integers, the spatial part of the mean equals the region
    centroid exactly. Covariances divide by n (population form) and get
    eps added to the diagonal.
    """
    if (image.width, image.height) != (labels.width, labels.height):
        raise DimensionMismatch(
            f"image is {image.width}x{image.height} but labels are "
            f"{labels.width}x{labels.height}"
        )
    wanted = feature_space.color_space
    if wanted is not None and wanted != image.space:
        raise ColorSpaceMismatch(
            f"feature space {feature_space.value} needs a {wanted} image, got {image.space}"
        )
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")

    height, width = image.height, image.width
    k = feature_space.dim
    n_pixels = width * height
    feats = np.empty((n_pixels, k))
    cols = np.arange(width, dtype=np.float64)
    rows = np.arange(height, dtype=np.float64)
    feats[:, 0] = np.broadcast_to(cols[None, :], (height, width)).ravel()
    feats[:, 1] = np.broadcast_to(rows[:, None], (height, width)).ravel()
    if wanted is not None:
        feats[:, 2:] = normalize_color(image.data, image.space).reshape(n_pixels, 3)

    flat = labels.labels.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=labels.region_count)
    bounds = np.concatenate(([0], np.cumsum(counts)))
    sorted_feats = feats[order]

    out: list[Covapixel] = []
    for rid in range(labels.region_count):
        block = sorted_feats[bounds[rid]:bounds[rid + 1]]
        n = block.shape[0]
        mu = block.sum(axis=0) / n
        centered = block - mu
        cov = centered.T @ centered / n
        cov[np.diag_indices(k)] += eps
        out.append(Covapixel(rid, int(n), Estimate(mu, SymPsdMatrix.from_full(cov)),
                             feature_space))
    return out


def merge_covapixels(a: Covapixel, b: Covapixel) -> Covapixel:
    """Exact moment merge of two covapixels, as if extracted from the union.

    mu = (na mua + nb mub) / n and
    C = (na (Ca + da da^T) + nb (Cb + db db^T)) / n with d = mu shift,
    the standard mixture moment identity. The merged id is the smaller of
    the two; merging a covapixel with itself is rejected.
    """
    if a.feature_space is not b.feature_space:
        raise FeatureSpaceMismatch(
            f"cannot merge {a.feature_space.value} with {b.feature_space.value}"
        )
    if a.id == b.id:
        raise ValueError(f"covapixels share id {a.id}")
    n = a.n + b.n
    mu = (a.n * a.est.mu + b.n * b.est.mu) / n
    da = a.est.mu - mu
    db = b.est.mu - mu
    cov = (a.n * (a.est.cov.full() + np.outer(da, da))
           + b.n * (b.est.cov.full() + np.outer(db, db))) / n
    return Covapixel(min(a.id, b.id), n, Estimate(mu, SymPsdMatrix.from_full(cov)),
                     a.feature_space)


def region_adjacency(labels: LabelMap) -> AdjacencyGraph:
    """Region pairs that touch along a 4-neighbor pixel edge."""
    arr = labels.labels
    pairs = []
    for a, b in ((arr[:, :-1], arr[:, 1:]), (arr[:-1, :], arr[1:, :])):
        diff = a != b
        if diff.any():
            lo = np.minimum(a[diff], b[diff])
            hi = np.maximum(a[diff], b[diff])
            pairs.append(np.stack([lo, hi], axis=1))
    if pairs:
        uniq = np.unique(np.concatenate(pairs), axis=0)
        edges = frozenset((int(lo), int(hi)) for lo, hi in uniq)
    else:
        edges = frozenset()
    return AdjacencyGraph(labels.region_count, edges)


@dataclass(frozen=True)
class CovapixelSet:
    """A covapix-1 document: covapixels plus the context they came from."""

    feature_space: FeatureSpace
    eps: float
    width: int
    height: int
    covapixels: tuple

    def by_id(self) -> dict[int, Covapixel]:
        return {c.id: c for c in self.covapixels}


def covapix_dumps(doc: CovapixelSet) -> str:
    """Serialize a CovapixelSet to covapix-1 JSON text.

    Covariances are written as the row-major lower triangle of their
    Cholesky factor; floats go through repr so they reload bit-exactly.
    """
    records = []
    for c in sorted(doc.covapixels, key=lambda c: c.id):
        k = c.est.dim
        low = cholesky(c.est.cov, "auto").lower
        records.append({
            "id": c.id,
            "n": c.n,
            "mu": [float(v) for v in c.est.mu],
            "chol_lower": [float(v) for v in low[np.tril_indices(k)]],
        })
    payload = {
        "format": FORMAT_TAG,
        "feature_space": doc.feature_space.value,
        "eps": doc.eps,
        "width": doc.width,
        "height": doc.height,
        "covapixels": records,
    }
    return json.dumps(payload, indent=1)


def covapix_loads(text: str) -> CovapixelSet:
    """Parse covapix-1 JSON text back into a CovapixelSet."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as err:
        raise MalformedHeader(f"covapix document is not valid JSON: {err}") from err
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_TAG:
        raise MalformedHeader(f"missing or unknown format tag, expected {FORMAT_TAG!r}")
    try:
        fs = FeatureSpace(payload["feature_space"])
        eps = float(payload["eps"])
        width = int(payload["width"])
        height = int(payload["height"])
        covas = []
        for rec in payload["covapixels"]:
            mu = np.asarray(rec["mu"], dtype=np.float64)
            k = mu.size
            low = np.zeros((k, k))
            low[np.tril_indices(k)] = rec["chol_lower"]
            cov = SymPsdMatrix.from_full(low @ low.T)
            covas.append(Covapixel(int(rec["id"]), int(rec["n"]), Estimate(mu, cov), fs))
    except (KeyError, TypeError, ValueError, DimensionMismatch) as err:
        raise MalformedHeader(f"bad covapix record: {err}") from err
    return CovapixelSet(fs, eps, width, height, tuple(covas))
