"""Image buffers, PPM I/O, CIELAB conversion, rendering, quality statistics.

Images are float64 (height, width, 3) arrays. The "rgb" space holds sRGB in
[0, 1]; "lab" holds CIELAB under D65 (L in [0, 100], a and b roughly in
[-128, 127]). PPM input and output is binary P6 with maxval 255 only, and
the writer emits a canonical header so write(read(x)) == x byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covapixel import Covapixel, FeatureSpace, denormalize_color
from .errors import (
    DimensionMismatch,
    FeatureSpaceMismatch,
    MalformedHeader,
    MissingRegion,
    NoColorFeatures,
    UnexpectedEof,
    UnsupportedMaxval,
    WrongColorSpace,
)
from .psd import SymPsdMatrix, spd_inverse
from .segmentation import LabelMap

# sRGB -> XYZ (linear light, D65). The white point is taken as the matrix
# row sums so that pure white maps to exactly L=100, a=b=0.
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE = _RGB_TO_XYZ @ np.ones(3)

_DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class ImageBuffer:
    """A width x height 3-channel float image in a named color space."""

    width: int
    height: int
    space: str
    data: np.ndarray

    def __post_init__(self):
        if self.space not in ("rgb", "lab"):
            raise WrongColorSpace(f"unknown color space {self.space!r}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image needs positive dimensions, got {self.width}x{self.height}")
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.shape != (self.height, self.width, 3):
            raise DimensionMismatch(
                f"data shape {data.shape} does not match (height={self.height}, "
                f"width={self.width}, 3)"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("image data must be finite")
        object.__setattr__(self, "data", data)

    @classmethod
    def filled(cls, width: int, height: int, color, space: str = "rgb") -> "ImageBuffer":
        data = np.broadcast_to(np.asarray(color, dtype=np.float64), (height, width, 3))
        return cls(width, height, space, data.copy())


@dataclass(frozen=True)
class QualityReport:
    """Reconstruction quality: mse, psnr (dB), and boundary complexity.

    boundary_px counts 4-adjacent pixel pairs with differing labels;
    boundary_per_region divides that by the region count.
    """

    mse: float
    psnr_db: float
    boundary_px: int
    boundary_per_region: float

    def as_line(self) -> str:
        """Fixed-key single-line form, values at 6 significant digits."""
        return (f"mse={self.mse:.6g} psnr_db={self.psnr_db:.6g} "
                f"boundary_px={self.boundary_px} "
                f"boundary_per_region={self.boundary_per_region:.6g}")


# -- PPM P6 ------------------------------------------------------------------

def read_ppm(data: bytes) -> ImageBuffer:
    """Decode binary PPM (P6, maxval 255). Header comments are honored."""
    if data[:2] != b"P6":
        raise MalformedHeader("not a binary PPM (P6) stream")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data):
            ch = data[pos:pos + 1]
            if ch == b"#":
                nl = data.find(b"\n", pos)
                if nl < 0:
                    raise UnexpectedEof("header comment runs past end of data")
                pos = nl + 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            if pos >= len(data):
                raise UnexpectedEof("header ended before width, height, and maxval")
            raise MalformedHeader(f"expected integer in header at byte {pos}")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise MalformedHeader("maxval must be followed by a single whitespace byte")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeader(f"non-positive image dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} unsupported, only 255")
    need = width * height * 3
    if len(data) - pos < need:
        raise UnexpectedEof(f"pixel payload truncated: {len(data) - pos} of {need} bytes")
    raw = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return ImageBuffer(width, height, "rgb",
                       raw.astype(np.float64).reshape(height, width, 3) / 255.0)


def write_ppm(image: ImageBuffer) -> bytes:
    """Encode to binary PPM with canonical header, rounding half up."""
    if image.space != "rgb":
        raise WrongColorSpace("write_ppm needs an rgb image, convert first")
    quantized = np.floor(np.clip(image.data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    header = b"P6\n%d %d\n255\n" % (image.width, image.height)
    return header + quantized.tobytes()


# -- color space conversion --------------------------------------------------

def _srgb_linearize(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_delinearize(c: np.ndarray) -> np.ndarray:
    c = np.maximum(c, 0.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _lab_forward(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA ** 3, np.cbrt(t), t / (3.0 * _DELTA ** 2) + 4.0 / 29.0)


def _lab_inverse(u: np.ndarray) -> np.ndarray:
    return np.where(u > _DELTA, u ** 3, 3.0 * _DELTA ** 2 * (u - 4.0 / 29.0))


def _rgb_array_to_lab(rgb: np.ndarray) -> np.ndarray:
    xyz = _srgb_linearize(rgb) @ _RGB_TO_XYZ.T / _WHITE
    f = _lab_forward(xyz)
    out = np.empty_like(rgb)
    out[..., 0] = 116.0 * f[..., 1] - 16.0
    out[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    out[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return out


def _lab_array_to_rgb(lab: np.ndarray) -> np.ndarray:
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = _lab_inverse(np.stack([fx, fy, fz], axis=-1)) * _WHITE
    rgb = _srgb_delinearize(xyz @ _XYZ_TO_RGB.T)
    return np.clip(rgb, 0.0, 1.0)


def rgb_to_lab(image: ImageBuffer) -> ImageBuffer:
    """sRGB -> CIELAB (D65)."""
    if image.space != "rgb":
        raise WrongColorSpace(f"rgb_to_lab got a {image.space} image")
    return ImageBuffer(image.width, image.height, "lab", _rgb_array_to_lab(image.data))


def lab_to_rgb(image: ImageBuffer) -> ImageBuffer:
    """CIELAB -> sRGB, clamped to [0, 1]."""
    if image.space != "lab":
        raise WrongColorSpace(f"lab_to_rgb got a {image.space} image")
    return ImageBuffer(image.width, image.height, "rgb", _lab_array_to_rgb(image.data))


# -- rendering ---------------------------------------------------------------

def _mean_rgb_color(cova: Covapixel) -> np.ndarray:
    """Mean color of a covapixel as an rgb triple; white when colorless."""
    space = cova.feature_space.color_space
    if space is None:
        return np.ones(3)
    color = denormalize_color(cova.est.mu[2:5], space)
    if space == "lab":
        color = _lab_array_to_rgb(color.reshape(1, 1, 3)).reshape(3)
    return np.clip(color, 0.0, 1.0)


def _check_common_feature_space(covas) -> FeatureSpace:
    spaces = {c.feature_space for c in covas}
    if len(spaces) > 1:
        raise FeatureSpaceMismatch(
            "covapixels mix feature spaces: " + ", ".join(sorted(s.value for s in spaces))
        )
    return next(iter(spaces))


def render_flat(labels: LabelMap, covas) -> ImageBuffer:
    """Paint every region with its covapixel's mean color."""
    covas = list(covas)
    if not covas:
        raise MissingRegion("no covapixels supplied")
    fs = _check_common_feature_space(covas)
    if fs.color_space is None:
        raise NoColorFeatures(f"feature space {fs.value} has no color to paint with")
    by_id = {c.id: c for c in covas}
    lut = np.zeros((labels.region_count, 3))
    for rid in range(labels.region_count):
        cova = by_id.get(rid)
        if cova is None:
            raise MissingRegion(f"no covapixel for region {rid}")
        lut[rid] = _mean_rgb_color(cova)
    return ImageBuffer(labels.width, labels.height, "rgb", lut[labels.labels])


def render_ellipses(covas, width: int, height: int, nsigma: float = 2.0,
                    background: str = "black", labels: LabelMap | None = None) -> ImageBuffer:
    """Draw each covapixel's nsigma spatial ellipse filled with its mean color.

    Ellipses are painted largest pixel count first, so small regions stay
    visible on top; each mean position then gets a single marker pixel in
    the inverted fill color. background="flat" composites over render_flat
    (which needs the label map); "black" starts from zeros.
    """
    covas = list(covas)
    if background == "flat":
        if labels is None:
            raise MissingRegion("flat background requires the label map")
        canvas = render_flat(labels, covas).data.copy()
    elif background == "black":
        canvas = np.zeros((height, width, 3))
    else:
        raise ValueError(f"unknown background {background!r}")
    if covas:
        _check_common_feature_space(covas)
    if nsigma < 0.0:
        raise ValueError("nsigma must be nonnegative")

    order = sorted(covas, key=lambda c: (-c.n, c.id))
    fills = {c.id: _mean_rgb_color(c) for c in order}
    for cova in order:
        mu = cova.est.mu
        spatial = SymPsdMatrix.from_full(cova.est.cov.full()[:2, :2])
        reach = nsigma * math.sqrt(max(np.linalg.eigvalsh(spatial.full())[-1], 0.0)) + 1.0
        x0 = max(0, int(math.floor(mu[0] - reach)))
        x1 = min(width, int(math.ceil(mu[0] + reach)) + 1)
        y0 = max(0, int(math.floor(mu[1] - reach)))
        y1 = min(height, int(math.ceil(mu[1] + reach)) + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        inv = spd_inverse(spatial).full()
        dx = np.arange(x0, x1, dtype=np.float64)[None, :] - mu[0]
        dy = np.arange(y0, y1, dtype=np.float64)[:, None] - mu[1]
        m2 = inv[0, 0] * dx * dx + 2.0 * inv[0, 1] * dx * dy + inv[1, 1] * dy * dy
        inside = m2 <= nsigma * nsigma
        canvas[y0:y1, x0:x1][inside] = fills[cova.id]
    for cova in order:
        px = int(math.floor(cova.est.mu[0] + 0.5))
        py = int(math.floor(cova.est.mu[1] + 0.5))
        if 0 <= px < width and 0 <= py < height:
            canvas[py, px] = 1.0 - fills[cova.id]
    return ImageBuffer(width, height, "rgb", canvas)


def _boundary_mask(labels_arr: np.ndarray) -> np.ndarray:
    """Pixels with at least one 4-neighbor in a different region."""
    mask = np.zeros(labels_arr.shape, dtype=bool)
    hdiff = labels_arr[:, 1:] != labels_arr[:, :-1]
    mask[:, 1:] |= hdiff
    mask[:, :-1] |= hdiff
    vdiff = labels_arr[1:, :] != labels_arr[:-1, :]
    mask[1:, :] |= vdiff
    mask[:-1, :] |= vdiff
    return mask


def boundary_pair_count(labels: LabelMap) -> int:
    """Number of 4-adjacent pixel pairs whose labels differ."""
    arr = labels.labels
    return int((arr[:, 1:] != arr[:, :-1]).sum() + (arr[1:, :] != arr[:-1, :]).sum())


def overlay_boundaries(image: ImageBuffer, labels: LabelMap) -> ImageBuffer:
    """Paint region boundary pixels pure red over the (rgb) image."""
    if (image.width, image.height) != (labels.width, labels.height):
        raise DimensionMismatch(
            f"image is {image.width}x{image.height} but labels are "
            f"{labels.width}x{labels.height}"
        )
    base = image if image.space == "rgb" else lab_to_rgb(image)
    data = base.data.copy()
    data[_boundary_mask(labels.labels)] = (1.0, 0.0, 0.0)
    return ImageBuffer(image.width, image.height, "rgb", data)


def quality_stats(original: ImageBuffer, recon: ImageBuffer, labels: LabelMap) -> QualityReport:
    """Reconstruction error and boundary complexity of a segmentation."""
    if original.space != "rgb" or recon.space != "rgb":
        raise WrongColorSpace("quality_stats compares rgb images")
    if (original.width, original.height) != (recon.width, recon.height):
        raise DimensionMismatch(
            f"original {original.width}x{original.height} vs "
            f"reconstruction {recon.width}x{recon.height}"
        )
    if (original.width, original.height) != (labels.width, labels.height):
        raise DimensionMismatch(
            f"image is {original.width}x{original.height} but labels are "
            f"{labels.width}x{labels.height}"
        )
    mse = float(np.mean((original.data - recon.data) ** 2))
    psnr = math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse)
    pairs = boundary_pair_count(labels)
    return QualityReport(mse, psnr, pairs, pairs / labels.region_count)
