"""Imaging: PPM codec, CIELAB conversion, rendering, quality statistics."""

from __future__ import annotations

import math
import re

import numpy as np
import pytest

from covapix import (
    Covapixel,
    Estimate,
    FeatureSpace,
    ImageBuffer,
    LabelMap,
    SymPsdMatrix,
    boundary_pair_count,
    extract_covapixels,
    grid_segment,
    lab_to_rgb,
    overlay_boundaries,
    quality_stats,
    read_ppm,
    render_ellipses,
    render_flat,
    rgb_to_lab,
    write_ppm,
)
from covapix.errors import (
    DimensionMismatch,
    MalformedHeader,
    MissingRegion,
    NoColorFeatures,
    UnexpectedEof,
    UnsupportedMaxval,
    WrongColorSpace,
)
from support import random_image


def rand_img(width: int, height: int, seed: int) -> ImageBuffer:
    return random_image(np.random.default_rng(seed), width, height)


# -- PPM codec ---------------------------------------------------------------------

def test_read_one_white_pixel():
    buf = read_ppm(b"P6\n1 1\n255\n\xff\xff\xff")
    assert (buf.width, buf.height, buf.space) == (1, 1, "rgb")
    assert buf.data.tolist() == [[[1.0, 1.0, 1.0]]]


def test_ppm_write_read_write_is_identity():
    rng = np.random.default_rng(20)
    for w, h in ((1, 1), (3, 2), (16, 9)):
        payload = rng.integers(0, 256, size=w * h * 3, dtype=np.uint8).tobytes()
        blob = b"P6\n%d %d\n255\n" % (w, h) + payload
        assert write_ppm(read_ppm(blob)) == blob


def test_ppm_header_comments_are_skipped():
    blob = b"P6\n# made by hand\n2 1\n# another note\n255\n" + bytes(6)
    buf = read_ppm(blob)
    assert (buf.width, buf.height) == (2, 1)
    # re-serialization is canonical, so the comments do not survive
    assert write_ppm(buf) == b"P6\n2 1\n255\n" + bytes(6)


def test_ppm_quantization_rounds_half_up():
    img = ImageBuffer(2, 1, "rgb", np.array([[[0.5, 0.0, 1.0], [1 / 510, 0.999, 2.0]]]))
    body = write_ppm(img)[len(b"P6\n2 1\n255\n"):]
    # 0.5*255+0.5 = 128.0; 1/510*255+0.5 = 1.0; values above 1 clamp to 255
    assert list(body) == [128, 0, 255, 1, 255, 255]


def test_ppm_errors():
    with pytest.raises(MalformedHeader):
        read_ppm(b"P5\n1 1\n255\n\x00")
    with pytest.raises(UnsupportedMaxval):
        read_ppm(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00")
    with pytest.raises(UnexpectedEof):
        read_ppm(b"P6\n2 2\n255\n" + bytes(11))
    with pytest.raises(UnexpectedEof):
        read_ppm(b"P6\n2 2")
    with pytest.raises(WrongColorSpace):
        write_ppm(rgb_to_lab(rand_img(2, 2, 21)))


# -- CIELAB conversion ----------------------------------------------------------------

def test_white_maps_to_l100():
    lab = rgb_to_lab(ImageBuffer.filled(1, 1, [1.0, 1.0, 1.0]))
    L, a, b = lab.data[0, 0]
    assert L == pytest.approx(100.0, abs=1e-9)
    assert abs(a) < 0.01 and abs(b) < 0.01


def test_black_maps_to_l0():
    lab = rgb_to_lab(ImageBuffer.filled(1, 1, [0.0, 0.0, 0.0]))
    assert lab.data[0, 0, 0] == pytest.approx(0.0, abs=1e-12)


def test_lab_roundtrip_1000_random_colors():
    rng = np.random.default_rng(22)
    colors = rng.uniform(size=(1, 1000, 3))
    img = ImageBuffer(1000, 1, "rgb", colors)
    back = lab_to_rgb(rgb_to_lab(img))
    assert np.max(np.abs(back.data - colors)) <= 1e-4


def test_conversion_rejects_wrong_space():
    img = rand_img(2, 2, 23)
    with pytest.raises(WrongColorSpace):
        rgb_to_lab(rgb_to_lab(img))
    with pytest.raises(WrongColorSpace):
        lab_to_rgb(img)


# -- render_flat ---------------------------------------------------------------------

def test_render_flat_uniform_image_exact():
    img = ImageBuffer.filled(6, 4, [0.25, 0.5, 0.75])
    labels = grid_segment(6, 4, 3, 2)
    covas = extract_covapixels(img, labels, FeatureSpace.XY_RGB)
    out = render_flat(labels, covas)
    assert np.array_equal(out.data, img.data)


def test_render_flat_uniform_image_via_lab():
    img = ImageBuffer.filled(6, 4, [0.25, 0.5, 0.75])
    labels = grid_segment(6, 4, 3, 2)
    covas = extract_covapixels(rgb_to_lab(img), labels, FeatureSpace.XY_LAB)
    out = render_flat(labels, covas)
    assert np.max(np.abs(out.data - img.data)) <= 1.0 / 255.0


def test_render_flat_two_tone_exact():
    data = np.zeros((4, 4, 3))
    data[:, 2:] = 1.0
    img = ImageBuffer(4, 4, "rgb", data)
    labels = grid_segment(4, 4, 2, 4)
    covas = extract_covapixels(img, labels, FeatureSpace.XY_RGB)
    out = render_flat(labels, covas)
    assert np.array_equal(out.data, img.data)


def test_render_flat_singleton_regions_reconstruct_exactly():
    img = rand_img(5, 3, 24)
    labels = grid_segment(5, 3, 1, 1)
    covas = extract_covapixels(img, labels, FeatureSpace.XY_RGB)
    out = render_flat(labels, covas)
    assert np.array_equal(out.data, img.data)


def test_render_flat_error_paths():
    img = rand_img(4, 4, 25)
    labels = grid_segment(4, 4, 2, 2)
    covas = extract_covapixels(img, labels, FeatureSpace.XY_RGB)
    with pytest.raises(MissingRegion):
        render_flat(labels, covas[:-1])
    with pytest.raises(MissingRegion):
        render_flat(labels, [])
    xy = extract_covapixels(img, labels, FeatureSpace.XY)
    with pytest.raises(NoColorFeatures):
        render_flat(labels, xy)


def test_render_flat_refinement_never_raises_mse():
    img = rand_img(32, 32, 26)
    previous = math.inf
    for tile in (8, 4, 2):
        labels = grid_segment(32, 32, tile, tile)
        covas = extract_covapixels(img, labels, FeatureSpace.XY_RGB)
        report = quality_stats(img, render_flat(labels, covas), labels)
        assert report.mse <= previous + 1e-15
        previous = report.mse


def test_render_flat_is_reconstruction_fixed_point():
    img = rand_img(16, 16, 27)
    labels = grid_segment(16, 16, 4, 4)
    first = render_flat(labels, extract_covapixels(img, labels, FeatureSpace.XY_RGB))
    second = render_flat(labels, extract_covapixels(first, labels, FeatureSpace.XY_RGB))
    assert np.max(np.abs(second.data - first.data)) <= 1.0 / 255.0


# -- render_ellipses -------------------------------------------------------------------

def _disc_covapixel(cid: int, x: float, y: float, s: float, color) -> Covapixel:
    cov = np.zeros((5, 5))
    cov[0, 0] = cov[1, 1] = s * s
    cov[2, 2] = cov[3, 3] = cov[4, 4] = 1e-8
    mu = np.array([x, y, *color])
    return Covapixel(cid, 1, Estimate(mu, SymPsdMatrix.from_full(cov)), FeatureSpace.XY_RGB)


def test_ellipse_disc_area_matches_analytic():
    s, nsigma = 10.0, 2.0
    cova = _disc_covapixel(0, 32.0, 32.0, s, (0.2, 0.4, 0.8))
    out = render_ellipses([cova], 64, 64, nsigma=nsigma)
    painted = int(np.count_nonzero(out.data.any(axis=2)))
    expected = math.pi * (nsigma * s) ** 2
    assert abs(painted - expected) <= 0.05 * expected


def test_ellipse_nsigma_zero_marks_means_only():
    cova = _disc_covapixel(3, 10.0, 5.0, 4.0, (0.0, 1.0, 0.0))
    out = render_ellipses([cova], 20, 20, nsigma=0.0)
    nonblack = np.argwhere(out.data.any(axis=2))
    assert nonblack.tolist() == [[5, 10]]
    # marker is the inverted fill color
    assert out.data[5, 10].tolist() == [1.0, 0.0, 1.0]


def test_ellipse_empty_list_black_background():
    out = render_ellipses([], 8, 8)
    assert not out.data.any()


def test_ellipse_larger_regions_paint_first():
    big = Covapixel(0, 100, _disc_covapixel(0, 8.0, 8.0, 5.0, (1.0, 0.0, 0.0)).est,
                    FeatureSpace.XY_RGB)
    small = Covapixel(1, 2, _disc_covapixel(1, 8.0, 8.0, 2.0, (0.0, 0.0, 1.0)).est,
                      FeatureSpace.XY_RGB)
    out = render_ellipses([small, big], 16, 16, nsigma=1.0)
    # the small disc wins its own area despite being listed first
    assert out.data[8, 6].tolist() == [0.0, 0.0, 1.0]
    assert out.data[8, 12].tolist() == [1.0, 0.0, 0.0]


def test_ellipse_flat_background_needs_labels():
    img = rand_img(4, 4, 28)
    labels = grid_segment(4, 4, 2, 2)
    covas = extract_covapixels(img, labels, FeatureSpace.XY_RGB)
    with pytest.raises(MissingRegion):
        render_ellipses(covas, 4, 4, background="flat")
    out = render_ellipses(covas, 4, 4, background="flat", labels=labels)
    assert out.data.shape == (4, 4, 3)


# -- overlay_boundaries ------------------------------------------------------------------

def test_overlay_single_region_unchanged():
    img = rand_img(3, 3, 29)
    out = overlay_boundaries(img, grid_segment(3, 3, 3, 3))
    assert np.array_equal(out.data, img.data)


def test_overlay_two_pixel_boundary():
    img = ImageBuffer.filled(2, 1, [0.5, 0.5, 0.5])
    lm = LabelMap(2, 1, np.array([[0, 1]], dtype=np.int32), 2)
    out = overlay_boundaries(img, lm)
    assert out.data.tolist() == [[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]]


def test_overlay_checkerboard_paints_everything():
    img = ImageBuffer.filled(2, 2, [0.5, 0.5, 0.5])
    lm = LabelMap(2, 2, np.array([[0, 1], [1, 0]], dtype=np.int32), 2)
    out = overlay_boundaries(img, lm)
    assert np.array_equal(out.data, np.broadcast_to((1.0, 0.0, 0.0), (2, 2, 3)))


def test_overlay_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        overlay_boundaries(rand_img(4, 4, 30), grid_segment(2, 2, 1, 1))


# -- quality_stats ---------------------------------------------------------------------

def test_quality_identical_images():
    img = rand_img(4, 4, 31)
    report = quality_stats(img, img, grid_segment(4, 4, 2, 2))
    assert report.mse == 0.0
    assert math.isinf(report.psnr_db)


def test_quality_black_vs_white():
    black = ImageBuffer.filled(4, 4, [0.0, 0.0, 0.0])
    white = ImageBuffer.filled(4, 4, [1.0, 1.0, 1.0])
    report = quality_stats(black, white, grid_segment(4, 4, 4, 4))
    assert report.mse == 1.0
    assert report.psnr_db == 0.0


def test_quality_boundary_pairs_on_2x2_grid():
    labels = grid_segment(4, 4, 2, 2)
    img = rand_img(4, 4, 32)
    report = quality_stats(img, img, labels)
    # 4 vertical-boundary pairs + 4 horizontal-boundary pairs
    assert report.boundary_px == 8
    assert report.boundary_per_region == 2.0
    assert boundary_pair_count(labels) == 8


def test_quality_line_format():
    img = rand_img(4, 4, 33)
    labels = grid_segment(4, 4, 2, 2)
    line = quality_stats(img, ImageBuffer.filled(4, 4, [0.5, 0.5, 0.5]), labels).as_line()
    assert re.fullmatch(
        r"mse=[0-9.e+-]+ psnr_db=[0-9.e+-]+ boundary_px=\d+ boundary_per_region=[0-9.e+-]+",
        line,
    )
    zero = quality_stats(img, img, labels).as_line()
    assert "mse=0 " in zero and "psnr_db=inf" in zero


def test_quality_input_validation():
    img = rand_img(4, 4, 34)
    with pytest.raises(WrongColorSpace):
        quality_stats(rgb_to_lab(img), img, grid_segment(4, 4, 2, 2))
    with pytest.raises(DimensionMismatch):
        quality_stats(img, rand_img(2, 2, 35), grid_segment(4, 4, 2, 2))
    with pytest.raises(DimensionMismatch):
        quality_stats(img, img, grid_segment(2, 2, 1, 1))
