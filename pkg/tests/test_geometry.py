import numpy as np
import pytest

from facestack import ConfigurationError
from facestack.geometry import (
    F_PATTERN,
    HS_PATTERN,
    PATTERN_VARIANTS,
    NoiseSpec,
    PatternSpec,
    add_gaussian_noise,
    add_motion_blur,
    downscale,
    eye_transform,
    normalize_pattern,
    pattern_eyes,
    prepare_pattern,
    to_gray,
)
from facestack.geometry import _bilinear_sample


def test_pattern_constants():
    assert (F_PATTERN.width, F_PATTERN.height) == (59, 65)
    assert F_PATTERN.eye_left == (16.0, 17.0)
    assert F_PATTERN.eye_right == (42.0, 17.0)
    assert (HS_PATTERN.width, HS_PATTERN.height) == (159, 155)
    assert HS_PATTERN.eye_left == (66.0, 47.0)
    assert HS_PATTERN.eye_right == (92.0, 47.0)
    # both anchor pairs sit 26px apart on the same row
    for spec in (F_PATTERN, HS_PATTERN):
        assert spec.eye_right[0] - spec.eye_left[0] == 26.0
        assert spec.eye_left[1] == spec.eye_right[1]


def test_pattern_spec_validation():
    with pytest.raises(ConfigurationError):
        PatternSpec("X", 10, 10, (12.0, 5.0), (15.0, 5.0))
    with pytest.raises(ConfigurationError):
        PatternSpec("X", 30, 30, (20.0, 5.0), (10.0, 5.0))


def test_to_gray_rec601():
    px = np.zeros((1, 3, 3), dtype=np.uint8)
    px[0, 0] = (255, 0, 0)
    px[0, 1] = (0, 255, 0)
    px[0, 2] = (0, 0, 255)
    assert to_gray(px).tolist() == [[76, 150, 29]]
    # equal channels pass through unchanged
    flat = np.full((2, 2, 3), 137, dtype=np.uint8)
    assert np.array_equal(to_gray(flat), np.full((2, 2), 137, dtype=np.uint8))


def test_bilinear_interior_and_outside():
    img = np.array([[0.0, 100.0], [200.0, 255.0]])
    xs = np.array([0.5, 0.25, -1.0, 5.0])
    ys = np.array([0.5, 0.0, 0.0, 0.0])
    got = _bilinear_sample(img, xs, ys)
    assert got[0] == pytest.approx(138.75)
    assert got[1] == pytest.approx(25.0)
    assert got[2] == 0.0  # out of raster reads as zero
    assert got[3] == 0.0


def test_eye_transform_hits_anchors():
    rng = np.random.default_rng(3)
    for _ in range(20):
        el = tuple(rng.uniform(20, 100, 2))
        er = (el[0] + rng.uniform(5, 80), el[1] + rng.uniform(-40, 40))
        t = eye_transform(el, er, F_PATTERN)
        np.testing.assert_allclose(t.apply(el), F_PATTERN.eye_left, atol=1e-9)
        np.testing.assert_allclose(t.apply(er), F_PATTERN.eye_right, atol=1e-9)
        back = t.inverse().apply(t.apply((7.0, 11.0)))
        np.testing.assert_allclose(back, (7.0, 11.0), atol=1e-9)


def test_eye_transform_rejects_coincident_eyes():
    with pytest.raises(ConfigurationError):
        eye_transform((5.0, 5.0), (5.0, 5.0), F_PATTERN)


def test_normalize_identity_when_already_anchored():
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (F_PATTERN.height, F_PATTERN.width), dtype=np.uint8)
    out = normalize_pattern(img, F_PATTERN.eye_left, F_PATTERN.eye_right, F_PATTERN)
    assert np.array_equal(out, img)


def test_normalize_rotated_dots_land_on_anchors():
    img = np.zeros((120, 120), dtype=np.uint8)
    el, er = (30.0, 50.0), (50.0, 30.0)  # 45 degrees, distance ~28.3
    img[50, 30] = 255
    img[30, 50] = 255
    out = normalize_pattern(img, el, er, F_PATTERN)
    assert out.shape == (F_PATTERN.height, F_PATTERN.width)
    assert out[17, 16] == 255
    assert out[17, 42] == 255
    assert out[:5, :5].max() == 0  # corner maps outside the lit pixels


def test_normalize_zero_fills_outside_source():
    img = np.full((40, 40), 200, dtype=np.uint8)
    # eyes near the top edge: pattern rows above/below the 40px source band
    # must read as zero while the band itself keeps the flat value
    out = normalize_pattern(img, (7.0, 5.0), (33.0, 5.0), F_PATTERN)
    assert out[5].max() == 0     # source row -7
    assert out[60].max() == 0    # source row 48
    assert out[30, 25] == 200    # source (16, 18), interior


def test_downscale_pixel_center_mapping():
    img = (10 * np.arange(4, dtype=np.uint8))[None, :].repeat(4, axis=0)
    out = downscale(img, 2, 2)
    # targets sample source x = 0.5 and 2.5
    assert out.tolist() == [[5, 25], [5, 25]]


def test_downscale_same_size_is_copy():
    img = np.arange(12, dtype=np.uint8).reshape(3, 4)
    out = downscale(img, 4, 3)
    assert np.array_equal(out, img)
    assert out is not img


def test_downscale_rounds_half_up():
    img = np.array([[0, 1]], dtype=np.uint8)
    assert downscale(img, 1, 1).tolist() == [[1]]  # mean 0.5 rounds up


def test_noise_spec_validation():
    with pytest.raises(ConfigurationError):
        NoiseSpec("speckle")
    with pytest.raises(ConfigurationError):
        NoiseSpec("gaussian", gaussian_variance=0.2)
    with pytest.raises(ConfigurationError):
        NoiseSpec("motion_blur", motion_length=4)
    with pytest.raises(ConfigurationError):
        NoiseSpec("motion_blur", motion_length=23)


def test_gaussian_noise_seeded():
    img = np.full((30, 30), 128, dtype=np.uint8)
    spec = NoiseSpec("gaussian", gaussian_variance=0.05, seed=9)
    a = add_gaussian_noise(img, spec)
    b = add_gaussian_noise(img, spec)
    assert np.array_equal(a, b)
    c = add_gaussian_noise(img, NoiseSpec("gaussian", gaussian_variance=0.05, seed=10))
    assert not np.array_equal(a, c)
    assert float(np.mean(a)) == pytest.approx(128, abs=4)


def test_gaussian_zero_variance_is_identity():
    img = np.arange(64, dtype=np.uint8).reshape(8, 8)
    out = add_gaussian_noise(img, NoiseSpec("gaussian", gaussian_variance=0.0))
    assert np.array_equal(out, img)


def test_gaussian_noise_std_matches_clipped_oracle():
    # variance 0.1 on constant 128: clipping at [0,1] shrinks the observed
    # spread, so compare against a direct simulation of the same clamp
    img = np.full((400, 400), 128, dtype=np.uint8)
    out = add_gaussian_noise(img, NoiseSpec("gaussian", gaussian_variance=0.1, seed=3))
    got = float(np.std(out / 255.0))

    rng = np.random.default_rng(123)
    sim = np.clip(128 / 255.0 + rng.normal(0, np.sqrt(0.1), 1_000_000), 0.0, 1.0)
    assert got == pytest.approx(float(np.std(sim)), rel=0.05)


def test_motion_blur_box_window():
    img = np.zeros((2, 5), dtype=np.uint8)
    img[:, 2] = 255
    out = add_motion_blur(img, NoiseSpec("motion_blur", motion_length=3))
    assert out.tolist() == [[0, 85, 85, 85, 0]] * 2


def test_motion_blur_constant_unchanged():
    img = np.full((4, 9), 77, dtype=np.uint8)
    out = add_motion_blur(img, NoiseSpec("motion_blur", motion_length=7))
    assert np.array_equal(out, img)


def test_motion_blur_length_one_identity():
    img = np.arange(20, dtype=np.uint8).reshape(4, 5)
    out = add_motion_blur(img, NoiseSpec("motion_blur", motion_length=1))
    assert np.array_equal(out, img)


def test_prepare_pattern_variants():
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (300, 300), dtype=np.uint8)
    eyes = ((120.0, 140.0), (172.0, 140.0))
    shapes = {"F": (65, 59), "HS": (155, 159), "HS64": (64, 64),
              "HS32": (32, 32), "HS16": (16, 16)}
    for pid, shape in shapes.items():
        assert prepare_pattern(img, *eyes, pid).shape == shape
    with pytest.raises(ConfigurationError):
        prepare_pattern(img, *eyes, "HS8")


def test_prepare_pattern_noise_routing():
    img = np.full((300, 300), 128, dtype=np.uint8)
    eyes = ((120.0, 140.0), (172.0, 140.0))
    clean = prepare_pattern(img, *eyes, "F")
    noisy = prepare_pattern(img, *eyes, "F",
                            noise=NoiseSpec("gaussian", gaussian_variance=0.05, seed=1))
    assert not np.array_equal(clean, noisy)
    blurred = prepare_pattern(img, *eyes, "F",
                              noise=NoiseSpec("motion_blur", motion_length=9))
    assert np.array_equal(clean, blurred)  # flat field survives a box blur


def test_pattern_eyes_remap():
    assert pattern_eyes("F") == (F_PATTERN.eye_left, F_PATTERN.eye_right)
    (lx, ly), (rx, ry) = pattern_eyes("HS64")
    assert lx == pytest.approx((66.0 + 0.5) * 64 / 159 - 0.5)
    assert ly == pytest.approx((47.0 + 0.5) * 64 / 155 - 0.5)
    # inter-eye spacing shrinks by the horizontal scale factor
    assert rx - lx == pytest.approx(26.0 * 64 / 159)
    assert ry == ly


def test_pattern_variants_table():
    assert set(PATTERN_VARIANTS) == {"F", "HS", "HS64", "HS32", "HS16"}
    assert PATTERN_VARIANTS["HS32"] == (HS_PATTERN, 32)
