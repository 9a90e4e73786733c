import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circrot.circmath import DegenerateInputError
from circrot.geometry import (
    largest_inscribed_rect,
    resize_bilinear,
    rotate_and_crop,
    rotate_image,
    rotated_canvas_shape,
    validate_image,
)
from circrot.images import read_png, read_raw, write_png, write_raw
from oracles import brute_force_rect


def test_rect_no_rotation():
    rect = largest_inscribed_rect(100, 100, 0.0)
    assert (rect.crop_width, rect.crop_height) == pytest.approx((100.0, 100.0))


def test_rect_square_at_45():
    rect = largest_inscribed_rect(100, 100, 45.0)
    assert rect.crop_width == pytest.approx(70.7107, abs=1e-4)
    assert rect.crop_height == pytest.approx(70.7107, abs=1e-4)
    bw, bh = brute_force_rect(100, 100, 45.0)
    assert abs(bw - rect.crop_width) <= 1 and abs(bh - rect.crop_height) <= 1
    assert largest_inscribed_rect(1, 1, 45.0).area == pytest.approx(0.5, abs=1e-6)


def test_rect_200_by_100_at_30():
    rect = largest_inscribed_rect(200, 100, 30.0)
    bw, bh = brute_force_rect(200, 100, 30.0)
    assert abs(bw - rect.crop_width) <= 1 and abs(bh - rect.crop_height) <= 1


def test_rect_matches_brute_force_random():
    rng = np.random.default_rng(42)
    for _ in range(50):
        w, h = rng.integers(20, 160, 2)
        theta = rng.uniform(0, 360)
        rect = largest_inscribed_rect(int(w), int(h), theta)
        bw, bh = brute_force_rect(int(w), int(h), theta)
        assert abs(bw - rect.crop_width) <= 1, (w, h, theta)
        assert abs(bh - rect.crop_height) <= 1, (w, h, theta)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 500), st.integers(1, 500), st.floats(0, 360, exclude_max=True))
def test_rect_symmetries(w, h, theta):
    a = largest_inscribed_rect(w, h, theta)
    turned = largest_inscribed_rect(h, w, theta + 90.0)
    mirrored = largest_inscribed_rect(w, h, -theta)
    assert (turned.crop_width, turned.crop_height) == pytest.approx((a.crop_width, a.crop_height), rel=1e-9, abs=1e-9)
    assert (mirrored.crop_width, mirrored.crop_height) == pytest.approx((a.crop_width, a.crop_height), rel=1e-9, abs=1e-9)
    assert 0 < a.crop_width * a.crop_height <= w * h * (1 + 1e-12)


def test_rect_rejects_bad_size():
    with pytest.raises(ValueError):
        largest_inscribed_rect(0, 10, 5.0)


def test_rotate_identity():
    img = np.random.default_rng(0).random((30, 50))
    out = rotate_image(img, 0.0)
    assert np.array_equal(out, img)
    assert np.array_equal(rotate_image(img, 360.0), img)


def test_rotate_quarter_turn_permutes_pixels():
    img = np.random.default_rng(1).random((50, 100))
    out = rotate_image(img, 90.0)
    assert out.shape == (100, 50)
    h, w = img.shape
    # counterclockwise as displayed: the right column becomes the top row
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            assert out[i, j] == img[j, w - 1 - i]


def test_general_path_agrees_with_quarter_turn():
    img = np.random.default_rng(2).random((40, 60))
    exact = rotate_image(img, 90.0)
    near = rotate_image(img, 90.0 + 1e-6)
    assert near.shape == exact.shape
    assert np.abs(near - exact).max() < 1e-5


def test_rotate_uniform_interior():
    img = np.full((60, 80), 0.3)
    out = rotate_image(img, 30.0)
    assert out.shape[::-1] == rotated_canvas_shape(80, 60, 30.0)
    rect = largest_inscribed_rect(80, 60, 30.0)
    rows = slice(int(rect.center_y - rect.crop_height / 2) + 1, int(rect.center_y + rect.crop_height / 2))
    cols = slice(int(rect.center_x - rect.crop_width / 2) + 1, int(rect.center_x + rect.crop_width / 2))
    assert np.abs(out[rows, cols] - 0.3).max() <= 1e-6
    assert out.min() == 0.0  # corners are fill


def test_rotate_color_image():
    img = np.random.default_rng(3).random((20, 30, 3))
    out = rotate_image(img, 17.0)
    assert out.ndim == 3 and out.shape[2] == 3


def test_validate_image_errors():
    with pytest.raises(DegenerateInputError):
        validate_image(np.zeros((0, 5)))
    with pytest.raises(ValueError):
        validate_image(np.full((4, 4), 1.5))
    with pytest.raises(ValueError):
        validate_image(np.zeros((4, 4, 2)))


def test_rotate_and_crop_zero_is_center_square():
    img = np.random.default_rng(4).random((40, 60))
    out = rotate_and_crop(img, 0.0, 40)
    np.testing.assert_allclose(out, img[:, 10:50], atol=1e-12)
    small = rotate_and_crop(img, 0.0, 20)
    np.testing.assert_allclose(small, resize_bilinear(img[:, 10:50], 20), atol=1e-12)


def test_rotate_and_crop_never_leaks_fill():
    ones = np.ones((96, 96))
    mins = [rotate_and_crop(ones, float(t), 64).min() for t in range(360)]
    assert min(mins) > 0.99
    rect = np.ones((50, 90))
    assert min(rotate_and_crop(rect, t + 0.5, 24).min() for t in range(0, 360, 7)) > 0.99


@pytest.mark.parametrize("theta", [0.1, 33.3, 271.7])
def test_rotate_and_crop_period(theta):
    img = np.random.default_rng(5).random((64, 64))
    assert np.array_equal(rotate_and_crop(img, theta, 32), rotate_and_crop(img, theta + 360.0, 32))
    assert np.array_equal(rotate_and_crop(img, theta, 32), rotate_and_crop(img, theta - 720.0, 32))


def test_rotate_and_crop_degenerate():
    with pytest.raises(DegenerateInputError):
        rotate_and_crop(np.ones((4, 4)), 45.0, 8)
    with pytest.raises(ValueError):
        rotate_and_crop(np.ones((40, 40)), 0.0, 0)


def test_png_round_trip(tmp_path):
    img = np.round(np.random.default_rng(6).random((12, 9)) * 255) / 255
    write_png(tmp_path / "a.png", img)
    np.testing.assert_array_equal(read_png(tmp_path / "a.png"), img)
    rgb = np.round(np.random.default_rng(7).random((5, 6, 3)) * 255) / 255
    write_png(tmp_path / "b.png", rgb)
    np.testing.assert_array_equal(read_png(tmp_path / "b.png"), rgb)


def test_raw_round_trip_is_lossless_for_float32(tmp_path):
    img = np.random.default_rng(8).random((7, 11)).astype(np.float32).astype(np.float64)
    write_raw(tmp_path / "a.raw", img)
    assert (tmp_path / "a.raw").read_bytes().startswith(b"11 7 1\n")
    np.testing.assert_array_equal(read_raw(tmp_path / "a.raw"), img)
    rgb = np.random.default_rng(9).random((3, 4, 3)).astype(np.float32).astype(np.float64)
    write_raw(tmp_path / "b.raw", rgb)
    np.testing.assert_array_equal(read_raw(tmp_path / "b.raw"), rgb)


def test_raw_rejects_truncated(tmp_path):
    (tmp_path / "bad.raw").write_bytes(b"4 4 1\n" + b"\0" * 8)
    with pytest.raises(ValueError):
        read_raw(tmp_path / "bad.raw")
