import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from excurset.errors import FormatError, InvalidParameterError, ValidationError
from excurset.field import (
    FieldStack,
    Lattice,
    ScalarField,
    gaussian_kernel_1d,
    gaussian_smooth,
    load_field_stack,
    load_mask_csv,
    save_field_stack,
    save_mask,
    save_overlay_png,
)
from reference import dense_convolve

SIGMA_5PX = 5.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def test_lattice_requires_two_pixels_per_axis():
    with pytest.raises(InvalidParameterError):
        Lattice(1, 5)
    with pytest.raises(InvalidParameterError):
        Lattice(5, 1)


def test_scalar_field_ic_rejects_nan():
    values = np.zeros((3, 3))
    values[1, 2] = np.nan
    with pytest.raises(ValidationError, match="pixel index 5"):
        ScalarField(Lattice(3, 3), values)


def test_constant_field_interior_exact():
    lat = Lattice(40, 40)
    out = gaussian_smooth(ScalarField(lat, np.full((40, 40), 7.0)), 5.0)
    margin = math.ceil(4.0 * SIGMA_5PX)
    interior = out.values[margin:-margin, margin:-margin]
    assert np.all(np.abs(interior - 7.0) <= 1e-12)
    # zero-padding attenuates the border
    assert out.values[0, 0] < 7.0


def test_impulse_matches_dense_convolution_oracle():
    lat = Lattice(100, 100)
    values = np.zeros((100, 100))
    values[50, 50] = 1.0
    out = gaussian_smooth(ScalarField(lat, values), 5.0)
    expected = dense_convolve(values, 5.0)
    assert np.max(np.abs(out.values - expected)) <= 1e-12


def test_impulse_mass_preserved():
    lat = Lattice(64, 64)
    values = np.zeros((64, 64))
    values[32, 30] = 1.0
    out = gaussian_smooth(ScalarField(lat, values), 5.0)
    # kernel renormalized to unit mass; impulse far from the border loses nothing
    assert abs(out.values.sum() - 1.0) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-5, 5),
    b=st.floats(-5, 5),
    seed=st.integers(0, 2**31),
    fwhm=st.floats(0.8, 6.0),
)
def test_smoothing_linearity(a, b, seed, fwhm):
    rng = np.random.default_rng(seed)
    lat = Lattice(12, 9)
    f = rng.standard_normal((9, 12))
    g = rng.standard_normal((9, 12))
    lhs = gaussian_smooth(ScalarField(lat, a * f + b * g), fwhm).values
    rhs = a * gaussian_smooth(ScalarField(lat, f), fwhm).values + b * gaussian_smooth(
        ScalarField(lat, g), fwhm
    ).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_kernel_radius_and_unit_mass():
    k = gaussian_kernel_1d(5.0)
    assert k.size == 2 * math.ceil(4.0 * SIGMA_5PX) + 1
    assert abs(k.sum() - 1.0) <= 1e-15


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_smooth_rejects_nonpositive_fwhm(bad):
    lat = Lattice(4, 4)
    with pytest.raises(InvalidParameterError):
        gaussian_smooth(ScalarField(lat, np.zeros((4, 4))), bad)


def test_stack_roundtrip_bit_exact(tmp_path, rng):
    stack = FieldStack(Lattice(100, 100), rng.standard_normal((40, 100, 100)))
    path = tmp_path / "stack.f64"
    save_field_stack(path, stack)
    loaded = load_field_stack(path)
    assert loaded.n == 40
    assert loaded.lattice == stack.lattice
    assert loaded.values.tobytes() == stack.values.tobytes()


def test_payload_size_mismatch_is_format_error(tmp_path):
    path = tmp_path / "stack.f64"
    # header declares n=2 on a 3x3 lattice but only one observation of payload
    path.write_bytes(np.zeros(9).tobytes())
    (tmp_path / "stack.f64.json").write_text(
        json.dumps({"width": 3, "height": 3, "n": 2, "dtype": "f64",
                    "order": "row-major", "endianness": "little"})
    )
    with pytest.raises(FormatError, match="size mismatch"):
        load_field_stack(path)


def test_nan_payload_is_validation_error(tmp_path):
    values = np.zeros((2, 3, 3))
    values[1, 0, 1] = np.nan
    path = tmp_path / "stack.f64"
    path.write_bytes(values.astype("<f8").tobytes())
    (tmp_path / "stack.f64.json").write_text(
        json.dumps({"width": 3, "height": 3, "n": 2, "dtype": "f64",
                    "order": "row-major", "endianness": "little"})
    )
    with pytest.raises(ValidationError, match="pixel index 10"):
        load_field_stack(path)


def test_missing_sidecar_is_format_error(tmp_path):
    path = tmp_path / "stack.f64"
    path.write_bytes(b"\x00" * 72)
    with pytest.raises(FormatError, match="sidecar"):
        load_field_stack(path)


def test_mask_csv_two_by_two(tmp_path):
    mask = np.array([[1, 0], [0, 1]], dtype=bool)
    path = tmp_path / "mask.csv"
    save_mask(path, mask)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "row,col,value"
    assert lines[1:] == ["0,0,1", "0,1,0", "1,0,0", "1,1,1"]


def test_mask_csv_roundtrip(tmp_path, rng):
    mask = rng.random((7, 5)) > 0.5
    path = tmp_path / "mask.csv"
    save_mask(path, mask)
    assert np.array_equal(load_mask_csv(path), mask)


def test_mask_png_is_grayscale_0_255(tmp_path):
    mask = np.array([[1, 0], [0, 1]], dtype=bool)
    path = tmp_path / "mask.png"
    save_mask(path, mask)
    img = np.asarray(Image.open(path))
    assert img.dtype == np.uint8
    assert np.array_equal(img, np.where(mask, 255, 0))


def test_overlay_palette(tmp_path):
    lower = np.array([[1, 1, 1, 0]], dtype=bool).reshape(2, 2)
    point = np.array([[1, 1, 0, 0]], dtype=bool).reshape(2, 2)
    upper = np.array([[1, 0, 0, 0]], dtype=bool).reshape(2, 2)
    path = tmp_path / "overlay.png"
    save_overlay_png(path, upper, point, lower)
    img = np.asarray(Image.open(path))
    assert tuple(img[0, 0]) == (0xE0, 0x20, 0x20)  # upper red
    assert tuple(img[0, 1]) == (0xFF, 0xD7, 0x00)  # point yellow
    assert tuple(img[1, 0]) == (0x1F, 0x4F, 0xFF)  # lower blue
    assert tuple(img[1, 1]) == (0, 0, 0)
