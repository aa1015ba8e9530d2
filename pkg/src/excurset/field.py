"""Lattice geometry, scalar-field containers, Gaussian smoothing and file I/O.

All numeric payloads are row-major float64, in memory and on disk, so the
simulation and analysis paths share one representation bit for bit.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, InvalidParameterError, ValidationError

FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

# Fixed palette for tri-region overlays (RGB).
OVERLAY_LOWER = (0x1F, 0x4F, 0xFF)  # blue
OVERLAY_POINT = (0xFF, 0xD7, 0x00)  # yellow
OVERLAY_UPPER = (0xE0, 0x20, 0x20)  # red


@dataclass(frozen=True)
class Lattice:
    """Rectangular pixel grid. Boundary interpolation needs adjacent pixels,
    hence the >= 2 requirement on both dimensions."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise InvalidParameterError(
                f"lattice must be at least 2x2, got {self.width}x{self.height}"
            )

    @property
    def npixels(self) -> int:
        return self.width * self.height


def _as_readonly_f64(values, shape):
    arr = np.ascontiguousarray(values, dtype=np.float64).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarField:
    """One float64 value per pixel, stored as a read-only (height, width) array."""

    lattice: Lattice
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _as_readonly_f64(self.values, (self.lattice.height, self.lattice.width))
        object.__setattr__(self, "values", arr)
        if not np.isfinite(arr).all():
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValidationError(f"non-finite value at pixel index {bad}")


@dataclass(frozen=True)
class FieldStack:
    """n observations of a scalar field, stored read-only as (n, height, width)."""

    lattice: Lattice
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 3:
            arr = arr.reshape(-1, self.lattice.height, self.lattice.width)
        if arr.shape[1:] != (self.lattice.height, self.lattice.width):
            raise ValidationError(
                f"stack shape {arr.shape} does not match lattice "
                f"{self.lattice.height}x{self.lattice.width}"
            )
        if arr.shape[0] < 2:
            raise ValidationError("a field stack needs at least 2 observations")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        if not np.isfinite(arr).all():
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValidationError(f"non-finite value at pixel index {bad}")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def gaussian_kernel_1d(fwhm_px: float) -> np.ndarray:
    """Unit-mass 1D Gaussian kernel, truncated at radius ceil(4*sigma).

    The 2D smoothing kernel is the outer product of this kernel with itself
    (square truncation window); renormalizing each factor to sum 1 makes the
    separable pass identical to dense convolution with the normalized 2D kernel.
    """
    if not fwhm_px > 0:
        raise InvalidParameterError(f"fwhm_px must be positive, got {fwhm_px}")
    sigma = fwhm_px / FWHM_TO_SIGMA
    radius = math.ceil(4.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolve_zero_padded(line: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    radius = kernel.size // 2
    padded = np.zeros(line.size + 2 * radius)
    padded[radius : radius + line.size] = line
    return np.convolve(padded, kernel, mode="valid")


def gaussian_smooth(f: ScalarField, fwhm_px: float) -> ScalarField:
    """Convolve with an isotropic Gaussian (zero padding at the image edges)."""
    k = gaussian_kernel_1d(fwhm_px)
    out = np.empty_like(f.values)
    for r in range(f.lattice.height):
        out[r, :] = _convolve_zero_padded(f.values[r, :], k)
    for c in range(f.lattice.width):
        out[:, c] = _convolve_zero_padded(out[:, c].copy(), k)
    return ScalarField(f.lattice, out)


# ---------------------------------------------------------------------------
# Raw stack format: binary little-endian float64 payload plus a JSON sidecar
# header at <path>.json describing the geometry.
# ---------------------------------------------------------------------------

_HEADER_FIXED = {"dtype": "f64", "order": "row-major", "endianness": "little"}


def _sidecar(path) -> Path:
    return Path(str(path) + ".json")


def save_field_stack(path, stack: FieldStack) -> None:
    header = {
        "width": stack.lattice.width,
        "height": stack.lattice.height,
        "n": stack.n,
        **_HEADER_FIXED,
    }
    Path(path).write_bytes(stack.values.astype("<f8").tobytes(order="C"))
    _sidecar(path).write_text(json.dumps(header, sort_keys=True) + "\n")


def load_field_stack(path) -> FieldStack:
    path = Path(path)
    sidecar = _sidecar(path)
    if not path.exists():
        raise FormatError(f"payload file not found: {path}")
    if not sidecar.exists():
        raise FormatError(f"header sidecar not found: {sidecar}")
    try:
        header = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"header {sidecar} is not valid JSON: {exc}") from exc
    for key, expected in _HEADER_FIXED.items():
        if header.get(key) != expected:
            raise FormatError(f"header field {key!r} must be {expected!r}, got {header.get(key)!r}")
    try:
        width, height, n = int(header["width"]), int(header["height"]), int(header["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"header {sidecar} is missing width/height/n") from exc
    payload = path.read_bytes()
    expected_bytes = n * width * height * 8
    if len(payload) != expected_bytes:
        raise FormatError(
            f"payload size mismatch: header declares {expected_bytes} bytes "
            f"(n={n}, {width}x{height}), file has {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(n, height, width)
    if not np.isfinite(values).all():
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise ValidationError(f"non-finite value at pixel index {bad}")
    return FieldStack(Lattice(width, height), values)


# ---------------------------------------------------------------------------
# Mask export: PNG (0/255 grayscale), CSV (row,col,value), tri-region overlay.
# ---------------------------------------------------------------------------


def save_mask(path, mask: np.ndarray) -> None:
    """Write a binary mask as PNG (by .png extension) or CSV (by .csv)."""
    path = Path(path)
    mask = np.asarray(mask, dtype=bool)
    if path.suffix.lower() == ".png":
        img = Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L")
        img.save(path)
    elif path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "value"])
            for r in range(mask.shape[0]):
                for c in range(mask.shape[1]):
                    writer.writerow([r, c, int(mask[r, c])])
    else:
        raise InvalidParameterError(f"unsupported mask extension: {path.suffix!r}")


def load_mask_csv(path) -> np.ndarray:
    """Read a mask written by :func:`save_mask` in CSV form."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["row", "col", "value"]:
            raise FormatError(f"unexpected mask CSV header in {path}: {header}")
        for rec in reader:
            rows.append((int(rec[0]), int(rec[1]), int(rec[2])))
    if not rows:
        raise FormatError(f"mask CSV {path} has no data rows")
    height = max(r for r, _, _ in rows) + 1
    width = max(c for _, c, _ in rows) + 1
    mask = np.zeros((height, width), dtype=bool)
    for r, c, v in rows:
        mask[r, c] = bool(v)
    return mask


def save_overlay_png(path, upper: np.ndarray, point: np.ndarray, lower: np.ndarray) -> None:
    """Render nested region masks with the fixed palette (lower blue,
    point yellow, upper red) over a black background."""
    lower = np.asarray(lower, dtype=bool)
    point = np.asarray(point, dtype=bool)
    upper = np.asarray(upper, dtype=bool)
    rgb = np.zeros(lower.shape + (3,), dtype=np.uint8)
    rgb[lower] = OVERLAY_LOWER
    rgb[point] = OVERLAY_POINT
    rgb[upper] = OVERLAY_UPPER
    Image.fromarray(rgb, mode="RGB").save(Path(path))
