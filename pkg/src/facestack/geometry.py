"""Pattern geometry: eye-anchored normalization, rescaling, noise injection.

A grayscale image is a 2-D uint8 numpy array indexed [row, col]; points are
(x, y) with x along columns and y along rows, pixel centers on the integer
grid. The face pattern (F) is 59x65 with the eye centers anchored at
(16, 17) and (42, 17), giving an inter-eye distance of 26 pixels. The
head-and-shoulders pattern (HS) is 159x155 at the same scale, leaving 50
pixels of context left/right of the F window, 30 above and 60 below.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class PatternSpec:
    kind: str
    width: int
    height: int
    eye_left: tuple
    eye_right: tuple

    def __post_init__(self):
        for ex, ey in (self.eye_left, self.eye_right):
            if not (0 <= ex <= self.width - 1 and 0 <= ey <= self.height - 1):
                raise ConfigurationError(f"eye target ({ex},{ey}) outside {self.width}x{self.height} pattern")
        if self.eye_left[0] >= self.eye_right[0]:
            raise ConfigurationError("left eye target must sit left of the right eye target")


F_PATTERN = PatternSpec("F", 59, 65, (16.0, 17.0), (42.0, 17.0))
HS_PATTERN = PatternSpec("HS", 159, 155, (66.0, 47.0), (92.0, 47.0))

MAX_GAUSSIAN_VARIANCE = 0.1
MAX_MOTION_LENGTH = 21


@dataclass(frozen=True)
class NoiseSpec:
    kind: str  # "gaussian" or "motion_blur"
    gaussian_variance: float = 0.0
    motion_length: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "motion_blur"):
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.gaussian_variance <= MAX_GAUSSIAN_VARIANCE:
            raise ConfigurationError(
                f"gaussian variance {self.gaussian_variance} outside [0, {MAX_GAUSSIAN_VARIANCE}]")
        if not 1 <= self.motion_length <= MAX_MOTION_LENGTH or self.motion_length % 2 == 0:
            raise ConfigurationError(
                f"motion length {self.motion_length} must be odd and in [1, {MAX_MOTION_LENGTH}]")


def _require_gray(img):
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ConfigurationError("expected a 2-D uint8 grayscale image")
    return img


def _round_u8(values):
    # round half up, clamp into the 8-bit range
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def to_gray(rgb):
    """Convert an HxWx3 RGB raster to grayscale via the Rec.601 luma weights."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ConfigurationError("expected an HxWx3 RGB raster")
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return _round_u8(luma)


@dataclass(frozen=True)
class SimilarityTransform:
    """Rotation + uniform scale + translation: (x,y) -> (a*x - b*y + tx, b*x + a*y + ty)."""

    a: float
    b: float
    tx: float
    ty: float

    @property
    def scale(self):
        return math.hypot(self.a, self.b)

    @property
    def rotation(self):
        return math.atan2(self.b, self.a)

    def apply(self, point):
        x, y = point
        return (self.a * x - self.b * y + self.tx, self.b * x + self.a * y + self.ty)

    def inverse(self):
        det = self.a * self.a + self.b * self.b
        ia, ib = self.a / det, -self.b / det
        itx = -(ia * self.tx - ib * self.ty)
        ity = -(ib * self.tx + ia * self.ty)
        return SimilarityTransform(ia, ib, itx, ity)


def eye_transform(eye_left, eye_right, spec):
    """Similarity transform taking the source eye centers onto the spec's targets."""
    px = eye_right[0] - eye_left[0]
    py = eye_right[1] - eye_left[1]
    if px == 0 and py == 0:
        raise ConfigurationError("coincident eye coordinates give a degenerate transform")
    qx = spec.eye_right[0] - spec.eye_left[0]
    qy = spec.eye_right[1] - spec.eye_left[1]
    # complex division (qx + i qy) / (px + i py)
    denom = px * px + py * py
    a = (qx * px + qy * py) / denom
    b = (qy * px - qx * py) / denom
    tx = spec.eye_left[0] - (a * eye_left[0] - b * eye_left[1])
    ty = spec.eye_left[1] - (b * eye_left[0] + a * eye_left[1])
    return SimilarityTransform(a, b, tx, ty)


def _bilinear_sample(img, xs, ys):
    """Sample img at float coordinates, zero outside the raster."""
    h, w = img.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0

    out = np.zeros(xs.shape, dtype=np.float64)
    for dx, dy, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        ix = x0 + dx
        iy = y0 + dy
        ok = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
        vals = np.zeros(xs.shape, dtype=np.float64)
        vals[ok] = img[iy[ok], ix[ok]]
        out += wgt * vals
    return out


def normalize_pattern(img, eye_left, eye_right, spec):
    """Rotate, scale and crop so the eyes land on the spec's anchor pixels.

    Bilinear sampling; source reads outside the image contribute zero.
    """
    img = _require_gray(img)
    t = eye_transform(eye_left, eye_right, spec)
    inv = t.inverse()
    xs, ys = np.meshgrid(np.arange(spec.width, dtype=np.float64),
                         np.arange(spec.height, dtype=np.float64))
    sx = inv.a * xs - inv.b * ys + inv.tx
    sy = inv.b * xs + inv.a * ys + inv.ty
    return _round_u8(_bilinear_sample(img.astype(np.float64), sx, sy))


def downscale(img, w, h):
    """Bilinear resample to w x h (pixel-center aligned, edges replicated)."""
    img = _require_gray(img)
    if w < 1 or h < 1:
        raise ConfigurationError("target size must be at least 1x1")
    src_h, src_w = img.shape
    if (w, h) == (src_w, src_h):
        return img.copy()
    xs = (np.arange(w, dtype=np.float64) + 0.5) * (src_w / w) - 0.5
    ys = (np.arange(h, dtype=np.float64) + 0.5) * (src_h / h) - 0.5
    xs = np.clip(xs, 0.0, src_w - 1.0)
    ys = np.clip(ys, 0.0, src_h - 1.0)
    gx, gy = np.meshgrid(xs, ys)
    return _round_u8(_bilinear_sample(img.astype(np.float64), gx, gy))


def add_gaussian_noise(img, spec):
    """Additive Gaussian noise on the normalized [0,1] intensity scale."""
    img = _require_gray(img)
    if spec.kind != "gaussian":
        raise ConfigurationError("add_gaussian_noise needs a gaussian NoiseSpec")
    if spec.gaussian_variance == 0.0:
        return img.copy()
    rng = np.random.default_rng(spec.seed)
    noisy = img / 255.0 + rng.normal(0.0, math.sqrt(spec.gaussian_variance), img.shape)
    return _round_u8(np.clip(noisy, 0.0, 1.0) * 255.0)


def add_motion_blur(img, spec):
    """Horizontal 1xL box blur (uniform weights), edges replicated."""
    img = _require_gray(img)
    if spec.kind != "motion_blur":
        raise ConfigurationError("add_motion_blur needs a motion_blur NoiseSpec")
    length = spec.motion_length
    if length == 1:
        return img.copy()
    r = length // 2
    padded = np.pad(img.astype(np.float64), ((0, 0), (r, r)), mode="edge")
    csum = np.cumsum(padded, axis=1)
    csum = np.concatenate([np.zeros((img.shape[0], 1)), csum], axis=1)
    sums = csum[:, length:] - csum[:, :-length]
    return _round_u8(sums / length)


# named pattern variants: base window plus optional square downscale
PATTERN_VARIANTS = {
    "F": (F_PATTERN, 0),
    "HS": (HS_PATTERN, 0),
    "HS64": (HS_PATTERN, 64),
    "HS32": (HS_PATTERN, 32),
    "HS16": (HS_PATTERN, 16),
}


def prepare_pattern(img, eye_left, eye_right, pattern_id, noise=None):
    """Normalize one image to a named pattern, optionally adding noise."""
    try:
        spec, size = PATTERN_VARIANTS[pattern_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown pattern {pattern_id!r}; choose from {', '.join(PATTERN_VARIANTS)}") from None
    out = normalize_pattern(img, eye_left, eye_right, spec)
    if size:
        out = downscale(out, size, size)
    if noise is not None and noise.kind != "none":
        if noise.kind == "gaussian":
            out = add_gaussian_noise(out, noise)
        else:
            out = add_motion_blur(out, noise)
    return out


def pattern_eyes(pattern_id):
    """Eye anchor coordinates in a named pattern's pixel frame."""
    spec, size = PATTERN_VARIANTS[pattern_id]
    if not size:
        return spec.eye_left, spec.eye_right
    # downscale maps pixel centers: x_src = (x_dst + 0.5) * src/dst - 0.5
    sx, sy = spec.width / size, spec.height / size
    remap = lambda p: ((p[0] + 0.5) / sx - 0.5, (p[1] + 0.5) / sy - 0.5)
    return remap(spec.eye_left), remap(spec.eye_right)
