"""Procedural face-like corpus with a learnable gender signal.

Each image is a flat-shaded head over a plain background, posed by a random
similarity transform (eye distance, small rotation, translation jitter) with
the exact eye coordinates kept as ground truth. The class signal is put
where the real pipeline looks for it:

- forehead and chin bands carry a sinusoidal stripe texture, horizontal for
  the female class and vertical for the male class (drives HOG/LBP/LOSIB on
  the face window);
- the female class gets long side hair and narrower shoulders (visible only
  in the head-and-shoulders window).

Geometry is chosen so the full head-and-shoulders crop fits the canvas for
every admissible pose. Per-identity intensity/frequency/phase jitter plus
pixel noise keep the classes from being trivially separable by one pixel.
"""

import math
import os

import numpy as np

from .dataset import AGE_GROUPS, Manifest, Sample, save_manifest
from .errors import ConfigurationError
from .geometry import _round_u8
from .pgm import write_pgm

CANVAS_W = 260
CANVAS_H = 270

_EYE_HALF = 16.0       # canonical half inter-eye distance
_AGE_WEIGHTS = (0.20, 0.30, 0.30, 0.15, 0.05)  # last entry is "unknown"


def synth_sample(rng, gender):
    """Render one sample; returns (image, eye_left, eye_right, age_group)."""
    # pose: d in [28,38] keeps the HS window inside the canvas
    d = rng.uniform(28.0, 38.0)
    theta = float(np.clip(rng.normal(0.0, 0.025), -0.06, 0.06))
    mx = 130.0 + rng.uniform(-3.0, 3.0)
    my = 96.0 + rng.uniform(-3.0, 3.0)
    s = d / (2.0 * _EYE_HALF)

    # canonical coordinates of every canvas pixel (origin at eye midpoint)
    xx, yy = np.meshgrid(np.arange(CANVAS_W, dtype=np.float64),
                         np.arange(CANVAS_H, dtype=np.float64))
    ct, st = math.cos(theta), math.sin(theta)
    xc = (ct * (xx - mx) + st * (yy - my)) / s
    yc = (-st * (xx - mx) + ct * (yy - my)) / s

    # per-identity appearance jitter
    bg = rng.uniform(60.0, 80.0)
    skin = rng.uniform(160.0, 180.0)
    hair_val = rng.uniform(40.0, 60.0)
    period = rng.uniform(3.5, 6.5)
    amp = rng.uniform(24.0, 36.0)
    phase = rng.uniform(0.0, 2.0 * math.pi)

    img = np.full((CANVAS_H, CANVAS_W), bg)

    shoulder_half = 68.0 if gender == "female" else 85.0
    shoulders = (yc >= 95.0) & (yc <= 160.0) & (np.abs(xc) <= shoulder_half)
    img[shoulders] = 120.0

    if gender == "female":
        side = (np.abs(xc) >= 56.0) & (np.abs(xc) <= 74.0) & (yc >= -30.0) & (yc <= 95.0)
        img[side] = hair_val

    face = (xc / 52.0) ** 2 + ((yc - 18.0) / 66.0) ** 2 <= 1.0
    img[face] = skin

    cap = face & (yc <= -26.0)
    img[cap] = hair_val

    # the class texture: stripe direction flips with gender
    bands = face & (((yc >= -18.0) & (yc <= -6.0)) | ((yc >= 20.0) & (yc <= 36.0)))
    coord = yc if gender == "female" else xc
    img[bands] = skin + amp * np.sin(2.0 * math.pi * coord[bands] / period + phase)

    for ex in (-_EYE_HALF, _EYE_HALF):
        img[(xc - ex) ** 2 + yc ** 2 <= 3.5 ** 2] = 25.0
    img[(xc / 10.0) ** 2 + ((yc - 44.0) / 4.0) ** 2 <= 1.0] = 90.0

    img += rng.normal(0.0, 6.0, img.shape)
    img = _round_u8(np.clip(img, 0.0, 255.0))

    eye_left = (mx - _EYE_HALF * s * ct, my - _EYE_HALF * s * st)
    eye_right = (mx + _EYE_HALF * s * ct, my + _EYE_HALF * s * st)
    age = rng.choice(AGE_GROUPS, p=_AGE_WEIGHTS)
    return img, eye_left, eye_right, str(age)


def synth_corpus(out_dir, n_per_class, seed=0, dataset_name="synth"):
    """Write a balanced corpus (PGMs + manifest.csv); returns the Manifest.

    Byte-identical for a given (n_per_class, seed).
    """
    if n_per_class < 1:
        raise ConfigurationError("need at least 1 sample per class")
    rng = np.random.default_rng(seed)
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    samples = []
    # interleave so any prefix of the manifest stays near-balanced
    for i in range(n_per_class):
        for gender in ("female", "male"):
            img, el, er, age = synth_sample(rng, gender)
            name = f"{gender[0]}{i:05d}"
            path = os.path.join(img_dir, name + ".pgm")
            write_pgm(path, img)
            samples.append(Sample(
                image_path=path, identity_id=name, gender=gender, age_group=age,
                eye_left=el, eye_right=er))
    manifest = Manifest(dataset_name=dataset_name, samples=tuple(samples))
    save_manifest(manifest, os.path.join(out_dir, "manifest.csv"))
    return manifest
