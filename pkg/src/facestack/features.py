"""Feature matrix container and its binary file format.

Layout: magic ``FSFM``, uint32 version, uint32 n_samples, uint32 n_dims,
uint32 id length, descriptor id (utf-8), then row-major float32 data.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError

_MAGIC = b"FSFM"
_VERSION = 1


@dataclass
class FeatureMatrix:
    data: np.ndarray  # (n_samples, n_dims) float32
    descriptor_id: str

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        if not np.isfinite(self.data).all():
            raise DataError("feature matrix contains non-finite values")

    @property
    def n_samples(self):
        return self.data.shape[0]

    @property
    def n_dims(self):
        return self.data.shape[1]


def save_features(fm, path):
    ident = fm.descriptor_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, fm.n_samples, fm.n_dims))
        fh.write(struct.pack("<I", len(ident)))
        fh.write(ident)
        fh.write(fm.data.tobytes())


def load_features(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise DataError(f"{path}: not a feature matrix file")
    version, n, d = struct.unpack_from("<III", blob, 4)
    if version != _VERSION:
        raise DataError(f"{path}: unsupported feature file version {version}")
    (idlen,) = struct.unpack_from("<I", blob, 16)
    ident = blob[20 : 20 + idlen].decode("utf-8")
    raster = blob[20 + idlen :]
    if len(raster) != 4 * n * d:
        raise DataError(f"{path}: feature raster size mismatch")
    data = np.frombuffer(raster, dtype="<f4").reshape(n, d).copy()
    return FeatureMatrix(data, ident)


def export_csv(fm, path):
    """Plain numeric CSV, one sample per row, for debugging."""
    np.savetxt(path, fm.data, delimiter=",", fmt="%.9g")
