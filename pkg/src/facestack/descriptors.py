"""Grid-histogram texture descriptors (LBP family, LOSIB) and HOG.

Every 8-neighbourhood coder uses the same bit order: neighbours are visited
clockwise from the top-left pixel and fill the code MSB-first, so the
top-left neighbour is bit 7 and the left neighbour is bit 0. Comparisons
are "neighbour >= reference", i.e. ties set the bit. Any fixed order is
equivalent up to a permutation of histogram bins; this one is used
everywhere, including the naive references in the test suite.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .geometry import _require_gray

# (dx, dy) clockwise from the top-left neighbour; x right, y down
NEIGHBOR_OFFSETS = ((-1, -1), (0, -1), (1, -1), (1, 0),
                    (1, 1), (0, 1), (-1, 1), (-1, 0))

LSP_FLAT_BIN = 56
LSP_BINS = 57  # 8 max positions x 7 min positions + flat bin
U2_BINS = 59   # 58 uniform codes + 1 shared non-uniform bin


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigurationError("grid must have positive dimensions")


HOG_GRID = GridSpec(8, 8)
HOG_BINS = 9
CODER_GRID = GridSpec(5, 5)
LOSIB_GRID = GridSpec(8, 8)


def _check_interior(img, x, y):
    h, w = img.shape
    if not (1 <= x <= w - 2 and 1 <= y <= h - 2):
        raise ConfigurationError(f"pixel ({x},{y}) does not have all 8 neighbours in bounds")


def _neighbor_stack(img):
    """Neighbour values around every interior pixel, shape (8, H-2, W-2)."""
    h, w = img.shape
    if h < 3 or w < 3:
        raise ConfigurationError("image too small for 8-neighbourhood coding")
    stack = np.empty((8, h - 2, w - 2), dtype=np.int32)
    for i, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
        stack[i] = img[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
    return stack


def lbp_code(img, x, y):
    """8-bit LBP code at one interior pixel (neighbour >= center sets the bit)."""
    img = _require_gray(img)
    _check_interior(img, x, y)
    center = int(img[y, x])
    code = 0
    for i, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
        if int(img[y + dy, x + dx]) >= center:
            code |= 1 << (7 - i)
    return code


def lbp_code_map(img):
    """LBP codes for all interior pixels, shape (H-2, W-2)."""
    img = _require_gray(img)
    stack = _neighbor_stack(img)
    center = img[1:-1, 1:-1].astype(np.int32)
    bits = stack >= center
    codes = np.zeros(center.shape, dtype=np.int64)
    for i in range(8):
        codes |= bits[i].astype(np.int64) << (7 - i)
    return codes


def nilbp_code(img, x, y):
    """LBP variant thresholding each neighbour against the neighbourhood mean."""
    img = _require_gray(img)
    _check_interior(img, x, y)
    vals = [int(img[y + dy, x + dx]) for dx, dy in NEIGHBOR_OFFSETS]
    mean = sum(vals) / 8.0
    code = 0
    for i, v in enumerate(vals):
        if v >= mean:
            code |= 1 << (7 - i)
    return code


def nilbp_code_map(img):
    img = _require_gray(img)
    stack = _neighbor_stack(img)
    mean = stack.mean(axis=0)
    bits = stack >= mean
    codes = np.zeros(mean.shape, dtype=np.int64)
    for i in range(8):
        codes |= bits[i].astype(np.int64) << (7 - i)
    return codes


def lsp_code(img, x, y, t=0):
    """Salient-position code: where the largest positive and negative
    center differences sit in the neighbourhood.

    With d_i = neighbour_i - center, the code is
    argmax(d) * 7 + rank(argmin(d)) where the rank skips the argmax slot;
    ties pick the lowest neighbour index, and the argmin is taken over the
    remaining seven slots. If max|d_i| <= t the pixel is flat (bin 56).
    """
    if t < 0:
        raise ConfigurationError("LSP threshold must be non-negative")
    img = _require_gray(img)
    _check_interior(img, x, y)
    center = int(img[y, x])
    d = [int(img[y + dy, x + dx]) - center for dx, dy in NEIGHBOR_OFFSETS]
    if max(abs(v) for v in d) <= t:
        return LSP_FLAT_BIN
    imax = max(range(8), key=lambda i: (d[i], -i))
    imin = min((i for i in range(8) if i != imax), key=lambda i: (d[i], i))
    rank = imin - (imin > imax)
    return imax * 7 + rank


def lsp_code_map(img, t=0):
    if t < 0:
        raise ConfigurationError("LSP threshold must be non-negative")
    img = _require_gray(img)
    stack = _neighbor_stack(img)
    d = stack - img[1:-1, 1:-1].astype(np.int32)
    flat = np.abs(d).max(axis=0) <= t
    imax = d.argmax(axis=0)  # first maximum = lowest index
    masked = d.copy()
    np.put_along_axis(masked, imax[None], np.iinfo(np.int32).max, axis=0)
    imin = masked.argmin(axis=0)
    codes = imax * 7 + imin - (imin > imax)
    codes[flat] = LSP_FLAT_BIN
    return codes.astype(np.int64)


def _circular_transitions(code):
    bits = [(code >> i) & 1 for i in range(8)]
    return sum(bits[i] != bits[(i + 1) % 8] for i in range(8))


def _build_u2_table():
    table = np.full(256, U2_BINS - 1, dtype=np.int64)
    next_bin = 0
    for code in range(256):  # ascending code order fixes the bin layout
        if _circular_transitions(code) <= 2:
            table[code] = next_bin
            next_bin += 1
    assert next_bin == U2_BINS - 1
    return table


U2_TABLE = _build_u2_table()


def lbp_u2_map(code):
    """Map an 8-bit code to its uniform bin; non-uniform codes share bin 58."""
    if not 0 <= code < 256:
        raise ConfigurationError(f"LBP code {code} outside [0,256)")
    return int(U2_TABLE[code])


def _cell_index(n, parts):
    """Cell index per coordinate for a near-equal split of n into parts."""
    base, rem = divmod(n, parts)
    sizes = np.full(parts, base, dtype=np.int64)
    sizes[:rem] += 1
    return np.repeat(np.arange(parts), sizes)


def grid_histogram(img, code_map_fn, n_bins, grid=CODER_GRID):
    """Concatenated per-cell histograms of a neighbourhood coder.

    The interior pixel region (all 8 neighbours in bounds) splits into
    grid.rows x grid.cols near-equal cells; each cell histogram is L1
    normalized (an empty cell stays all-zero) and cells concatenate
    row-major.
    """
    img = _require_gray(img)
    codes = code_map_fn(img)
    h, w = codes.shape
    if h < grid.rows or w < grid.cols:
        raise ConfigurationError(
            f"interior {w}x{h} too small for a {grid.cols}x{grid.rows} grid")
    cell_id = _cell_index(h, grid.rows)[:, None] * grid.cols + _cell_index(w, grid.cols)[None, :]
    flat = cell_id * n_bins + codes
    n_cells = grid.rows * grid.cols
    hist = np.bincount(flat.ravel(), minlength=n_cells * n_bins).reshape(n_cells, n_bins)
    hist = hist.astype(np.float64)
    sums = hist.sum(axis=1, keepdims=True)
    np.divide(hist, sums, out=hist, where=sums > 0)
    return hist.ravel()


def hog(img, grid=HOG_GRID, n_bins=HOG_BINS):
    """Histogram of oriented gradients over a fixed cell grid.

    Central-difference gradients with replicated borders; unsigned
    orientation on [0, 180) with magnitude votes split linearly between the
    two nearest bins; per-cell histograms are divided by the L2 norm of
    each 2x2 cell block containing the cell (1e-6 under the root) and the
    normalized copies averaged. Output length rows*cols*n_bins.
    """
    img = _require_gray(img)
    h, w = img.shape
    if h < 2 or w < 2:
        raise ConfigurationError("image too small for gradients")
    if h < grid.rows or w < grid.cols:
        raise ConfigurationError(f"image {w}x{h} too small for a {grid.cols}x{grid.rows} HOG grid")
    f = img.astype(np.float64)
    cols = np.arange(w)
    rows = np.arange(h)
    gx = f[:, np.minimum(cols + 1, w - 1)] - f[:, np.maximum(cols - 1, 0)]
    gy = f[np.minimum(rows + 1, h - 1), :] - f[np.maximum(rows - 1, 0), :]
    mag = np.hypot(gx, gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    pos = ang / (180.0 / n_bins)
    k0 = np.floor(pos).astype(np.int64) % n_bins
    k1 = (k0 + 1) % n_bins
    w1 = pos - np.floor(pos)

    rc = np.broadcast_to(_cell_index(h, grid.rows)[:, None], (h, w))
    cc = np.broadcast_to(_cell_index(w, grid.cols)[None, :], (h, w))
    hist = np.zeros((grid.rows, grid.cols, n_bins), dtype=np.float64)
    np.add.at(hist, (rc, cc, k0), mag * (1.0 - w1))
    np.add.at(hist, (rc, cc, k1), mag * w1)

    eps = 1e-6
    if grid.rows >= 2 and grid.cols >= 2:
        sq = (hist * hist).sum(axis=2)
        block_ss = sq[:-1, :-1] + sq[1:, :-1] + sq[:-1, 1:] + sq[1:, 1:]
        norms = np.sqrt(block_ss + eps)
        out = np.zeros_like(hist)
        counts = np.zeros((grid.rows, grid.cols), dtype=np.float64)
        for bi in range(grid.rows - 1):
            for bj in range(grid.cols - 1):
                out[bi : bi + 2, bj : bj + 2] += hist[bi : bi + 2, bj : bj + 2] / norms[bi, bj]
                counts[bi : bi + 2, bj : bj + 2] += 1.0
        out /= counts[:, :, None]
    else:
        norms = np.sqrt((hist * hist).sum(axis=2) + eps)
        out = hist / norms[:, :, None]
    return out.ravel()


def losib(img, grid=LOSIB_GRID):
    """Per-orientation mean absolute gray difference, gridded.

    For each of the 8 radius-1 orientations (same order as the LBP bits)
    and each grid cell over the interior region, the mean of
    |neighbour - center| / 255. Output is cell-major then orientation:
    rows*cols*8 values.
    """
    img = _require_gray(img)
    stack = _neighbor_stack(img)
    diffs = np.abs(stack - img[1:-1, 1:-1].astype(np.int32)) / 255.0
    h, w = diffs.shape[1:]
    if h < grid.rows or w < grid.cols:
        raise ConfigurationError(
            f"interior {w}x{h} too small for a {grid.cols}x{grid.rows} grid")
    rc = np.broadcast_to(_cell_index(h, grid.rows)[:, None], (h, w))
    cc = np.broadcast_to(_cell_index(w, grid.cols)[None, :], (h, w))
    acc = np.zeros((grid.rows, grid.cols, 8), dtype=np.float64)
    np.add.at(acc, (rc, cc), np.moveaxis(diffs, 0, -1))
    counts = np.zeros((grid.rows, grid.cols), dtype=np.float64)
    np.add.at(counts, (rc, cc), 1.0)
    return (acc / counts[:, :, None]).ravel()


def _raw(img):
    return _require_gray(img).astype(np.float64).ravel() / 255.0


_EXTRACTORS = {
    "hog": lambda img: hog(img),
    "lbp": lambda img: grid_histogram(img, lbp_code_map, 256),
    "lbpu2": lambda img: grid_histogram(img, lambda im: U2_TABLE[lbp_code_map(im)], U2_BINS),
    "nilbp": lambda img: grid_histogram(img, nilbp_code_map, 256),
    "nilbpu2": lambda img: grid_histogram(img, lambda im: U2_TABLE[nilbp_code_map(im)], U2_BINS),
    "lsp0": lambda img: grid_histogram(img, lambda im: lsp_code_map(im, 0), LSP_BINS),
    "lsp1": lambda img: grid_histogram(img, lambda im: lsp_code_map(im, 1), LSP_BINS),
    "lsp2": lambda img: grid_histogram(img, lambda im: lsp_code_map(im, 2), LSP_BINS),
    "losib": lambda img: losib(img),
    "raw": _raw,
}

DESCRIPTOR_IDS = tuple(sorted(_EXTRACTORS))


def extract_descriptor(img, descriptor_id):
    """Run one named descriptor on a grayscale pattern."""
    try:
        fn = _EXTRACTORS[descriptor_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown descriptor {descriptor_id!r}; choose from {', '.join(DESCRIPTOR_IDS)}") from None
    return fn(img)
