"""Rule-based ground filters: PMF, SMRF, SBM and CSF.

Each filter maps a point cloud to a per-point boolean ground mask. All
four operate on relative elevation only, are deterministic, and classify
every point (no third state) so the downstream TIN sees a binary
partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyCloud, LengthMismatch, TooFewPoints
from .pointcloud import PointCloud


@dataclass(frozen=True)
class PmfParams:
    cell: float = 1.0
    max_window: float = 33.0
    initial_distance: float = 0.15
    max_distance: float = 2.5
    slope: float = 45.0  # degrees

    def __post_init__(self):
        if not 0 < self.initial_distance <= self.max_distance:
            raise ValueError("need 0 < initial_distance <= max_distance")
        if self.max_window < self.cell:
            raise ValueError("max_window must be >= cell")


@dataclass(frozen=True)
class SmrfParams:
    cell: float = 1.0
    max_window: float = 18.0
    elevation_scalar: float = 1.25
    elevation_threshold: float = 0.5
    slope_tolerance: float = 0.15

    def __post_init__(self):
        for f in ("cell", "max_window", "elevation_scalar",
                  "elevation_threshold", "slope_tolerance"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")


@dataclass(frozen=True)
class CsfParams:
    cloth_resolution: float = 0.5
    rigidness: int = 3
    time_step: float = 0.65
    iterations: int = 500
    class_threshold: float = 0.5
    slope_smoothing: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.rigidness not in (1, 2, 3):
            raise ValueError("rigidness must be 1, 2 or 3")


# ---------------------------------------------------------------------------
# shared helpers

def _min_surface(cloud: PointCloud, cell: float):
    """Minimum-elevation grid over the cloud footprint plus cell indexing.

    Empty cells are filled from their nearest occupied neighbor. Returns
    (surface, row, col) where row/col locate each point.
    """
    b = cloud.bounds
    width = int(np.floor((b.max_x - b.min_x) / cell)) + 1
    height = int(np.floor((b.max_y - b.min_y) / cell)) + 1
    col = np.floor((cloud.x - b.min_x) / cell).astype(np.int64)
    row = np.floor((b.max_y - cloud.y) / cell).astype(np.int64)
    surface = np.full((height, width), np.inf)
    np.minimum.at(surface, (row, col), cloud.z)
    empty = ~np.isfinite(surface)
    if empty.any():
        _, (ri, ci) = ndimage.distance_transform_edt(empty, return_indices=True)
        surface = surface[ri, ci]
    return surface, row, col


def _opening(surface: np.ndarray, radius_cells: int) -> np.ndarray:
    """Grayscale opening with a square window, linear-extrapolated borders.

    Borders are padded with odd reflection so sloped terrain continues
    linearly across the edge and is not eaten by the erosion step.
    """
    if radius_cells < 1:
        return surface.copy()
    size = 2 * radius_cells + 1
    pad = min(2 * radius_cells, max(surface.shape[0] - 1, 1),
              max(surface.shape[1] - 1, 1))
    padded = np.pad(surface, pad, mode="reflect", reflect_type="odd")
    opened = ndimage.grey_opening(padded, size=(size, size), mode="nearest")
    return opened[pad:-pad, pad:-pad]


def _nn_fill(surface: np.ndarray, invalid: np.ndarray) -> np.ndarray:
    """Replace invalid cells with their nearest valid cell's value."""
    if not invalid.any():
        return surface
    if invalid.all():
        return surface
    _, (ri, ci) = ndimage.distance_transform_edt(invalid, return_indices=True)
    return surface[ri, ci]


def _interp_fill(surface: np.ndarray, invalid: np.ndarray) -> np.ndarray:
    """Replace invalid cells by linear interpolation of the valid ones.

    Linear (not nearest-neighbor) so sloped terrain under removed objects
    is reconstructed without plateaus; nearest-neighbor only outside the
    valid cells' convex hull.
    """
    from scipy.interpolate import griddata

    if not invalid.any() or invalid.all():
        return surface
    out = surface.copy()
    gi, gj = np.nonzero(~invalid)
    oi, oj = np.nonzero(invalid)
    known = np.column_stack([gi, gj])
    query = np.column_stack([oi, oj])
    vals = griddata(known, surface[~invalid], query, method="linear")
    missing = np.isnan(vals)
    if missing.any():
        nn = griddata(known, surface[~invalid], query[missing],
                      method="nearest")
        vals[missing] = nn
    out[oi, oj] = vals
    return out


# ---------------------------------------------------------------------------
# PMF (progressive morphological filter)

def pmf(cloud: PointCloud, params: PmfParams = PmfParams()) -> np.ndarray:
    """Progressive morphological filtering with exponentially growing windows."""
    if not len(cloud):
        raise EmptyCloud("pmf needs a nonempty cloud")
    surface, row, col = _min_surface(cloud, params.cell)

    windows = []
    k = 0
    while params.cell * 2 ** k <= params.max_window:
        windows.append(params.cell * 2 ** k)
        k += 1
    if not windows:
        windows = [params.cell]

    tan_slope = math.tan(math.radians(params.slope))
    threshold = params.initial_distance
    for k, w in enumerate(windows):
        if k > 0:
            threshold = min(params.max_distance,
                            params.initial_distance
                            + tan_slope * (w - windows[k - 1]))
        radius = max(1, int(round(w / params.cell)))
        surface = _opening(surface, radius)
    return (cloud.z - surface[row, col]) <= threshold


# ---------------------------------------------------------------------------
# SMRF (simple morphological filter)

def smrf(cloud: PointCloud, params: SmrfParams = SmrfParams()) -> np.ndarray:
    """Linearly growing openings with slope-compensated point classification."""
    if not len(cloud):
        raise EmptyCloud("smrf needs a nonempty cloud")
    minimum, row, col = _min_surface(cloud, params.cell)

    opened = minimum
    is_object = np.zeros_like(minimum, dtype=bool)
    max_radius = int(math.ceil(params.max_window / params.cell))
    for w in range(1, max_radius + 1):
        next_opened = _opening(opened, w)
        threshold = params.slope_tolerance * w * params.cell
        is_object |= (opened - next_opened) > threshold
        opened = next_opened

    provisional = _interp_fill(minimum, is_object)
    gy, gx = np.gradient(provisional, params.cell)
    slope = np.hypot(gx, gy)
    limit = params.elevation_threshold + params.elevation_scalar * slope
    return np.abs(cloud.z - provisional[row, col]) <= limit[row, col]


# ---------------------------------------------------------------------------
# SBM (skewness balancing method)

def _skewness(n, s1, s2, s3):
    """Population skewness from raw power sums; zero spread counts as balanced."""
    mu = s1 / n
    var = s2 / n - mu * mu
    if var <= 1e-24:
        return 0.0
    m3 = s3 / n - 3.0 * mu * (s2 / n) + 2.0 * mu ** 3
    return m3 / var ** 1.5


def sbm(cloud: PointCloud) -> np.ndarray:
    """Remove highest points while the elevation skewness stays positive."""
    if len(cloud) < 3:
        raise TooFewPoints(f"sbm needs >= 3 points, got {len(cloud)}")
    # center for numerical stability; skewness is shift-invariant
    z = np.sort(cloud.z - np.median(cloud.z))
    n = len(z)
    s1 = float(z.sum())
    s2 = float((z * z).sum())
    s3 = float((z ** 3).sum())

    cutoff = None  # z value of the lowest removed point (centered)
    top = n - 1
    while top >= 2 and _skewness(top + 1, s1, s2, s3) > 0:
        v = z[top]
        s1 -= v
        s2 -= v * v
        s3 -= v ** 3
        cutoff = v
        top -= 1
    if cutoff is None:
        return np.ones(len(cloud), dtype=bool)
    return (cloud.z - np.median(cloud.z)) < cutoff


# ---------------------------------------------------------------------------
# CSF (cloth simulation filter)

def _csf_constraints(h, pinned, rigidness):
    """Spring passes pulling neighbor particles toward equal height.

    Per pass the correction halves (0.5**pass). A movable particle takes
    half the height difference toward a movable neighbor and the full
    correction toward a pinned one. Vertical displacement only.

    Pairs are processed in disjoint even/odd sets per axis so each update
    is an exact pair projection (never an overshooting sum), which keeps
    the integration unconditionally stable and deterministic.
    """
    movable = ~pinned
    for p in range(rigidness):
        factor = 0.5 ** p
        for axis in (1, 0):
            n = h.shape[axis]
            for parity in (0, 1):
                if n - parity < 2:
                    continue
                a = [slice(None)] * 2
                b = [slice(None)] * 2
                a[axis] = slice(parity, n - 1, 2)
                b[axis] = slice(parity + 1, n, 2)
                a, b = tuple(a), tuple(b)
                d = (h[b] - h[a]) * factor
                mov_a, mov_b = movable[a], movable[b]
                both = mov_a & mov_b
                h[a] = h[a] + np.where(both, 0.5 * d,
                                       np.where(mov_a & ~mov_b, d, 0.0))
                h[b] = h[b] + np.where(both, -0.5 * d,
                                       np.where(mov_b & ~mov_a, -d, 0.0))
    return h


def csf(cloud: PointCloud, params: CsfParams = CsfParams()) -> np.ndarray:
    """Settle a simulated cloth onto the inverted cloud; near-cloth = ground."""
    if not len(cloud):
        raise EmptyCloud("csf needs a nonempty cloud")
    b = cloud.bounds
    res = params.cloth_resolution
    nx = int(np.floor((b.max_x - b.min_x) / res)) + 2
    ny = int(np.floor((b.max_y - b.min_y) / res)) + 2

    # inverted surface: ground (low z) becomes the high collision surface
    inv = -cloud.z
    col = np.clip(np.round((cloud.x - b.min_x) / res).astype(np.int64), 0, nx - 1)
    row = np.clip(np.round((cloud.y - b.min_y) / res).astype(np.int64), 0, ny - 1)
    surface = np.full((ny, nx), -np.inf)
    np.maximum.at(surface, (row, col), inv)

    h = np.full((ny, nx), inv.max() + 0.05)
    pinned = np.zeros((ny, nx), dtype=bool)
    drop = params.time_step ** 2  # g normalized to 1

    for _ in range(params.iterations):
        h[~pinned] -= drop
        hit = ~pinned & (h <= surface)
        h[hit] = surface[hit]
        pinned |= hit
        if params.rigidness and (nx > 1 or ny > 1):
            h = _csf_constraints(h, pinned, params.rigidness)
            hit = ~pinned & (h <= surface)
            h[hit] = surface[hit]
            pinned |= hit

    if params.slope_smoothing:
        h = _csf_slope_smooth(h, pinned, res)

    cloth_at_points = _bilinear(h, (cloud.x - b.min_x) / res,
                                (cloud.y - b.min_y) / res)
    return np.abs(inv - cloth_at_points) <= params.class_threshold


def _csf_slope_smooth(h, pinned, res, max_passes=100):
    """Relax movable cells whose neighbor height step exceeds the resolution."""
    h = h.copy()
    for _ in range(max_passes):
        padded = np.pad(h, 1, mode="edge")
        neighbors = np.stack([padded[:-2, 1:-1], padded[2:, 1:-1],
                              padded[1:-1, :-2], padded[1:-1, 2:]])
        step = np.abs(neighbors - h).max(axis=0)
        fix = ~pinned & (step > res)
        if not fix.any():
            break
        h[fix] = neighbors.mean(axis=0)[fix]
    return h


def _bilinear(grid, fx, fy):
    """Sample a (row=y, col=x) grid at fractional lattice coordinates."""
    ny, nx = grid.shape
    x0 = np.clip(np.floor(fx).astype(np.int64), 0, nx - 1)
    y0 = np.clip(np.floor(fy).astype(np.int64), 0, ny - 1)
    x1 = np.minimum(x0 + 1, nx - 1)
    y1 = np.minimum(y0 + 1, ny - 1)
    tx = np.clip(fx - x0, 0.0, 1.0)
    ty = np.clip(fy - y0, 0.0, 1.0)
    return (grid[y0, x0] * (1 - tx) * (1 - ty) + grid[y0, x1] * tx * (1 - ty)
            + grid[y1, x0] * (1 - tx) * ty + grid[y1, x1] * tx * ty)


def mask_to_dtm_points(cloud: PointCloud, mask) -> PointCloud:
    """Subset of the cloud where the ground mask is true."""
    mask = np.asarray(mask, dtype=bool)
    if len(mask) != len(cloud):
        raise LengthMismatch(f"mask length {len(mask)} != cloud {len(cloud)}")
    return cloud.select(mask)
