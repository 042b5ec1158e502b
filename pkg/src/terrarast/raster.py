"""Point-cloud rasterization into single-band grids and multi-band stacks.

Each grid cell is a vertical column; columns can be further quantized into
z-voxels (cubed 25 cm by default). Six measurement bands are produced:
three elevation bands (pixel_mean, voxel_top, voxel_bottom) and three
statistic bands (density, stdev, echoes), plus semantic bands derived from
point class labels.

All operations are pure and order-independent: points are reduced in a
canonical (cell, x, y, z, echo) sort order so results are bit-identical
for any permutation of the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SpecMismatch
from .pointcloud import PointCloud

NODATA_DEFAULT = -9999.0

ELEVATION_BANDS = ("pixel_mean", "voxel_top", "voxel_bottom")
STATISTIC_BANDS = ("density", "stdev", "echoes")
SEMANTIC_BANDS = ("sem1", "sem2_ground", "sem2_nonground")
BAND_NAMES = ELEVATION_BANDS + STATISTIC_BANDS + SEMANTIC_BANDS + ("dtm", "custom")


@dataclass(frozen=True)
class GridSpec:
    """Georeference of a raster: upper-left origin, cell size, extent.

    Cell (i, j) covers [origin_x + j*c, origin_x + (j+1)*c) in x and
    (origin_y - (i+1)*c, origin_y - i*c] in y, so row 0 is the north edge
    and every point maps to exactly one cell.
    """

    origin_x: float
    origin_y: float
    width: int
    height: int
    cell_size: float = 0.25
    voxel_size_z: float = 0.25
    nodata: float = NODATA_DEFAULT

    def __post_init__(self):
        if self.cell_size <= 0 or self.voxel_size_z <= 0:
            raise ValueError("cell_size and voxel_size_z must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("width and height must be positive")

    @classmethod
    def covering(cls, cloud: PointCloud, cell_size: float = 0.25,
                 voxel_size_z: float | None = None,
                 nodata: float = NODATA_DEFAULT) -> "GridSpec":
        """Smallest grid anchored at (min_x, max_y) containing every point."""
        if not len(cloud):
            raise ValueError("cannot derive a grid from an empty cloud")
        b = cloud.bounds
        width = int(np.floor((b.max_x - b.min_x) / cell_size)) + 1
        height = int(np.floor((b.max_y - b.min_y) / cell_size)) + 1
        return cls(origin_x=b.min_x, origin_y=b.max_y, width=width,
                   height=height, cell_size=cell_size,
                   voxel_size_z=voxel_size_z if voxel_size_z is not None else cell_size,
                   nodata=nodata)

    def cell_of(self, x, y):
        """(row, col) arrays; points outside the grid get out-of-range indices."""
        col = np.floor((np.asarray(x) - self.origin_x) / self.cell_size).astype(np.int64)
        row = np.floor((self.origin_y - np.asarray(y)) / self.cell_size).astype(np.int64)
        return row, col

    def cell_centers(self):
        """(xs, ys) 2D arrays of cell-center coordinates."""
        xs = self.origin_x + (np.arange(self.width) + 0.5) * self.cell_size
        ys = self.origin_y - (np.arange(self.height) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class RasterGrid:
    spec: GridSpec
    values: np.ndarray
    band_name: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.spec.height, self.spec.width):
            raise ValueError(f"values shape {v.shape} does not match spec "
                             f"{(self.spec.height, self.spec.width)}")
        object.__setattr__(self, "values", v)

    @property
    def valid(self) -> np.ndarray:
        return self.values != self.spec.nodata


@dataclass(frozen=True)
class RasterStack:
    """Ordered co-registered bands; order is the network channel order."""

    bands: tuple

    def __post_init__(self):
        bands = tuple(self.bands)
        object.__setattr__(self, "bands", bands)
        if not bands:
            raise ValueError("empty stack")
        _check_same_spec([b.spec for b in bands])
        names = [b.band_name for b in bands]
        if len(set(names)) != len(names):
            raise SpecMismatch(f"duplicate band names in stack: {names}")

    @property
    def spec(self) -> GridSpec:
        return self.bands[0].spec

    @property
    def band_names(self):
        return [b.band_name for b in self.bands]

    def band(self, name: str) -> RasterGrid:
        for b in self.bands:
            if b.band_name == name:
                return b
        raise KeyError(f"no band named {name!r}; have {self.band_names}")


def _check_same_spec(specs):
    first = specs[0]
    for other in specs[1:]:
        for f in ("origin_x", "origin_y", "width", "height", "cell_size",
                  "voxel_size_z", "nodata"):
            if getattr(first, f) != getattr(other, f):
                raise SpecMismatch(
                    f"grid specs differ in {f}: {getattr(first, f)} vs "
                    f"{getattr(other, f)}")


def stack_bands(grids) -> RasterStack:
    """Stack co-registered grids in the given order."""
    return RasterStack(bands=tuple(grids))


# ---------------------------------------------------------------------------
# column grouping

def _columns(cloud: PointCloud, spec: GridSpec):
    """Canonical per-column grouping of the in-bounds points.

    Returns (cell, x, y, z, echo, label) arrays sorted by
    (cell, x, y, z, echo) where cell = row * width + col.
    """
    row, col = spec.cell_of(cloud.x, cloud.y)
    keep = (row >= 0) & (row < spec.height) & (col >= 0) & (col < spec.width)
    cell = row[keep] * spec.width + col[keep]
    x, y, z = cloud.x[keep], cloud.y[keep], cloud.z[keep]
    echo = cloud.echo_number[keep]
    label = cloud.class_label[keep]
    order = np.lexsort((echo, z, y, x, cell))
    return (cell[order], x[order], y[order], z[order], echo[order],
            label[order])


def _group_reduce_mean(cell, values, spec: GridSpec):
    """Per-cell mean of `values` (cell must be sorted ascending)."""
    grid = np.full((spec.height, spec.width), spec.nodata, dtype=np.float64)
    if len(cell) == 0:
        return grid
    ucell, starts = np.unique(cell, return_index=True)
    counts = np.diff(np.append(starts, len(cell)))
    sums = np.add.reduceat(values, starts)
    grid.flat[ucell] = sums / counts
    return grid


def rasterize_pixel_mean(cloud: PointCloud, spec: GridSpec) -> RasterGrid:
    """Mean elevation of all points in each vertical column."""
    cell, _, _, z, _, _ = _columns(cloud, spec)
    return RasterGrid(spec, _group_reduce_mean(cell, z, spec), "pixel_mean")


def _voxel_mean_groups(cloud: PointCloud, spec: GridSpec):
    """Per-(cell, voxel) mean elevations, sorted by cell then voxel index.

    The voxel lattice is anchored at the cloud's min z so results are
    deterministic and shift-consistent.
    """
    cell, _, _, z, _, _ = _columns(cloud, spec)
    if len(cell) == 0:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.float64))
    min_z = cloud.bounds.min_z
    v = np.floor((z - min_z) / spec.voxel_size_z).astype(np.int64)
    stride = int(v.max()) + 1
    key = cell * stride + v
    order = np.argsort(key, kind="stable")  # inner canonical order preserved
    key_s, z_s = key[order], z[order]
    ukey, starts = np.unique(key_s, return_index=True)
    counts = np.diff(np.append(starts, len(key_s)))
    means = np.add.reduceat(z_s, starts) / counts
    return ukey // stride, ukey % stride, means


def _pick_voxel(cloud, spec, take_top: bool, band_name: str) -> RasterGrid:
    ucell, _, means = _voxel_mean_groups(cloud, spec)
    grid = np.full((spec.height, spec.width), spec.nodata, dtype=np.float64)
    if len(ucell):
        cells, firsts = np.unique(ucell, return_index=True)
        if take_top:
            lasts = np.append(firsts[1:], len(ucell)) - 1
            grid.flat[cells] = means[lasts]
        else:
            grid.flat[cells] = means[firsts]
    return RasterGrid(spec, grid, band_name)


def rasterize_voxel_top(cloud: PointCloud, spec: GridSpec) -> RasterGrid:
    """Mean elevation of the highest occupied voxel per column (a DSM)."""
    return _pick_voxel(cloud, spec, take_top=True, band_name="voxel_top")


def rasterize_voxel_bottom(cloud: PointCloud, spec: GridSpec) -> RasterGrid:
    """Mean elevation of the lowest occupied voxel per column."""
    return _pick_voxel(cloud, spec, take_top=False, band_name="voxel_bottom")


def rasterize_density(cloud: PointCloud, spec: GridSpec) -> RasterGrid:
    """Point count per column; empty columns are a true zero, not nodata."""
    cell, *_ = _columns(cloud, spec)
    grid = np.zeros((spec.height, spec.width), dtype=np.float64)
    counts = np.bincount(cell, minlength=spec.width * spec.height)
    grid.flat[:] = counts
    return RasterGrid(spec, grid, "density")


def rasterize_stdev(cloud: PointCloud, spec: GridSpec) -> RasterGrid:
    """Population stdev of the occupied-voxel mean elevations per column.

    A column with a single occupied voxel has zero variation (0.0, kept
    dense rather than nodata); an empty column is nodata.
    """
    ucell, _, means = _voxel_mean_groups(cloud, spec)
    grid = np.full((spec.height, spec.width), spec.nodata, dtype=np.float64)
    if len(ucell):
        cells, starts = np.unique(ucell, return_index=True)
        counts = np.diff(np.append(starts, len(ucell)))
        s1 = np.add.reduceat(means, starts)
        s2 = np.add.reduceat(means * means, starts)
        var = np.maximum(s2 / counts - (s1 / counts) ** 2, 0.0)
        grid.flat[cells] = np.sqrt(var)
    return RasterGrid(spec, grid, "stdev")


def _mode_per_cell(cell, values, spec: GridSpec, value_range: int):
    """Per-cell mode of small nonnegative ints, ties to the smallest value."""
    grid = np.full((spec.height, spec.width), spec.nodata, dtype=np.float64)
    if len(cell) == 0:
        return grid
    key = cell * value_range + values.astype(np.int64)
    key = np.sort(key)
    ukey, starts = np.unique(key, return_index=True)
    counts = np.diff(np.append(starts, len(key)))
    ucell = ukey // value_range
    uval = ukey % value_range
    # Order by (cell asc, count desc, value asc); first row per cell is the mode
    order = np.lexsort((uval, -counts, ucell))
    cells, firsts = np.unique(ucell[order], return_index=True)
    grid.flat[cells] = uval[order][firsts]
    return grid


def rasterize_echoes(cloud: PointCloud, spec: GridSpec) -> RasterGrid:
    """Most frequent echo number per column (ties break low)."""
    cell, _, _, _, echo, _ = _columns(cloud, spec)
    return RasterGrid(spec, _mode_per_cell(cell, echo, spec, 256), "echoes")


def rasterize_semantics(cloud: PointCloud, spec: GridSpec, ground_codes):
    """Binary semantic rasters from the per-column class-label mode.

    Returns (sem1, sem2) where sem1 is 1 on ground-mode columns and sem2 is
    the complementary one-hot (ground, nonground) pair.
    """
    ground_codes = set(int(c) for c in ground_codes)
    if not ground_codes:
        raise ValueError("ground_codes must be nonempty")
    cell, _, _, _, _, label = _columns(cloud, spec)
    mode = _mode_per_cell(cell, label, spec, 256)
    valid = mode != spec.nodata
    is_ground = np.isin(mode, sorted(ground_codes)) & valid

    sem1 = np.full_like(mode, spec.nodata)
    sem1[valid] = 0.0
    sem1[is_ground] = 1.0
    ground_band = sem1.copy()
    nonground = np.full_like(mode, spec.nodata)
    nonground[valid] = 1.0 - sem1[valid]
    sem2 = RasterStack(bands=(RasterGrid(spec, ground_band, "sem2_ground"),
                              RasterGrid(spec, nonground, "sem2_nonground")))
    return RasterGrid(spec, sem1, "sem1"), sem2


def rasterize_bands(cloud: PointCloud, spec: GridSpec, names,
                    ground_codes=(2,)) -> RasterStack:
    """Convenience: build a stack of the named bands in the given order."""
    single = {"pixel_mean": rasterize_pixel_mean,
              "voxel_top": rasterize_voxel_top,
              "voxel_bottom": rasterize_voxel_bottom,
              "density": rasterize_density,
              "stdev": rasterize_stdev,
              "echoes": rasterize_echoes}
    grids = []
    sem_cache = None
    for name in names:
        if name in single:
            grids.append(single[name](cloud, spec))
        elif name in SEMANTIC_BANDS:
            if sem_cache is None:
                sem1, sem2 = rasterize_semantics(cloud, spec, ground_codes)
                sem_cache = {"sem1": sem1,
                             "sem2_ground": sem2.band("sem2_ground"),
                             "sem2_nonground": sem2.band("sem2_nonground")}
            grids.append(sem_cache[name])
        else:
            raise KeyError(f"unknown band name {name!r}")
    return stack_bands(grids)


# ---------------------------------------------------------------------------
# downsampling

def _downsample_band(grid: RasterGrid, factor: int, out_spec: GridSpec) -> RasterGrid:
    nodata = grid.spec.nodata
    h, w = grid.values.shape
    ph = -h % factor
    pw = -w % factor
    v = np.pad(grid.values, ((0, ph), (0, pw)), constant_values=nodata)
    blocks = v.reshape(out_spec.height, factor, out_spec.width, factor)
    valid = blocks != nodata
    nvalid = valid.sum(axis=(1, 3))
    total = np.where(valid, blocks, 0.0).sum(axis=(1, 3))
    out = np.full((out_spec.height, out_spec.width), nodata, dtype=np.float64)
    has = nvalid > 0
    if grid.band_name == "density":
        out[has] = total[has]  # counts aggregate by sum
    else:
        out[has] = total[has] / nvalid[has]
        if grid.band_name in SEMANTIC_BANDS:
            out[has] = (out[has] >= 0.5).astype(np.float64)
    return RasterGrid(out_spec, out, grid.band_name)


def downsample(stack: RasterStack, factor: int) -> RasterStack:
    """Block-aggregate a stack by an integer factor.

    Means ignore nodata; density sums; semantic bands re-binarize at 0.5.
    Non-divisible extents are padded bottom/right with nodata so the origin
    corner keeps its georeference.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return stack
    spec = stack.spec
    out_spec = replace(spec,
                       width=-(-spec.width // factor),
                       height=-(-spec.height // factor),
                       cell_size=spec.cell_size * factor)
    return RasterStack(bands=tuple(_downsample_band(b, factor, out_spec)
                                   for b in stack.bands))
