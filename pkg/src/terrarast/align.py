"""Offset correction between rasters and reference DTMs.

Misregistered reference DTMs are corrected by a brute-force integer grid
search: the raster is shifted by every (dx, dy) in [0, range]^2 and the
ground-masked RMSE against the DTM is minimized over the overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyOverlap
from .raster import RasterGrid, _check_same_spec


@dataclass(frozen=True)
class OffsetResult:
    dx: int
    dy: int
    rmse_at_best: float
    rmse_grid: np.ndarray  # (range+1, range+1), indexed [dy][dx]; NaN = no overlap


def masked_rmse(pred: RasterGrid, ref: RasterGrid, mask: RasterGrid) -> float:
    """RMSE over cells where mask == 1 and both grids carry data."""
    _check_same_spec([pred.spec, ref.spec, mask.spec])
    use = pred.valid & ref.valid & mask.valid & (mask.values == 1.0)
    if not np.any(use):
        raise EmptyOverlap("no valid masked cells shared by the grids")
    diff = pred.values[use] - ref.values[use]
    return float(np.sqrt(np.mean(diff * diff)))


def shift_raster(grid: RasterGrid, dx: int, dy: int) -> RasterGrid:
    """Move content +dx columns east and +dy rows south; vacated cells nodata."""
    out = np.full_like(grid.values, grid.spec.nodata)
    h, w = out.shape
    if dy < h and dx < w:
        out[dy:, dx:] = grid.values[:h - dy, :w - dx]
    return RasterGrid(grid.spec, out, grid.band_name)


def grid_offset_search(raster: RasterGrid, dtm: RasterGrid,
                       ground_mask: RasterGrid,
                       search_range: int = 10) -> OffsetResult:
    """Search (dx, dy) in [0, range]^2 for the minimum ground-masked RMSE.

    Ties break to the smaller dy, then dx. Only nonnegative offsets are
    searched; swap the roles of raster and DTM for the opposite direction.
    """
    _check_same_spec([raster.spec, dtm.spec, ground_mask.spec])
    n = search_range + 1
    surface = np.full((n, n), np.nan)
    for dy in range(n):
        for dx in range(n):
            try:
                surface[dy, dx] = masked_rmse(shift_raster(raster, dx, dy),
                                              dtm, ground_mask)
            except EmptyOverlap:
                pass
    if np.all(np.isnan(surface)):
        raise EmptyOverlap("no offset produced a valid overlap")
    flat = np.where(np.isnan(surface), np.inf, surface)
    best = int(np.argmin(flat))  # row-major argmin = smaller dy, then dx
    dy, dx = divmod(best, n)
    return OffsetResult(dx=dx, dy=dy, rmse_at_best=float(surface[dy, dx]),
                        rmse_grid=surface)
