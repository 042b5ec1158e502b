"""Evaluation metrics and report generation for predicted DTMs."""

from __future__ import annotations

import numpy as np

from .errors import EmptyOverlap
from .raster import RasterGrid, RasterStack, _check_same_spec

ELEVATION_AS_DTM_BANDS = ("pixel_mean", "voxel_top", "voxel_bottom")


def dtm_rmse(pred: RasterGrid, ref: RasterGrid) -> float:
    """RMSE in meters over cells where both grids carry data."""
    _check_same_spec([pred.spec, ref.spec])
    use = pred.valid & ref.valid
    if not np.any(use):
        raise EmptyOverlap("grids share no valid cells")
    diff = pred.values[use] - ref.values[use]
    return float(np.sqrt(np.mean(diff * diff)))


def elevation_raster_as_dtm_report(stacks, refs) -> dict:
    """Mean RMSE per elevation band when used directly as the predicted DTM.

    Returns {band_name: mean RMSE across tiles}; bands absent from every
    stack are skipped.
    """
    sums = {}
    counts = {}
    for stack, ref in zip(stacks, refs):
        for name in ELEVATION_AS_DTM_BANDS:
            if name not in stack.band_names:
                continue
            rmse = dtm_rmse(stack.band(name), ref)
            sums[name] = sums.get(name, 0.0) + rmse
            counts[name] = counts.get(name, 0) + 1
    return {name: sums[name] / counts[name] for name in sums}


def elevation_histogram(dtm: RasterGrid, bin_width: float) -> dict:
    """Counts of non-nodata cells per elevation bin; bins anchored at 0.

    Keys are the left bin edges (multiples of bin_width).
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    vals = dtm.values[dtm.valid]
    edges = np.floor(vals / bin_width).astype(np.int64)
    uniq, counts = np.unique(edges, return_counts=True)
    return {float(e * bin_width): int(c) for e, c in zip(uniq, counts)}


def per_tile_boxstats(dtms) -> list:
    """Five-number summary per tile (linear-interpolated quartiles)."""
    out = []
    for dtm in dtms:
        vals = dtm.values[dtm.valid]
        if len(vals) == 0:
            out.append({"min": np.nan, "q1": np.nan, "median": np.nan,
                        "q3": np.nan, "max": np.nan})
            continue
        q = np.percentile(vals, [0, 25, 50, 75, 100], method="linear")
        out.append({"min": float(q[0]), "q1": float(q[1]),
                    "median": float(q[2]), "q3": float(q[3]),
                    "max": float(q[4])})
    return out


def report_csv(rows, header) -> str:
    """Small diff-able CSV emitter (no quoting needed for our fields)."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def report_markdown(rows, header) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(str(v) for v in row) + " |")
    return "\n".join(lines) + "\n"
