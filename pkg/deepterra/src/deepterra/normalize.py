"""Per-band normalization with statistics recorded for inference.

Elevation bands are centered per tile by the tile's voxel-bottom median
(so inter-tile elevation spread does not dominate the signal) and scaled
by one global constant; statistic bands are standardized by training-set
mean/std; semantic bands pass through. Nodata cells become 0 after
normalization, with the density band left to signal validity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

ELEVATION_BANDS = ("pixel_mean", "voxel_top", "voxel_bottom", "dtm")
SEMANTIC_BANDS = ("sem1", "sem2_ground", "sem2_nonground")
CENTER_BAND = "voxel_bottom"
ELEVATION_SCALE = 10.0  # meters mapped to one normalized unit


def band_kind(name: str) -> str:
    if name in ELEVATION_BANDS:
        return "elevation"
    if name in SEMANTIC_BANDS:
        return "semantic"
    return "statistic"


@dataclass(frozen=True)
class NormStats:
    band_order: tuple
    stat_mean: dict
    stat_std: dict
    elevation_scale: float = ELEVATION_SCALE

    def __post_init__(self):
        for name, s in self.stat_std.items():
            if s <= 0:
                raise DataError(f"band {name!r} has non-positive scale {s}")
        if self.elevation_scale <= 0:
            raise DataError("elevation_scale must be positive")

    def to_dict(self) -> dict:
        return {"band_order": list(self.band_order),
                "stat_mean": dict(self.stat_mean),
                "stat_std": dict(self.stat_std),
                "elevation_scale": self.elevation_scale}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(band_order=tuple(d["band_order"]),
                   stat_mean=d["stat_mean"], stat_std=d["stat_std"],
                   elevation_scale=d["elevation_scale"])


def compute_norm_stats(tiles, band_order, nodata) -> NormStats:
    """Training-set mean/std of each statistic band (valid cells only)."""
    sums, sqs, counts = {}, {}, {}
    for bands in tiles:
        for name in band_order:
            if band_kind(name) != "statistic":
                continue
            vals = bands[name][bands[name] != nodata]
            sums[name] = sums.get(name, 0.0) + vals.sum()
            sqs[name] = sqs.get(name, 0.0) + (vals * vals).sum()
            counts[name] = counts.get(name, 0) + vals.size
    mean, std = {}, {}
    for name, n in counts.items():
        mu = sums[name] / max(n, 1)
        var = sqs[name] / max(n, 1) - mu * mu
        mean[name] = float(mu)
        std[name] = float(max(np.sqrt(max(var, 0.0)), 1e-6))
    return NormStats(band_order=tuple(band_order), stat_mean=mean,
                     stat_std=std)


def tile_center(bands, nodata) -> float:
    """Per-tile elevation origin: median of the valid voxel-bottom cells."""
    if CENTER_BAND not in bands:
        raise DataError(f"tile lacks the {CENTER_BAND!r} band needed for "
                        "elevation centering")
    vals = bands[CENTER_BAND][bands[CENTER_BAND] != nodata]
    if vals.size == 0:
        raise DataError(f"{CENTER_BAND!r} band has no valid cells")
    return float(np.median(vals))


def normalize_band(values, name, stats: NormStats, center, nodata):
    """One band to network units; nodata cells become exactly 0."""
    valid = values != nodata
    kind = band_kind(name)
    if kind == "elevation":
        out = (values - center) / stats.elevation_scale
    elif kind == "statistic":
        out = (values - stats.stat_mean[name]) / stats.stat_std[name]
    else:
        out = values
    return np.where(valid, out, 0.0)


def denormalize_dtm(values, stats: NormStats, center):
    """Network output back to meters."""
    return values * stats.elevation_scale + center
