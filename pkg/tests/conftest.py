"""Shared helpers: random cloud factories and independent brute-force oracles.

The oracles deliberately avoid the library's vectorized grouping code:
they bin points per column with plain dictionaries and recompute every
statistic from first principles.
"""

import math

import numpy as np
import pytest

from terrarast.pointcloud import PointCloud


def make_random_cloud(seed, n=2000, extent=(8.0, 8.0), zrange=(0.0, 6.0),
                      max_echo=4):
    rng = np.random.default_rng(seed)
    x = rng.random(n) * extent[0]
    y = rng.random(n) * extent[1]
    z = zrange[0] + rng.random(n) * (zrange[1] - zrange[0])
    nret = rng.integers(1, max_echo + 1, n).astype(np.uint8)
    echo = np.array([rng.integers(1, r + 1) for r in nret], dtype=np.uint8)
    label = rng.integers(0, 9, n).astype(np.uint8)
    intensity = rng.integers(0, 2 ** 16, n).astype(np.uint32)
    return PointCloud.from_arrays(x, y, z, intensity, echo, nret, label)


def column_bins(cloud, spec):
    """Map (row, col) -> list of point indices, by the spec's cell formula."""
    bins = {}
    for k in range(len(cloud)):
        j = math.floor((cloud.x[k] - spec.origin_x) / spec.cell_size)
        i = math.floor((spec.origin_y - cloud.y[k]) / spec.cell_size)
        if 0 <= i < spec.height and 0 <= j < spec.width:
            bins.setdefault((i, j), []).append(k)
    return bins


def oracle_rasters(cloud, spec):
    """Brute-force per-column recomputation of all six measurement bands."""
    nod = spec.nodata
    out = {name: np.full((spec.height, spec.width), nod)
           for name in ("pixel_mean", "voxel_top", "voxel_bottom", "stdev",
                        "echoes")}
    out["density"] = np.zeros((spec.height, spec.width))
    if not len(cloud):
        return out
    min_z = cloud.bounds.min_z
    for (i, j), idx in column_bins(cloud, spec).items():
        zs = [cloud.z[k] for k in idx]
        out["pixel_mean"][i, j] = sum(zs) / len(zs)
        out["density"][i, j] = len(idx)
        voxels = {}
        for zv in zs:
            voxels.setdefault(math.floor((zv - min_z) / spec.voxel_size_z),
                              []).append(zv)
        means = [sum(v) / len(v) for _, v in sorted(voxels.items())]
        out["voxel_top"][i, j] = means[-1]
        out["voxel_bottom"][i, j] = means[0]
        mu = sum(means) / len(means)
        out["stdev"][i, j] = math.sqrt(sum((m - mu) ** 2 for m in means)
                                       / len(means))
        counts = {}
        for k in idx:
            e = int(cloud.echo_number[k])
            counts[e] = counts.get(e, 0) + 1
        best = max(counts.values())
        out["echoes"][i, j] = min(e for e, c in counts.items() if c == best)
    return out


def oracle_label_mode(cloud, spec):
    """Per-column class-label mode (ties to the smallest code)."""
    out = np.full((spec.height, spec.width), spec.nodata)
    for (i, j), idx in column_bins(cloud, spec).items():
        counts = {}
        for k in idx:
            c = int(cloud.class_label[k])
            counts[c] = counts.get(c, 0) + 1
        best = max(counts.values())
        out[i, j] = min(c for c, n in counts.items() if n == best)
    return out


def oracle_sbm_mask(z):
    """From-scratch skewness-balancing removal, recomputing each step."""
    z = np.asarray(z, dtype=float)
    remaining = np.sort(z)
    cutoff = None
    while len(remaining) > 2:
        n = len(remaining)
        mu = remaining.mean()
        sigma = math.sqrt(((remaining - mu) ** 2).mean())
        if sigma <= 1e-12:
            break
        skew = (((remaining - mu) / sigma) ** 3).mean()
        if skew <= 0:
            break
        cutoff = remaining[-1]
        remaining = remaining[:-1]
    if cutoff is None:
        return np.ones(len(z), dtype=bool)
    return z < cutoff


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
