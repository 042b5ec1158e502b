"""Shared fixtures: synthetic .dtr tiles and manifests on disk."""

import json

import numpy as np

from deepterra import dtrio

NODATA = -9999.0
BAND_ORDER = ["voxel_bottom", "voxel_top", "density", "stdev"]


def make_meta(size, cell=0.25):
    return {"format": "dtr", "version": 1, "width": size, "height": size,
            "bands": [], "cell_size": cell, "voxel_size_z": cell,
            "origin_x": 0.0, "origin_y": size * cell, "nodata": NODATA,
            "crs_tag": None, "crc32": []}


def make_tile(seed, size=32, base_elevation=0.0):
    """Smooth synthetic terrain with object bumps; returns (bands, truth)."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    terrain = base_elevation + 3.0 * np.sin(2 * np.pi * (xx + 0.3 * seed)) \
        * np.cos(np.pi * yy) + 2.0 * yy
    bumps = np.zeros((size, size))
    for _ in range(3):
        cx, cy = rng.integers(4, size - 4, 2)
        r = int(rng.integers(2, 5))
        bumps[max(0, cy - r):cy + r, max(0, cx - r):cx + r] = \
            float(rng.uniform(2, 8))
    bands = {
        "voxel_bottom": terrain + rng.normal(0, 0.05, (size, size)),
        "voxel_top": terrain + bumps + rng.normal(0, 0.05, (size, size)),
        "density": rng.poisson(6.0, (size, size)).astype(float),
        "stdev": np.abs(rng.normal(0, 0.3, (size, size))) + 0.1 * bumps,
    }
    return bands, terrain


def write_tile(tmp_path, name, seed, size=32, base_elevation=0.0):
    bands, terrain = make_tile(seed, size, base_elevation)
    meta = make_meta(size)
    stack_path = tmp_path / f"{name}.dtr"
    dtm_path = tmp_path / f"{name}_dtm.dtr"
    dtrio.write_stack(meta, {n: bands[n] for n in BAND_ORDER}, stack_path)
    dtrio.write_stack(meta, {"dtm": terrain}, dtm_path)
    return {"cloud_path": str(stack_path), "dtm_path": str(dtm_path)}


def write_manifest(tmp_path, n_tiles=4, size=32, splits=None, seed0=0):
    tiles = []
    for i in range(n_tiles):
        entry = write_tile(tmp_path, f"tile{i}", seed0 + i, size,
                           base_elevation=50.0 * i)
        if splits:
            entry["split"] = splits[i]
        else:
            entry["split"] = "train"
        tiles.append(entry)
    manifest = {"format": "terrarast-manifest", "version": 1, "seed": None,
                "tiles": tiles}
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path
