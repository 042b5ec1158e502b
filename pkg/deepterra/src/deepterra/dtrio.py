"""Minimal reader/writer for the ".dtr" raster-stack interchange format.

This is the file boundary shared with the rasterization toolkit: a
directory holding "stack.json" (grid geometry, ordered band names, CRC32
per band) and "bands.bin" (float32 little-endian, band-sequential,
row-major). Implemented here independently so this package depends only
on the format, not on the producer's code.
"""

from __future__ import annotations

import json
import os
import zlib

import numpy as np

from .errors import FormatError

DTR_VERSION = 1


def read_stack(path):
    """Return (meta, bands) where bands maps name -> float64 (H, W) array."""
    try:
        with open(os.path.join(path, "stack.json"), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except (OSError, ValueError) as exc:
        raise FormatError(f"{path}: unreadable sidecar: {exc}") from exc
    if meta.get("format") != "dtr" or meta.get("version") != DTR_VERSION:
        raise FormatError(f"{path}: not a version-{DTR_VERSION} dtr stack")
    h, w = meta["height"], meta["width"]
    names = meta["bands"]
    band_bytes = h * w * 4
    with open(os.path.join(path, "bands.bin"), "rb") as fh:
        payload = fh.read()
    if len(payload) != band_bytes * len(names):
        raise FormatError(f"{path}: payload is {len(payload)} bytes, "
                          f"expected {band_bytes * len(names)}")
    bands = {}
    for k, name in enumerate(names):
        raw = payload[k * band_bytes:(k + 1) * band_bytes]
        if zlib.crc32(raw) != meta["crc32"][k]:
            raise FormatError(f"{path}: band {name!r} failed its checksum")
        bands[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64) \
            .reshape(h, w)
    return meta, bands


def write_stack(meta, bands, path):
    """Write bands (name -> (H, W) array) with geometry copied from meta."""
    os.makedirs(path, exist_ok=True)
    names = list(bands)
    payload = b""
    crcs = []
    for name in names:
        raw = np.ascontiguousarray(bands[name], dtype="<f4").tobytes()
        crcs.append(zlib.crc32(raw))
        payload += raw
    sidecar = {
        "format": "dtr",
        "version": DTR_VERSION,
        "width": meta["width"],
        "height": meta["height"],
        "bands": names,
        "cell_size": meta["cell_size"],
        "voxel_size_z": meta["voxel_size_z"],
        "origin_x": meta["origin_x"],
        "origin_y": meta["origin_y"],
        "nodata": meta["nodata"],
        "crs_tag": meta.get("crs_tag"),
        "crc32": crcs,
    }
    with open(os.path.join(path, "bands.bin"), "wb") as fh:
        fh.write(payload)
    with open(os.path.join(path, "stack.json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "terrarast-manifest":
        raise FormatError(f"{path} is not a tile manifest")
    return manifest
