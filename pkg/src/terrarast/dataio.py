"""Persistence: the ".dtr" raster-stack format, ground masks, manifests.

A ".dtr" is a directory holding a JSON sidecar (grid geometry, band names,
per-band CRC32) and a raw band-sequential float32 little-endian binary,
row-major north to south. Round trips are bit-exact and corruption is
detected via the checksums, never silently ignored.
"""

from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

from .errors import (ChecksumFailure, DuplicateTile, FormatVersionMismatch,
                     TruncatedPayload)
from .raster import GridSpec, RasterGrid, RasterStack

DTR_VERSION = 1
SIDECAR_NAME = "stack.json"
BANDS_NAME = "bands.bin"

_MASK_MAGIC = b"TRMK"


def write_stack(stack: RasterStack, path) -> None:
    """Write a stack as a `.dtr` directory (sidecar + band-sequential bin)."""
    os.makedirs(path, exist_ok=True)
    spec = stack.spec
    payload = b""
    crcs = []
    for band in stack.bands:
        raw = np.ascontiguousarray(band.values, dtype="<f4").tobytes()
        crcs.append(zlib.crc32(raw))
        payload += raw
    sidecar = {
        "format": "dtr",
        "version": DTR_VERSION,
        "width": spec.width,
        "height": spec.height,
        "bands": [b.band_name for b in stack.bands],
        "cell_size": spec.cell_size,
        "voxel_size_z": spec.voxel_size_z,
        "origin_x": spec.origin_x,
        "origin_y": spec.origin_y,
        "nodata": spec.nodata,
        "crs_tag": None,
        "crc32": crcs,
    }
    with open(os.path.join(path, BANDS_NAME), "wb") as fh:
        fh.write(payload)
    with open(os.path.join(path, SIDECAR_NAME), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_stack(path) -> RasterStack:
    with open(os.path.join(path, SIDECAR_NAME), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format") != "dtr" or meta.get("version") != DTR_VERSION:
        raise FormatVersionMismatch(
            f"expected dtr version {DTR_VERSION}, got "
            f"{meta.get('format')}/{meta.get('version')}")
    spec = GridSpec(origin_x=meta["origin_x"], origin_y=meta["origin_y"],
                    width=meta["width"], height=meta["height"],
                    cell_size=meta["cell_size"],
                    voxel_size_z=meta["voxel_size_z"], nodata=meta["nodata"])
    names = meta["bands"]
    crcs = meta["crc32"]
    band_bytes = spec.width * spec.height * 4
    with open(os.path.join(path, BANDS_NAME), "rb") as fh:
        payload = fh.read()
    if len(payload) != band_bytes * len(names):
        raise TruncatedPayload(
            f"expected {band_bytes * len(names)} band bytes, got {len(payload)}")
    bands = []
    for k, name in enumerate(names):
        raw = payload[k * band_bytes:(k + 1) * band_bytes]
        if zlib.crc32(raw) != crcs[k]:
            raise ChecksumFailure(f"band {name!r} failed its CRC32 check")
        values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        bands.append(RasterGrid(spec, values.reshape(spec.height, spec.width),
                                name))
    return RasterStack(bands=tuple(bands))


def read_band(path, band_name: str) -> RasterGrid:
    """Read one band of a `.dtr`; `band_name` may be omitted for single-band."""
    stack = read_stack(path)
    if band_name:
        return stack.band(band_name)
    if len(stack.bands) != 1:
        raise KeyError(f"{path} has bands {stack.band_names}; name one")
    return stack.bands[0]


# ---------------------------------------------------------------------------
# ground masks

def write_mask(flags, path) -> None:
    flags = np.asarray(flags, dtype=bool)
    packed = np.packbits(flags)
    with open(path, "wb") as fh:
        fh.write(_MASK_MAGIC)
        fh.write(struct.pack("<HQ", 1, len(flags)))
        fh.write(packed.tobytes())


def read_mask(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MASK_MAGIC:
        raise FormatVersionMismatch("not a terrarast mask file")
    version, count = struct.unpack_from("<HQ", data, 4)
    if version != 1:
        raise FormatVersionMismatch(f"mask version {version} not supported")
    packed = np.frombuffer(data, dtype=np.uint8, offset=14)
    if len(packed) * 8 < count:
        raise TruncatedPayload(f"mask payload too short for {count} flags")
    return np.unpackbits(packed, count=count).astype(bool)


# ---------------------------------------------------------------------------
# dataset manifests

SPLITS = ("train", "val", "test")


def build_manifest(tiles, seed: int | None = None) -> dict:
    """Assemble a manifest from tile entries, assigning splits if missing.

    Entries are dicts with cloud_path, dtm_path and optionally split.
    Missing splits are assigned deterministically from `seed` in 2:1:1
    train/val/test proportion. Duplicate cloud paths are rejected.
    """
    seen = set()
    out = []
    unassigned = []
    for t in tiles:
        key = t["cloud_path"]
        if key in seen:
            raise DuplicateTile(f"tile {key!r} listed twice")
        seen.add(key)
        entry = {"cloud_path": t["cloud_path"],
                 "dtm_path": t.get("dtm_path"),
                 "split": t.get("split")}
        if entry["split"] is not None and entry["split"] not in SPLITS:
            raise ValueError(f"unknown split {entry['split']!r}")
        out.append(entry)
        if entry["split"] is None:
            unassigned.append(entry)
    if unassigned:
        rng = np.random.Generator(np.random.Philox(0 if seed is None else seed))
        order = rng.permutation(len(unassigned))
        n = len(unassigned)
        n_train = n // 2
        n_val = (n - n_train) // 2
        for pos, idx in enumerate(order):
            if pos < n_train:
                unassigned[idx]["split"] = "train"
            elif pos < n_train + n_val:
                unassigned[idx]["split"] = "val"
            else:
                unassigned[idx]["split"] = "test"
    return {"format": "terrarast-manifest", "version": 1, "seed": seed,
            "tiles": out}


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "terrarast-manifest":
        raise FormatVersionMismatch(f"{path} is not a terrarast manifest")
    return manifest
