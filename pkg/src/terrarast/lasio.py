"""LAS 1.2-1.4 binary reader and writer (point formats 0, 1, 3, 6).

Only uncompressed LAS is handled; LAZ raises UnsupportedFormat. The
writer emits minimal, VLR-free files and exists mainly so clouds can be
exported and so read/write round trips are testable end to end.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import CorruptHeader, TruncatedPayload, UnsupportedFormat
from .pointcloud import PointCloud

_SUPPORTED_FORMATS = (0, 1, 3, 6)
_RECORD_LENGTHS = {0: 20, 1: 28, 3: 34, 6: 30}
_HEADER_SIZES = {(1, 2): 227, (1, 3): 235, (1, 4): 375}

_POINT_DTYPES = {
    0: np.dtype([("x", "<i4"), ("y", "<i4"), ("z", "<i4"),
                 ("intensity", "<u2"), ("flags", "u1"), ("classification", "u1"),
                 ("scan_angle", "i1"), ("user_data", "u1"), ("source_id", "<u2")]),
    1: np.dtype([("x", "<i4"), ("y", "<i4"), ("z", "<i4"),
                 ("intensity", "<u2"), ("flags", "u1"), ("classification", "u1"),
                 ("scan_angle", "i1"), ("user_data", "u1"), ("source_id", "<u2"),
                 ("gps_time", "<f8")]),
    3: np.dtype([("x", "<i4"), ("y", "<i4"), ("z", "<i4"),
                 ("intensity", "<u2"), ("flags", "u1"), ("classification", "u1"),
                 ("scan_angle", "i1"), ("user_data", "u1"), ("source_id", "<u2"),
                 ("gps_time", "<f8"),
                 ("red", "<u2"), ("green", "<u2"), ("blue", "<u2")]),
    6: np.dtype([("x", "<i4"), ("y", "<i4"), ("z", "<i4"),
                 ("intensity", "<u2"), ("returns", "u1"), ("flags", "u1"),
                 ("classification", "u1"), ("user_data", "u1"),
                 ("scan_angle", "<i2"), ("source_id", "<u2"),
                 ("gps_time", "<f8")]),
}


def read_las(path) -> PointCloud:
    """Decode a LAS file into a PointCloud with scale/offset applied.

    Bounds are recomputed from the decoded points, never trusted from the
    header. Errors report the offending byte offset.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < 227:
        raise CorruptHeader("file shorter than a minimal LAS header", offset=len(data))
    if data[0:4] != b"LASF":
        raise CorruptHeader("missing 'LASF' signature", offset=0)

    major, minor = data[24], data[25]
    if (major, minor) not in _HEADER_SIZES:
        raise UnsupportedFormat(f"LAS version {major}.{minor} not supported", offset=24)
    header_size, = struct.unpack_from("<H", data, 94)
    if header_size < _HEADER_SIZES[(major, minor)]:
        raise CorruptHeader(
            f"header size {header_size} too small for LAS 1.{minor}", offset=94)
    point_offset, = struct.unpack_from("<I", data, 96)
    fmt = data[104]
    if fmt & 0xC0:
        raise UnsupportedFormat("compressed (LAZ) point format", offset=104)
    if fmt not in _SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"point format {fmt} not supported", offset=104)
    record_length, = struct.unpack_from("<H", data, 105)
    if record_length < _RECORD_LENGTHS[fmt]:
        raise CorruptHeader(
            f"record length {record_length} below format-{fmt} minimum", offset=105)

    count, = struct.unpack_from("<I", data, 107)
    if (major, minor) == (1, 4) and count == 0:
        count, = struct.unpack_from("<Q", data, 247)

    scale = struct.unpack_from("<3d", data, 131)
    offset = struct.unpack_from("<3d", data, 155)
    if any(s <= 0 for s in scale):
        raise CorruptHeader("non-positive coordinate scale", offset=131)

    needed = point_offset + count * record_length
    if len(data) < needed:
        raise TruncatedPayload(
            f"expected {count} records of {record_length} bytes", offset=len(data))

    base = _POINT_DTYPES[fmt]
    if record_length > base.itemsize:
        dtype = np.dtype({"names": list(base.names) + ["_extra"],
                          "formats": list(base.fields[n][0] for n in base.names)
                          + [(np.uint8, record_length - base.itemsize)],
                          "offsets": [base.fields[n][1] for n in base.names]
                          + [base.itemsize],
                          "itemsize": record_length})
    else:
        dtype = base
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=point_offset)

    x = raw["x"] * scale[0] + offset[0]
    y = raw["y"] * scale[1] + offset[1]
    z = raw["z"] * scale[2] + offset[2]
    if fmt == 6:
        echo = raw["returns"] & 0x0F
        nret = (raw["returns"] >> 4) & 0x0F
        label = raw["classification"]
    else:
        echo = raw["flags"] & 0x07
        nret = (raw["flags"] >> 3) & 0x07
        label = raw["classification"] & 0x1F
    # Defensive: malformed writers sometimes emit 0 returns
    echo = np.maximum(echo, 1).astype(np.uint8)
    nret = np.maximum(nret, echo).astype(np.uint8)
    return PointCloud.from_arrays(x, y, z, raw["intensity"].astype(np.uint32),
                                  echo, nret, label.astype(np.uint8))


def write_las(cloud: PointCloud, path, point_format: int = 0,
              scale: float = 0.001) -> None:
    """Write a minimal uncompressed LAS file.

    Formats 0/1/3 are written as LAS 1.2, format 6 as LAS 1.4. Coordinates
    are quantized to `scale`; offsets are the floor of the cloud minima so
    raw integers stay in range. Output is deterministic for a given cloud.
    """
    if point_format not in _SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"point format {point_format} not supported")
    n = len(cloud)
    version = (1, 4) if point_format == 6 else (1, 2)
    header_size = _HEADER_SIZES[version]
    record_length = _RECORD_LENGTHS[point_format]

    if n:
        off = (np.floor(cloud.x.min()), np.floor(cloud.y.min()),
               np.floor(cloud.z.min()))
    else:
        off = (0.0, 0.0, 0.0)

    base = _POINT_DTYPES[point_format]
    rec = np.zeros(n, dtype=base)
    rec["x"] = np.round((cloud.x - off[0]) / scale).astype(np.int64)
    rec["y"] = np.round((cloud.y - off[1]) / scale).astype(np.int64)
    rec["z"] = np.round((cloud.z - off[2]) / scale).astype(np.int64)
    if n:
        # header bounds reflect the quantized coordinates readers reconstruct,
        # keeping write -> read -> write byte identical
        mins = tuple(rec[a].min() * scale + off[k]
                     for k, a in enumerate("xyz"))
        maxs = tuple(rec[a].max() * scale + off[k]
                     for k, a in enumerate("xyz"))
    else:
        mins = maxs = (0.0, 0.0, 0.0)
    rec["intensity"] = np.minimum(cloud.intensity, 0xFFFF)
    if point_format == 6:
        rec["returns"] = ((cloud.num_returns.astype(np.uint8) & 0x0F) << 4) \
            | (cloud.echo_number.astype(np.uint8) & 0x0F)
        rec["classification"] = cloud.class_label
    else:
        rec["flags"] = ((cloud.num_returns.astype(np.uint8) & 0x07) << 3) \
            | (cloud.echo_number.astype(np.uint8) & 0x07)
        rec["classification"] = cloud.class_label & 0x1F

    header = bytearray(header_size)
    header[0:4] = b"LASF"
    header[24] = version[0]
    header[25] = version[1]
    header[26:26 + 9] = b"terrarast"
    header[58:58 + 9] = b"terrarast"
    struct.pack_into("<H", header, 94, header_size)
    struct.pack_into("<I", header, 96, header_size)
    struct.pack_into("<I", header, 100, 0)  # no VLRs
    header[104] = point_format
    struct.pack_into("<H", header, 105, record_length)
    legacy_n = n if version == (1, 2) else 0
    struct.pack_into("<I", header, 107, legacy_n)
    struct.pack_into("<3d", header, 131, scale, scale, scale)
    struct.pack_into("<3d", header, 155, *off)
    struct.pack_into("<6d", header, 179, maxs[0], mins[0], maxs[1], mins[1],
                     maxs[2], mins[2])
    if version == (1, 4):
        struct.pack_into("<Q", header, 247, n)

    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(rec.tobytes())
