import struct

import numpy as np
import pytest

from terrarast.errors import TruncatedPayload, UnsupportedFormat
from terrarast.lasio import read_las, write_las
from terrarast.pointcloud import PointCloud

from conftest import make_random_cloud


def _minimal_las_format0(tmp_path, raw_xyz=(100, 200, 300), scale=0.01,
                         count=1, records=None):
    """Hand-assembled 1-point LAS 1.2 format-0 file."""
    header = bytearray(227)
    header[0:4] = b"LASF"
    header[24] = 1
    header[25] = 2
    struct.pack_into("<H", header, 94, 227)
    struct.pack_into("<I", header, 96, 227)
    header[104] = 0
    struct.pack_into("<H", header, 105, 20)
    struct.pack_into("<I", header, 107, count)
    struct.pack_into("<3d", header, 131, scale, scale, scale)
    struct.pack_into("<3d", header, 155, 0.0, 0.0, 0.0)
    if records is None:
        rec = bytearray(20)
        struct.pack_into("<3i", rec, 0, *raw_xyz)
        rec[14] = (1 << 3) | 1  # 1 return of 1
        records = bytes(rec)
    path = tmp_path / "mini.las"
    path.write_bytes(bytes(header) + records)
    return path


def test_scale_offset_arithmetic(tmp_path):
    path = _minimal_las_format0(tmp_path)
    cloud = read_las(path)
    assert len(cloud) == 1
    assert cloud.x[0] == pytest.approx(1.00)
    assert cloud.y[0] == pytest.approx(2.00)
    assert cloud.z[0] == pytest.approx(3.00)


def test_truncated_payload(tmp_path):
    rec = bytes(20) * 8
    path = _minimal_las_format0(tmp_path, count=10, records=rec)
    with pytest.raises(TruncatedPayload):
        read_las(path)


def test_laz_flag_rejected(tmp_path):
    path = _minimal_las_format0(tmp_path)
    data = bytearray(path.read_bytes())
    data[104] |= 0x80  # compressed-format bit
    path.write_bytes(bytes(data))
    with pytest.raises(UnsupportedFormat):
        read_las(path)


def _lattice_cloud(seed, n=200):
    """Random cloud on the 1 mm quantization lattice (exact round trip)."""
    rng = np.random.default_rng(seed)
    x = np.round(rng.random(n) * 100, 3)
    y = np.round(rng.random(n) * 100, 3)
    z = np.round(rng.random(n) * 30, 3)
    nret = rng.integers(1, 5, n).astype(np.uint8)
    echo = np.minimum(rng.integers(1, 5, n), nret).astype(np.uint8)
    label = rng.integers(0, 12, n).astype(np.uint8)
    inten = rng.integers(0, 2 ** 16, n).astype(np.uint32)
    return PointCloud.from_arrays(x, y, z, inten, echo, nret, label)


@pytest.mark.parametrize("fmt", [0, 1, 3, 6])
def test_round_trip_all_formats(tmp_path, fmt):
    cloud = _lattice_cloud(fmt + 40)
    path = tmp_path / f"rt{fmt}.las"
    write_las(cloud, path, point_format=fmt)
    back = read_las(path)
    assert np.allclose(back.x, cloud.x, atol=1e-9)
    assert np.allclose(back.y, cloud.y, atol=1e-9)
    assert np.allclose(back.z, cloud.z, atol=1e-9)
    assert np.array_equal(back.intensity, cloud.intensity)
    assert np.array_equal(back.echo_number, cloud.echo_number)
    assert np.array_equal(back.num_returns, cloud.num_returns)
    assert np.array_equal(back.class_label, cloud.class_label)


def test_write_read_write_byte_identical(tmp_path):
    cloud = _lattice_cloud(99)
    a = tmp_path / "a.las"
    b = tmp_path / "b.las"
    write_las(cloud, a)
    write_las(read_las(a), b)
    assert a.read_bytes() == b.read_bytes()


def test_three_point_independent_writer_round_trip(tmp_path):
    # file assembled by the independent struct-based writer above
    header_points = [(123, -456, 789), (0, 0, 0), (10_000, 20_000, 30_000)]
    recs = b""
    for xyz in header_points:
        rec = bytearray(20)
        struct.pack_into("<3i", rec, 0, *xyz)
        struct.pack_into("<H", rec, 12, 7)
        rec[14] = (2 << 3) | 1  # echo 1 of 2
        rec[15] = 2  # ground
        recs += bytes(rec)
    path = _minimal_las_format0(tmp_path, count=3, records=recs)
    cloud = read_las(path)
    assert np.allclose(cloud.x, [x * 0.01 for x, _, _ in header_points])
    assert np.allclose(cloud.z, [z * 0.01 for _, _, z in header_points])
    assert list(cloud.intensity) == [7, 7, 7]
    assert list(cloud.echo_number) == [1, 1, 1]
    assert list(cloud.num_returns) == [2, 2, 2]
    assert list(cloud.class_label) == [2, 2, 2]
    # and it survives our writer bit-exactly at the value level
    out = tmp_path / "rt.las"
    write_las(cloud, out, point_format=0, scale=0.01)
    back = read_las(out)
    assert np.array_equal(back.x, cloud.x)
    assert np.array_equal(back.z, cloud.z)
