import numpy as np
import pytest

from terrarast.errors import SpecMismatch
from terrarast.pointcloud import PointCloud
from terrarast.raster import (GridSpec, RasterGrid, downsample,
                              rasterize_bands, rasterize_density,
                              rasterize_echoes, rasterize_pixel_mean,
                              rasterize_semantics, rasterize_stdev,
                              rasterize_voxel_bottom, rasterize_voxel_top,
                              stack_bands)

from conftest import make_random_cloud, oracle_rasters

SPEC1 = GridSpec(origin_x=0.0, origin_y=1.0, width=1, height=1, cell_size=1.0,
                 voxel_size_z=0.25)


def _cloud(zs, echoes=None, labels=None, xs=None, ys=None):
    n = len(zs)
    return PointCloud.from_arrays(
        xs if xs is not None else [0.5] * n,
        ys if ys is not None else [0.5] * n, zs,
        echo_number=echoes, num_returns=[max(echoes)] * n if echoes else None,
        class_label=labels)


def test_pixel_mean_single_point():
    g = rasterize_pixel_mean(_cloud([5.0]), SPEC1)
    assert g.values[0, 0] == 5.0


def test_pixel_mean_two_points():
    g = rasterize_pixel_mean(_cloud([0.0, 10.0]), SPEC1)
    assert g.values[0, 0] == 5.0


def test_voxel_top_separated_points():
    g = rasterize_voxel_top(_cloud([0.1, 3.1]), SPEC1)
    assert g.values[0, 0] == pytest.approx(3.1)


def test_voxel_bottom_separated_points():
    g = rasterize_voxel_bottom(_cloud([0.1, 3.1]), SPEC1)
    assert g.values[0, 0] == pytest.approx(0.1)


def test_voxel_bottom_mean_within_voxel():
    g = rasterize_voxel_bottom(_cloud([2.0, 2.1]), SPEC1)
    assert g.values[0, 0] == pytest.approx(2.05)


def test_density_counts_and_zero():
    spec = GridSpec(origin_x=0.0, origin_y=2.0, width=2, height=2,
                    cell_size=1.0)
    g = rasterize_density(_cloud([1.0, 2.0, 3.0]), spec)
    assert g.values[1, 0] == 3.0
    assert g.values[0, 1] == 0.0  # true zero, not nodata


def test_density_conservation():
    cloud = make_random_cloud(5, n=5000)
    spec = GridSpec.covering(cloud, 0.5)
    g = rasterize_density(cloud, spec)
    assert g.values.sum() == len(cloud)


def test_stdev_single_voxel_is_zero():
    g = rasterize_stdev(_cloud([2.0, 2.1]), SPEC1)
    assert g.values[0, 0] == 0.0


def test_stdev_two_voxel_means():
    # voxel means 0 and 2 -> population stdev 1
    g = rasterize_stdev(_cloud([0.0, 2.0]), SPEC1)
    assert g.values[0, 0] == pytest.approx(1.0)


def test_echoes_majority_and_tie():
    g = rasterize_echoes(_cloud([1.0, 1.0, 1.0], echoes=[1, 1, 2]), SPEC1)
    assert g.values[0, 0] == 1.0
    g = rasterize_echoes(_cloud([1.0, 1.0], echoes=[1, 2]), SPEC1)
    assert g.values[0, 0] == 1.0  # tie breaks low


def test_semantics_examples():
    sem1, sem2 = rasterize_semantics(_cloud([0, 0, 0], labels=[2, 2, 5]),
                                     SPEC1, {2})
    assert sem1.values[0, 0] == 1.0
    assert sem2.band("sem2_ground").values[0, 0] == 1.0
    assert sem2.band("sem2_nonground").values[0, 0] == 0.0
    sem1, sem2 = rasterize_semantics(_cloud([0, 0], labels=[5, 6]), SPEC1, {2})
    assert sem1.values[0, 0] == 0.0  # tie -> 5, nonground
    assert sem2.band("sem2_nonground").values[0, 0] == 1.0


def test_sem2_one_hot_conservation():
    cloud = make_random_cloud(21, n=3000)
    spec = GridSpec.covering(cloud, 0.5)
    _, sem2 = rasterize_semantics(cloud, spec, {2, 3})
    g = sem2.band("sem2_ground")
    ng = sem2.band("sem2_nonground")
    valid = g.valid
    assert np.array_equal(valid, ng.valid)
    assert np.all(g.values[valid] + ng.values[valid] == 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_all_bands_match_oracle(seed):
    cloud = make_random_cloud(seed, n=2000, extent=(8.0, 8.0))
    spec = GridSpec.covering(cloud, 0.5, 0.5)
    got = {
        "pixel_mean": rasterize_pixel_mean(cloud, spec),
        "voxel_top": rasterize_voxel_top(cloud, spec),
        "voxel_bottom": rasterize_voxel_bottom(cloud, spec),
        "density": rasterize_density(cloud, spec),
        "stdev": rasterize_stdev(cloud, spec),
        "echoes": rasterize_echoes(cloud, spec),
    }
    want = oracle_rasters(cloud, spec)
    for name in ("density", "echoes"):
        assert np.array_equal(got[name].values, want[name]), name
    for name in ("pixel_mean", "voxel_top", "voxel_bottom", "stdev"):
        assert np.allclose(got[name].values, want[name], atol=1e-6), name


def test_elevation_band_ordering():
    cloud = make_random_cloud(33, n=4000)
    spec = GridSpec.covering(cloud, 0.5)
    mean = rasterize_pixel_mean(cloud, spec).values
    top = rasterize_voxel_top(cloud, spec).values
    bot = rasterize_voxel_bottom(cloud, spec).values
    valid = mean != spec.nodata
    assert np.all(bot[valid] <= mean[valid] + 1e-12)
    assert np.all(mean[valid] <= top[valid] + 1e-12)


def test_density_marks_exactly_the_valid_elevation_cells():
    cloud = make_random_cloud(34, n=1500)
    spec = GridSpec.covering(cloud, 0.5)
    density = rasterize_density(cloud, spec).values
    mean = rasterize_pixel_mean(cloud, spec)
    assert np.array_equal(density >= 1, mean.valid)


def test_permutation_invariance():
    cloud = make_random_cloud(55, n=3000)
    rng = np.random.default_rng(0)
    perm = rng.permutation(len(cloud))
    shuffled = cloud.select(perm)
    spec = GridSpec.covering(cloud, 0.5)
    for fn in (rasterize_pixel_mean, rasterize_voxel_top,
               rasterize_voxel_bottom, rasterize_density, rasterize_stdev,
               rasterize_echoes):
        assert np.array_equal(fn(cloud, spec).values,
                              fn(shuffled, spec).values), fn.__name__


def test_stack_preserves_order_and_rejects_mismatch():
    cloud = make_random_cloud(1, n=500)
    spec = GridSpec.covering(cloud, 0.5)
    stack = rasterize_bands(cloud, spec,
                            ["voxel_bottom", "density", "stdev", "echoes"])
    assert stack.band_names == ["voxel_bottom", "density", "stdev", "echoes"]
    other = GridSpec.covering(cloud, 1.0)
    with pytest.raises(SpecMismatch, match="differ"):
        stack_bands([stack.bands[0],
                     rasterize_density(cloud, other)])


def test_downsample_identity_and_nodata_mean():
    spec = GridSpec(origin_x=0, origin_y=2, width=2, height=2, cell_size=1.0)
    vals = np.array([[1.0, 3.0], [spec.nodata, spec.nodata]])
    stack = stack_bands([RasterGrid(spec, vals, "pixel_mean")])
    assert downsample(stack, 1) is stack
    out = downsample(stack, 2)
    assert out.bands[0].values[0, 0] == 2.0
    assert out.spec.cell_size == 2.0


def test_downsample_density_sums_and_sem_rebinarizes():
    spec = GridSpec(origin_x=0, origin_y=2, width=2, height=2, cell_size=1.0)
    dens = RasterGrid(spec, np.array([[1.0, 2.0], [3.0, 4.0]]), "density")
    sem = RasterGrid(spec, np.array([[1.0, 1.0], [0.0, 0.0]]), "sem1")
    out = downsample(stack_bands([dens, sem]), 2)
    assert out.band("density").values[0, 0] == 10.0
    assert out.band("sem1").values[0, 0] == 1.0  # mean 0.5 -> 1


def test_downsample_composition():
    cloud = make_random_cloud(77, n=6000, extent=(8.0, 8.0))
    spec = GridSpec(origin_x=0, origin_y=8, width=16, height=16, cell_size=0.5)
    stack = rasterize_bands(cloud, spec, ["pixel_mean", "density"])
    # only exact on nodata-free grids; density band is always dense
    twice = downsample(downsample(stack, 2), 2)
    once = downsample(stack, 4)
    assert np.allclose(twice.band("density").values,
                       once.band("density").values)
    pm2 = twice.band("pixel_mean")
    pm4 = once.band("pixel_mean")
    dense = rasterize_density(cloud, spec).values.reshape(4, 4, 4, 4) \
        .swapaxes(1, 2).reshape(4, 4, -1)
    fully_valid = (dense > 0).all(axis=2)
    assert np.allclose(pm2.values[fully_valid], pm4.values[fully_valid])


def test_downsample_pads_with_nodata():
    spec = GridSpec(origin_x=0, origin_y=3, width=3, height=3, cell_size=1.0)
    grid = RasterGrid(spec, np.arange(9, dtype=float).reshape(3, 3),
                      "pixel_mean")
    out = downsample(stack_bands([grid]), 2)
    assert out.spec.width == 2 and out.spec.height == 2
    assert out.bands[0].values[1, 1] == 8.0  # lone valid cell in padded block
