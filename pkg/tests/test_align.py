import numpy as np
import pytest

from terrarast.align import grid_offset_search, masked_rmse, shift_raster
from terrarast.errors import EmptyOverlap
from terrarast.raster import GridSpec, RasterGrid


def _grid(values, band="dtm", nodata=-9999.0):
    values = np.asarray(values, dtype=float)
    spec = GridSpec(origin_x=0, origin_y=values.shape[0] * 1.0,
                    width=values.shape[1], height=values.shape[0],
                    cell_size=1.0, nodata=nodata)
    return RasterGrid(spec, values, band)


def _terrain(shape=(40, 40), seed=0):
    rng = np.random.default_rng(seed)
    return rng.random(shape) * 5 + np.linspace(0, 10, shape[1])


def test_masked_rmse_identical_is_zero():
    t = _terrain()
    ones = _grid(np.ones_like(t), "sem1")
    assert masked_rmse(_grid(t), _grid(t), ones) == 0.0


def test_masked_rmse_constant_offset():
    t = _terrain()
    ones = _grid(np.ones_like(t), "sem1")
    assert masked_rmse(_grid(t + 2.0), _grid(t), ones) == pytest.approx(2.0)


def test_masked_rmse_matches_direct_sum():
    rng = np.random.default_rng(5)
    a, b = rng.random((30, 30)), rng.random((30, 30))
    mask = (rng.random((30, 30)) < 0.6).astype(float)
    got = masked_rmse(_grid(a), _grid(b), _grid(mask, "sem1"))
    sel = mask == 1.0
    want = np.sqrt(np.sum((a[sel] - b[sel]) ** 2) / sel.sum())
    assert got == pytest.approx(want, abs=1e-9)


def test_masked_rmse_empty_overlap():
    t = _terrain((5, 5))
    zeros = _grid(np.zeros_like(t), "sem1")
    with pytest.raises(EmptyOverlap):
        masked_rmse(_grid(t), _grid(t), zeros)


def test_shift_raster_moves_southeast():
    g = _grid(np.arange(9, dtype=float).reshape(3, 3))
    s = shift_raster(g, 1, 1)
    assert s.values[1, 1] == 0.0
    assert s.values[0, 0] == g.spec.nodata


def test_aligned_input_returns_origin():
    t = _terrain()
    ones = _grid(np.ones_like(t), "sem1")
    res = grid_offset_search(_grid(t), _grid(t), ones)
    assert (res.dx, res.dy) == (0, 0)
    assert res.rmse_at_best == 0.0


def test_recovers_injected_offset_3_5():
    t = _terrain((60, 60), seed=3)
    dtm = _grid(t)
    shifted = shift_raster(dtm, 3, 5)
    ones = _grid(np.ones_like(t), "sem1")
    res = grid_offset_search(dtm, shifted, ones)
    assert (res.dx, res.dy) == (3, 5)
    assert res.rmse_at_best == 0.0
    assert res.rmse_grid.shape == (11, 11)
    assert res.rmse_grid[5, 3] == res.rmse_at_best


@pytest.mark.parametrize("dx,dy", [(0, 0), (10, 0), (0, 10), (7, 2), (10, 10)])
def test_recovery_property_corners(dx, dy):
    t = _terrain((50, 50), seed=dx * 11 + dy)
    dtm = _grid(t)
    ones = _grid(np.ones_like(t), "sem1")
    res = grid_offset_search(dtm, shift_raster(dtm, dx, dy), ones)
    assert (res.dx, res.dy) == (dx, dy)
    assert res.rmse_at_best == 0.0


def test_constant_shift_invariance():
    t = _terrain((30, 30), seed=9)
    ones = _grid(np.ones_like(t), "sem1")
    r1 = grid_offset_search(_grid(t), _grid(np.roll(t, 2, axis=0)), ones)
    r2 = grid_offset_search(_grid(t + 100.0),
                            _grid(np.roll(t, 2, axis=0) + 100.0), ones)
    assert np.allclose(r1.rmse_grid, r2.rmse_grid, atol=1e-9, equal_nan=True)


def test_tie_breaks_smaller_dy_then_dx():
    t = np.zeros((20, 20))  # constant surface: every offset has RMSE 0
    ones = _grid(np.ones_like(t), "sem1")
    res = grid_offset_search(_grid(t), _grid(t), ones)
    assert (res.dx, res.dy) == (0, 0)
