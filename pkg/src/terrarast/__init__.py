"""ALS point-cloud rasterization, ground filtering and DTM extraction."""

from .pointcloud import BoundingBox, PointCloud, crop, read_ascii, write_ascii
from .lasio import read_las, write_las
from .raster import (GridSpec, RasterGrid, RasterStack, downsample,
                     rasterize_bands, rasterize_density, rasterize_echoes,
                     rasterize_pixel_mean, rasterize_semantics,
                     rasterize_stdev, rasterize_voxel_bottom,
                     rasterize_voxel_top, stack_bands)
from .groundfilter import (CsfParams, PmfParams, SmrfParams, csf,
                           mask_to_dtm_points, pmf, sbm, smrf)
from .tin import Triangulation, delaunay, tin_to_dtm
from .align import OffsetResult, grid_offset_search, masked_rmse, shift_raster
from .evaluation import (dtm_rmse, elevation_histogram,
                         elevation_raster_as_dtm_report, per_tile_boxstats)
from .synth import SceneSpec, generate, terrain_function
from . import dataio

__version__ = "0.1.0"
