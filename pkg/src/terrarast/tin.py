"""Delaunay TIN construction and rasterization to a DTM.

The triangulation itself is delegated to Qhull (scipy.spatial.Delaunay),
which provides the robust orientation/in-circle handling gridded ALS
points require; validity is enforced by a brute-force circumcircle oracle
in the test suite. Interpolation is barycentric at cell centers, with
nearest-vertex fill outside the convex hull so DTM tiles are always dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay as _QhullDelaunay
from scipy.spatial import QhullError, cKDTree

from .errors import DegenerateInput
from .pointcloud import PointCloud
from .raster import GridSpec, RasterGrid


@dataclass(frozen=True)
class Triangulation:
    """2D Delaunay triangulation of xy with z carried per vertex.

    Triangles are index triples, counterclockwise in the xy-plane.
    """

    vertices: np.ndarray  # (n, 3)
    triangles: np.ndarray  # (m, 3) int
    _qhull: object = field(default=None, repr=False, compare=False)


def delaunay(points: PointCloud) -> Triangulation:
    """Triangulate the xy projection; duplicate xy keeps the lowest z."""
    if len(points) < 3:
        raise DegenerateInput(f"need >= 3 points, got {len(points)}")
    # Collapse duplicate xy to one vertex keeping min z (ground-biased)
    order = np.lexsort((points.z, points.y, points.x))
    x, y, z = points.x[order], points.y[order], points.z[order]
    xy = np.column_stack([x, y])
    _, first = np.unique(xy, axis=0, return_index=True)
    first.sort()
    xy = xy[first]
    z = z[first]
    if len(xy) < 3:
        raise DegenerateInput("fewer than 3 distinct xy locations")
    try:
        qhull = _QhullDelaunay(xy)
    except QhullError as exc:
        raise DegenerateInput(f"degenerate xy configuration: {exc}") from None
    if qhull.simplices.shape[0] == 0:
        raise DegenerateInput("no triangles produced (collinear input)")

    tris = qhull.simplices.copy()
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    area2 = ((xy[b, 0] - xy[a, 0]) * (xy[c, 1] - xy[a, 1])
             - (xy[b, 1] - xy[a, 1]) * (xy[c, 0] - xy[a, 0]))
    flip = area2 < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    vertices = np.column_stack([xy, z])
    return Triangulation(vertices=vertices, triangles=tris, _qhull=qhull)


def _interpolate(tri: Triangulation, px, py):
    """Barycentric z at query points; nearest-vertex outside the hull."""
    verts = tri.vertices
    q = np.column_stack([px.ravel(), py.ravel()])
    z = np.empty(len(q), dtype=np.float64)

    qhull = tri._qhull
    if qhull is None:
        qhull = _QhullDelaunay(verts[:, :2])
    simplex = qhull.find_simplex(q)
    inside = simplex >= 0
    if np.any(inside):
        s = simplex[inside]
        trans = qhull.transform[s]
        delta = q[inside] - trans[:, 2]
        bary2 = np.einsum("ijk,ik->ij", trans[:, :2], delta)
        bary = np.column_stack([bary2, 1.0 - bary2.sum(axis=1)])
        zvals = verts[qhull.simplices[s], 2]
        z[inside] = np.einsum("ij,ij->i", bary, zvals)
    if np.any(~inside):
        tree = cKDTree(verts[:, :2])
        _, nearest = tree.query(q[~inside])
        z[~inside] = verts[nearest, 2]
    return z.reshape(px.shape)


def tin_to_dtm(tri: Triangulation, spec: GridSpec) -> RasterGrid:
    """Rasterize a TIN by sampling cell centers; never nodata."""
    cx, cy = spec.cell_centers()
    values = _interpolate(tri, cx, cy)
    return RasterGrid(spec, values, "dtm")
