"""Kernel dispatch: compiled lane when available, numpy lane otherwise.

Set ``BEACHLAB_PURE=1`` to force the numpy lane (used by the benchmark
and to debug suspected kernel issues).
"""

import os

import numpy as np
from scipy.spatial import cKDTree

from . import pure

if os.environ.get("BEACHLAB_PURE"):
    _impl = pure
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND


def assemble_p1(vertices, triangles):
    return _impl.assemble_p1(vertices, triangles)


def triangle_neighbors(triangles):
    """Adjacency table: neighbors[t, i] faces the edge opposite vertex i."""
    tri = np.asarray(triangles, dtype=np.int64)
    m = len(tri)
    edges = np.stack(
        [tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=1
    ).reshape(-1, 2)
    edges = np.sort(edges, axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    sorted_edges = edges[order]
    same = np.all(sorted_edges[1:] == sorted_edges[:-1], axis=1)
    neighbors = np.full(3 * m, -1, dtype=np.int32)
    first = order[:-1][same]
    second = order[1:][same]
    neighbors[first] = second // 3
    neighbors[second] = first // 3
    return neighbors.reshape(m, 3)


def locate(points, vertices, triangles, neighbors=None, starts=None, tol=1e-12):
    """Containing triangle + barycentric weights, clamping outside points.

    Points that fall outside the triangulation are assigned their nearest
    triangle with clipped, renormalized weights; the returned ``inside``
    mask identifies them.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if neighbors is None and _impl.BACKEND == "cython":
        neighbors = triangle_neighbors(triangles)
    tri_idx, bary = _impl.locate_points(
        pts, vertices, triangles, neighbors=neighbors, starts=starts, tol=tol
    )
    inside = tri_idx >= 0
    if not inside.all():
        missing = np.where(~inside)[0]
        tri = np.asarray(triangles)
        verts = np.asarray(vertices, dtype=np.float64)
        centroids = verts[tri].mean(axis=1)
        _, nearest = cKDTree(centroids).query(pts[missing])
        tri_idx[missing] = nearest
        b = pure._barycentric(pts[missing], verts[tri[nearest]])
        b = np.clip(b, 0.0, None)
        bary[missing] = b / b.sum(axis=1)[:, None]
    return tri_idx, bary, inside


def interpolate(field, triangles, tri_idx, bary):
    """Evaluate a nodal P1 field at located points."""
    corners = np.asarray(triangles)[tri_idx]
    vals = np.asarray(field)[corners]
    if vals.ndim == 2:
        return np.einsum("pi,pi->p", vals, bary)
    return np.einsum("pi,pik->pk", bary, vals)
